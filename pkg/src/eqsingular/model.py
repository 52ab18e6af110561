"""Problem instances for the reinsurance-type singular control problem.

An instance bundles the drift, volatility, running and terminal losses, the
proportional cost, the discount function and the auxiliary bound data
(kappa, M) used by the a-priori estimates. Every coefficient is drawn from a
small closed registry of parametric families, each of which knows its own
analytic partial derivatives.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize


class IllPosedError(ValueError):
    """Raised when the terminal purchase problem has no finite minimizer."""


class InputError(ValueError):
    """Raised on invalid (e.g. non-finite) parameters."""


# ---------------------------------------------------------------------------
# Coefficient families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeanRevertingDrift:
    """mu(x, t) = b - a x."""

    b: float
    a: float
    family: str = "mean_reverting"

    def deriv(self, x, t, nx=0, nt=0):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        shape = np.broadcast(x, t).shape
        if nt > 0:
            return np.zeros(shape)
        if nx == 0:
            return np.broadcast_to(self.b - self.a * x, shape).astype(float)
        if nx == 1:
            return np.full(shape, -self.a)
        return np.zeros(shape)

    def params(self):
        return {"b": self.b, "a": self.a}


@dataclass(frozen=True)
class ConstantVolatility:
    sigma: float
    family: str = "constant"

    def deriv(self, x, t, nx=0, nt=0):
        shape = np.broadcast(np.asarray(x, float), np.asarray(t, float)).shape
        if nx == 0 and nt == 0:
            return np.full(shape, float(self.sigma))
        return np.zeros(shape)

    def params(self):
        return {"sigma": self.sigma}


@dataclass(frozen=True)
class ExponentialRate:
    """Psi(t) = psi0 * exp(rate * t)."""

    psi0: float
    rate: float
    family: str = "exponential"

    def value(self, t):
        return self.psi0 * np.exp(self.rate * np.asarray(t, float))

    def deriv(self, t):
        return self.rate * self.value(t)

    def params(self):
        return {"psi_family": "exponential", "psi0": self.psi0, "psi_rate": self.rate}


@dataclass(frozen=True)
class LinearRate:
    """Psi(t) = p + q t."""

    p: float
    q: float
    family: str = "linear"

    def value(self, t):
        return self.p + self.q * np.asarray(t, float)

    def deriv(self, t):
        return np.full(np.shape(t), float(self.q))

    def params(self):
        return {"psi_family": "linear", "psi_p": self.p, "psi_q": self.q}


@dataclass(frozen=True)
class ExpLinearLoss:
    """H = C_H exp(Psi(t) x) for x <= x0, continued linearly (C^1) above x0.

    The continuation matches value and slope at x0, so H_xx jumps there.
    x0 = inf gives the pure exponential.
    """

    C_H: float
    rate: ExponentialRate | LinearRate
    x0: float = math.inf
    family: str = "exp_linear"

    def deriv(self, x, t, nx=0, nt=0):
        if nt > 1:
            raise NotImplementedError("only first time derivatives are registered")
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        # psi depends on t only; let the arithmetic broadcast so a scalar t
        # is not expanded to the size of x
        psi = self.rate.value(t)
        dpsi = self.rate.deriv(t)
        xe = np.minimum(x, self.x0)
        e = np.exp(psi * xe)
        if nt == 0:
            left = self.C_H * psi**nx * e
        else:
            left = self.C_H * (nx * psi ** max(nx - 1, 0) * dpsi + psi**nx * dpsi * xe) * e
        if not math.isfinite(self.x0):
            return left
        # linear continuation: h0(t) + h1(t) (x - x0)
        e0 = np.exp(psi * self.x0)
        if nt == 0:
            h0 = self.C_H * e0
            h1 = self.C_H * psi * e0
        else:
            h0 = self.C_H * dpsi * self.x0 * e0
            h1 = self.C_H * (dpsi + psi * dpsi * self.x0) * e0
        if nx == 0:
            right = h0 + h1 * (x - self.x0)
        elif nx == 1:
            right = h1
        else:
            right = np.zeros_like(x)
        return np.where(x <= self.x0, left, right)

    def params(self):
        return {"C_H": self.C_H, "x0": self.x0, **self.rate.params()}


@dataclass(frozen=True)
class ExponentialTerminal:
    """F(x) = C_F exp(psi_F x)."""

    C_F: float
    psi_F: float
    family: str = "exponential"

    def deriv(self, x, n=0):
        return self.C_F * self.psi_F**n * np.exp(self.psi_F * np.asarray(x, float))

    def params(self):
        return {"C_F": self.C_F, "psi_F": self.psi_F}


@dataclass(frozen=True)
class AffineTerminal:
    """F(x) = intercept + slope x. Only meaningful on bounded windows."""

    slope: float
    intercept: float = 0.0
    family: str = "affine"

    def deriv(self, x, n=0):
        x = np.asarray(x, float)
        if n == 0:
            return self.intercept + self.slope * x
        if n == 1:
            return np.full(x.shape, float(self.slope))
        return np.zeros(x.shape)

    def params(self):
        return {"slope": self.slope, "intercept": self.intercept}


@dataclass(frozen=True)
class ConstantCost:
    c: float
    family: str = "constant"

    def value(self, t):
        return np.full(np.shape(t), float(self.c)) if np.ndim(t) else float(self.c)

    def deriv(self, t):
        return np.zeros(np.shape(t)) if np.ndim(t) else 0.0

    def params(self):
        return {"c": self.c}


@dataclass(frozen=True)
class ExponentialDiscount:
    gamma: float
    family: str = "exponential"

    def value(self, t):
        return np.exp(-self.gamma * np.asarray(t, float))

    def deriv(self, t):
        return -self.gamma * self.value(t)

    def params(self):
        return {"gamma": self.gamma}


@dataclass(frozen=True)
class HyperbolicDiscount:
    k: float
    family: str = "hyperbolic"

    def value(self, t):
        return 1.0 / (1.0 + self.k * np.asarray(t, float))

    def deriv(self, t):
        return -self.k / (1.0 + self.k * np.asarray(t, float)) ** 2

    def params(self):
        return {"k": self.k}


@dataclass(frozen=True)
class MixtureDiscount:
    """lam exp(-gamma1 t) + (1 - lam) exp(-gamma2 t)."""

    lam: float
    gamma1: float
    gamma2: float
    family: str = "mixture"

    def value(self, t):
        t = np.asarray(t, float)
        return self.lam * np.exp(-self.gamma1 * t) + (1 - self.lam) * np.exp(-self.gamma2 * t)

    def deriv(self, t):
        t = np.asarray(t, float)
        return (-self.gamma1 * self.lam * np.exp(-self.gamma1 * t)
                - self.gamma2 * (1 - self.lam) * np.exp(-self.gamma2 * t))

    def params(self):
        return {"lam": self.lam, "gamma1": self.gamma1, "gamma2": self.gamma2}


@dataclass(frozen=True)
class ExpKappa:
    """kappa(x, t) = exp(C_kappa x exp(kbar t))."""

    C_kappa: float
    kbar: float
    family: str = "exponential"

    def deriv(self, x, t, nx=0, nt=0):
        x = np.asarray(x, float)
        t = np.asarray(t, float)
        u = self.C_kappa * np.exp(self.kbar * t)
        k = np.exp(u * x)
        if nt == 0:
            return u**nx * k
        if nt == 1:
            # d/dt [u^n e^{ux}] = u' (n u^{n-1} + u^n x) e^{ux}, u' = kbar u
            du = self.kbar * u
            return du * (nx * u ** max(nx - 1, 0) + u**nx * x) * k
        raise NotImplementedError

    def params(self):
        return {"C_kappa": self.C_kappa, "kbar": self.kbar}


DISCOUNTS = {
    "exponential": (ExponentialDiscount, ("gamma",)),
    "hyperbolic": (HyperbolicDiscount, ("k",)),
    "mixture": (MixtureDiscount, ("lam", "gamma1", "gamma2")),
}


def make_discount(family: str, **params) -> ExponentialDiscount | HyperbolicDiscount | MixtureDiscount:
    try:
        cls, keys = DISCOUNTS[family]
    except KeyError:
        raise InputError(f"unknown discount family {family!r}") from None
    missing = [k for k in keys if k not in params]
    if missing:
        raise InputError(f"discount {family!r} needs {missing}")
    return cls(**{k: float(params[k]) for k in keys})


def parse_discount(text: str):
    """Parse 'hyperbolic:k=1' style discount specs."""
    family, _, rest = text.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        params[key.strip()] = float(val)
    return make_discount(family.strip(), **params)


# ---------------------------------------------------------------------------
# Instance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemInstance:
    drift: MeanRevertingDrift
    volatility: ConstantVolatility
    running_loss: ExpLinearLoss
    terminal_loss: ExponentialTerminal | AffineTerminal
    cost: ConstantCost
    discount: ExponentialDiscount | HyperbolicDiscount | MixtureDiscount
    horizon: float
    kappa: ExpKappa | None = None
    bound_M: float = 1.0

    def replace(self, **changes) -> "ProblemInstance":
        return dataclasses.replace(self, **changes)

    # Shorthands used throughout the solvers.
    def mu(self, x, t, nx=0, nt=0):
        return self.drift.deriv(x, t, nx, nt)

    def sigma(self, x, t, nx=0, nt=0):
        return self.volatility.deriv(x, t, nx, nt)

    def H(self, x, t, nx=0, nt=0):
        return self.running_loss.deriv(x, t, nx, nt)

    def F(self, x, n=0):
        return self.terminal_loss.deriv(x, n)

    def c(self, t):
        return self.cost.value(t)

    def beta(self, t):
        return self.discount.value(t)

    def dbeta(self, t):
        return self.discount.deriv(t)

    def invariant_violations(self, xs=None, nt=51) -> list[str]:
        """Names of the instance invariants violated on a sample grid."""
        if xs is None:
            xs = np.linspace(-5.0, 5.0, 201)
        xs = np.asarray(xs, float)
        ts = np.linspace(0.0, self.horizon, nt)
        X, Tm = np.meshgrid(xs, ts, indexing="ij")
        out = []
        b = self.beta(ts)
        if abs(float(self.beta(0.0)) - 1.0) > 1e-14:
            out.append("beta(0) = 1")
        if np.any(self.dbeta(ts) > 0) or np.any(b <= 0):
            out.append("beta non-increasing and positive")
        if np.any(self.sigma(X, Tm) <= 0):
            out.append("sigma > 0")
        if np.any(self.H(X, Tm) < 0):
            out.append("H >= 0")
        if np.any(self.F(xs) < 0):
            out.append("F >= 0")
        if np.any(np.asarray(self.c(ts)) <= 0):
            out.append("c > 0")
        if np.any(self.F(xs, 2) <= 0):
            out.append("a -> F(x-a) + c(T) a strictly convex")
        try:
            effective_terminal(self)
        except IllPosedError:
            out.append("finite terminal minimizer")
        return out


def discount_eval(instance: ProblemInstance, t: float) -> tuple[float, float]:
    """Return (beta(t), beta'(t)) for 0 <= t <= T."""
    if not (0.0 <= t <= instance.horizon):
        raise ValueError(f"t={t} outside [0, {instance.horizon}]")
    return float(instance.beta(t)), float(instance.dbeta(t))


# ---------------------------------------------------------------------------
# Effective terminal loss
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EffectiveTerminal:
    """Ftilde(x) = min_{a >= 0} F(x - a) + c_T a.

    Equal to F left of the kink x_star and affine with slope c_T right of it.
    """

    F: ExponentialTerminal | AffineTerminal
    c_T: float
    x_star: float

    def minimizer(self, x):
        return np.maximum(np.asarray(x, float) - self.x_star, 0.0)

    def deriv(self, x, n=0):
        x = np.asarray(x, float)
        if not math.isfinite(self.x_star):
            return self.F.deriv(x, n)
        xl = np.minimum(x, self.x_star)
        left = self.F.deriv(xl, n)
        if n == 0:
            right = self.F.deriv(self.x_star, 0) + self.c_T * (x - self.x_star)
        elif n == 1:
            right = np.full(x.shape, self.c_T)
        else:
            right = np.zeros(x.shape)
        return np.where(x <= self.x_star, left, right)

    def value(self, x):
        return self.deriv(x, 0)

    def d1(self, x):
        return self.deriv(x, 1)


def effective_terminal(instance: ProblemInstance, probe=(-50.0, 50.0)) -> EffectiveTerminal:
    F = instance.terminal_loss
    c_T = float(instance.c(instance.horizon))
    if not c_T > 0:
        raise IllPosedError("ill-posed terminal problem: c(T) must be positive")
    if isinstance(F, ExponentialTerminal):
        if F.C_F <= 0 or F.psi_F <= 0:
            raise IllPosedError("ill-posed terminal problem: F must be increasing and convex")
        x_star = math.log(c_T / (F.C_F * F.psi_F)) / F.psi_F
        return EffectiveTerminal(F, c_T, x_star)
    lo, hi = probe
    g = lambda x: float(F.deriv(x, 1)) - c_T  # noqa: E731
    if g(lo) > 0:
        raise IllPosedError("ill-posed terminal problem: F' exceeds c(T) on the whole probe range")
    if g(hi) <= 0:
        # F' never exceeds c(T): purchasing at T never pays off.
        return EffectiveTerminal(F, c_T, math.inf)
    return EffectiveTerminal(F, c_T, optimize.brentq(g, lo, hi, xtol=1e-14))


# ---------------------------------------------------------------------------
# Assumption checks
# ---------------------------------------------------------------------------


@dataclass
class Check:
    name: str
    margin: float
    strict: bool = False
    block: str = ""

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.margin):
            return False
        return self.margin > 0 if self.strict else self.margin >= 0


@dataclass
class AssumptionReport:
    checks: list[Check] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def add(self, name, margin, strict=False, block=""):
        self.checks.append(Check(name, float(margin) + 0.0, strict, block))  # no -0.0

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {
            "ok": self.ok,
            "checks": [
                {"name": c.name, "block": c.block, "margin": c.margin,
                 "strict": c.strict, "passed": c.passed}
                for c in self.checks
            ],
            "notes": self.notes,
        }

    def table(self) -> str:
        width = max(len(c.name) for c in self.checks) if self.checks else 10
        lines = []
        for c in self.checks:
            flag = "pass" if c.passed else "FAIL"
            lines.append(f"{flag}  {c.name:<{width}}  margin={c.margin:+.6e}")
        return "\n".join(lines)


@dataclass(frozen=True)
class RemarkParams:
    """Parameters of the mean-reverting / exponential-loss example family."""

    b: float
    a: float
    sigma: float
    C_F: float
    psi_F: float
    C_H: float
    psi_H: ExponentialRate | LinearRate
    c: float
    x0: float
    kbar: float
    C_kappa: float
    T: float
    minus_dbeta0: float       # -beta'(0)
    min_log_dbeta: float      # min over [0, T] of beta'/beta

    @classmethod
    def from_instance(cls, inst: ProblemInstance, nt: int = 2001) -> "RemarkParams":
        ts = np.linspace(0.0, inst.horizon, nt)
        return cls(
            b=inst.drift.b, a=inst.drift.a, sigma=inst.volatility.sigma,
            C_F=inst.terminal_loss.C_F, psi_F=inst.terminal_loss.psi_F,
            C_H=inst.running_loss.C_H, psi_H=inst.running_loss.rate,
            c=inst.cost.c, x0=inst.running_loss.x0,
            kbar=inst.kappa.kbar, C_kappa=inst.kappa.C_kappa, T=inst.horizon,
            minus_dbeta0=-float(inst.dbeta(0.0)),
            min_log_dbeta=float(np.min(inst.dbeta(ts) / inst.beta(ts))),
        )


def remark_K(p: RemarkParams, nt: int = 2001) -> float:
    ts = np.linspace(0.0, p.T, nt)
    psi = p.psi_H.value(ts)
    dpsi = p.psi_H.deriv(ts)
    num = -2 * dpsi / psi - 0.5 * p.sigma**2 * psi**2 - p.b * psi + 2 * p.a
    return float(np.min(num / (dpsi - p.a * psi)))


def check_remark_example(p: RemarkParams, nt: int = 2001) -> AssumptionReport:
    """Evaluate the example's sufficient conditions, block by block, in order."""
    vals = [v for v in dataclasses.asdict(p).values() if isinstance(v, (int, float))]
    vals += list(p.psi_H.params().values())[1:]
    if not all(math.isfinite(v) for v in vals):
        raise InputError("non-finite parameter")
    rep = AssumptionReport()
    ts = np.linspace(0.0, p.T, nt)
    psi = p.psi_H.value(ts)
    dpsi = p.psi_H.deriv(ts)
    s2 = p.sigma**2

    B = "first"
    for name, val in (("b", p.b), ("σ", p.sigma), ("C_F", p.C_F), ("C_H", p.C_H)):
        rep.add(f"{name} > 0", val, True, B)
    rep.add("Ψ_F > max{1, 1/b}", p.psi_F - max(1.0, 1.0 / p.b) if p.b > 0 else -math.inf, True, B)
    rep.add("a ∈ (max{b+½σ², 1}, bΨ_F+½σ²Ψ_F²): lower", p.a - max(p.b + 0.5 * s2, 1.0), True, B)
    rep.add("a ∈ (max{b+½σ², 1}, bΨ_F+½σ²Ψ_F²): upper",
            p.b * p.psi_F + 0.5 * s2 * p.psi_F**2 - p.a, True, B)
    rep.add("κ̄ > a", p.kbar - p.a, True, B)
    rep.add("C_κ ∈ (0, Ψ_F e^{-(κ̄+a)T}): lower", p.C_kappa, True, B)
    rep.add("C_κ ∈ (0, Ψ_F e^{-(κ̄+a)T}): upper",
            p.psi_F * math.exp(-(p.kbar + p.a) * p.T) - p.C_kappa, True, B)

    B = "second"
    rep.add("min Ψ_H > C_κ e^{κ̄T}", psi.min() - p.C_kappa * math.exp(p.kbar * p.T), True, B)
    rep.add("max Ψ_H < Ψ_F", p.psi_F - psi.max(), True, B)
    rep.add("min Ψ_H'/Ψ_H > a", (dpsi / psi).min() - p.a, True, B)

    B = "third"
    K = remark_K(p, nt)
    rep.notes["K"] = K
    rep.add("κ̄ ∈ (max Ψ_H, Ψ_F): lower", p.kbar - psi.max(), True, B)
    rep.add("κ̄ ∈ (max Ψ_H, Ψ_F): upper", p.psi_F - p.kbar, True, B)
    # The two kbar requirements ("kbar > a" and the bracket) constrain one
    # parameter; flag data for which they cannot hold simultaneously.
    rep.add("κ̄ constraints compatible: max{a, max Ψ_H} < Ψ_F", p.psi_F - max(p.a, psi.max()), True, B)
    rep.add("c > 0", p.c, True, B)
    rep.add("c < C_F Ψ_F e^{Ψ_F K}", p.C_F * p.psi_F * math.exp(p.psi_F * K) - p.c, True, B)

    B = "fourth"
    lo = math.log(p.c / (p.C_F * p.psi_F)) / p.psi_F if p.c > 0 else -math.inf
    hi = min(math.log(p.a * p.c / (p.C_F * p.psi_F)) / p.psi_F if p.c > 0 else -math.inf, K)
    rep.add("x₀ > ln(c/(C_FΨ_F))/Ψ_F", p.x0 - lo, True, B)
    rep.add("x₀ < min{ln(ac/(C_FΨ_F))/Ψ_F, K}", hi - p.x0, True, B)

    B = "fifth"
    r = p.c / (p.C_F * p.psi_F)
    b1 = np.min(p.C_H * psi**2 / (p.c * p.psi_F) * r ** (psi / p.psi_F))
    rep.add("-β'(0) ≤ min C_HΨ_H²/(cΨ_F) (c/(C_FΨ_F))^{Ψ_H/Ψ_F}", b1 - p.minus_dbeta0, False, B)
    b2 = np.min(-2 * dpsi / psi - (dpsi - p.a * psi) * p.x0 - 0.5 * s2 * psi**2 - p.b * psi + 2 * p.a)
    rep.add("-β'(0) ≤ min{-2Ψ_H'/Ψ_H - (Ψ_H'-aΨ_H)x₀ - ½σ²Ψ_H² - bΨ_H + 2a}", b2 - p.minus_dbeta0, False, B)
    b3 = np.max(p.C_H * psi / p.c * np.exp(psi * p.x0)) - p.a
    rep.add("min β'/β ≥ max{C_HΨ_H e^{Ψ_H x₀}/c} - a", p.min_log_dbeta - b3, False, B)
    return rep


def _Lx(inst: ProblemInstance, X, Tf, phi, phi_x, phi_xx, phi_t=0.0):
    """L phi for phi given through its derivatives; coefficients at (X, Tf).

    Tf is physical time T - t; phi_t is the derivative w.r.t. reversed time.
    """
    sig = inst.sigma(X, Tf)
    sig_x = inst.sigma(X, Tf, 1)
    return (-phi_t + 0.5 * sig**2 * phi_xx + (sig * sig_x + inst.mu(X, Tf)) * phi_x
            + inst.mu(X, Tf, 1) * phi)


def check_assumption_grid(inst: ProblemInstance, probe) -> AssumptionReport:
    """Worst margin of each pointwise inequality over the probe nodes.

    probe is a SpaceTimeGrid (or any object with x, T and Nt). Inequalities
    are evaluated in reversed time t, coefficients at physical time T - t.
    """
    rep = AssumptionReport()
    x = np.asarray(probe.x, float)
    t = np.linspace(0.0, inst.horizon, probe.Nt)
    X, Tr = np.meshgrid(x, t, indexing="ij")
    Tf = inst.horizon - Tr
    Ft = effective_terminal(inst)
    m = lambda arr: float(np.min(arr))  # noqa: E731

    sig = inst.sigma(X, Tf)
    rep.add("(c134) σ > 0", m(sig), True, "c134")
    rep.add("(c134) μ_x ≤ 0", m(-inst.mu(X, Tf, 1)), False, "c134")
    rep.add("(c134) μ_xx ≥ 0", m(inst.mu(X, Tf, 2)), False, "c134")
    rep.add("(c134) μ_xxx ≥ 0", m(inst.mu(X, Tf, 3)), False, "c134")

    db0 = float(inst.dbeta(0.0))
    Fpp = Ft.deriv(X, 2)
    Hxx = inst.H(X, Tf, 2)
    rep.add("(c2) 0 ≤ -β'(0)F̃''", m(-db0 * Fpp), False, "c2")
    rep.add("(c2) -β'(0)F̃'' ≤ H_xx", m(Hxx + db0 * Fpp), False, "c2")

    rep.add("(t1) c'(T-t) ≤ 0", m(-np.asarray(inst.cost.deriv(Tf))), False, "t1")
    rep.add("(t1) σ_t ≤ 0", m(-inst.sigma(X, Tf, 0, 1)), False, "t1")
    rep.add("(t1) μ_xt ≤ 0", m(-inst.mu(X, Tf, 1, 1)), False, "t1")
    t2 = (sig * inst.sigma(X, Tf, 1, 1) + inst.sigma(X, Tf, 0, 1) * inst.sigma(X, Tf, 1)
          + inst.mu(X, Tf, 0, 1))
    rep.add("(t2) σσ_xt + σ_tσ_x + μ_t ≤ 0", m(-t2), False, "t2")
    c5 = sig * inst.sigma(X, Tf, 2) + inst.sigma(X, Tf, 1) ** 2 + 2 * inst.mu(X, Tf, 1)
    rep.add("(c5) σσ_xx + σ_x² + 2μ_x ≤ 0", m(-c5), False, "c5")

    # rho(t) = max over tau in [0, t] of -beta'/beta (window [0, T - t_phys]).
    taus = np.linspace(0.0, inst.horizon, 4 * probe.Nt)
    ratio = -inst.dbeta(taus) / inst.beta(taus)
    run_max = np.maximum.accumulate(ratio)
    rho = np.interp(Tr, taus, run_max)
    # max over [0, Tr] is a running max; np.interp of a running max is exact at taus
    cT = np.asarray(inst.c(Tf), float) * np.ones_like(X)
    Hx = inst.H(X, Tf, 1)
    Fp = Ft.deriv(X, 1)
    lhs = rho * cT + np.asarray(inst.cost.deriv(Tf)) + inst.mu(X, Tf, 1) * cT
    rep.add("(c6) ρc + c' + μ_x c ≤ -H_x", m(-Hx - lhs), False, "c6")
    rep.add("(c6) -H_x < β'(0)F̃'", m(db0 * Fp + Hx), True, "c6")
    rep.add("(c6) β'(0)F̃' ≤ 0", m(-db0 * Fp), False, "c6")
    LF = _Lx(inst, X, Tf, Fp, Ft.deriv(X, 2), Ft.deriv(X, 3))
    rep.add("(c6) LF̃' ≥ 0", m(LF), False, "c6")

    # L(H_x(x, T-t)); reversed-time derivative of H_x(x, T-t) is -H_xt.
    LHx = _Lx(inst, X, Tf, Hx, Hxx, inst.H(X, Tf, 3), phi_t=-inst.H(X, Tf, 1, 1))
    rep.add("(c7) L(H_x) ≤ β'(0)H_x", m(db0 * Hx - LHx), False, "c7")
    mu_x = inst.mu(X, Tf, 1)
    sig_x = inst.sigma(X, Tf, 1)
    sig_xx = inst.sigma(X, Tf, 2)
    dL = (inst.H(X, Tf, 2, 1) + sig * sig_x * inst.H(X, Tf, 3) + 0.5 * sig**2 * inst.H(X, Tf, 4)
          + (sig_x**2 + sig * sig_xx + mu_x) * inst.H(X, Tf, 2)
          + (sig * sig_x + inst.mu(X, Tf)) * inst.H(X, Tf, 3)
          + inst.mu(X, Tf, 2) * Hx + mu_x * Hxx)
    rep.add("(c8) ∂_x L(H_x) ≤ β'(0)H_xx", m(db0 * Hxx - dL), False, "c8")

    left = x <= -1.0
    if inst.kappa is not None and np.any(left):
        XL, TrL = X[left], Tr[left]
        TfL = inst.horizon - TrL
        kap = inst.kappa
        k0 = kap.deriv(XL, TfL)
        Lk = _Lx(inst, XL, TfL, k0, kap.deriv(XL, TfL, 1), kap.deriv(XL, TfL, 2),
                 phi_t=-kap.deriv(XL, TfL, 0, 1))
        rep.add("(c9) M L(κ) ≤ -H_x (x ≤ -1)", m(-Hx[left] - inst.bound_M * Lk), False, "c9")
        rep.add("(c10) F̃' ≤ Mκ (x ≤ -1)", m(inst.bound_M * k0 - Fp[left]), False, "c10")
        kap_edge = float(np.max(kap.deriv(x[0], inst.horizon - t)))
        rep.add("(b) κ(x_min) < 1e-8", 1e-8 - kap_edge, True, "b")
        rep.add("(b) μ_xx κ → 0 at x_min", 1e-8 - float(np.max(np.abs(inst.mu(x[0], Tf[0], 2) * kap_edge))), True, "b")
    rep.add("(b) H → 0 at x_min", 1e-8 - float(np.max(inst.H(x[0], inst.horizon - t))), True, "b")
    rep.add("(b) H_xx → 0 at x_min", 1e-8 - float(np.max(np.abs(inst.H(x[0], inst.horizon - t, 2)))), True, "b")
    rep.add("(b) F → 0 at x_min", 1e-8 - float(inst.F(x[0])), True, "b")
    return rep


def kappa_window_left(inst: ProblemInstance, level: float = 1e-8) -> float:
    """Left truncation edge where kappa(x, .) drops below `level` for all t."""
    # kappa is largest at t = 0 for x < 0 (C_kappa e^{kbar t} grows with t)
    return math.log(level) / inst.kappa.C_kappa


def remark_instance_from(p: RemarkParams, discount, M: float) -> ProblemInstance:
    return ProblemInstance(
        drift=MeanRevertingDrift(p.b, p.a),
        volatility=ConstantVolatility(p.sigma),
        running_loss=ExpLinearLoss(p.C_H, p.psi_H, p.x0),
        terminal_loss=ExponentialTerminal(p.C_F, p.psi_F),
        cost=ConstantCost(p.c),
        discount=discount,
        horizon=p.T,
        kappa=ExpKappa(p.C_kappa, p.kbar),
        bound_M=M,
    )

