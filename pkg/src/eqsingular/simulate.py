"""Monte-Carlo layer: generate the singular control of a (W, P) law by
discrete Skorohod reflection and estimate the discounted objective.

Paths are stepped with Euler-Maruyama; any overshoot past the boundary
Gamma_fwd(t) is removed by a purchase charged at the current cost. Noise is
counter based: the normal draws of lattice step k come from a Philox stream
keyed by (seed, k), so runs that share a time lattice share noise exactly,
whatever their start time. The lattice is the half step dt/2; a run at step
dt uses the sum of two lattice increments, which makes the dt and dt/2 runs
a coupled pair for the discretization-bias estimate.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .grid import FreeBoundary
from .model import ProblemInstance, effective_terminal
from .operators import ContractError

# Projection onto a boundary converges with weak order 1/2; the Richardson
# factor turns |J(dt) - J(dt/2)| into a bias bound for J(dt).
WEAK_ORDER = 0.5
RICHARDSON = 1.0 / (1.0 - 2.0 ** (-WEAK_ORDER))


@dataclass(frozen=True)
class PathConfig:
    x0: float
    t0: float
    n_paths: int
    dt: float
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("need at least one path")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("antithetic sampling needs an even path count")


@dataclass
class MCReport:
    estimate: float
    stderr: float
    n_paths: int
    running: float
    terminal: float
    cost: float
    comparison: float | None = None
    z: float | None = None
    bias_allowance: float | None = None
    fine_estimate: float | None = None
    extra: dict = field(default_factory=dict)

    def within(self, k: float = 3.0) -> bool:
        if self.comparison is None:
            raise ValueError("no comparison value")
        return abs(self.estimate - self.comparison) <= k * self.stderr + (self.bias_allowance or 0.0)

    def to_dict(self):
        return asdict(self)


def _normals(seed: int, index: int, n: int, antithetic: bool) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), int(index)]))
    if antithetic:
        z = gen.standard_normal(n // 2)
        return np.concatenate([z, -z])
    return gen.standard_normal(n)


@dataclass
class _PathResult:
    J: np.ndarray
    running: np.ndarray
    terminal: np.ndarray
    cost: np.ndarray
    X: np.ndarray | None = None
    xi: np.ndarray | None = None


def _simulate(inst: ProblemInstance, gam: FreeBoundary, x0: float, t0: float, n: int,
              dt_lattice: float, substeps: int, seed: int, s: float, antithetic: bool,
              hold: tuple | None = None, record: int = 0) -> _PathResult:
    """Core simulator. hold = (t_end, jump) suspends the law on [t0, t_end):
    an immediate purchase of `jump` at t0 and no reflection until t_end."""
    return _simulate_arms(inst, gam, x0, t0, n, dt_lattice, substeps, seed, s, antithetic,
                          [hold], record)[0]


def _simulate_arms(inst: ProblemInstance, gam: FreeBoundary, x0: float, t0: float, n: int,
                   dt_lattice: float, substeps: int, seed: int, s: float, antithetic: bool,
                   holds: list, record: int = 0) -> list[_PathResult]:
    """Several arms on the same noise; one row of state per entry of `holds`.

    Rows are updated elementwise, so each arm is bit-identical to a run on its own.
    """
    T = inst.horizon
    if not (0.0 <= t0 < T):
        raise ContractError("start time must lie in [0, T)")
    dt = dt_lattice * substeps
    n_steps = int(round((T - t0) / dt))
    if n_steps < 1 or abs(n_steps * dt - (T - t0)) > 1e-9 * T:
        raise ContractError(f"T - t0 = {T - t0} is not a multiple of dt = {dt}")
    k0 = int(round(t0 / dt_lattice))
    if abs(k0 * dt_lattice - t0) > 1e-9 * T:
        raise ContractError("t0 must lie on the noise lattice")
    ft = effective_terminal(inst)
    m = len(holds)
    X = np.full((m, n), float(x0))
    running = np.zeros((m, n))
    cost = np.zeros((m, n))
    xi = np.zeros((m, n))
    hold_end = np.array([t0 if h is None else h[0] for h in holds])
    g0 = float(gam.at_forward(t0))
    jump = np.stack([np.maximum(X[i] - g0, 0.0) if h is None else np.full(n, float(h[1]))
                     for i, h in enumerate(holds)])
    cost += inst.beta(t0 - s) * inst.c(t0) * jump
    X -= jump
    xi += jump
    rec_X = rec_xi = None
    if record:
        rec_X = np.empty((m, record, n_steps + 1))
        rec_xi = np.empty((m, record, n_steps + 1))
        rec_X[:, :, 0], rec_xi[:, :, 0] = X[:, :record], xi[:, :record]
    sq = math.sqrt(dt_lattice)
    for k in range(n_steps):
        t = t0 + k * dt
        t1 = t0 + (k + 1) * dt
        running += inst.beta(t - s) * inst.H(X, t) * dt
        dW = np.zeros(n)
        for r in range(substeps):
            dW += _normals(seed, k0 + k * substeps + r, n, antithetic)
        X = X + inst.mu(X, t) * dt + inst.sigma(X, t) * sq * dW
        if k + 1 < n_steps:
            live = t1 >= hold_end - 1e-12 * T
            if live.any():
                over = np.maximum(X - float(gam.at_forward(t1)), 0.0)
                over[~live] = 0.0
                cost += inst.beta(t1 - s) * inst.c(t1) * over
                X -= over
                xi += over
        if record:
            rec_X[:, :, k + 1], rec_xi[:, :, k + 1] = X[:, :record], xi[:, :record]
    # at T: optimal terminal purchase, realized through Ftilde
    terminal = inst.beta(T - s) * ft.value(X)
    J = running + terminal + cost
    return [_PathResult(J[i], running[i], terminal[i], cost[i],
                        None if rec_X is None else rec_X[i], None if rec_xi is None else rec_xi[i])
            for i in range(m)]


def _mean_se(J: np.ndarray, antithetic: bool):
    if antithetic:
        h = len(J) // 2
        J = 0.5 * (J[:h] + J[h:])
    se = float(np.std(J, ddof=1) / math.sqrt(len(J))) if len(J) > 1 else 0.0
    return float(np.mean(J)), se


def _report(res: _PathResult, cfg: PathConfig) -> MCReport:
    est, se = _mean_se(res.J, cfg.antithetic)
    return MCReport(estimate=est, stderr=se, n_paths=cfg.n_paths,
                    running=float(np.mean(res.running)), terminal=float(np.mean(res.terminal)),
                    cost=float(np.mean(res.cost)))


def simulate_family_point(inst: ProblemInstance, gam: FreeBoundary, cfg: PathConfig, s: float,
                          comparison: float | None = None, bias: bool = True,
                          record: int = 0) -> MCReport:
    """Objective discounted from time s <= t0 (s = t0 gives the objective itself)."""
    if s > cfg.t0 + 1e-12:
        raise ContractError("s must not exceed t0")
    lattice = cfg.dt / 2
    args = (inst, gam, cfg.x0, cfg.t0, cfg.n_paths)
    coarse = _simulate(*args, lattice, 2, cfg.seed, s, cfg.antithetic, record=record)
    rep = _report(coarse, cfg)
    if bias:
        fine = _simulate(*args, lattice, 1, cfg.seed, s, cfg.antithetic)
        fine_est, _ = _mean_se(fine.J, cfg.antithetic)
        _, se_diff = _mean_se(coarse.J - fine.J, cfg.antithetic)
        rep.fine_estimate = fine_est
        rep.bias_allowance = RICHARDSON * (abs(rep.estimate - fine_est) + 2 * se_diff)
    if comparison is not None:
        rep.comparison = float(comparison)
        rep.z = (rep.estimate - rep.comparison) / rep.stderr if rep.stderr > 0 else 0.0
    if record:
        rep.extra["X"] = coarse.X
        rep.extra["xi"] = coarse.xi
    return rep


def simulate_objective(inst: ProblemInstance, gam: FreeBoundary, cfg: PathConfig,
                       comparison: float | None = None, bias: bool = True,
                       record: int = 0) -> MCReport:
    return simulate_family_point(inst, gam, cfg, cfg.t0, comparison, bias, record)


@dataclass
class PerturbationReport:
    delta_hat: float
    paired_se: float
    h: float
    mode: str
    jump: float
    bias_allowance: float
    fine_delta_hat: float

    @property
    def bound(self) -> float:
        return -(3.0 * self.paired_se + self.bias_allowance)

    @property
    def passed(self) -> bool:
        return self.delta_hat >= self.bound

    def to_dict(self):
        return {**asdict(self), "bound": self.bound, "passed": self.passed}


def perturbation_test(inst: ProblemInstance, gam: FreeBoundary, cfg: PathConfig, h: float,
                      mode: str = "no-purchase", delta: float | None = None) -> PerturbationReport:
    """(J(perturbed) - J(law)) / h with common random numbers.

    The perturbed arm applies eta on [t0, t0 + h) and the law afterwards:
    'no-purchase' keeps the control flat; 'extra-jump' buys delta at t0 and
    then keeps it flat.
    """
    return perturbation_tests(inst, gam, cfg, [(h, mode)], delta)[0]


def _jump_for(mode: str, delta) -> float:
    if mode == "no-purchase":
        return 0.0
    if mode == "extra-jump":
        if delta is None or delta < 0:
            raise ContractError("extra-jump needs delta >= 0")
        return float(delta)
    raise ValueError(f"unknown mode {mode!r}")


def perturbation_tests(inst: ProblemInstance, gam: FreeBoundary, cfg: PathConfig, cases,
                       delta: float | None = None) -> list[PerturbationReport]:
    """Batch of perturbation tests at one start point; `cases` is a list of (h, mode).

    All arms share the noise and one simulation of the law, which gives the same
    numbers as separate perturbation_test calls at a fraction of the cost.
    """
    holds = [None]
    for h, mode in cases:
        if h < cfg.dt:
            raise ContractError("h must be at least the Monte-Carlo step")
        if cfg.t0 + h >= inst.horizon:
            raise ContractError("t0 + h must be before T")
        holds.append((cfg.t0 + h, _jump_for(mode, delta)))
    lattice = cfg.dt / 2
    diffs = {}
    for sub in (2, 1):
        arms = _simulate_arms(inst, gam, cfg.x0, cfg.t0, cfg.n_paths, lattice, sub, cfg.seed,
                              cfg.t0, cfg.antithetic, holds)
        diffs[sub] = [(B.J - arms[0].J) / h for B, (h, _) in zip(arms[1:], cases)]
    out = []
    for i, (h, mode) in enumerate(cases):
        coarse, fine_d = diffs[2][i], diffs[1][i]
        est, se = _mean_se(coarse, cfg.antithetic)
        fine, _ = _mean_se(fine_d, cfg.antithetic)
        _, se_diff = _mean_se(coarse - fine_d, cfg.antithetic)
        bias = RICHARDSON * (abs(est - fine) + 2 * se_diff)
        out.append(PerturbationReport(est, se, h, mode, holds[i + 1][1], bias, fine))
    return out
