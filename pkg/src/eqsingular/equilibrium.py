"""Fixed-point driver for the coupled system, residual checks and the
exponential-discount oracle.

The equilibrium value V solves an obstacle problem whose source depends on
d(x, t) = f_s(x, t, t); d in turn comes from the auxiliary family built on
the free boundary of V. solve_equilibrium alternates the two solves (Picard
iteration with damping) until v = V_x stops moving.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import coupling, obstacle
from .grid import FamilyField, FreeBoundary, ScalarField, SpaceTimeGrid
from .model import ExponentialDiscount, ProblemInstance, check_assumption_grid, effective_terminal
from .operators import ContractError, apply_A_all

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FixedPointOptions:
    damping: float = 1.0
    tol: float = 1e-6
    max_iter: int = 100
    init: str = "zero"                 # or "exponential-proxy"
    coupling_mode: str = coupling.FAMILY
    obstacle: obstacle.ObstacleSolveOptions = field(default_factory=obstacle.ObstacleSolveOptions)

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.init not in ("zero", "exponential-proxy"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.coupling_mode not in coupling.MODES:
            raise ValueError(f"unknown coupling mode {self.coupling_mode!r}")

    def to_dict(self):
        return {"damping": self.damping, "tol": self.tol, "max_iter": self.max_iter,
                "init": self.init, "coupling_mode": self.coupling_mode,
                "eps_schedule": list(self.obstacle.eps_schedule),
                "method": self.obstacle.method}


@dataclass
class EquilibriumSolution:
    v: ScalarField            # reversed time
    V: ScalarField            # forward time
    gamma: FreeBoundary       # reversed time
    d: ScalarField            # forward time
    d_x: ScalarField          # forward time
    f: FamilyField | None
    trace: list
    converged: bool
    options: FixedPointOptions
    q: FamilyField | None = None
    warnings: list = field(default_factory=list)

    @property
    def grid(self) -> SpaceTimeGrid:
        return self.V.grid

    @property
    def iterations(self) -> int:
        """Number of coupling updates performed."""
        return sum(1 for t in self.trace if t.get("coupled"))


def r0_margins(inst: ProblemInstance, grid: SpaceTimeGrid, d: ScalarField, d_x: ScalarField,
               gam: FreeBoundary | None = None) -> dict:
    """Worst margins of the admissible band for the coupling output.

    0 <= d_x < H_x everywhere and 0 <= d_xx <= H_xx on the waiting region.
    Negative margins are violations.
    """
    X, Tm = np.meshgrid(grid.x, grid.t, indexing="ij")
    Hx = inst.H(X, Tm, 1)
    Hxx = inst.H(X, Tm, 2)
    dx = d_x.forward().values
    dv = d.forward().values
    d2 = (dv[2:] - 2 * dv[1:-1] + dv[:-2]) / grid.dx**2
    if gam is None:
        inW = np.ones_like(d2, dtype=bool)
    else:
        gf = gam.forward_values()
        inW = grid.x[2:, None] <= gf[None, :] + 1e-9 * grid.dx
    return {
        "dx_low": float(np.min(dx)),
        "dx_high": float(np.min(Hx - dx)),
        "dxx_low": float(np.min(np.where(inW, d2, np.inf))) if np.any(inW) else 0.0,
        "dxx_high": float(np.min(np.where(inW, Hxx[1:-1] - d2, np.inf))) if np.any(inW) else 0.0,
    }


def _coupling_update(inst, grid, gam, mode):
    if mode == coupling.FAMILY:
        q = coupling.solve_sensitivity_family(inst, grid, gam)
        d, d_x = coupling.coupling_term(q, gam)
        return d, d_x, q
    w = coupling.paper_literal_w(inst, grid, gam).forward()
    dv = cumulative_trapezoid(w.values, grid.x, axis=0, initial=0.0)
    return ScalarField(dv, grid), w, None


def _oscillating(deltas) -> bool:
    if len(deltas) < 4:
        return False
    a, b, c = deltas[-3], deltas[-2], deltas[-1]
    return c >= 0.9 * b and abs(c - a) <= 0.05 * max(c, 1e-300)


def solve_equilibrium(inst: ProblemInstance, grid: SpaceTimeGrid,
                      opts: FixedPointOptions | None = None) -> EquilibriumSolution:
    opts = opts or FixedPointOptions()
    notes = []
    rep = check_assumption_grid(inst, grid)
    if not rep.ok:
        notes.append("assumption checks failed: " + "; ".join(rep.failed()))
        log.warning(notes[-1])
    zero = ScalarField(np.zeros((grid.Nx, grid.Nt)), grid)
    d, d_x = zero, zero
    if opts.init == "exponential-proxy":
        v0 = obstacle.solve(inst, grid, None, opts.obstacle)
        k = -float(inst.dbeta(0.0))
        V0 = obstacle.integrate_to_value(v0, terminal=effective_terminal(inst))
        d = ScalarField(k * V0.values, grid)
        d_x = ScalarField(k * v0.forward().values, grid)
    trace = []
    last = {}
    try:
        v, gam, q, converged, d, d_x = _iterate(inst, grid, opts, d, d_x, trace, notes, last)
    except (ContractError, obstacle.ConvergenceError, obstacle.StagnationError) as exc:
        # hand the caller the trace and the last complete iterate for its report
        exc.trace = trace
        exc.partial = None
        if last:
            notes.append(f"stopped: {exc}")
            exc.partial = _finish(inst, grid, opts, last["v"], last["gam"], last["d"], last["d_x"],
                                  last["q"], trace, False, notes)
        raise
    if not converged:
        notes.append(f"no convergence within {opts.max_iter} iterations")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
    return _finish(inst, grid, opts, v, gam, d, d_x, q, trace, converged, notes)


def _finish(inst, grid, opts, v, gam, d, d_x, q, trace, converged, notes):
    f = coupling.solve_value_family(inst, grid, gam)
    V = obstacle.integrate_to_value(v, terminal=effective_terminal(inst))
    return EquilibriumSolution(v=v, V=V, gamma=gam, d=d, d_x=d_x, f=f, trace=trace,
                               converged=converged, options=opts, q=q, warnings=notes)


def _iterate(inst, grid, opts, d, d_x, trace, notes, last):
    theta = opts.damping
    deltas = []
    v_prev = gam_prev = q = None
    converged = False
    for it in range(opts.max_iter + 1):
        v = obstacle.solve(inst, grid, d_x, opts.obstacle)
        gam = obstacle.extract_boundary(v, inst)
        last.update(v=v, gam=gam, d=d, d_x=d_x, q=q)
        delta = math.inf if v_prev is None else float(np.max(np.abs(v.values - v_prev.values)))
        entry = {"iteration": it, "delta_v": delta, "C_n": v.meta["C_n"],
                 "gamma_move": (0.0 if gam_prev is None
                                else float(np.max(np.abs(gam.values - gam_prev.values)))),
                 "coupled": False}
        trace.append(entry)
        if it > 0:
            deltas.append(delta)
        if delta < opts.tol:
            converged = True
            break
        if it == opts.max_iter:
            break
        if _oscillating(deltas):
            msg = f"period-2 oscillation in the trace at iteration {it}; try a smaller damping"
            if msg not in notes:
                notes.append(msg)
                log.warning(msg)
        d_new, dx_new, q = _coupling_update(inst, grid, gam, opts.coupling_mode)
        entry["coupled"] = True
        entry["r0"] = r0_margins(inst, grid, d_new, dx_new, gam)
        d = ScalarField((1 - theta) * d.values + theta * d_new.values, grid)
        d_x = ScalarField((1 - theta) * d_x.values + theta * dx_new.values, grid)
        v_prev, gam_prev = v, gam
    return v, gam, q, converged, d, d_x


# ---------------------------------------------------------------------------
# Residuals
# ---------------------------------------------------------------------------


@dataclass
class ResidualReport:
    r1_neg: float          # max(0, -min r1)
    r2_neg: float          # max(0, -min r2)
    complementarity: float  # max |min(r1, r2)|
    family_W: float
    family_P: float
    terminal_f: float
    terminal_V: float
    n_P_nodes: int
    worst: dict

    @property
    def hjb_tol(self) -> float:
        return max(self.r1_neg, self.r2_neg, self.complementarity)

    def to_dict(self):
        return {"r1_neg": self.r1_neg, "r2_neg": self.r2_neg,
                "complementarity": self.complementarity, "hjb_tol": self.hjb_tol,
                "family_W": self.family_W, "family_P": self.family_P,
                "terminal_f": self.terminal_f, "terminal_V": self.terminal_V,
                "n_P_nodes": self.n_P_nodes, "worst": self.worst}


def hjb_residuals(inst: ProblemInstance, V: ScalarField, v: ScalarField, d: ScalarField):
    """r1 = AV + H - d and r2 = c - V_x at interior x nodes and t < T."""
    g = V.grid
    Vf = V.forward().values
    vf = v.forward().values
    X, Tm = np.meshgrid(g.x[1:-1], g.t, indexing="ij")
    r1 = apply_A_all(Vf, g, inst) + inst.H(X, Tm) - d.forward().values[1:-1]
    r2 = np.asarray(inst.c(Tm), float) - vf[1:-1]
    return r1[:, :-1], r2[:, :-1]


def _argloc(arr, xs, ts, fn=np.argmax):
    i, j = np.unravel_index(fn(arr), arr.shape)
    return {"x": float(xs[i]), "t": float(ts[j])}


def verify_residuals(sol: EquilibriumSolution, inst: ProblemInstance) -> ResidualReport:
    g = sol.grid
    r1, r2 = hjb_residuals(inst, sol.V, sol.v, sol.d)
    xs, ts = g.x[1:-1], g.t[:-1]
    m = np.minimum(r1, r2)
    worst = {"r1": _argloc(-r1, xs, ts), "r2": _argloc(-r2, xs, ts),
             "complementarity": _argloc(np.abs(m), xs, ts)}
    ft = effective_terminal(inst)
    fam_W = fam_P = term_f = 0.0
    nP = 0
    if sol.f is not None:
        f = sol.f
        gf = sol.gamma.forward_values()
        inW = g.x[1:-1, None] <= gf[None, :] + 1e-9 * g.dx
        inP = g.x[:, None] > gf[None, :] + 1e-9 * g.dx
        nP = int(np.sum(inP[:, :-1]))
        X, Tm = np.meshgrid(g.x[1:-1], g.t, indexing="ij")
        for k, s in enumerate(g.s):
            valid = f.valid[:, k]
            fk = f.values[:, :, k]
            # A needs a time derivative; use the valid rows only
            js = np.nonzero(valid)[0]
            if len(js) < 2:
                continue
            sub = fk[:, js]
            Af = _A_subset(sub, g, inst, g.t[js])
            res = Af + inst.beta(Tm[:, js] - s) * inst.H(X[:, js], Tm[:, js])
            mask = inW[:, js].copy()
            mask[:, -1] = False  # t = T
            if np.any(mask):
                fam_W = max(fam_W, float(np.max(np.abs(res[mask]))))
            slope = coupling.split_gradient(np.nan_to_num(fk), g, sol.gamma)
            Pm = inP.copy()
            Pm[:, ~valid] = False
            Pm[:, -1] = False
            if np.any(Pm):
                resP = inst.beta(g.t[None, :] - s) * np.asarray(inst.c(g.t), float)[None, :] - slope
                fam_P = max(fam_P, float(np.max(np.abs(resP[Pm]))))
            term_f = max(term_f, float(np.max(np.abs(fk[:, -1] - inst.beta(inst.horizon - s)
                                                     * ft.value(g.x)))))
    term_V = float(np.max(np.abs(sol.V.forward().values[:, -1] - ft.value(g.x))))
    return ResidualReport(
        r1_neg=float(max(0.0, -np.min(r1))), r2_neg=float(max(0.0, -np.min(r2))),
        complementarity=float(np.max(np.abs(m))), family_W=fam_W, family_P=fam_P,
        terminal_f=term_f, terminal_V=term_V, n_P_nodes=nP, worst=worst)


def _A_subset(vals, grid, inst, ts):
    """A on interior x nodes for a field sampled at times ts (uniform spacing)."""
    dt = ts[1] - ts[0]
    v_t = np.gradient(vals, dt, axis=1)
    v_x = (vals[2:] - vals[:-2]) / (2 * grid.dx)
    v_xx = (vals[2:] - 2 * vals[1:-1] + vals[:-2]) / grid.dx**2
    X, Tm = np.meshgrid(grid.x[1:-1], ts, indexing="ij")
    return v_t[1:-1] + inst.mu(X, Tm) * v_x + 0.5 * inst.sigma(X, Tm) ** 2 * v_xx


def region_mismatches(sol: EquilibriumSolution, inst: ProblemInstance, tol: float | None = None) -> int:
    """Nodes whose W/P label from c - V_x disagrees with the side of Gamma they lie on."""
    g = sol.grid
    tol = sol.v.meta.get("tol_gamma", 0.0) if tol is None else tol
    vf = sol.v.forward().values
    r2 = np.asarray(inst.c(g.t), float)[None, :] - vf
    gf = sol.gamma.forward_values()
    right = g.x[:, None] >= gf[None, :] - 1e-9 * g.dx
    contact = r2 <= tol
    return int(np.sum(contact & ~right) + np.sum(~contact & right & (g.x[:, None] > gf[None, :] + 1e-9 * g.dx)))


# ---------------------------------------------------------------------------
# Exponential oracle
# ---------------------------------------------------------------------------


def oracle_errors(sol: EquilibriumSolution, gamma: float) -> dict:
    g = sol.grid
    V = sol.V.values
    out = {}
    if sol.f is not None:
        E = np.exp(-gamma * (g.t[None, :, None] - g.s[None, None, :])) * V[:, :, None]
        out["E1"] = float(np.nanmax(np.abs(sol.f.values - E) / (1 + np.abs(V[:, :, None]))))
    out["E2"] = float(np.max(np.abs(sol.d.values - gamma * V) / (1 + np.abs(V))))
    out["E2_dx"] = float(np.max(np.abs(sol.d_x.values - gamma * sol.v.forward().values)))
    return out


def exponential_oracle(inst: ProblemInstance, grid: SpaceTimeGrid,
                       opts: FixedPointOptions | None = None, compare_modes: bool = True) -> dict:
    if not isinstance(inst.discount, ExponentialDiscount):
        raise ContractError("the oracle needs an exponential discount")
    gamma = inst.discount.gamma
    opts = opts or FixedPointOptions()
    sol = solve_equilibrium(inst, grid, opts)
    rep = {"gamma": gamma, "mode": opts.coupling_mode, "iterations": sol.iterations,
           "converged": sol.converged, **oracle_errors(sol, gamma)}
    w = coupling.paper_literal_w(inst, grid, sol.gamma).forward().values
    vf = sol.v.forward().values
    rep["w_vs_gamma_v"] = float(np.max(np.abs(w - gamma * vf)))
    rep["w_vs_family_dx"] = float(np.max(np.abs(w - sol.d_x.values)))
    if compare_modes:
        other = dataclasses.replace(opts, coupling_mode=coupling.PAPER_LITERAL)
        try:
            sol2 = solve_equilibrium(inst, grid, other)
            rep["paper_literal"] = {"converged": sol2.converged, **oracle_errors(sol2, gamma)}
        except (ContractError, obstacle.ConvergenceError) as exc:
            rep["paper_literal"] = {"error": str(exc)}
    rep["_solution"] = sol
    return rep


# ---------------------------------------------------------------------------
# Point evaluation with the affine continuation into the purchasing region
# ---------------------------------------------------------------------------


def value_at(sol: EquilibriumSolution, inst: ProblemInstance, x: float, t: float) -> float:
    """V(x, t); right of Gamma(t) V grows with slope c(t)."""
    from .grid import interp2
    gb = float(sol.gamma.at_forward(t))
    if x <= gb:
        return float(interp2(sol.V, x, t))
    return float(interp2(sol.V, gb, t)) + float(inst.c(t)) * (x - gb)


def family_at(sol: EquilibriumSolution, inst: ProblemInstance, x: float, t: float, s: float) -> float:
    """f^s(x, t) for s <= t, linear in s between family slices."""
    g = sol.grid
    if s > t + 1e-12:
        raise ContractError("family member needs s <= t")
    gb = float(sol.gamma.at_forward(t))
    xe = min(x, gb)
    ss = g.s
    k = min(int(np.searchsorted(ss, s, side="right")) - 1, g.Ns - 2)
    w = (s - ss[k]) / (ss[k + 1] - ss[k])

    def slice_val(kk):
        vals = sol.f.values[:, :, kk]
        fld = ScalarField(np.nan_to_num(vals), g)
        from .grid import interp2
        return float(interp2(fld, xe, t))

    if w <= 1e-12:
        base = slice_val(k)
    elif w >= 1 - 1e-12:
        base = slice_val(k + 1)
    else:
        base = (1 - w) * slice_val(k) + w * slice_val(k + 1)
    return base + float(inst.beta(t - s)) * float(inst.c(t)) * max(x - gb, 0.0)


def time_extrapolated_value(inst: ProblemInstance, grid: SpaceTimeGrid, points,
                            opts: FixedPointOptions | None = None) -> dict:
    """V at the given (x, t) points, Richardson-extrapolated in the time step.

    Implicit Euler is first order in dt, so 2 V(dt/2) - V(dt) removes the
    leading time error. Returns the extrapolated values together with both
    raw values; their gap is the size of the time error that was removed.
    """
    fine_grid = grid.replace(Nt=2 * grid.Nt - 1, Ns=2 * grid.Ns - 1)
    coarse = solve_equilibrium(inst, grid, opts)
    fine = solve_equilibrium(inst, fine_grid, opts)
    out = {"coarse": [], "fine": [], "value": []}
    for x, t in points:
        a = value_at(coarse, inst, x, t)
        b = value_at(fine, inst, x, t)
        out["coarse"].append(a)
        out["fine"].append(b)
        out["value"].append(2 * b - a)
    return out


INVARIANT_TOL = 1e-8


def invariant_suite(sol: EquilibriumSolution, inst: ProblemInstance, tol: float = INVARIANT_TOL) -> dict:
    """Hard invariants of a solved equilibrium; name -> (margin, passed).

    Obstacle bounds, monotonicity of v in x and in reversed time, the
    left-tail bound v <= C kappa (C = max(M, max c)) on x <= -1, and the admissible band of the
    final coupling term. A negative margin is a violation.
    """
    g = sol.grid
    vr = sol.v.as_reversed().values
    ft = effective_terminal(inst)
    tphys = inst.horizon - g.t
    c_rows = np.asarray(inst.c(tphys), float) * np.ones(g.Nt)
    eps = sol.v.meta.get("eps", 0.0)
    C_n = sol.v.meta.get("C_n", 0.0)
    out = {
        "v >= Ftilde' - tol": float(np.min(vr - np.asarray(ft.d1(g.x))[:, None])) + tol,
        "v <= c + 10 eps C_n": float(np.min(c_rows[None, :] + 10 * eps * C_n - vr)),
        "v nondecreasing in x": float(np.min(np.diff(vr, axis=0))) + tol,
        "v nondecreasing in reversed t": float(np.min(np.diff(vr, axis=1))) + tol,
    }
    left = g.x <= -1.0
    if inst.kappa is not None and np.any(left):
        X, Tf = np.meshgrid(g.x[left], tphys, indexing="ij")
        kap = inst.kappa.deriv(X, Tf)
        C = max(inst.bound_M, float(np.max(c_rows)))
        out["v <= C kappa (x <= -1)"] = float(np.min(C * kap - vr[left]))
    r0 = r0_margins(inst, g, sol.d, sol.d_x, sol.gamma)
    out["0 <= d_x"] = r0["dx_low"] + tol
    out["d_x < H_x"] = r0["dx_high"] + tol
    out["0 <= d_xx (W)"] = r0["dxx_low"] + tol
    out["d_xx <= H_xx (W)"] = r0["dxx_high"] + tol
    return {k: {"margin": v + 0.0, "passed": bool(v >= 0)} for k, v in out.items()}


def interior_hjb_tol(sol: EquilibriumSolution, inst: ProblemInstance, frac: float = 0.1) -> float:
    """Complementarity residual measure excluding the last `frac` of the horizon.

    The terminal corner at (Gamma, T) carries a boundary layer of the
    implicit scheme; this measure isolates the interior behaviour.
    """
    g = sol.grid
    r1, r2 = hjb_residuals(inst, sol.V, sol.v, sol.d)
    keep = g.t[:-1] <= (1 - frac) * g.T + 1e-12
    r1, r2 = r1[:, keep], r2[:, keep]
    m = np.minimum(r1, r2)
    return float(max(0.0, -np.min(r1), -np.min(r2), np.max(np.abs(m))))
