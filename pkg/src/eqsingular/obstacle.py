"""Obstacle problem for v = V_x in reversed time.

    min{ L v + H_x - d_x, c(T - tau) - v } = 0,   v(x, 0) = Ftilde'(x),

with Dirichlet data v(x_min) = Ftilde'(x_min), v(x_max) = c(T - tau). Two
independent solvers: a penalty formulation marched with Newton along a
decreasing eps schedule, and a projected SOR solve of the discrete linear
complementarity problem at each step.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import operators as ops
from .grid import FreeBoundary, ScalarField, SpaceTimeGrid
from .model import ProblemInstance, effective_terminal

log = logging.getLogger(__name__)

C_N_FLOOR = 1e-300


class ConvergenceError(RuntimeError):
    pass


class StagnationError(RuntimeError):
    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = history


class WindowError(ValueError):
    pass


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ObstacleSolveOptions:
    eps_schedule: tuple = (1e-1, 1e-2, 1e-3, 1e-4)
    newton_tol: float = 1e-12
    newton_maxiter: int = 50
    max_halvings: int = 6
    method: str = "penalty"          # or "direct"
    psor_omega: float = 1.2
    psor_tol: float = 1e-10
    psor_maxiter: int = 100000
    r0_tol: float = 1e-8

    def __post_init__(self):
        if not self.eps_schedule or min(self.eps_schedule) <= 0:
            raise ValueError("eps schedule must be positive")
        if self.newton_tol <= 0 or self.psor_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.method not in ("penalty", "direct"):
            raise ValueError(f"unknown method {self.method!r}")


def _coefficients(inst: ProblemInstance, x, tau):
    tphys = inst.horizon - tau
    sig = inst.sigma(x, tphys)
    D = 0.5 * sig**2
    B = sig * inst.sigma(x, tphys, 1) + inst.mu(x, tphys)
    R = inst.mu(x, tphys, 1)
    return D, B, R


def _source(inst, grid, d_x_rev):
    """S(x, tau) = H_x(x, T - tau) - d_x, shape (Nx, Nt) in reversed time."""
    X, Tau = np.meshgrid(grid.x, grid.t, indexing="ij")
    return inst.H(X, inst.horizon - Tau, 1) - d_x_rev


def _prepare(inst, grid, d_x, opts):
    if d_x is None:
        d_x_rev = np.zeros((grid.Nx, grid.Nt))
    else:
        d_x_rev = d_x.as_reversed().values
    S = _source(inst, grid, d_x_rev)
    Hx = S + d_x_rev
    # R0 band: 0 <= d_x < H_x (checked with a small tolerance)
    low = d_x_rev
    high = Hx - d_x_rev
    worst_low = np.unravel_index(np.argmin(low), low.shape)
    worst_high = np.unravel_index(np.argmin(high), high.shape)
    if low[worst_low] < -opts.r0_tol:
        i, j = worst_low
        raise ops.ContractError(
            f"coupling gradient negative ({low[i, j]:.3e}) at x={grid.x[i]:.4f}, tau={grid.t[j]:.4f}")
    if high[worst_high] < -opts.r0_tol:
        i, j = worst_high
        raise ops.ContractError(
            f"coupling gradient exceeds H_x by {-high[i, j]:.3e} at x={grid.x[i]:.4f}, tau={grid.t[j]:.4f}")
    C_n = max(0.9 * float(np.min(S)), C_N_FLOOR)
    ft = effective_terminal(inst)
    c_T = float(inst.c(inst.horizon))
    v0 = np.minimum(ft.d1(grid.x), c_T)
    left = float(ft.d1(grid.x[0]))
    c_rows = np.asarray(inst.c(inst.horizon - grid.t), float) * np.ones(grid.Nt)
    return S, C_n, v0, left, c_rows


def _stencil(inst, grid, tau, S_row, dt):
    D, B, R = _coefficients(inst, grid.x, tau)
    return ops.assemble(D, B, R, grid.dx, dt, S_row)


class _Penalized:
    """Per-step Newton solver for the penalized equation at fixed eps."""

    def __init__(self, inst, grid, S, C_n, left, c_rows, opts):
        self.inst, self.grid, self.S, self.C_n = inst, grid, S, C_n
        self.left, self.c_rows, self.opts = left, c_rows, opts
        self.newton_iters = 0
        self.halvings = 0
        # Upper clip for Newton iterates, in units of eps: the penalized
        # solution never exceeds c by more than eps ln(max S / C_n).
        self.clip = max(40.0, float(np.log(max(np.max(S), C_n) / C_n)) + 5.0)

    def step(self, prev, tau0, tau1, S0, S1, c1, eps, guess, depth=0):
        dt = tau1 - tau0
        st = _stencil(self.inst, self.grid, tau1, S1, dt)
        p = ops.PenaltyParams(eps, self.C_n)
        u = np.minimum(guess, c1 + self.clip * eps)
        u[0], u[-1] = self.left, c1
        rhs = prev + st.source
        for _ in range(self.opts.newton_maxiter):
            self.newton_iters += 1
            a, da = ops.penalty(c1 - u, p)
            G = ops.tridiag_matvec(st.lower, st.diag, st.upper, u) - rhs - dt * a
            lo, di, up = st.lower.copy(), st.diag + dt * da, st.upper.copy()
            G[0] = G[-1] = 0.0
            lo, di, up, G = ops._apply_closures(lo, di, up, G, st.dx, ("dirichlet", 0.0), ("dirichlet", 0.0))
            du = ops.solve_tridiagonal(lo, di, up, G)
            u = np.minimum(u - du, c1 + self.clip * eps)
            if np.max(np.abs(du)) <= self.opts.newton_tol * max(1.0, np.max(np.abs(u))):
                return u
        if depth >= self.opts.max_halvings:
            raise ConvergenceError(f"Newton failed at tau={tau1:.6g}, eps={eps:g}")
        self.halvings += 1
        taum = 0.5 * (tau0 + tau1)
        Sm = 0.5 * (S0 + S1)
        cm = float(self.inst.c(self.inst.horizon - taum))
        um = self.step(prev, tau0, taum, S0, Sm, cm, eps, prev.copy(), depth + 1)
        return self.step(um, taum, tau1, Sm, S1, c1, eps, um.copy(), depth + 1)


def solve_penalized(inst: ProblemInstance, grid: SpaceTimeGrid, d_x: ScalarField | None = None,
                    opts: ObstacleSolveOptions | None = None) -> ScalarField:
    """Penalty path; returns v in reversed time (finest eps level)."""
    opts = opts or ObstacleSolveOptions()
    S, C_n, v0, left, c_rows = _prepare(inst, grid, d_x, opts)
    solver = _Penalized(inst, grid, S, C_n, left, c_rows, opts)
    tau = grid.t
    prev_level = None
    levels = []
    for eps in opts.eps_schedule:
        v = np.empty((grid.Nx, grid.Nt))
        v[:, 0] = v0
        it0 = solver.newton_iters
        for n in range(1, grid.Nt):
            guess = v[:, n - 1] if prev_level is None else prev_level[:, n]
            v[:, n] = solver.step(v[:, n - 1], tau[n - 1], tau[n], S[:, n - 1], S[:, n],
                                  c_rows[n], eps, guess.copy())
        levels.append({"eps": eps, "newton_iterations": solver.newton_iters - it0})
        if prev_level is not None:
            levels[-1]["change_from_previous"] = float(np.max(np.abs(v - prev_level)))
        prev_level = v
    eps = opts.eps_schedule[-1]
    meta = {"method": "penalty", "eps": eps, "C_n": C_n, "tol_gamma": 10 * eps * C_n,
            "levels": levels, "halvings": solver.halvings}
    return ScalarField(prev_level, grid, reversed=True, meta=meta)


def _psor(lo, di, up, b, cap, u, omega, tol, maxiter):
    """Red-black projected SOR for M u <= b, u <= cap, complementarity.

    Only interior entries are updated; u[0], u[-1] are held fixed. The
    tolerance is raised to a few ulps of the data scale when tol is below it.
    """
    n = len(u)
    scale = max(1.0, float(np.max(np.abs(b))), float(np.max(np.abs(cap))))
    tol = max(tol, 64 * np.finfo(float).eps * scale)
    red = np.arange(1, n - 1, 2)
    black = np.arange(2, n - 1, 2)
    hist = []
    best = np.inf
    since_best = 0
    for k in range(maxiter):
        for idx in (red, black):
            gs = (b[idx] - lo[idx] * u[idx - 1] - up[idx] * u[idx + 1]) / di[idx]
            u[idx] = np.minimum(cap[idx], u[idx] + omega * (gs - u[idx]))
        r = b[1:-1] - (lo[1:-1] * u[:-2] + di[1:-1] * u[1:-1] + up[1:-1] * u[2:])
        res = float(np.max(np.abs(np.minimum(r, cap[1:-1] - u[1:-1])))) if n > 2 else 0.0
        if k % 50 == 0:
            hist.append(res)
        if res <= tol:
            return u, k + 1, res
        if res < 0.999 * best:
            best, since_best = res, 0
        else:
            since_best += 1
            if since_best > 5000:
                break
    raise StagnationError(f"projected SOR stagnated at residual {res:.3e}", hist)


def solve_direct(inst: ProblemInstance, grid: SpaceTimeGrid, d_x: ScalarField | None = None,
                 opts: ObstacleSolveOptions | None = None) -> ScalarField:
    """Complementarity path; returns v in reversed time."""
    opts = opts or ObstacleSolveOptions(method="direct")
    S, C_n, v0, left, c_rows = _prepare(inst, grid, d_x, opts)
    v = np.empty((grid.Nx, grid.Nt))
    v[:, 0] = v0
    sweeps = []
    res_max = 0.0
    for n in range(1, grid.Nt):
        st = _stencil(inst, grid, grid.t[n], S[:, n], grid.dt)
        b = v[:, n - 1] + st.source
        cap = np.full(grid.Nx, c_rows[n])
        u = np.minimum(v[:, n - 1].copy(), cap)
        u[0], u[-1] = left, c_rows[n]
        u, k, res = _psor(st.lower, st.diag, st.upper, b, cap, u, opts.psor_omega,
                          opts.psor_tol, opts.psor_maxiter)
        sweeps.append(k)
        res_max = max(res_max, res)
        v[:, n] = u
    meta = {"method": "direct", "C_n": C_n, "tol_gamma": 10 * opts.eps_schedule[-1] * C_n,
            "psor_sweeps": sweeps, "lcp_residual": res_max}
    return ScalarField(v, grid, reversed=True, meta=meta)


def solve(inst, grid, d_x=None, opts=None) -> ScalarField:
    opts = opts or ObstacleSolveOptions()
    if opts.method == "direct":
        return solve_direct(inst, grid, d_x, opts)
    return solve_penalized(inst, grid, d_x, opts)


def extract_boundary(v: ScalarField, inst: ProblemInstance, tol: float | None = None) -> FreeBoundary:
    """Gamma(tau) = smallest x with c(T - tau) - v(x, tau) <= tol, interpolated."""
    vr = v.as_reversed()
    g = vr.grid
    if tol is None:
        tol = vr.meta.get("tol_gamma", 0.0)
    x = g.x
    gam = np.empty(g.Nt)
    truncated = []
    for n in range(g.Nt):
        gap = float(inst.c(inst.horizon - g.t[n])) - vr.values[:, n] - tol
        hit = np.nonzero(gap <= 0)[0]
        if hit.size == 0:
            gam[n] = g.x_max
            truncated.append(n)
            continue
        i = hit[0]
        if i == 0:
            gam[n] = x[0]
        else:
            g0, g1 = gap[i - 1], gap[i]
            gam[n] = x[i - 1] + (x[i] - x[i - 1]) * g0 / (g0 - g1)
    meta = {"tol_gamma": tol, "truncated_rows": truncated}
    if truncated:
        warnings.warn(f"no crossing in window at {len(truncated)} time rows; "
                      "Gamma set to x_max (widen the window)", TruncationWarning, stacklevel=2)
    return FreeBoundary(gam, g, reversed=True, meta=meta)


def integrate_to_value(v: ScalarField, grid: SpaceTimeGrid | None = None,
                       left_tol: float = 1e-8, terminal=None) -> ScalarField:
    """V(x, t) = int_{x_min}^x v(z, T - t) dz, returned in forward time.

    If `terminal` (an EffectiveTerminal) is given, the terminal row is set to
    Ftilde exactly and the quadrature acts on v - v(., T) only:
    V = Ftilde + int (v - Ftilde') dz.
    """
    vr = v.as_reversed()
    grid = grid or vr.grid
    vals = vr.values
    if np.max(np.abs(vals[0])) > left_tol:
        raise WindowError(f"v at the left edge is {np.max(np.abs(vals[0])):.3e} > {left_tol:g}; "
                          "widen the window to the left")
    if np.min(vals) < -1e-12:
        raise WindowError("v must be nonnegative on the window")
    if terminal is None:
        g = cumulative_trapezoid(vals, grid.x, axis=0, initial=0.0)
    else:
        g = (np.asarray(terminal.value(grid.x))[:, None]
             + cumulative_trapezoid(vals - vals[:, :1], grid.x, axis=0, initial=0.0))
    return ScalarField(g, grid, reversed=True, meta={}).forward()
