"""Auxiliary family f^s, its s-derivative q^s = d f^s / ds, and the coupling term.

Each family member solves a linear parabolic problem on the waiting region
{x <= Gamma(t)} with a Neumann condition at the boundary and is continued
affinely into the purchasing region. The problems are marched in reversed
time in the moving frame xi = x - Gamma(tau), where the domain is fixed:

    -h_tau + (Gamma' + mu) h_xi + 1/2 sigma^2 h_xixi + w(s, tau) H = 0,
    h(xi_min) = 0,  h_xi(0) = w(s, tau) c(T - tau),  h(xi, 0) = w0(s) Ftilde.

For the value family w = beta(T - s - tau); for the sensitivity family
w = -beta'(T - s - tau). All s-members share one matrix per time step and
are solved together as columns of one right-hand side.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import operators as ops
from .grid import FamilyField, FreeBoundary, ScalarField, SpaceTimeGrid, diag_extract
from .model import ProblemInstance, effective_terminal

FAMILY = "family"
PAPER_LITERAL = "paper-literal"
MODES = (FAMILY, PAPER_LITERAL)

GAMMA_CFL = 10.0


class GammaRoughError(ValueError):
    pass


def boundary_slope(gam: FreeBoundary, max_cfl: float = GAMMA_CFL) -> np.ndarray:
    """Gamma'(tau) from a monotone piecewise-cubic fit of the raw boundary."""
    g = gam.grid
    vals = gam.reversed_values()
    if np.ptp(vals) == 0.0:
        return np.zeros(g.Nt)
    d = PchipInterpolator(g.t, vals).derivative()(g.t)
    cfl = float(np.max(np.abs(d))) * g.dt / g.dx
    if cfl > max_cfl:
        raise GammaRoughError(
            f"|Gamma'| dt/dx = {cfl:.3g} exceeds {max_cfl:g}; smooth Gamma or refine dt")
    return d


def _frame(grid: SpaceTimeGrid):
    return (np.arange(grid.Nx) - (grid.Nx - 1)) * grid.dx  # xi in [x_min - x_max, 0]


def _to_window(h, xi, gam_n, x, slope):
    """Map frame values h (Nx, m) back to window nodes x; affine right of Gamma."""
    dx = xi[1] - xi[0]
    pos = (x - gam_n - xi[0]) / dx
    inside = x <= gam_n
    out = np.empty((len(x), h.shape[1]))
    if np.any(inside):
        p = np.clip(pos[inside], 0.0, len(xi) - 1)
        i = np.minimum(np.floor(p).astype(int), len(xi) - 2)
        w = (p - i)[:, None]
        out[inside] = (1 - w) * h[i] + w * h[i + 1]
    if np.any(~inside):
        out[~inside] = h[-1][None, :] + (x[~inside] - gam_n)[:, None] * slope[None, :]
    return out


def _march(inst: ProblemInstance, grid: SpaceTimeGrid, gam: FreeBoundary, s_nodes,
           weight, init, reaction=False, source_fn=None, right=None, left=None):
    """Generic moving-frame march; returns window values (Nx, Nt, m) in reversed time.

    weight(s, tau) -> (m,) weights; init(xfr) -> (Nx, m) initial rows;
    source_fn(x, tphys) -> (Nx,) unweighted source; right(tau) -> ('neumann' or
    'dirichlet', values (m,)); left(tau, x_left) -> Dirichlet values.
    """
    g = grid
    xi = _frame(g)
    gam_rev = gam.reversed_values()
    dgam = boundary_slope(gam)
    tau = g.t
    out = np.empty((g.Nx, g.Nt, len(s_nodes)))
    h = init(xi + gam_rev[0])
    _, rv = right(tau[0])
    slope0 = rv if _ == "neumann" else np.zeros(len(s_nodes))
    out[:, 0] = _to_window(h, xi, gam_rev[0], g.x, slope0)
    for n in range(1, g.Nt):
        xn = xi + gam_rev[n]
        tphys = inst.horizon - tau[n]
        sig = inst.sigma(xn, tphys)
        D = 0.5 * sig**2
        if reaction:
            B = dgam[n] + sig * inst.sigma(xn, tphys, 1) + inst.mu(xn, tphys)
            R = inst.mu(xn, tphys, 1)
        else:
            B = dgam[n] + inst.mu(xn, tphys)
            R = 0.0
        src = source_fn(xn, tphys)[:, None] * weight(s_nodes, tau[n])[None, :]
        st = ops.assemble(D, B, R, g.dx, g.dt, src)
        kind, rv = right(tau[n])
        h = ops.implicit_step(st, h, ("dirichlet", left(tau[n], xn[0])), (kind, rv))
        slope = rv if kind == "neumann" else np.zeros(len(s_nodes))
        out[:, n] = _to_window(h, xi, gam_rev[n], g.x, slope)
    return out


def _arg(T, s, tau):
    # discount argument T - s - tau = t - s; clipped at 0 for absent (t < s) nodes
    return np.maximum(T - np.asarray(s)[None, ...] - tau, 0.0).ravel()


def _family_values(inst, grid, gam, s_nodes, sensitivity: bool):
    T = inst.horizon
    ft = effective_terminal(inst)
    s_nodes = np.asarray(s_nodes, float)
    if sensitivity:
        wfun = lambda arg: -inst.dbeta(arg)  # noqa: E731
    else:
        wfun = inst.beta

    def weight(s, tau):
        return np.asarray(wfun(_arg(T, s, tau)), float)

    def init(x):
        return np.asarray(ft.value(x))[:, None] * weight(s_nodes, 0.0)[None, :]

    def right(tau):
        return "neumann", weight(s_nodes, tau) * float(inst.c(T - tau))

    vals = _march(inst, grid, gam, s_nodes, weight, init,
                  source_fn=lambda x, tp: inst.H(x, tp),
                  right=right, left=lambda tau, xl: 0.0)
    return vals[:, ::-1, :]  # forward time


def solve_value_family(inst: ProblemInstance, grid: SpaceTimeGrid, gam: FreeBoundary) -> FamilyField:
    """f^s(x, t) on the (x, t, s) grid, forward time; absent for t < s."""
    return FamilyField(_family_values(inst, grid, gam, grid.s, False), grid,
                       meta={"kind": "value"})


def solve_sensitivity_family(inst: ProblemInstance, grid: SpaceTimeGrid, gam: FreeBoundary) -> FamilyField:
    """q^s = d f^s / ds on the (x, t, s) grid, forward time."""
    return FamilyField(_family_values(inst, grid, gam, grid.s, True), grid,
                       meta={"kind": "sensitivity"})


def _row_gradient(row, dx):
    n = len(row)
    if n >= 3:
        return np.gradient(row, dx, edge_order=2)
    if n == 2:
        d = (row[1] - row[0]) / dx
        return np.array([d, d])
    return None


def split_gradient(vals: np.ndarray, grid: SpaceTimeGrid, gam: FreeBoundary | None = None) -> np.ndarray:
    """x-derivative of a forward-time field without differencing across Gamma."""
    out = np.empty_like(vals)
    if gam is None:
        return np.gradient(vals, grid.dx, axis=0, edge_order=2)
    gf = gam.forward_values()
    x = grid.x
    for j in range(grid.Nt):
        m = int(np.searchsorted(x, gf[j] + 1e-9 * grid.dx, side="right")) - 1
        m = max(m, 0)
        left = _row_gradient(vals[: m + 1, j], grid.dx)
        right = _row_gradient(vals[m:, j], grid.dx)
        if left is None:
            out[:, j] = right
            continue
        out[: m + 1, j] = left
        if right is not None and m + 1 < grid.Nx:
            out[m + 1:, j] = right[1:]
    return out


def coupling_term(q: FamilyField, gam: FreeBoundary | None = None) -> tuple[ScalarField, ScalarField]:
    """d(x, t) = q(x, t, s=t) and d_x, forward time."""
    d = diag_extract(q)
    d_x = split_gradient(d.values, q.grid, gam)
    return d, ScalarField(d_x, q.grid, reversed=False)


def paper_literal_w(inst: ProblemInstance, grid: SpaceTimeGrid, gam: FreeBoundary) -> ScalarField:
    """Diagnostic: L w - beta'(0) H_x = 0 on the waiting region, as a standalone system.

    w = -beta'(0) c in the purchasing region and w(x, 0) = -beta'(0) Ftilde'(x).
    Returned in reversed time.
    """
    T = inst.horizon
    ft = effective_terminal(inst)
    k = -float(inst.dbeta(0.0))
    one = np.array([0.0])

    vals = _march(
        inst, grid, gam, one,
        weight=lambda s, tau: np.array([k]),
        init=lambda x: (k * np.asarray(ft.d1(x)))[:, None],
        reaction=True,
        source_fn=lambda x, tp: inst.H(x, tp, 1),
        right=lambda tau: ("dirichlet", np.array([k * float(inst.c(T - tau))])),
        left=lambda tau, xl: k * float(ft.d1(xl)),
    )[:, :, 0]
    # P region: constant -beta'(0) c (the affine map above uses zero slope)
    return ScalarField(vals, grid, reversed=True, meta={"mode": PAPER_LITERAL})
