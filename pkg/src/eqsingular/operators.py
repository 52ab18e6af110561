"""Finite-difference operators, the penalty function and the implicit step.

Sign conventions. In reversed time tau = T - t the parabolic operator is

    L v = -v_tau + 1/2 sigma^2 v_xx + (sigma sigma_x + mu) v_x + mu_x v

with coefficients evaluated at physical time T - tau; the forward generator is
A phi = phi_t + mu phi_x + 1/2 sigma^2 phi_xx. One implicit Euler step of
-u_tau + A_h u + S = 0 is the tridiagonal system (I - dt A_h) u = prev + dt S.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .grid import ScalarField

_EXP_CAP = 700.0


class SingularSystemError(RuntimeError):
    pass


class ContractError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Pointwise operators on stored fields
# ---------------------------------------------------------------------------


def _check_interior(fld: ScalarField, node):
    i, j = node
    if not 0 < i < fld.grid.Nx - 1:
        raise ContractError(f"node {node} is not interior in x")
    if not 0 <= j < fld.grid.Nt:
        raise ContractError(f"node {node} outside the time grid")


def _dt_central(vals, j, dt):
    n = vals.shape[1]
    if 0 < j < n - 1:
        return (vals[:, j + 1] - vals[:, j - 1]) / (2 * dt)
    if j == 0:
        return (vals[:, 1] - vals[:, 0]) / dt
    return (vals[:, j] - vals[:, j - 1]) / dt


def apply_L(fld: ScalarField, instance, node) -> float:
    """L at an interior node; the field and the node index use reversed time."""
    f = fld.as_reversed()
    _check_interior(f, node)
    i, j = node
    g = f.grid
    x = g.x[i]
    tphys = g.T - g.t[j]
    v = f.values
    v_x = (v[i + 1, j] - v[i - 1, j]) / (2 * g.dx)
    v_xx = (v[i + 1, j] - 2 * v[i, j] + v[i - 1, j]) / g.dx**2
    v_t = _dt_central(v[i:i + 1], j, g.dt)[0]
    sig = instance.sigma(x, tphys)
    return float(-v_t + 0.5 * sig**2 * v_xx
                 + (sig * instance.sigma(x, tphys, 1) + instance.mu(x, tphys)) * v_x
                 + instance.mu(x, tphys, 1) * v[i, j])


def apply_A(fld: ScalarField, instance, node) -> float:
    """A at an interior node; the field and the node index use forward time."""
    f = fld.forward()
    _check_interior(f, node)
    i, j = node
    g = f.grid
    x, t = g.x[i], g.t[j]
    v = f.values
    v_x = (v[i + 1, j] - v[i - 1, j]) / (2 * g.dx)
    v_xx = (v[i + 1, j] - 2 * v[i, j] + v[i - 1, j]) / g.dx**2
    v_t = _dt_central(v[i:i + 1], j, g.dt)[0]
    return float(v_t + instance.mu(x, t) * v_x + 0.5 * instance.sigma(x, t) ** 2 * v_xx)


def apply_A_all(values, grid, instance, x=None, t=None):
    """A phi on all interior x nodes and all t nodes (forward time).

    values has shape (Nx, Nt); returns shape (Nx - 2, Nt). The time
    derivative is central in the interior and one-sided at the ends.
    """
    x = grid.x if x is None else x
    t = grid.t if t is None else t
    v = values
    dx, dt = grid.dx, grid.dt
    v_t = np.gradient(v, dt, axis=1)
    v_x = (v[2:] - v[:-2]) / (2 * dx)
    v_xx = (v[2:] - 2 * v[1:-1] + v[:-2]) / dx**2
    X, Tm = np.meshgrid(x[1:-1], t, indexing="ij")
    return v_t[1:-1] + instance.mu(X, Tm) * v_x + 0.5 * instance.sigma(X, Tm) ** 2 * v_xx


# ---------------------------------------------------------------------------
# Penalty
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PenaltyParams:
    eps: float
    C_n: float

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")


def penalty(z, p: PenaltyParams):
    """C_n alpha_eps(z) and its derivative, alpha_eps(z) = -exp(-z/eps)."""
    e = np.exp(np.minimum(-np.asarray(z, float) / p.eps, _EXP_CAP))
    val = -p.C_n * e
    slope = p.C_n / p.eps * e
    if np.ndim(val) == 0:
        return float(val), float(slope)
    return val, slope


# ---------------------------------------------------------------------------
# Implicit step
# ---------------------------------------------------------------------------


@dataclass
class OperatorStencil:
    """Rows of (I - dt A_h) u = prev + source for one implicit Euler step.

    lower[i], diag[i], upper[i] multiply u[i-1], u[i], u[i+1]. Boundary rows
    are replaced by the closures at solve time.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    source: np.ndarray
    dx: float
    dt: float
    upwinded: np.ndarray = field(default=None)

    @property
    def diagonally_dominant(self) -> bool:
        d = np.abs(self.diag[1:-1]) - np.abs(self.lower[1:-1]) - np.abs(self.upper[1:-1])
        return bool(np.all(d >= -1e-12 * np.abs(self.diag[1:-1])))

    @property
    def monotone(self) -> bool:
        return bool(np.all(self.lower[1:-1] <= 0) and np.all(self.upper[1:-1] <= 0))


def assemble(diffusion, advection, reaction, dx: float, dt: float, source=None) -> OperatorStencil:
    """Assemble I - dt (D d_xx + B d_x + R) with central advection, upwind where needed.

    diffusion, advection, reaction are per-node arrays (length Nx). The source
    S is per node (or per node and right-hand side) and enters as dt S.
    """
    D = np.asarray(diffusion, float)
    B = np.asarray(advection, float)
    R = np.broadcast_to(np.asarray(reaction, float), D.shape)
    if np.any(D[1:-1] <= 0):
        raise ContractError("diffusion coefficient must be positive at interior nodes")
    lo = D / dx**2 - B / (2 * dx)
    up = D / dx**2 + B / (2 * dx)
    mid = -2 * D / dx**2 + R
    bad = (lo < 0) | (up < 0)
    if np.any(bad):
        pos = bad & (B > 0)
        neg = bad & (B < 0)
        lo = np.where(pos, D / dx**2, np.where(neg, D / dx**2 - B / dx, lo))
        up = np.where(pos, D / dx**2 + B / dx, np.where(neg, D / dx**2, up))
        mid = np.where(pos, -2 * D / dx**2 - B / dx + R,
                       np.where(neg, -2 * D / dx**2 + B / dx + R, mid))
    src = np.zeros_like(D) if source is None else np.asarray(source, float)
    return OperatorStencil(lower=-dt * lo, diag=1.0 - dt * mid, upper=-dt * up,
                           source=dt * src, dx=dx, dt=dt, upwinded=bad)


def _apply_closures(lower, diag, upper, rhs, dx, bc_left, bc_right):
    """Overwrite boundary rows in place. Returns (lower, diag, upper, rhs)."""
    kind, val = bc_left
    if kind == "dirichlet":
        diag[0], upper[0] = 1.0, 0.0
        rhs[0] = val
    elif kind == "neumann":
        # ghost u_{-1} = u_1 - 2 dx g
        rhs[0] = rhs[0] + 2 * dx * np.asarray(val) * lower[0]
        upper[0] = upper[0] + lower[0]
    else:
        raise ValueError(f"unknown closure {kind!r}")
    kind, val = bc_right
    if kind == "dirichlet":
        diag[-1], lower[-1] = 1.0, 0.0
        rhs[-1] = val
    elif kind == "neumann":
        # ghost u_{N} = u_{N-2} + 2 dx g
        rhs[-1] = rhs[-1] - 2 * dx * np.asarray(val) * upper[-1]
        lower[-1] = lower[-1] + upper[-1]
    else:
        raise ValueError(f"unknown closure {kind!r}")
    return lower, diag, upper, rhs


def solve_tridiagonal(lower, diag, upper, rhs):
    """Direct banded elimination; rhs may carry several columns."""
    n = len(diag)
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    try:
        return linalg.solve_banded((1, 1), ab, rhs, check_finite=False)
    except (linalg.LinAlgError, ValueError) as exc:
        raise SingularSystemError(str(exc)) from exc


def tridiag_matvec(lower, diag, upper, u):
    out = diag.reshape(-1, *([1] * (u.ndim - 1))) * u
    out[1:] += lower[1:].reshape(-1, *([1] * (u.ndim - 1))) * u[:-1]
    out[:-1] += upper[:-1].reshape(-1, *([1] * (u.ndim - 1))) * u[1:]
    return out


def implicit_step(st: OperatorStencil, prev, bc_left, bc_right):
    """One implicit Euler step. bc_* are ('dirichlet', value) or ('neumann', slope)."""
    prev = np.asarray(prev, float)
    src = st.source if prev.ndim == 1 or st.source.ndim == 2 else st.source[:, None]
    rhs = prev + src
    lower, diag, upper = st.lower.copy(), st.diag.copy(), st.upper.copy()
    lower, diag, upper, rhs = _apply_closures(lower, diag, upper, rhs, st.dx, bc_left, bc_right)
    if not np.all(np.isfinite(rhs)):
        raise SingularSystemError("non-finite right-hand side")
    if np.any(diag == 0):
        raise SingularSystemError("zero pivot on the diagonal")
    return solve_tridiagonal(lower, diag, upper, rhs)
