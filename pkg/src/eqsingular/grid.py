"""Uniform space-time grids, field containers and CSV dumps."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np


class ResolutionError(ValueError):
    pass


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform grid on [x_min, x_max] x [0, T] plus an s-grid on [0, T].

    The s-grid should be a restriction of the t-grid, i.e. (Nt - 1) is a
    multiple of (Ns - 1), so that diagonal extraction is exact.
    """

    x_min: float
    x_max: float
    Nx: int
    T: float
    Nt: int
    Ns: int = 2

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be < x_max")
        if min(self.Nx, self.Nt, self.Ns) < 2:
            raise ValueError("Nx, Nt, Ns must be >= 2")
        if self.T <= 0:
            raise ValueError("T must be positive")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.Nx)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.Nt)

    @property
    def s(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.Ns)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.Nx - 1)

    @property
    def dt(self) -> float:
        return self.T / (self.Nt - 1)

    @property
    def aligned(self) -> bool:
        return (self.Nt - 1) % (self.Ns - 1) == 0

    @property
    def s_stride(self) -> int:
        """Number of t-steps per s-step (aligned grids only)."""
        return (self.Nt - 1) // (self.Ns - 1)

    def replace(self, **changes) -> "SpaceTimeGrid":
        return dataclasses.replace(self, **changes)

    def refined(self) -> "SpaceTimeGrid":
        """Halve dx, dt and ds."""
        return self.replace(Nx=2 * self.Nx - 1, Nt=2 * self.Nt - 1, Ns=2 * self.Ns - 1)


@dataclass
class ScalarField:
    """Values on (x, t) nodes, shape (Nx, Nt).

    If `reversed` is set the second axis is reversed time tau = T - t, so
    column 0 is physical time T.
    """

    values: np.ndarray
    grid: SpaceTimeGrid
    reversed: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.Nx, self.grid.Nt):
            raise ValueError(f"field shape {self.values.shape} does not match grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    def forward(self) -> "ScalarField":
        if not self.reversed:
            return self
        return ScalarField(self.values[:, ::-1].copy(), self.grid, False, dict(self.meta))

    def as_reversed(self) -> "ScalarField":
        if self.reversed:
            return self
        return ScalarField(self.values[:, ::-1].copy(), self.grid, True, dict(self.meta))


@dataclass
class FamilyField:
    """Values on (x, t, s) nodes in forward time; nodes with t < s are absent (NaN)."""

    values: np.ndarray
    grid: SpaceTimeGrid
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        g = self.grid
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (g.Nx, g.Nt, g.Ns):
            raise ValueError(f"family shape {self.values.shape} does not match grid")
        self.values[:, ~self.valid] = np.nan

    @property
    def valid(self) -> np.ndarray:
        """Boolean (Nt, Ns) mask of present nodes, t >= s."""
        g = self.grid
        return g.t[:, None] >= g.s[None, :] - 1e-12 * g.T

    def slice(self, k: int) -> np.ndarray:
        return self.values[:, :, k]


@dataclass
class FreeBoundary:
    """Boundary location per time node (reversed time by default)."""

    values: np.ndarray
    grid: SpaceTimeGrid
    reversed: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        g = self.grid
        if self.values.shape != (g.Nt,):
            raise ValueError("boundary must have one value per time node")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("boundary contains non-finite values")
        tol = 1e-12 * max(1.0, abs(g.x_min), abs(g.x_max))
        if np.any(self.values < g.x_min - tol) or np.any(self.values > g.x_max + tol):
            raise ValueError("boundary leaves the window")

    def forward_values(self) -> np.ndarray:
        return self.values[::-1] if self.reversed else self.values

    def reversed_values(self) -> np.ndarray:
        return self.values if self.reversed else self.values[::-1]

    def at_forward(self, t):
        """Gamma in physical time, linear between nodes."""
        g = self.grid
        t = np.asarray(t, float)
        if np.any(t < -1e-12) or np.any(t > g.T * (1 + 1e-12)):
            raise ValueError("boundary queried outside [0, T]")
        return np.interp(t, g.t, self.forward_values())


def _snap(f, tol=1e-9):
    # exact node hits despite rounding in (x - x_min) / dx
    r = np.rint(f)
    return np.where(np.abs(f - r) <= tol, r, f)


def interp2(fld: ScalarField, x, t):
    """Bilinear interpolation; t is in the field's own time convention."""
    g = fld.grid
    x = np.asarray(x, float)
    t = np.asarray(t, float)
    eps = 1e-12
    if (np.any(x < g.x_min - eps) or np.any(x > g.x_max + eps)
            or np.any(t < -eps) or np.any(t > g.T + eps)):
        raise ValueError("query outside grid")
    fi = _snap(np.clip((x - g.x_min) / g.dx, 0, g.Nx - 1))
    fj = _snap(np.clip(t / g.dt, 0, g.Nt - 1))
    i = np.minimum(np.floor(fi).astype(int), g.Nx - 2)
    j = np.minimum(np.floor(fj).astype(int), g.Nt - 2)
    wx = fi - i
    wt = fj - j
    v = fld.values
    out = ((1 - wx) * (1 - wt) * v[i, j] + wx * (1 - wt) * v[i + 1, j]
           + (1 - wx) * wt * v[i, j + 1] + wx * wt * v[i + 1, j + 1])
    return out[()] if out.ndim == 0 else out


def diag_extract(fam: FamilyField) -> ScalarField:
    """d(x, t) = q(x, t, s=t), forward time.

    Exact when t is an s-node. Otherwise s_k < t < s_{k+1}, and only slices
    with s <= t exist at time t: the value is extended from slice k with the
    s-slope of the two nearest present slices, which keeps O(ds^2) accuracy.
    On the first s-interval that slope is taken at t = s_1, where both
    slices 0 and 1 exist.
    """
    g = fam.grid
    s = g.s
    out = np.empty((g.Nx, g.Nt))
    for j, tj in enumerate(g.t):
        k = int(np.searchsorted(s, tj + 1e-12 * g.T, side="right")) - 1
        if abs(s[k] - tj) <= 1e-12 * g.T:
            out[:, j] = fam.values[:, j, k]
        elif k >= 1:
            slope = (fam.values[:, j, k] - fam.values[:, j, k - 1]) / (s[k] - s[k - 1])
            out[:, j] = fam.values[:, j, k] + (tj - s[k]) * slope
        else:
            j1 = int(round(s[1] / g.dt))
            if abs(g.t[min(j1, g.Nt - 1)] - s[1]) > 1e-9 * g.T:
                raise ResolutionError(f"s-node {s[1]} is not on the t-grid; cannot reach t={tj}")
            slope = (fam.values[:, j1, 1] - fam.values[:, j1, 0]) / (s[1] - s[0])
            out[:, j] = fam.values[:, j, 0] + (tj - s[0]) * slope
        if not np.all(np.isfinite(out[:, j])):
            raise ResolutionError(f"family slices needed at t={tj} are absent")
    return ScalarField(out, g, reversed=False)


# ---------------------------------------------------------------------------
# CSV dumps: rows ordered by t (physical time), then s, then x.
# ---------------------------------------------------------------------------

_FMT = "%.17g"


def write_field_csv(path, fld: ScalarField) -> None:
    f = fld.forward()
    g = f.grid
    X, Tm = np.meshgrid(g.x, g.t)  # (Nt, Nx): row-major by t
    data = np.column_stack([X.ravel(), Tm.ravel(), f.values.T.ravel()])
    np.savetxt(path, data, fmt=_FMT, delimiter=",", header="x,t,value", comments="")


def write_family_csv(path, fam: FamilyField) -> None:
    g = fam.grid
    rows = []
    valid = fam.valid
    for j, tj in enumerate(g.t):
        for k, sk in enumerate(g.s):
            if not valid[j, k]:
                continue
            rows.append(np.column_stack([g.x, np.full(g.Nx, tj), np.full(g.Nx, sk),
                                         fam.values[:, j, k]]))
    data = np.vstack(rows) if rows else np.empty((0, 4))
    np.savetxt(path, data, fmt=_FMT, delimiter=",", header="x,t,s,value", comments="")


def write_boundary_csv(path, gam: FreeBoundary) -> None:
    g = gam.grid
    data = np.column_stack([g.t, gam.forward_values()])
    np.savetxt(path, data, fmt=_FMT, delimiter=",", header="t,value", comments="")


def read_field_csv(path, grid: SpaceTimeGrid) -> ScalarField:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape != (grid.Nx * grid.Nt, 3):
        raise ValueError(f"{path}: expected {grid.Nx * grid.Nt} rows of x,t,value")
    return ScalarField(data[:, 2].reshape(grid.Nt, grid.Nx).T, grid, reversed=False)


def read_family_csv(path, grid: SpaceTimeGrid) -> FamilyField:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    vals = np.full((grid.Nx, grid.Nt, grid.Ns), np.nan)
    j = np.rint(data[:, 1] / grid.dt).astype(int)
    k = np.rint(data[:, 2] / (grid.T / (grid.Ns - 1))).astype(int)
    i = np.rint((data[:, 0] - grid.x_min) / grid.dx).astype(int)
    vals[i, j, k] = data[:, 3]
    return FamilyField(vals, grid)


def read_boundary_csv(path, grid: SpaceTimeGrid) -> FreeBoundary:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return FreeBoundary(data[::-1, 1], grid, reversed=True)
