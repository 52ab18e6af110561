import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eqsingular import grid as G
from eqsingular.grid import FamilyField, FreeBoundary, ScalarField, SpaceTimeGrid


@pytest.fixture
def g():
    return SpaceTimeGrid(-2.0, 1.0, 31, 1.0, 11, 6)


def test_grid_basics(g):
    assert g.dx == pytest.approx(0.1)
    assert g.dt == pytest.approx(0.1)
    assert g.aligned and g.s_stride == 2
    r = g.refined()
    assert (r.Nx, r.Nt, r.Ns) == (61, 21, 11)
    assert r.dx == pytest.approx(g.dx / 2)


@pytest.mark.parametrize("kw", [dict(x_min=1.0, x_max=0.0), dict(Nx=1), dict(Nt=1), dict(Ns=1), dict(T=0.0)])
def test_grid_rejects(kw):
    base = dict(x_min=-1.0, x_max=1.0, Nx=5, T=1.0, Nt=5, Ns=2)
    base.update(kw)
    with pytest.raises(ValueError):
        SpaceTimeGrid(**base)


def test_field_rejects_nonfinite(g):
    vals = np.zeros((g.Nx, g.Nt))
    vals[3, 4] = np.nan
    with pytest.raises(ValueError):
        ScalarField(vals, g)


def test_interp_node_exact_and_linear(g):
    X, T = np.meshgrid(g.x, g.t, indexing="ij")
    f = ScalarField(3 * X - 2 * T + 1, g)
    assert G.interp2(f, g.x[7], g.t[3]) == f.values[7, 3]
    for x, t in [(-1.234, 0.33), (0.999, 0.01), (-2.0, 1.0)]:
        assert G.interp2(f, x, t) == pytest.approx(3 * x - 2 * t + 1, abs=1e-13)
    const = ScalarField(np.full((g.Nx, g.Nt), 7.0), g)
    assert G.interp2(const, 0.123, 0.456) == 7.0
    with pytest.raises(ValueError):
        G.interp2(f, 1.5, 0.5)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=31, max_size=31), st.floats(-2, 1), st.floats(-2, 1),
       st.floats(0, 1))
def test_interp_monotone(incs, x1, x2, t):
    g = SpaceTimeGrid(-2.0, 1.0, 31, 1.0, 11)
    row = np.cumsum(incs)
    f = ScalarField(np.repeat(row[:, None], g.Nt, axis=1), g)
    lo, hi = sorted((x1, x2))
    assert G.interp2(f, lo, t) <= G.interp2(f, hi, t) + 1e-12


def test_reversal_roundtrip(g):
    vals = np.random.default_rng(0).normal(size=(g.Nx, g.Nt))
    f = ScalarField(vals, g, reversed=True)
    assert np.array_equal(f.forward().values, vals[:, ::-1])
    assert np.array_equal(f.forward().as_reversed().values, vals)


def _family(g, fn):
    vals = np.full((g.Nx, g.Nt, g.Ns), np.nan)
    for k, s in enumerate(g.s):
        for j, t in enumerate(g.t):
            if t >= s - 1e-12:
                vals[:, j, k] = fn(g.x, t, s)
    return FamilyField(vals, g)


def test_diag_s_constant(g):
    fam = _family(g, lambda x, t, s: np.sin(x) + t)
    d = G.diag_extract(fam)
    X, T = np.meshgrid(g.x, g.t, indexing="ij")
    assert np.allclose(d.values, np.sin(X) + T, atol=1e-14)


def test_diag_aligned_exact():
    g = SpaceTimeGrid(-1.0, 1.0, 11, 1.0, 11, 11)
    fam = _family(g, lambda x, t, s: np.exp(-(t - s)) * x**2 + s**3)
    d = G.diag_extract(fam)
    X, T = np.meshgrid(g.x, g.t, indexing="ij")
    assert np.array_equal(d.values, X**2 + T**3)


def test_diag_exponential_oracle():
    gam = 0.7
    errs = []
    for Ns in (6, 11, 21):
        g = SpaceTimeGrid(-1.0, 1.0, 5, 1.0, 41, Ns)
        fam = _family(g, lambda x, t, s: gam * np.exp(-gam * (t - s)) * (1 + x**2) * (1 + t))
        d = G.diag_extract(fam)
        X, T = np.meshgrid(g.x, g.t, indexing="ij")
        errs.append(np.max(np.abs(d.values - gam * (1 + X**2) * (1 + T))))
    # second order in ds
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_diag_commutes_with_s_independent_shift(g):
    fam = _family(g, lambda x, t, s: np.cos(s) * x + t * s)
    shift = _family(g, lambda x, t, s: x**3 - t)
    both = FamilyField(fam.values + shift.values, g)
    lhs = G.diag_extract(both).values
    rhs = G.diag_extract(fam).values + G.diag_extract(shift).values
    assert np.allclose(lhs, rhs, atol=1e-13)


def test_diag_resolution_error():
    g = SpaceTimeGrid(-1.0, 1.0, 5, 1.0, 21, 3)
    fam = _family(g, lambda x, t, s: x + s)
    vals = fam.values.copy()
    vals[:, :, 1] = np.nan  # slice never produced
    with pytest.raises(G.ResolutionError):
        G.diag_extract(FamilyField(vals, g))
    # s-nodes off the t-grid cannot reach the first interval
    g2 = SpaceTimeGrid(-1.0, 1.0, 5, 1.0, 4, 3)
    with pytest.raises(G.ResolutionError):
        G.diag_extract(_family(g2, lambda x, t, s: x + s))


def test_csv_roundtrip(tmp_path, g):
    rng = np.random.default_rng(1)
    f = ScalarField(rng.normal(size=(g.Nx, g.Nt)), g, reversed=True)
    G.write_field_csv(tmp_path / "f.csv", f)
    back = G.read_field_csv(tmp_path / "f.csv", g)
    assert np.array_equal(back.values, f.forward().values)
    head = (tmp_path / "f.csv").read_text().splitlines()
    assert head[0] == "x,t,value"
    # row-major by t: first Nx rows share t = 0
    ts = [float(line.split(",")[1]) for line in head[1:g.Nx + 1]]
    assert set(ts) == {0.0}

    fam = _family(g, lambda x, t, s: x * t + s)
    G.write_family_csv(tmp_path / "fam.csv", fam)
    back = G.read_family_csv(tmp_path / "fam.csv", g)
    assert np.array_equal(np.isnan(back.values), np.isnan(fam.values))
    assert np.array_equal(np.nan_to_num(back.values), np.nan_to_num(fam.values))
    assert (tmp_path / "fam.csv").read_text().startswith("x,t,s,value\n")

    gam = FreeBoundary(np.linspace(0.5, 0.2, g.Nt), g, reversed=True)
    G.write_boundary_csv(tmp_path / "gam.csv", gam)
    back = G.read_boundary_csv(tmp_path / "gam.csv", g)
    assert np.array_equal(back.values, gam.values)
    assert gam.at_forward(0.0) == pytest.approx(0.2)
    assert gam.at_forward(1.0) == pytest.approx(0.5)


def test_boundary_must_be_finite(g):
    vals = np.zeros(g.Nt)
    vals[2] = np.inf
    with pytest.raises(ValueError):
        FreeBoundary(vals, g)
