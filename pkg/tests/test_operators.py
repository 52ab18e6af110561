import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eqsingular import model, operators as ops
from eqsingular.grid import ScalarField, SpaceTimeGrid


def _inst(b=0.4, a=1.5, sigma=0.7):
    return model.ProblemInstance(
        drift=model.MeanRevertingDrift(b, a), volatility=model.ConstantVolatility(sigma),
        running_loss=model.ExpLinearLoss(1.0, model.ExponentialRate(1.0, 0.0)),
        terminal_loss=model.ExponentialTerminal(1.0, 1.0), cost=model.ConstantCost(1.0),
        discount=model.ExponentialDiscount(0.1), horizon=1.0)


G = SpaceTimeGrid(-2.0, 2.0, 41, 1.0, 21)


def _field(fn, reversed_=True):
    X, T = np.meshgrid(G.x, G.t, indexing="ij")
    return ScalarField(fn(X, T), G, reversed=reversed_)


def test_L_polynomial_examples():
    inst = _inst()
    b, a = 0.4, 1.5
    for node in [(5, 3), (20, 10), (35, 0)]:
        x = G.x[node[0]]
        assert ops.apply_L(_field(lambda X, T: X), inst, node) == pytest.approx(b - 2 * a * x, abs=1e-12)
        assert ops.apply_L(_field(lambda X, T: 0 * X + 3.0), inst, node) == pytest.approx(-a * 3.0, abs=1e-12)
    # v = t: -v_t + mu_x v; no reaction when a = 0
    flat = _inst(a=0.0)
    assert ops.apply_L(_field(lambda X, T: T), flat, (10, 5)) == pytest.approx(-1.0, abs=1e-12)
    assert ops.apply_L(_field(lambda X, T: T), inst, (10, 5)) == pytest.approx(-1.0 - a * G.t[5], abs=1e-12)


def test_A_polynomial_examples():
    inst = _inst()
    b, a, s = 0.4, 1.5, 0.7
    node = (12, 7)
    x = G.x[12]
    assert ops.apply_A(_field(lambda X, T: T, False), inst, node) == pytest.approx(1.0, abs=1e-12)
    assert ops.apply_A(_field(lambda X, T: X, False), inst, node) == pytest.approx(b - a * x, abs=1e-12)
    assert ops.apply_A(_field(lambda X, T: X**2, False), inst, node) == \
        pytest.approx(2 * x * (b - a * x) + s**2, abs=1e-11)


def test_boundary_node_is_contract_error():
    with pytest.raises(ops.ContractError):
        ops.apply_L(_field(lambda X, T: X), _inst(), (0, 3))
    with pytest.raises(ops.ContractError):
        ops.apply_A(_field(lambda X, T: X, False), _inst(), (G.Nx - 1, 3))


def test_L_manufactured_rate():
    inst = _inst()
    b, a, s = 0.4, 1.5, 0.7
    x0, tau0 = 0.3, 0.5

    def exact():
        # v = sin(x) exp(-tau)
        v = math.sin(x0) * math.exp(-tau0)
        vx = math.cos(x0) * math.exp(-tau0)
        vxx = -v
        vt = -v
        return -vt + 0.5 * s**2 * vxx + (b - a * x0) * vx - a * v

    errs = []
    for n in (1, 2, 4):
        g = SpaceTimeGrid(x0 - 1.0, x0 + 1.0, 20 * n + 1, 1.0, 20 * n + 1)
        X, T = np.meshgrid(g.x, g.t, indexing="ij")
        f = ScalarField(np.sin(X) * np.exp(-T), g, reversed=True)
        errs.append(abs(ops.apply_L(f, inst, (10 * n, 10 * n)) - exact()))
    # central in space and time at an interior node: second order
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_penalty_examples():
    p = ops.PenaltyParams(eps=0.1, C_n=2.5)
    assert ops.penalty(0.0, p)[0] == -2.5
    val, _ = ops.penalty(0.1, ops.PenaltyParams(0.1, 1.0))
    assert val == pytest.approx(-math.exp(-1.0), abs=1e-15)
    vals = [ops.penalty(-0.05, ops.PenaltyParams(e, 1.0))[0] for e in (0.1, 0.05, 0.02, 0.01)]
    assert all(v1 > v2 for v1, v2 in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        ops.PenaltyParams(eps=0.0, C_n=1.0)


@settings(max_examples=50, deadline=None)
@given(z=st.floats(-0.5, 2.0), eps=st.floats(0.01, 1.0), C=st.floats(1e-3, 10.0))
def test_penalty_slope_consistent(z, eps, C):
    p = ops.PenaltyParams(eps, C)
    h = 1e-6 * eps
    fd = (ops.penalty(z + h, p)[0] - ops.penalty(z - h, p)[0]) / (2 * h)
    # slope is d/dz of C_n alpha_eps(z)
    assert fd == pytest.approx(ops.penalty(z, p)[1], rel=1e-6, abs=1e-12)


def test_penalty_vectorised():
    z = np.array([0.0, 0.1, 1.0])
    val, slope = ops.penalty(z, ops.PenaltyParams(0.1, 1.0))
    assert val.shape == (3,) and np.all(slope > 0)


def _heat_stencil(n, dt, D=0.5):
    dx = 1.0 / (n - 1)
    return ops.assemble(np.full(n, D), np.zeros(n), 0.0, dx, dt), dx


def test_constant_row_is_fixed_point():
    n = 51
    st_, dx = _heat_stencil(n, 0.01)
    adv = ops.assemble(np.full(n, 0.3), np.linspace(-2, 2, n), 0.0, dx, 0.01)
    for s in (st_, adv):
        out = ops.implicit_step(s, np.full(n, 4.2), ("dirichlet", 4.2), ("dirichlet", 4.2))
        assert np.allclose(out, 4.2, atol=1e-13)
        out = ops.implicit_step(s, np.full(n, 4.2), ("neumann", 0.0), ("neumann", 0.0))
        assert np.allclose(out, 4.2, atol=1e-13)


def test_heat_sine_decay_matches_eigenvalue():
    n, dt, D = 101, 1e-3, 0.5
    st_, dx = _heat_stencil(n, dt, D)
    x = np.linspace(0, 1, n)
    for k in (1, 3):
        u0 = np.sin(k * math.pi * x)
        u1 = ops.implicit_step(st_, u0, ("dirichlet", 0.0), ("dirichlet", 0.0))
        lam = 4 * D / dx**2 * math.sin(k * math.pi * dx / 2) ** 2
        assert np.max(np.abs(u1 - u0 / (1 + dt * lam))) < 1e-10


def test_zero_dt_is_identity():
    n = 21
    st_ = ops.assemble(np.full(n, 0.3), np.linspace(-1, 1, n), -0.5, 0.05, 0.0)
    prev = np.random.default_rng(0).normal(size=n)
    out = ops.implicit_step(st_, prev, ("dirichlet", prev[0]), ("dirichlet", prev[-1]))
    assert np.allclose(out, prev, atol=1e-14)


def test_upwind_fallback_keeps_monotone():
    n = 21
    st_ = ops.assemble(np.full(n, 1e-3), np.linspace(-50, 50, n), 0.0, 0.05, 0.01)
    assert st_.upwinded.any()
    assert st_.monotone and st_.diagonally_dominant
    central = ops.assemble(np.full(n, 1.0), np.linspace(-1, 1, n), 0.0, 0.05, 0.01)
    assert not central.upwinded.any()


def test_diffusion_must_be_positive():
    with pytest.raises(ops.ContractError):
        ops.assemble(np.zeros(5), np.zeros(5), 0.0, 0.1, 0.1)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=31, max_size=31),
       st.floats(0.01, 2.0), st.floats(-20, 20), st.floats(1e-4, 0.1), st.floats(-5, 5), st.floats(-5, 5))
def test_discrete_maximum_principle(prev, D, B, dt, left, right):
    prev = np.array(prev)
    n = len(prev)
    st_ = ops.assemble(np.full(n, D), np.full(n, B), 0.0, 0.1, dt)
    assert st_.monotone
    out = ops.implicit_step(st_, prev, ("dirichlet", left), ("dirichlet", right))
    lo = min(prev[1:-1].min(), left, right)
    hi = max(prev[1:-1].max(), left, right)
    assert out.min() >= lo - 1e-12 and out.max() <= hi + 1e-12


def test_multi_rhs_matches_columns():
    n = 31
    st_ = ops.assemble(np.full(n, 0.4), np.linspace(-1, 1, n), -0.2, 0.1, 0.05)
    rng = np.random.default_rng(3)
    P = rng.normal(size=(n, 4))
    slopes = np.array([0.0, 1.0, -2.0, 0.5])
    many = ops.implicit_step(st_, P, ("dirichlet", 0.0), ("neumann", slopes))
    for k in range(4):
        one = ops.implicit_step(st_, P[:, k], ("dirichlet", 0.0), ("neumann", slopes[k]))
        assert np.allclose(many[:, k], one, atol=1e-13)


def test_neumann_ghost_second_order():
    # steady u'' = 0 with u(0) = 0, u'(1) = 2 -> u = 2x
    n = 41
    dx = 1.0 / (n - 1)
    st_ = ops.assemble(np.full(n, 1.0), np.zeros(n), 0.0, dx, 1e6)
    u = ops.implicit_step(st_, np.zeros(n), ("dirichlet", 0.0), ("neumann", 2.0))
    assert np.allclose(u, 2 * np.linspace(0, 1, n), atol=1e-5)


def test_singular_system():
    st_ = ops.OperatorStencil(np.zeros(3), np.array([1.0, 0.0, 1.0]), np.zeros(3), np.zeros(3), 0.1, 0.1)
    with pytest.raises(ops.SingularSystemError):
        ops.implicit_step(st_, np.ones(3), ("dirichlet", 0.0), ("dirichlet", 0.0))
