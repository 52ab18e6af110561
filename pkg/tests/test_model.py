import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from eqsingular import model
from eqsingular.model import (ConstantCost, ExpLinearLoss, ExponentialDiscount, ExponentialRate,
                              ExponentialTerminal, HyperbolicDiscount, MixtureDiscount, RemarkParams)


def _inst(**kw):
    base = dict(
        drift=model.MeanRevertingDrift(0.5, 2.0),
        volatility=model.ConstantVolatility(0.5),
        running_loss=ExpLinearLoss(1.0, ExponentialRate(2.0, 1.0)),
        terminal_loss=ExponentialTerminal(1.0, 1.0),
        cost=ConstantCost(1.0),
        discount=ExponentialDiscount(0.5),
        horizon=1.0,
    )
    base.update(kw)
    return model.ProblemInstance(**base)


# --- effective terminal loss ----------------------------------------------


def _brute_ftilde(F, c, x):
    a = np.arange(0.0, 20.0 + 1e-12, 1e-4)
    return float(np.min(F.deriv(x - a) + c * a))


def test_ftilde_unit_exponential():
    ft = model.effective_terminal(_inst())
    assert ft.x_star == pytest.approx(0.0, abs=1e-15)
    for x in (-2.0, -0.5, 0.0):
        assert ft.value(x) == pytest.approx(math.exp(x), abs=1e-15)
    for x in (0.3, 1.0, 4.0):
        assert ft.value(x) == pytest.approx(1.0 + x, abs=1e-14)
        assert _brute_ftilde(ft.F, 1.0, x) == pytest.approx(float(ft.value(x)), abs=1e-6)


def test_ftilde_kink_two_exp():
    ft = model.effective_terminal(_inst(terminal_loss=ExponentialTerminal(2.0, 2.0)))
    assert ft.x_star == pytest.approx(-math.log(4.0) / 2, abs=1e-14)
    for x in np.linspace(-2, 2, 9):
        assert _brute_ftilde(ft.F, 1.0, x) == pytest.approx(float(ft.value(x)), abs=1e-6)


def test_ftilde_no_purchase_when_slope_small():
    # affine F with slope below c(T): buying at T never pays
    ft = model.effective_terminal(_inst(terminal_loss=model.AffineTerminal(0.5, 1.0)))
    assert math.isinf(ft.x_star)
    xs = np.linspace(-3, 3, 13)
    assert np.array_equal(ft.value(xs), ft.F.deriv(xs))
    assert np.all(ft.minimizer(xs) == 0)


@settings(max_examples=40, deadline=None)
@given(C_F=st.floats(0.1, 50), psi=st.floats(0.5, 5), c=st.floats(0.1, 5))
def test_ftilde_properties(C_F, psi, c):
    inst = _inst(terminal_loss=ExponentialTerminal(C_F, psi), cost=ConstantCost(c))
    ft = model.effective_terminal(inst)
    xs = np.linspace(ft.x_star - 3, ft.x_star + 3, 241)
    Ft = ft.value(xs)
    assert np.all(Ft <= inst.F(xs) + 1e-12 * np.abs(inst.F(xs)))
    d2 = Ft[2:] - 2 * Ft[1:-1] + Ft[:-2]
    assert np.all(d2 >= -1e-10 * np.maximum(1.0, np.abs(Ft[1:-1])))
    # closed form against numerical minimisation
    for x in xs[::40]:
        res = optimize.minimize_scalar(lambda a: C_F * math.exp(psi * (x - a)) + c * a,
                                       bounds=(0.0, 10.0), method="bounded",
                                       options={"xatol": 1e-12})
        best = min(res.fun, C_F * math.exp(psi * x))
        assert float(ft.value(x)) == pytest.approx(best, abs=1e-6)


def test_ill_posed_terminal():
    with pytest.raises(model.IllPosedError):
        model.effective_terminal(_inst(terminal_loss=ExponentialTerminal(1.0, -1.0)))


# --- discounts ---------------------------------------------------------------


def test_discount_examples():
    inst = _inst(discount=ExponentialDiscount(0.5))
    assert model.discount_eval(inst, 0.0) == (1.0, -0.5)
    inst = _inst(discount=HyperbolicDiscount(1.0))
    assert model.discount_eval(inst, 1.0) == (0.5, -0.25)
    with pytest.raises(ValueError):
        model.discount_eval(inst, 1.5)


def test_mixture_degenerates():
    t = np.linspace(0, 3, 31)
    mix = MixtureDiscount(1.0, 0.7, 5.0)
    exp = ExponentialDiscount(0.7)
    assert np.array_equal(mix.value(t), exp.value(t))
    assert np.array_equal(mix.deriv(t), exp.deriv(t))


def test_parse_discount():
    assert model.parse_discount("hyperbolic:k=1") == HyperbolicDiscount(1.0)
    assert model.parse_discount("mixture:lam=0.3,gamma1=1,gamma2=2") == MixtureDiscount(0.3, 1.0, 2.0)
    with pytest.raises(model.InputError):
        model.parse_discount("geometric:k=1")
    with pytest.raises(model.InputError):
        model.parse_discount("hyperbolic")


discounts = st.one_of(
    st.builds(ExponentialDiscount, st.floats(0.0, 5.0)),
    st.builds(HyperbolicDiscount, st.floats(0.0, 5.0)),
    st.builds(MixtureDiscount, st.floats(0.0, 1.0), st.floats(0.0, 5.0), st.floats(0.0, 5.0)),
)


@settings(max_examples=60, deadline=None)
@given(disc=discounts)
def test_discount_properties(disc):
    t = np.linspace(0.0, 2.0, 41)
    b = disc.value(t)
    db = disc.deriv(t)
    assert b[0] == pytest.approx(1.0, abs=1e-15)
    assert np.all(b > 0) and np.all(b <= 1.0 + 1e-15)
    assert np.all(db <= 0)
    h = 1e-5
    fd = (disc.value(t[1:-1] + h) - disc.value(t[1:-1] - h)) / (2 * h)
    scale = np.maximum(np.abs(db[1:-1]), 1e-3)
    assert np.all(np.abs(fd - db[1:-1]) <= 1e-6 * scale)


# --- coefficient derivatives ------------------------------------------------


def test_running_loss_c1_continuation():
    H = ExpLinearLoss(22.0, ExponentialRate(2.11, 4.62), -1.537)
    for t in (0.0, 0.05, 0.1):
        lo, hi = -1.537 - 1e-9, -1.537 + 1e-9
        assert float(H.deriv(lo, t)) == pytest.approx(float(H.deriv(hi, t)), rel=1e-8)
        assert float(H.deriv(lo, t, 1)) == pytest.approx(float(H.deriv(hi, t, 1)), rel=1e-8)
        assert float(H.deriv(hi, t, 2)) == 0.0
        assert float(H.deriv(-1.0, t, 1)) == pytest.approx(float(H.deriv(-1.537, t, 1)), rel=1e-12)


@pytest.mark.parametrize("x", [-3.0, -1.6, -1.0, 0.5])
@pytest.mark.parametrize("t", [0.0, 0.04, 0.1])
def test_running_loss_finite_differences(x, t):
    H = ExpLinearLoss(22.0, ExponentialRate(2.11, 4.62), -1.537)
    h = 1e-6
    for n in range(2):
        fd = (H.deriv(x + h, t, n) - H.deriv(x - h, t, n)) / (2 * h)
        assert float(fd) == pytest.approx(float(H.deriv(x, t, n + 1)), rel=1e-6, abs=1e-9)
        fdt = (H.deriv(x, t + h, n) - H.deriv(x, t - h, n)) / (2 * h) if t > 0 else \
            (H.deriv(x, t + h, n) - H.deriv(x, t, n)) / h
        assert float(fdt) == pytest.approx(float(H.deriv(x, t, n, 1)), rel=1e-4, abs=1e-8)


def test_kappa_finite_differences():
    k = model.ExpKappa(1.26, 3.47)
    h = 1e-6
    for x in (-5.0, -2.0):
        for t in (0.02, 0.08):
            for n in range(2):
                fd = (k.deriv(x + h, t, n) - k.deriv(x - h, t, n)) / (2 * h)
                assert float(fd) == pytest.approx(float(k.deriv(x, t, n + 1)), rel=1e-6)
                fdt = (k.deriv(x, t + h, n) - k.deriv(x, t - h, n)) / (2 * h)
                assert float(fdt) == pytest.approx(float(k.deriv(x, t, n, 1)), rel=1e-6)


def test_instance_invariants(canon):
    assert canon.invariant_violations() == []
    bad = canon.replace(volatility=model.ConstantVolatility(0.0), cost=ConstantCost(-1.0))
    v = bad.invariant_violations()
    assert "sigma > 0" in v and "c > 0" in v


# --- example conditions and grid inequalities --------------------------------


def test_canonical_x_star(canon):
    # x* = ln(c / (C_F Psi_F)) / Psi_F
    assert model.effective_terminal(canon).x_star == pytest.approx(-1.6131472644545832, abs=1e-14)


def test_canonical_remark_all_pass(canon):
    rep = model.check_remark_example(RemarkParams.from_instance(canon))
    assert rep.ok, rep.failed()
    assert rep.notes["K"] == pytest.approx(-1.4603, abs=1e-4)
    # the tightest beta condition: recorded margin of the canonical set
    first_beta = rep.checks[-3]
    assert first_beta.block == "fifth"
    assert first_beta.margin == pytest.approx(2.9e-3, abs=2e-4)


def test_canonical_grid_all_pass(canon, canon_grid):
    rep = model.check_assumption_grid(canon, canon_grid)
    assert rep.ok, rep.failed()
    # linear drift and constant cost pass with margin exactly zero
    assert rep["(c134) μ_xx ≥ 0"].margin == 0.0
    assert rep["(c134) μ_xxx ≥ 0"].margin == 0.0
    assert rep["(t1) c'(T-t) ≤ 0"].margin == 0.0
    assert "-0.000000e+00" not in rep.table()


MUTATIONS = [
    ({"psi_F": 0.5}, "Ψ_F > max{1, 1/b}"),
    ({"a": 0.565 + 0.5 * 0.8**2 - 0.1}, "a ∈ (max{b+½σ², 1}, bΨ_F+½σ²Ψ_F²): lower"),
    ({"kbar": 2.0}, "κ̄ > a"),
]


@pytest.mark.parametrize("change,name", MUTATIONS)
def test_mutations_name_the_inequality(canon, change, name):
    p = dataclasses.replace(RemarkParams.from_instance(canon), **change)
    rep = model.check_remark_example(p)
    assert not rep.ok
    assert name in rep.failed()


def test_remark_rejects_nonfinite(canon):
    p = dataclasses.replace(RemarkParams.from_instance(canon), b=math.nan)
    with pytest.raises(model.InputError):
        model.check_remark_example(p)


def test_grid_check_names_failure(canon, canon_grid):
    # a much stronger discount breaks the first R0-type inequality
    rep = model.check_assumption_grid(canon.replace(discount=HyperbolicDiscount(1.0)), canon_grid)
    assert not rep.ok
    assert "(c6) -H_x < β'(0)F̃'" in rep.failed()
