import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levypen import check_condition_A, make_model, psi
from levypen.errors import ModelError


def test_bm_exponent_and_moment():
    m = make_model(kind="bm", sigma=0.7)
    assert m.exponent(2.0) == pytest.approx(0.5 * 0.49 * 4.0)
    assert m.second_moment == pytest.approx(0.49)


def test_stable_has_infinite_second_moment():
    m = make_model({"kind": "stable", "alpha": 1.5, "c": 2.0})
    assert m.exponent(-4.0) == pytest.approx(2.0 * 8.0)
    assert math.isinf(m.second_moment)


def test_stable_alpha_two_is_brownian():
    m = make_model(kind="stable", alpha=2.0, c=0.5)
    assert m.exponent(3.0) == pytest.approx(4.5)
    assert m.second_moment == pytest.approx(1.0)


def test_bm_cp_moment_includes_jumps():
    m = make_model(kind="bm_cp", sigma=1.0, rate=0.5, jump_decay=2.0)
    # Laplace(2) jumps have variance 2/4
    assert m.second_moment == pytest.approx(1.0 + 0.5 * 0.5)
    lam = 1.3
    assert m.exponent(lam) == pytest.approx(0.5 * lam**2 + 0.5 * lam**2 / (4.0 + lam**2))


def test_psi_is_real_and_even():
    m = make_model(kind="bm_cp", sigma=1.0, rate=1.0)
    v = psi(m, 2.0)
    assert isinstance(v, complex) and v.imag == 0.0
    assert psi(m, -2.0) == v


@pytest.mark.parametrize("spec", [
    {"kind": "levy"},
    {"kind": "bm", "sigma": -1},
    {"kind": "bm", "sigma": 0},
    {"kind": "stable", "alpha": 1.0},
    {"kind": "stable", "alpha": 2.5},
    {"kind": "stable", "alpha": 0.8},
    {"kind": "bm_cp", "sigma": 1.0},
    {"kind": "bm", "sigma": 1.0, "alpha": 1.5},
    {"kind": "bm", "sigma": float("inf")},
])
def test_invalid_models_rejected(spec):
    with pytest.raises(ModelError):
        make_model(spec)


def test_condition_A_bm_closed_form():
    m = make_model(kind="bm")
    d = check_condition_A(m, 1.0)
    assert d.holds
    # int_0^inf dlam / (1 + lam^2/2) = pi / sqrt(2)
    assert d.integral_estimate == pytest.approx(math.pi / math.sqrt(2.0), abs=1e-8)


def test_condition_A_needs_positive_q():
    with pytest.raises(ModelError):
        check_condition_A(make_model(kind="bm"), 0.0)


def test_small_q_exponents_repeat_on_coincidence():
    m = make_model(kind="stable", alpha=1.5)
    ex = m.small_q_exponents
    assert ex == tuple(sorted(ex))
    assert ex.count(1.0) == 2


@settings(max_examples=40, deadline=None)
@given(st.floats(1.05, 2.0), st.floats(0.1, 5.0), st.floats(0.01, 50.0))
def test_stable_exponent_is_homogeneous(alpha, c, lam):
    m = make_model(kind="stable", alpha=alpha, c=c)
    assert m.exponent(2 * lam) == pytest.approx(2**alpha * m.exponent(lam), rel=1e-12)


def test_to_dict_round_trip():
    for spec in ({"kind": "bm", "sigma": 1.2}, {"kind": "stable", "alpha": 1.3, "c": 0.4},
                 {"kind": "bm_cp", "sigma": 1.0, "rate": 0.5, "jump_decay": 2.0}):
        m = make_model(spec)
        assert make_model(m.to_dict()) == m
        assert np.isfinite(m.exponent(np.linspace(0, 10, 5))).all()
