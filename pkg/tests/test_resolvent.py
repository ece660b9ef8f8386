import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import bm_cp_h_exact, evaluator, stable_h_exact
from levypen import HFunctionEvaluator, QuadratureConfig, make_model, resolvent_density
from levypen.quadrature import richardson, wynn_epsilon


def bm_r(q, x, sigma=1.0):
    s = math.sqrt(2.0 * q) / sigma
    return math.exp(-s * abs(x)) / (sigma**2 * s)


@pytest.mark.parametrize("q,x", [(0.01, 0.0), (0.5, 1.3), (2.0, -0.4), (10.0, 2.0)])
def test_bm_resolvent_closed_form(q, x):
    assert resolvent_density(make_model(kind="bm"), q, x) == pytest.approx(bm_r(q, x), abs=1e-9)


def test_bm_resolvent_with_sigma():
    ev = evaluator("bm_wide")
    assert ev.r(0.3, 0.8) == pytest.approx(bm_r(0.3, 0.8, 0.7), abs=1e-9)


def test_resolvent_gap_tends_to_h(bm):
    assert bm.resolvent_gap(1e-8, 1.5) == pytest.approx(1.5, abs=1e-3)


@pytest.mark.parametrize("x", [0.0, 0.2, 1.0, -3.0, 12.5])
def test_bm_h_linear(bm, x):
    assert bm.h(x) == pytest.approx(abs(x), abs=1e-9)


def test_h_scales_with_sigma():
    assert evaluator("bm_wide").h(2.0) == pytest.approx(2.0 / 0.49, rel=1e-9)


@pytest.mark.parametrize("x", [0.1, 0.7, 3.0, 25.0])
def test_stable_h_closed_form(x):
    assert evaluator("stable15").h(x) == pytest.approx(stable_h_exact(x, 1.5, 1.0), rel=1e-9)
    assert evaluator("stable12").h(-x) == pytest.approx(stable_h_exact(x, 1.2, 1.0), rel=1e-9)


@pytest.mark.parametrize("x", [0.05, 0.6, 2.0, 9.0, 40.0])
def test_bm_cp_h_closed_form(bmcp, x):
    assert bmcp.h(x) == pytest.approx(bm_cp_h_exact(x, 1.0, 0.5, 2.0), abs=1e-9)


def test_h_vec_matches_scalar(any_ev):
    xs = np.array([-7.3, -1.0, 0.0, 0.33, 2.5, 60.0])
    ref = np.array([any_ev.h(float(x)) for x in xs])
    assert np.allclose(any_ev.h_vec(xs), ref, atol=1e-10, rtol=1e-10)


@pytest.mark.parametrize("name", ["bm", "stable15", "stable12", "bm_cp"])
def test_richardson_route_agrees(name):
    ev = evaluator(name)
    for x in (0.5, 2.0, 8.0):
        val, _err = ev.h_richardson(x)
        assert val == pytest.approx(ev.h(x), abs=1e-7)


def test_h_gamma_adds_drift_term(bmcp):
    m2 = bmcp.second_moment
    assert bmcp.h_gamma(0.5, 2.0) == pytest.approx(bmcp.h(2.0) + 0.5 * 2.0 / m2)
    assert bmcp.h_gamma(-1.0, -3.0) == pytest.approx(bmcp.h(3.0) + 3.0 / m2)


def test_h_gamma_inert_for_stable(stable):
    assert stable.h_gamma(1.0, 2.0) == stable.h(2.0)


def test_h_gamma_extremes_vanish_on_one_side(bm):
    # for BM with gamma = 1, h^(1)(x) = 2 x^+ (sigma = 1)
    assert bm.h_gamma(1.0, -2.0) == pytest.approx(0.0, abs=1e-9)
    assert bm.h_gamma(1.0, 2.0) == pytest.approx(4.0, abs=1e-9)


def test_h_B_and_h_C(bm):
    assert bm.h_B(1.5) == pytest.approx(3.0, abs=1e-9)
    # two-sided exit rate for BM: h^C(c, -d) = 2 c d / (c + d)
    assert bm.h_C(1.0, -1.0) == pytest.approx(1.0, abs=1e-9)
    assert bm.h_C(2.0, -3.0) == pytest.approx(12.0 / 5.0, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10))
def test_h_subadditive(x, y):
    ev = evaluator("bm_cp")
    assert ev.h(x + y) <= ev.h(x) + ev.h(y) + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.floats(-20, 20))
def test_h_even_and_nonnegative(x):
    ev = evaluator("stable12")
    assert ev.h(x) >= -1e-12
    assert ev.h(-x) == pytest.approx(ev.h(x), abs=1e-12)


def test_quadrature_config_affects_result():
    loose = HFunctionEvaluator(make_model(kind="bm"), QuadratureConfig(abs_tol=1e-4))
    assert loose.h(1.0) == pytest.approx(1.0, abs=1e-3)


def test_richardson_removes_listed_powers():
    f = lambda q: 3.0 + 2.0 * q**0.5 - q + 5.0 * q**1.5
    qs = [0.1 / 2**j for j in range(4)]
    est, _ = richardson([f(q) for q in qs], [0.5, 1.0, 1.5])
    assert est == pytest.approx(3.0, abs=1e-12)


def test_richardson_repeated_power_handles_log():
    f = lambda q: 1.0 + q * math.log(q) + 2 * q + q**2
    qs = [0.01 / 2**j for j in range(4)]
    est, _ = richardson([f(q) for q in qs], [1.0, 1.0, 2.0])
    assert est == pytest.approx(1.0, abs=1e-12)


def test_wynn_accelerates_alternating_series():
    terms = [(-1) ** k / (k + 1) for k in range(12)]
    est = wynn_epsilon(np.cumsum(terms))
    est = est[0] if isinstance(est, tuple) else est
    assert est == pytest.approx(math.log(2.0), abs=1e-8)
