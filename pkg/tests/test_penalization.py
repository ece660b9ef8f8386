import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import evaluator
from levypen import (I_vector, I_vector_zero_excursion, J_matrix, PenalizationProblem, PhiFunction,
                     final_local_time_law, finite_hitting_expectation, martingale_density, phi, phi_base,
                     phi_two_point_closed, solve)
from levypen.errors import DomainError
from levypen.penalization import inverse_local_time_expectation

P01 = PenalizationProblem((0.0, 1.0), (1.0, 1.0))


def test_problem_validation():
    with pytest.raises(DomainError):
        PenalizationProblem((0.0, 1.0), (1.0,))
    with pytest.raises(DomainError):
        PenalizationProblem((0.0, 1.0), (1.0, -1.0))
    with pytest.raises(DomainError):
        PenalizationProblem((0.0,), (1.0,), gamma=1.5)
    with pytest.raises(DomainError):
        PenalizationProblem((0.0, 0.0), (1.0, 1.0))
    assert P01.first() == PenalizationProblem((0.0,), (1.0,))


# BM, sigma = 1, A = {0, 1}, lam = (1, 1): h^B(1) = 2 so J_{k,i} = 1/3,
# I_k = 1/lam - J (1/lam + h(1)) = 1 - 2/3 and a = (E - J)^{-1} I = (1/2, 1/2)
def test_bm_two_point_oracle(bm):
    J = J_matrix(bm, P01)
    assert J == pytest.approx(np.array([[0, 1 / 3], [1 / 3, 0]]), abs=1e-10)
    assert I_vector(bm, P01) == pytest.approx([1 / 3, 1 / 3], abs=1e-10)
    sol = solve(bm, P01)
    assert sol.a_vec == pytest.approx([0.5, 0.5], abs=1e-10)
    assert not sol.flags


@pytest.mark.parametrize("x,expected", [(0.5, 0.5), (0.0, 0.5), (1.0, 0.5), (3.0, 2.5), (-2.0, 2.5)])
def test_bm_two_point_phi(bm, x, expected):
    # phi = |x - a| + 1/2 outside (a1, a2) ... and 1/2 in between for gamma = 0
    assert phi(bm, P01, x) == pytest.approx(expected, abs=1e-9)


def test_bm_gamma_minus_one_weights(bm):
    sol = solve(bm, P01.with_gamma(-1.0))
    assert sol.a_vec == pytest.approx([0.75, 0.25], abs=1e-10)


def test_one_point_phi(stable):
    p = PenalizationProblem((0.5,), (2.0,))
    assert phi(stable, p, 1.7) == pytest.approx(stable.h(1.2) + 0.5, abs=1e-12)


def test_phi_two_point_closed_matches(any_ev):
    p = PenalizationProblem((-0.4, 1.1), (0.6, 2.5), gamma=0.3)
    for x in (-2.0, 0.0, 0.7, 4.0):
        assert phi(any_ev, p, x) == pytest.approx(phi_two_point_closed(any_ev, p, x), abs=1e-10)


def test_phi_vectorized(any_ev):
    p = PenalizationProblem((-1.0, 0.0, 1.5, 3.0), (1.0, 0.5, 2.0, 1.0), gamma=-0.4)
    xs = np.linspace(-4, 6, 11)
    f = PhiFunction(any_ev, p)
    scalar = np.array([phi(any_ev, p, float(x)) for x in xs])
    assert np.allclose(f.values(xs), scalar, atol=1e-9)
    assert (scalar > 0).all()


def test_phi_base_at_points(bm):
    p = PenalizationProblem((0.0, 1.0, -1.0), (1.0, 1.0, 1.0))
    assert phi_base(bm, p, 0.5) >= -1e-12


def test_row_sums_below_one(any_ev):
    p = PenalizationProblem((-1.0, 0.0, 0.8, 2.0), (0.5, 1.0, 3.0, 0.2))
    J = J_matrix(any_ev, p)
    assert (J.sum(axis=1) < 1.0 - 1e-6).all()
    assert (J >= -1e-12).all() and np.all(np.diag(J) == 0)


@pytest.mark.parametrize("pts", [(0.0, 1.0), (-1.0, 0.3, 2.0)])
def test_zero_excursion_identity(any_ev, pts):
    p = PenalizationProblem(pts, tuple(0.5 + i for i in range(len(pts))))
    assert I_vector(any_ev, p) == pytest.approx(I_vector_zero_excursion(any_ev, p), abs=1e-8)


def test_gamma_mixing_affine(bmcp):
    p = PenalizationProblem((-1.0, 0.0, 2.0), (1.0, 2.0, 0.5))
    for x in (-3.0, 0.5, 5.0):
        lo, hi = phi(bmcp, p.with_gamma(-1), x), phi(bmcp, p.with_gamma(1), x)
        assert phi(bmcp, p.with_gamma(0.4), x) == pytest.approx(0.7 * hi + 0.3 * lo, abs=1e-12)


def test_martingale_density_at_start(bm):
    assert martingale_density(bm, P01, 0.5, 0.5, [0.0, 0.0]) == pytest.approx(1.0)
    assert martingale_density(bm, P01, 0.5, 3.0, [1.0, 0.0]) == pytest.approx(5 * math.exp(-1.0))
    with pytest.raises(DomainError):
        martingale_density(bm, P01, 0.5, 0.5, [0.0])


def test_finite_hitting_one_point_bm(bm):
    # from 0 with lam = 1 until T_4: 1 / (1 + lam h^B(4) / 2 ...) = 1 / (1 + 8) for BM
    p = PenalizationProblem((0.0,), (1.0,))
    assert finite_hitting_expectation(bm, p, 0.0, [4.0]) == pytest.approx(1 / 9, abs=1e-9)


def test_finite_hitting_bounds(stable):
    p = PenalizationProblem((0.0, 1.0), (1.0, 2.0))
    v = finite_hitting_expectation(stable, p, 0.5, [4.0])
    assert 0.0 < v < 1.0
    assert finite_hitting_expectation(stable, p, 4.0, [4.0]) == 1.0
    with pytest.raises(DomainError):
        finite_hitting_expectation(stable, p, 0.5, [1.0])


def test_one_hit_limit_approaches_phi(bm):
    # h^B(b) P_x[Gamma_{T_b}] -> phi^(1)(x) as b -> +inf
    target = phi(bm, P01.with_gamma(1.0), 0.5)
    errs = [abs(bm.h_B(b) * finite_hitting_expectation(bm, P01, 0.5, [b]) - target) for b in (4, 16, 64)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.01


def test_inverse_local_time_reduces_to_hit_at_zero(bmcp):
    p = PenalizationProblem((0.0, 1.0), (1.0, 1.0))
    assert inverse_local_time_expectation(bmcp, p, 0.3, 5.0, 0.0) == pytest.approx(
        finite_hitting_expectation(bmcp, p, 0.3, [5.0]))
    assert inverse_local_time_expectation(bmcp, p, 0.3, 5.0, 2.0) < inverse_local_time_expectation(
        bmcp, p, 0.3, 5.0, 1.0)


def test_final_local_time_law_bm(bm):
    # n = 1 at 0, lam = 1, c = 2 started at c: rate n^2[1 - Gamma_{T_2}] = 1/5 for BM
    p = PenalizationProblem((0.0,), (1.0,))
    law = final_local_time_law(bm, p, 2.0, 2.0)
    assert law.atom_at_zero == 0.0
    assert law.exp_rate == pytest.approx(0.2, abs=1e-9)
    assert law.survival(5.0) == pytest.approx(math.exp(-1.0))
    with pytest.raises(DomainError):
        final_local_time_law(bm, p, 0.0, 0.0)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=4, unique=True),
       st.lists(st.floats(0.1, 5), min_size=4, max_size=4), st.floats(-1, 1), st.floats(-5, 5))
def test_phi_positive_random(pts, lams, gamma, x):
    if min(np.diff(sorted(pts))) < 0.05:
        return
    p = PenalizationProblem(tuple(pts), tuple(lams[: len(pts)]), gamma)
    assert phi(evaluator("bm_cp"), p, x) > 0.0
