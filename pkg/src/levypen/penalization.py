"""Multi-point local-time penalization: J-matrix, I-vectors and ``phi``.

For points ``a_1..a_n`` with weights ``lam_k`` the weight process is
``Gamma_t = exp(-sum_k lam_k L_t^{a_k})`` and the martingale density is
``phi(X_t) Gamma_t / phi(x)`` with

    phi(x) = h^g(x - a_n) - sum_{k<n} h^g(a_k - a_n) P_x(T_{a_k} = T_A)
             + <p(x), (E - J)^{-1} i>.

All quantities are reduced to evaluations of ``h`` and small dense solves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConsistencyError, DomainError, SingularSystemError, UnsupportedSizeError
from .hitting import PointSet, excursion_hit_split, hit_order_probs, two_point_hit_prob
from .linalg import solve_refined
from .resolvent import HFunctionEvaluator

VALIDATION_TOL = 1e-8


@dataclass(frozen=True)
class PenalizationProblem:
    """Points, positive weights and the asymmetry parameter ``gamma``.

    ``gamma`` only matters when the model has a finite second moment; it is
    kept (but inert) otherwise.
    """

    points: tuple
    weights: tuple
    gamma: float = 0.0

    def __post_init__(self):
        pts = PointSet(self.points)
        w = tuple(float(v) for v in self.weights)
        if len(w) != len(pts):
            raise DomainError(f"{len(pts)} points but {len(w)} weights")
        if not all(v > 0.0 and math.isfinite(v) for v in w):
            raise DomainError(f"weights must be positive and finite, got {w}")
        g = float(self.gamma)
        if not abs(g) <= 1.0:
            raise DomainError(f"gamma must lie in [-1, 1], got {g}")
        object.__setattr__(self, "points", tuple(pts))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "gamma", g)

    @property
    def n(self) -> int:
        return len(self.points)

    def with_gamma(self, gamma: float) -> "PenalizationProblem":
        return PenalizationProblem(self.points, self.weights, gamma)

    def first(self) -> "PenalizationProblem":
        """The one-point problem built from ``a_1`` alone."""
        return PenalizationProblem(self.points[:1], self.weights[:1], self.gamma)


@dataclass
class PenalizationSolution:
    J: np.ndarray
    I_gamma: np.ndarray
    a_vec: np.ndarray
    condition_number: float
    residual: float = 0.0
    flags: list = field(default_factory=list)


@dataclass(frozen=True)
class FinalLocalTimeLaw:
    """Law ``atom * delta_0 + (1 - atom) * Exp(exp_rate)``."""

    atom_at_zero: float
    exp_rate: float

    @property
    def mixture_weight(self) -> float:
        return 1.0 - self.atom_at_zero

    def survival(self, t):
        """``Q(L > t)`` for ``t >= 0``."""
        return self.mixture_weight * np.exp(-self.exp_rate * np.asarray(t, dtype=float))


# ----------------------------------------------------------------------------
# J and I

def _j_row(ev: HFunctionEvaluator, pts: Sequence[float], k: int, lam: float, mc=None):
    """Row ``k`` of the J-matrix of the point list ``pts`` with weight ``lam``.

    Returns ``(row, residual, flags)``; ``row[k] = 0``.
    """
    n = len(pts)
    ak = pts[k]
    others = [i for i in range(n) if i != k]
    h = ev.h
    row = np.zeros(n)
    denom = {i: 1.0 + lam * ev.h_B(pts[i] - ak) for i in others}
    if n == 2:
        i = others[0]
        row[i] = 1.0 / denom[i]
        return row, 0.0, []
    c = np.array([1.0 / denom[i] for i in others])
    C = np.zeros((n - 1, n - 1))
    for r, i in enumerate(others):
        for s, j in enumerate(others):
            if i != j:
                C[r, s] = (1.0 + lam * (h(ak - pts[i]) + h(pts[j] - ak) - h(pts[j] - pts[i]))) / denom[i]
    flags = []
    try:
        j_k, residual, _ = solve_refined(np.eye(n - 1) + C, c)
    except SingularSystemError:
        if mc is None:
            raise
        j_k, residual, flags = _mc_j_row(ev, pts, k, lam, mc), math.nan, ["J_singular_system"]
    else:
        if np.any(j_k < -VALIDATION_TOL) or np.any(j_k >= 1.0) or j_k.sum() >= 1.0 or residual > VALIDATION_TOL:
            flags.append("J_validation_failed")
            if mc is not None:
                j_k = _mc_j_row(ev, pts, k, lam, mc)
                flags.append("J_mc_fallback")
    row[others] = j_k
    return row, residual, flags


def _mc_j_row(ev, pts, k, lam, mc):
    from .simulator import mc_j_row

    est = mc_j_row(ev.model, pts, k, lam, mc)
    return np.delete(est.mean, k)


def J_matrix(ev: HFunctionEvaluator, problem: PenalizationProblem, mc=None) -> np.ndarray:
    """J-matrix ``J_{k,i} = P_{a_k}[exp(-lam_k L^{a_k}_{T_{a_i}}); T_{a_i} = T_{A minus a_k}]``."""
    return _j_full(ev, problem, mc)[0]


def _j_full(ev, problem, mc=None):
    n = problem.n
    if n < 2:
        return np.zeros((n, n)), 0.0, []
    J = np.zeros((n, n))
    residual, flags = 0.0, []
    for k in range(n):
        J[k], res, fl = _j_row(ev, problem.points, k, problem.weights[k], mc)
        residual = max(residual, res) if not math.isnan(res) else residual
        flags += [f"{f}[row {k}]" for f in fl]
    return J, residual, flags


def I_vector(ev: HFunctionEvaluator, problem: PenalizationProblem, J=None) -> np.ndarray:
    """``I_k = 1/lam_k - sum_{i != k} J_{k,i} (1/lam_k + h^g(a_i - a_k))``."""
    if J is None:
        J = J_matrix(ev, problem)
    pts, lam, g = problem.points, problem.weights, problem.gamma
    out = np.empty(problem.n)
    for k in range(problem.n):
        s = 0.0
        for i in range(problem.n):
            if i != k:
                s += J[k, i] * (1.0 / lam[k] + ev.h_gamma(g, pts[i] - pts[k]))
        out[k] = 1.0 / lam[k] - s
    return out


def I_vector_zero_excursion(ev: HFunctionEvaluator, problem: PenalizationProblem) -> np.ndarray:
    """``I_k`` at ``gamma = 0`` from excursion rates away from ``a_k``.

    ``I_k = (1 - sum_i h(a_i - a_k) n_i) / (R_k + lam_k)`` where ``n_i`` is
    the rate of excursions from ``a_k`` first reaching ``a_i`` and ``R_k``
    their sum.  Available for ``n <= 3``.
    """
    n = problem.n
    if n > 3:
        raise UnsupportedSizeError("excursion-rate form needs n <= 3")
    pts, lam = problem.points, problem.weights
    if n == 1:
        return np.array([1.0 / lam[0]])
    out = np.empty(n)
    for k in range(n):
        split = excursion_hit_split(ev, pts, k)
        rest = [pts[i] for i in range(n) if i != k]
        s = sum(ev.h(ai - pts[k]) * ni for ai, ni in zip(rest, split))
        out[k] = (1.0 - s) / (split.sum() + lam[k])
    return out


def solve(ev: HFunctionEvaluator, problem: PenalizationProblem, mc=None) -> PenalizationSolution:
    """Compute J, the I-vector and ``a = (E - J)^{-1} I`` with diagnostics."""
    n = problem.n
    if n == 1:
        lam = problem.weights[0]
        return PenalizationSolution(np.zeros((1, 1)), np.array([1.0 / lam]), np.array([1.0 / lam]), 1.0)
    J, residual, flags = _j_full(ev, problem, mc)
    if np.any(J.sum(axis=1) >= 1.0):
        flags.append("J_row_sum_not_below_one")
    I = I_vector(ev, problem, J)
    if np.any(I < -VALIDATION_TOL):
        flags.append("I_negative")
    a_vec, res2, cond = solve_refined(np.eye(n) - J, I)
    return PenalizationSolution(J, I, a_vec, cond, max(residual, res2), flags)


# ----------------------------------------------------------------------------
# phi

class PhiFunction:
    """``phi`` for one problem, with the linear algebra done once.

    ``phi`` is affine in the vector ``(h(x - a_1), ..., h(x - a_n))`` and in
    ``x``, so bulk evaluation (:meth:`values`) only needs ``h`` on arrays.
    """

    def __init__(self, ev: HFunctionEvaluator, problem: PenalizationProblem, mc=None):
        self.ev = ev
        self.problem = problem
        self.solution = solve(ev, problem, mc)
        pts = problem.points
        n = problem.n
        m2 = ev.second_moment
        self._slope = 0.0 if math.isinf(m2) else problem.gamma / m2
        self._hg_to_last = np.array([ev.h_gamma(problem.gamma, a - pts[-1]) for a in pts])
        if n >= 3:
            last = pts[-1]
            M = np.eye(n)
            for k in range(n - 1):
                for i in range(n - 1):
                    if i != k:
                        M[k, i] = two_point_hit_prob(ev, pts[i], pts[k], last)
            M[n - 1, : n - 1] = 1.0
            self._Minv = np.linalg.inv(M)
            self._hB_last = np.array([ev.h_B(a - last) for a in pts[:-1]])
            self._h_last = np.array([ev.h(last - a) for a in pts[:-1]])

    def hit_probs(self, x) -> np.ndarray:
        """Hitting-order probabilities for an array of starting points (rows)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        pts = self.problem.points
        n = self.problem.n
        if n == 1:
            return np.ones((x.size, 1))
        H = np.stack([self.ev.h_vec(x - a) for a in pts], axis=1)
        if n == 2:
            hB = self.ev.h_B(pts[0] - pts[1])
            p1 = (self.ev.h(pts[1] - pts[0]) + H[:, 1] - H[:, 0]) / hB
            return np.stack([p1, 1.0 - p1], axis=1)
        rhs = np.ones((x.size, n))
        rhs[:, :-1] = (self._h_last[None, :] + H[:, -1:] - H[:, :-1]) / self._hB_last[None, :]
        p = rhs @ self._Minv.T
        for k, a in enumerate(pts):
            hit = x == a
            if hit.any():
                p[hit] = 0.0
                p[hit, k] = 1.0
        return p

    def base_values(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        pts = self.problem.points
        p = self.hit_probs(x)
        hg = self.ev.h_vec(x - pts[-1]) + self._slope * (x - pts[-1])
        return hg - p[:, :-1] @ self._hg_to_last[:-1]

    def values(self, x) -> np.ndarray:
        """``phi`` on an array (no positivity check)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.problem.n == 1:
            a = self.problem.points[0]
            return self.ev.h_vec(x - a) + self._slope * (x - a) + 1.0 / self.problem.weights[0]
        return self.base_values(x) + self.hit_probs(x) @ self.solution.a_vec

    def __call__(self, x: float) -> float:
        val = phi(self.ev, self.problem, x, _solution=self.solution)
        return val


def phi_base(ev: HFunctionEvaluator, problem: PenalizationProblem, x: float) -> float:
    """``h^g(x - a_n) - sum_{k<n} h^g(a_k - a_n) P_x(T_{a_k} = T_A)``."""
    pts, g = problem.points, problem.gamma
    p = hit_order_probs(ev, x, pts, method="solve").entries
    val = ev.h_gamma(g, x - pts[-1])
    for k in range(problem.n - 1):
        val -= ev.h_gamma(g, pts[k] - pts[-1]) * p[k]
    return float(val)


def phi(ev: HFunctionEvaluator, problem: PenalizationProblem, x: float, _solution=None) -> float:
    """The martingale function ``phi(x)``; strictly positive.

    Raises :class:`ConsistencyError` if the computed value is not positive.
    """
    if problem.n == 1:
        val = ev.h_gamma(problem.gamma, x - problem.points[0]) + 1.0 / problem.weights[0]
    else:
        sol = _solution or solve(ev, problem)
        p = hit_order_probs(ev, x, problem.points, method="solve").entries
        val = phi_base(ev, problem, x) + float(p @ sol.a_vec)
    if not val > 0.0:
        raise ConsistencyError(f"phi({x}) = {val} is not positive")
    return float(val)


def phi_two_point_closed(ev: HFunctionEvaluator, problem: PenalizationProblem, x: float) -> float:
    """Explicit two-point ``phi`` (no linear solve)."""
    if problem.n != 2:
        raise DomainError("phi_two_point_closed needs exactly two points")
    (a1, a2), (l1, l2), g = problem.points, problem.weights, problem.gamma
    D = l1 + l2 + l1 * l2 * ev.h_B(a1 - a2)
    p1 = two_point_hit_prob(ev, x, a1, a2)
    p2 = two_point_hit_prob(ev, x, a2, a1)
    return float(phi_base(ev, problem, x)
                 + p1 * (1.0 + l2 * ev.h_gamma(g, a1 - a2)) / D
                 + p2 * (1.0 + l1 * ev.h_gamma(g, a2 - a1)) / D)


def martingale_density(ev: HFunctionEvaluator, problem: PenalizationProblem, x0: float,
                       x_t: float, local_times) -> float:
    """``phi(X_t) Gamma_t / phi(x0)``."""
    L = np.asarray(local_times, dtype=float)
    if L.shape != (problem.n,) or np.any(L < 0):
        raise DomainError("local_times must be a non-negative vector with one entry per point")
    gam = math.exp(-float(np.dot(problem.weights, L)))
    sol = solve(ev, problem) if problem.n > 1 else None
    return phi(ev, problem, x_t, _solution=sol) * gam / phi(ev, problem, x0, _solution=sol)


# ----------------------------------------------------------------------------
# finite clocks and the penalized measure

def finite_hitting_expectation(ev: HFunctionEvaluator, problem: PenalizationProblem, x: float,
                               targets: Sequence[float]) -> float:
    """``P_x[Gamma_{T_B}]`` for a finite target set ``B`` disjoint from the points.

    From each ``a_k`` the path collects local time at ``a_k`` until it reaches
    another point of ``A`` or ``B``; the J-rows of the augmented set therefore
    give ``v = (E - J^B)^{-1} i^B`` with ``v_k = P_{a_k}[Gamma_{T_B}]``.
    """
    pts = list(problem.points)
    B = [float(b) for b in targets]
    if set(B) & set(pts):
        raise DomainError("targets must not contain penalized points")
    allp = pts + B
    PointSet(allp)
    n = problem.n
    if float(x) in B:
        return 1.0
    rows = np.array([_j_row(ev, allp, k, problem.weights[k])[0] for k in range(n)])
    v, _, _ = solve_refined(np.eye(n) - rows[:, :n], rows[:, n:].sum(axis=1))
    p = hit_order_probs(ev, x, allp, method="solve").entries
    return float(p[:n] @ v + p[n:].sum())


def _return_rate(ev, problem, c):
    """``n^c[1 - Gamma_{T_c}]`` for ``c`` outside the point set (``n <= 2``)."""
    if problem.n > 2:
        raise UnsupportedSizeError("excursion decomposition needs n <= 2")
    split = excursion_hit_split(ev, (c,) + tuple(problem.points), 0)
    back = np.array([finite_hitting_expectation(ev, problem, a, [c]) for a in problem.points])
    return float(split @ (1.0 - back))


def inverse_local_time_expectation(ev: HFunctionEvaluator, problem: PenalizationProblem, x: float,
                                   b: float, u: float) -> float:
    """``P_x[Gamma_{eta_u^b}] = P_x[Gamma_{T_b}] exp(-u n^b[1 - Gamma_{T_b}])`` (``n <= 2``)."""
    if u < 0:
        raise DomainError("u must be non-negative")
    return finite_hitting_expectation(ev, problem, x, [b]) * math.exp(-u * _return_rate(ev, problem, b))


def final_local_time_law(ev: HFunctionEvaluator, problem: PenalizationProblem, x: float,
                         c: float) -> FinalLocalTimeLaw:
    """Law of the total local time at ``c`` under the penalized measure from ``x``.

    ``c`` must not be one of the penalized points: there the excursion rate
    alone does not account for the killing at ``c`` itself, so the reading of
    the formula is ambiguous and the call is refused.
    """
    if float(c) in problem.points:
        raise DomainError("final_local_time_law refuses c in the point set (ambiguous rate)")
    f = PhiFunction(ev, problem)
    ratio = f.values([c])[0] / f.values([x])[0]
    atom = 0.0 if float(x) == float(c) else 1.0 - ratio * finite_hitting_expectation(ev, problem, x, [c])
    return FinalLocalTimeLaw(float(min(max(atom, 0.0), 1.0)), _return_rate(ev, problem, c))


@dataclass
class ConsistencyReport:
    lhs: float
    rhs: float
    std_error: float
    ratio: float
    passed: bool


def unweighted_consistency(ev: HFunctionEvaluator, problem: PenalizationProblem, x: float,
                           mc) -> ConsistencyReport:
    """Compare ``phi_A(x)`` with ``phi_{a_1}(x) Q^1_x[exp(-sum_{k>=2} lam_k L_inf^{a_k})]``.

    ``mc`` is an estimate of the expectation under the one-point penalized
    measure (see :func:`levypen.simulator.unweighted_q_expectation`).
    """
    lhs = PhiFunction(ev, problem).values([x])[0]
    one = phi(ev, problem.first(), x)
    rhs = one * mc.mean
    se = one * mc.std_error
    return ConsistencyReport(float(lhs), float(rhs), float(se), float(rhs / lhs),
                             bool(abs(lhs - rhs) <= 3.0 * se + 1e-12))
