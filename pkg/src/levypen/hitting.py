"""Hitting probabilities and excursion rates expressed through ``h``."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, SingularSystemError, UnsupportedSizeError
from .linalg import solve_refined
from .resolvent import HFunctionEvaluator

PROB_TOL = 1e-8


class PointSet(tuple):
    """Ordered tuple of distinct reals; the order fixes matrix indices."""

    def __new__(cls, points: Sequence[float]):
        pts = tuple(float(p) for p in points)
        if not pts:
            raise DomainError("a point set needs at least one point")
        if len(set(pts)) != len(pts):
            raise DomainError(f"points must be distinct, got {pts}")
        return super().__new__(cls, pts)

    def without(self, k: int) -> "PointSet":
        return PointSet(self[:k] + self[k + 1:])


@dataclass
class HitOrderVector:
    """``entries[k]`` approximates ``P_x(T_{a_k} = T_A)``."""

    entries: np.ndarray
    residual: float = 0.0
    method: str = "closed"
    flags: list = field(default_factory=list)
    std_errors: np.ndarray | None = None

    def __getitem__(self, k):
        return self.entries[k]

    def __len__(self):
        return len(self.entries)


def hitting_laplace(ev: HFunctionEvaluator, q: float, x: float, a: float) -> float:
    """``P_x[exp(-q T_a)] = r_q(a - x) / r_q(0)``."""
    if x == a:
        return 1.0
    return ev.r(q, a - x) / ev.r(q, 0.0)


def two_point_hit_prob(ev: HFunctionEvaluator, x: float, a: float, b: float) -> float:
    """``P_x(T_a < T_b)``."""
    if a == b:
        raise DomainError("two_point_hit_prob needs a != b")
    if x == a:
        return 1.0
    if x == b:
        return 0.0
    h = ev.h
    return (h(b - a) + h(x - b) - h(x - a)) / ev.h_B(a - b)


def _validate(p, residual):
    flags = []
    if np.any(p < -PROB_TOL) or np.any(p > 1 + PROB_TOL):
        flags.append("hit_probs_out_of_range")
    if abs(p.sum() - 1.0) > PROB_TOL:
        flags.append("hit_probs_sum_not_one")
    if residual > PROB_TOL:
        flags.append("hit_probs_residual")
    return flags


def hit_order_probs(ev: HFunctionEvaluator, x: float, points: Sequence[float],
                    method: str = "auto", mc=None) -> HitOrderVector:
    """Probabilities of each point being the first point of ``points`` hit from ``x``.

    ``method`` is ``"auto"`` (solve, fall back to Monte Carlo if validation
    fails and ``mc`` is given), ``"solve"`` or ``"mc"``.  ``mc`` is an
    :class:`levypen.simulator.MCConfig` used for the Monte Carlo route.
    """
    A = PointSet(points)
    n = len(A)
    x = float(x)
    if method == "mc":
        return _mc_hit_order(ev, x, A, mc)
    if x in A:
        e = np.zeros(n)
        e[A.index(x)] = 1.0
        return HitOrderVector(e, 0.0, "closed")
    if n == 1:
        return HitOrderVector(np.ones(1), 0.0, "closed")
    if n == 2:
        p1 = two_point_hit_prob(ev, x, A[0], A[1])
        return HitOrderVector(np.array([p1, 1.0 - p1]), 0.0, "closed")

    last = A[-1]
    mat = np.eye(n)
    rhs = np.empty(n)
    for k in range(n - 1):
        rhs[k] = two_point_hit_prob(ev, x, A[k], last)
        for i in range(n - 1):
            if i != k:
                mat[k, i] = two_point_hit_prob(ev, A[i], A[k], last)
    mat[n - 1, : n - 1] = 1.0
    rhs[n - 1] = 1.0
    try:
        p, residual, _ = solve_refined(mat, rhs)
    except SingularSystemError:
        if mc is None or method == "solve":
            raise
        out = _mc_hit_order(ev, x, A, mc)
        out.flags.append("singular_system")
        return out
    flags = _validate(p, residual)
    if flags and mc is not None and method == "auto":
        out = _mc_hit_order(ev, x, A, mc)
        out.flags.extend(flags)
        return out
    return HitOrderVector(p, residual, "solve", flags)


def _mc_hit_order(ev, x, A, mc):
    from .simulator import MCConfig, mc_hit_order

    res = mc_hit_order(ev.model, x, A, mc or MCConfig())
    return HitOrderVector(res.mean, 0.0, "mc", ["mc_estimate"] + list(res.flags), res.std_error)


def excursion_rate_one(ev: HFunctionEvaluator, a: float, b: float) -> float:
    """``n^a(T_b < inf) = 1 / h^B(b - a)``."""
    if a == b:
        raise DomainError("excursion_rate_one needs a != b")
    return 1.0 / ev.h_B(b - a)


def excursion_rate_two(ev: HFunctionEvaluator, a: float, b: float, c: float) -> float:
    """``n^a(T_b ^ T_c < inf) = 1 / h^C(b - a, c - a)``."""
    if len({a, b, c}) < 3:
        raise DomainError("excursion_rate_two needs three distinct points")
    return 1.0 / ev.h_C(b - a, c - a)


def excursion_hit_split(ev: HFunctionEvaluator, points: Sequence[float], k: int) -> np.ndarray:
    """Excursion rates ``n^{a_k}(T_{a_i} = T_{A \\ {a_k}} < inf)`` for ``i != k``.

    Entries follow the order of ``A`` with ``a_k`` removed; they sum to the
    total rate of excursions from ``a_k`` reaching the rest of the set.
    """
    A = PointSet(points)
    if len(A) > 3:
        raise UnsupportedSizeError("excursion rates are available for at most three points")
    if len(A) < 2:
        raise DomainError("excursion_hit_split needs at least two points")
    ak = A[k]
    rest = A.without(k)
    if len(rest) == 1:
        total = excursion_rate_one(ev, ak, rest[0])
    else:
        total = excursion_rate_two(ev, ak, rest[0], rest[1])
    return hit_order_probs(ev, ak, rest).entries * total
