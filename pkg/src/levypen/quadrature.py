"""Quadrature on the half line for slowly decaying, possibly oscillatory integrands.

Three building blocks are provided:

* :func:`adaptive_panels` -- vectorised adaptive Gauss-Legendre on a set of
  panels (15/31 point pair, bisection of rejected intervals);
* :func:`positive_half_line_integral` -- non-oscillatory integrals over
  ``(0, inf)`` using a logarithmic substitution on the tail and an analytic
  remainder bound from a power-law lower bound on the exponent;
* :func:`cos_tail_integral` -- ``int_{z}^{inf} g(lam) cos(lam x) dlam``
  split at the zeros of the cosine, panel sums accelerated with Wynn's
  epsilon algorithm.

:func:`richardson` extrapolates a sequence ``f(q0 / 2^j)`` with known powers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import QuadratureError

_XL, _WL = np.polynomial.legendre.leggauss(15)
_XH, _WH = np.polynomial.legendre.leggauss(31)


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and budget for the half-line integrators.

    ``lambda_max`` caps the frequency range explicitly integrated; ``None``
    lets the tail bound choose it.  ``panel_budget`` bounds the number of
    interval evaluations of a single integral.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    lambda_max: float | None = None
    panel_budget: int = 20000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("abs_tol and rel_tol must be positive")
        if self.panel_budget < 1:
            raise ValueError("panel_budget must be at least 1")


def adaptive_panels(f: Callable, edges, tol: float, budget: int = 20000, rel_tol: float = 0.0):
    """Integrate ``f`` over each panel ``[edges[i], edges[i+1]]``.

    Returns ``(values, errors)`` with one entry per panel.  ``f`` must accept
    and return arrays of any shape.  Each panel starts with absolute tolerance
    ``tol``; a rejected interval is bisected with tolerance ``tol/sqrt(2)``.
    """
    edges = np.asarray(edges, dtype=float)
    npan = edges.size - 1
    vals = np.zeros(npan)
    errs = np.zeros(npan)
    a = edges[:-1].copy()
    b = edges[1:].copy()
    t = np.full(npan, float(tol))
    parent = np.arange(npan)
    used = 0
    while a.size:
        used += a.size
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        lo = (half[:, None] * _WL[None, :] * f(mid[:, None] + half[:, None] * _XL[None, :])).sum(1)
        hi = (half[:, None] * _WH[None, :] * f(mid[:, None] + half[:, None] * _XH[None, :])).sum(1)
        err = np.abs(hi - lo)
        tiny = half <= 1e-14 * np.maximum(1.0, np.abs(mid))
        ok = (err <= np.maximum(t, rel_tol * np.abs(hi))) | tiny
        np.add.at(vals, parent[ok], hi[ok])
        np.add.at(errs, parent[ok], err[ok])
        bad = ~ok
        if not bad.any():
            break
        if used + 2 * int(bad.sum()) > budget:
            np.add.at(vals, parent[bad], hi[bad])
            np.add.at(errs, parent[bad], err[bad])
            raise QuadratureError("adaptive quadrature exhausted its panel budget",
                                  float(vals.sum()), float(errs.sum()))
        a, b, t, parent = (np.concatenate([a[bad], mid[bad]]),
                           np.concatenate([mid[bad], b[bad]]),
                           np.tile(t[bad] / math.sqrt(2.0), 2),
                           np.tile(parent[bad], 2))
    return vals, errs


def _tail_cutoff(growth, tol):
    k, p = growth
    # int_L^inf dlam / (k lam^p) = L^(1-p) / (k (p-1)) <= tol
    return (k * (p - 1.0) * tol) ** (1.0 / (1.0 - p))


def positive_half_line_integral(g: Callable, growth, cfg: QuadratureConfig, split: float = 1.0):
    """``int_0^inf g(lam) dlam`` for ``0 <= g(lam) <= 1/(k lam^p)`` at large ``lam``.

    Returns ``(value, error_estimate, tail_bound)``.
    """
    head, herr = adaptive_panels(g, [0.0, split], 0.25 * cfg.abs_tol, cfg.panel_budget,
                                 cfg.rel_tol * 1e-2)
    tail, terr, bound = _log_tail(g, growth, cfg, split)
    return float(head.sum() + tail), float(herr.sum() + terr + bound), bound


def _log_tail(g, growth, cfg, start):
    """``int_start^inf g`` via ``lam = start * exp(s)`` plus the analytic remainder bound."""
    tol = 0.01 * cfg.abs_tol
    lmax = _tail_cutoff(growth, tol)
    if cfg.lambda_max is not None:
        lmax = min(lmax, cfg.lambda_max)
    smax = max(1.0, math.log(max(lmax, start * math.e) / start))
    npan = int(math.ceil(smax))
    edges = np.linspace(0.0, smax, npan + 1)
    vals, errs = adaptive_panels(lambda s: g(start * np.exp(s)) * start * np.exp(s), edges,
                                 0.25 * cfg.abs_tol / npan, cfg.panel_budget, cfg.rel_tol * 1e-2)
    k, p = growth
    bound = (start * math.exp(smax)) ** (1.0 - p) / (k * (p - 1.0))
    return float(vals.sum()), float(errs.sum()), bound


def wynn_epsilon(partial_sums: Sequence[float]):
    """Accelerate a sequence of partial sums with Wynn's epsilon algorithm.

    Returns ``(estimate, error_estimate)``; the error is the gap between the
    two most accurate even-column entries.
    """
    s = np.asarray(partial_sums, dtype=float)
    prev = np.zeros(s.size + 1)
    cur = s.copy()
    best = [cur[-1]]
    k = 0
    while cur.size > 1:
        diff = cur[1:] - cur[:-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            nxt = prev[1:cur.size] + 1.0 / diff
        if not np.all(np.isfinite(nxt)):
            break
        prev, cur = cur, nxt
        k += 1
        if k % 2 == 0:
            best.append(cur[-1])
    if len(best) == 1:
        return float(s[-1]), float(abs(s[-1] - s[-2])) if s.size > 1 else math.inf
    est = best[-1]
    return float(est), float(abs(best[-1] - best[-2]))


def cos_tail_integral(g: Callable, x: float, first_zero: int, cfg: QuadratureConfig,
                      min_panels: int = 48):
    """``int_{z}^{inf} g(lam) cos(lam x) dlam`` with ``z = (first_zero + 1/2) pi / |x|``.

    ``g`` must be positive and decreasing beyond ``z`` so that the panel
    contributions alternate in sign.  Returns ``(value, error_estimate)``.
    """
    w = math.pi / abs(x)
    z0 = (first_zero + 0.5) * w
    npan = min_panels
    budget = cfg.panel_budget
    last = None
    while True:
        edges = z0 + w * np.arange(npan + 1)
        vals, errs = adaptive_panels(lambda lam: g(lam) * np.cos(lam * x), edges,
                                     0.01 * cfg.abs_tol, budget, 0.0)
        sums = np.cumsum(vals)
        if abs(vals[-1]) <= 1e-3 * cfg.abs_tol:
            return float(sums[-1]), float(errs.sum() + abs(vals[-1]))
        est, err = wynn_epsilon(sums[-min(40, npan):])
        err += float(errs.sum())
        if last is not None:
            err = max(err, abs(est - last))
        if err <= max(cfg.abs_tol, cfg.rel_tol * abs(est)) * 0.5:
            return est, err
        if 2 * npan * 4 > budget:
            raise QuadratureError("oscillatory tail did not converge", est, err)
        last = est
        npan *= 2


def richardson(values: Sequence[float], exponents: Sequence[float], ratio: float = 2.0):
    """Generalised Richardson extrapolation of ``f(q_j)``, ``q_j = q_0 / ratio^j``.

    ``values[j] = f(q_j)`` with ``f(q) = L + sum_m c_m q^{p_m} + ...`` and the
    powers ``p_m`` taken from ``exponents`` in order.  Returns
    ``(estimate, error_estimate)``.
    """
    row = [float(v) for v in values]
    estimates = [row[-1]]
    for p in exponents:
        if len(row) < 2:
            break
        fac = ratio**p
        row = [(fac * row[j + 1] - row[j]) / (fac - 1.0) for j in range(len(row) - 1)]
        estimates.append(row[-1])
    err = abs(estimates[-1] - estimates[-2]) if len(estimates) > 1 else math.inf
    return estimates[-1], err
