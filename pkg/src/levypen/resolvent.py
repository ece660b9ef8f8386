"""Resolvent density and the renormalized zero resolvent ``h``.

For a symmetric model the Fourier inversions reduce to cosine transforms::

    r_q(x) = (1/pi) int_0^inf cos(lam x) / (q + Psi(lam)) dlam
    h(x)   = (1/pi) int_0^inf (1 - cos(lam x)) / Psi(lam) dlam
           = lim_{q -> 0+} (r_q(0) - r_q(x))

``h`` is computed from the direct integral; the ``q``-limit (evaluated as a
single integral of ``(1 - cos)/(q + Psi)`` and Richardson-extrapolated) is
kept as an independent route for cross-checks.
"""
from __future__ import annotations

import math
import threading

import numpy as np

from .errors import DomainError
from .models import LevyModel
from .quadrature import (QuadratureConfig, adaptive_panels, cos_tail_integral,
                         positive_half_line_integral, richardson, _log_tail)


def _one_minus_cos(lam, x):
    s = np.sin(0.5 * lam * x)
    return 2.0 * s * s


def _cos_transform(g, growth, x, cfg):
    """``int_0^inf g(lam) cos(lam x) dlam`` for positive decreasing ``g``."""
    if x == 0.0:
        val, err, _ = positive_half_line_integral(g, growth, cfg, split=1.0)
        return val, err
    z0 = 0.5 * math.pi / abs(x)
    head, herr = adaptive_panels(lambda lam: g(lam) * np.cos(lam * x), [0.0, z0],
                                 0.25 * cfg.abs_tol, cfg.panel_budget, cfg.rel_tol * 1e-2)
    tail, terr = cos_tail_integral(g, x, 0, cfg)
    return float(head.sum() + tail), float(herr.sum() + terr)


def _one_minus_cos_transform(g, growth, x, cfg):
    """``int_0^inf g(lam) (1 - cos(lam x)) dlam``; ``g`` may blow up at 0."""
    if x == 0.0:
        return 0.0, 0.0
    z0 = 0.5 * math.pi / abs(x)
    head, herr = adaptive_panels(lambda lam: g(lam) * _one_minus_cos(lam, x), [0.0, z0],
                                 0.25 * cfg.abs_tol, cfg.panel_budget, cfg.rel_tol * 1e-2)
    flat, ferr, bound = _log_tail(g, growth, cfg, z0)
    osc, oerr = cos_tail_integral(g, x, 0, cfg)
    return float(head.sum() + flat - osc), float(herr.sum() + ferr + bound + oerr)


def resolvent_density(model: LevyModel, q: float, x: float, quad: QuadratureConfig | None = None) -> float:
    """``r_q(x)``, the density of the ``q``-resolvent of ``model`` started at 0."""
    if not q > 0:
        raise DomainError(f"q must be positive, got {q}")
    cfg = quad or QuadratureConfig()
    val, _ = _cos_transform(lambda lam: 1.0 / (q + model.exponent(lam)), model.growth, float(x), cfg)
    return val / math.pi


H_SMALL_X = 1e-8


def _key(v) -> float:
    """Memo key: ``v`` rounded to 12 significant digits."""
    return float(f"{float(v):.12g}")


class HFunctionEvaluator:
    """Memoised evaluator of ``r_q``, ``h``, ``h^(gamma)``, ``h^B`` and ``h^C``.

    The memo table is keyed by arguments rounded to 12 significant digits and guarded
    by a lock, so one instance may be shared between threads.
    """

    def __init__(self, model: LevyModel, quad: QuadratureConfig | None = None,
                 richardson_q0: float | None = None, richardson_levels: int = 6):
        self.model = model
        self.quad = quad or QuadratureConfig()
        if richardson_q0 is None:
            richardson_q0 = 1e-4 if model.small_q_exponents[0] < 1.0 else 1e-6
        self.richardson_q0 = richardson_q0
        self.richardson_levels = richardson_levels
        self._cache: dict = {}
        self._lock = threading.Lock()

    def _memo(self, key, fn):
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        val = fn()
        with self._lock:
            self._cache.setdefault(key, val)
        return val

    @property
    def second_moment(self) -> float:
        return self.model.second_moment

    def r(self, q: float, x: float) -> float:
        """Resolvent density ``r_q(x)``."""
        key = ("r", _key(q), _key(abs(float(x))))
        return self._memo(key, lambda: resolvent_density(self.model, q, abs(float(x)), self.quad))

    def resolvent_gap(self, q: float, x: float) -> float:
        """``r_q(0) - r_q(x)`` evaluated as one integral (no cancellation)."""
        x = abs(float(x))
        if x == 0.0:
            return 0.0
        key = ("gap", _key(q), _key(x))

        def compute():
            val, _ = _one_minus_cos_transform(lambda lam: 1.0 / (q + self.model.exponent(lam)),
                                              self.model.growth, x, self.quad)
            return val / math.pi
        return self._memo(key, compute)

    def h(self, x: float) -> float:
        """Renormalized zero resolvent ``h(x)`` (direct integral); ``h(0) = 0``."""
        x = abs(float(x))  # symmetric models: h is even
        if x == 0.0:
            return 0.0
        if x < H_SMALL_X:
            # below this the integrand oscillates too slowly to resolve; use
            # the high-frequency power law of the exponent instead
            _, p = self.model.growth
            return self.h(H_SMALL_X) * (x / H_SMALL_X) ** (p - 1.0)
        key = ("h", _key(x))

        def compute():
            with np.errstate(divide="ignore", invalid="ignore"):
                val, _ = _one_minus_cos_transform(lambda lam: 1.0 / self.model.exponent(lam),
                                                  self.model.growth, x, self.quad)
            return max(val / math.pi, 0.0)
        return self._memo(key, compute)

    def h_vec(self, x) -> np.ndarray:
        """``h`` on an array, for bulk evaluation at simulated positions.

        Homogeneous exponents (``bm``, ``stable``) use ``h(x) = h(1) |x|^(p-1)``.
        Otherwise ``h`` is interpolated on Chebyshev panels ``[0,1], [1,2],
        [2,4], ...`` built lazily from the direct integral.
        """
        ax = np.abs(np.asarray(x, dtype=float))
        if self.model.kind in ("bm", "stable"):
            _, p = self.model.growth
            return self.h(1.0) * ax ** (p - 1.0)
        out = np.empty_like(ax)
        if ax.size == 0:
            return out
        top = float(ax.max())
        with self._lock:
            panels = self._cache.setdefault("panels", [])
        while not panels or panels[-1][1] < top:
            lo = panels[-1][1] if panels else 0.0
            hi = 1.0 if lo == 0.0 else 2.0 * lo
            vals = np.vectorize(self.h)
            panels.append((lo, hi, np.polynomial.Chebyshev.interpolate(vals, 40, domain=[lo, hi])))
        for lo, hi, poly in panels:
            m = (ax >= lo) & (ax <= hi)
            out[m] = poly(ax[m])
        return out

    def h_richardson(self, x: float) -> tuple[float, float]:
        """``h(x)`` as the extrapolated limit of ``r_q(0) - r_q(x)``.

        Returns ``(value, error_estimate)``.
        """
        x = abs(float(x))
        if x == 0.0:
            return 0.0, 0.0
        qs = [self.richardson_q0 / 2.0**j for j in range(self.richardson_levels)]
        vals = [self.resolvent_gap(q, x) for q in qs]
        return richardson(vals, self.model.small_q_exponents)

    def h_gamma(self, gamma: float, x: float) -> float:
        """``h(x) + gamma x / E[X_1^2]``; equals ``h`` when the second moment is infinite."""
        if abs(gamma) > 1.0:
            raise DomainError(f"gamma must lie in [-1, 1], got {gamma}")
        m2 = self.second_moment
        hx = self.h(x)
        if math.isinf(m2):
            return hx
        return hx + gamma * float(x) / m2

    def h_B(self, x: float) -> float:
        """Symmetrised ``h(x) + h(-x)``."""
        return self.h(x) + self.h(-x)

    def h_C(self, x: float, y: float) -> float:
        """Two-point functional whose reciprocal is the excursion rate of hitting ``{x, y}``."""
        if x == y:
            raise DomainError("h_C requires distinct arguments")
        h = self.h
        num = ((h(y) + h(-x)) * h(x - y) + (h(x) + h(-y)) * h(y - x)
               + (h(x) - h(y)) * (h(-y) - h(-x)) - h(x - y) * h(y - x))
        return num / self.h_B(x - y)


def h(evaluator: HFunctionEvaluator, x: float) -> float:
    return evaluator.h(x)


def h_gamma(evaluator: HFunctionEvaluator, gamma: float, x: float) -> float:
    return evaluator.h_gamma(gamma, x)


def h_B(evaluator: HFunctionEvaluator, x: float) -> float:
    return evaluator.h_B(x)


def h_C(evaluator: HFunctionEvaluator, x: float, y: float) -> float:
    return evaluator.h_C(x, y)
