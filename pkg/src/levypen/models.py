"""Catalog of symmetric recurrent Lévy processes.

Every model is described by its characteristic exponent ``Psi`` with
``E_0[exp(i lam X_t)] = exp(-t Psi(lam))``.  Only models for which
recurrence and integrability of ``1/(q + Psi)`` are known a priori are
accepted; user supplied exponents are not.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .errors import ModelError

KINDS = ("bm", "stable", "bm_cp")


@dataclass(frozen=True)
class LevyModel:
    """Immutable description of a catalog process.

    ``kind`` is one of ``"bm"`` (Brownian motion with volatility ``sigma``),
    ``"stable"`` (symmetric stable, ``Psi = c |lam|^alpha``) or ``"bm_cp"``
    (Brownian motion plus compound Poisson jumps arriving at ``jump_rate``
    with two-sided exponential sizes of density ``(b/2) exp(-b |y|)``,
    ``b = jump_decay``).
    """

    kind: str
    sigma: float = 0.0
    alpha: float = 2.0
    c: float = 0.5
    jump_rate: float = 0.0
    jump_decay: float = 1.0

    @property
    def symmetric(self) -> bool:
        return True

    @property
    def second_moment(self) -> float:
        """``E_0[X_1^2]``, possibly ``inf``."""
        if self.kind == "bm":
            return self.sigma**2
        if self.kind == "stable":
            return 2.0 * self.c if self.alpha == 2.0 else math.inf
        return self.sigma**2 + 2.0 * self.jump_rate / self.jump_decay**2

    @property
    def growth(self) -> tuple[float, float]:
        """``(k, p)`` with ``Psi(lam) >= k |lam|^p`` for every ``lam``."""
        if self.kind == "stable":
            return self.c, self.alpha
        return 0.5 * self.sigma**2, 2.0

    @property
    def small_q_exponents(self) -> tuple[float, ...]:
        """Leading powers of ``q`` in ``r_q(0) - r_q(x) - h(x)`` as ``q -> 0``.

        A power listed twice marks a ``q^p log q`` term (coincident powers);
        eliminating ``p`` twice removes both.
        """
        if self.kind == "stable" and self.alpha < 2.0:
            a = self.alpha
            powers = [1.0, 2.0, round(3.0 / a - 1.0, 12), round(5.0 / a - 1.0, 12)]
            return tuple(sorted(p for p in powers if p <= 3.0))
        return (0.5, 1.0, 1.5, 2.0, 2.5)

    def exponent(self, lam):
        """Real characteristic exponent evaluated elementwise (symmetric models)."""
        lam = np.asarray(lam, dtype=float)
        if self.kind == "bm":
            return 0.5 * self.sigma**2 * lam * lam
        if self.kind == "stable":
            return self.c * np.abs(lam) ** self.alpha
        b2 = self.jump_decay**2
        lam2 = lam * lam
        # r (1 - b^2/(b^2+lam^2)) written without cancellation
        return 0.5 * self.sigma**2 * lam2 + self.jump_rate * lam2 / (b2 + lam2)

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "bm":
            return {"kind": "bm", "sigma": self.sigma}
        if self.kind == "stable":
            return {"kind": "stable", "alpha": self.alpha, "c": self.c}
        return {"kind": "bm_cp", "sigma": self.sigma, "rate": self.jump_rate,
                "jump_decay": self.jump_decay}


def make_model(spec: Mapping[str, Any] | None = None, **params) -> LevyModel:
    """Build and validate a catalog model.

    Accepts either a mapping such as ``{"kind": "stable", "alpha": 1.5, "c": 1}``
    or keyword arguments.  Raises :class:`ModelError` for parameters that
    would make the process transient or the exponent degenerate.
    """
    p = dict(spec or {})
    p.update(params)
    kind = p.pop("kind", None)
    if kind not in KINDS:
        raise ModelError(f"unknown model kind {kind!r}; expected one of {KINDS}")

    def positive(name, default=None):
        val = p.pop(name, default)
        if val is None:
            raise ModelError(f"{kind}: missing parameter {name!r}")
        val = float(val)
        if not (val > 0.0 and math.isfinite(val)):
            raise ModelError(f"{kind}: {name} must be positive and finite, got {val}")
        return val

    if kind == "bm":
        model = LevyModel("bm", sigma=positive("sigma", 1.0))
    elif kind == "stable":
        alpha = float(p.pop("alpha"))
        if not 1.0 < alpha <= 2.0:
            raise ModelError(
                f"stable: alpha must lie in (1, 2] for recurrence and integrability, got {alpha}")
        model = LevyModel("stable", alpha=alpha, c=positive("c", 1.0))
    else:
        sigma = positive("sigma", 1.0)
        rate = positive("rate")
        decay = positive("jump_decay", 1.0)
        model = LevyModel("bm_cp", sigma=sigma, jump_rate=rate, jump_decay=decay)
    if p:
        raise ModelError(f"{kind}: unexpected parameters {sorted(p)}")
    return model


def psi(model: LevyModel, lam) -> complex:
    """Characteristic exponent as a complex number (imaginary part is zero here)."""
    return complex(float(model.exponent(lam)), 0.0)


@dataclass(frozen=True)
class ConditionADiagnostic:
    holds: bool
    integral_estimate: float
    tail_bound: float


def check_condition_A(model: LevyModel, q: float, abs_tol: float = 1e-10) -> ConditionADiagnostic:
    """Numerically integrate ``1/(q + Psi)`` over ``(0, inf)``.

    The integral over ``(0, Lmax)`` is computed by adaptive quadrature and the
    remainder is bounded through the growth bound ``Psi >= k lam^p``.
    """
    from .quadrature import QuadratureConfig, positive_half_line_integral

    if not q > 0:
        raise ModelError("q must be positive")
    k, pw = model.growth
    if pw <= 1.0:
        return ConditionADiagnostic(False, math.inf, math.inf)
    val, _err, tail = positive_half_line_integral(
        lambda lam: 1.0 / (q + model.exponent(lam)), (k, pw),
        QuadratureConfig(abs_tol=abs_tol), split=1.0)
    return ConditionADiagnostic(math.isfinite(val), val, tail)
