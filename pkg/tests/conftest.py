import math

import numpy as np
import pytest

from levypen import HFunctionEvaluator, make_model


def stable_h_exact(x, alpha, c):
    """Closed form of h for the symmetric stable exponent c|lam|^alpha."""
    k = 2.0 * c * math.gamma(alpha) * math.sin(math.pi * (alpha - 1.0) / 2.0)
    return abs(x) ** (alpha - 1.0) / k


def bm_cp_h_exact(x, sigma, rate, decay):
    """Closed form of h for Brownian motion plus symmetric Laplace jumps.

    Partial fractions of 1/Psi split h into a linear part and a saturating
    exponential part.
    """
    s = 0.5 * sigma**2
    mu2 = decay**2 + rate / s
    B = rate / (s * s * mu2)
    A = 1.0 / s - B
    mu = math.sqrt(mu2)
    ax = abs(x)
    return 0.5 * A * ax + B * (1.0 - math.exp(-mu * ax)) / (2.0 * mu)


MODELS = {
    "bm": {"kind": "bm", "sigma": 1.0},
    "bm_wide": {"kind": "bm", "sigma": 0.7},
    "stable15": {"kind": "stable", "alpha": 1.5, "c": 1.0},
    "stable12": {"kind": "stable", "alpha": 1.2, "c": 1.0},
    "bm_cp": {"kind": "bm_cp", "sigma": 1.0, "rate": 0.5, "jump_decay": 2.0},
}

_cache = {}


def evaluator(name):
    if name not in _cache:
        _cache[name] = HFunctionEvaluator(make_model(MODELS[name]))
    return _cache[name]


@pytest.fixture
def bm():
    return evaluator("bm")


@pytest.fixture
def stable():
    return evaluator("stable15")


@pytest.fixture
def bmcp():
    return evaluator("bm_cp")


@pytest.fixture(params=["bm", "stable15", "bm_cp"])
def any_ev(request):
    return evaluator(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
