"""Monte Carlo engine for weighted expectations of local-time functionals.

Two path engines share one event loop:

* ``bm`` and ``bm_cp`` use exact Brownian-bridge sampling.  Given the
  endpoints ``u, v`` of a Gaussian step of length ``dt`` the local time at a
  level ``a`` (occupation-density normalisation) satisfies

      P(L > l | u, v) = exp(-[(|u-a| + |v-a| + s^2 l)^2 - (v-u)^2] / (2 s^2 dt)),

  so local times and hits of single points are exact per step.  The step is
  chosen so that the second-nearest monitored level is out of reach
  (``s sqrt(dt) <= d_2 / kappa``); far from the levels steps grow
  geometrically.  Compound Poisson jumps are applied at their exact arrival
  times.
* ``stable`` uses a fixed grid with exact stable increments, a box-kernel
  local-time estimator and a hitting window.  Both are biased; results carry
  flags saying so.

Random numbers come from Philox keyed by ``(seed, batch_index)``, so a run is
reproducible for a fixed ``(seed, batch_size)`` whatever the worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import levy_stable

from .errors import DomainError
from .models import LevyModel

CENSORED = None


@dataclass(frozen=True)
class MCConfig:
    """Monte Carlo controls.

    ``kappa`` sets the adaptive step of the bridge engine, ``dt`` the grid of
    the stable engine.  ``eps_hit`` and ``eps_lt`` (stable only) default to
    one and four typical grid increments.
    """

    n_paths: int = 10_000
    seed: int = 20240601
    batch_size: int = 4096
    threads: int = 1
    kappa: float = 5.0
    dt_min: float = 1e-10
    dt_max: float = math.inf
    dt: float = 1e-3
    horizon: float = 1e12
    max_steps: int = 1_000_000
    prune_tol: float = 1e-12
    eps_hit: float | None = None
    eps_lt: float | None = None
    calibration: float = 1.0

    def __post_init__(self):
        if self.n_paths < 1 or self.batch_size < 1 or self.threads < 1:
            raise DomainError("n_paths, batch_size and threads must be positive")
        if not (self.kappa > 0 and self.dt > 0 and self.horizon > 0):
            raise DomainError("kappa, dt and horizon must be positive")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must fit in 64 bits")


@dataclass
class MCEstimate:
    mean: float | np.ndarray
    std_error: float | np.ndarray
    n_paths: int
    flags: list = field(default_factory=list)
    seed: int = 0

    def to_dict(self):
        conv = (lambda v: v.tolist() if isinstance(v, np.ndarray) else float(v))
        return {"mean": conv(self.mean), "std_error": conv(self.std_error), "n_paths": self.n_paths,
                "flags": list(self.flags), "seed": self.seed}


def _estimate(values, cfg, flags=()) -> MCEstimate:
    v = np.asarray(values, dtype=float)
    n = v.shape[0]
    se = v.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(v.shape[1:], math.inf)
    mean = v.mean(axis=0)
    if np.ndim(mean) == 0:
        mean, se = float(mean), float(se)
    return MCEstimate(mean, se, n, list(flags), cfg.seed)


# ----------------------------------------------------------------------------
# clocks

@dataclass(frozen=True)
class ClockSpec:
    """Random time along which the penalization limit is taken.

    ``kind`` is ``"exponential"`` (rate ``q``), ``"one_hit"`` (first hit of
    ``b``), ``"two_hit"`` (first hit of ``c`` or ``-d``) or
    ``"inverse_local_time"`` (first time the local time at ``b`` exceeds ``u``).
    """

    kind: str
    q: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    u: float = 0.0

    def __post_init__(self):
        if self.kind == "exponential" and not self.q > 0:
            raise DomainError("exponential clock needs q > 0")
        if self.kind == "two_hit" and not (self.c > 0 and self.d > 0):
            raise DomainError("two-point clock needs c > 0 and d > 0")
        if self.kind == "inverse_local_time" and not self.u >= 0:
            raise DomainError("inverse local time clock needs u >= 0")
        if self.kind not in ("exponential", "one_hit", "two_hit", "inverse_local_time"):
            raise DomainError(f"unknown clock kind {self.kind!r}")

    @classmethod
    def exponential(cls, q):
        return cls("exponential", q=float(q))

    @classmethod
    def one_hit(cls, b):
        return cls("one_hit", b=float(b))

    @classmethod
    def two_hit(cls, c, d):
        return cls("two_hit", c=float(c), d=float(d))

    @classmethod
    def inverse_local_time(cls, b, u):
        return cls("inverse_local_time", b=float(b), u=float(u))

    @property
    def targets(self) -> list:
        if self.kind in ("one_hit", "inverse_local_time"):
            return [self.b]
        if self.kind == "two_hit":
            return [self.c, -self.d]
        return []

    def limit_gamma(self) -> float:
        """``gamma`` of the limiting ``phi`` for this clock family."""
        if self.kind == "exponential":
            return 0.0
        if self.kind == "two_hit":
            return (self.d - self.c) / (self.c + self.d)
        return 1.0 if self.b > 0 else -1.0

    def rescale(self, ev) -> float:
        """Normalising factor: ``r_q(0)``, ``h^B(b)`` or ``h^C(c, -d)``."""
        if self.kind == "exponential":
            return ev.r(self.q, 0.0)
        if self.kind == "two_hit":
            return ev.h_C(self.c, -self.d)
        return ev.h_B(self.b)

    def to_dict(self):
        keys = {"exponential": ("q",), "one_hit": ("b",), "two_hit": ("c", "d"),
                "inverse_local_time": ("b", "u")}[self.kind]
        return {"kind": self.kind, **{k: getattr(self, k) for k in keys}}


# ----------------------------------------------------------------------------
# engine

def _rng(seed: int, batch: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, batch], dtype=np.uint64)))


def _stable_windows(model, cfg):
    step = (model.c * cfg.dt) ** (1.0 / model.alpha)
    return (cfg.eps_hit or step), (cfg.eps_lt or 4.0 * step)


def _engine(model: LevyModel, x0: float, n: int, rng, cfg: MCConfig, levels=(), lam=None,
            stop_on=(), il=None, exp_rate=None, checkpoints=(), prune=False):
    """Simulate ``n`` paths from ``x0`` until every stopping rule has fired.

    Stopping rules (any subset): first hit of a level in ``stop_on``; local
    time at level ``il[0]`` exceeding ``il[1]``; an independent ``Exp(exp_rate)``
    time.  ``Gamma = exp(-lam . L)`` is recorded when the first rule fires
    (the "clock").  Paths keep running until the last checkpoint, where
    ``(X, L)`` snapshots are stored.
    """
    levels = np.asarray(levels, dtype=float)
    m = levels.size
    lam = np.zeros(m) if lam is None else np.asarray(lam, dtype=float)
    stop_on = np.asarray(stop_on, dtype=int)
    cps = np.asarray(sorted(checkpoints), dtype=float)
    ncps = cps.size
    has_clock = bool(stop_on.size) or il is not None or exp_rate is not None
    grid = model.kind == "stable"
    sig = model.sigma
    if grid:
        eps_hit, eps_lt = _stable_windows(model, cfg)
        scale_c = model.c

    X = np.full(n, float(x0))
    t = np.zeros(n)
    L = np.zeros((n, m))
    steps = np.zeros(n, dtype=np.int64)
    clock = np.full(n, not has_clock)
    G = np.full(n, np.nan)
    hit = np.full(n, -1)
    t_stop = np.full(n, np.nan)
    status = np.zeros(n, dtype=np.int8)  # 0 ok, 1 pruned, 2 censored
    ncp = np.zeros(n, dtype=np.int64)
    snapX = np.full((ncps, n), np.nan)
    snapL = np.zeros((ncps, n, m))
    stop_time = rng.exponential(1.0 / exp_rate, n) if exp_rate is not None else None
    if model.kind == "bm_cp":
        next_jump = rng.exponential(1.0 / model.jump_rate, n)
        m2 = model.second_moment

    if stop_on.size:
        at = np.flatnonzero(levels[stop_on] == float(x0))
        if at.size:
            clock[:] = True
            G[:] = 1.0
            hit[:] = stop_on[at[0]]
            t_stop[:] = 0.0

    act = np.arange(n)
    while act.size:
        na = act.size
        u, tt, Lb = X[act], t[act], L[act]
        if grid:
            free = np.full(na, cfg.dt)
        elif m >= 2:
            d = np.abs(u[:, None] - levels[None, :])
            d2 = np.partition(d, 1, axis=1)[:, 1]
            free = np.clip((d2 / (cfg.kappa * sig)) ** 2, cfg.dt_min, cfg.dt_max)
        else:
            free = np.full(na, cfg.dt_max)
        ev_t = np.full(na, cfg.horizon)
        if ncps:
            ev_t = np.minimum(ev_t, np.where(ncp[act] < ncps, cps[np.minimum(ncp[act], ncps - 1)], np.inf))
        if stop_time is not None:
            ev_t = np.minimum(ev_t, np.where(clock[act], np.inf, stop_time[act]))
        agg = None
        if model.kind == "bm_cp":
            # all levels out of reach of the full increment: lump the jumps of the step together
            d1 = np.abs(u[:, None] - levels[None, :]).min(axis=1) if m else np.full(na, np.inf)
            free_agg = np.minimum((d1 / cfg.kappa) ** 2 / m2, cfg.dt_max)
            agg = model.jump_rate * free_agg > 1.0
            free = np.where(agg, free_agg, free)
            ev_t = np.where(agg, ev_t, np.minimum(ev_t, next_jump[act]))
        t_new = np.where(tt + free >= ev_t, ev_t, tt + free)
        dt = t_new - tt

        if grid:
            v = u + (scale_c * dt) ** (1.0 / model.alpha) * levy_stable.rvs(model.alpha, 0.0, size=na,
                                                                         random_state=rng)
            near = np.abs(v[:, None] - levels[None, :])
            inc = cfg.calibration * dt[:, None] * (near < eps_lt) / (2.0 * eps_lt)
            hitm = near < eps_hit
        else:
            v = u + sig * np.sqrt(dt) * rng.standard_normal(na)
            e = rng.exponential(size=(na, m))
            root = np.sqrt(((v - u) ** 2)[:, None] + 2.0 * sig**2 * dt[:, None] * e)
            inc = np.maximum(0.0, (root - np.abs(u[:, None] - levels) - np.abs(v[:, None] - levels)) / sig**2)
            hitm = inc > 0.0
            if model.kind == "bm_cp":
                jumped = ~agg & (t_new >= next_jump[act])
                k = int(jumped.sum())
                if k:
                    v[jumped] += rng.laplace(0.0, 1.0 / model.jump_decay, k)
                    next_jump[act[jumped]] += rng.exponential(1.0 / model.jump_rate, k)
                k = int(agg.sum())
                if k:
                    # a sum of N Laplace(1/b) variables is a difference of two Gamma(N, 1/b)
                    nj = rng.poisson(model.jump_rate * dt[agg])
                    scale = 1.0 / model.jump_decay
                    v[agg] += rng.gamma(nj, scale) - rng.gamma(nj, scale)
                    next_jump[act[agg]] = t_new[agg] + rng.exponential(1.0 / model.jump_rate, k)
        Ln = Lb + inc
        X[act], t[act], L[act] = v, t_new, Ln
        steps[act] += 1

        pend = ~clock[act]
        if pend.any():
            fired = np.zeros(na, dtype=bool)
            g_now = np.exp(-(Ln @ lam))
            if stop_on.size:
                hm = hitm[:, stop_on] & pend[:, None]
                any_hit = hm.any(axis=1)
                if any_hit.any():
                    j = stop_on[np.argmax(hm, axis=1)]
                    other = np.ones(m, dtype=bool)
                    other[stop_on] = False
                    g_hit = np.exp(-(Lb @ lam) - (inc[:, other] @ lam[other]))
                    sel = act[any_hit]
                    G[sel], hit[sel], t_stop[sel] = g_hit[any_hit], j[any_hit], t_new[any_hit]
                    fired |= any_hit
            if il is not None:
                over = pend & ~fired & (Ln[:, il[0]] > il[1])
                sel = act[over]
                G[sel], t_stop[sel] = g_now[over], t_new[over]
                fired |= over
            if stop_time is not None:
                due = pend & ~fired & (t_new >= stop_time[act])
                sel = act[due]
                G[sel], t_stop[sel] = g_now[due], t_new[due]
                fired |= due
            if prune:
                small = pend & ~fired & (g_now < cfg.prune_tol)
                sel = act[small]
                G[sel], status[sel], t_stop[sel] = 0.0, 1, t_new[small]
                fired |= small
            clock[act[fired]] = True

        if ncps:
            has_cp = ncp[act] < ncps
            reach = has_cp & (t_new >= cps[np.minimum(ncp[act], ncps - 1)])
            if reach.any():
                sel = act[reach]
                idx = ncp[sel]
                snapX[idx, sel] = v[reach]
                snapL[idx, sel] = Ln[reach]
                ncp[sel] += 1

        done = clock[act] & (ncp[act] >= ncps)
        cens = ~done & ((t_new >= cfg.horizon) | (steps[act] >= cfg.max_steps))
        if cens.any():
            sel = act[cens & ~clock[act]]
            G[sel], status[sel], t_stop[sel] = np.exp(-(L[sel] @ lam)), 2, t[sel]
            status[act[cens]] = 2
        act = act[~(done | cens)]

    return {"X": X, "t": t, "L": L, "G": G, "hit": hit, "t_stop": t_stop, "status": status,
            "snapX": snapX, "snapL": snapL, "steps": steps}


def _worker(args):
    model, x0, size, seed, batch, cfg, kw = args
    return _engine(model, x0, size, _rng(seed, batch), cfg, **kw)


def run_paths(model: LevyModel, x0: float, cfg: MCConfig, **kw) -> dict:
    """Run ``cfg.n_paths`` paths in batches and concatenate the batch outputs in order."""
    sizes = [cfg.batch_size] * (cfg.n_paths // cfg.batch_size)
    if cfg.n_paths % cfg.batch_size:
        sizes.append(cfg.n_paths % cfg.batch_size)
    jobs = [(model, float(x0), s, cfg.seed, b, cfg, kw) for b, s in enumerate(sizes)]
    if cfg.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(_worker, jobs))
    else:
        parts = [_worker(j) for j in jobs]
    out = {}
    for key in parts[0]:
        axis = 1 if key in ("snapX", "snapL") else 0
        out[key] = np.concatenate([p[key] for p in parts], axis=axis)
    return out


def _engine_flags(model, res, cfg):
    flags = []
    cens = float(np.mean(res["status"] == 2))
    if cens > 0:
        flags.append(f"censored_fraction={cens:.3g}")
    if cens > 1e-3:
        flags.append("censoring_above_threshold")
    if model.kind == "stable":
        flags += ["grid_hitting_bias", "kernel_local_time"]
    return flags


# ----------------------------------------------------------------------------
# estimators

def mc_hit_order(model: LevyModel, x: float, points: Sequence[float], mc: MCConfig) -> MCEstimate:
    """Frequencies of each point being the first of ``points`` hit from ``x``."""
    pts = np.asarray(points, dtype=float)
    res = run_paths(model, x, mc, levels=pts, stop_on=np.arange(pts.size))
    ind = (res["hit"][:, None] == np.arange(pts.size)[None, :]).astype(float)
    return _estimate(ind, mc, _engine_flags(model, res, mc))


def mc_j_row(model: LevyModel, points: Sequence[float], k: int, lam: float, mc: MCConfig) -> MCEstimate:
    """``P_{a_k}[exp(-lam L^{a_k}_{T_{a_i}}); T_{a_i} = T_{A minus a_k}]`` for every ``i`` (entry ``k`` is 0)."""
    pts = np.asarray(points, dtype=float)
    w = np.zeros(pts.size)
    w[k] = lam
    others = np.array([i for i in range(pts.size) if i != k])
    res = run_paths(model, pts[k], mc, levels=pts, lam=w, stop_on=others)
    vals = res["G"][:, None] * (res["hit"][:, None] == np.arange(pts.size)[None, :])
    return _estimate(np.nan_to_num(vals), mc, _engine_flags(model, res, mc))


def _clock_run(model, problem, x, clock: ClockSpec, mc, checkpoints=()):
    pts = list(problem.points)
    tg = clock.targets
    levels = np.array(pts + tg)
    lam = np.array(list(problem.weights) + [0.0] * len(tg))
    kw = dict(levels=levels, lam=lam, checkpoints=checkpoints, prune=True)
    if clock.kind == "exponential":
        kw["exp_rate"] = clock.q
    elif clock.kind == "inverse_local_time":
        kw["il"] = (len(pts), clock.u)
    else:
        kw["stop_on"] = np.arange(len(pts), len(pts) + len(tg))
    return run_paths(model, x, mc, **kw)


def weighted_expectation(model: LevyModel, problem, x: float, clock: ClockSpec, mc: MCConfig) -> MCEstimate:
    """``P_x[Gamma_tau]`` with ``tau`` given by ``clock``."""
    res = _clock_run(model, problem, x, clock, mc)
    flags = _engine_flags(model, res, mc)
    pruned = float(np.mean(res["status"] == 1))
    if pruned:
        flags.append(f"pruned_fraction={pruned:.3g}")
    return _estimate(res["G"], mc, flags)


@dataclass
class SweepRow:
    param: float
    estimate: MCEstimate
    rescale: float
    rescaled: float
    rescaled_se: float
    target: float


def clock_sweep(ev, problem, x: float, clocks: Sequence[ClockSpec], mc: MCConfig) -> list[SweepRow]:
    """Rescaled estimates ``rho(tau) P_x[Gamma_tau]`` along a ladder of clocks.

    ``target`` is ``phi`` with the ``gamma`` selected by each clock.
    """
    from .penalization import PhiFunction

    rows = []
    for clk in clocks:
        est = weighted_expectation(ev.model, problem, x, clk, mc)
        rho = clk.rescale(ev)
        target = PhiFunction(ev, problem.with_gamma(clk.limit_gamma())).values([x])[0]
        param = {"exponential": clk.q, "two_hit": clk.c}.get(clk.kind, clk.b)
        rows.append(SweepRow(param, est, rho, rho * est.mean, rho * est.std_error, float(target)))
    return rows


def martingale_check(ev, problem, x: float, times: Sequence[float], mc: MCConfig) -> list[MCEstimate]:
    """``E_x[phi(X_t) Gamma_t] / phi(x)`` for each ``t`` in ``times``."""
    from .penalization import PhiFunction

    f = PhiFunction(ev, problem)
    res = run_paths(ev.model, x, mc, levels=problem.points, checkpoints=times)
    phi0 = f.values([x])[0]
    lam = np.asarray(problem.weights)
    out = []
    for j in range(len(times)):
        m = f.values(res["snapX"][j]) * np.exp(-(res["snapL"][j] @ lam)) / phi0
        out.append(_estimate(m, mc, _engine_flags(ev.model, res, mc)))
    return out


# functionals F_s of (X_s, L_s) offered to penalization_ratio

def indicator_above(level: float) -> Callable:
    def F(X, L):
        return (X > level).astype(float)
    return F


def exp_local_time(k: int, weight: float = 1.0) -> Callable:
    def F(X, L):
        return np.exp(-weight * L[:, k])
    return F


def penalization_ratio(ev, problem, x: float, clock: ClockSpec, F: Callable, s: float,
                       mc: MCConfig) -> tuple[MCEstimate, MCEstimate]:
    """Both sides of the penalization limit at a finite clock.

    Returns ``(lhs, rhs)`` with ``lhs = E[F_s Gamma_tau] / E[Gamma_tau]`` (ratio
    standard error from the delta method) and
    ``rhs = E[F_s phi(X_s) Gamma_s] / phi(x)`` using the ``gamma`` selected by
    the clock.
    """
    from .penalization import PhiFunction

    res = _clock_run(ev.model, problem, x, clock, mc, checkpoints=[s])
    Xs, Ls = res["snapX"][0], res["snapL"][0]
    Fs = np.asarray(F(Xs, Ls), dtype=float)
    G = res["G"]
    n = G.size
    num, den = Fs * G, G
    r = num.mean() / den.mean()
    resid = (num - r * den) / den.mean()
    flags = _engine_flags(ev.model, res, mc)
    lhs = MCEstimate(float(r), float(resid.std(ddof=1) / math.sqrt(n)), n, flags, mc.seed)
    f = PhiFunction(ev, problem.with_gamma(clock.limit_gamma()))
    lam = np.asarray(problem.weights)
    m = f.values(Xs) * np.exp(-(Ls[:, : problem.n] @ lam)) / f.values([x])[0]
    rhs = _estimate(Fs * m, mc, flags)
    return lhs, rhs


@dataclass
class WeightedSample:
    """``P``-paths at time ``t`` with importance weights ``M_t``."""

    X: np.ndarray
    L: np.ndarray
    weights: np.ndarray
    ess: float
    flags: list

    def expectation(self, values) -> MCEstimate:
        """Weighted (``Q``-) mean of per-path ``values`` with its standard error."""
        v = np.asarray(values, dtype=float) * self.weights
        n = v.size
        return MCEstimate(float(v.mean()), float(v.std(ddof=1) / math.sqrt(n)), n, list(self.flags))


def sample_penalized(ev, problem, x: float, t_horizon: float, mc: MCConfig) -> WeightedSample:
    """Paths under ``P`` with density ``phi(X_t) Gamma_t / phi(x)``, i.e. a ``Q``-sample."""
    from .penalization import PhiFunction

    if not t_horizon > 0:
        raise DomainError("t_horizon must be positive")
    f = PhiFunction(ev, problem)
    res = run_paths(ev.model, x, mc, levels=problem.points, checkpoints=[t_horizon])
    X, L = res["snapX"][0], res["snapL"][0]
    w = f.values(X) * np.exp(-(L @ np.asarray(problem.weights))) / f.values([x])[0]
    ess = float(w.sum() ** 2 / np.sum(w * w))
    flags = _engine_flags(ev.model, res, mc)
    if ess < 0.05 * w.size:
        flags.append("low_effective_sample_size")
    return WeightedSample(X, L, w, ess, flags)


def unweighted_q_expectation(ev, problem, x: float, t_horizon: float, mc: MCConfig) -> MCEstimate:
    """``Q^1_x[exp(-sum_{k>=2} lam_k L_t^{a_k})]`` under the one-point penalized measure at time ``t``.

    As ``t`` grows this approaches the value with ``L_inf``.
    """
    from .penalization import PhiFunction

    f1 = PhiFunction(ev, problem.first())
    res = run_paths(ev.model, x, mc, levels=problem.points, checkpoints=[t_horizon])
    X, L = res["snapX"][0], res["snapL"][0]
    lam = np.asarray(problem.weights)
    m1 = f1.values(X) * np.exp(-lam[0] * L[:, 0]) / f1.values([x])[0]
    return _estimate(m1 * np.exp(-(L[:, 1:] @ lam[1:])), mc, _engine_flags(ev.model, res, mc))


def ks_distance_exponential(values, weights) -> tuple[float, float]:
    """KS distance between a weighted sample and the exponential with the same mean.

    Returns ``(distance, fitted_rate)``.
    """
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    order = np.argsort(v)
    v, w = v[order], w[order] / w.sum()
    rate = 1.0 / float(np.dot(v, w))
    cdf_hi = np.cumsum(w)
    cdf_lo = cdf_hi - w
    model = 1.0 - np.exp(-rate * v)
    return float(max(np.max(np.abs(cdf_hi - model)), np.max(np.abs(cdf_lo - model)))), rate


# ----------------------------------------------------------------------------
# single paths on a fixed grid

@dataclass
class PathSample:
    times: np.ndarray
    values: np.ndarray
    local_times: dict
    hit_records: dict
    seed: int
    flags: list = field(default_factory=list)


def sample_path(model: LevyModel, x0: float, horizon: float, dt: float, seed: int,
                levels: Sequence[float] = ()) -> PathSample:
    """One path on the grid ``0, dt, 2 dt, ...`` with local times and first hits at ``levels``.

    Gaussian parts are exact; compound Poisson jumps are thinned onto the grid
    (at most one per step, placed at the step end).  For ``bm``/``bm_cp``
    local times and hits between grid points come from the bridge law; for
    ``stable`` they come from the kernel estimator and a hitting window.
    """
    if not (dt > 0 and horizon > 0):
        raise DomainError("dt and horizon must be positive")
    rng = _rng(seed, 0)
    nstep = int(math.ceil(horizon / dt))
    times = dt * np.arange(nstep + 1)
    lv = np.asarray(levels, dtype=float)
    flags = []
    if model.kind == "stable":
        incs = (model.c * dt) ** (1.0 / model.alpha) * levy_stable.rvs(model.alpha, 0.0, size=nstep,
                                                                       random_state=rng)
        X = np.concatenate([[x0], x0 + np.cumsum(incs)])
        cfg = MCConfig(dt=dt)
        eps_hit, eps_lt = _stable_windows(model, cfg)
        near = np.abs(X[1:, None] - lv[None, :])
        dL = dt * (near < eps_lt) / (2.0 * eps_lt)
        hitm = near < eps_hit
        flags += ["grid_hitting_bias", "kernel_local_time"]
    else:
        gauss = model.sigma * math.sqrt(dt) * rng.standard_normal(nstep)
        X = np.concatenate([[x0], x0 + np.cumsum(gauss)])
        e = rng.exponential(size=(nstep, lv.size))
        u, v = X[:-1, None], X[1:, None]
        root = np.sqrt((v - u) ** 2 + 2.0 * model.sigma**2 * dt * e)
        dL = np.maximum(0.0, (root - np.abs(u - lv) - np.abs(v - lv)) / model.sigma**2)
        hitm = dL > 0.0
        if model.kind == "bm_cp":
            p_jump = -math.expm1(-model.jump_rate * dt)
            jumps = (rng.random(nstep) < p_jump) * rng.laplace(0.0, 1.0 / model.jump_decay, nstep)
            X = X + np.concatenate([[0.0], np.cumsum(jumps)])
            # bridge quantities were drawn on the continuous part; redo them on the jumped path
            u, v = X[:-1, None] + 0.0, X[1:, None] - jumps[:, None]
            root = np.sqrt((v - u) ** 2 + 2.0 * model.sigma**2 * dt * e)
            dL = np.maximum(0.0, (root - np.abs(u - lv) - np.abs(v - lv)) / model.sigma**2)
            hitm = dL > 0.0
            flags.append("jumps_on_grid")
    lt, hits = {}, {}
    for j, a in enumerate(lv):
        lt[float(a)] = np.concatenate([[0.0], np.cumsum(dL[:, j])])
        first = np.flatnonzero(hitm[:, j])
        hits[float(a)] = float(times[first[0] + 1]) if first.size else CENSORED
        if float(x0) == float(a):
            hits[float(a)] = 0.0
    return PathSample(times, X, lt, hits, seed, flags)


@dataclass
class LocalTimeTrajectory:
    values: np.ndarray
    flags: list


def local_time_estimate(path: PathSample, a: float, eps: float, calibration: float = 1.0,
                        alpha: float = 2.0) -> LocalTimeTrajectory:
    """Box-kernel occupation estimator ``(1/2 eps) int 1{|X_s - a| < eps} ds``.

    Multiplied by ``calibration`` (see :func:`calibrate_local_time`).  A bias
    flag is raised when ``eps`` is below the typical grid increment
    ``dt^(1/alpha)``.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    dt = np.diff(path.times)
    inside = np.abs(path.values[1:] - a) < eps
    vals = calibration * np.concatenate([[0.0], np.cumsum(dt * inside)]) / (2.0 * eps)
    flags = []
    if eps < float(dt.mean()) ** (1.0 / alpha):
        flags.append("bandwidth_below_resolution")
    return LocalTimeTrajectory(vals, flags)


def calibrate_local_time(ev, dt: float, eps: float, q: float = 1.0, n_paths: int = 4000,
                         seed: int = 7) -> tuple[float, MCEstimate]:
    """Factor making the kernel estimator satisfy ``E_a[L_{e_q}^a] = r_q(0)``.

    Runs the grid engine from ``a = 0`` until an independent ``Exp(q)`` time.
    Returns ``(factor, raw_estimate)``.
    """
    model = ev.model
    cfg = MCConfig(n_paths=n_paths, seed=seed, dt=dt, eps_lt=eps)
    if model.kind == "stable":
        res = run_paths(model, 0.0, cfg, levels=[0.0], exp_rate=q)
        raw = res["L"][:, 0]
    else:
        tau = _rng(seed, 1).exponential(1.0 / q, n_paths)
        raw = np.empty(n_paths)
        for i in range(n_paths):
            p = sample_path(model, 0.0, max(tau[i], dt), dt, seed + 1 + i)
            raw[i] = local_time_estimate(p, 0.0, eps).values[-1]
    est = _estimate(raw, cfg)
    return ev.r(q, 0.0) / est.mean, est


def clock_time(path: PathSample, clock: ClockSpec, rng: np.random.Generator):
    """Clock value along a sampled path, or ``CENSORED`` beyond its horizon."""
    if clock.kind == "exponential":
        tau = float(rng.exponential(1.0 / clock.q))
        return tau if tau <= path.times[-1] else CENSORED
    if clock.kind == "one_hit":
        return _recorded_hit(path, clock.b)
    if clock.kind == "two_hit":
        hs = [_recorded_hit(path, clock.c), _recorded_hit(path, -clock.d)]
        hs = [h for h in hs if h is not CENSORED]
        return min(hs) if hs else CENSORED
    lt = path.local_times.get(float(clock.b))
    if lt is None:
        raise DomainError(f"level {clock.b} was not monitored on this path")
    if clock.u == 0.0:
        return _recorded_hit(path, clock.b)
    over = np.flatnonzero(lt > clock.u)
    return float(path.times[over[0]]) if over.size else CENSORED


def _recorded_hit(path, level):
    if float(level) not in path.hit_records:
        raise DomainError(f"level {level} was not monitored on this path")
    return path.hit_records[float(level)]
