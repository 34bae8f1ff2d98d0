"""Monte Carlo path sampling.

Exact continuous-time simulation of the magnetization chain, its killed
and confined variants, the ordered triple coupling used to certify the
local minorization, and a naive conditioned-expectation estimator.

Randomness contract: replica i of a run with seed s draws from
Philox(SeedSequence(entropy=s, spawn_key=(i,))) and from nothing else, so
results are bit-identical regardless of worker count or chunking.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    CouplingConstructionError,
    DomainError,
    StarvationError,
)
from .model import (
    ModelParams,
    _modified_rate_arrays,
    _rate_arrays,
    full_grid,
)

__all__ = [
    "Trajectory",
    "SimConfig",
    "TripleOutcome",
    "replica_stream",
    "sample_path",
    "sample_killed",
    "sample_auxiliary",
    "sample_triple_coupling",
    "mc_conditional_expectation",
    "coupling_envelope",
    "worker_count",
]

_MAX_BUFFER = 1 << 22


@dataclass(frozen=True)
class Trajectory:
    """One sampled path: jump epochs and post-jump states.

    states[0] is the initial state at times[0] = 0; death_time is the
    first entry time into the killed region, if any.  Endpoint-only
    records keep just the initial and final points.
    """

    times: np.ndarray
    states: np.ndarray
    death_time: float | None
    full: bool


@dataclass(frozen=True)
class SimConfig:
    seed: int
    replicas: int
    t_max: float
    record: str = "endpoints-only"  # or "full-path"

    def __post_init__(self):
        if self.replicas < 1:
            raise DomainError("replicas must be >= 1")
        if self.t_max <= 0.0:
            raise DomainError("t_max must be positive")
        if self.record not in ("endpoints-only", "full-path"):
            raise DomainError(f"unknown record mode {self.record!r}")


@dataclass(frozen=True)
class TripleOutcome:
    merged: bool
    exit_before_merge: bool
    merge_time: float | None
    exit_time: float | None
    ordering_violated: bool


def replica_stream(seed: int, replica: int) -> np.random.Generator:
    """Independent stream for one replica, a pure function of (seed, replica)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(replica,))
    return np.random.Generator(np.random.Philox(ss))


def worker_count() -> int:
    """Worker cap: CWLAB_THREADS if set, else the hardware count."""
    env = os.environ.get("CWLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise DomainError(f"CWLAB_THREADS = {env!r} is not an integer")
    return os.cpu_count() or 1


def _buffer_size(max_rate: float, span: float) -> int:
    need = int(2.5 * max_rate * max(span, 0.0)) + 64
    return min(need, _MAX_BUFFER)


def _run_endpoint(rng, i, t_end, up, down, kill_below, stop_on_kill):
    """Drive the endpoint kernel to completion, refilling uniforms as needed."""
    t = 0.0
    first_kill = -1.0
    max_rate = float(np.max(up + down))
    while True:
        uni = rng.random(_buffer_size(max_rate, t_end - t))
        i, t, first_kill, status, _ = _kernels.endpoint_kernel(
            i, t, t_end, up, down, kill_below, stop_on_kill, first_kill, uni)
        if status != 0:
            return i, t, first_kill, status


def _run_recorded(rng, i, t_end, up, down, kill_below, stop_on_kill):
    t = 0.0
    first_kill = -1.0
    max_rate = float(np.max(up + down))
    times = [0.0]
    states = [i]
    while True:
        cap = _buffer_size(max_rate, t_end - t)
        uni = rng.random(cap)
        out_t = np.empty(cap // 2 + 1)
        out_i = np.empty(cap // 2 + 1, dtype=np.int64)
        i, t, first_kill, status, _, n_rec = _kernels.record_kernel(
            i, t, t_end, up, down, kill_below, stop_on_kill, first_kill,
            uni, out_t, out_i, 0)
        times.extend(out_t[:n_rec].tolist())
        states.extend(out_i[:n_rec].tolist())
        if status != 0:
            return np.asarray(times), np.asarray(states), first_kill, status


def _trajectory(p, times, idx, first_kill, t_end, record):
    pts = full_grid(p).points
    death = None if first_kill < 0.0 else float(first_kill)
    if record == "full-path":
        return Trajectory(times=times, states=pts[idx], death_time=death,
                          full=True)
    return Trajectory(times=np.array([0.0, t_end]),
                      states=pts[[idx[0], idx[-1]]] if len(idx) > 1
                      else pts[[idx[0], idx[0]]],
                      death_time=death, full=False)


def _full_rates(p: ModelParams):
    x = full_grid(p).points
    up, down = _rate_arrays(p, x)
    up[-1] = 0.0
    down[0] = 0.0
    return up, down


def sample_path(p: ModelParams, m0: float, stream: np.random.Generator,
                t_max: float, record: str = "endpoints-only") -> Trajectory:
    """One path of the unkilled chain; death_time records the first visit
    to the region at or below epsilon without stopping the path."""
    g = full_grid(p)
    i0 = g.index_of(m0)
    up, down = _full_rates(p)
    if record == "full-path":
        times, idx, fk, _ = _run_recorded(stream, i0, t_max, up, down,
                                          p.kill_index, False)
        return _trajectory(p, times, idx, fk, t_max, record)
    i, t, fk, _ = _run_endpoint(stream, i0, t_max, up, down,
                                p.kill_index, False)
    return _trajectory(p, np.array([0.0, t_max]), np.array([i0, i]), fk,
                       t_max, record)


def sample_killed(p: ModelParams, m0: float, stream: np.random.Generator,
                  t_max: float, record: str = "endpoints-only") -> Trajectory:
    """One path of the chain stopped at its first entry below epsilon."""
    g = full_grid(p)
    i0 = g.index_of(m0)
    if i0 < p.kill_index:
        raise DomainError(f"m0 = {m0} is not above the killing threshold")
    up, down = _full_rates(p)
    if record == "full-path":
        times, idx, fk, _ = _run_recorded(stream, i0, t_max, up, down,
                                          p.kill_index, True)
        return _trajectory(p, times, idx, fk, t_max, record)
    i, t, fk, _ = _run_endpoint(stream, i0, t_max, up, down,
                                p.kill_index, True)
    return _trajectory(p, np.array([0.0, t]), np.array([i0, i]), fk,
                       t_max, record)


def sample_auxiliary(p: ModelParams, m0: float, stream: np.random.Generator,
                     t_max: float, record: str = "endpoints-only") -> Trajectory:
    """One path of the confined chain on [0, 1]."""
    pts, up, down = _modified_rate_arrays(p)
    j0 = int(np.argmin(np.abs(pts - m0)))
    if abs(pts[j0] - m0) > 1e-9:
        raise DomainError(f"m0 = {m0} is not a nonnegative grid point")
    if record == "full-path":
        times, idx, fk, _ = _run_recorded(stream, j0, t_max, up, down,
                                          -1, False)
    else:
        i, t, fk, _ = _run_endpoint(stream, j0, t_max, up, down, -1, False)
        times, idx = np.array([0.0, t_max]), np.array([j0, i])
    states = pts[idx]
    if np.any(states < -1e-12) or np.any(states > 1.0 + 1e-12):
        raise DomainError("confined path left [0, 1]")
    return Trajectory(times=times, states=states, death_time=None,
                      full=(record == "full-path"))


def coupling_envelope(p: ModelParams, omega: float):
    """Envelope rates and index window for the triple coupling.

    The window is the grid portion within 3 omega / sqrt(n) of m_+; the
    smallest slack r making  base (1 -+ r/sqrt(n))  bracket both jump
    rates over the window is found by direct scan and inflated by 1% so
    every residual rate stays strictly nonnegative.
    """
    p.require_qsd_regime()
    g = full_grid(p)
    x = g.points
    half = 3.0 * omega / math.sqrt(p.n)
    inside = np.abs(x - p.m_plus) <= half
    if not np.any(inside):
        raise DomainError("coupling window contains no grid point")
    kmin = int(np.argmax(inside))
    kmax = int(len(x) - 1 - np.argmax(inside[::-1]))
    up, down = _rate_arrays(p, x)
    base = p.n * (1.0 + p.m_plus) / 2.0 * math.exp(-p.beta * p.m_plus)
    rates = np.concatenate([up[kmin:kmax + 1], down[kmin:kmax + 1]])
    r = math.sqrt(p.n) * max(base - rates.min(), rates.max() - base) / base
    r *= 1.01
    linf = base * (1.0 - r / math.sqrt(p.n))
    lsup = base * (1.0 + r / math.sqrt(p.n))
    if linf <= 0.0:
        raise CouplingConstructionError(
            f"envelope collapsed (r = {r:.3f} too large at n = {p.n})"
        )
    return linf, lsup, kmin, kmax, r


def triple_initial_indices(p: ModelParams, omega: float):
    """Outer starting points: the extremes of the inner window (width
    omega/sqrt(n)), with the top one nudged up a step if needed so the
    index gap is even (the reflection preserves gap parity, and merging
    requires gap parity zero)."""
    g = full_grid(p)
    x = g.points
    half = omega / math.sqrt(p.n)
    inner = np.where((np.abs(x - p.m_plus) <= half)
                     & (x > p.epsilon))[0]
    if len(inner) == 0:
        raise DomainError("inner coupling window contains no grid point")
    ilo, ihi = int(inner[0]), int(inner[-1])
    if (ihi - ilo) % 2 == 1:
        ihi += 1
    return ilo, ihi


def sample_triple_coupling(p: ModelParams, m0: float, omega: float,
                           t: float, stream: np.random.Generator) -> TripleOutcome:
    """One replica of the ordered triple (lower, original, upper).

    The middle chain starts at m0 inside the inner window; the outer pair
    starts at the window extremes and reflects with the envelope rates.
    Simulation stops at the horizon, or earlier once the outer pair
    leaves the outer window (the outcome is then resolved).
    """
    g = full_grid(p)
    i2 = g.index_of(m0)
    ilo, ihi = triple_initial_indices(p, omega)
    if not ilo <= i2 <= ihi:
        raise DomainError(f"m0 = {m0} is outside the inner coupling window")
    linf, lsup, kmin, kmax, _ = coupling_envelope(p, omega)
    up, down = _full_rates(p)
    i1, i3 = ilo, ihi
    tt = 0.0
    merge_time = -1.0
    exit_time = -1.0
    max_rate = 4.0 * lsup
    while True:
        uni = stream.random(_buffer_size(max_rate, t - tt))
        i1, i2, i3, tt, merge_time, exit_time, status, _ = \
            _kernels.triple_kernel(i1, i2, i3, tt, t, up, down, linf, lsup,
                                   kmin, kmax, merge_time, exit_time, uni)
        if status == 0:
            continue
        if status == 3:
            raise CouplingConstructionError(
                "negative residual rate or ordering breach in the coupling"
            )
        merged = merge_time >= 0.0
        exited = exit_time >= 0.0
        return TripleOutcome(
            merged=merged,
            exit_before_merge=exited and not merged,
            merge_time=float(merge_time) if merged else None,
            exit_time=float(exit_time) if exited else None,
            ordering_violated=False,
        )


def _map_replicas(fn, replicas: int):
    """Evaluate fn(replica_index) for every replica, in parallel when
    allowed; results are assembled in index order regardless of workers."""
    workers = min(worker_count(), replicas)
    if workers <= 1:
        return [fn(i) for i in range(replicas)]
    chunk = (replicas + workers - 1) // workers
    ranges = [range(s, min(s + chunk, replicas))
              for s in range(0, replicas, chunk)]
    out = [None] * replicas
    with ThreadPoolExecutor(max_workers=workers) as pool:
        def run(rng_range):
            return [fn(i) for i in rng_range]
        for rng_range, results in zip(ranges, pool.map(run, ranges)):
            for i, res in zip(rng_range, results):
                out[i] = res
    return out


def killed_endpoints(p: ModelParams, m0: float, t: float,
                     cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Endpoint states of the killed chain over all replicas.

    Returns (final_index, survived) arrays; final_index is on the full
    grid and only meaningful where survived is True.
    """
    g = full_grid(p)
    i0 = g.index_of(m0)
    if i0 < p.kill_index:
        raise DomainError(f"m0 = {m0} is not above the killing threshold")
    up, down = _full_rates(p)

    def one(i):
        rng = replica_stream(cfg.seed, i)
        j, tt, fk, status = _run_endpoint(rng, i0, t, up, down,
                                          p.kill_index, True)
        return j, status != 2

    res = _map_replicas(one, cfg.replicas)
    idx = np.array([r[0] for r in res], dtype=np.int64)
    alive = np.array([r[1] for r in res], dtype=bool)
    return idx, alive


def full_endpoints(p: ModelParams, m0: float, t: float,
                   cfg: SimConfig) -> np.ndarray:
    """Endpoint indices (full grid) of the unkilled chain over all replicas."""
    g = full_grid(p)
    i0 = g.index_of(m0)
    up, down = _full_rates(p)

    def one(i):
        rng = replica_stream(cfg.seed, i)
        j, _, _, _ = _run_endpoint(rng, i0, t, up, down, -1, False)
        return j

    return np.array(_map_replicas(one, cfg.replicas), dtype=np.int64)


def mc_conditional_expectation(p: ModelParams, m0: float, f, t: float,
                               cfg: SimConfig):
    """Conditioned mean of f at time t by naive rejection: simulate the
    killed chain and average f over the surviving replicas.

    Returns (estimate, stderr, survivors).
    """
    if t > cfg.t_max:
        raise DomainError("t exceeds the configured horizon")
    if t == 0.0:
        return float(f(m0)), 0.0, cfg.replicas
    idx, alive = killed_endpoints(p, m0, t, cfg)
    survivors = int(alive.sum())
    if survivors == 0:
        raise StarvationError("no replica survived to the requested time")
    pts = full_grid(p).points
    vals = np.array([float(f(x)) for x in pts[idx[alive]]])
    est = float(vals.mean())
    sd = float(vals.std(ddof=1)) if survivors > 1 else 0.0
    return est, sd / math.sqrt(survivors), survivors
