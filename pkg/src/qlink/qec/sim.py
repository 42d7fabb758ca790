"""Deterministic discrete-event model of syndrome streaming and decoding.

Sliding mode
    Rounds complete every ``T_s``.  Gate 1 is requested once ``r`` rounds
    exist; every gate then pays one ``T_l`` and waits for a single worker to
    decode, at ``c`` per round, everything that piled up since the previous
    gate was requested.  After the last gate the worker keeps draining batches
    without the latency charge.

Parallel mode
    Rounds are released every ``T_s + T_l``: each round's syndromes make a
    full interconnect round trip before the next one is scheduled.  Every
    generation holds ``spatial_regions`` commit regions (ready once their
    buffered rounds are in) followed by as many cleanup regions (ready once
    their own rounds are in and all of that generation's commits finished).
    ``N_par`` workers take ready regions in order of readiness; each region
    costs ``T_DEC``.

Simulation time is kept in integer picoseconds so the event order is exact.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..errors import ParameterError, ScheduleError
from .params import RtParams, WindowParams
from .waittime import wait_time_recurrence

PS = 1e12


def _ps(seconds: float) -> int:
    return int(round(seconds * PS))


def schedule_python(horizon, n_com, n_w, n_buf, spatial, n_par, t_dec, period):
    """Finish time of each generation's commits and cleanups (-1: no cleanup)."""
    g_len = n_com + n_w
    n_gen = -(-horizon // g_len)
    commit_fin = np.zeros(n_gen, dtype=np.int64)
    cleanup_fin = np.full(n_gen, -1, dtype=np.int64)
    cl_ready = [-1] * n_gen
    ring = [0] * n_par
    k = ci = cg = cpiece = commits_done = 0
    n_commit = n_gen * spatial
    inf = math.inf
    while True:
        while cg < commits_done and cl_ready[cg] < 0:
            cg += 1
        if ci < n_commit:
            g = ci // spatial
            ready_c = min(g * g_len + n_com + n_buf, horizon) * period
        else:
            ready_c = inf
        ready_w = cl_ready[cg] if cg < commits_done else inf
        if ready_c == inf and ready_w == inf:
            break
        ready = min(ready_c, ready_w)
        slot = k % n_par
        fin = max(ready, ring[slot]) + t_dec
        ring[slot] = fin
        k += 1
        if ready_c <= ready_w:
            g = ci // spatial
            commit_fin[g] = max(commit_fin[g], fin)
            ci += 1
            if ci % spatial == 0:
                c_end = min(g * g_len + n_com, horizon)
                w_end = min((g + 1) * g_len, horizon)
                if w_end > c_end:
                    cl_ready[g] = max(w_end * period, int(commit_fin[g]))
                commits_done = g + 1
        else:
            cleanup_fin[cg] = max(cleanup_fin[cg], fin)
            cpiece += 1
            if cpiece == spatial:
                cpiece = 0
                cg += 1
    return commit_fin, cleanup_fin


try:
    if os.environ.get("QLINK_PURE"):
        raise ImportError("pure-Python kernels forced by QLINK_PURE")
    from ._backlog_core import schedule_compiled
    HAVE_COMPILED = True
except ImportError:
    schedule_compiled = None
    HAVE_COMPILED = False


@dataclass
class BacklogTrace:
    """Undecoded-round count after every arrival or decode-completion event."""

    t: np.ndarray
    undecoded_rounds: np.ndarray
    horizon_s: float

    def peak(self, until_fraction: float = 1.0) -> int:
        mask = self.t <= self.horizon_s * until_fraction
        return int(self.undecoded_rounds[mask].max()) if mask.any() else 0

    @property
    def bounded(self) -> bool:
        """True when the running maximum no longer grows over the last quarter."""
        return self.peak(0.75) == self.peak(1.0)

    def rows(self):
        return zip(self.t.tolist(), self.undecoded_rounds.tolist())


@dataclass
class SimResult:
    mode: str
    trace: BacklogTrace
    waits: List[float]
    analytic_waits: Optional[List[float]] = None
    gate_rounds: List[int] = field(default_factory=list)
    n_par: Optional[int] = None


def _trace(arrival_ps: np.ndarray, done_ps: np.ndarray, done_rounds: np.ndarray, horizon_ps: int) -> BacklogTrace:
    keep = done_ps <= horizon_ps
    times = np.concatenate([arrival_ps, done_ps[keep]])
    deltas = np.concatenate([np.ones_like(arrival_ps), -done_rounds[keep]])
    # arrivals sort ahead of completions at equal timestamps
    kinds = np.concatenate([np.zeros_like(arrival_ps), np.ones(int(keep.sum()), dtype=np.int64)])
    order = np.lexsort((kinds, times))
    backlog = np.cumsum(deltas[order])
    return BacklogTrace(times[order] / PS, backlog, horizon_ps / PS)


def _simulate_sliding(params: RtParams, horizon_rounds: int, j_max: int) -> SimResult:
    ts = _ps(params.T_s)
    tl = _ps(params.T_l)
    c = params.c * PS
    horizon_ps = horizon_rounds * ts

    def arrived(t):
        return min(t // ts, horizon_rounds)

    t = params.r * ts
    decoded = 0
    waits = []
    done_t, done_n = [], []
    for _ in range(j_max):
        n = arrived(t) - decoded
        wait = tl + int(round(c * n))
        t += wait
        decoded += n
        waits.append(wait / PS)
        done_t.append(t)
        done_n.append(n)
    if t > horizon_ps:
        raise ScheduleError(
            f"{j_max} feedforward gates need {t / PS:.6g} s, horizon is {horizon_ps / PS:.6g} s")
    # keep draining after the last gate
    while t < horizon_ps:
        n = arrived(t) - decoded
        if n == 0:
            t = (t // ts + 1) * ts
            continue
        t += int(round(c * n))
        decoded += n
        done_t.append(t)
        done_n.append(n)
    arrivals = np.arange(1, horizon_rounds + 1, dtype=np.int64) * ts
    trace = _trace(arrivals, np.array(done_t, dtype=np.int64), np.array(done_n, dtype=np.int64), horizon_ps)
    analytic = [wait_time_recurrence(params, j) for j in range(1, j_max + 1)]
    return SimResult("sliding", trace, waits, analytic,
                     gate_rounds=[], n_par=1)


def _simulate_parallel(params: RtParams, window: WindowParams, horizon_rounds: int,
                       schedule: Sequence[int], compiled: Optional[bool]) -> SimResult:
    if window.N_par is None:
        raise ParameterError("N_par", "parallel mode needs a worker count")
    period = _ps(params.T_s + params.T_l)
    t_dec = _ps(window.T_DEC)
    use_compiled = HAVE_COMPILED if compiled is None else compiled
    if use_compiled and not HAVE_COMPILED:
        raise RuntimeError("compiled backlog scheduler is not built")
    runner = schedule_compiled if use_compiled else schedule_python
    commit_fin, cleanup_fin = runner(horizon_rounds, window.n_com, window.n_W, window.n_buf,
                                     window.spatial_regions, window.N_par, t_dec, period)
    commit_fin = np.asarray(commit_fin, dtype=np.int64)
    cleanup_fin = np.asarray(cleanup_fin, dtype=np.int64)
    g_len = window.generation_rounds
    starts = np.arange(commit_fin.size, dtype=np.int64) * g_len
    c_end = np.minimum(starts + window.n_com, horizon_rounds)
    w_end = np.minimum(starts + g_len, horizon_rounds)
    has_w = cleanup_fin >= 0
    done_t = np.concatenate([commit_fin, cleanup_fin[has_w]])
    done_n = np.concatenate([c_end - starts, (w_end - c_end)[has_w]])
    horizon_ps = horizon_rounds * period
    arrivals = np.arange(1, horizon_rounds + 1, dtype=np.int64) * period
    trace = _trace(arrivals, done_t, done_n, horizon_ps)

    # a gate at round L needs every region that starts before L
    region_done = np.maximum(commit_fin, np.where(has_w, cleanup_fin, 0))
    waits = []
    for L in schedule:
        last_gen = (L - 1) // g_len
        ready = int(region_done[: last_gen + 1].max())
        waits.append(max(0, ready - L * period) / PS)
    return SimResult("parallel", trace, waits, None, gate_rounds=list(schedule), n_par=window.N_par)


def simulate_stream(params: RtParams, window: Optional[WindowParams] = None, horizon_rounds: int = 100_000,
                    schedule: Optional[Sequence[int]] = None, *, mode: Optional[str] = None,
                    compiled: Optional[bool] = None) -> SimResult:
    """Run the backlog model.

    ``mode`` defaults to ``"parallel"`` when a window is given and
    ``"sliding"`` otherwise.  In sliding mode the feedforward schedule is
    ``params.j_max`` back-to-back gates; in parallel mode ``schedule`` lists
    the rounds at which gates fire (default every ``r`` rounds, ``j_max``
    times).
    """
    mode = mode or ("parallel" if window is not None else "sliding")
    if isinstance(horizon_rounds, bool) or not isinstance(horizon_rounds, int) or horizon_rounds < 1:
        raise ParameterError("horizon_rounds", f"must be a positive integer, got {horizon_rounds!r}")
    if mode == "sliding":
        if schedule is not None and len(schedule) != params.j_max:
            raise ParameterError("schedule", "sliding mode fires j_max gates back to back")
        return _simulate_sliding(params, horizon_rounds, params.j_max)
    if mode != "parallel":
        raise ParameterError("mode", f"unknown mode {mode!r}")
    if window is None:
        raise ParameterError("window", "parallel mode needs window parameters")
    if horizon_rounds < window.n_com:
        raise ParameterError("horizon_rounds", "shorter than one commit region")
    if schedule is None:
        schedule = [params.r * j for j in range(1, params.j_max + 1)]
    for L in schedule:
        if not 1 <= L <= horizon_rounds:
            raise ScheduleError(f"gate at round {L} lies outside the {horizon_rounds}-round horizon")
    return _simulate_parallel(params, window, horizon_rounds, schedule, compiled)
