"""Fast in-package health checks, a reduced form of the acceptance suite."""
from __future__ import annotations

import random
import time
from typing import Callable, List, Tuple

from .errors import FrameError


def _wait_times() -> Tuple[bool, str]:
    from .qec import reference_params, wait_time_closed_form, wait_time_recurrence

    worst = 0.0
    for c in (0.7e-6, 1.4e-6, 2.1e-6):
        p = reference_params(c)
        for j in range(1, 31):
            a, b = wait_time_closed_form(p, j), wait_time_recurrence(p, j)
            worst = max(worst, abs(a - b) / abs(b))
    return worst <= 1e-9, f"max relative gap {worst:.2e}"


def _sliding_sim() -> Tuple[bool, str]:
    from .qec import reference_params, simulate_stream

    p = reference_params(0.7e-6)
    res = simulate_stream(p, horizon_rounds=20_000)
    gap = max(abs(a - b) for a, b in zip(res.waits, res.analytic_waits))
    return gap <= p.T_s, f"max gap {gap * 1e6:.3f} us vs T_s {p.T_s * 1e6:.1f} us"


def _parallel_bound() -> Tuple[bool, str]:
    from .qec import WindowParams, n_par_bound, n_par_bound_raw, reference_params, simulate_stream

    p = reference_params()
    w = WindowParams(n_com=20, n_buf=20, n_W=20, T_DEC=1e-3)
    n = n_par_bound(w, p)
    ok = simulate_stream(p, w.with_workers(n), 20_000).trace.bounded
    if n_par_bound_raw(w, p) >= 2:
        ok = ok and not simulate_stream(p, w.with_workers(n - 1), 20_000).trace.bounded
    return ok, f"N_par bound {n}"


def _capacity() -> Tuple[bool, str]:
    from .qec import CapacityInputs, plan_capacity

    r = plan_capacity(CapacityInputs("ai", 25_000_000, 1e6, 100, 10))
    ok = r.flop_per_s_per_qubit == 50e12 and r.total_flop_per_s == 5e16
    m = plan_capacity(CapacityInputs("matching"))
    ok = ok and m.anchors == {"100x1000000": 200e12, "1000x1000000000": 1e15}
    return ok, f"total {r.total_flop_per_s:g} FLOP/s"


def _codec() -> Tuple[bool, str]:
    from .rtlink import Frame, LoopbackPayload, decode_frame, encode_frame

    golden = bytes.fromhex("000000000000000000000102" "0304") + bytes(18)
    ok = LoopbackPayload(0x0102, 0x0304).encode() == golden
    frame = Frame.make_loopback(7, 11, 3)
    ok = ok and decode_frame(encode_frame(frame)) == frame
    rng = random.Random(0)
    for _ in range(2000):
        data = rng.randbytes(rng.randrange(0, 64))
        try:
            decode_frame(data)
        except FrameError:
            pass
    return ok, "golden bytes and 2000 fuzz inputs"


def _latency_stats() -> Tuple[bool, str]:
    from .rtlink import compute_stats, synthetic_trace

    s = compute_stats(synthetic_trace(seed=0))
    ok = abs(s.mean_ns - 3839) <= 5 and abs(s.stddev_ns - 35) <= 5 and 150 <= s.warmup_boundary <= 250
    return ok, f"mean {s.mean_ns:.1f} ns, std {s.stddev_ns:.1f} ns, warm-up {s.warmup_boundary}"


def _demo() -> Tuple[bool, str]:
    from .demo import run_exhaustive

    rows = run_exhaustive(5)
    ok = len(rows) == 15 and all(r["packed"]["logical_outcome"] == 0 and r["agree"] for r in rows)
    return ok, f"{len(rows)} single-error cases"


def _vppu_cores() -> Tuple[bool, str]:
    from .vppu import RepetitionBackend, execute
    from .vppu.interp import HAVE_COMPILED
    from .vppu.isa import Instruction, Op

    if not HAVE_COMPILED:
        return True, "compiled core not built, skipped"
    rng = random.Random(1)
    for _ in range(50):
        prog = []
        for _ in range(rng.randrange(1, 30)):
            op = rng.choice([Op.NOP, Op.DELAY, Op.PULSE, Op.MEASURE, Op.XORR, Op.LOADI])
            operands = {
                Op.NOP: (), Op.DELAY: (rng.randrange(100),),
                Op.PULSE: (rng.randrange(8), rng.randrange(100), rng.randrange(50)),
                Op.MEASURE: (rng.randrange(4), rng.randrange(16)),
                Op.XORR: (rng.randrange(16), rng.randrange(16), rng.randrange(16)),
                Op.LOADI: (rng.randrange(16), rng.getrandbits(32)),
            }[op]
            prog.append(Instruction(op, operands))
        prog.append(Instruction(Op.HALT))
        a = execute(prog, RepetitionBackend(p_flip=0.3), seed=5, compiled=False)
        b = execute(prog, RepetitionBackend(p_flip=0.3), seed=5, compiled=True)
        if a.trace_bytes() != b.trace_bytes():
            return False, "compiled and pure interpreters diverged"
    return True, "50 random programs identical"


CHECKS: List[Tuple[str, Callable[[], Tuple[bool, str]]]] = [
    ("wait-time closed form vs recurrence", _wait_times),
    ("sliding simulation vs analytic waits", _sliding_sim),
    ("parallel worker bound", _parallel_bound),
    ("capacity planner", _capacity),
    ("frame codec", _codec),
    ("latency statistics", _latency_stats),
    ("end-to-end demo", _demo),
    ("vppu interpreter cores", _vppu_cores),
]


def run_selftest(echo: bool = True) -> List[dict]:
    results = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as exc:  # a crash is a failed check, not a crashed run
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        dt = time.perf_counter() - t0
        results.append({"name": name, "passed": bool(passed), "detail": detail, "seconds": round(dt, 3)})
        if echo:
            print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail} ({dt:.2f} s)")
    return results
