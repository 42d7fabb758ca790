"""Compiled vs pure-Python timing of the VPPU interpreter and the backlog scheduler.

``vppu-loop`` times the interpreter loop on pre-decoded columns; ``vppu``
includes decoding and trace construction.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``.
"""
import argparse
import time

from qlink.qec import WindowParams, reference_params, sim
from qlink.vppu import RepetitionBackend, assemble, execute, interp
from qlink.vppu.isa import decode_program


def _straight_program(n: int) -> bytes:
    body = []
    for i in range(n):
        body.append(f"PULSE {i % 4}, 1, 2")
        body.append(f"MEASURE {i % 3}, r{1 + i % 8}")
        body.append(f"XORR r9, r9, r{1 + i % 8}")
        body.append(f"LOADI r10, {i}")
    body.append("HALT")
    return assemble("\n".join(body))


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--instructions", type=int, default=20_000)
    ap.add_argument("--horizon", type=int, default=1_000_000)
    args = ap.parse_args(argv)

    rows = []
    prog = _straight_program(args.instructions // 4)
    backend = RepetitionBackend(p_flip=0.01)
    cols = interp.columns(decode_program(prog))
    loops = (("pure", interp.run_python), ("compiled", interp.run_compiled))
    for label, loop in loops:
        if loop is None:
            rows.append(("vppu-loop", label, None))
            continue
        t = best_of(lambda: loop(*cols, [0] * 16, backend, None, 10**9), args.repeat)
        rows.append(("vppu-loop", label, t))
    for label, compiled in (("pure", False), ("compiled", True)):
        if compiled and not interp.HAVE_COMPILED:
            rows.append(("vppu", label, None))
            continue
        t = best_of(lambda: execute(prog, backend, seed=1, compiled=compiled), args.repeat)
        rows.append(("vppu", label, t))

    params = reference_params()
    window = WindowParams(n_com=20, n_buf=20, n_W=20, T_DEC=1e-3, N_par=3)
    for label, compiled in (("pure", False), ("compiled", True)):
        if compiled and not sim.HAVE_COMPILED:
            rows.append(("backlog", label, None))
            continue
        t = best_of(lambda: sim.simulate_stream(params, window, args.horizon, compiled=compiled), args.repeat)
        rows.append(("backlog", label, t))

    print(f"{'kernel':<10}{'variant':<10}{'best (s)':>12}")
    times = {}
    for kernel, label, t in rows:
        times[(kernel, label)] = t
        print(f"{kernel:<10}{label:<10}{'not built' if t is None else f'{t:.4f}':>12}")
    for kernel in ("vppu-loop", "vppu", "backlog"):
        pure, comp = times[(kernel, "pure")], times[(kernel, "compiled")]
        if pure and comp:
            print(f"{kernel}: compiled is {pure / comp:.1f}x faster")


if __name__ == "__main__":
    main()
