"""Command-line entry point: ``qlink {latency,simulate,plan,demo,selftest}``.

Exit codes: 0 success, 2 usage or parameter error, 1 runtime failure.
Result files under ``--out`` are deterministic for seeded commands; the
wall-clock duration lives only in ``report.json``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from pathlib import Path
from typing import List, Optional

from . import __version__
from .errors import ParameterError, QlinkError

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _json_dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(out: Path, name: str, text: str) -> str:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return str(path)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _load_json_arg(value: Optional[str], field: str):
    if value is None:
        return None
    text = value
    if not value.lstrip().startswith(("{", "[")):
        try:
            text = Path(value).read_text()
        except OSError as exc:
            raise ParameterError(field, f"cannot read {value!r}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParameterError(field, f"invalid JSON: {exc}") from None


# -- latency ---------------------------------------------------------------

def cmd_latency(args, out: Path) -> dict:
    from .rtlink import compute_stats, format_report, measure_loopback, run_echo, synthetic_trace
    from .rtlink.echo import UdpLink, parse_endpoint
    from .rtlink.measure import MAX_PACKETS

    if not 1 <= args.n <= MAX_PACKETS:
        raise UsageError(f"--n must be between 1 and {MAX_PACKETS}")
    if args.bin_ns <= 0:
        raise UsageError("--bin-ns must be positive")
    warmup = args.warmup
    if warmup not in ("auto", "none"):
        try:
            warmup = int(warmup)
        except ValueError:
            raise UsageError("--warmup takes auto, none or a sample count") from None
    elif warmup == "none":
        warmup = None

    config = {"n": args.n, "interval_ns": args.interval_ns, "bin_ns": args.bin_ns, "warmup": args.warmup}
    if args.synthetic:
        config.update(source="synthetic", seed=args.seed)
        rtts = [float(v) for v in synthetic_trace(args.n, min(200, args.n // 2), args.seed)]
        rows = [(i, "", "", repr(v)) for i, v in enumerate(rtts)]
    else:
        service = None
        try:
            if args.connect:
                config["source"] = f"udp:{args.connect}"
                link = UdpLink(parse_endpoint(args.connect))
            else:
                endpoint = args.endpoint or "inproc"
                service = run_echo(endpoint)
                config["source"] = "inproc" if endpoint == "inproc" else "udp"
                link = service.connect()
            try:
                result = measure_loopback(link, args.n, args.interval_ns, timeout=args.timeout)
            finally:
                link.close()
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        finally:
            if service is not None:
                service.stop()
        rtts = result.rtts
        rows = [(s.packet_number, s.send_ts, s.recv_ts, s.rtt_ns) for s in result.samples]
        config["lost"] = len(result.gaps)
    stats = compute_stats(rtts, args.bin_ns, warmup)
    files = {
        "samples": _write(out, "samples.csv", _csv_text(["packet_number", "send_ts_ns", "recv_ts_ns", "rtt_ns"], rows)),
        "stats": _write(out, "stats.json", _json_dump(stats.to_dict())),
        "histogram": _write(out, "histogram.dat", _histogram_dat(stats.histogram)),
    }
    if args.csv:
        sys.stdout.write(_csv_text(["packet_number", "send_ts_ns", "recv_ts_ns", "rtt_ns"], rows))
    elif not args.json:
        print(format_report(stats))
    return {"config": config, "results": stats.to_dict(), "files": files}


def _histogram_dat(hist) -> str:
    lines = ["# bin_start_ns bin_end_ns count"]
    for i, count in enumerate(hist.counts):
        lo = hist.start_ns + i * hist.width_ns
        lines.append(f"{lo:g} {lo + hist.width_ns:g} {count}")
    return "\n".join(lines) + "\n"


# -- simulate --------------------------------------------------------------

def cmd_simulate(args, out: Path) -> dict:
    from .qec import (RtParams, WindowParams, n_par_bound, n_par_bound_raw, reference_params,
                      simulate_stream, wait_time_closed_form, wait_time_recurrence)

    raw = _load_json_arg(args.params, "params")
    if raw is None:
        params = reference_params()
        window_raw = None
    else:
        if not isinstance(raw, dict):
            raise ParameterError("params", "must be a JSON object")
        raw = dict(raw)
        window_raw = raw.pop("window", None)
        params = RtParams.from_mapping(raw)
    window_raw = _load_json_arg(args.window, "window") if args.window else window_raw
    mode = args.mode or ("parallel" if window_raw is not None else "sliding")
    window = None
    if mode == "parallel":
        if window_raw is None:
            raise ParameterError("window", "parallel mode needs window parameters")
        if not isinstance(window_raw, dict):
            raise ParameterError("window", "must be a JSON object")
        window = WindowParams.from_mapping(window_raw)
        if window.N_par is None:
            window = window.with_workers(n_par_bound(window, params))
    res = simulate_stream(params, window, args.horizon_rounds, mode=mode)
    config = {"mode": mode, "params": params.to_dict(), "horizon_rounds": args.horizon_rounds,
              "window": window.to_dict() if window else None}
    summary = {"mode": mode, "bounded": res.trace.bounded, "peak_backlog": res.trace.peak(),
               "n_par": res.n_par, "simulated_wait_s": res.waits}
    if mode == "sliding":
        closed = [wait_time_closed_form(params, j) for j in range(1, params.j_max + 1)]
        rec = [wait_time_recurrence(params, j) for j in range(1, params.j_max + 1)]
        summary.update(closed_form_wait_s=closed, recurrence_wait_s=rec,
                       max_abs_gap_s=max(abs(a - b) for a, b in zip(res.waits, closed)))
        wait_rows = [(j + 1, repr(res.waits[j]), repr(closed[j]), repr(rec[j])) for j in range(params.j_max)]
        wait_header = ["j", "simulated_s", "closed_form_s", "recurrence_s"]
    else:
        summary.update(n_par_bound=n_par_bound(window, params), n_par_bound_raw=n_par_bound_raw(window, params),
                       gate_rounds=res.gate_rounds)
        wait_rows = [(L, repr(w)) for L, w in zip(res.gate_rounds, res.waits)]
        wait_header = ["gate_round", "simulated_s"]
    files = {
        "trace": _write(out, "trace.csv", _csv_text(["t_seconds", "undecoded_rounds"],
                                                    ((repr(t), n) for t, n in res.trace.rows()))),
        "waits": _write(out, "waits.csv", _csv_text(wait_header, wait_rows)),
        "summary": _write(out, "summary.json", _json_dump({"config": config, **summary})),
    }
    if not args.json:
        print(f"{mode}: peak backlog {summary['peak_backlog']} rounds, "
              f"{'bounded' if summary['bounded'] else 'growing'}")
        for row in wait_rows:
            print("  " + "  ".join(str(v) for v in row))
    return {"config": config, "results": summary, "files": files}


# -- plan ------------------------------------------------------------------

def cmd_plan(args, out: Path) -> dict:
    from .qec import CapacityInputs, plan_capacity

    inputs = CapacityInputs(mode=args.mode, params_per_model=args.params_per_model, cycle_rate_hz=args.cycle_hz,
                            n_logical_qubits=args.qubits, headroom_factor=args.headroom, depth=args.depth)
    report = plan_capacity(inputs).to_dict()
    config = {"mode": args.mode, "params_per_model": args.params_per_model, "cycle_rate_hz": args.cycle_hz,
              "n_logical_qubits": args.qubits, "headroom_factor": args.headroom, "depth": args.depth}
    files = {"plan": _write(out, "plan.json", _json_dump({"config": config, **report}))}
    if not args.json:
        print(f"{report['flop_per_s_per_qubit']:.6g} FLOP/s per logical qubit, "
              f"total {report['total_flop_per_s']:.6g} FLOP/s (headroom x{report['headroom_factor']:g})")
    return {"config": config, "results": report, "files": files}


# -- demo ------------------------------------------------------------------

def _parse_injection(text: str):
    try:
        r, q = text.split(":")
        return int(r), int(q)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROUND:QUBIT, got {text!r}") from None


def cmd_demo(args, out: Path) -> dict:
    from .demo import DemoRunner, default_devices, run_exhaustive
    from .devices import CONFIG_ENV, load_config

    if args.rounds < 1:
        raise UsageError("--rounds must be at least 1")
    cfg_path = args.config or os.environ.get(CONFIG_ENV)
    devices = load_config(cfg_path) if cfg_path else default_devices(args.p_flip, args.seed)
    config = {"rounds": args.rounds, "seed": args.seed, "p_flip": args.p_flip, "devices": devices,
              "injections": [list(i) for i in args.inject], "sim_mode": args.sim_mode,
              "exhaustive": args.exhaustive}
    if args.exhaustive:
        rows = run_exhaustive(args.rounds, seed=args.seed, devices=devices)
        results = {"cases": rows,
                   "all_zero": all(r["packed"]["logical_outcome"] == 0 for r in rows),
                   "paths_agree": all(r["agree"] for r in rows)}
        if not args.json:
            for r in rows:
                p = r["packed"]
                print(f"round {r['round']} qubit {r['qubit']}: verdict {p['verdict']}, "
                      f"outcome {p['logical_outcome']}, paths {'agree' if r['agree'] else 'DIFFER'}")
    else:
        with DemoRunner(args.rounds, devices, seed=args.seed) as runner:
            report = runner.run(args.inject, sim_mode=args.sim_mode)
        results = report.to_dict()
        if not args.json:
            inj = ", ".join(f"round {r} qubit {q}" for r, q in args.inject) or "none"
            print(f"injected: {inj}; decoder verdict: {report.verdict}; "
                  f"logical outcome: {report.logical_outcome}")
    files = {"demo": _write(out, "demo.json", _json_dump({"config": config, "results": results}))}
    return {"config": config, "results": results, "files": files}


# -- selftest --------------------------------------------------------------

def cmd_selftest(args, out: Path) -> dict:
    from .selftest import run_selftest

    checks = run_selftest(echo=not args.json)
    results = {"checks": checks, "passed": all(c["passed"] for c in checks)}
    if not results["passed"]:
        raise SelftestFailed(results)
    return {"config": {}, "results": results, "files": {}}


class SelftestFailed(Exception):
    def __init__(self, results):
        super().__init__("selftest failed")
        self.results = results


# -- parser ----------------------------------------------------------------

def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--json", action="store_true", default=d(False), help="print the run report as JSON")
    p.add_argument("--out", default=d("qlink-out"), metavar="DIR", help="directory for result files")
    p.add_argument("--seed", type=int, default=d(0), help="seed for randomized commands")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qlink", description="qlink runtime tools")
    parser.add_argument("--version", action="version", version=f"qlink {__version__}")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    lat = sub.add_parser("latency", help="loopback round-trip latency")
    _add_globals(lat, suppress=True)
    src = lat.add_mutually_exclusive_group()
    src.add_argument("--inproc", action="store_true", help="in-process echo (default)")
    src.add_argument("--endpoint", metavar="HOST:PORT", help="spawn a UDP echo bound here")
    src.add_argument("--connect", metavar="HOST:PORT", help="use an already running UDP echo")
    src.add_argument("--synthetic", action="store_true", help="seeded synthetic RTT trace")
    lat.add_argument("--n", type=int, default=1000)
    lat.add_argument("--interval-ns", type=int, default=0)
    lat.add_argument("--bin-ns", type=float, default=10)
    lat.add_argument("--warmup", default="auto", help="auto, none or a sample count")
    lat.add_argument("--timeout", type=float, default=1.0, help="receive timeout in seconds")
    lat.add_argument("--csv", action="store_true", help="print per-sample CSV")
    lat.set_defaults(func=cmd_latency)

    sim = sub.add_parser("simulate", help="syndrome backlog simulation")
    _add_globals(sim, suppress=True)
    sim.add_argument("--mode", choices=("sliding", "parallel"))
    sim.add_argument("--params", help="JSON object or file with c, r, T_s, T_l[, j_max, window]")
    sim.add_argument("--window", help="JSON object or file with n_com, n_buf, n_W, T_DEC[, N_par]")
    sim.add_argument("--horizon-rounds", type=int, default=100_000)
    sim.set_defaults(func=cmd_simulate)

    plan = sub.add_parser("plan", help="decoder compute capacity")
    _add_globals(plan, suppress=True)
    plan.add_argument("--mode", choices=("ai", "matching"), default="ai")
    plan.add_argument("--params-per-model", type=int)
    plan.add_argument("--cycle-hz", type=float)
    plan.add_argument("--qubits", type=int)
    plan.add_argument("--headroom", type=float, default=1)
    plan.add_argument("--depth", type=int)
    plan.set_defaults(func=cmd_plan)

    demo = sub.add_parser("demo", help="feedforward demo through the driver")
    _add_globals(demo, suppress=True)
    demo.add_argument("--rounds", type=int, default=5)
    demo.add_argument("--inject", type=_parse_injection, action="append", default=[], metavar="ROUND:QUBIT")
    demo.add_argument("--p-flip", type=float, default=0.0)
    demo.add_argument("--sim-mode", action="store_true", help="send syndromes as bit vectors")
    demo.add_argument("--exhaustive", action="store_true", help="every single-qubit injection, both paths")
    demo.add_argument("--config", help="driver configuration JSON (default: $QLINK_CONFIG)")
    demo.set_defaults(func=cmd_demo)

    st = sub.add_parser("selftest", help="fast acceptance checks")
    _add_globals(st, suppress=True)
    st.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out = Path(args.out)
    t0 = time.perf_counter()
    try:
        body = args.func(args, out)
    except (UsageError, ParameterError) as exc:
        print(f"qlink {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SelftestFailed as exc:
        if args.json:
            sys.stdout.write(_json_dump(exc.results))
        print("qlink selftest: FAILED", file=sys.stderr)
        return EXIT_RUNTIME
    except (QlinkError, OSError, RuntimeError, ValueError) as exc:
        print(f"qlink {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    report = {"command": args.command, "argv": argv, "version": __version__,
              "duration_s": time.perf_counter() - t0, **body}
    if args.command != "selftest":
        report["files"]["report"] = str(out / "report.json")
        _write(out, "report.json", _json_dump(report))
    if args.json:
        sys.stdout.write(_json_dump(report))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
