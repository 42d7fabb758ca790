"""End-to-end feedforward demo: VPPU kernel streaming syndromes to a decoder device.

The kernel prepares a resource state with a bounded repeat-until-success
loop, runs ``rounds`` stabilizer rounds of a distance-3 repetition code while
sending each round's packed syndrome to the decoder, asks the decoder for the
logical-flip bit, XORs it into the raw logical readout and, if the corrected
outcome is 1, plays the conditional correction pulse.

``sim_mode`` runs the same circuit on the host against the physical backend
and hands syndromes to the decoder as bit vectors through the simulation
callback instead of packed integers.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

from .device import Capability
from .driver import Driver
from .errors import KernelError, ParameterError
from .vppu.backend import RepetitionBackend

DEFAULT_ATTEMPTS = 16
BUDGET_EXHAUSTED = 0xFF
N_DATA = 3

# channel/waveform ids used in pulses; arbitrary but fixed
PREP_CH, PREP_WF, PREP_DUR = 4, 1, 10
STAB_CH, STAB_WF, STAB_DUR = 5, 2, 20
S_CH, S_WF, S_DUR = 6, 3, 8


def default_devices(p_flip: float = 0.0, seed: int = 0, p_rus_fail: float = 0.0) -> List[dict]:
    return [
        {"name": "vppu0", "kind": "vppu",
         "params": {"n_data": N_DATA, "p_flip": p_flip, "seed": seed, "p_rus_fail": p_rus_fail}},
        {"name": "decoder", "kind": "decoder", "params": {"n_data": N_DATA}},
    ]


def demo_source(decoder_uid: int, callback_ids: dict, rounds: int, attempts: int = DEFAULT_ATTEMPTS,
                target: Optional[str] = None) -> str:
    """Assembly text of the demo kernel for a decoder at ``decoder_uid``."""
    if rounds < 1:
        raise ParameterError("rounds", "need at least one stabilizer round")
    if attempts < 1:
        raise ParameterError("attempts", "need at least one attempt")
    logical, flag = N_DATA - 1, N_DATA
    enq, dec, reset = (callback_ids[n] for n in ("enqueue_syndromes_ui64", "decode", "reset"))
    lines = [".kernel feedforward_demo", ".result 1"]
    if target is not None:
        lines.append(f".target {target}")
    lines.append("    LOADI r6, 0")
    for _ in range(attempts):
        lines += [f"    PULSE {PREP_CH}, {PREP_WF}, {PREP_DUR}",
                  f"    MEASURE {flag}, r6",
                  "    BRNZ r6, prepared"]
    lines += [f"    LOADI r0, {BUDGET_EXHAUSTED}", "    HALT",
              "prepared:",
              f"    SENDCB {decoder_uid}, {reset}, r6"]
    for k in range(rounds):
        lines += [f"    LOADI r3, 0          ; round {k}",
                  f"    PULSE {STAB_CH}, {STAB_WF}, {STAB_DUR}"]
        lines += [f"    MEASURE {ch}, r3" for ch in range(N_DATA - 1)]
        lines.append(f"    SENDCB {decoder_uid}, {enq}, r3")
    lines += ["    LOADI r4, 0",
              f"    MEASURE {logical}, r4",
              f"    SENDCB {decoder_uid}, {dec}, r4",
              "    RECVCB r5",
              "    XORR r0, r4, r5",
              "    BRNZ r0, correct",
              "    HALT",
              "correct:",
              f"    PULSE {S_CH}, {S_WF}, {S_DUR}",
              "    HALT"]
    return "\n".join(lines) + "\n"


@dataclass
class DemoReport:
    path: str
    rounds: int
    injected: List[Tuple[int, int]]
    verdict: str
    logical_outcome: int
    raw_logical: int
    correction_applied: bool
    attempts_used: int
    syndromes: List[List[int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["injected"] = [{"round": r, "qubit": q} for r, q in self.injected]
        return d


class DemoRunner:
    """Holds an initialized driver and the loaded kernel across many runs.

    ``devices`` are configuration dicts or ``(name, Device)`` pairs.  The
    first quantum-control device runs the kernel; it must expose ``backend``
    (a ``RepetitionBackend``), ``seed`` and ``last_state``.  The first device
    with an ``enqueue_syndromes_ui64`` callback decodes.
    """

    def __init__(self, rounds: int = 5, devices: Optional[Sequence] = None, *,
                 p_flip: float = 0.0, seed: int = 0, attempts: int = DEFAULT_ATTEMPTS):
        self.rounds = rounds
        self.attempts = attempts
        self.driver = Driver().initialize(devices if devices is not None else default_devices(p_flip, seed))
        records = list(self.driver.registry)
        qpus = [r for r in records if Capability.QUANTUM_CONTROL in r.capabilities]
        decoders = [r for r in records if "enqueue_syndromes_ui64" in r.callback_registry]
        if not qpus or not decoders:
            self.driver.shutdown()
            raise ParameterError("devices", "demo needs a quantum_control device and a decoder device")
        self.vppu, self.decoder = qpus[0], decoders[0]
        ids = {e.name: e.callback_id for e in self.decoder.callback_registry.values()}
        self.source = demo_source(self.decoder.uid, ids, rounds, attempts, target=self.vppu.name)
        self.kernel = self.driver.load_kernel(self.source)

    @property
    def backend(self) -> RepetitionBackend:
        return self.vppu.impl.backend

    def close(self) -> None:
        self.driver.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    def _inject(self, injections):
        self.backend.clear_injections()
        for r, q in injections:
            if not 0 <= r < self.rounds:
                raise ParameterError("inject", f"round {r} outside 0..{self.rounds - 1}")
            self.backend.inject_error(r, q)

    def run(self, injections: Sequence[Tuple[int, int]] = (), sim_mode: bool = False) -> DemoReport:
        self._inject(injections)
        if sim_mode:
            return self._run_host(list(injections))
        dec = self.decoder.impl
        n_verdicts = len(dec.verdicts)
        result = self.driver.malloc(1)
        try:
            outcome = self.driver.launch_kernel(self.kernel, [], result)
            value = self.driver.read(result)[0]
        finally:
            self.driver.free(result)
        if value == BUDGET_EXHAUSTED:
            raise KernelError(f"repeat-until-success budget of {self.attempts} attempts exhausted")
        state = outcome.states[self.vppu.uid]
        flag = N_DATA
        attempts_used = sum(1 for ev in state.trace if ev.kind == "MEASURE" and ev.payload[0] == flag)
        applied = any(ev.kind == "PULSE" and ev.payload[0] == S_CH for ev in state.trace)
        if len(dec.verdicts) != n_verdicts + 1:
            raise KernelError("decoder produced no verdict")
        verdict = dec.verdicts[-1]
        syndromes = _syndromes_from_events(verdict.detection_events)
        return DemoReport("packed", self.rounds, list(injections), _verdict(verdict.logical_flip),
                          value, state.regs[4] & 1, applied, attempts_used, syndromes)

    def _run_host(self, injections) -> DemoReport:
        """Host-side circuit with bit-vector syndrome transfers."""
        backend = self.backend
        backend.reset(self.vppu.impl.seed)
        drv, dec = self.driver, self.decoder.uid
        used = 0
        for _ in range(self.attempts):
            used += 1
            if backend.measure(backend.flag_channel):
                break
        else:
            raise KernelError(f"repeat-until-success budget of {self.attempts} attempts exhausted")
        drv.device_call(dec, "reset", [("u64", 1)])
        syndromes = []
        for k in range(self.rounds):
            syn = [backend.measure(ch) for ch in range(N_DATA - 1)]
            syndromes.append(syn)
            drv.device_call(dec, "enqueue_syndromes_simulation", [("bits", syn), ("u64", k)])
        raw = backend.measure(backend.logical_channel)
        flip = drv.device_call(dec, "decode", [("u64", raw)], "u64")
        outcome = raw ^ flip
        return DemoReport("simulation", self.rounds, injections, _verdict(flip), outcome, raw,
                          bool(outcome), used, syndromes)


def _verdict(flip: int) -> str:
    return "flip" if flip else "no flip"


def _syndromes_from_events(events) -> List[List[int]]:
    out, prev = [], None
    for ev in events:
        cur = list(ev) if prev is None else [a ^ b for a, b in zip(ev, prev)]
        out.append(cur)
        prev = cur
    return out


def run_demo(rounds: int = 5, injections: Sequence[Tuple[int, int]] = (), *, p_flip: float = 0.0,
             seed: int = 0, sim_mode: bool = False, devices: Optional[Sequence[dict]] = None,
             attempts: int = DEFAULT_ATTEMPTS) -> DemoReport:
    with DemoRunner(rounds, devices, p_flip=p_flip, seed=seed, attempts=attempts) as runner:
        return runner.run(injections, sim_mode)


def single_error_cases(rounds: int) -> List[Tuple[int, int]]:
    return [(r, q) for r in range(rounds) for q in range(N_DATA)]


def run_exhaustive(rounds: int = 5, *, seed: int = 0, devices: Optional[Sequence[dict]] = None) -> List[dict]:
    """Every single-qubit injection through both syndrome paths."""
    rows = []
    with DemoRunner(rounds, devices, seed=seed) as runner:
        for case in single_error_cases(rounds):
            packed = runner.run([case])
            sim = runner.run([case], sim_mode=True)
            rows.append({"round": case[0], "qubit": case[1],
                         "packed": packed.to_dict(), "simulation": sim.to_dict(),
                         "agree": (packed.verdict, packed.logical_outcome) == (sim.verdict, sim.logical_outcome)})
    return rows
