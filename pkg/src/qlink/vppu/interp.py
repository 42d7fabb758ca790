"""VPPU execution: state, trace, and kernel selection.

``execute`` decodes a program into flat operand columns and hands them to the
compiled interpreter core when it is importable, otherwise to
``run_python``.  Both cores share one contract and are differential-tested.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Protocol, Sequence, Tuple, Union

from ..errors import ProgramFault
from .isa import N_REGS, Instruction, Op, decode_program

MASK64 = (1 << 64) - 1
DEFAULT_MAX_TICKS = 10_000_000

# trace kind codes shared with the compiled core
EV_PULSE, EV_MEASURE, EV_SENDCB, EV_RECVCB, EV_HALT = range(5)
EVENT_NAMES = ("PULSE", "MEASURE", "SENDCB", "RECVCB", "HALT")


class CallbackBridge(Protocol):
    def resolve(self, device: int, callback_id: int) -> None: ...

    def call(self, device: int, callback_id: int, value: int) -> Optional[int]: ...


class TraceEvent(NamedTuple):
    tick: int
    kind: str
    payload: Tuple[int, ...]


@dataclass
class VppuState:
    pc: int = 0
    regs: List[int] = field(default_factory=lambda: [0] * N_REGS)
    dtd_clock: int = 0
    halted: bool = False
    trace: List[TraceEvent] = field(default_factory=list)
    pending: List[int] = field(default_factory=list)
    trigger_tick: int = 0

    def trace_bytes(self) -> bytes:
        """Canonical byte form of the trace, final clock and registers."""
        out = bytearray()
        for ev in self.trace:
            out += struct.pack("<QB", ev.tick, EVENT_NAMES.index(ev.kind))
            out += struct.pack(f"<B{len(ev.payload)}Q", len(ev.payload), *ev.payload)
        out += struct.pack("<QQ?", self.dtd_clock, self.pc, self.halted)
        out += struct.pack(f"<{N_REGS}Q", *self.regs)
        return bytes(out)


def columns(program: Sequence[Instruction]):
    """Split instructions into (op, f0, f1, f2) integer columns."""
    ops, f0, f1, f2 = [], [], [], []
    for ins in program:
        padded = tuple(ins.operands) + (0, 0, 0)
        ops.append(int(ins.op))
        f0.append(padded[0])
        f1.append(padded[1])
        f2.append(padded[2])
    return ops, f0, f1, f2


def run_python(ops, f0, f1, f2, regs, backend, bridge, max_ticks):
    """Reference-speed interpreter loop; returns (pc, clock, halted, events, pending, regs)."""
    regs = list(regs)
    n = len(ops)
    pc = 0
    clock = 0
    events = []
    pending = []
    while True:
        if pc >= n:
            raise ProgramFault("ran past the end of the program", pc=pc)
        op = ops[pc]
        a = f0[pc]
        b = f1[pc]
        c = f2[pc]
        tick = clock
        nxt = pc + 1
        if op == 0x01:      # DELAY
            clock += a
        elif op == 0x02:    # PULSE
            events.append((tick, EV_PULSE, (a, b, c)))
            clock += c
        else:
            clock += 1
            if op == 0x00:
                pass
            elif op == 0x03:    # MEASURE
                try:
                    bit = int(backend.measure(a, tick)) & 1
                except Exception as exc:
                    raise ProgramFault(f"measurement failed: {exc}", pc=pc) from exc
                regs[b] = ((regs[b] << 1) | bit) & MASK64
                events.append((tick, EV_MEASURE, (a, bit)))
            elif op == 0x04:    # XORR
                regs[a] = regs[b] ^ regs[c]
            elif op == 0x05:    # LOADI
                regs[a] = b
            elif op == 0x06:    # SENDCB
                value = regs[c]
                events.append((tick, EV_SENDCB, (a, b, value)))
                try:
                    res = bridge.call(a, b, value)
                except Exception as exc:
                    raise ProgramFault(f"callback {a}:{b} failed: {exc}", pc=pc) from exc
                if res is not None:
                    pending.append(int(res) & MASK64)
            elif op == 0x07:    # RECVCB
                if not pending:
                    raise ProgramFault("RECVCB with no pending callback result", pc=pc)
                value = pending.pop(0)
                regs[a] = value
                events.append((tick, EV_RECVCB, (a, value)))
            elif op == 0x08:    # BRNZ
                if regs[a]:
                    nxt = b
            elif op == 0x09:    # JMP
                nxt = a
            elif op == 0x0A:    # HALT
                events.append((tick, EV_HALT, ()))
                return pc, clock, True, events, pending, regs
            else:
                raise ProgramFault(f"illegal opcode 0x{op:02x}", pc=pc)
        if clock > max_ticks:
            raise ProgramFault(f"tick budget of {max_ticks} exceeded", pc=pc)
        pc = nxt


try:
    if os.environ.get("QLINK_PURE"):
        raise ImportError("pure-Python kernels forced by QLINK_PURE")
    from ._interp_core import run_compiled
    HAVE_COMPILED = True
except ImportError:
    run_compiled = None
    HAVE_COMPILED = False


class _NoBridge:
    def resolve(self, device, callback_id):
        raise ProgramFault(f"no callback bridge to resolve SENDCB {device}:{callback_id}")

    def call(self, device, callback_id, value):
        raise ProgramFault("no callback bridge attached")


def execute(program: Union[bytes, Sequence[Instruction]], backend, bridge: Optional[CallbackBridge] = None,
            *, max_ticks: int = DEFAULT_MAX_TICKS, regs: Optional[Sequence[int]] = None,
            seed: Optional[int] = None, compiled: Optional[bool] = None) -> VppuState:
    """Run ``program`` to HALT and return the final state with its event trace.

    ``seed`` resets the backend first.  ``compiled`` forces a kernel choice;
    by default the compiled core is used when available.
    """
    if isinstance(program, (bytes, bytearray, memoryview)):
        program = decode_program(bytes(program))
    bridge = bridge if bridge is not None else _NoBridge()
    for pc, ins in enumerate(program):
        if ins.op is Op.SENDCB:
            try:
                bridge.resolve(ins.operands[0], ins.operands[1])
            except ProgramFault as exc:
                raise ProgramFault(exc.reason, pc=pc) from None
            except Exception as exc:
                raise ProgramFault(f"unresolvable SENDCB target: {exc}", pc=pc) from exc
    if seed is not None:
        backend.reset(seed)
    init = [0] * N_REGS
    if regs is not None:
        for i, v in enumerate(regs):
            init[i] = int(v) & MASK64
    cols = columns(program)
    use_compiled = HAVE_COMPILED if compiled is None else compiled
    if use_compiled and not HAVE_COMPILED:
        raise RuntimeError("compiled VPPU core is not built")
    runner = run_compiled if use_compiled else run_python
    pc, clock, halted, events, pending, final = runner(*cols, init, backend, bridge, max_ticks)
    trace = [TraceEvent(t, EVENT_NAMES[k], tuple(p)) for t, k, p in events]
    return VppuState(pc=pc, regs=list(final), dtd_clock=clock, halted=halted,
                     trace=trace, pending=list(pending))
