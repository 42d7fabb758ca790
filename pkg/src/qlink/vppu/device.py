"""The VPPU as a registered quantum-control device, plus its assembly compiler."""
from __future__ import annotations

from typing import List, Optional, Sequence

from ..device import Capability, ClockDomains, Device, DeviceRecord
from ..errors import AssemblyError, CompileError, DecodeError, ProgramFault
from ..kernel import CompiledKernel, QControlProgram
from .backend import RepetitionBackend
from .interp import DEFAULT_MAX_TICKS, VppuState, execute
from .isa import N_REGS, assemble, decode_program

ARG_BASE_REG = 1  # kernel argument i is preloaded into register ARG_BASE_REG + i


class VppuDevice(Device):
    """Deterministic pulse-processor emulator.

    Each trigger resets the physical backend with ``seed`` so a launch is a
    pure function of program, seed and scheduled injections.  Kernel
    arguments (at most 8 bytes each) are loaded little-endian into r1, r2, ...
    and the kernel result is read from r0.
    """

    capabilities = Capability.QUANTUM_CONTROL
    single_threaded = True

    def __init__(self, backend=None, *, seed: int = 0, clock: ClockDomains = ClockDomains(),
                 max_ticks: int = DEFAULT_MAX_TICKS, compiled: Optional[bool] = None):
        self.backend = backend if backend is not None else RepetitionBackend(seed=seed)
        self.seed = seed
        self.clock = clock
        self.max_ticks = max_ticks
        self.compiled = compiled
        self.bridge = None
        self.program = None
        self.last_state: Optional[VppuState] = None
        self._epoch = 0

    def upload_program(self, binary: bytes) -> None:
        self.program = decode_program(binary)

    def discard_program(self) -> None:
        self.program = None

    def trigger(self, args: Sequence[bytes], trigger_tick: int) -> VppuState:
        if self.program is None:
            raise ProgramFault("trigger without an uploaded program")
        if len(args) > N_REGS - ARG_BASE_REG:
            raise ProgramFault(f"too many kernel arguments ({len(args)})")
        regs = [0] * N_REGS
        for i, arg in enumerate(args):
            if len(arg) > 8:
                raise ProgramFault(f"kernel argument {i} is {len(arg)} bytes, registers hold 8")
            regs[ARG_BASE_REG + i] = int.from_bytes(bytes(arg), "little")
        state = execute(self.program, self.backend, self.bridge, max_ticks=self.max_ticks,
                        regs=regs, seed=self.seed, compiled=self.compiled)
        state.trigger_tick = trigger_tick
        self._epoch = trigger_tick + state.dtd_clock
        self.last_state = state
        return state

    def dtd_now(self) -> int:
        return self._epoch

    def dtd_time_ns(self) -> int:
        return self.clock.dtd_ns(self._epoch)


def _split_sections(source: str):
    """Parse ``.kernel``/``.result``/``.target`` directives out of assembly text."""
    name = "kernel"
    result_size = 0
    sections: List[list] = []  # [target token or None, [lines]]
    current = [None, []]
    for lineno, line in enumerate(source.splitlines(), start=1):
        code = line.split(";", 1)[0].strip()
        if code.startswith("."):
            parts = code.split()
            directive, operands = parts[0].lower(), parts[1:]
            if len(operands) != 1:
                raise CompileError(f"line {lineno}: {directive} takes one operand")
            if directive == ".kernel":
                name = operands[0]
            elif directive == ".result":
                try:
                    result_size = int(operands[0], 0)
                except ValueError:
                    raise CompileError(f"line {lineno}: bad result size {operands[0]!r}") from None
            elif directive == ".target":
                if current[1] or current[0] is not None:
                    sections.append(current)
                current = [operands[0], []]
            else:
                raise CompileError(f"line {lineno}: unknown directive {directive}")
            current[1].append("")  # keep line numbers aligned
        else:
            current[1].append(line)
    sections.append(current)
    return name, result_size, sections


class VppuCompiler:
    """Assembly-text and raw-binary loader for VPPU targets.

    Besides plain instructions the source may carry ``.kernel NAME``,
    ``.result NBYTES`` and ``.target DEVICE`` directives; ``DEVICE`` is a
    registered name or ``#uid``.  Without ``.target`` the program goes to the
    first quantum-control device.
    """

    name = "vppu-asm"

    @staticmethod
    def _resolve(token, devices: Sequence[DeviceRecord]) -> int:
        if token is None:
            if not devices:
                raise CompileError("no quantum_control device available to target")
            return devices[0].uid
        if token.startswith("#"):
            try:
                return int(token[1:], 0)
            except ValueError:
                raise CompileError(f"bad device uid {token!r}") from None
        for rec in devices:
            if rec.name == token:
                return rec.uid
        raise CompileError(f"no quantum_control device named {token!r}")

    def jit_compile(self, source: str, devices: Sequence[DeviceRecord]) -> CompiledKernel:
        if not source or not source.strip():
            raise CompileError("empty kernel source")
        name, result_size, sections = _split_sections(source)
        programs = []
        for token, lines in sections:
            text = "\n".join(lines)
            if token is None and not text.strip():
                continue
            try:
                binary = assemble(text)
            except AssemblyError as exc:
                raise CompileError(f"kernel {name!r}: {exc}") from exc
            programs.append(QControlProgram(self._resolve(token, devices), binary))
        if not programs:
            raise CompileError("kernel source contains no instructions")
        return CompiledKernel(name, tuple(programs), result_size)

    def load_precompiled(self, binary: bytes, devices: Sequence[DeviceRecord], *,
                         kernel_name: str = "precompiled", target: Optional[int] = None,
                         result_size: int = 0) -> CompiledKernel:
        if not binary:
            raise CompileError("empty kernel binary")
        try:
            decode_program(bytes(binary))
        except DecodeError as exc:
            raise CompileError(str(exc)) from exc
        uid = target if target is not None else self._resolve(None, devices)
        return CompiledKernel(kernel_name, (QControlProgram(uid, bytes(binary)),), result_size)
