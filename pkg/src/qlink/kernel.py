"""Compiled-kernel representation and the compiler/executor plugin seams."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import List, Optional, Protocol, Sequence

from .device import DeviceRecord, Registry
from .errors import KernelError, ProgramFault


@dataclass(frozen=True)
class QControlProgram:
    target: int
    binary: bytes


@dataclass(frozen=True)
class CompiledKernel:
    kernel_name: str
    programs: tuple
    result_size: int = 0  # bytes returned through the result buffer, 0 for none

    def __post_init__(self):
        if not self.kernel_name:
            raise KernelError("kernel_name must be nonempty")
        targets = [p.target for p in self.programs]
        if len(set(targets)) != len(targets):
            raise KernelError(f"kernel {self.kernel_name!r} has two programs for one device")
        if not 0 <= self.result_size <= 8:
            raise KernelError("result_size must be between 0 and 8 bytes")


class Compiler(Protocol):
    """Architecture-specific compiler plugin.

    ``devices`` are the registry records of every quantum-control device the
    runtime knows about.
    """

    name: str

    def load_precompiled(self, binary: bytes, devices: Sequence[DeviceRecord]) -> CompiledKernel: ...

    def jit_compile(self, source: str, devices: Sequence[DeviceRecord]) -> CompiledKernel: ...


@dataclass
class LaunchOutcome:
    states: dict = field(default_factory=dict)   # uid -> device-specific final state
    trigger_tick: int = 0
    result: Optional[int] = None


class CollectiveExecutor:
    """Upload every program, then trigger all targets at one common DTD tick.

    Uploads are all-or-nothing: if any upload fails the already uploaded
    programs are discarded and nothing is triggered.  Triggered devices run on
    their own threads and are joined before returning.
    """

    name = "collective"

    def __init__(self, sync_margin_ticks: int = 16):
        self.sync_margin_ticks = sync_margin_ticks

    def upload(self, registry: Registry, kernel: CompiledKernel) -> None:
        done = []
        try:
            for prog in kernel.programs:
                registry.upload_program(prog.target, prog.binary)
                done.append(prog.target)
        except Exception as exc:
            for uid in done:
                registry.discard_program(uid)
            name = registry.record(prog.target).name if prog.target in registry else prog.target
            raise KernelError(f"upload to device {name!r} failed: {exc}") from exc

    def trigger(self, registry: Registry, kernel: CompiledKernel, args: Sequence[bytes]) -> LaunchOutcome:
        targets = [p.target for p in kernel.programs]
        tick = max((registry.dtd_now(u) for u in targets), default=0) + self.sync_margin_ticks
        outcome = LaunchOutcome(trigger_tick=tick)
        if not targets:
            return outcome
        barrier = threading.Barrier(len(targets))
        errors = {}

        def run(uid):
            try:
                barrier.wait()
                outcome.states[uid] = registry.trigger(uid, args, tick)
            except ProgramFault as exc:
                errors[uid] = exc.on_device(registry.record(uid).name)
            except Exception as exc:
                errors[uid] = KernelError(f"device {registry.record(uid).name!r}: {exc}")

        threads = [threading.Thread(target=run, args=(u,), name=f"qlink-trigger-{u}") for u in targets]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            raise errors[min(errors)]
        return outcome

    def launch(self, registry: Registry, kernel: CompiledKernel, args: Sequence[bytes]) -> LaunchOutcome:
        self.upload(registry, kernel)
        return self.trigger(registry, kernel, args)
