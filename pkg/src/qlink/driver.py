"""Host-side driver: device lifecycle, memory, kernels and device calls."""
from __future__ import annotations

import itertools
import threading
import time
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from . import marshal
from .device import Capability, Device, DevicePtr, Registry
from .devices import HostDevice, build_device
from .errors import (
    AllocationError,
    CallbackError,
    CompileError,
    DriverStateError,
    InitializationError,
    KernelError,
    MarshalError,
    ParameterError,
    TransportError,
)
from .kernel import CollectiveExecutor, CompiledKernel, LaunchOutcome
from .rtlink.measure import measure_loopback
from .vppu.device import VppuCompiler

HOST_NAME = "host"
HostBuffer = Union[bytes, bytearray, memoryview]
DeviceRef = Union[int, str]


class DriverBridge:
    """Routes VPPU SENDCB instructions to registered callbacks.

    The register value is passed as one u64 argument in a host buffer.  A
    callback with a nonempty result hands it back little-endian as an int,
    which the VPPU queues for RECVCB.
    """

    def __init__(self, driver: "Driver"):
        self.driver = driver

    def resolve(self, device: int, callback_id: int) -> None:
        self.driver.registry.callback_by_id(device, callback_id)

    def call(self, device: int, callback_id: int, value: int) -> Optional[int]:
        registry = self.driver.registry
        entry = registry.callback_by_id(device, callback_id)
        arg = registry.malloc(self.driver.host_uid, 8)
        result = None
        try:
            registry.write(arg, marshal.encode("u64", value))
            if entry.result_size:
                result = registry.malloc(self.driver.host_uid, entry.result_size)
            registry.invoke_callback(device, entry.name, [arg], result)
            if result is None:
                return None
            return int.from_bytes(registry.read(result)[:8], "little")
        finally:
            registry.free(arg)
            if result is not None:
                registry.free(result)


class Driver:
    """Entry point of the runtime.

    ``initialize`` registers the host as uid 0 and then every configured
    device in order.  All public methods are safe to call from several
    threads; per-device serialization happens in the registry.
    """

    def __init__(self, compiler=None, executor=None):
        self.registry = Registry()
        self.executor = executor if executor is not None else CollectiveExecutor()
        self._compilers: Dict[str, object] = {}
        self.register_compiler(compiler if compiler is not None else VppuCompiler())
        self._default_compiler = next(iter(self._compilers))
        self._kernels: Dict[int, CompiledKernel] = {}
        self._kernel_ids = itertools.count(1)
        self._state_lock = threading.Lock()
        self.initialized = False
        self.host_uid: Optional[int] = None
        self.bridge = DriverBridge(self)

    # -- lifecycle --------------------------------------------------------

    def initialize(self, devices: Iterable[Union[Mapping, Tuple[str, Device]]] = ()) -> "Driver":
        with self._state_lock:
            if self.initialized:
                raise DriverStateError("driver already initialized")
            host = HostDevice()
            self.host_uid = self.registry.register_device(HOST_NAME, impl=host)
            self._connect(self.host_uid, HOST_NAME)
            for entry in devices:
                name, impl = build_device(entry) if isinstance(entry, Mapping) else entry
                uid = self.registry.register_device(name, impl=impl)
                self._connect(uid, name)
            self.initialized = True
        return self

    def _connect(self, uid: int, name: str) -> None:
        impl = self.registry.record(uid).impl
        try:
            self.registry.connect(uid)
            if hasattr(impl, "bridge"):
                impl.bridge = self.bridge
            for cb_name, (fn, size) in impl.callbacks().items():
                self.registry.register_callback(uid, cb_name, fn, size)
        except Exception as exc:
            self._teardown()
            raise InitializationError(name, exc) from exc

    def _teardown(self) -> None:
        for rec in reversed(list(self.registry)):
            try:
                self.registry.disconnect(rec.uid)
            except Exception:
                pass

    def shutdown(self) -> None:
        with self._state_lock:
            if not self.initialized:
                return
            self._teardown()
            self.initialized = False

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()
        return False

    def _ready(self) -> None:
        if not self.initialized:
            raise DriverStateError("driver is not initialized")

    def uid(self, device: DeviceRef) -> int:
        if isinstance(device, str):
            return self.registry.uid_of(device)
        self.registry.record(device)
        return device

    @property
    def device_count(self) -> int:
        """Registered devices excluding the host."""
        return len(self.registry) - 1 if self.host_uid is not None else 0

    def device(self, ref: DeviceRef) -> Device:
        return self.registry.record(self.uid(ref)).impl

    # -- memory -----------------------------------------------------------

    def malloc(self, size_bytes: int, device: Optional[DeviceRef] = None) -> DevicePtr:
        self._ready()
        uid = self.host_uid if device is None else self.uid(device)
        return self.registry.malloc(uid, size_bytes)

    def free(self, ptr: DevicePtr) -> None:
        self._ready()
        self.registry.free(ptr)

    def read(self, ptr: DevicePtr) -> bytes:
        return self.registry.read(ptr)

    def memcpy(self, dst: Union[DevicePtr, bytearray, memoryview], src: Union[DevicePtr, HostBuffer],
               size_bytes: int) -> None:
        """Copy ``size_bytes`` between device regions and/or host buffers.

        A device-to-device copy between different devices is staged through
        a temporary host buffer.
        """
        self._ready()
        if isinstance(size_bytes, bool) or not isinstance(size_bytes, int) or size_bytes < 0:
            raise AllocationError(f"bad copy length {size_bytes!r}")
        for side, buf in (("source", src), ("destination", dst)):
            cap = buf.size_bytes if isinstance(buf, DevicePtr) else len(buf)
            if size_bytes > cap:
                raise AllocationError(f"copy of {size_bytes} bytes exceeds {cap}-byte {side}")
        if isinstance(src, DevicePtr):
            data = self.registry.read(src, size_bytes)
        else:
            data = bytes(memoryview(src)[:size_bytes])
        if isinstance(dst, DevicePtr):
            if isinstance(src, DevicePtr) and src.device != dst.device and dst.device != self.host_uid \
                    and src.device != self.host_uid:
                staging = self.registry.malloc(self.host_uid, max(size_bytes, 1))
                try:
                    self.registry.write(staging, data)
                    data = self.registry.read(staging, size_bytes)
                finally:
                    self.registry.free(staging)
            self.registry.write(dst, data)
        elif isinstance(dst, (bytearray, memoryview)):
            if isinstance(dst, memoryview) and dst.readonly:
                raise AllocationError("destination host buffer is read-only")
            dst[:size_bytes] = data
        else:
            raise AllocationError(f"cannot copy into {type(dst).__name__}")

    # -- kernels ----------------------------------------------------------

    def register_compiler(self, compiler) -> None:
        name = getattr(compiler, "name", type(compiler).__name__)
        self._compilers[name] = compiler

    def _compiler(self, compiler):
        if compiler is None:
            return self._compilers[self._default_compiler]
        if isinstance(compiler, str):
            try:
                return self._compilers[compiler]
            except KeyError:
                raise CompileError(f"no compiler named {compiler!r} registered") from None
        if compiler not in self._compilers.values():
            raise CompileError(f"compiler {compiler!r} is not registered")
        return compiler

    def quantum_devices(self):
        return [rec for rec in self.registry if Capability.QUANTUM_CONTROL in rec.capabilities]

    def load_kernel(self, source: Union[str, bytes], compiler=None, **options) -> int:
        """Compile assembly text or load a prebuilt binary; returns a kernel handle."""
        self._ready()
        comp = self._compiler(compiler)
        devices = self.quantum_devices()
        if isinstance(source, str):
            kernel = comp.jit_compile(source, devices)
        elif isinstance(source, (bytes, bytearray, memoryview)):
            kernel = comp.load_precompiled(bytes(source), devices, **options)
        else:
            raise CompileError(f"kernel source must be text or bytes, got {type(source).__name__}")
        for prog in kernel.programs:
            if prog.target not in self.registry:
                raise CompileError(f"kernel {kernel.kernel_name!r} targets unknown device uid {prog.target}")
            rec = self.registry.record(prog.target)
            if Capability.QUANTUM_CONTROL not in rec.capabilities:
                raise CompileError(f"kernel {kernel.kernel_name!r} targets {rec.name!r}, "
                                   "which lacks quantum_control")
        with self._state_lock:
            handle = next(self._kernel_ids)
            self._kernels[handle] = kernel
        return handle

    def kernel(self, handle: int) -> CompiledKernel:
        try:
            return self._kernels[handle]
        except KeyError:
            raise KernelError(f"unknown kernel handle {handle}") from None

    def launch_kernel(self, handle: int, args: Sequence[DevicePtr] = (),
                      result: Optional[DevicePtr] = None) -> LaunchOutcome:
        """Upload, trigger and join; r0 of the first program fills ``result``."""
        self._ready()
        kernel = self.kernel(handle)
        if result is not None and result.size_bytes != kernel.result_size:
            raise AllocationError(f"kernel {kernel.kernel_name!r} returns {kernel.result_size} bytes, "
                                  f"result buffer holds {result.size_bytes}")
        if result is not None:
            self.registry.read(result)  # stale-handle check before anything runs
        arg_bytes = [self.registry.read(p) for p in args]
        outcome = self.executor.launch(self.registry, kernel, arg_bytes)
        if kernel.result_size and kernel.programs:
            state = outcome.states[kernel.programs[0].target]
            value = state.regs[0] & ((1 << (8 * kernel.result_size)) - 1)
            outcome.result = value
            if result is not None:
                self.registry.write(result, value.to_bytes(kernel.result_size, "little"))
        return outcome

    # -- device calls -----------------------------------------------------

    def device_call(self, target: DeviceRef, name: str, args: Sequence[Tuple[str, object]] = (),
                    result_type: Optional[str] = None):
        """Marshal ``args`` into host buffers, run the callback, decode its result."""
        self._ready()
        uid = self.uid(target)
        entry = self.registry.resolve_callback(uid, name)
        size = entry.result_size
        if result_type is not None and size is None:
            try:
                size = len(marshal.encode(result_type, 0))
            except MarshalError:
                raise MarshalError(f"callback {name!r} has a variable-size result; "
                                   f"cannot receive it as {result_type}") from None
        ptrs: List[DevicePtr] = []
        result = None
        try:
            for kind, value in args:
                data = marshal.encode(kind, value)
                ptr = self.registry.malloc(self.host_uid, len(data))
                ptrs.append(ptr)
                self.registry.write(ptr, data)
            if size:
                result = self.registry.malloc(self.host_uid, size)
            self.registry.invoke_callback(uid, name, ptrs, result)
            if result is None:
                return None
            raw = self.registry.read(result)
            return raw if result_type is None else marshal.decode(result_type, raw)
        finally:
            for ptr in ptrs:
                self.registry.free(ptr)
            if result is not None:
                self.registry.free(result)

    def measure_roundtrip_latency(self, target: DeviceRef, n_samples: int, payload_bytes: int = 32,
                                  timeout: float = 1.0) -> List[int]:
        """Round-trip time of every sample in nanoseconds, in send order.

        Devices with an rtlink loopback are measured with 32-byte loopback
        frames; anything else is timed through its ``echo`` callback.
        """
        self._ready()
        if isinstance(n_samples, bool) or not isinstance(n_samples, int) or n_samples < 1:
            raise ParameterError("n_samples", f"must be a positive integer, got {n_samples!r}")
        if payload_bytes < 1:
            raise ParameterError("payload_bytes", "must be positive")
        uid = self.uid(target)
        impl = self.registry.record(uid).impl
        if hasattr(impl, "loopback_link") and payload_bytes == 32:
            link = impl.loopback_link()
            try:
                res = measure_loopback(link, n_samples, timeout=timeout)
            finally:
                link.close()
            if res.gaps:
                raise TransportError(f"{len(res.gaps)} of {n_samples} loopback packets were lost")
            return res.rtts
        try:
            self.registry.resolve_callback(uid, "echo")
        except CallbackError as exc:
            raise TransportError(f"device {self.registry.record(uid).name!r} is not reachable "
                                 f"for loopback: {exc}") from exc
        src = self.registry.malloc(self.host_uid, payload_bytes)
        dst = self.registry.malloc(self.host_uid, payload_bytes)
        out = []
        try:
            for _ in range(n_samples):
                t0 = time.perf_counter_ns()
                self.registry.invoke_callback(uid, "echo", [src], dst)
                out.append(time.perf_counter_ns() - t0)
        finally:
            self.registry.free(src)
            self.registry.free(dst)
        return out

    def rdma_buffer_descriptors(self, target: DeviceRef) -> List[dict]:
        self._ready()
        return self.registry.rdma_buffer_descriptors(self.uid(target))
