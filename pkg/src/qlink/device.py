"""Machine model: device identities, capabilities, the registry and device memory.

Every compute resource in a logical QPU is registered here and addressed by a
``DeviceUid``.  Capabilities are runtime flags; each registry operation checks
the flag it needs and refuses devices that lack it.
"""
from __future__ import annotations

import enum
import itertools
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, NewType, Optional, Sequence

from .errors import (
    AllocationError,
    CallbackError,
    CapabilityError,
    DeviceDisconnectedError,
    RegistrationError,
    UnknownDeviceError,
)

DeviceUid = NewType("DeviceUid", int)

# Callbacks take N read-only byte views and return the result bytes.
CallbackFn = Callable[..., Optional[bytes]]


class Capability(enum.Flag):
    DATA_MARSHALING = enum.auto()
    DEVICE_CALLBACK = enum.auto()
    QUANTUM_CONTROL = enum.auto()
    RDMA = enum.auto()

    @classmethod
    def parse(cls, names: Sequence[str]) -> "Capability":
        caps = cls(0)
        for name in names:
            try:
                caps |= cls[name.upper()]
            except KeyError:
                raise ValueError(f"unknown capability {name!r}") from None
        return caps

    def names(self) -> List[str]:
        return [c.name.lower() for c in Capability if c in self]


ALL_CAPABILITIES = tuple(Capability)


class ConnectionState(enum.Enum):
    DISCONNECTED = "disconnected"
    CONNECTED = "connected"


@dataclass(frozen=True)
class ClockDomains:
    """Deterministic-domain tick length plus the real-time wall clock.

    DTD time is always ``ticks * dtd_tick_ns`` in integer nanoseconds.
    """

    dtd_tick_ns: int = 4

    def __post_init__(self):
        if not isinstance(self.dtd_tick_ns, int) or self.dtd_tick_ns <= 0:
            raise ValueError("dtd_tick_ns must be a positive integer")

    def dtd_ns(self, ticks: int) -> int:
        return ticks * self.dtd_tick_ns

    @staticmethod
    def rtd_now_ns() -> int:
        return time.monotonic_ns()


@dataclass(frozen=True)
class DevicePtr:
    device: int
    handle: int
    size_bytes: int


@dataclass
class CallbackEntry:
    name: str
    callback_id: int
    fn: CallbackFn
    result_size: Optional[int] = None  # None: variable-length result


class Device:
    """Behavior implementation for one registered device.

    Subclasses override the hooks belonging to the capabilities they
    advertise.  ``single_threaded`` devices have every call serialized by the
    registry.
    """

    capabilities = Capability(0)
    single_threaded = False

    def on_connect(self) -> None:
        pass

    def on_disconnect(self) -> None:
        pass

    def callbacks(self) -> Dict[str, tuple]:
        """Callbacks to install on connect: ``{name: (fn, result_size)}``."""
        return {}

    def upload_program(self, binary: bytes) -> None:
        raise NotImplementedError

    def discard_program(self) -> None:
        pass

    def trigger(self, args: Sequence[bytes], trigger_tick: int):
        raise NotImplementedError

    def dtd_now(self) -> int:
        return 0

    def buffer_descriptors(self) -> List[dict]:
        return []


class FifoLock:
    """Mutex that admits waiters strictly in arrival order."""

    def __init__(self):
        self._cond = threading.Condition()
        self._next_ticket = 0
        self._serving = 0

    def __enter__(self):
        with self._cond:
            ticket = self._next_ticket
            self._next_ticket += 1
            while ticket != self._serving:
                self._cond.wait()
        return self

    def __exit__(self, *exc):
        with self._cond:
            self._serving += 1
            self._cond.notify_all()
        return False


@dataclass
class DeviceRecord:
    uid: int
    name: str
    capabilities: Capability
    impl: Device
    connection_state: ConnectionState = ConnectionState.DISCONNECTED
    callback_registry: Dict[str, CallbackEntry] = field(default_factory=dict)
    lock: FifoLock = field(default_factory=FifoLock, repr=False)
    _allocs: Dict[int, bytearray] = field(default_factory=dict, repr=False)
    _next_handle: int = 1

    @property
    def connected(self) -> bool:
        return self.connection_state is ConnectionState.CONNECTED

    def has(self, cap: Capability) -> bool:
        return cap in self.capabilities


def _overrides(impl: Device, method: str) -> bool:
    return getattr(type(impl), method) is not getattr(Device, method)


class Registry:
    """Thread-safe table of registered devices."""

    def __init__(self):
        self._lock = threading.RLock()
        self._uids = itertools.count()
        self._records: Dict[int, DeviceRecord] = {}
        self._by_name: Dict[str, int] = {}

    # -- registration and lifecycle ---------------------------------------

    def register_device(self, name: str, capabilities: Optional[Capability] = None,
                        impl: Optional[Device] = None) -> int:
        if not name:
            raise RegistrationError("device name must be nonempty")
        impl = impl if impl is not None else Device()
        caps = impl.capabilities if capabilities is None else capabilities
        if not caps:
            raise RegistrationError(f"device {name!r} advertises no capability")
        if Capability.QUANTUM_CONTROL in caps and not (
                _overrides(impl, "upload_program") and _overrides(impl, "trigger")):
            raise RegistrationError(
                f"device {name!r} advertises quantum_control but cannot upload and trigger programs")
        with self._lock:
            if name in self._by_name:
                raise RegistrationError(f"device name {name!r} already registered")
            uid = next(self._uids)
            self._records[uid] = DeviceRecord(uid=uid, name=name, capabilities=caps, impl=impl)
            self._by_name[name] = uid
        return uid

    def connect(self, uid: int) -> None:
        rec = self.record(uid)
        with self._lock:
            if rec.connected:
                return
            rec.impl.on_connect()
            rec.connection_state = ConnectionState.CONNECTED

    def disconnect(self, uid: int) -> None:
        rec = self.record(uid)
        with self._lock:
            if not rec.connected:
                return
            rec._allocs.clear()
            rec.connection_state = ConnectionState.DISCONNECTED
            rec.impl.on_disconnect()

    def record(self, uid: int) -> DeviceRecord:
        try:
            return self._records[uid]
        except KeyError:
            raise UnknownDeviceError(f"unknown device uid {uid}") from None

    def uid_of(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownDeviceError(f"unknown device {name!r}") from None

    def __contains__(self, uid) -> bool:
        return uid in self._records

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[DeviceRecord]:
        with self._lock:
            return iter(list(self._records.values()))

    def _require(self, uid: int, cap: Capability) -> DeviceRecord:
        rec = self.record(uid)
        if cap not in rec.capabilities:
            raise CapabilityError(
                f"device {rec.name!r} (uid {uid}) lacks the {cap.name.lower()} capability")
        if not rec.connected:
            raise DeviceDisconnectedError(f"device {rec.name!r} (uid {uid}) is disconnected")
        return rec

    # -- callbacks --------------------------------------------------------

    def register_callback(self, uid: int, name: str, fn: CallbackFn,
                          result_size: Optional[int] = None) -> int:
        rec = self._require(uid, Capability.DEVICE_CALLBACK)
        if not name:
            raise CallbackError("callback name must be nonempty")
        with self._lock:
            if name in rec.callback_registry:
                raise CallbackError(f"callback {name!r} already registered on {rec.name!r}")
            cid = len(rec.callback_registry)
            rec.callback_registry[name] = CallbackEntry(name, cid, fn, result_size)
        return cid

    def resolve_callback(self, uid: int, name: str) -> CallbackEntry:
        rec = self._require(uid, Capability.DEVICE_CALLBACK)
        try:
            return rec.callback_registry[name]
        except KeyError:
            raise CallbackError(f"no callback {name!r} on device {rec.name!r}") from None

    def callback_by_id(self, uid: int, callback_id: int) -> CallbackEntry:
        rec = self._require(uid, Capability.DEVICE_CALLBACK)
        for entry in rec.callback_registry.values():
            if entry.callback_id == callback_id:
                return entry
        raise CallbackError(f"no callback id {callback_id} on device {rec.name!r}")

    def invoke_callback(self, uid: int, name: str, args: Sequence[DevicePtr],
                        result: Optional[DevicePtr] = None) -> None:
        """Run a callback on argument buffers, writing its output into ``result``."""
        entry = self.resolve_callback(uid, name)
        rec = self.record(uid)
        views = [self._view(p).toreadonly() for p in args]
        if result is not None and entry.result_size is not None and result.size_bytes != entry.result_size:
            raise AllocationError(
                f"result buffer is {result.size_bytes} bytes, {name!r} returns {entry.result_size}")
        with rec.lock:
            try:
                out = entry.fn(*views)
            except Exception as exc:
                raise CallbackError(f"callback {name!r} on {rec.name!r} failed: {exc}") from exc
            finally:
                for v in views:
                    v.release()
        out = b"" if out is None else bytes(out)
        if entry.result_size is not None and len(out) != entry.result_size:
            raise CallbackError(
                f"callback {name!r} returned {len(out)} bytes, declared {entry.result_size}")
        if result is None:
            if out:
                raise AllocationError(f"callback {name!r} returned data but no result buffer was given")
            return
        if len(out) != result.size_bytes:
            raise AllocationError(
                f"callback {name!r} returned {len(out)} bytes into a {result.size_bytes}-byte buffer")
        self.write(result, out)

    # -- memory -----------------------------------------------------------

    def malloc(self, uid: int, size_bytes: int) -> DevicePtr:
        if not isinstance(size_bytes, int) or size_bytes <= 0:
            raise AllocationError(f"allocation size must be a positive integer, got {size_bytes!r}")
        rec = self._require(uid, Capability.DATA_MARSHALING)
        with self._lock:
            handle = rec._next_handle
            rec._next_handle += 1
            rec._allocs[handle] = bytearray(size_bytes)
        return DevicePtr(uid, handle, size_bytes)

    def free(self, ptr: DevicePtr) -> None:
        rec = self._require(ptr.device, Capability.DATA_MARSHALING)
        with self._lock:
            if rec._allocs.pop(ptr.handle, None) is None:
                raise AllocationError(f"double free or stale handle {ptr.handle} on {rec.name!r}")

    def _buffer(self, ptr: DevicePtr) -> bytearray:
        rec = self._require(ptr.device, Capability.DATA_MARSHALING)
        buf = rec._allocs.get(ptr.handle)
        if buf is None or len(buf) != ptr.size_bytes:
            raise AllocationError(f"stale handle {ptr.handle} on {rec.name!r}")
        return buf

    def _view(self, ptr: DevicePtr) -> memoryview:
        return memoryview(self._buffer(ptr))

    def read(self, ptr: DevicePtr, size: Optional[int] = None, offset: int = 0) -> bytes:
        buf = self._buffer(ptr)
        size = ptr.size_bytes - offset if size is None else size
        if offset < 0 or size < 0 or offset + size > len(buf):
            raise AllocationError(f"read of {size} bytes at {offset} exceeds {len(buf)}-byte region")
        return bytes(buf[offset:offset + size])

    def write(self, ptr: DevicePtr, data, offset: int = 0) -> None:
        buf = self._buffer(ptr)
        n = len(data)
        if offset < 0 or offset + n > len(buf):
            raise AllocationError(f"write of {n} bytes at {offset} exceeds {len(buf)}-byte region")
        buf[offset:offset + n] = data

    def live_allocations(self, uid: int) -> int:
        return len(self.record(uid)._allocs)

    # -- quantum control and rdma -----------------------------------------

    def upload_program(self, uid: int, binary: bytes) -> None:
        rec = self._require(uid, Capability.QUANTUM_CONTROL)
        with rec.lock:
            rec.impl.upload_program(bytes(binary))

    def discard_program(self, uid: int) -> None:
        rec = self._require(uid, Capability.QUANTUM_CONTROL)
        rec.impl.discard_program()

    def trigger(self, uid: int, args: Sequence[bytes], trigger_tick: int):
        rec = self._require(uid, Capability.QUANTUM_CONTROL)
        with rec.lock:
            return rec.impl.trigger(list(args), trigger_tick)

    def dtd_now(self, uid: int) -> int:
        return self._require(uid, Capability.QUANTUM_CONTROL).impl.dtd_now()

    def rdma_buffer_descriptors(self, uid: int) -> List[dict]:
        rec = self._require(uid, Capability.RDMA)
        return list(rec.impl.buffer_descriptors())
