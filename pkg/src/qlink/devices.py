"""Concrete device kinds and the JSON device-configuration loader."""
from __future__ import annotations

import json
import os
import threading
from typing import Dict, List, Mapping, Optional, Tuple

from . import marshal
from .device import Capability, ClockDomains, Device
from .errors import ParameterError
from .qec.decoder import DecodeResult, RepetitionDecoder, unpack_syndrome
from .rtlink.echo import EchoService, run_echo
from .vppu.backend import RepetitionBackend
from .vppu.device import VppuDevice

CONFIG_ENV = "QLINK_CONFIG"


class HostDevice(Device):
    """The real-time host: default memory space and a trivial echo callback."""

    capabilities = Capability.DATA_MARSHALING | Capability.DEVICE_CALLBACK

    def callbacks(self):
        return {"echo": (lambda data: bytes(data), None)}


class DecoderDevice(Device):
    """Streaming repetition-code decoder reachable through device callbacks.

    Syndromes arrive either packed into a u64 (first measured bit most
    significant) or as a bit vector with a round tag.  ``decode`` consumes the
    buffered history and returns the logical-flip bit as a u64.
    """

    capabilities = Capability.DATA_MARSHALING | Capability.DEVICE_CALLBACK
    single_threaded = True

    def __init__(self, n_data: int = 3, logical_support: int = 0b1):
        self.decoder = RepetitionDecoder(n_data, logical_support)
        self.n_data = n_data
        self.history: List[Tuple[int, ...]] = []
        self.tags: List[int] = []
        self.verdicts: List[DecodeResult] = []

    @property
    def width(self) -> int:
        return self.n_data - 1

    def callbacks(self):
        return {
            "add": (self._add, 4),
            "enqueue_syndromes_ui64": (self._enqueue_packed, 0),
            "enqueue_syndromes_simulation": (self._enqueue_bits, 0),
            "decode": (self._decode, 8),
            "reset": (self._reset, 0),
        }

    def _add(self, a, b):
        total = marshal.decode("i32", a) + marshal.decode("i32", b)
        lo, hi = marshal.int_range("i32")
        if not lo <= total <= hi:
            raise OverflowError("i32 overflow")
        return marshal.encode("i32", total)

    def _enqueue_packed(self, syndrome):
        value = marshal.decode("u64", syndrome)
        if value >> self.width:
            raise ValueError(f"packed syndrome {value:#x} wider than {self.width} bits")
        self.history.append(unpack_syndrome(value, self.width))
        self.tags.append(len(self.tags))

    def _enqueue_bits(self, bits, tag):
        syn = tuple(marshal.decode("bits", bits))
        if len(syn) != self.width:
            raise ValueError(f"expected {self.width} syndrome bits, got {len(syn)}")
        self.history.append(syn)
        self.tags.append(marshal.decode("u64", tag))

    def _decode(self, *_ignored):
        result = self.decoder.decode(self.history)
        self.verdicts.append(result)
        self.history = []
        self.tags = []
        return marshal.encode("u64", result.logical_flip)

    def _reset(self, *_ignored):
        self.history = []
        self.tags = []


class EchoDevice(Device):
    """Loopback peer: an rtlink echo service plus an ``echo`` callback.

    The rdma capability is a handshake stub: ``buffer_descriptors`` reports
    the loopback endpoint, no transport is attached.
    """

    capabilities = Capability.DEVICE_CALLBACK | Capability.RDMA

    def __init__(self, endpoint: str = "inproc"):
        self.endpoint = endpoint
        self.service: Optional[EchoService] = None
        self._lock = threading.Lock()

    def on_connect(self):
        self.service = run_echo(self.endpoint)

    def on_disconnect(self):
        if self.service is not None:
            self.service.stop()
            self.service = None

    def loopback_link(self):
        if self.service is None:
            raise ConnectionError("echo device is not connected")
        return self.service.connect()

    def callbacks(self):
        return {"echo": (lambda data: bytes(data), None)}

    def buffer_descriptors(self):
        address = getattr(self.service, "address", "inproc")
        return [{"name": "loopback", "endpoint": address, "size": 32}]


def build_device(entry: Mapping) -> Tuple[str, Device]:
    """Instantiate one ``{name, kind, params}`` device entry."""
    for key in ("name", "kind"):
        if key not in entry:
            raise ParameterError(key, "missing in device configuration")
    name, kind = entry["name"], entry["kind"]
    params = dict(entry.get("params") or {})
    try:
        if kind == "vppu":
            backend = RepetitionBackend(
                n_data=params.pop("n_data", 3), p_flip=params.pop("p_flip", 0.0),
                seed=params.get("seed", 0), logical_support=params.pop("logical_support", 0b1),
                p_rus_fail=params.pop("p_rus_fail", 0.0))
            clock = ClockDomains(params.pop("dtd_tick_ns", 4))
            device = VppuDevice(backend, seed=params.pop("seed", 0), clock=clock,
                                **{k: params.pop(k) for k in list(params) if k in ("max_ticks", "compiled")})
        elif kind == "decoder":
            device = DecoderDevice(n_data=params.pop("n_data", 3),
                                   logical_support=params.pop("logical_support", 0b1))
        elif kind == "echo":
            device = EchoDevice(endpoint=params.pop("endpoint", "inproc"))
        else:
            raise ParameterError("kind", f"unknown device kind {kind!r}")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(f"{name}.params", str(exc)) from exc
    if params:
        raise ParameterError(f"{name}.params.{sorted(params)[0]}", "unknown device parameter")
    return name, device


def load_config(path: Optional[str] = None) -> List[Dict]:
    """Read a driver configuration file; ``QLINK_CONFIG`` supplies the default path."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        raise ParameterError(CONFIG_ENV, "no configuration path given")
    with open(path) as fh:
        data = json.load(fh)
    devices = data.get("devices") if isinstance(data, dict) else data
    if not isinstance(devices, list):
        raise ParameterError("devices", "configuration must hold a list of devices")
    return devices
