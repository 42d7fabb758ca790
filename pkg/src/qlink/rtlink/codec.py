"""Bit-exact frame codec for the real-time link.

Frame layout (network byte order)::

    0   4  magic "NQLK"
    4   1  version (1)
    5   1  msg_type
    6   2  flags
    8   4  seq
    12  8  timestamp_ns
    20  2  payload_len
    22  .. payload (payload_len bytes, at most 8192)

Loopback frames carry exactly one 32-byte ``LoopbackPayload``: a 96-bit
timestamp, a 16-bit packet number and 18 zero bytes.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Dict, Hashable, List, Tuple

from ..errors import FrameError

MAGIC = b"NQLK"
VERSION = 1
MAX_PAYLOAD = 8192
HEADER = struct.Struct(">4sBBHIQH")
HEADER_SIZE = HEADER.size
LOOPBACK_PAYLOAD_SIZE = 32
PADDING_SIZE = 18


class MsgType(enum.IntEnum):
    LOOPBACK = 0
    SYNDROME = 1
    CALLBACK_REQUEST = 2
    CALLBACK_RESPONSE = 3
    CONTROL = 4


@dataclass(frozen=True)
class LoopbackPayload:
    timestamp: int
    packet_number: int

    def encode(self) -> bytes:
        if not 0 <= self.timestamp < 1 << 96:
            raise FrameError("timestamp does not fit in 96 bits")
        if not 0 <= self.packet_number < 1 << 16:
            raise FrameError("packet_number does not fit in 16 bits")
        return (self.timestamp.to_bytes(12, "big") + self.packet_number.to_bytes(2, "big")
                + bytes(PADDING_SIZE))

    @classmethod
    def decode(cls, data: bytes) -> "LoopbackPayload":
        if len(data) != LOOPBACK_PAYLOAD_SIZE:
            raise FrameError(f"loopback payload must be {LOOPBACK_PAYLOAD_SIZE} bytes, got {len(data)}")
        if any(data[14:]):
            raise FrameError("nonzero loopback padding")
        return cls(int.from_bytes(data[:12], "big"), int.from_bytes(data[12:14], "big"))


@dataclass(frozen=True)
class Frame:
    msg_type: int
    seq: int
    timestamp_ns: int = 0
    payload: bytes = b""
    flags: int = 0
    version: int = VERSION

    @property
    def payload_len(self) -> int:
        return len(self.payload)

    def loopback(self) -> LoopbackPayload:
        if self.msg_type != MsgType.LOOPBACK:
            raise FrameError(f"msg_type {self.msg_type} is not loopback")
        return LoopbackPayload.decode(self.payload)

    @classmethod
    def make_loopback(cls, seq: int, timestamp: int, packet_number: int, timestamp_ns: int = 0) -> "Frame":
        return cls(MsgType.LOOPBACK, seq, timestamp_ns, LoopbackPayload(timestamp, packet_number).encode())


def encode_frame(frame: Frame) -> bytes:
    if frame.version != VERSION:
        raise FrameError(f"unsupported version {frame.version}")
    if frame.msg_type not in MsgType.__members__.values():
        raise FrameError(f"unknown msg_type {frame.msg_type}")
    if not 0 <= frame.flags < 1 << 16:
        raise FrameError("flags out of range")
    if not 0 <= frame.seq < 1 << 32:
        raise FrameError("seq out of range")
    if not 0 <= frame.timestamp_ns < 1 << 64:
        raise FrameError("timestamp_ns out of range")
    payload = bytes(frame.payload)
    if len(payload) > MAX_PAYLOAD:
        raise FrameError(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    if frame.msg_type == MsgType.LOOPBACK:
        LoopbackPayload.decode(payload)
    return HEADER.pack(MAGIC, frame.version, frame.msg_type, frame.flags, frame.seq,
                       frame.timestamp_ns, len(payload)) + payload


def decode_frame(data) -> Frame:
    data = bytes(data)
    if len(data) < HEADER_SIZE:
        raise FrameError("truncated header")
    magic, version, msg_type, flags, seq, ts, plen = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FrameError("bad magic")
    if version != VERSION:
        raise FrameError(f"unsupported version {version}")
    if msg_type not in MsgType.__members__.values():
        raise FrameError(f"unknown msg_type {msg_type}")
    if plen > MAX_PAYLOAD:
        raise FrameError(f"payload_len {plen} exceeds {MAX_PAYLOAD}")
    if len(data) - HEADER_SIZE != plen:
        raise FrameError("payload_len mismatch")
    payload = data[HEADER_SIZE:]
    if msg_type == MsgType.LOOPBACK:
        LoopbackPayload.decode(payload)
    return Frame(MsgType(msg_type), seq, ts, payload, flags, version)


class SequenceTracker:
    """Per-stream sequence accounting.

    Each ``(sender, msg_type)`` stream must advance by exactly one (mod 2**32).
    Missing numbers are recorded as gaps and never backfilled; late or
    repeated frames are recorded separately.
    """

    def __init__(self):
        self._next: Dict[Hashable, int] = {}
        self.gaps: Dict[Hashable, List[int]] = {}
        self.out_of_order: Dict[Hashable, List[int]] = {}

    def observe(self, stream: Hashable, seq: int) -> List[int]:
        expected = self._next.get(stream)
        missing: List[int] = []
        if expected is None or seq == expected:
            pass
        else:
            ahead = (seq - expected) % (1 << 32)
            if ahead < 1 << 31:
                missing = [(expected + k) % (1 << 32) for k in range(ahead)]
                self.gaps.setdefault(stream, []).extend(missing)
            else:
                self.out_of_order.setdefault(stream, []).append(seq)
                return []
        self._next[stream] = (seq + 1) % (1 << 32)
        return missing


def stream_key(sender: Hashable, frame: Frame) -> Tuple[Hashable, int]:
    return sender, int(frame.msg_type)
