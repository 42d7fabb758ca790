"""Byte layouts for values crossing a device boundary.

Integers and floats are little-endian fixed width.  ``bytes`` is a u32 length
prefix followed by the data.  ``bits`` is a u32 bit count followed by the bits
packed LSB-first (bit ``i`` lives in byte ``i // 8``), trailing bits zero.
"""
from __future__ import annotations

import math
import struct
from typing import Iterable, List, Sequence, Tuple

from .errors import MarshalError

_INT_FORMATS = {
    "u8": "<B", "u16": "<H", "u32": "<I", "u64": "<Q",
    "i8": "<b", "i16": "<h", "i32": "<i", "i64": "<q",
}
KINDS = tuple(_INT_FORMATS) + ("f64", "bytes", "bits")

_LEN = struct.Struct("<I")


def int_range(kind: str) -> Tuple[int, int]:
    bits = int(kind[1:])
    if kind[0] == "u":
        return 0, (1 << bits) - 1
    return -(1 << (bits - 1)), (1 << (bits - 1)) - 1


def pack_bits(bits: Iterable) -> bytes:
    bits = list(bits)
    out = bytearray((len(bits) + 7) // 8)
    for i, b in enumerate(bits):
        if b not in (0, 1, True, False):
            raise MarshalError(f"bit {i} is {b!r}, expected 0 or 1")
        if b:
            out[i >> 3] |= 1 << (i & 7)
    return bytes(out)


def unpack_bits(data: bytes, count: int) -> List[int]:
    if len(data) != (count + 7) // 8:
        raise MarshalError(f"{count} bits need {(count + 7) // 8} bytes, got {len(data)}")
    if count % 8 and data[-1] >> (count % 8):
        raise MarshalError("nonzero trailing bits in packed bit vector")
    return [(data[i >> 3] >> (i & 7)) & 1 for i in range(count)]


def encode(kind: str, value) -> bytes:
    if kind in _INT_FORMATS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise MarshalError(f"{kind} expects an int, got {type(value).__name__}")
        lo, hi = int_range(kind)
        if not lo <= value <= hi:
            raise MarshalError(f"{value} out of range for {kind}")
        return struct.pack(_INT_FORMATS[kind], value)
    if kind == "f64":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise MarshalError(f"f64 expects a number, got {type(value).__name__}")
        return struct.pack("<d", float(value))
    if kind == "bytes":
        if not isinstance(value, (bytes, bytearray, memoryview)):
            raise MarshalError(f"bytes expects a bytes-like value, got {type(value).__name__}")
        value = bytes(value)
        return _LEN.pack(len(value)) + value
    if kind == "bits":
        if isinstance(value, (str, bytes)):
            raise MarshalError("bits expects a sequence of 0/1 values")
        value = list(value)
        return _LEN.pack(len(value)) + pack_bits(value)
    raise MarshalError(f"unknown marshal kind {kind!r}")


def decode(kind: str, data) -> object:
    data = bytes(data)
    if kind in _INT_FORMATS:
        fmt = struct.Struct(_INT_FORMATS[kind])
        if len(data) != fmt.size:
            raise MarshalError(f"{kind} needs {fmt.size} bytes, got {len(data)}")
        return fmt.unpack(data)[0]
    if kind == "f64":
        if len(data) != 8:
            raise MarshalError(f"f64 needs 8 bytes, got {len(data)}")
        return struct.unpack("<d", data)[0]
    if kind in ("bytes", "bits"):
        if len(data) < 4:
            raise MarshalError(f"{kind} value is missing its length prefix")
        (n,) = _LEN.unpack_from(data)
        body = data[4:]
        if kind == "bytes":
            if len(body) != n:
                raise MarshalError(f"bytes prefix says {n}, body has {len(body)}")
            return body
        return unpack_bits(body, n)
    raise MarshalError(f"unknown marshal kind {kind!r}")


def encode_args(args: Sequence) -> List[bytes]:
    """Encode ``(kind, value)`` pairs into one buffer each."""
    out = []
    for i, arg in enumerate(args):
        try:
            kind, value = arg
        except (TypeError, ValueError):
            raise MarshalError(f"argument {i} must be a (kind, value) pair") from None
        out.append(encode(kind, value))
    return out


def same_value(kind: str, a, b) -> bool:
    """Equality that treats NaN payloads bitwise, for roundtrip checks."""
    if kind == "f64" and isinstance(a, float) and math.isnan(a):
        return struct.pack("<d", a) == struct.pack("<d", b)
    return a == b
