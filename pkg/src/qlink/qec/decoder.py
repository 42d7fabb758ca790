"""Lookup-table decoder for the bit-flip repetition code."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from ..errors import ParameterError


def lookup_table(n_data: int = 3) -> Dict[Tuple[int, ...], int]:
    """Syndrome -> single-qubit correction mask.

    Syndrome bit ``i`` is the parity of data qubits ``i`` and ``i + 1``, so a
    flip on qubit ``q`` lights bits ``q - 1`` and ``q``.
    """
    table = {tuple([0] * (n_data - 1)): 0}
    for q in range(n_data):
        syn = [0] * (n_data - 1)
        if q > 0:
            syn[q - 1] = 1
        if q < n_data - 1:
            syn[q] = 1
        table[tuple(syn)] = 1 << q
    return table


@dataclass
class DecodeResult:
    correction_mask: int
    logical_flip: int
    detection_events: List[Tuple[int, ...]]


class RepetitionDecoder:
    """Decodes a syndrome history one round at a time.

    Each round is looked up on its detection events, i.e. the XOR with the
    previous round's syndrome, because an uncorrected flip keeps lighting the
    same syndrome in every later round.  Corrections XOR into one mask and the
    logical flip is that mask's parity on ``logical_support``.
    """

    def __init__(self, n_data: int = 3, logical_support: int = 0b1):
        self.n_data = n_data
        self.logical_support = logical_support
        self.table = lookup_table(n_data)

    def decode(self, syndrome_history: Sequence[Sequence[int]]) -> DecodeResult:
        width = self.n_data - 1
        prev = (0,) * width
        mask = 0
        events = []
        for k, syn in enumerate(syndrome_history):
            syn = tuple(int(b) for b in syn)
            if len(syn) != width or any(b not in (0, 1) for b in syn):
                raise ParameterError("syndrome_history", f"round {k}: expected {width} bits, got {syn!r}")
            event = tuple(a ^ b for a, b in zip(syn, prev))
            events.append(event)
            # weight > 1 patterns are outside the single-error table: no correction
            mask ^= self.table.get(event, 0)
            prev = syn
        flip = bin(mask & self.logical_support).count("1") & 1
        return DecodeResult(mask, flip, events)


def decode_repetition(syndrome_history: Sequence[Sequence[int]], n_data: int = 3,
                      logical_support: int = 0b1) -> DecodeResult:
    return RepetitionDecoder(n_data, logical_support).decode(syndrome_history)


def pack_syndrome(bits: Sequence[int]) -> int:
    """Shift-left-insert packing, first measured bit most significant."""
    value = 0
    for b in bits:
        value = (value << 1) | (int(b) & 1)
    return value


def unpack_syndrome(value: int, width: int) -> Tuple[int, ...]:
    return tuple((value >> (width - 1 - i)) & 1 for i in range(width))
