"""Physical backends that turn MEASURE instructions into bits."""
from __future__ import annotations

import random
from typing import Dict, Optional, Protocol


class PhysicalBackend(Protocol):
    def measure(self, channel: int, tick: int) -> int: ...

    def reset(self, seed: Optional[int]) -> None: ...


class ConstantBackend:
    """Returns a fixed bit on every channel; handy for timing-only programs."""

    def __init__(self, bit: int = 0):
        self.bit = bit

    def measure(self, channel, tick):
        return self.bit

    def reset(self, seed):
        pass


class RepetitionBackend:
    """Pauli-frame model of a distance-``n_data`` bit-flip repetition code.

    Channel layout::

        0 .. n_data-2   syndrome parity of data bits (i, i+1)
        n_data-1        logical readout, parity of ``logical_support`` bits
        n_data          repeat-until-success flag, 1 on success

    A new stabilizer round starts every time syndrome channel 0 is measured.
    At that point scheduled injections for the round are applied and every data
    bit flips independently with probability ``p_flip``.
    """

    def __init__(self, n_data: int = 3, p_flip: float = 0.0, seed: Optional[int] = 0,
                 logical_support: int = 0b1, p_rus_fail: float = 0.0):
        if n_data < 2:
            raise ValueError("n_data must be at least 2")
        if not 0.0 <= p_flip <= 1.0 or not 0.0 <= p_rus_fail <= 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        if not 0 < logical_support < (1 << n_data):
            raise ValueError("logical_support must select at least one data qubit")
        self.n_data = n_data
        self.p_flip = p_flip
        self.p_rus_fail = p_rus_fail
        self.logical_support = logical_support
        self.seed = seed
        self._injections: Dict[int, int] = {}
        self.reset(seed)

    @property
    def logical_channel(self) -> int:
        return self.n_data - 1

    @property
    def flag_channel(self) -> int:
        return self.n_data

    def reset(self, seed: Optional[int] = None) -> None:
        if seed is not None:
            self.seed = seed
        self._rng = random.Random(self.seed)
        self.pauli_frame = 0
        self.round = -1

    def inject_error(self, round: int, data_qubit: int) -> None:
        if round < 0:
            raise ValueError(f"round must be nonnegative, got {round}")
        if not 0 <= data_qubit < self.n_data:
            raise ValueError(f"data qubit {data_qubit} out of range for n_data={self.n_data}")
        mask = self._injections.get(round, 0) ^ (1 << data_qubit)
        if mask:
            self._injections[round] = mask
        else:
            self._injections.pop(round, None)

    def clear_injections(self) -> None:
        self._injections.clear()

    @property
    def injections(self) -> Dict[int, int]:
        return dict(self._injections)

    def _begin_round(self) -> None:
        self.round += 1
        self.pauli_frame ^= self._injections.get(self.round, 0)
        if self.p_flip > 0.0:
            for q in range(self.n_data):
                if self._rng.random() < self.p_flip:
                    self.pauli_frame ^= 1 << q

    def data_bit(self, q: int) -> int:
        return (self.pauli_frame >> q) & 1

    def measure(self, channel: int, tick: int = 0) -> int:
        if channel == 0:
            self._begin_round()
        if channel < self.n_data - 1:
            return self.data_bit(channel) ^ self.data_bit(channel + 1)
        if channel == self.logical_channel:
            return bin(self.pauli_frame & self.logical_support).count("1") & 1
        if channel == self.flag_channel:
            if self.p_rus_fail > 0.0 and self._rng.random() < self.p_rus_fail:
                return 0
            return 1
        raise ValueError(f"channel {channel} not wired on a repetition backend with n_data={self.n_data}")


def inject_error(backend: RepetitionBackend, round: int, data_qubit: int) -> None:
    backend.inject_error(round, data_qubit)
