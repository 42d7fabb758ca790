"""Decoder compute-capacity planning."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, Optional, Tuple

from ..errors import ParameterError

FLOP_PER_PARAM_PER_QUBIT = 2

# (logical qubits, program depth) -> FLOP/s a matching decoder needs
MATCHING_ANCHORS: Dict[Tuple[int, int], float] = {
    (100, 10**6): 200e12,
    (1000, 10**9): 1e15,
}


@dataclass(frozen=True)
class CapacityInputs:
    mode: str = "ai"
    params_per_model: Optional[int] = None
    cycle_rate_hz: Optional[float] = None
    n_logical_qubits: Optional[int] = None
    headroom_factor: float = 1
    depth: Optional[int] = None
    flop_per_param_per_qubit: int = FLOP_PER_PARAM_PER_QUBIT
    anchors: Dict[Tuple[int, int], float] = field(default_factory=lambda: dict(MATCHING_ANCHORS))


@dataclass
class CapacityReport:
    mode: str
    flop_per_s_per_qubit: float
    total_flop_per_s: float
    with_headroom: float
    base_flop_per_s: float
    headroom_factor: float
    anchors: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _need_positive(name, value):
    if value is None:
        raise ParameterError(name, "missing required parameter")
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
        raise ParameterError(name, f"must be positive, got {value!r}")


def plan_capacity(inputs: CapacityInputs) -> CapacityReport:
    """FLOP/s needed to decode in real time.

    AI mode: ``flop_per_param_per_qubit * params * cycle_rate`` per logical
    qubit, times the qubit count and the headroom factor.  Matching mode looks
    up the anchor for ``(n_logical_qubits, depth)``.  ``total_flop_per_s`` and
    ``with_headroom`` both include the headroom; ``base_flop_per_s`` does not.
    """
    if inputs.headroom_factor is None or inputs.headroom_factor < 1:
        raise ParameterError("headroom_factor", "must be at least 1")
    headroom = inputs.headroom_factor
    anchors = {f"{q}x{d}": v for (q, d), v in inputs.anchors.items()}
    if inputs.mode == "ai":
        _need_positive("params_per_model", inputs.params_per_model)
        _need_positive("cycle_rate_hz", inputs.cycle_rate_hz)
        _need_positive("n_logical_qubits", inputs.n_logical_qubits)
        per_qubit = inputs.flop_per_param_per_qubit * inputs.params_per_model * inputs.cycle_rate_hz
        base = per_qubit * inputs.n_logical_qubits
    elif inputs.mode == "matching":
        if inputs.n_logical_qubits is None and inputs.depth is None:
            return CapacityReport("matching", 0, 0, 0, 0, headroom, anchors)
        _need_positive("n_logical_qubits", inputs.n_logical_qubits)
        _need_positive("depth", inputs.depth)
        key = (inputs.n_logical_qubits, inputs.depth)
        if key not in inputs.anchors:
            raise ParameterError("depth", f"no matching-decoder anchor for {key[0]} qubits at depth {key[1]}")
        base = inputs.anchors[key]
        per_qubit = base / inputs.n_logical_qubits
    else:
        raise ParameterError("mode", f"unknown mode {inputs.mode!r}")
    total = base * headroom
    return CapacityReport(inputs.mode, per_qubit, total, total, base, headroom, anchors)
