"""Decoding-latency analysis: wait times, window geometry, backlog simulation and capacity."""
from .capacity import MATCHING_ANCHORS, CapacityInputs, CapacityReport, plan_capacity
from .decoder import DecodeResult, RepetitionDecoder, decode_repetition, lookup_table, pack_syndrome, unpack_syndrome
from .params import REFERENCE_R, REFERENCE_T_L, REFERENCE_T_S, RtParams, WindowParams, reference_params
from .sim import HAVE_COMPILED, BacklogTrace, SimResult, simulate_stream
from .waittime import growth_regime, steady_wait, wait_time_closed_form, wait_time_recurrence, wait_times
from .windows import Region, n_par_bound, n_par_bound_raw, partition_windows

__all__ = [
    "BacklogTrace", "CapacityInputs", "CapacityReport", "DecodeResult", "HAVE_COMPILED", "MATCHING_ANCHORS",
    "REFERENCE_R", "REFERENCE_T_L", "REFERENCE_T_S", "Region", "RepetitionDecoder", "RtParams", "SimResult",
    "WindowParams", "decode_repetition", "growth_regime", "lookup_table", "n_par_bound", "n_par_bound_raw",
    "pack_syndrome", "partition_windows", "plan_capacity", "reference_params", "simulate_stream",
    "steady_wait", "unpack_syndrome", "wait_time_closed_form", "wait_time_recurrence", "wait_times",
]
