"""Parallel-window geometry: worker bound and commit/cleanup partitioning."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

from ..errors import ParameterError
from .params import RtParams, WindowParams


def n_par_bound_raw(window: WindowParams, params: RtParams) -> float:
    """Pre-ceiling worker count ``2 T_DEC / ((n_com + n_W)(T_l + T_s))``.

    Scaled by ``spatial_regions`` since each generation then holds that many
    commit and cleanup regions.
    """
    return window.spatial_regions * 2.0 * window.T_DEC / (
        window.generation_rounds * (params.T_l + params.T_s))


def n_par_bound(window: WindowParams, params: RtParams) -> int:
    raw = n_par_bound_raw(window, params)
    # absorb float noise so an exact integer ratio does not round up
    return max(1, math.ceil(raw * (1.0 - 1e-12)))


@dataclass(frozen=True)
class Region:
    kind: str                          # "commit" or "cleanup"
    generation: int
    round_span: Tuple[int, int]        # half-open
    decode_input_span: Tuple[int, int]

    @property
    def rounds(self) -> int:
        return self.round_span[1] - self.round_span[0]


def partition_windows(total_rounds: int, window: WindowParams) -> List[Region]:
    """Tile ``[0, total_rounds)`` into alternating commit and cleanup regions.

    Commit regions start every ``n_com + n_W`` rounds and decode with
    ``n_buf`` rounds of context on each side, clipped to the stream.  Cleanup
    regions fill the gaps and decode only their own rounds.
    """
    g_len = window.generation_rounds
    if g_len <= 0:
        raise ParameterError("n_com", "n_com + n_W must be positive")
    if total_rounds < window.n_com:
        raise ParameterError("total_rounds", f"{total_rounds} is shorter than one commit region")
    regions = []
    for g, start in enumerate(range(0, total_rounds, g_len)):
        c_end = min(start + window.n_com, total_rounds)
        regions.append(Region("commit", g, (start, c_end),
                              (max(0, start - window.n_buf), min(total_rounds, c_end + window.n_buf))))
        w_end = min(start + g_len, total_rounds)
        if w_end > c_end:
            regions.append(Region("cleanup", g, (c_end, w_end), (c_end, w_end)))
    return regions
