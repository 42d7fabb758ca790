"""Parameter records for the decoding-latency model.  All times are seconds."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Mapping, Optional

from ..errors import ParameterError


def _positive(name, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParameterError(name, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ParameterError(name, f"expected an integer, got {value!r}")
    if not math.isfinite(value) or value <= 0:
        raise ParameterError(name, f"must be positive, got {value!r}")


def _nonnegative_int(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value or value < 0:
        raise ParameterError(name, f"expected a nonnegative integer, got {value!r}")


def _from_mapping(cls, data: Mapping, required):
    known = {f.name for f in fields(cls)}
    for name in required:
        if name not in data:
            raise ParameterError(name, "missing required parameter")
    unknown = sorted(set(data) - known)
    if unknown:
        raise ParameterError(unknown[0], "unknown parameter")
    return cls(**{k: data[k] for k in data if k in known})


@dataclass(frozen=True)
class RtParams:
    """Sliding-window timing model.

    c    decode time per syndrome round of a linear-time decoder
    r    rounds before the first magic state is consumed
    T_s  duration of one stabilizer round
    T_l  interconnect round-trip latency
    j_max  number of sequential non-Clifford gates
    """

    c: float
    r: int
    T_s: float
    T_l: float
    j_max: int = 8

    def __post_init__(self):
        _positive("c", self.c)
        _positive("r", self.r, integer=True)
        _positive("T_s", self.T_s)
        _positive("T_l", self.T_l)
        _positive("j_max", self.j_max, integer=True)
        object.__setattr__(self, "r", int(self.r))
        object.__setattr__(self, "j_max", int(self.j_max))

    @classmethod
    def from_mapping(cls, data: Mapping) -> "RtParams":
        return _from_mapping(cls, data, ("c", "r", "T_s", "T_l"))

    def scaled(self, k: float) -> "RtParams":
        return RtParams(self.c * k, self.r, self.T_s * k, self.T_l * k, self.j_max)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class WindowParams:
    """Parallel-window geometry and decoder resources.

    ``T_DEC`` is the time to decode one region; ``spatial_regions`` multiplies
    the number of commit and cleanup regions per generation.
    """

    n_com: int
    n_buf: int
    n_W: int
    T_DEC: float
    N_par: Optional[int] = None
    spatial_regions: int = 1

    def __post_init__(self):
        _positive("n_com", self.n_com, integer=True)
        _nonnegative_int("n_buf", self.n_buf)
        _nonnegative_int("n_W", self.n_W)
        _positive("T_DEC", self.T_DEC)
        _positive("spatial_regions", self.spatial_regions, integer=True)
        if self.N_par is not None:
            _positive("N_par", self.N_par, integer=True)
        for name in ("n_com", "n_buf", "n_W", "spatial_regions"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.N_par is not None:
            object.__setattr__(self, "N_par", int(self.N_par))

    @property
    def generation_rounds(self) -> int:
        return self.n_com + self.n_W

    @classmethod
    def from_mapping(cls, data: Mapping) -> "WindowParams":
        return _from_mapping(cls, data, ("n_com", "n_buf", "n_W", "T_DEC"))

    def with_workers(self, n_par: int) -> "WindowParams":
        return WindowParams(self.n_com, self.n_buf, self.n_W, self.T_DEC, n_par, self.spatial_regions)

    def scaled(self, k: float) -> "WindowParams":
        return WindowParams(self.n_com, self.n_buf, self.n_W, self.T_DEC * k, self.N_par, self.spatial_regions)

    def to_dict(self) -> dict:
        return asdict(self)


# Surface-code operating point: 1.4 us rounds, 20 us interconnect, 33 rounds.
REFERENCE_T_S = 1.4e-6
REFERENCE_T_L = 20e-6
REFERENCE_R = 33


def reference_params(c: float = 0.7e-6, j_max: int = 8) -> RtParams:
    return RtParams(c=c, r=REFERENCE_R, T_s=REFERENCE_T_S, T_l=REFERENCE_T_L, j_max=j_max)
