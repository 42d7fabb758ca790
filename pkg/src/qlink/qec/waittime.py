"""Sliding-window feedforward wait times.

Gate ``j`` has to wait for the interconnect round trip plus the decode of
every round that piled up while gate ``j-1`` was waiting::

    T_0 = r * T_s
    T_j = (c / T_s) * T_{j-1} + T_l

``wait_time_closed_form`` is the summed geometric series of that recurrence;
``wait_time_recurrence`` iterates it and serves as the independent check.
"""
from __future__ import annotations

import math

from ..errors import ParameterError
from .params import RtParams

# |c - T_s| / T_s below this is evaluated at the c == T_s limit
LIMIT_REL = 1e-9


def _check_j(j: int, minimum: int) -> int:
    if isinstance(j, bool) or not isinstance(j, int) or j < minimum:
        raise ParameterError("j", f"must be an integer >= {minimum}, got {j!r}")
    return j


def wait_time_closed_form(params: RtParams, j: int) -> float:
    """Wait before non-Clifford gate ``j >= 1``, in seconds.

    Evaluates ``c^j r / T_s^(j-1) + T_l T_s^(1-j) (c^j - T_s^j) / (c - T_s)``
    written in terms of ``q = c / T_s`` so that large ``j`` neither underflows
    nor cancels near ``q = 1``.
    """
    _check_j(j, 1)
    c, r, ts, tl = params.c, params.r, params.T_s, params.T_l
    d = (c - ts) / ts
    if abs(d) < LIMIT_REL:
        return r * ts + j * tl
    log_q = math.log1p(d)
    decode_part = r * ts * math.exp(j * log_q)
    latency_part = tl * math.expm1(j * log_q) / d
    return decode_part + latency_part


def wait_time_recurrence(params: RtParams, j: int) -> float:
    _check_j(j, 0)
    ratio = params.c / params.T_s
    t = params.r * params.T_s
    for _ in range(j):
        t = ratio * t + params.T_l
    return t


def wait_times(params: RtParams, j_max: int = None, closed_form: bool = True):
    j_max = params.j_max if j_max is None else j_max
    fn = wait_time_closed_form if closed_form else wait_time_recurrence
    return [fn(params, j) for j in range(1, j_max + 1)]


def growth_regime(params: RtParams) -> str:
    """``"bounded"`` if c < T_s, ``"linear"`` at c == T_s, else ``"exponential"``."""
    d = (params.c - params.T_s) / params.T_s
    if abs(d) < LIMIT_REL:
        return "linear"
    return "bounded" if d < 0 else "exponential"


def steady_wait(params: RtParams) -> float:
    """Limit of the wait as j grows, finite only when c < T_s."""
    if growth_regime(params) != "bounded":
        return math.inf
    return params.T_l / (1.0 - params.c / params.T_s)
