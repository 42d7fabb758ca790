"""Real-time link: frame codec, echo services and latency statistics."""
from .codec import (HEADER_SIZE, LOOPBACK_PAYLOAD_SIZE, MAGIC, MAX_PAYLOAD, Frame, LoopbackPayload, MsgType,
                    SequenceTracker, decode_frame, encode_frame)
from .echo import EchoService, InProcessEcho, UdpEcho, parse_endpoint, run_echo
from .measure import LatencySample, LoopbackResult, measure_loopback
from .stats import LatencyStats, compute_stats, detect_warmup, format_report, synthetic_trace

__all__ = [
    "EchoService", "Frame", "HEADER_SIZE", "InProcessEcho", "LOOPBACK_PAYLOAD_SIZE", "LatencySample",
    "LatencyStats", "LoopbackPayload", "LoopbackResult", "MAGIC", "MAX_PAYLOAD", "MsgType", "SequenceTracker",
    "UdpEcho", "compute_stats", "decode_frame", "detect_warmup", "encode_frame", "format_report",
    "measure_loopback", "parse_endpoint", "run_echo", "synthetic_trace",
]
