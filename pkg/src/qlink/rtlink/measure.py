"""Loopback latency measurement client."""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import List, NamedTuple

from ..errors import FrameError, TransportError
from .codec import Frame, decode_frame, encode_frame

MAX_PACKETS = 1 << 16


class LatencySample(NamedTuple):
    packet_number: int   # 32-bit virtual counter, unwrapped from the 16-bit field
    send_ts: int
    recv_ts: int
    rtt_ns: int


@dataclass
class LoopbackResult:
    samples: List[LatencySample]
    gaps: List[int]
    sent: int
    duplicates: int = 0
    invalid: int = 0
    rtts: List[int] = field(init=False)

    def __post_init__(self):
        self.rtts = [s.rtt_ns for s in self.samples]


class PacketUnwrapper:
    """Maps 16-bit packet numbers onto a monotone 32-bit virtual counter."""

    def __init__(self):
        self.last = -1

    def unwrap(self, pn: int) -> int:
        fwd = (pn - self.last) % MAX_PACKETS
        if fwd < MAX_PACKETS // 2:
            virtual = self.last + fwd
            self.last = virtual
        else:
            virtual = self.last - ((self.last - pn) % MAX_PACKETS)
        return virtual


def _sleep_until(deadline_ns: int) -> None:
    while True:
        remaining = deadline_ns - time.monotonic_ns()
        if remaining <= 0:
            return
        if remaining > 200_000:
            time.sleep((remaining - 100_000) / 1e9)
        else:
            time.sleep(0)  # yield the GIL to the receiver and echo threads


def measure_loopback(link, n_packets: int, interval_ns: int = 0, timeout: float = 1.0,
                     max_in_flight: int = 1) -> LoopbackResult:
    """Send ``n_packets`` loopback frames over ``link`` and time each echo.

    The sender runs on its own thread; the calling thread receives.  At most
    ``max_in_flight`` packets are outstanding (0 means unlimited), so RTTs
    are not inflated by queueing behind earlier packets.  A packet that does
    not return within ``timeout`` releases its slot.  Samples come back
    ordered by packet number and packets that never returned are listed in
    ``gaps`` rather than interpolated.
    """
    if not 1 <= n_packets <= MAX_PACKETS:
        raise ValueError(f"n_packets must be in [1, {MAX_PACKETS}], got {n_packets}")
    if interval_ns < 0:
        raise ValueError("interval_ns must be nonnegative")
    if max_in_flight < 0:
        raise ValueError("max_in_flight must be nonnegative")
    window = threading.BoundedSemaphore(max_in_flight) if max_in_flight else None
    t0 = time.monotonic_ns()
    send_error: List[BaseException] = []
    sent_count = [0]
    send_done = threading.Event()

    def sender():
        try:
            start = time.monotonic_ns()
            for i in range(n_packets):
                if interval_ns:
                    _sleep_until(start + i * interval_ns)
                if window is not None:
                    window.acquire(timeout=timeout)
                ts = time.monotonic_ns() - t0
                link.send(encode_frame(Frame.make_loopback(i, ts, i % MAX_PACKETS)))
                sent_count[0] += 1
        except BaseException as exc:  # surfaced to the caller below
            send_error.append(exc)
        finally:
            send_done.set()

    thread = threading.Thread(target=sender, name="qlink-loopback-sender", daemon=True)
    thread.start()
    unwrap = PacketUnwrapper()
    received = {}
    duplicates = invalid = 0
    while len(received) < n_packets:
        data = link.recv(timeout=timeout)
        now = time.monotonic_ns() - t0
        if data is None:
            if send_done.is_set():
                break
            continue
        try:
            frame = decode_frame(data)
            payload = frame.loopback()
        except FrameError:
            invalid += 1
            continue
        virtual = unwrap.unwrap(payload.packet_number)
        if virtual in received or not 0 <= virtual < n_packets:
            duplicates += 1
            continue
        received[virtual] = LatencySample(virtual, payload.timestamp, now, now - payload.timestamp)
        if window is not None:
            try:
                window.release()
            except ValueError:  # slot already reclaimed by a sender timeout
                pass
    thread.join()
    if send_error:
        raise TransportError(f"sender failed: {send_error[0]}") from send_error[0]
    if not received:
        raise TransportError(f"no echoes within {timeout} s")
    samples = [received[k] for k in sorted(received)]
    gaps = [k for k in range(n_packets) if k not in received]
    return LoopbackResult(samples, gaps, sent_count[0], duplicates, invalid)
