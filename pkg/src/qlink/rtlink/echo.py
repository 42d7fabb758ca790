"""Echo services and client links: an in-process channel and a UDP socket."""
from __future__ import annotations

import errno
import queue
import socket
import threading
from typing import Callable, Optional, Tuple, Union

from ..errors import EndpointInUseError, FrameError, TransportError
from .codec import Frame, SequenceTracker, decode_frame, stream_key

DropFn = Callable[[Frame], bool]


class EchoService:
    """Common bookkeeping: counters, per-client sequence tracking, drop hook."""

    def __init__(self, drop: Optional[DropFn] = None):
        self.drop = drop
        self.echoed = 0
        self.dropped = 0          # invalid frames
        self.injected_drops = 0   # valid frames eaten by the drop hook
        self.sequences = SequenceTracker()
        self._lock = threading.Lock()
        self._thread: Optional[threading.Thread] = None
        self._stop = threading.Event()

    def _handle(self, client, data: bytes) -> bool:
        """Return True if ``data`` should be echoed back unchanged."""
        try:
            frame = decode_frame(data)
        except FrameError:
            with self._lock:
                self.dropped += 1
            return False
        with self._lock:
            self.sequences.observe(stream_key(client, frame), frame.seq)
            if self.drop is not None and self.drop(frame):
                self.injected_drops += 1
                return False
            self.echoed += 1
        return True

    def start(self):
        self._thread = threading.Thread(target=self._serve, name=f"qlink-{type(self).__name__}", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        self._wake()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()

    def _serve(self):
        raise NotImplementedError

    def _wake(self):
        pass


class InProcLink:
    def __init__(self, service: "InProcessEcho"):
        self._service = service
        self._replies: "queue.Queue[bytes]" = queue.Queue()

    def send(self, data: bytes) -> None:
        self._service._requests.put((self, bytes(data)))

    def recv(self, timeout: Optional[float] = None) -> Optional[bytes]:
        try:
            return self._replies.get(timeout=timeout)
        except queue.Empty:
            return None

    def close(self) -> None:
        pass


class InProcessEcho(EchoService):
    """Deterministic echo over thread-safe queues, no sockets involved."""

    def __init__(self, drop: Optional[DropFn] = None):
        super().__init__(drop)
        self._requests: "queue.Queue" = queue.Queue()

    def connect(self) -> InProcLink:
        return InProcLink(self)

    def _serve(self):
        while not self._stop.is_set():
            item = self._requests.get()
            if item is None:
                continue
            link, data = item
            if self._handle(id(link), data):
                link._replies.put(data)

    def _wake(self):
        self._requests.put(None)


class UdpLink:
    def __init__(self, address: Tuple[str, int]):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.connect(address)

    def send(self, data: bytes) -> None:
        try:
            self._sock.send(data)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def recv(self, timeout: Optional[float] = None) -> Optional[bytes]:
        self._sock.settimeout(timeout)
        try:
            return self._sock.recv(65535)
        except socket.timeout:
            return None
        except OSError as exc:
            raise TransportError(f"receive failed: {exc}") from exc

    def close(self) -> None:
        self._sock.close()


class UdpEcho(EchoService):
    """Unreliable datagram echo bound to a local address."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0, drop: Optional[DropFn] = None):
        super().__init__(drop)
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            self._sock.bind((host, port))
        except OSError as exc:
            self._sock.close()
            if exc.errno == errno.EADDRINUSE:
                raise EndpointInUseError(f"{host}:{port} is already in use") from exc
            raise TransportError(f"cannot bind {host}:{port}: {exc}") from exc
        self._sock.settimeout(0.2)

    @property
    def address(self) -> Tuple[str, int]:
        return self._sock.getsockname()

    def connect(self) -> UdpLink:
        return UdpLink(self.address)

    def _serve(self):
        while not self._stop.is_set():
            try:
                data, peer = self._sock.recvfrom(65535)
            except socket.timeout:
                continue
            except OSError:
                break
            if self._handle(peer, data):
                try:
                    self._sock.sendto(data, peer)
                except OSError:
                    pass

    def stop(self) -> None:
        super().stop()
        self._sock.close()


def parse_endpoint(endpoint: str) -> Tuple[str, int]:
    host, sep, port = endpoint.rpartition(":")
    if not sep or not host:
        raise ValueError(f"endpoint must look like HOST:PORT, got {endpoint!r}")
    try:
        return host, int(port)
    except ValueError:
        raise ValueError(f"bad port in endpoint {endpoint!r}") from None


def run_echo(endpoint: Union[str, Tuple[str, int], None] = "inproc", drop: Optional[DropFn] = None) -> EchoService:
    """Start an echo service on ``"inproc"`` or a ``HOST:PORT`` datagram endpoint."""
    if endpoint in (None, "inproc"):
        return InProcessEcho(drop).start()
    host, port = parse_endpoint(endpoint) if isinstance(endpoint, str) else endpoint
    return UdpEcho(host, port, drop).start()
