"""Test configuration and fixtures."""
import socket
import threading
import time
from typing import Callable, Generator, List, Optional

import pytest

from app.models.channel import ChannelId
from app.models.message import MessageKind, XMessage
from app.models.status import StatusCode
from app.services.channel_handler import ChannelHandler


def free_port(kind: int = socket.SOCK_STREAM) -> int:
    """A loopback port that was free a moment ago."""
    with socket.socket(socket.AF_INET, kind) as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def wait_for(predicate: Callable[[], bool], timeout: float = 5.0, interval: float = 0.01) -> bool:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(interval)
    return predicate()


def drain_messages(
    handler: ChannelHandler,
    until: Callable[[List[XMessage]], bool],
    timeout: float = 5.0,
) -> List[XMessage]:
    """Collect incoming messages until ``until(collected)`` holds or time runs out."""
    collected: List[XMessage] = []
    deadline = time.monotonic() + timeout
    while not until(collected):
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            break
        code, msg = handler.wait_message(min(remaining, 0.1))
        if code == StatusCode.CHANNEL_OK:
            collected.append(msg)
        elif code == StatusCode.CHANNEL_CLOSED:
            break
    return collected


def kinds(messages: List[XMessage], channel_id: Optional[ChannelId] = None) -> List[MessageKind]:
    return [m.kind for m in messages if channel_id is None or m.channel_id == channel_id]


def payload_of(messages: List[XMessage], channel_id: ChannelId) -> bytes:
    return b"".join(m.payload for m in messages if m.channel_id == channel_id and m.kind == MessageKind.DATA)


class RecordingHost:
    """Stand-in for the handler's host side: records what components report."""

    def __init__(self) -> None:
        self.messages: List[XMessage] = []
        self.attached = {}
        self.detached: List[ChannelId] = []
        self._next_id = 100
        self._lock = threading.Lock()

    def on_channel_message(self, msg: XMessage) -> StatusCode:
        with self._lock:
            self.messages.append(msg)
        return StatusCode.CHANNEL_OK

    def allocate_channel_id(self) -> ChannelId:
        with self._lock:
            self._next_id += 1
            return self._next_id

    def attach_channel(self, component) -> StatusCode:
        with self._lock:
            self.attached[component.channel_id] = component
        return StatusCode.CHANNEL_OK

    def detach_channel(self, channel_id: ChannelId) -> None:
        with self._lock:
            self.attached.pop(channel_id, None)
            self.detached.append(channel_id)

    def of_kind(self, kind: MessageKind) -> List[XMessage]:
        with self._lock:
            return [m for m in self.messages if m.kind == kind]


@pytest.fixture
def handler() -> Generator[ChannelHandler, None, None]:
    """A fresh channel handler, shut down after the test."""
    h = ChannelHandler()
    yield h
    h.shutdown()


@pytest.fixture
def host() -> RecordingHost:
    return RecordingHost()


@pytest.fixture
def tcp_port() -> int:
    return free_port(socket.SOCK_STREAM)


@pytest.fixture
def udp_port() -> int:
    return free_port(socket.SOCK_DGRAM)
