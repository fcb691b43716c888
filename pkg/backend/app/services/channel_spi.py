"""Component contract shared by every channel type.

A channel component owns one transport. The platform drives it through four
calls (create, destroy, status, add_message) and the component reports
everything it receives through a single upward callback. Server components
additionally spawn child channels, one per remote peer, which they register
with the handler through the host half of that callback.
"""
from __future__ import annotations

import logging
import queue
import threading
from abc import ABC, abstractmethod
from enum import Enum
from typing import Dict, List, Optional, Protocol, runtime_checkable

from app.config import settings
from app.models.channel import ChannelId, ChannelInfo, ChannelStats
from app.models.endpoint import Endpoint
from app.models.message import MessageKind, XMessage
from app.models.status import StatusCode, status_name
from app.utils.error_handler import ChannelError, handle_channel_errors
from app.utils.sentry_config import capture_exception

logger = logging.getLogger(__name__)

_STOP = object()
_JOIN_TIMEOUT_SECONDS = 2.0


@runtime_checkable
class ChannelCallback(Protocol):
    """Upward path into the handler's single incoming queue. Must not block."""

    def on_channel_message(self, msg: XMessage) -> StatusCode:
        ...


@runtime_checkable
class ChannelHost(ChannelCallback, Protocol):
    """Callback plus the registration hooks server channels need for children."""

    def allocate_channel_id(self) -> ChannelId:
        ...

    def attach_channel(self, component: "ChannelComponent") -> StatusCode:
        ...

    def detach_channel(self, channel_id: ChannelId) -> None:
        ...


class ChannelState(str, Enum):
    NEW = "new"
    CREATED = "created"
    DESTROYED = "destroyed"


class ChannelComponent(ABC):
    """Base for all channel components.

    Transitions are New -> Created -> Destroyed only. Calls outside a valid
    state return CHANNEL_CLOSED (or do nothing, for add_message) and have no
    side effects.

    Subclasses implement ``_open``, ``_close`` and ``_transmit``; the base class
    owns the bounded outgoing queue and the writer thread that drains it in
    FIFO order.
    """

    channel_type: str = ""
    # False for components that consume their outgoing queue some other way
    # (servers, SOAP server children).
    drains_outgoing: bool = True

    def __init__(self, info: ChannelInfo, channel_id: ChannelId, callback: ChannelCallback) -> None:
        self.info = info
        self.channel_id = channel_id
        self.callback = callback
        self.remote: Optional[Endpoint] = None
        self.poll_interval = settings.driver_poll_interval_seconds

        self._state = ChannelState.NEW
        self._state_lock = threading.Lock()
        self._stop = threading.Event()
        self._threads: List[threading.Thread] = []

        self._outgoing: "queue.Queue[object]" = queue.Queue(
            maxsize=info.option("queue_capacity", settings.channel_queue_capacity)
        )
        self._health = StatusCode.CHANNEL_OK
        self._notice_lock = threading.Lock()
        self._disconnect_sent = False

        self._stats_lock = threading.Lock()
        self._in_flight = 0
        self._dropped = 0
        self._discarded = 0
        self._sent_messages = 0
        self._sent_bytes = 0
        self._received_messages = 0
        self._received_bytes = 0

    # -- transport hooks -------------------------------------------------

    @abstractmethod
    def _open(self) -> None:
        """Acquire transport resources. Raise on failure."""

    @abstractmethod
    def _close(self) -> None:
        """Release transport resources. Must unblock any driver thread."""

    @abstractmethod
    def _transmit(self, payload: bytes) -> None:
        """Write one outgoing payload to the wire. Raise on failure."""

    def _start_drivers(self) -> None:
        """Start receive drivers after a successful open."""

    def _on_created(self) -> None:
        """Runs once after a successful open, before any driver starts."""

    def _on_destroyed(self) -> None:
        """Runs once after resources are released."""

    def _on_transport_lost(self) -> None:
        """Runs once when a driver reports the transport broken."""
        self._notify_disconnected()

    # -- XIChannel operations -------------------------------------------

    @property
    def state(self) -> ChannelState:
        return self._state

    def create(self) -> StatusCode:
        with self._state_lock:
            if self._state != ChannelState.NEW:
                return StatusCode.CHANNEL_CLOSED
            code = self._guarded_open()
            if code != StatusCode.CHANNEL_OK:
                self._guarded_close()
                return code
            self._state = ChannelState.CREATED
        self._on_created()
        if self.drains_outgoing:
            self._spawn(self._drain_outgoing, "writer")
        self._start_drivers()
        logger.info(
            "Channel %s (%s) created on %s",
            self.channel_id,
            self.channel_type,
            self.info.endpoint,
        )
        return StatusCode.CHANNEL_OK

    def destroy(self) -> StatusCode:
        with self._state_lock:
            if self._state == ChannelState.DESTROYED:
                return StatusCode.CHANNEL_OK
            self._state = ChannelState.DESTROYED
        self._stop.set()
        self._discard_outgoing()
        try:
            self._outgoing.put_nowait(_STOP)
        except queue.Full:
            pass
        code = self._guarded_close()
        self._join_drivers()
        self._on_destroyed()
        logger.info("Channel %s (%s) destroyed", self.channel_id, self.channel_type)
        return code

    def status(self) -> StatusCode:
        if self._state != ChannelState.CREATED:
            return StatusCode.CHANNEL_CLOSED
        return self._health

    def add_message(self, msg: XMessage) -> None:
        if self._state != ChannelState.CREATED or msg.kind != MessageKind.DATA:
            logger.debug(
                "Channel %s ignored %s message in state %s",
                self.channel_id,
                msg.kind.value,
                self._state.value,
            )
            return
        try:
            self._outgoing.put_nowait(msg.payload)
        except queue.Full:
            with self._stats_lock:
                self._dropped += 1

    def stats(self) -> ChannelStats:
        with self._stats_lock:
            return ChannelStats(
                channel_id=self.channel_id,
                channel_type=self.channel_type,
                queued=self._outgoing.qsize() + self._in_flight,
                dropped=self._dropped,
                discarded=self._discarded,
                sent_messages=self._sent_messages,
                sent_bytes=self._sent_bytes,
                received_messages=self._received_messages,
                received_bytes=self._received_bytes,
                remote=self.remote,
            )

    # -- helpers for subclasses -----------------------------------------

    @handle_channel_errors("open channel transport")
    def _guarded_open(self) -> StatusCode:
        self._open()
        return StatusCode.CHANNEL_OK

    @handle_channel_errors("close channel transport")
    def _guarded_close(self) -> StatusCode:
        self._close()
        return StatusCode.CHANNEL_OK

    def _spawn(self, target, name: str) -> threading.Thread:
        thread = threading.Thread(
            target=self._run_driver,
            args=(target, name),
            name=f"{self.channel_type}-{self.channel_id}-{name}",
            daemon=True,
        )
        self._threads.append(thread)
        thread.start()
        return thread

    def _run_driver(self, target, name: str) -> None:
        try:
            target()
        except Exception as e:
            if self._stop.is_set():
                return
            logger.error("Channel %s %s driver crashed: %s", self.channel_id, name, e, exc_info=True)
            capture_exception(
                e,
                {"channel_id": self.channel_id, "channel_type": self.channel_type, "driver": name},
            )
            self._transport_failed(e, name)

    def _join_drivers(self) -> None:
        current = threading.current_thread()
        for thread in self._threads:
            if thread is not current:
                thread.join(timeout=_JOIN_TIMEOUT_SECONDS)

    def _drain_outgoing(self) -> None:
        while True:
            try:
                item = self._outgoing.get(timeout=self.poll_interval)
            except queue.Empty:
                if self._stop.is_set():
                    return
                continue
            if item is _STOP or self._stop.is_set():
                return
            with self._stats_lock:
                self._in_flight = 1
            try:
                if self._health != StatusCode.CHANNEL_OK:
                    with self._stats_lock:
                        self._discarded += 1
                    continue
                try:
                    self._transmit(item)
                except ChannelError as e:
                    # Rejected this payload only; the transport is intact.
                    with self._stats_lock:
                        self._discarded += 1
                    logger.warning("Channel %s: outgoing message rejected: %s", self.channel_id, e)
                    self._deliver_error(e.status)
                    continue
                except Exception as e:
                    with self._stats_lock:
                        self._discarded += 1
                    self._transport_failed(e, "writer")
                    continue
                self._record_sent(len(item))
            finally:
                with self._stats_lock:
                    self._in_flight = 0

    def _next_outgoing(self, timeout: float) -> Optional[bytes]:
        """Take the next queued payload for components without a writer thread."""
        try:
            item = self._outgoing.get(timeout=timeout) if timeout > 0 else self._outgoing.get_nowait()
        except queue.Empty:
            return None
        if item is _STOP:
            return None
        return item

    def _discard_outgoing(self) -> None:
        discarded = 0
        while True:
            try:
                item = self._outgoing.get_nowait()
            except queue.Empty:
                break
            if item is not _STOP:
                discarded += 1
        if discarded:
            with self._stats_lock:
                self._discarded += discarded

    def _record_sent(self, size: int) -> None:
        with self._stats_lock:
            self._sent_messages += 1
            self._sent_bytes += size

    def _deliver(self, msg: XMessage) -> StatusCode:
        code = self.callback.on_channel_message(msg)
        if code != StatusCode.CHANNEL_OK:
            logger.debug(
                "Channel %s: %s message refused by handler (%s)",
                self.channel_id,
                msg.kind.value,
                status_name(code),
            )
        return code

    def _count_received(self, size: int) -> None:
        with self._stats_lock:
            self._received_messages += 1
            self._received_bytes += size

    def _deliver_data(self, payload: bytes, remote: Optional[Endpoint] = None) -> StatusCode:
        self._count_received(len(payload))
        return self._deliver(XMessage.data(self.channel_id, payload, remote or self.remote))

    def _deliver_error(self, status: StatusCode) -> StatusCode:
        return self._deliver(XMessage.error(self.channel_id, status, self.remote))

    def _take_disconnect_notice(self) -> Optional[XMessage]:
        with self._notice_lock:
            if self._disconnect_sent:
                return None
            self._disconnect_sent = True
        return XMessage.disconnected(self.channel_id, self.remote)

    def _notify_disconnected(self) -> None:
        notice = self._take_disconnect_notice()
        if notice is not None:
            self._deliver(notice)

    def _transport_failed(self, exc: Optional[BaseException], during: str) -> None:
        if self._stop.is_set():
            # Our own close unblocked the driver.
            return
        with self._notice_lock:
            if self._health != StatusCode.CHANNEL_OK:
                return
            self._health = StatusCode.CHANNEL_SOCKETERR
        if exc is None:
            logger.info("Channel %s: peer closed the connection", self.channel_id)
        else:
            logger.warning("Channel %s: transport failed during %s: %s", self.channel_id, during, exc)
        self._on_transport_lost()


class ChildChannel(ChannelComponent):
    """Channel spawned by a server component for one remote peer.

    Children leave the handler's channel map before their DISCONNECTED
    notice is queued, so a consumer that sees the notice can no longer route
    to them.
    """

    def __init__(
        self,
        info: ChannelInfo,
        channel_id: ChannelId,
        host: ChannelHost,
        parent: "ServerChannel",
        remote: Endpoint,
    ) -> None:
        super().__init__(info, channel_id, host)
        self.parent = parent
        self.remote = remote
        self.channel_type = f"{parent.channel_type}/child"

    def retire(self, notify: bool = True) -> Optional[XMessage]:
        """Destroy this child and produce its DISCONNECTED notice.

        With ``notify`` the notice is delivered here; otherwise it is returned
        for the caller to deliver.
        """
        notice = self._take_disconnect_notice()
        self.destroy()
        if notice is not None and notify:
            self._deliver(notice)
        return notice

    def _on_created(self) -> None:
        self._deliver(XMessage.connected(self.channel_id, self.remote))

    def _on_transport_lost(self) -> None:
        self.retire(notify=True)

    def _on_destroyed(self) -> None:
        self.callback.detach_channel(self.channel_id)
        self.parent.forget_child(self.channel_id)


class ServerChannel(ChannelComponent):
    """Base for server components that spawn one child channel per peer."""

    drains_outgoing = False

    def __init__(self, info: ChannelInfo, channel_id: ChannelId, callback: ChannelCallback) -> None:
        super().__init__(info, channel_id, callback)
        self._children: Dict[ChannelId, ChildChannel] = {}
        self._children_lock = threading.Lock()

    @property
    def host(self) -> ChannelHost:
        return self.callback  # type: ignore[return-value]

    def children(self) -> List[ChildChannel]:
        with self._children_lock:
            return list(self._children.values())

    def forget_child(self, channel_id: ChannelId) -> None:
        with self._children_lock:
            self._children.pop(channel_id, None)

    def adopt_child(self, child: ChildChannel) -> StatusCode:
        """Register a freshly built child and start it.

        The child queues CONNECTED from create() before its receive driver
        starts, so the notice always precedes the child's first DATA.
        """
        code = self.host.attach_channel(child)
        if code != StatusCode.CHANNEL_OK:
            return code
        with self._children_lock:
            self._children[child.channel_id] = child
        code = child.create()
        if code != StatusCode.CHANNEL_OK:
            logger.warning("Channel %s: child %s failed to start (%s)", self.channel_id, child.channel_id, status_name(code))
            child.destroy()
        else:
            logger.info("Channel %s: new peer %s as channel %s", self.channel_id, child.remote, child.channel_id)
        return code

    def add_message(self, msg: XMessage) -> None:
        # A server has no peer of its own; traffic goes through its children.
        with self._stats_lock:
            self._discarded += 1
        logger.debug("Channel %s is a server channel; outgoing message discarded", self.channel_id)

    def _transmit(self, payload: bytes) -> None:
        raise NotImplementedError("server channels do not transmit")

    def _on_destroyed(self) -> None:
        # The listener is already closed, so no new child can race this loop.
        for child in self.children():
            child.retire(notify=True)
