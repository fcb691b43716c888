"""Channel handler: the platform facade applications talk to.

Owns the registry, the live channels keyed by ID, the ID allocator and the
single incoming queue every channel delivers into. All operations are
thread-safe and return status codes instead of raising.
"""
from __future__ import annotations

import logging
import threading
from collections import deque
from enum import Enum
from typing import Any, Deque, Dict, List, Optional, Tuple

from pydantic import ValidationError

from app.config import settings
from app.models.channel import NO_CHANNEL, ChannelId, ChannelInfo, ChannelStats
from app.models.message import MessageKind, XMessage
from app.models.status import StatusCode, status_name
from app.services.channel_spi import ChannelComponent, ServerChannel
from app.services.registry import FactoryRegistry, default_registry
from app.utils.error_handler import ChannelError, status_from_exception

logger = logging.getLogger(__name__)


class HandlerState(str, Enum):
    RUNNING = "running"
    CLOSING = "closing"
    SHUTDOWN = "shutdown"


class ChannelHandler:
    """Creates and destroys channels by ID, routes outgoing messages and
    collects incoming ones in arrival order.

    Usage:
        with ChannelHandler() as handler:
            code, cid = handler.create_channel(
                ChannelInfo(channel_type="tcp-client", endpoint="127.0.0.1:9000")
            )
            handler.send_to_channel(XMessage.data(cid, b"hello"))
            code, msg = handler.get_message()
    """

    def __init__(
        self,
        registry: Optional[FactoryRegistry] = None,
        incoming_high_water: Optional[int] = None,
    ) -> None:
        self.registry = registry if registry is not None else default_registry()
        self._lock = threading.RLock()
        self._channels: Dict[ChannelId, ChannelComponent] = {}
        self._next_id: ChannelId = 1
        self._state = HandlerState.RUNNING

        self._incoming: Deque[XMessage] = deque()
        self._incoming_ready = threading.Condition()
        self._high_water = max(
            0,
            settings.incoming_high_water if incoming_high_water is None else incoming_high_water,
        )
        self._above_high_water = False

    def __enter__(self) -> "ChannelHandler":
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        self.shutdown()

    @property
    def state(self) -> HandlerState:
        return self._state

    # -- platform interface ---------------------------------------------

    def create_channel(self, info: ChannelInfo | Dict[str, Any]) -> Tuple[StatusCode, ChannelId]:
        """Create one channel; the new ID is the second element on success."""
        if self._state != HandlerState.RUNNING:
            return StatusCode.CHANNEL_CLOSED, NO_CHANNEL
        if not isinstance(info, ChannelInfo):
            try:
                info = ChannelInfo.model_validate(info)
            except (ValidationError, ChannelError, ValueError, TypeError) as e:
                logger.warning("Rejected channel info: %s", e)
                return StatusCode.CHANNEL_BADINFO, NO_CHANNEL

        factory = self.registry.resolve(info.channel_type)
        if factory is None:
            logger.warning("Unknown channel type '%s'", info.channel_type)
            return StatusCode.CHANNEL_BADINFO, NO_CHANNEL

        channel_id = self.allocate_channel_id()
        try:
            component = factory(info, channel_id, self)
        except Exception as e:
            code = status_from_exception(e, StatusCode.CHANNEL_BADINFO)
            logger.warning("Failed to construct %s channel: %s", info.channel_type, e)
            return code, NO_CHANNEL

        with self._lock:
            if self._state != HandlerState.RUNNING:
                return StatusCode.CHANNEL_CLOSED, NO_CHANNEL
            self._channels[channel_id] = component

        code = component.create()
        if code != StatusCode.CHANNEL_OK:
            with self._lock:
                self._channels.pop(channel_id, None)
            component.destroy()
            logger.warning(
                "Creating %s channel on %s failed: %s",
                info.channel_type,
                info.endpoint,
                status_name(code),
            )
            return code, NO_CHANNEL

        if self._state != HandlerState.RUNNING:
            # Lost a race with shutdown().
            self.destroy_channel(channel_id)
            return StatusCode.CHANNEL_CLOSED, NO_CHANNEL
        return StatusCode.CHANNEL_OK, channel_id

    def destroy_channel(self, channel_id: ChannelId) -> StatusCode:
        """Destroy one channel. Destroying a server also destroys its children,
        each of which queues a DISCONNECTED notice."""
        with self._lock:
            component = self._channels.pop(channel_id, None)
        if component is None:
            return StatusCode.CHANNEL_NOTFOUND
        return component.destroy()

    def send_to_channel(self, msg: XMessage) -> StatusCode:
        """Queue a DATA message on its channel. Delivery is asynchronous."""
        if self._state != HandlerState.RUNNING:
            return StatusCode.CHANNEL_CLOSED
        if msg.kind != MessageKind.DATA:
            return StatusCode.CHANNEL_BADINFO
        with self._lock:
            component = self._channels.get(msg.channel_id)
        if component is None:
            return StatusCode.CHANNEL_NOTFOUND
        component.add_message(msg)
        return StatusCode.CHANNEL_OK

    def get_message(self) -> Tuple[StatusCode, Optional[XMessage]]:
        """Non-blocking poll of the incoming queue.

        After shutdown, queued messages are still returned; once the queue is
        empty the result is CHANNEL_CLOSED.
        """
        with self._incoming_ready:
            return self._pop_locked()

    def wait_message(self, timeout: Optional[float] = None) -> Tuple[StatusCode, Optional[XMessage]]:
        """Like get_message, but waits up to ``timeout`` seconds for a message."""
        with self._incoming_ready:
            self._incoming_ready.wait_for(
                lambda: bool(self._incoming) or self._state == HandlerState.SHUTDOWN,
                timeout=timeout,
            )
            return self._pop_locked()

    def shutdown(self) -> StatusCode:
        """Destroy every channel and stop accepting work. Best-effort and idempotent."""
        with self._lock:
            if self._state != HandlerState.RUNNING:
                return StatusCode.CHANNEL_OK
            self._state = HandlerState.CLOSING
            components = list(self._channels.values())

        # Servers first so their children are retired through them.
        components.sort(key=lambda c: 0 if isinstance(c, ServerChannel) else 1)
        for component in components:
            try:
                code = component.destroy()
                if code != StatusCode.CHANNEL_OK:
                    logger.warning(
                        "Channel %s did not close cleanly: %s",
                        component.channel_id,
                        status_name(code),
                    )
            except Exception as e:
                logger.error("Error destroying channel %s during shutdown: %s", component.channel_id, e, exc_info=True)

        with self._lock:
            self._channels.clear()
        with self._incoming_ready:
            self._state = HandlerState.SHUTDOWN
            self._incoming_ready.notify_all()
        logger.info("Channel handler shut down (%d channels closed)", len(components))
        return StatusCode.CHANNEL_OK

    # -- introspection ---------------------------------------------------

    def get_channel_status(self, channel_id: ChannelId) -> StatusCode:
        with self._lock:
            component = self._channels.get(channel_id)
        if component is None:
            return StatusCode.CHANNEL_NOTFOUND
        return component.status()

    def get_channel_stats(self, channel_id: ChannelId) -> Optional[ChannelStats]:
        with self._lock:
            component = self._channels.get(channel_id)
        return component.stats() if component is not None else None

    def channel_ids(self) -> List[ChannelId]:
        with self._lock:
            return sorted(self._channels)

    def pending_messages(self) -> int:
        with self._incoming_ready:
            return len(self._incoming)

    # -- ChannelHost (called by channel components) ---------------------

    def on_channel_message(self, msg: XMessage) -> StatusCode:
        with self._incoming_ready:
            if self._state == HandlerState.SHUTDOWN:
                return StatusCode.CHANNEL_CLOSED
            self._incoming.append(msg)
            if self._high_water and not self._above_high_water and len(self._incoming) >= self._high_water:
                self._above_high_water = True
                logger.warning(
                    "Incoming queue reached high-water mark (%d messages)",
                    self._high_water,
                )
            self._incoming_ready.notify()
        return StatusCode.CHANNEL_OK

    def allocate_channel_id(self) -> ChannelId:
        with self._lock:
            channel_id = self._next_id
            self._next_id += 1
            return channel_id

    def attach_channel(self, component: ChannelComponent) -> StatusCode:
        with self._lock:
            if self._state == HandlerState.SHUTDOWN:
                return StatusCode.CHANNEL_CLOSED
            if component.channel_id in self._channels:
                return StatusCode.CHANNEL_BADINFO
            self._channels[component.channel_id] = component
        return StatusCode.CHANNEL_OK

    def detach_channel(self, channel_id: ChannelId) -> None:
        with self._lock:
            self._channels.pop(channel_id, None)

    def _pop_locked(self) -> Tuple[StatusCode, Optional[XMessage]]:
        if self._incoming:
            msg = self._incoming.popleft()
            if self._above_high_water and len(self._incoming) < self._high_water:
                self._above_high_water = False
            return StatusCode.CHANNEL_OK, msg
        if self._state == HandlerState.SHUTDOWN:
            return StatusCode.CHANNEL_CLOSED, None
        return StatusCode.CHANNEL_NOMESSAGES, None
