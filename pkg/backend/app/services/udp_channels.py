"""UDP channels with connection emulation.

The server keeps one shared datagram socket and a peer table keyed by source
endpoint. The first datagram from an unknown source creates a child channel
and produces CONNECTED followed by DATA; later datagrams from the same source
produce DATA on that child. Peers silent for longer than ``idle_timeout`` are
forgotten with a DISCONNECTED notice, and a later datagram from the same
source counts as a new connection.

One datagram is always one DATA message. Nothing is added on the wire.
"""
from __future__ import annotations

import logging
import socket
import threading
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

from app.config import settings
from app.models.channel import ChannelId, ChannelInfo, ChannelType
from app.models.endpoint import Endpoint
from app.models.message import XMessage
from app.models.status import StatusCode
from app.services.channel_spi import (
    ChannelCallback,
    ChannelComponent,
    ChildChannel,
    ServerChannel,
)
from app.services.tcp_channels import endpoint_from_address
from app.utils.error_handler import ChannelError

logger = logging.getLogger(__name__)

# 65535 - 8 byte UDP header - 20 byte IPv4 header.
MAX_DATAGRAM_PAYLOAD = 65507
_RECV_SIZE = 65535


def check_datagram_size(payload: bytes) -> None:
    if len(payload) > MAX_DATAGRAM_PAYLOAD:
        raise ChannelError(
            StatusCode.CHANNEL_BADINFO,
            f"{len(payload)} bytes exceeds the {MAX_DATAGRAM_PAYLOAD}-byte datagram limit",
        )


@dataclass
class PeerEntry:
    source: Endpoint
    channel_id: ChannelId
    last_seen: float


class PeerTable:
    """Bidirectional map between source endpoints and child channel IDs."""

    def __init__(self, idle_timeout: float) -> None:
        self.idle_timeout = idle_timeout
        self._by_source: Dict[Endpoint, PeerEntry] = {}
        self._by_id: Dict[ChannelId, PeerEntry] = {}

    def __len__(self) -> int:
        return len(self._by_source)

    def lookup(self, source: Endpoint) -> Optional[ChannelId]:
        entry = self._by_source.get(source)
        return entry.channel_id if entry else None

    def endpoint_of(self, channel_id: ChannelId) -> Optional[Endpoint]:
        entry = self._by_id.get(channel_id)
        return entry.source if entry else None

    def add(self, source: Endpoint, channel_id: ChannelId, now: float) -> None:
        if source in self._by_source or channel_id in self._by_id:
            raise ValueError(f"peer {source} / channel {channel_id} already present")
        entry = PeerEntry(source=source, channel_id=channel_id, last_seen=now)
        self._by_source[source] = entry
        self._by_id[channel_id] = entry

    def touch(self, source: Endpoint, now: float) -> None:
        entry = self._by_source.get(source)
        if entry is not None:
            entry.last_seen = now

    def remove(self, channel_id: ChannelId) -> Optional[Endpoint]:
        entry = self._by_id.pop(channel_id, None)
        if entry is None:
            return None
        self._by_source.pop(entry.source, None)
        return entry.source

    def expired(self, now: float) -> List[PeerEntry]:
        """Entries idle for strictly longer than the timeout (none if timeout is 0)."""
        if self.idle_timeout <= 0:
            return []
        return [e for e in self._by_source.values() if now - e.last_seen > self.idle_timeout]


def _datagram_socket(endpoint: Endpoint) -> tuple[socket.socket, tuple]:
    family, socktype, proto, _, address = socket.getaddrinfo(
        endpoint.host, endpoint.port, type=socket.SOCK_DGRAM
    )[0]
    return socket.socket(family, socktype, proto), address


class UdpPeerChannel(ChildChannel):
    """Virtual connection to one remote source. Sends through the server's socket."""

    parent: "UdpServerChannel"

    def _open(self) -> None:
        pass

    def _on_created(self) -> None:
        # demux() hands CONNECTED back together with the first DATA.
        pass

    def _close(self) -> None:
        # The socket belongs to the server.
        pass

    def _transmit(self, payload: bytes) -> None:
        check_datagram_size(payload)
        try:
            self.parent.send_datagram(payload, self.remote)
        except OSError as e:
            raise ChannelError(StatusCode.CHANNEL_SOCKETERR, f"sendto {self.remote} failed: {e}") from e

    def _on_destroyed(self) -> None:
        super()._on_destroyed()
        self.parent.forget_peer(self.channel_id)


class UdpServerChannel(ServerChannel):
    """Accepts datagrams from any source and demultiplexes them into children."""

    channel_type = ChannelType.UDP_SERVER.value

    def __init__(self, info: ChannelInfo, channel_id: ChannelId, callback: ChannelCallback) -> None:
        super().__init__(info, channel_id, callback)
        self._sock: Optional[socket.socket] = None
        self.peers = PeerTable(info.option("idle_timeout", settings.udp_idle_timeout_seconds))
        self._peers_lock = threading.RLock()
        self.clock: Callable[[], float] = time.monotonic

    def _open(self) -> None:
        sock, address = _datagram_socket(self.info.endpoint)
        try:
            try:
                sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, settings.udp_receive_buffer)
            except OSError as e:
                logger.debug("Could not enlarge UDP receive buffer: %s", e)
            sock.bind(address)
            sock.settimeout(self.poll_interval)
        except OSError:
            sock.close()
            raise
        self._sock = sock

    def _close(self) -> None:
        if self._sock is not None:
            self._sock.close()

    def _start_drivers(self) -> None:
        self._spawn(self._receive_loop, "receiver")
        if self.peers.idle_timeout > 0:
            self._spawn(self._sweep_loop, "sweeper")

    def send_datagram(self, payload: bytes, destination: Endpoint) -> None:
        if self._sock is None:
            raise ChannelError(StatusCode.CHANNEL_CLOSED, "server socket not open")
        self._sock.sendto(payload, destination.as_address())

    def demux(self, payload: bytes, source: Endpoint, now: Optional[float] = None) -> List[XMessage]:
        """Route one datagram to its child, creating the child for a new source.

        Returns the messages to deliver: [CONNECTED, DATA] for a new source,
        [DATA] for a known one.
        """
        now = self.clock() if now is None else now
        with self._peers_lock:
            child_id = self.peers.lookup(source)
            if child_id is not None:
                self.peers.touch(source, now)
                child = self._child(child_id)
                if child is not None:
                    child._count_received(len(payload))
                return [XMessage.data(child_id, payload, source)]

            child = UdpPeerChannel(self.info, self.host.allocate_channel_id(), self.host, self, source)
            code = self.host.attach_channel(child)
            if code != StatusCode.CHANNEL_OK:
                logger.warning("Channel %s: could not register peer %s", self.channel_id, source)
                return []
            with self._children_lock:
                self._children[child.channel_id] = child
            self.peers.add(source, child.channel_id, now)
            child.create()
            child._count_received(len(payload))
            logger.info("Channel %s: new peer %s as channel %s", self.channel_id, source, child.channel_id)
            return [
                XMessage.connected(child.channel_id, source),
                XMessage.data(child.channel_id, payload, source),
            ]

    def sweep(self, now: Optional[float] = None) -> List[XMessage]:
        """Forget peers idle past the timeout; returns one DISCONNECTED per peer."""
        now = self.clock() if now is None else now
        notices: List[XMessage] = []
        with self._peers_lock:
            for entry in self.peers.expired(now):
                self.peers.remove(entry.channel_id)
                child = self._child(entry.channel_id)
                if child is None:
                    continue
                logger.info(
                    "Channel %s: peer %s (channel %s) idle for %.1fs, disconnecting",
                    self.channel_id,
                    entry.source,
                    entry.channel_id,
                    now - entry.last_seen,
                )
                notice = child.retire(notify=False)
                if notice is not None:
                    notices.append(notice)
        return notices

    def forget_peer(self, channel_id: ChannelId) -> None:
        with self._peers_lock:
            self.peers.remove(channel_id)

    def _child(self, channel_id: ChannelId) -> Optional[ChildChannel]:
        with self._children_lock:
            return self._children.get(channel_id)

    def _receive_loop(self) -> None:
        while not self._stop.is_set():
            try:
                payload, address = self._sock.recvfrom(_RECV_SIZE)
            except socket.timeout:
                continue
            except OSError as e:
                if self._stop.is_set():
                    return
                # ICMP errors surface here on some platforms; the socket stays usable.
                logger.warning("Channel %s: receive failed: %s", self.channel_id, e)
                self._deliver_error(StatusCode.CHANNEL_SOCKETERR)
                continue
            source = endpoint_from_address(address)
            with self._peers_lock:
                for msg in self.demux(payload, source):
                    self._deliver(msg)

    def _sweep_loop(self) -> None:
        interval = max(0.05, min(self.peers.idle_timeout / 4, 1.0))
        while not self._stop.wait(interval):
            with self._peers_lock:
                for notice in self.sweep():
                    self._deliver(notice)


class UdpClientChannel(ChannelComponent):
    """Sends every datagram to the fixed remote endpoint and receives its replies."""

    channel_type = ChannelType.UDP_CLIENT.value

    def __init__(self, info: ChannelInfo, channel_id: ChannelId, callback: ChannelCallback) -> None:
        super().__init__(info, channel_id, callback)
        self._sock: Optional[socket.socket] = None
        self.send_interval = info.option("send_interval", settings.udp_send_interval_seconds)

    def _open(self) -> None:
        sock, address = _datagram_socket(self.info.endpoint)
        try:
            sock.connect(address)
            sock.settimeout(self.poll_interval)
        except OSError:
            sock.close()
            raise
        self._sock = sock
        self.remote = self.info.endpoint

    def _close(self) -> None:
        if self._sock is not None:
            self._sock.close()

    def _start_drivers(self) -> None:
        self._spawn(self._receive_loop, "receiver")

    def _transmit(self, payload: bytes) -> None:
        check_datagram_size(payload)
        try:
            self._sock.send(payload)
        except ConnectionRefusedError as e:
            raise ChannelError(StatusCode.CHANNEL_SOCKETERR, f"{self.remote} refused datagram: {e}") from e
        if self.send_interval > 0:
            self._stop.wait(self.send_interval)

    def _receive_loop(self) -> None:
        while not self._stop.is_set():
            try:
                payload = self._sock.recv(_RECV_SIZE)
            except socket.timeout:
                continue
            except ConnectionRefusedError:
                logger.warning("Channel %s: %s is not listening", self.channel_id, self.remote)
                self._deliver_error(StatusCode.CHANNEL_SOCKETERR)
                continue
            except OSError as e:
                self._transport_failed(e, "receive")
                return
            self._deliver_data(payload)
