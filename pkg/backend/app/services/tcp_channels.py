"""TCP stream channels: client, server, and the per-connection child.

TCP DATA messages follow stream semantics. Each successful read becomes one
DATA message, chunk boundaries carry no meaning, and nothing is added to or
removed from the byte stream on the wire.
"""
from __future__ import annotations

import logging
import socket
from typing import Optional

from app.config import settings
from app.models.channel import ChannelId, ChannelInfo, ChannelType
from app.models.endpoint import Endpoint
from app.models.status import StatusCode
from app.services.channel_spi import (
    ChannelCallback,
    ChannelComponent,
    ChannelHost,
    ChildChannel,
    ServerChannel,
)

logger = logging.getLogger(__name__)

_LISTEN_BACKLOG = 128


def endpoint_from_address(address) -> Endpoint:
    """Endpoint for a socket address tuple (IPv4 or IPv6 form)."""
    return Endpoint(host=str(address[0]), port=int(address[1]))


def close_socket(sock: Optional[socket.socket]) -> None:
    """Shut down both directions (waking blocked readers/writers), then close."""
    if sock is None:
        return
    try:
        sock.shutdown(socket.SHUT_RDWR)
    except OSError:
        pass
    sock.close()


class TcpStreamMixin:
    """Reader driver and byte-exact writer shared by TCP client and child channels."""

    _sock: Optional[socket.socket] = None

    def _configure_stream(self, sock: socket.socket) -> None:
        sock.settimeout(None)
        if self.info.option("tcp_nodelay", settings.tcp_nodelay):
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._read_buffer = self.info.option("read_buffer", settings.tcp_read_buffer)
        self._sock = sock

    def _start_drivers(self) -> None:
        self._spawn(self._read_loop, "reader")

    def _read_loop(self) -> None:
        sock = self._sock
        while not self._stop.is_set():
            try:
                chunk = sock.recv(self._read_buffer)
            except OSError as e:
                self._transport_failed(e, "read")
                return
            if not chunk:
                self._transport_failed(None, "read")
                return
            self._on_chunk(chunk)

    def _on_chunk(self, chunk: bytes) -> None:
        self._deliver_data(chunk)

    def _transmit(self, payload: bytes) -> None:
        # Empty payloads write nothing.
        if payload:
            self._sock.sendall(payload)

    def _close(self) -> None:
        close_socket(self._sock)


class TcpClientChannel(TcpStreamMixin, ChannelComponent):
    """Connects to a remote TCP endpoint at create()."""

    channel_type = ChannelType.TCP_CLIENT.value

    def _open(self) -> None:
        endpoint = self.info.endpoint
        timeout = self.info.option("connect_timeout", settings.connect_timeout_seconds)
        sock = socket.create_connection(endpoint.as_address(), timeout=timeout or None)
        self._configure_stream(sock)
        self.remote = endpoint
        logger.debug("Channel %s connected to %s", self.channel_id, endpoint)


class TcpConnectionChannel(TcpStreamMixin, ChildChannel):
    """Child channel wrapping one accepted connection."""

    def __init__(
        self,
        info: ChannelInfo,
        channel_id: ChannelId,
        host: ChannelHost,
        parent: ServerChannel,
        remote: Endpoint,
        sock: socket.socket,
    ) -> None:
        super().__init__(info, channel_id, host, parent, remote)
        self._configure_stream(sock)

    def _open(self) -> None:
        # Already connected by accept().
        pass


class TcpServerChannel(ServerChannel):
    """Listens for TCP connections and spawns one child channel per connection."""

    channel_type = ChannelType.TCP_SERVER.value
    connection_class = TcpConnectionChannel

    def __init__(self, info: ChannelInfo, channel_id: ChannelId, callback: ChannelCallback) -> None:
        super().__init__(info, channel_id, callback)
        self._listener: Optional[socket.socket] = None

    def _open(self) -> None:
        endpoint = self.info.endpoint
        family, socktype, proto, _, address = socket.getaddrinfo(
            endpoint.host, endpoint.port, type=socket.SOCK_STREAM
        )[0]
        listener = socket.socket(family, socktype, proto)
        try:
            listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            listener.bind(address)
            listener.listen(_LISTEN_BACKLOG)
            listener.settimeout(self.poll_interval)
        except OSError:
            listener.close()
            raise
        self._listener = listener

    def _start_drivers(self) -> None:
        self._spawn(self._accept_loop, "acceptor")

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, address = self._listener.accept()
            except socket.timeout:
                continue
            except OSError as e:
                if self._stop.is_set():
                    return
                logger.warning("Channel %s: accept failed: %s", self.channel_id, e)
                self._deliver_error(StatusCode.CHANNEL_SOCKETERR)
                # Persistent failures such as EMFILE repeat on every call.
                self._stop.wait(self.poll_interval)
                continue
            self._accept_connection(conn, endpoint_from_address(address))

    def _accept_connection(self, conn: socket.socket, remote: Endpoint) -> None:
        try:
            child = self.connection_class(
                self.info,
                self.host.allocate_channel_id(),
                self.host,
                self,
                remote,
                conn,
            )
        except OSError as e:
            logger.warning("Channel %s: could not set up connection from %s: %s", self.channel_id, remote, e)
            close_socket(conn)
            self._deliver_error(StatusCode.CHANNEL_SOCKETERR)
            return
        if self.adopt_child(child) != StatusCode.CHANNEL_OK:
            close_socket(conn)

    def _close(self) -> None:
        if self._listener is not None:
            self._listener.close()
