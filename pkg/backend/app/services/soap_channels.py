"""SOAP channels: binary payloads carried in rawDataMessage envelopes over HTTP POST.

Each client send is one request/response exchange. The request envelope
carries the payload; a non-empty payload in the response envelope arrives as
DATA on the client channel. On the server, each accepted connection is a
child channel: a decoded request becomes DATA on the child, and the reply
carries the next payload the application queued on that child.
"""
from __future__ import annotations

import logging
import socket
from typing import Optional

import httpx

from app.config import settings
from app.models.channel import ChannelId, ChannelInfo, ChannelType
from app.models.endpoint import Endpoint
from app.models.status import StatusCode
from app.services.channel_spi import ChannelCallback, ChannelComponent, ChannelHost, ServerChannel
from app.services.http_codec import HttpMessage, HttpParser, http_response, soap_request_headers
from app.services.soap_codec import (
    decode_fault,
    decode_raw_data_envelope,
    encode_fault_envelope,
    encode_raw_data_envelope,
)
from app.services.tcp_channels import TcpConnectionChannel, TcpServerChannel
from app.utils.error_handler import ChannelError

logger = logging.getLogger(__name__)


class SoapClientChannel(ChannelComponent):
    """Posts each outgoing payload to the server; requests are serialized per channel."""

    channel_type = ChannelType.SOAP_CLIENT.value

    def __init__(self, info: ChannelInfo, channel_id: ChannelId, callback: ChannelCallback) -> None:
        super().__init__(info, channel_id, callback)
        self.urn = info.option("soap_urn", settings.soap_urn)
        self.path = info.option("http_path", settings.soap_http_path)
        self.timeout = info.option("connect_timeout", settings.soap_client_timeout_seconds)
        self._client: Optional[httpx.Client] = None

    @property
    def url(self) -> str:
        endpoint = self.info.endpoint
        return f"http://{endpoint.url_host}:{endpoint.port}{self.path}"

    def _open(self) -> None:
        # The TCP connection is opened by the first request.
        self._client = httpx.Client(timeout=self.timeout or None, headers=soap_request_headers())
        self.remote = self.info.endpoint

    def _close(self) -> None:
        if self._client is not None:
            self._client.close()

    def _transmit(self, payload: bytes) -> None:
        response = self._client.post(self.url, content=encode_raw_data_envelope(payload, self.urn))
        if response.status_code >= 400:
            fault = decode_fault(response.content)
            raise ChannelError(
                StatusCode.CHANNEL_PROTOERR,
                f"server answered {response.status_code}" + (f": {fault}" if fault else ""),
            )
        if not response.content:
            return
        reply = decode_raw_data_envelope(response.content)
        if reply:
            self._deliver_data(reply)

    def _on_transport_lost(self) -> None:
        self._deliver_error(StatusCode.CHANNEL_SOCKETERR)
        self._notify_disconnected()


class SoapConnectionChannel(TcpConnectionChannel):
    """One accepted HTTP connection. Requests are handled strictly in order."""

    # Queued payloads are consumed as replies, not written by a writer thread.
    drains_outgoing = False

    def __init__(
        self,
        info: ChannelInfo,
        channel_id: ChannelId,
        host: ChannelHost,
        parent: ServerChannel,
        remote: Endpoint,
        sock: socket.socket,
    ) -> None:
        super().__init__(info, channel_id, host, parent, remote, sock)
        self.urn = info.option("soap_urn", settings.soap_urn)
        self.path = info.option("http_path", settings.soap_http_path)
        self.reply_timeout = info.option("reply_timeout", settings.soap_reply_timeout_seconds)
        self._parser = HttpParser()

    def _on_chunk(self, chunk: bytes) -> None:
        try:
            requests = self._parser.feed(chunk)
        except ChannelError as e:
            # The stream can no longer be framed: answer and hang up.
            logger.warning("Channel %s: unusable HTTP from %s: %s", self.channel_id, self.remote, e.detail)
            self._send(self._fault(e.http_status or 400, "SOAP-ENV:Client", e.detail, close=True))
            self.retire(notify=True)
            return
        for request in requests:
            response = self.dispatch(request)
            if not self._send(response):
                return
            if not request.keep_alive or not response.keep_alive:
                self.retire(notify=True)
                return

    def dispatch(self, request: HttpMessage) -> HttpMessage:
        """Answer one request. Decodable envelopes become DATA on this channel."""
        if request.method != "POST":
            return self._fault(405, "SOAP-ENV:Client", f"method {request.method} not allowed", allow="POST")
        if request.path != self.path:
            return self._fault(404, "SOAP-ENV:Client", f"no SOAP endpoint at {request.path}")
        try:
            payload = decode_raw_data_envelope(request.body)
        except ChannelError as e:
            logger.warning("Channel %s: rejected request from %s: %s", self.channel_id, self.remote, e.detail)
            return self._fault(400, "SOAP-ENV:Client", e.detail)

        self._deliver_data(payload)
        reply = self._next_outgoing(self.reply_timeout)
        if reply is None:
            reply = b""
        else:
            self._record_sent(len(reply))
        return http_response(200, encode_raw_data_envelope(reply, self.urn))

    def _fault(self, status: int, code: str, text: str, close: bool = False, allow: Optional[str] = None) -> HttpMessage:
        return http_response(
            status,
            encode_fault_envelope(code, text, self.urn),
            close=close,
            extra_headers={"allow": allow} if allow else None,
        )

    def _send(self, response: HttpMessage) -> bool:
        try:
            self._sock.sendall(response.to_bytes())
        except OSError as e:
            self._transport_failed(e, "write")
            return False
        return True


class SoapServerChannel(TcpServerChannel):
    """Accepts HTTP connections carrying rawDataMessage requests."""

    channel_type = ChannelType.SOAP_SERVER.value
    connection_class = SoapConnectionChannel
