"""Minimal HTTP/1.1 framing for SOAP carriage.

Supports Content-Length bodies and sequential messages on one connection.
A POST, PUT or PATCH request, and any response that may carry a body, must
send Content-Length (411 otherwise). Chunked transfer-encoding is rejected
(the server answers 501).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from http import HTTPStatus
from typing import Dict, List, Literal, Optional

from app.models.status import StatusCode
from app.utils.error_handler import ChannelError

SOAP_CONTENT_TYPE = "text/xml; charset=utf-8"

MAX_HEADER_BYTES = 64 * 1024
MAX_BODY_BYTES = 64 * 1024 * 1024

_CRLF = b"\r\n"
_HEAD_END = b"\r\n\r\n"
_VERSION_RE = re.compile(r"^HTTP/\d\.\d$")
_METHOD_RE = re.compile(r"^[!#$%&'*+.^_`|~0-9A-Za-z-]+$")
_HEADER_NAME_RE = re.compile(r"^[!#$%&'*+.^_`|~0-9A-Za-z-]+$")


@dataclass(frozen=True)
class HttpMessage:
    """One parsed or to-be-sent HTTP message. Header names are lower-case."""

    kind: Literal["request", "response"]
    version: str = "HTTP/1.1"
    method: Optional[str] = None
    target: Optional[str] = None
    status_code: Optional[int] = None
    reason: Optional[str] = None
    headers: Dict[str, str] = field(default_factory=dict)
    body: bytes = b""

    def header(self, name: str, default: Optional[str] = None) -> Optional[str]:
        return self.headers.get(name.lower(), default)

    @property
    def path(self) -> str:
        return (self.target or "/").split("?", 1)[0] or "/"

    @property
    def keep_alive(self) -> bool:
        connection = (self.header("connection") or "").lower()
        if self.version == "HTTP/1.0":
            return "keep-alive" in connection
        return "close" not in connection

    def start_line(self) -> str:
        if self.kind == "request":
            return f"{self.method} {self.target} {self.version}"
        return f"{self.version} {self.status_code} {self.reason or ''}".rstrip()

    def to_bytes(self) -> bytes:
        """Serialize with CRLF line endings. Content-Length always matches the body."""
        lines = [self.start_line()]
        for name, value in self.headers.items():
            if name == "content-length":
                continue
            lines.append(f"{_display_name(name)}: {value}")
        lines.append(f"Content-Length: {len(self.body)}")
        head = "\r\n".join(lines) + "\r\n\r\n"
        return head.encode("latin-1") + self.body


def _display_name(name: str) -> str:
    if name.lower() == "soapaction":
        return "SOAPAction"
    return "-".join(part.capitalize() for part in name.split("-"))


def http_frame_request(body: bytes, host: str, path: str = "/") -> bytes:
    """Frame a SOAP POST request."""
    return HttpMessage(
        kind="request",
        method="POST",
        target=path or "/",
        headers={
            "host": host,
            "content-type": SOAP_CONTENT_TYPE,
            "soapaction": '""',
        },
        body=body,
    ).to_bytes()


def http_response(
    status: int,
    body: bytes = b"",
    content_type: str = SOAP_CONTENT_TYPE,
    close: bool = False,
    extra_headers: Optional[Dict[str, str]] = None,
) -> HttpMessage:
    headers = {"content-type": content_type}
    if close:
        headers["connection"] = "close"
    for name, value in (extra_headers or {}).items():
        headers[name.lower()] = value
    try:
        reason = HTTPStatus(status).phrase
    except ValueError:
        reason = ""
    return HttpMessage(kind="response", status_code=status, reason=reason, headers=headers, body=body)


def http_frame_response(
    status: int,
    body: bytes = b"",
    content_type: str = SOAP_CONTENT_TYPE,
    close: bool = False,
) -> bytes:
    return http_response(status, body, content_type, close).to_bytes()


def soap_request_headers() -> Dict[str, str]:
    """Headers an HTTP client adds to a SOAP POST (it supplies Host and Content-Length)."""
    return {"Content-Type": SOAP_CONTENT_TYPE, "SOAPAction": '""'}


def _protocol_error(detail: str, http_status: int = 400) -> ChannelError:
    return ChannelError(StatusCode.CHANNEL_PROTOERR, detail, http_status=http_status)


_BODY_METHODS = frozenset({"POST", "PUT", "PATCH"})


def _expects_body(message: HttpMessage) -> bool:
    if message.kind == "request":
        return message.method in _BODY_METHODS
    return not (100 <= message.status_code < 200 or message.status_code in (204, 304))


@dataclass
class _Head:
    message: HttpMessage
    content_length: int


class HttpParser:
    """Incremental parser: feed bytes as they arrive, collect complete messages.

    Results do not depend on how the stream is split across feed() calls.
    After an error the parser stays failed; the connection should be closed.
    """

    def __init__(self, max_header_bytes: int = MAX_HEADER_BYTES, max_body_bytes: int = MAX_BODY_BYTES) -> None:
        self.max_header_bytes = max_header_bytes
        self.max_body_bytes = max_body_bytes
        self._buffer = bytearray()
        self._head: Optional[_Head] = None
        self._error: Optional[ChannelError] = None

    @property
    def buffered(self) -> int:
        return len(self._buffer)

    def feed(self, data: bytes) -> List[HttpMessage]:
        if self._error is not None:
            raise self._error
        self._buffer += data
        messages: List[HttpMessage] = []
        try:
            while True:
                message = self._next_message()
                if message is None:
                    return messages
                messages.append(message)
        except ChannelError as e:
            self._error = e
            raise

    def _next_message(self) -> Optional[HttpMessage]:
        if self._head is None:
            # Tolerate empty lines between messages.
            while self._buffer.startswith(_CRLF):
                del self._buffer[:2]
            end = self._buffer.find(_HEAD_END)
            if end < 0:
                if len(self._buffer) > self.max_header_bytes:
                    raise _protocol_error("header section too large", 431)
                return None
            if end > self.max_header_bytes:
                raise _protocol_error("header section too large", 431)
            head = bytes(self._buffer[:end])
            del self._buffer[: end + len(_HEAD_END)]
            self._head = self._parse_head(head)

        length = self._head.content_length
        if len(self._buffer) < length:
            return None
        body = bytes(self._buffer[:length])
        del self._buffer[:length]
        message = self._head.message
        self._head = None
        return HttpMessage(
            kind=message.kind,
            version=message.version,
            method=message.method,
            target=message.target,
            status_code=message.status_code,
            reason=message.reason,
            headers=message.headers,
            body=body,
        )

    def _parse_head(self, head: bytes) -> _Head:
        lines = head.decode("latin-1").split("\r\n")
        start, header_lines = lines[0], lines[1:]
        message = self._parse_start_line(start)
        headers = self._parse_headers(header_lines)

        transfer_encoding = headers.get("transfer-encoding")
        if transfer_encoding is not None:
            raise _protocol_error(f"transfer-encoding '{transfer_encoding}' not supported", 501)

        content_length = 0
        raw_length = headers.get("content-length")
        if raw_length is None and _expects_body(message):
            # Body length must be declared; close-delimited bodies are not supported.
            raise _protocol_error("Content-Length required", 411)
        if raw_length is not None:
            values = {v.strip() for v in raw_length.split(",")}
            if len(values) != 1:
                raise _protocol_error(f"conflicting Content-Length values: {raw_length}")
            value = values.pop()
            if not value.isdigit():
                raise _protocol_error(f"invalid Content-Length: {raw_length!r}")
            content_length = int(value)
            if content_length > self.max_body_bytes:
                raise _protocol_error(f"body of {content_length} bytes too large", 413)

        return _Head(
            message=HttpMessage(
                kind=message.kind,
                version=message.version,
                method=message.method,
                target=message.target,
                status_code=message.status_code,
                reason=message.reason,
                headers=headers,
            ),
            content_length=content_length,
        )

    @staticmethod
    def _parse_start_line(line: str) -> HttpMessage:
        if line.startswith("HTTP/"):
            parts = line.split(" ", 2)
            if len(parts) < 2 or not _VERSION_RE.match(parts[0]) or not (len(parts[1]) == 3 and parts[1].isdigit()):
                raise _protocol_error(f"malformed status line: {line!r}")
            return HttpMessage(
                kind="response",
                version=parts[0],
                status_code=int(parts[1]),
                reason=parts[2] if len(parts) > 2 else "",
            )
        parts = line.split(" ")
        if len(parts) != 3 or not _METHOD_RE.match(parts[0]) or not parts[1] or not _VERSION_RE.match(parts[2]):
            raise _protocol_error(f"malformed request line: {line!r}")
        return HttpMessage(kind="request", method=parts[0], target=parts[1], version=parts[2])

    @staticmethod
    def _parse_headers(lines: List[str]) -> Dict[str, str]:
        headers: Dict[str, str] = {}
        for line in lines:
            name, sep, value = line.partition(":")
            if not sep or not _HEADER_NAME_RE.match(name):
                raise _protocol_error(f"malformed header line: {line!r}")
            key = name.lower()
            value = value.strip()
            headers[key] = f"{headers[key]}, {value}" if key in headers else value
        return headers
