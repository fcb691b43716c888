"""Network endpoint model and its ``host:port`` text form."""
from __future__ import annotations

import re

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from app.models.status import StatusCode
from app.utils.error_handler import ChannelError

_BRACKETED_RE = re.compile(r"^\[(?P<host>[^\]]+)\]:(?P<port>[^:]+)$")


class Endpoint(BaseModel):
    """Host address (IPv4, IPv6 or DNS name) plus port."""

    model_config = ConfigDict(frozen=True)

    host: str = Field(min_length=1)
    port: int = Field(ge=1, le=65535)

    @field_validator("host")
    @classmethod
    def strip_host(cls, v: str) -> str:
        v = v.strip()
        if not v:
            raise ValueError("host must not be empty")
        return v

    @property
    def is_ipv6(self) -> bool:
        return ":" in self.host

    @property
    def url_host(self) -> str:
        """Host as it appears in a URL authority (IPv6 literals bracketed)."""
        return f"[{self.host}]" if self.is_ipv6 else self.host

    def as_address(self) -> tuple[str, int]:
        return (self.host, self.port)

    def __str__(self) -> str:
        return f"{self.url_host}:{self.port}"


def format_endpoint(endpoint: Endpoint) -> str:
    return str(endpoint)


def parse_endpoint(text: str) -> Endpoint:
    """Parse ``host:port`` or ``[ipv6]:port``.

    Raises ChannelError(CHANNEL_BADINFO) on malformed text or a port outside
    1..65535.
    """
    raw = (text or "").strip()
    match = _BRACKETED_RE.match(raw)
    if match:
        host, port_text = match.group("host"), match.group("port")
    else:
        host, sep, port_text = raw.rpartition(":")
        if not sep or ":" in host:
            # Unbracketed IPv6 is ambiguous.
            raise ChannelError(StatusCode.CHANNEL_BADINFO, f"expected host:port, got {text!r}")
    if not port_text.isdigit():
        raise ChannelError(StatusCode.CHANNEL_BADINFO, f"bad port in {text!r}")
    try:
        return Endpoint(host=host, port=int(port_text))
    except ValidationError as e:
        raise ChannelError(StatusCode.CHANNEL_BADINFO, f"invalid endpoint {text!r}: {e.errors()[0]['msg']}") from e
