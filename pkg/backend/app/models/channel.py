"""Pydantic models describing channels: type tokens, creation info, statistics."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.models.endpoint import Endpoint, parse_endpoint
from app.utils.error_handler import ChannelError

# Channel IDs are plain unsigned integers; 0 means "no channel".
ChannelId = int
NO_CHANNEL: ChannelId = 0


class ChannelType(str, Enum):
    """Built-in channel components. The registry accepts other names too."""

    TCP_SERVER = "tcp-server"
    TCP_CLIENT = "tcp-client"
    UDP_SERVER = "udp-server"
    UDP_CLIENT = "udp-client"
    SOAP_SERVER = "soap-server"
    SOAP_CLIENT = "soap-client"


BUILTIN_CHANNEL_TYPES = tuple(t.value for t in ChannelType)


def is_server_type(type_name: str) -> bool:
    return type_name.endswith("-server")


def is_client_type(type_name: str) -> bool:
    return type_name.endswith("-client")


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _parse_positive_int(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise ValueError(f"must be >= 1, got {value}")
    return value


def _parse_non_negative_float(raw: str) -> float:
    value = float(raw)
    if value < 0:
        raise ValueError(f"must be >= 0, got {value}")
    return value


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _parse_text(raw: str) -> str:
    if not raw.strip():
        raise ValueError("must not be empty")
    return raw.strip()


def _parse_http_path(raw: str) -> str:
    path = _parse_text(raw)
    if not path.startswith("/"):
        raise ValueError(f"must start with '/', got {raw!r}")
    return path


OPTION_PARSERS: Dict[str, Callable[[str], object]] = {
    "queue_capacity": _parse_positive_int,
    "read_buffer": _parse_positive_int,
    "tcp_nodelay": _parse_bool,
    "idle_timeout": _parse_non_negative_float,
    "send_interval": _parse_non_negative_float,
    "soap_urn": _parse_text,
    "http_path": _parse_http_path,
    "reply_timeout": _parse_non_negative_float,
    "connect_timeout": _parse_non_negative_float,
}


class ChannelInfo(BaseModel):
    """Everything needed to create one channel.

    For server types the endpoint is the bind address, for client types the
    address to connect to. Option values are text; unknown keys and values
    that do not parse for their key fail validation.
    """

    model_config = ConfigDict(frozen=True)

    channel_type: str = Field(min_length=1)
    endpoint: Endpoint
    options: Dict[str, str] = Field(default_factory=dict)

    @field_validator("channel_type", mode="before")
    @classmethod
    def normalize_channel_type(cls, v: object) -> str:
        if isinstance(v, ChannelType):
            return v.value
        return str(v or "").strip().lower()

    @field_validator("endpoint", mode="before")
    @classmethod
    def accept_endpoint_text(cls, v: object) -> object:
        if isinstance(v, str):
            try:
                return parse_endpoint(v)
            except ChannelError as e:
                raise ValueError(e.detail) from e
        return v

    @field_validator("options", mode="before")
    @classmethod
    def validate_options(cls, v: object) -> Dict[str, str]:
        if v is None:
            return {}
        if not isinstance(v, dict):
            raise ValueError("options must be a mapping")
        cleaned: Dict[str, str] = {}
        for key, value in v.items():
            name = str(key).strip().lower()
            parser = OPTION_PARSERS.get(name)
            if parser is None:
                raise ValueError(f"unknown channel option '{key}'")
            text = str(value)
            try:
                parser(text)
            except ValueError as e:
                raise ValueError(f"invalid value for option '{name}': {e}") from e
            cleaned[name] = text
        return cleaned

    def option(self, key: str, default):
        """Parsed option value, or ``default`` when the option is not set."""
        raw = self.options.get(key)
        if raw is None:
            return default
        return OPTION_PARSERS[key](raw)


@dataclass(frozen=True)
class ChannelStats:
    """Point-in-time counters for one channel.

    ``queued`` counts outgoing items not yet written, including the one the
    writer currently holds. ``dropped`` counts add_message calls refused by a
    full queue; ``discarded`` counts items abandoned because the transport
    died.
    """

    channel_id: ChannelId
    channel_type: str
    queued: int = 0
    dropped: int = 0
    discarded: int = 0
    sent_messages: int = 0
    sent_bytes: int = 0
    received_messages: int = 0
    received_bytes: int = 0
    remote: Optional[Endpoint] = None
