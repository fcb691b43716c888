"""The message envelope routed between channels and the handler queue."""
from __future__ import annotations

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.channel import ChannelId
from app.models.endpoint import Endpoint
from app.models.status import StatusCode


class MessageKind(str, Enum):
    DATA = "DATA"
    CONNECTED = "CONNECTED"
    DISCONNECTED = "DISCONNECTED"
    ERROR = "ERROR"


class XMessage(BaseModel):
    """One unit of traffic: source/destination channel, kind and opaque payload.

    Payload bytes are never transformed by the platform.
    """

    model_config = ConfigDict(frozen=True)

    channel_id: ChannelId = Field(ge=0)
    kind: MessageKind = MessageKind.DATA
    payload: bytes = b""
    remote: Optional[Endpoint] = None
    status: Optional[StatusCode] = None

    @model_validator(mode="after")
    def check_kind_payload(self) -> "XMessage":
        if self.kind in (MessageKind.CONNECTED, MessageKind.DISCONNECTED) and self.payload:
            raise ValueError(f"{self.kind.value} messages carry no payload")
        if self.kind == MessageKind.ERROR and self.status is None:
            raise ValueError("ERROR messages need a status code")
        return self

    @classmethod
    def data(cls, channel_id: ChannelId, payload: bytes, remote: Optional[Endpoint] = None) -> "XMessage":
        return cls(channel_id=channel_id, kind=MessageKind.DATA, payload=payload, remote=remote)

    @classmethod
    def connected(cls, channel_id: ChannelId, remote: Optional[Endpoint] = None) -> "XMessage":
        return cls(channel_id=channel_id, kind=MessageKind.CONNECTED, remote=remote)

    @classmethod
    def disconnected(cls, channel_id: ChannelId, remote: Optional[Endpoint] = None) -> "XMessage":
        return cls(channel_id=channel_id, kind=MessageKind.DISCONNECTED, remote=remote)

    @classmethod
    def error(
        cls,
        channel_id: ChannelId,
        status: StatusCode,
        remote: Optional[Endpoint] = None,
    ) -> "XMessage":
        return cls(channel_id=channel_id, kind=MessageKind.ERROR, status=status, remote=remote)
