"""Tests for the XMessage envelope."""
import pytest
from pydantic import ValidationError

from app.models.endpoint import Endpoint
from app.models.message import MessageKind, XMessage
from app.models.status import StatusCode


class TestXMessage:
    @pytest.mark.unit
    def test_data_keeps_payload_bytes(self):
        payload = bytes(range(256))
        msg = XMessage.data(3, payload)
        assert msg.kind == MessageKind.DATA
        assert msg.payload == payload
        assert msg.channel_id == 3

    @pytest.mark.unit
    def test_empty_data_is_allowed(self):
        assert XMessage.data(1, b"").payload == b""

    @pytest.mark.unit
    def test_lifecycle_messages_have_no_payload(self):
        remote = Endpoint(host="10.0.0.1", port=5000)
        assert XMessage.connected(4, remote).payload == b""
        assert XMessage.disconnected(4).remote is None
        with pytest.raises(ValidationError):
            XMessage(channel_id=4, kind=MessageKind.CONNECTED, payload=b"x")

    @pytest.mark.unit
    def test_error_requires_status(self):
        assert XMessage.error(2, StatusCode.CHANNEL_SOCKETERR).status == StatusCode.CHANNEL_SOCKETERR
        with pytest.raises(ValidationError):
            XMessage(channel_id=2, kind=MessageKind.ERROR)

    @pytest.mark.unit
    def test_negative_channel_id_rejected(self):
        with pytest.raises(ValidationError):
            XMessage.data(-1, b"x")

    @pytest.mark.unit
    def test_messages_are_immutable(self):
        msg = XMessage.data(1, b"x")
        with pytest.raises(ValidationError):
            msg.payload = b"y"
