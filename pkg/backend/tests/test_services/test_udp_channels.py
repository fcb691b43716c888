"""Tests for UDP channels and connection emulation."""
import socket
import time

import pytest

from app.models.channel import ChannelInfo
from app.models.endpoint import Endpoint
from app.models.message import MessageKind, XMessage
from app.models.status import StatusCode
from app.services.udp_channels import MAX_DATAGRAM_PAYLOAD, PeerTable, UdpServerChannel
from tests.conftest import drain_messages, kinds, wait_for

SOURCE_A = Endpoint(host="10.0.0.1", port=5000)
SOURCE_B = Endpoint(host="10.0.0.2", port=5000)


class TestPeerTable:
    @pytest.mark.unit
    def test_lookup_both_ways(self):
        table = PeerTable(idle_timeout=60.0)
        table.add(SOURCE_A, 4, now=0.0)
        assert table.lookup(SOURCE_A) == 4
        assert table.endpoint_of(4) == SOURCE_A
        assert table.lookup(SOURCE_B) is None
        assert len(table) == 1

    @pytest.mark.unit
    def test_duplicate_add_rejected(self):
        table = PeerTable(idle_timeout=60.0)
        table.add(SOURCE_A, 4, now=0.0)
        with pytest.raises(ValueError):
            table.add(SOURCE_A, 5, now=0.0)
        with pytest.raises(ValueError):
            table.add(SOURCE_B, 4, now=0.0)

    @pytest.mark.unit
    def test_expiry_is_strictly_after_timeout(self):
        table = PeerTable(idle_timeout=1.0)
        table.add(SOURCE_A, 4, now=10.0)
        table.add(SOURCE_B, 5, now=10.0)
        table.touch(SOURCE_B, now=10.8)
        assert table.expired(11.0) == []
        assert [e.channel_id for e in table.expired(11.01)] == [4]
        assert table.remove(4) == SOURCE_A
        assert table.lookup(SOURCE_A) is None
        assert table.remove(4) is None

    @pytest.mark.unit
    def test_zero_timeout_never_expires(self):
        table = PeerTable(idle_timeout=0)
        table.add(SOURCE_A, 4, now=0.0)
        assert table.expired(1e9) == []


@pytest.fixture
def udp_server(host):
    info = ChannelInfo(channel_type="udp-server", endpoint="127.0.0.1:9", options={"idle_timeout": "1"})
    server = UdpServerChannel(info, 1, host)
    yield server
    for child in server.children():
        child.destroy()


class TestDemux:
    @pytest.mark.unit
    def test_new_source_yields_connected_then_data(self, udp_server, host):
        first = udp_server.demux(b"x", SOURCE_A, now=0.0)
        assert [m.kind for m in first] == [MessageKind.CONNECTED, MessageKind.DATA]
        child_id = first[0].channel_id
        assert first[1].channel_id == child_id
        assert first[1].payload == b"x"
        assert first[0].remote == SOURCE_A
        assert child_id in host.attached

        second = udp_server.demux(b"y", SOURCE_A, now=0.5)
        assert second == [XMessage.data(child_id, b"y", SOURCE_A)]

    @pytest.mark.unit
    def test_distinct_sources_get_distinct_children(self, udp_server):
        a = udp_server.demux(b"1", SOURCE_A, now=0.0)[0].channel_id
        b = udp_server.demux(b"2", SOURCE_B, now=0.0)[0].channel_id
        assert a != b
        assert udp_server.peers.lookup(SOURCE_A) == a
        assert udp_server.peers.lookup(SOURCE_B) == b

    @pytest.mark.unit
    def test_sweep_expires_idle_peer_and_recontact_is_new(self, udp_server, host):
        old = udp_server.demux(b"x", SOURCE_A, now=0.0)[0].channel_id
        udp_server.demux(b"x", SOURCE_B, now=0.9)

        assert udp_server.sweep(now=1.0) == []
        notices = udp_server.sweep(now=1.5)
        assert notices == [XMessage.disconnected(old, SOURCE_A)]
        assert old in host.detached
        assert udp_server.peers.lookup(SOURCE_A) is None
        assert udp_server.peers.lookup(SOURCE_B) is not None

        again = udp_server.demux(b"z", SOURCE_A, now=2.0)
        assert again[0].kind == MessageKind.CONNECTED
        assert again[0].channel_id != old


def _udp_server(handler, port, **options):
    code, sid = handler.create_channel(
        {"channel_type": "udp-server", "endpoint": f"127.0.0.1:{port}", "options": options}
    )
    assert code == StatusCode.CHANNEL_OK
    return sid


@pytest.mark.integration
class TestUdpLoopback:
    def test_three_sources_keep_boundaries(self, handler, udp_port):
        _udp_server(handler, udp_port)
        senders = [socket.socket(socket.AF_INET, socket.SOCK_DGRAM) for _ in range(3)]
        try:
            for round_no in range(5):
                for index, sock in enumerate(senders):
                    sock.sendto(f"{index}:{round_no}".encode(), ("127.0.0.1", udp_port))
                    time.sleep(0.002)

            messages = drain_messages(handler, lambda got: kinds(got).count(MessageKind.DATA) == 15)
        finally:
            for sock in senders:
                sock.close()

        connected = [m for m in messages if m.kind == MessageKind.CONNECTED]
        assert len(connected) == 3
        assert len({m.channel_id for m in connected}) == 3
        for child in connected:
            child_kinds = kinds(messages, child.channel_id)
            assert child_kinds == [MessageKind.CONNECTED] + [MessageKind.DATA] * 5
            payloads = [m.payload for m in messages if m.channel_id == child.channel_id and m.payload]
            index = payloads[0].split(b":")[0]
            assert payloads == [index + f":{n}".encode() for n in range(5)]

    def test_client_round_trip_through_child(self, handler, udp_port):
        _udp_server(handler, udp_port)
        code, cid = handler.create_channel({"channel_type": "udp-client", "endpoint": f"127.0.0.1:{udp_port}"})
        assert code == StatusCode.CHANNEL_OK

        handler.send_to_channel(XMessage.data(cid, b"one"))
        handler.send_to_channel(XMessage.data(cid, b"two"))
        messages = drain_messages(handler, lambda got: kinds(got).count(MessageKind.DATA) == 2)
        child = next(m.channel_id for m in messages if m.kind == MessageKind.CONNECTED)
        assert [m.payload for m in messages if m.channel_id == child and m.payload] == [b"one", b"two"]

        handler.send_to_channel(XMessage.data(child, b"back"))
        replies = drain_messages(handler, lambda got: any(m.channel_id == cid for m in got))
        assert [m.payload for m in replies if m.channel_id == cid] == [b"back"]

    def test_idle_peer_expires_and_returns_with_new_id(self, handler, udp_port):
        _udp_server(handler, udp_port, idle_timeout="1")
        with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
            sock.sendto(b"hi", ("127.0.0.1", udp_port))
            first = drain_messages(handler, lambda got: MessageKind.DATA in kinds(got))
            old = first[0].channel_id

            started = time.monotonic()
            notices = drain_messages(handler, lambda got: MessageKind.DISCONNECTED in kinds(got), timeout=3.0)
            assert kinds(notices, old) == [MessageKind.DISCONNECTED]
            assert time.monotonic() - started < 2.0
            assert old not in handler.channel_ids()

            sock.sendto(b"again", ("127.0.0.1", udp_port))
            second = drain_messages(handler, lambda got: MessageKind.DATA in kinds(got))
        assert second[0].kind == MessageKind.CONNECTED
        assert second[0].channel_id > old

    def test_oversized_datagram_is_an_error_not_a_disconnect(self, handler, udp_port):
        _udp_server(handler, udp_port)
        code, cid = handler.create_channel({"channel_type": "udp-client", "endpoint": f"127.0.0.1:{udp_port}"})
        assert code == StatusCode.CHANNEL_OK

        handler.send_to_channel(XMessage.data(cid, b"x" * (MAX_DATAGRAM_PAYLOAD + 1)))
        handler.send_to_channel(XMessage.data(cid, b"fits"))
        messages = drain_messages(
            handler,
            lambda got: MessageKind.ERROR in kinds(got, cid) and MessageKind.DATA in kinds(got),
        )
        error = next(m for m in messages if m.kind == MessageKind.ERROR)
        assert error.status == StatusCode.CHANNEL_BADINFO
        assert handler.get_channel_status(cid) == StatusCode.CHANNEL_OK
        assert wait_for(lambda: handler.get_channel_stats(cid).discarded == 1)

    def test_refused_destination_reports_error_and_stays_usable(self, handler, udp_port):
        code, cid = handler.create_channel(
            {"channel_type": "udp-client", "endpoint": f"127.0.0.1:{udp_port}", "options": {"send_interval": "0.01"}}
        )
        assert code == StatusCode.CHANNEL_OK
        for _ in range(3):
            handler.send_to_channel(XMessage.data(cid, b"anyone?"))
        messages = drain_messages(handler, lambda got: MessageKind.ERROR in kinds(got, cid), timeout=3.0)
        errors = [m for m in messages if m.kind == MessageKind.ERROR]
        assert errors and all(m.status == StatusCode.CHANNEL_SOCKETERR for m in errors)
        assert MessageKind.DISCONNECTED not in kinds(messages, cid)
        assert handler.get_channel_status(cid) == StatusCode.CHANNEL_OK

    def test_destroying_server_disconnects_every_peer(self, handler, udp_port):
        sid = _udp_server(handler, udp_port)
        senders = [socket.socket(socket.AF_INET, socket.SOCK_DGRAM) for _ in range(2)]
        try:
            for sock in senders:
                sock.sendto(b"hello", ("127.0.0.1", udp_port))
            connected = drain_messages(handler, lambda got: kinds(got).count(MessageKind.CONNECTED) == 2)
            children = {m.channel_id for m in connected if m.kind == MessageKind.CONNECTED}
            assert len(children) == 2

            assert handler.destroy_channel(sid) == StatusCode.CHANNEL_OK
            notices = drain_messages(handler, lambda got: kinds(got).count(MessageKind.DISCONNECTED) == 2)
        finally:
            for sock in senders:
                sock.close()

        assert sorted(m.channel_id for m in notices if m.kind == MessageKind.DISCONNECTED) == sorted(children)
        assert handler.channel_ids() == []

    def test_empty_reply_is_a_zero_length_datagram(self, handler, udp_port):
        _udp_server(handler, udp_port)
        with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
            sock.settimeout(5.0)
            sock.sendto(b"hi", ("127.0.0.1", udp_port))
            messages = drain_messages(handler, lambda got: MessageKind.DATA in kinds(got))
            child = next(m.channel_id for m in messages if m.kind == MessageKind.CONNECTED)

            handler.send_to_channel(XMessage.data(child, b""))
            handler.send_to_channel(XMessage.data(child, b"after"))
            first, source = sock.recvfrom(65535)
            second, _ = sock.recvfrom(65535)

        assert (first, second) == (b"", b"after")
        assert source == ("127.0.0.1", udp_port)
        assert wait_for(lambda: handler.get_channel_stats(child).sent_messages == 2)
