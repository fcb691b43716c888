"""Tests for HTTP/1.1 framing and the incremental parser."""
import pytest

from app.models.status import StatusCode
from app.services.http_codec import (
    SOAP_CONTENT_TYPE,
    HttpParser,
    http_frame_request,
    http_frame_response,
    http_response,
)
from app.utils.error_handler import ChannelError

BODY = b"<Envelope>payload</Envelope>"


def _parse_in_two(stream: bytes, split: int):
    parser = HttpParser()
    return parser.feed(stream[:split]) + parser.feed(stream[split:])


class TestFraming:
    @pytest.mark.unit
    def test_request_bytes(self):
        framed = http_frame_request(BODY, "127.0.0.1:9000", "/soap")
        head, _, body = framed.partition(b"\r\n\r\n")
        assert head.split(b"\r\n") == [
            b"POST /soap HTTP/1.1",
            b"Host: 127.0.0.1:9000",
            b"Content-Type: text/xml; charset=utf-8",
            b'SOAPAction: ""',
            f"Content-Length: {len(BODY)}".encode(),
        ]
        assert body == BODY

    @pytest.mark.unit
    def test_response_bytes(self):
        framed = http_frame_response(400, b"fault", close=True)
        assert framed.startswith(b"HTTP/1.1 400 Bad Request\r\n")
        assert b"Connection: close\r\n" in framed
        assert framed.endswith(b"Content-Length: 5\r\n\r\nfault")

    @pytest.mark.unit
    def test_response_keep_alive(self):
        assert http_response(200, b"").keep_alive
        assert not http_response(200, b"", close=True).keep_alive


class TestParser:
    @pytest.mark.unit
    def test_minimal_post(self):
        (request,) = HttpParser().feed(b"POST / HTTP/1.1\r\nContent-Length: 0\r\n\r\n")
        assert request.kind == "request"
        assert request.method == "POST"
        assert request.path == "/"
        assert request.body == b""

    @pytest.mark.unit
    def test_round_trip_of_framed_request(self):
        (request,) = HttpParser().feed(http_frame_request(BODY, "example.org", "/soap?x=1"))
        assert request.path == "/soap"
        assert request.header("CONTENT-TYPE") == SOAP_CONTENT_TYPE
        assert request.header("soapaction") == '""'
        assert request.body == BODY

    @pytest.mark.unit
    def test_response_parsing(self):
        (response,) = HttpParser().feed(http_frame_response(500, b"oops"))
        assert response.kind == "response"
        assert response.status_code == 500
        assert response.reason == "Internal Server Error"
        assert response.body == b"oops"

    @pytest.mark.unit
    def test_every_two_way_split_parses_identically(self):
        stream = http_frame_request(BODY, "h", "/") + http_frame_request(b"second", "h", "/")
        expected = HttpParser().feed(stream)
        assert [m.body for m in expected] == [BODY, b"second"]
        for split in range(len(stream) + 1):
            assert _parse_in_two(stream, split) == expected

    @pytest.mark.unit
    def test_byte_at_a_time(self):
        stream = http_frame_request(BODY, "h", "/")
        parser = HttpParser()
        messages = []
        for i in range(len(stream)):
            messages.extend(parser.feed(stream[i:i + 1]))
        assert [m.body for m in messages] == [BODY]
        assert parser.buffered == 0

    @pytest.mark.unit
    def test_pipelined_messages_in_one_feed(self):
        stream = b"".join(http_frame_request(bytes([i]) * i, "h") for i in range(5))
        assert [m.body for m in HttpParser().feed(stream)] == [bytes([i]) * i for i in range(5)]

    @pytest.mark.unit
    def test_partial_body_waits(self):
        parser = HttpParser()
        assert parser.feed(b"POST / HTTP/1.1\r\nContent-Length: 4\r\n\r\nab") == []
        (request,) = parser.feed(b"cd")
        assert request.body == b"abcd"

    @pytest.mark.unit
    def test_connection_close_and_http10(self):
        (closing,) = HttpParser().feed(b"POST / HTTP/1.1\r\nConnection: close\r\nContent-Length: 0\r\n\r\n")
        assert not closing.keep_alive
        (old,) = HttpParser().feed(b"POST / HTTP/1.0\r\nContent-Length: 0\r\n\r\n")
        assert not old.keep_alive

    @pytest.mark.unit
    @pytest.mark.parametrize(
        "stream,http_status",
        [
            (b"POST / HTTP/1.1\r\nTransfer-Encoding: chunked\r\n\r\n", 501),
            (b"POST / HTTP/1.1\r\nContent-Length: 3, 4\r\n\r\n", 400),
            (b"POST / HTTP/1.1\r\nContent-Length: -1\r\n\r\n", 400),
            (b"POST / HTTP/1.1\r\nContent-Length: ten\r\n\r\n", 400),
            (b"GARBAGE\r\n\r\n", 400),
            (b"POST / SPDY/3\r\n\r\n", 400),
            (b"POST / HTTP/1.1\r\nno colon here\r\n\r\n", 400),
            (b"HTTP/1.1 2000 OK\r\n\r\n", 400),
            (b"POST / HTTP/1.1\r\nHost: h\r\n\r\n<Envelope/>", 411),
            (b"HTTP/1.1 200 OK\r\n\r\n<Envelope/>", 411),
        ],
    )
    def test_protocol_errors(self, stream, http_status):
        with pytest.raises(ChannelError) as exc:
            HttpParser().feed(stream)
        assert exc.value.status == StatusCode.CHANNEL_PROTOERR
        assert exc.value.http_status == http_status

    @pytest.mark.unit
    def test_bodyless_requests_need_no_length(self):
        parser = HttpParser()
        (get, post) = parser.feed(b"GET / HTTP/1.1\r\nHost: h\r\n\r\n" + http_frame_request(BODY, "h"))
        assert get.method == "GET" and get.body == b""
        assert post.body == BODY
        assert parser.buffered == 0

    @pytest.mark.unit
    def test_repeated_identical_content_length_is_accepted(self):
        (request,) = HttpParser().feed(b"POST / HTTP/1.1\r\nContent-Length: 2\r\nContent-Length: 2\r\n\r\nok")
        assert request.body == b"ok"

    @pytest.mark.unit
    def test_oversized_header_and_body(self):
        with pytest.raises(ChannelError) as exc:
            HttpParser(max_header_bytes=32).feed(b"POST / HTTP/1.1\r\nX-Long: " + b"a" * 64)
        assert exc.value.http_status == 431
        with pytest.raises(ChannelError) as exc:
            HttpParser(max_body_bytes=10).feed(b"POST / HTTP/1.1\r\nContent-Length: 11\r\n\r\n")
        assert exc.value.http_status == 413

    @pytest.mark.unit
    def test_errors_are_sticky(self):
        parser = HttpParser()
        with pytest.raises(ChannelError):
            parser.feed(b"BROKEN\r\n\r\n")
        with pytest.raises(ChannelError):
            parser.feed(b"POST / HTTP/1.1\r\nContent-Length: 0\r\n\r\n")
