"""Tests for endpoint parsing and formatting."""
import pytest

from app.models.endpoint import Endpoint, format_endpoint, parse_endpoint
from app.models.status import StatusCode
from app.utils.error_handler import ChannelError


class TestParseEndpoint:
    @pytest.mark.unit
    def test_ipv4(self):
        assert parse_endpoint("127.0.0.1:9000") == Endpoint(host="127.0.0.1", port=9000)

    @pytest.mark.unit
    def test_hostname(self):
        endpoint = parse_endpoint(" localhost:80 ")
        assert endpoint.host == "localhost"
        assert endpoint.port == 80

    @pytest.mark.unit
    def test_bracketed_ipv6(self):
        endpoint = parse_endpoint("[::1]:9000")
        assert endpoint.host == "::1"
        assert endpoint.is_ipv6
        assert str(endpoint) == "[::1]:9000"

    @pytest.mark.unit
    @pytest.mark.parametrize(
        "text",
        ["", "localhost", "127.0.0.1:", ":9000", "::1:9000", "host:abc", "host:0", "host:65536", "[::1]"],
    )
    def test_rejects_malformed(self, text):
        with pytest.raises(ChannelError) as exc:
            parse_endpoint(text)
        assert exc.value.status == StatusCode.CHANNEL_BADINFO

    @pytest.mark.unit
    @pytest.mark.parametrize("text", ["10.0.0.1:5000", "[fe80::1]:65535", "example.org:1"])
    def test_format_parse_identity(self, text):
        assert format_endpoint(parse_endpoint(text)) == text

    @pytest.mark.unit
    def test_endpoints_hash_by_value(self):
        a = parse_endpoint("10.0.0.1:5000")
        b = Endpoint(host="10.0.0.1", port=5000)
        assert {a: 1}[b] == 1
