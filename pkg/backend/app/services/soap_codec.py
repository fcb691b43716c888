"""SOAP rawDataMessage envelope codec.

Emission is a fixed byte template so the same payload always serializes to
the same bytes. Parsing is lenient: elements are located by local name, any
prefix is accepted, and unknown elements and attributes are ignored.
"""
from __future__ import annotations

import base64
import binascii
import logging
import re
from typing import Optional
from xml.etree import ElementTree as ET
from xml.sax.saxutils import escape, quoteattr

from app.config import settings
from app.models.status import StatusCode
from app.utils.error_handler import ChannelError

logger = logging.getLogger(__name__)

SOAP_ENV_NS = "http://schemas.xmlsoap.org/soap/envelope/"
SOAP_ENC_NS = "http://schemas.xmlsoap.org/soap/encoding/"
# 1999 schema URIs, as the envelope layout was published.
XSI_NS = "http://www.w3.org/1999/XMLSchema-instance"
XSD_NS = "http://www.w3.org/1999/XMLSchema"
DEFAULT_URN = "urn:simple-calc"

RAW_DATA_ELEMENT = "rawDataMessage"
DATA_ELEMENT = "data"

_WHITESPACE_RE = re.compile(rb"\s+")

_ENVELOPE_OPEN = (
    '<?xml version="1.0" encoding="UTF-8"?>\n'
    '<SOAP-ENV:Envelope'
    f' xmlns:SOAP-ENV="{SOAP_ENV_NS}"'
    f' xmlns:SOAP-ENC="{SOAP_ENC_NS}"'
    f' xmlns:xsi="{XSI_NS}"'
    f' xmlns:xsd="{XSD_NS}"'
    " xmlns:ns={urn}>\n"
    f'<SOAP-ENV:Body SOAP-ENV:encodingStyle="{SOAP_ENC_NS}">\n'
)
_ENVELOPE_CLOSE = "</SOAP-ENV:Body>\n</SOAP-ENV:Envelope>\n"

_RAW_DATA_TEMPLATE = (
    "<ns:rawDataMessage>\n"
    '<data xsi:type="xsd:base64Binary">{data}</data></ns:rawDataMessage>\n'
)

_FAULT_TEMPLATE = (
    "<SOAP-ENV:Fault>\n"
    "<faultcode>{code}</faultcode>\n"
    "<faultstring>{text}</faultstring>\n"
    "</SOAP-ENV:Fault>\n"
)


def base64_encode(data: bytes) -> str:
    """Standard base64 (RFC 4648 alphabet) with '=' padding."""
    return base64.b64encode(data).decode("ascii")


def base64_decode(text: str | bytes) -> bytes:
    """Decode base64, tolerating whitespace between groups.

    Raises ChannelError(CHANNEL_PROTOERR) on characters outside the alphabet
    or bad padding.
    """
    try:
        raw = text.encode("ascii") if isinstance(text, str) else bytes(text)
        return base64.b64decode(_WHITESPACE_RE.sub(b"", raw), validate=True)
    except (binascii.Error, ValueError) as e:
        raise ChannelError(StatusCode.CHANNEL_PROTOERR, f"invalid base64: {e}") from e


def _envelope(urn: str, body: str) -> bytes:
    return (_ENVELOPE_OPEN.format(urn=quoteattr(urn)) + body + _ENVELOPE_CLOSE).encode("utf-8")


def encode_raw_data_envelope(payload: bytes, urn: Optional[str] = None) -> bytes:
    """Wrap ``payload`` in a rawDataMessage envelope (UTF-8 XML bytes)."""
    return _envelope(
        urn or settings.soap_urn or DEFAULT_URN,
        _RAW_DATA_TEMPLATE.format(data=base64_encode(payload)),
    )


def encode_fault_envelope(faultcode: str, faultstring: str, urn: Optional[str] = None) -> bytes:
    """SOAP 1.1 Fault envelope with the same namespace bindings."""
    return _envelope(
        urn or settings.soap_urn or DEFAULT_URN,
        _FAULT_TEMPLATE.format(code=escape(faultcode), text=escape(faultstring)),
    )


def _split_tag(tag: str) -> tuple[Optional[str], str]:
    if tag.startswith("{"):
        uri, _, local = tag[1:].partition("}")
        return uri, local
    return None, tag


def _child_by_local_name(parent: ET.Element, local: str, preferred_ns: Optional[str] = None) -> Optional[ET.Element]:
    fallback = None
    for child in parent:
        if not isinstance(child.tag, str):
            continue
        uri, name = _split_tag(child.tag)
        if name != local:
            continue
        if preferred_ns is None or uri == preferred_ns:
            return child
        if fallback is None:
            fallback = child
    return fallback


def _parse_envelope(document: bytes) -> ET.Element:
    try:
        root = ET.fromstring(document)
    except ET.ParseError as e:
        raise ChannelError(StatusCode.CHANNEL_PROTOERR, f"malformed XML: {e}") from e
    uri, local = _split_tag(root.tag)
    if local != "Envelope":
        raise ChannelError(StatusCode.CHANNEL_PROTOERR, f"root element is {local!r}, not Envelope")
    if uri != SOAP_ENV_NS:
        logger.debug("Envelope namespace %r differs from %s; accepting", uri, SOAP_ENV_NS)
    return root


def _find_body(root: ET.Element) -> ET.Element:
    body = _child_by_local_name(root, "Body", SOAP_ENV_NS)
    if body is None:
        raise ChannelError(StatusCode.CHANNEL_PROTOERR, "envelope has no Body")
    return body


def decode_raw_data_envelope(document: bytes) -> bytes:
    """Extract the payload from a rawDataMessage envelope.

    Raises ChannelError(CHANNEL_PROTOERR) on malformed XML, a missing
    Body/rawDataMessage/data element, or bad base64.
    """
    body = _find_body(_parse_envelope(document))
    message = _child_by_local_name(body, RAW_DATA_ELEMENT)
    if message is None:
        raise ChannelError(StatusCode.CHANNEL_PROTOERR, "Body has no rawDataMessage")
    data = _child_by_local_name(message, DATA_ELEMENT)
    if data is None:
        raise ChannelError(StatusCode.CHANNEL_PROTOERR, "rawDataMessage has no data element")
    return base64_decode((data.text or "").strip())


def decode_fault(document: bytes) -> Optional[str]:
    """faultstring of a Fault envelope, or None when the document is not a Fault."""
    try:
        body = _find_body(_parse_envelope(document))
    except ChannelError:
        return None
    fault = _child_by_local_name(body, "Fault", SOAP_ENV_NS)
    if fault is None:
        return None
    text = _child_by_local_name(fault, "faultstring")
    return (text.text or "").strip() if text is not None else ""
