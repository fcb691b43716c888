"""Status codes returned by every channel and handler operation."""
from enum import IntEnum


class StatusCode(IntEnum):
    """Integer result contract.

    Zero is success, the single positive value means "nothing to return",
    everything else is a negative error code.
    """

    CHANNEL_OK = 0
    CHANNEL_NOMESSAGES = 1
    CHANNEL_SOCKETERR = -1
    CHANNEL_NOTFOUND = -2
    CHANNEL_BADINFO = -3
    CHANNEL_CLOSED = -4
    CHANNEL_PROTOERR = -5


def status_name(code: int) -> str:
    """Canonical token for a status code, ``CHANNEL_ERR(<n>)`` for unknown ones."""
    try:
        return StatusCode(int(code)).name
    except ValueError:
        return f"CHANNEL_ERR({int(code)})"


def is_error(code: int) -> bool:
    return int(code) < 0
