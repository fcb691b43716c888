"""channelctl: stream files over any channel type.

Usage (from backend/):
  python scripts/channelctl.py serve --type tcp-server --addr 127.0.0.1:9000 --out received/
  python scripts/channelctl.py send  --type tcp-client --addr 127.0.0.1:9000 --file movie.bin
  python scripts/channelctl.py echo  --type udp-server --addr 127.0.0.1:9001

Only --type changes between transports. A bare transport name (tcp, udp,
soap) picks the client or server flavor that fits the command.

Exit codes: 0 success, 1 setup failure, 2 transfer failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
import threading
import time
from pathlib import Path
from typing import BinaryIO, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from app.config import settings
from app.models.channel import ChannelId, is_client_type, is_server_type
from app.models.message import MessageKind, XMessage
from app.models.status import StatusCode, status_name
from app.services.channel_handler import ChannelHandler
from app.utils.logging_config import configure_logging
from app.utils.sentry_config import init_sentry

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_SETUP = 1
EXIT_TRANSFER = 2

_POLL_SECONDS = 0.05
_DRAIN_TIMEOUT_SECONDS = 60.0

Command = Literal["send", "serve", "echo"]


class CliConfig(BaseModel):
    """Validated channelctl invocation."""

    command: Command
    channel_type: str
    endpoint: str
    file: Optional[Path] = None
    out_dir: Path = Field(default_factory=Path.cwd)
    chunk_size: int = Field(default=settings.cli_chunk_size, gt=0)
    options: Dict[str, str] = Field(default_factory=dict)
    log_level: str = "INFO"

    @field_validator("channel_type", mode="before")
    @classmethod
    def normalize_type(cls, v: object) -> str:
        return str(v or "").strip().lower()

    @model_validator(mode="after")
    def check_flavor(self) -> "CliConfig":
        wanted = "client" if self.command == "send" else "server"
        if not (is_client_type(self.channel_type) or is_server_type(self.channel_type)):
            self.channel_type = f"{self.channel_type}-{wanted}"
        if self.command == "send" and not is_client_type(self.channel_type):
            raise ValueError(f"send needs a client channel type, got '{self.channel_type}'")
        if self.command != "send" and not is_server_type(self.channel_type):
            raise ValueError(f"{self.command} needs a server channel type, got '{self.channel_type}'")
        if self.command == "send" and self.file is None:
            raise ValueError("send needs --file")
        return self

    def channel_info(self) -> dict:
        return {"channel_type": self.channel_type, "endpoint": self.endpoint, "options": self.options}


def _parse_options(pairs: List[str]) -> Dict[str, str]:
    options: Dict[str, str] = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"--opt expects key=value, got '{pair}'")
        options[key.strip()] = value
    return options


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        # Usage errors are setup failures.
        self.print_usage(sys.stderr)
        self.exit(EXIT_SETUP, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="channelctl", description="Stream bytes over TCP, UDP or SOAP channels.")
    parser.add_argument("command", choices=["send", "serve", "echo"])
    parser.add_argument("--type", dest="channel_type", required=True, help="channel type token, e.g. tcp-client")
    parser.add_argument("--addr", dest="endpoint", required=True, help="host:port ([v6]:port for IPv6)")
    parser.add_argument("--file", type=Path, help="file to send")
    parser.add_argument("--out", dest="out_dir", type=Path, default=None, help="directory for received files")
    parser.add_argument("--chunk", dest="chunk_size", type=int, default=settings.cli_chunk_size)
    parser.add_argument("--opt", action="append", default=[], metavar="KEY=VALUE", help="channel option")
    parser.add_argument("--log", dest="log_level", default="INFO")
    return parser


def config_from_args(args: argparse.Namespace) -> CliConfig:
    values = {
        "command": args.command,
        "channel_type": args.channel_type,
        "endpoint": args.endpoint,
        "file": args.file,
        "chunk_size": args.chunk_size,
        "options": _parse_options(args.opt),
        "log_level": settings.channelctl_log or args.log_level,
    }
    if args.out_dir is not None:
        values["out_dir"] = args.out_dir
    return CliConfig(**values)


def _fail(message: str, code: int) -> int:
    print(message, file=sys.stderr)
    return code


def run_send(config: CliConfig) -> int:
    """Stream one file over a client channel."""
    path = config.file
    if path is None or not path.is_file():
        return _fail(f"cannot read {path}", EXIT_SETUP)

    with ChannelHandler() as handler:
        code, channel_id = handler.create_channel(config.channel_info())
        if code != StatusCode.CHANNEL_OK:
            return _fail(f"create {config.channel_type} on {config.endpoint} failed: {status_name(code)}", EXIT_SETUP)

        capacity = int(config.options.get("queue_capacity", settings.channel_queue_capacity))
        failure: List[XMessage] = []

        def watch() -> bool:
            while True:
                code, msg = handler.get_message()
                if code != StatusCode.CHANNEL_OK:
                    return not failure
                if msg.channel_id == channel_id and msg.kind in (MessageKind.DISCONNECTED, MessageKind.ERROR):
                    failure.append(msg)
                    return False

        started = time.monotonic()
        sent = 0
        with path.open("rb") as source:
            while True:
                chunk = source.read(config.chunk_size)
                if not chunk:
                    break
                # Poll-based pacing: never push into a full outgoing queue.
                while handler.get_channel_stats(channel_id).queued >= capacity:
                    if not watch():
                        break
                    time.sleep(_POLL_SECONDS / 10)
                if not watch():
                    break
                handler.send_to_channel(XMessage.data(channel_id, chunk))
                sent += len(chunk)

        deadline = time.monotonic() + _DRAIN_TIMEOUT_SECONDS
        while watch() and handler.get_channel_stats(channel_id).queued and time.monotonic() < deadline:
            time.sleep(_POLL_SECONDS / 10)
        stats = handler.get_channel_stats(channel_id)
        watch()
        handler.destroy_channel(channel_id)

    elapsed = time.monotonic() - started
    if failure:
        msg = failure[0]
        detail = status_name(msg.status) if msg.status is not None else msg.kind.value
        return _fail(f"transfer failed after {stats.sent_bytes} bytes: {detail}", EXIT_TRANSFER)
    if stats.queued or stats.dropped or stats.discarded:
        return _fail(
            f"transfer incomplete: {stats.queued} queued, {stats.dropped} dropped, {stats.discarded} discarded",
            EXIT_TRANSFER,
        )
    print(f"sent {sent} bytes in {stats.sent_messages} messages")
    print(f"elapsed {elapsed:.3f}s")
    return EXIT_OK


def _run_server(
    config: CliConfig,
    stop_event: Optional[threading.Event],
    ready: Optional[threading.Event],
    on_message,
) -> int:
    stop_event = stop_event or threading.Event()
    with ChannelHandler() as handler:
        code, server_id = handler.create_channel(config.channel_info())
        if code != StatusCode.CHANNEL_OK:
            return _fail(f"bind {config.channel_type} on {config.endpoint} failed: {status_name(code)}", EXIT_SETUP)
        print(f"{config.command}: {config.channel_type} listening on {config.endpoint} (channel {server_id})", flush=True)
        if ready is not None:
            ready.set()
        try:
            while not stop_event.is_set():
                code, msg = handler.wait_message(_POLL_SECONDS)
                if code == StatusCode.CHANNEL_CLOSED:
                    break
                if code == StatusCode.CHANNEL_OK:
                    on_message(handler, msg)
        except KeyboardInterrupt:
            logger.info("Interrupted")
        handler.shutdown()
        # Whatever arrived before shutdown still counts.
        while True:
            code, msg = handler.get_message()
            if code != StatusCode.CHANNEL_OK:
                break
            on_message(handler, msg)
    return EXIT_OK


class _FileSink:
    """One output file per child channel, named <child-id>.bin.

    A file left by an earlier run under the same name is truncated when the
    child first shows up.
    """

    def __init__(self, out_dir: Path) -> None:
        self.out_dir = out_dir
        self.files: Dict[ChannelId, BinaryIO] = {}
        self.bytes_written = 0

    def _open(self, channel_id: ChannelId) -> BinaryIO:
        handle = self.files.get(channel_id)
        if handle is None:
            handle = (self.out_dir / f"{channel_id}.bin").open("wb")
            self.files[channel_id] = handle
        return handle

    def __call__(self, handler: ChannelHandler, msg: XMessage) -> None:
        if msg.kind == MessageKind.CONNECTED:
            self._open(msg.channel_id)
            print(f"connected: channel {msg.channel_id} from {msg.remote}", flush=True)
        elif msg.kind == MessageKind.DATA:
            handle = self._open(msg.channel_id)
            handle.write(msg.payload)
            handle.flush()
            self.bytes_written += len(msg.payload)
        elif msg.kind == MessageKind.DISCONNECTED:
            handle = self.files.pop(msg.channel_id, None)
            if handle is not None:
                handle.close()
            print(f"disconnected: channel {msg.channel_id}", flush=True)
        elif msg.kind == MessageKind.ERROR:
            logger.warning("Channel %s reported %s", msg.channel_id, status_name(msg.status))

    def close(self) -> None:
        for handle in self.files.values():
            handle.close()
        self.files.clear()


def run_serve(
    config: CliConfig,
    stop_event: Optional[threading.Event] = None,
    ready: Optional[threading.Event] = None,
) -> int:
    """Write every child's DATA payloads to <out>/<child-id>.bin until stopped."""
    try:
        config.out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        return _fail(f"cannot create {config.out_dir}: {e}", EXIT_SETUP)
    sink = _FileSink(config.out_dir)
    try:
        code = _run_server(config, stop_event, ready, sink)
    finally:
        sink.close()
    if code == EXIT_OK:
        print(f"received {sink.bytes_written} bytes")
    return code


def _echo(handler: ChannelHandler, msg: XMessage) -> None:
    if msg.kind == MessageKind.DATA:
        handler.send_to_channel(XMessage.data(msg.channel_id, msg.payload))


def run_echo(
    config: CliConfig,
    stop_event: Optional[threading.Event] = None,
    ready: Optional[threading.Event] = None,
) -> int:
    """Send every DATA payload back to the child it came from."""
    return _run_server(config, stop_event, ready, _echo)


COMMANDS = {"send": run_send, "serve": run_serve, "echo": run_echo}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except (ValidationError, ValueError) as e:
        return _fail(f"channelctl: {e}", EXIT_SETUP)
    configure_logging(config.log_level)
    init_sentry()
    return COMMANDS[config.command](config)


if __name__ == "__main__":
    sys.exit(main())
