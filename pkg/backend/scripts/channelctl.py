#!/usr/bin/env python3
"""channelctl entry point.

Usage (from backend/):
  python scripts/channelctl.py serve --type tcp-server --addr 127.0.0.1:9000 --out received/
  python scripts/channelctl.py send --type tcp-client --addr 127.0.0.1:9000 --file data.bin

Set CHANNELCTL_LOG=DEBUG to trace per-message traffic.
"""
from __future__ import annotations

import sys
from pathlib import Path

BACKEND_DIR = Path(__file__).resolve().parent.parent
if str(BACKEND_DIR) not in sys.path:
    sys.path.insert(0, str(BACKEND_DIR))

from app.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
