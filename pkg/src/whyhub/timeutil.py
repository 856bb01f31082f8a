"""Instant handling.

All instants are integer UTC milliseconds since the epoch; the wire format
is ISO-8601 with a trailing ``Z`` and millisecond precision. Integer math
keeps comparisons and window arithmetic exact.
"""

from __future__ import annotations

import time
from datetime import datetime, timedelta, timezone

from .errors import ValidationError

Millis = int

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
_MS = timedelta(milliseconds=1)

MINUTE_MS = 60_000
DAY_MS = 86_400_000


def now_ms() -> Millis:
    return int(time.time() * 1000)


def parse_instant(value: str | int | float) -> Millis:
    """Parse an ISO-8601 instant (or raw epoch milliseconds) to Millis."""
    if isinstance(value, bool):
        raise ValidationError(f"not an instant: {value!r}")
    if isinstance(value, (int, float)):
        return int(value)
    if not isinstance(value, str):
        raise ValidationError(f"not an instant: {value!r}")
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise ValidationError(f"bad instant {value!r}: {exc}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return (dt - _EPOCH) // _MS


def format_instant(ms: Millis) -> str:
    dt = _EPOCH + timedelta(milliseconds=ms)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"
