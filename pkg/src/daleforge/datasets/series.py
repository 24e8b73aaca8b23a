"""Channel, mains and button-press text files."""

from __future__ import annotations

import io
import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from daleforge.errors import InvalidArgument, ParseError

UNITS = ("watts", "volt-amperes")


def round_half_away(x, decimals: int):
    """Round half away from zero (``round`` and ``np.round`` use banker's rounding)."""
    scale = 10.0**decimals
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) * scale + 0.5) / scale


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ChannelSeries:
    """Integer power readings of one meter channel."""

    channel: int
    timestamps: np.ndarray
    power: np.ndarray
    unit: str = "watts"

    def __post_init__(self):
        if int(self.channel) != self.channel or self.channel < 1:
            raise InvalidArgument(f"channel index must be a positive integer, got {self.channel}")
        if self.unit not in UNITS:
            raise InvalidArgument(f"unknown unit {self.unit!r}")
        ts = np.asarray(self.timestamps)
        pw = np.asarray(self.power)
        if ts.shape != pw.shape or ts.ndim != 1:
            raise InvalidArgument("timestamps and power must be 1-D arrays of equal length")
        for name, arr in (("timestamps", ts), ("power", pw)):
            if arr.size and not np.all(np.equal(np.mod(arr, 1), 0)):
                raise InvalidArgument(f"{name} must be integers")
        ts = ts.astype(np.int64)
        pw = pw.astype(np.int64)
        if np.any(pw < 0):
            raise InvalidArgument("power readings must be non-negative")
        if np.any(np.diff(ts) < 0):
            raise InvalidArgument("timestamps must be non-decreasing")
        object.__setattr__(self, "timestamps", _readonly(ts))
        object.__setattr__(self, "power", _readonly(pw))

    def __len__(self) -> int:
        return self.timestamps.size

    def __eq__(self, other):
        if not isinstance(other, ChannelSeries):
            return NotImplemented
        return (
            self.channel == other.channel
            and self.unit == other.unit
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.power, other.power)
        )

    @classmethod
    def from_pairs(cls, channel: int, pairs: Iterable[tuple[int, int]], unit: str = "watts") -> "ChannelSeries":
        pairs = list(pairs)
        ts = np.array([p[0] for p in pairs], dtype=np.int64)
        pw = np.array([p[1] for p in pairs], dtype=np.int64)
        return cls(channel, ts, pw, unit)


@dataclass(frozen=True, eq=False)
class MainsSeries:
    """1 Hz whole-house rows of (timestamp, active power, apparent power, RMS voltage).

    Values are held at their on-disk precision: one decimal for the timestamp
    and two for the rest.
    """

    timestamps: np.ndarray
    active: np.ndarray
    apparent: np.ndarray
    voltage: np.ndarray

    def __post_init__(self):
        cols = [np.asarray(c, dtype=np.float64) for c in (self.timestamps, self.active, self.apparent, self.voltage)]
        if any(c.ndim != 1 or c.shape != cols[0].shape for c in cols):
            raise InvalidArgument("mains columns must be 1-D arrays of equal length")
        if not all(np.all(np.isfinite(c)) for c in cols):
            raise InvalidArgument("mains values must be finite")
        ts = round_half_away(cols[0], 1)
        if np.any(np.diff(ts) <= 0):
            raise InvalidArgument("mains timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", _readonly(ts))
        for name, col in zip(("active", "apparent", "voltage"), cols[1:]):
            object.__setattr__(self, name, _readonly(round_half_away(col, 2)))

    def __len__(self) -> int:
        return self.timestamps.size

    def __eq__(self, other):
        if not isinstance(other, MainsSeries):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in ("timestamps", "active", "apparent", "voltage")
        )

    @classmethod
    def from_metrics(cls, metrics: Sequence) -> "MainsSeries":
        """Build from ``PowerMetrics`` records."""
        return cls(
            np.array([m.timestamp for m in metrics]),
            np.array([m.active_power for m in metrics]),
            np.array([m.apparent_power for m in metrics]),
            np.array([m.rms_voltage for m in metrics]),
        )


# --- text I/O ------------------------------------------------------------------------------

_INT_ROW = re.compile(r"^\s*[+-]?\d+\s+[+-]?\d+\s*$")
_FLOAT = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_MAINS_ROW = re.compile(rf"^\s*{_FLOAT}\s+{_FLOAT}\s+{_FLOAT}\s+{_FLOAT}\s*$")


def _locate_bad_row(text: str, pattern: re.Pattern, what: str, path) -> ParseError:
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not pattern.match(line):
            n = len(line.split())
            return ParseError(f"malformed {what} row {line!r} ({n} columns)", str(path), lineno)
    return ParseError(f"malformed {what} file", str(path))


def _load_table(text: str, ncols: int, dtype, pattern: re.Pattern, what: str, path) -> np.ndarray:
    if not text.strip():
        return np.empty((0, ncols), dtype=dtype)
    try:
        with warnings.catch_warnings():
            # numpy still accepts "2.5" as an integer, with only a deprecation warning
            warnings.simplefilter("error", DeprecationWarning)
            table = np.loadtxt(io.StringIO(text), dtype=dtype, ndmin=2)
    except (ValueError, DeprecationWarning):
        table = None
    if table is None or table.shape[1] != ncols:
        raise _locate_bad_row(text, pattern, what, path)
    return table


def _first_bad(mask: np.ndarray) -> int:
    return int(np.argmax(mask)) + 1


def format_channel(series: ChannelSeries) -> str:
    if len(series) == 0:
        return ""
    rows = np.column_stack([series.timestamps, series.power])
    buf = io.StringIO()
    np.savetxt(buf, rows, fmt="%d", delimiter=" ")
    return buf.getvalue()


def parse_channel(text: str, channel: int, unit: str = "watts", path="<string>") -> ChannelSeries:
    table = _load_table(text, 2, np.int64, _INT_ROW, "channel", path)
    ts, pw = table[:, 0], table[:, 1]
    if np.any(pw < 0):
        raise ParseError("negative power reading", str(path), _first_bad(pw < 0))
    if np.any(np.diff(ts) < 0):
        raise ParseError("timestamp goes backwards", str(path), _first_bad(np.diff(ts) < 0) + 1)
    return ChannelSeries(channel, ts, pw, unit)


def write_channel(series: ChannelSeries, path: str | Path) -> None:
    Path(path).write_text(format_channel(series))


def read_channel(path: str | Path, channel: int | None = None, unit: str = "watts") -> ChannelSeries:
    path = Path(path)
    if channel is None:
        m = re.fullmatch(r"channel_(\d+)\.dat", path.name)
        if not m:
            raise ParseError("cannot infer channel index from file name", str(path))
        channel = int(m.group(1))
    return parse_channel(path.read_text(), channel, unit, path)


def format_mains(series: MainsSeries) -> str:
    return "".join(
        f"{t:.1f} {p:.2f} {s:.2f} {v:.2f}\n"
        for t, p, s, v in zip(series.timestamps, series.active, series.apparent, series.voltage)
    )


def parse_mains(text: str, path="<string>") -> MainsSeries:
    table = _load_table(text, 4, np.float64, _MAINS_ROW, "mains", path)
    if not np.all(np.isfinite(table)):
        raise ParseError("non-finite value", str(path), _first_bad(~np.all(np.isfinite(table), axis=1)))
    steps = np.diff(table[:, 0])
    if np.any(steps <= 0):
        raise ParseError("timestamps must increase", str(path), _first_bad(steps <= 0) + 1)
    return MainsSeries(table[:, 0], table[:, 1], table[:, 2], table[:, 3])


def write_mains(series: MainsSeries, path: str | Path) -> None:
    Path(path).write_text(format_mains(series))


def read_mains(path: str | Path) -> MainsSeries:
    path = Path(path)
    return parse_mains(path.read_text(), path)


# --- button presses ----------------------------------------------------------------------


def _check_events(events) -> list[tuple[int, int]]:
    out = []
    for ts, value in events:
        if int(ts) != ts or value not in (0, 1):
            raise InvalidArgument(f"button events are (integer timestamp, 0|1), got ({ts}, {value})")
        out.append((int(ts), int(value)))
    return out


def format_button_events(events) -> str:
    return "".join(f"{ts} {v}\n" for ts, v in _check_events(events))


def parse_button_events(text: str, path="<string>") -> list[tuple[int, int]]:
    events = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if len(parts) != 2 or not all(re.fullmatch(r"[+-]?\d+", p) for p in parts):
            raise ParseError(f"malformed button event {line!r}", str(path), lineno)
        ts, value = int(parts[0]), int(parts[1])
        if value not in (0, 1):
            raise ParseError(f"button value must be 0 or 1, got {value}", str(path), lineno)
        events.append((ts, value))
    return events


def write_button_events(events, path: str | Path) -> None:
    Path(path).write_text(format_button_events(events))


def read_button_events(path: str | Path) -> list[tuple[int, int]]:
    path = Path(path)
    return parse_button_events(path.read_text(), path)
