"""House metadata (YAML), ``labels.dat`` and the calibration file."""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import yaml

from daleforge.calibrate import CalibrationConstants
from daleforge.errors import ConsistencyError, InvalidArgument, ParseError

log = logging.getLogger(__name__)

DEFAULT_ON_POWER_THRESHOLD = 5.0


@dataclass(frozen=True)
class ChannelInfo:
    channel: int
    name: str
    meter: str
    room: str | None = None
    on_power_threshold: float = DEFAULT_ON_POWER_THRESHOLD

    def __post_init__(self):
        if int(self.channel) != self.channel or self.channel < 1:
            raise InvalidArgument(f"channel index must be a positive integer, got {self.channel}")
        if not self.name or any(c.isspace() for c in self.name):
            raise InvalidArgument(f"channel names must be non-empty without whitespace, got {self.name!r}")
        if not (self.on_power_threshold > 0 and math.isfinite(self.on_power_threshold)):
            raise InvalidArgument(f"{self.name}: on_power_threshold must be positive")


@dataclass(frozen=True)
class HouseMetadata:
    house: int
    channels: tuple[ChannelInfo, ...]
    building_type: str | None = None
    construction_year: int | None = None
    heating: str | None = None
    occupants: int | None = None
    # meter model name -> description (manufacturer, sample period, ...)
    meters: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.house) != self.house or self.house < 1:
            raise InvalidArgument(f"house number must be a positive integer, got {self.house}")
        seen = set()
        for info in self.channels:
            if info.channel in seen:
                raise ConsistencyError(f"duplicate channel index {info.channel}")
            seen.add(info.channel)
        object.__setattr__(self, "channels", tuple(sorted(self.channels, key=lambda c: c.channel)))

    def channel(self, index: int) -> ChannelInfo:
        for info in self.channels:
            if info.channel == index:
                return info
        raise KeyError(index)

    def threshold(self, index: int) -> float:
        return self.channel(index).on_power_threshold

    def labels(self) -> dict[int, str]:
        return {c.channel: c.name for c in self.channels}


_TOP_KEYS = ("house", "building_type", "construction_year", "heating", "occupants", "meters", "channels")


def metadata_to_dict(meta: HouseMetadata) -> dict:
    d: dict = {"house": meta.house}
    for key in ("building_type", "construction_year", "heating", "occupants"):
        value = getattr(meta, key)
        if value is not None:
            d[key] = value
    if meta.meters:
        d["meters"] = meta.meters
    channels = []
    for c in meta.channels:
        entry = {"channel": c.channel, "name": c.name, "meter": c.meter}
        if c.room is not None:
            entry["room"] = c.room
        # only written when it differs from the default
        if c.on_power_threshold != DEFAULT_ON_POWER_THRESHOLD:
            entry["on_power_threshold"] = c.on_power_threshold
        channels.append(entry)
    d["channels"] = channels
    return d


def metadata_from_dict(d: Mapping, source: str = "<metadata>") -> HouseMetadata:
    if not isinstance(d, Mapping):
        raise ParseError("metadata document must be a mapping", source)
    for key in d:
        if key not in _TOP_KEYS:
            log.debug("%s: ignoring unknown metadata key %r", source, key)
    try:
        channels = []
        for entry in d.get("channels") or ():
            if not isinstance(entry, Mapping):
                raise ParseError("each channel entry must be a mapping", source)
            threshold = entry.get("on_power_threshold", DEFAULT_ON_POWER_THRESHOLD)
            channels.append(
                ChannelInfo(
                    channel=int(entry["channel"]),
                    name=str(entry["name"]),
                    meter=str(entry.get("meter", "unknown")),
                    room=entry.get("room"),
                    on_power_threshold=float(threshold),
                )
            )
        return HouseMetadata(
            house=int(d["house"]),
            channels=tuple(channels),
            building_type=d.get("building_type"),
            construction_year=d.get("construction_year"),
            heating=d.get("heating"),
            occupants=d.get("occupants"),
            meters=dict(d.get("meters") or {}),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"missing or malformed metadata field: {exc}", source) from exc
    except InvalidArgument as exc:
        raise ParseError(str(exc), source) from exc


def format_metadata(meta: HouseMetadata) -> str:
    return yaml.safe_dump(metadata_to_dict(meta), sort_keys=False, indent=2, default_flow_style=False)


def parse_metadata(text: str, source: str = "<metadata>") -> HouseMetadata:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(f"invalid metadata document: {getattr(exc, 'problem', exc)}", source, mark.line + 1 if mark else None) from exc
    return metadata_from_dict(doc, source)


def write_metadata(meta: HouseMetadata, path: str | Path) -> None:
    Path(path).write_text(format_metadata(meta))


def read_metadata(path: str | Path) -> HouseMetadata:
    path = Path(path)
    return parse_metadata(path.read_text(), str(path))


# --- labels.dat ----------------------------------------------------------------------------


def format_labels(labels: Mapping[int, str]) -> str:
    return "".join(f"{i} {labels[i]}\n" for i in sorted(labels))


def parse_labels(text: str, path="<string>") -> dict[int, str]:
    labels: dict[int, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if len(parts) != 2 or not re.fullmatch(r"\d+", parts[0]):
            raise ParseError(f"malformed label row {line!r}", str(path), lineno)
        index = int(parts[0])
        if index in labels:
            raise ConsistencyError(f"{path}:{lineno}: duplicate channel index {index}")
        labels[index] = parts[1]
    return labels


def write_labels(labels: Mapping[int, str], path: str | Path) -> None:
    Path(path).write_text(format_labels(labels))


def read_labels(path: str | Path) -> dict[int, str]:
    path = Path(path)
    return parse_labels(path.read_text(), path)


def check_labels(labels: Mapping[int, str], meta: HouseMetadata) -> None:
    known = meta.labels()
    for index, name in labels.items():
        if index not in known:
            raise ConsistencyError(f"channel {index} ({name}) is in labels.dat but not in the metadata")
        if known[index] != name:
            raise ConsistencyError(f"channel {index} is {name!r} in labels.dat but {known[index]!r} in the metadata")


# --- calibration ---------------------------------------------------------------------------

_CAL_KEYS = ("volts_per_adc_step", "amps_per_adc_step", "phase_difference")


def format_calibration(cal: CalibrationConstants) -> str:
    return "".join(f"{key} = {float(getattr(cal, key))!r}\n" for key in _CAL_KEYS)


def parse_calibration(text: str, path="<string>") -> CalibrationConstants:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParseError(f"expected 'key = value', got {line!r}", str(path), lineno)
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if key not in _CAL_KEYS:
            log.debug("%s:%d: ignoring unknown calibration key %r", path, lineno, key)
            continue
        try:
            values[key] = float(raw)
        except ValueError:
            raise ParseError(f"{key} is not a number: {raw!r}", str(path), lineno) from None
    missing = [k for k in _CAL_KEYS[:2] if k not in values]
    if missing:
        raise ParseError(f"missing calibration keys {missing}", str(path))
    try:
        return CalibrationConstants(**values)
    except InvalidArgument as exc:
        raise ParseError(str(exc), str(path)) from exc


def write_calibration(cal: CalibrationConstants, path: str | Path) -> None:
    Path(path).write_text(format_calibration(cal))


def read_calibration(path: str | Path) -> CalibrationConstants:
    path = Path(path)
    return parse_calibration(path.read_text(), path)
