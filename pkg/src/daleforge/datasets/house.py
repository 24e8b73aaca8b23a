"""Whole ``house_<x>`` directories."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from daleforge.calibrate import CalibrationConstants
from daleforge.datasets.metadata import (
    HouseMetadata,
    check_labels,
    read_calibration,
    read_labels,
    read_metadata,
    write_calibration,
    write_labels,
    write_metadata,
)
from daleforge.datasets.series import (
    ChannelSeries,
    MainsSeries,
    read_button_events,
    read_channel,
    read_mains,
    write_button_events,
    write_channel,
    write_mains,
)
from daleforge.errors import ConsistencyError, InvalidArgument

log = logging.getLogger(__name__)

LABELS = "labels.dat"
MAINS = "mains.dat"
CALIBRATION = "calibration.cfg"
CALIBRATION_ALT = "calibration.dat"
METADATA = "metadata.yaml"

_CHANNEL = re.compile(r"channel_(\d+)\.dat")
_BUTTON = re.compile(r"channel_(\d+)_button_press\.dat")


@dataclass(frozen=True)
class HouseDataset:
    house: int
    channels: dict[int, ChannelSeries]
    labels: dict[int, str]
    button_events: dict[int, list[tuple[int, int]]] = field(default_factory=dict)
    mains: MainsSeries | None = None
    calibration: CalibrationConstants | None = None
    metadata: HouseMetadata | None = None

    def __post_init__(self):
        if int(self.house) != self.house or self.house < 1:
            raise InvalidArgument(f"house number must be a positive integer, got {self.house}")
        for index, series in self.channels.items():
            if series.channel != index:
                raise ConsistencyError(f"channel key {index} holds series for channel {series.channel}")
        for index in self.channels:
            if index not in self.labels:
                raise ConsistencyError(f"channel {index} has no label")
        for index in self.button_events:
            if index not in self.channels:
                raise ConsistencyError(f"button events for unknown channel {index}")
        if self.metadata is not None:
            check_labels(self.labels, self.metadata)
            for info in self.metadata.channels:
                if info.channel not in self.labels:
                    raise ConsistencyError(f"metadata channel {info.channel} missing from labels")

    def site_meter(self) -> int:
        """Channel index of the whole-house meter (channel 1 by convention)."""
        return min(self.channels)

    def submeters(self) -> list[int]:
        site = self.site_meter()
        return sorted(i for i in self.channels if i != site)


def house_dir(root: str | Path, house: int) -> Path:
    return Path(root) / f"house_{house}"


def write_house(dataset: HouseDataset, root: str | Path) -> Path:
    """Write ``dataset`` under ``root/house_<x>`` and return that directory."""
    out = house_dir(root, dataset.house)
    out.mkdir(parents=True, exist_ok=True)
    for index, series in sorted(dataset.channels.items()):
        write_channel(series, out / f"channel_{index}.dat")
    for index, events in sorted(dataset.button_events.items()):
        write_button_events(events, out / f"channel_{index}_button_press.dat")
    labels = dataset.metadata.labels() if dataset.metadata is not None else dataset.labels
    write_labels(labels, out / LABELS)
    if dataset.mains is not None:
        write_mains(dataset.mains, out / MAINS)
    if dataset.calibration is not None:
        write_calibration(dataset.calibration, out / CALIBRATION)
    if dataset.metadata is not None:
        write_metadata(dataset.metadata, out / METADATA)
    return out


def read_house(path: str | Path) -> HouseDataset:
    path = Path(path)
    m = re.fullmatch(r"house_(\d+)", path.name)
    if not m or not path.is_dir():
        raise FileNotFoundError(f"{path} is not a house_<x> directory")
    house = int(m.group(1))
    channels, buttons = {}, {}
    labels = mains = calibration = metadata = None
    for entry in sorted(path.iterdir()):
        name = entry.name
        if (cm := _CHANNEL.fullmatch(name)) is not None:
            channels[int(cm.group(1))] = read_channel(entry, int(cm.group(1)))
        elif (bm := _BUTTON.fullmatch(name)) is not None:
            buttons[int(bm.group(1))] = read_button_events(entry)
        elif name == LABELS:
            labels = read_labels(entry)
        elif name == MAINS:
            mains = read_mains(entry)
        elif name == CALIBRATION or (name == CALIBRATION_ALT and calibration is None):
            calibration = read_calibration(entry)
        elif name == METADATA:
            metadata = read_metadata(entry)
        else:
            log.warning("%s: ignoring unrecognised file", entry)
    if labels is None:
        raise ConsistencyError(f"{path}: missing {LABELS}")
    for index in channels:
        if index not in labels:
            raise ConsistencyError(f"{path}: channel_{index}.dat has no entry in {LABELS}")
    if metadata is not None and metadata.house != house:
        raise ConsistencyError(f"{path}: metadata describes house {metadata.house}")
    return HouseDataset(house, channels, labels, buttons, mains, calibration, metadata)
