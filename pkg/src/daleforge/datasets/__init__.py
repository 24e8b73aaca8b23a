"""Reading and writing the on-disk dataset layout."""

from daleforge.datasets.house import HouseDataset, house_dir, read_house, write_house
from daleforge.datasets.metadata import (
    DEFAULT_ON_POWER_THRESHOLD,
    ChannelInfo,
    HouseMetadata,
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
    round_half_away,
    write_button_events,
    write_channel,
    write_mains,
)
from daleforge.datasets.waveform import chunk_filename, list_chunks, read_waveform_chunk, write_waveform_chunk

__all__ = [
    "DEFAULT_ON_POWER_THRESHOLD",
    "ChannelInfo",
    "ChannelSeries",
    "HouseDataset",
    "HouseMetadata",
    "MainsSeries",
    "chunk_filename",
    "house_dir",
    "list_chunks",
    "read_button_events",
    "read_calibration",
    "read_channel",
    "read_house",
    "read_labels",
    "read_mains",
    "read_metadata",
    "read_waveform_chunk",
    "round_half_away",
    "write_button_events",
    "write_calibration",
    "write_channel",
    "write_house",
    "write_labels",
    "write_mains",
    "write_metadata",
    "write_waveform_chunk",
]
