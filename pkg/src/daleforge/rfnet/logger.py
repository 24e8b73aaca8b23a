"""Logger-side processing of received readings: spurious-value filters and IAM button events."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from daleforge.errors import InvalidArgument

IAM_MAX_WATTS = 4000
WHOLE_HOUSE_MAX_WATTS = 20000
SHORT_OUTAGE_SECONDS = 12.0

# timeline event kinds
SWITCH_ON = "on"
SWITCH_OFF = "off"
POWER_LOST = "power_lost"
POWER_RESTORED = "power_restored"


def filter_reading(kind: str, watts: float) -> bool:
    """True if the reading is plausible and should be kept."""
    if watts < 0:
        raise InvalidArgument(f"negative reading {watts}")
    if kind == "iam":
        return watts <= IAM_MAX_WATTS
    if kind == "whole_house":
        return watts <= WHOLE_HOUSE_MAX_WATTS
    raise InvalidArgument(f"unknown reading kind {kind!r}")


@dataclass(frozen=True)
class TimelineEvent:
    time: float
    kind: str


def derive_button_events(timeline: Iterable[TimelineEvent | tuple[float, str]], initial_state: int = 0):
    """Translate an IAM switch/power timeline into logged ``(timestamp, 0|1)`` button events.

    On-presses are always logged. A power outage of at most 12 s is
    indistinguishable from an off-press and is logged as one. After a longer
    outage the IAM is assumed to have been unplugged and silently returns to its
    previous switch state.
    """
    events: list[tuple[int, int]] = []
    state = initial_state
    lost_at = None
    state_before_loss = state
    last_time = float("-inf")
    for item in timeline:
        t, kind = (item.time, item.kind) if isinstance(item, TimelineEvent) else item
        if t < last_time:
            raise InvalidArgument("timeline is not in chronological order")
        last_time = t
        if kind == SWITCH_ON:
            if lost_at is None:
                state = 1
                events.append((int(t), 1))
        elif kind == SWITCH_OFF:
            if lost_at is None:
                state = 0
                events.append((int(t), 0))
        elif kind == POWER_LOST:
            if lost_at is None:
                lost_at = t
                state_before_loss = state
        elif kind == POWER_RESTORED:
            if lost_at is None:
                continue
            if t - lost_at <= SHORT_OUTAGE_SECONDS:
                state = 0
                events.append((int(t), 0))
            else:
                state = state_before_loss
            lost_at = None
        else:
            raise InvalidArgument(f"unknown timeline event {kind!r}")
    return events
