"""Discrete-event simulation of the base station, polled IAMs and blind Current Cost transmitters.

Time runs in seconds from ``SimConfig.start_time``. The base station polls IAMs
one after another; every CC-TX broadcasts on its own fixed period with no
carrier sense. Any two packets overlapping in air time are both lost. Bits are
flipped independently with ``bit_flip_probability``; the codecs decide whether
the receiver notices.
"""

from __future__ import annotations

import bisect
import heapq
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Sequence

import numpy as np

from daleforge.errors import IntegrityError, InvalidArgument, ManchesterError
from daleforge.rfnet import codec
from daleforge.rfnet.logger import IAM_MAX_WATTS, WHOLE_HOUSE_MAX_WATTS

DemandSource = Callable[[int, np.ndarray], np.ndarray]

COLLISION = "collision"
CHECKSUM = "checksum"
MANCHESTER = "manchester"
FILTERED = "filtered"
ABSENT = "absent"
LOSS_CATEGORIES = (COLLISION, CHECKSUM, MANCHESTER, FILTERED, ABSENT)
# categories that count as radio dropout
RADIO_LOSSES = (COLLISION, CHECKSUM, MANCHESTER)

CCTX_PERIOD_NOMINAL = 6.0
CCTX_PERIOD_JITTER = 0.3


@dataclass(frozen=True)
class SimConfig:
    duration: float
    rng_seed: int = 0
    bit_flip_probability: float = 2e-6
    iam_reply_deadline: float = 0.020
    guard_before: float = 0.150
    guard_after: float = 0.050
    guard_enabled: bool = True
    air_time: float = 0.005
    poll_period: float = 6.0
    staleness_max: float = 4.0
    ema_alpha: float = 0.2
    start_time: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.bit_flip_probability <= 1.0:
            raise InvalidArgument("bit_flip_probability must be in [0, 1]")
        if self.duration <= 0:
            raise InvalidArgument("duration must be positive")
        if self.guard_before < 0 or self.guard_after < 0:
            raise InvalidArgument("guard window must be non-negative")
        if self.air_time <= 0 or self.poll_period <= 0:
            raise InvalidArgument("air_time and poll_period must be positive")
        if self.iam_reply_deadline < 2 * self.air_time:
            raise InvalidArgument("reply deadline too short for a poll and a reply")
        if not 0.0 < self.ema_alpha <= 1.0:
            raise InvalidArgument("ema_alpha must be in (0, 1]")
        if self.staleness_max < 0:
            raise InvalidArgument("staleness_max must be non-negative")


@dataclass
class IamNode:
    id: int
    channel: int
    latest_power: int = 0
    data_age: float = 0.0
    switch_state: bool = True
    powered: bool = True
    # (start, end) intervals, in simulation seconds, during which the IAM is unplugged
    outages: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if not 0 <= self.id < 2**32:
            raise InvalidArgument("IAM id must be a 32-bit unsigned integer")
        if self.latest_power < 0:
            raise InvalidArgument("latest_power must be non-negative")

    def powered_at(self, t: float) -> bool:
        return not any(a <= t < b for a, b in self.outages)


@dataclass
class CcTxNode:
    id: int
    channel: int
    period: float
    next_tx_time: float
    reading: int = 0
    whole_house: bool = False

    def __post_init__(self):
        lo, hi = CCTX_PERIOD_NOMINAL - CCTX_PERIOD_JITTER, CCTX_PERIOD_NOMINAL + CCTX_PERIOD_JITTER
        if not lo - 1e-12 <= self.period <= hi + 1e-12:
            raise InvalidArgument(f"CC-TX period {self.period} outside [{lo}, {hi}]")


def make_iam(channel: int, rng: np.random.Generator, outages=()) -> IamNode:
    # pairing picks a random 32-bit ID
    return IamNode(int(rng.integers(0, 2**32)), channel, outages=tuple(outages))


def make_cctx(channel: int, rng: np.random.Generator, whole_house: bool = False) -> CcTxNode:
    period = float(rng.uniform(CCTX_PERIOD_NOMINAL - CCTX_PERIOD_JITTER, CCTX_PERIOD_NOMINAL + CCTX_PERIOD_JITTER))
    return CcTxNode(int(rng.integers(0, 2**16)), channel, period, float(rng.uniform(0, period)), whole_house=whole_house)


def constant_demand(watts: float = 0.0) -> DemandSource:
    return lambda channel, t: np.full(np.shape(t), watts, dtype=float)


@dataclass
class _Learned:
    """Base-station estimate of one CC-TX's schedule."""

    last_start: float
    period: float
    predicted: float


class _BitFlipper:
    """Independent per-bit flips over the concatenated stream of transmitted bits."""

    def __init__(self, p: float, rng: np.random.Generator):
        self.p = p
        self.rng = rng
        self.position = 0
        self.next_flip = self._gap() if p > 0 else math.inf

    def _gap(self) -> int:
        # number of bits up to and including the next flipped one
        return int(self.rng.geometric(self.p)) - 1 if self.p < 1 else 0

    def take(self, nbits: int) -> list[int]:
        end = self.position + nbits
        flips = []
        while self.next_flip < end:
            flips.append(int(self.next_flip - self.position))
            self.next_flip += self._gap() + 1
        self.position = end
        return flips


@dataclass
class ChannelStats:
    attempts: int = 0
    received: int = 0
    undetected: int = 0
    losses: dict = field(default_factory=lambda: {c: 0 for c in LOSS_CATEGORIES})

    @property
    def radio_losses(self) -> int:
        return sum(self.losses[c] for c in RADIO_LOSSES)


@dataclass(eq=False)
class SimResult:
    config: SimConfig
    readings: np.ndarray
    losses: np.ndarray
    stats: dict
    iams: list
    cctxs: list

    def dropout_rate(self, kind: str | None = None) -> float:
        """Fraction of expected packets lost to radio errors; ``kind`` is ``"iam"``, ``"cctx"`` or ``None``."""
        if kind == "iam":
            channels = [n.channel for n in self.iams]
        elif kind == "cctx":
            channels = [n.channel for n in self.cctxs]
        elif kind is None:
            channels = list(self.stats)
        else:
            raise InvalidArgument(f"unknown node kind {kind!r}")
        lost = sum(self.stats[c].radio_losses for c in channels)
        expected = sum(self.stats[c].attempts - self.stats[c].losses[ABSENT] for c in channels)
        return lost / expected if expected else 0.0

    def loss_counts(self) -> dict[str, int]:
        totals = {c: 0 for c in LOSS_CATEGORIES}
        for s in self.stats.values():
            for c, n in s.losses.items():
                totals[c] += n
        return totals

    @property
    def collisions(self) -> int:
        return self.loss_counts()[COLLISION]

    def channel_readings(self, channel: int) -> tuple[np.ndarray, np.ndarray]:
        """Integer unix timestamps and integer values of the readings logged for ``channel``."""
        sel = self.readings[self.readings["channel"] == channel]
        ts = np.floor(sel["time"] + self.config.start_time).astype(np.int64)
        return ts, sel["value"].astype(np.int64)

    def same_as(self, other: "SimResult") -> bool:
        return (
            np.array_equal(self.readings, other.readings)
            and np.array_equal(self.losses, other.losses)
            and {c: (s.attempts, s.received, s.losses) for c, s in self.stats.items()}
            == {c: (s.attempts, s.received, s.losses) for c, s in other.stats.items()}
        )

    def iter_log(self) -> Iterator[dict]:
        """Readings and losses merged in time order, one dict per event."""
        events = [(float(r["time"]), 0, int(r["channel"]), "reading", int(r["value"])) for r in self.readings]
        events += [
            (float(l["time"]), 1, int(l["channel"]), LOSS_CATEGORIES[int(l["category"])], None) for l in self.losses
        ]
        events.sort()
        for t, _, ch, what, value in events:
            row = {"t": round(t + self.config.start_time, 6), "channel": ch, "event": what}
            if value is not None:
                row["value"] = value
            yield row

    def write_log(self, fp) -> None:
        for row in self.iter_log():
            fp.write(json.dumps(row, sort_keys=True) + "\n")


_READING_DTYPE = np.dtype([("channel", np.int32), ("time", np.float64), ("value", np.int64)])
_LOSS_DTYPE = np.dtype([("channel", np.int32), ("time", np.float64), ("category", np.int8)])


def _iam_poll_frame(node: IamNode) -> codec.Packet:
    return codec.encode_iam(node.id.to_bytes(4, "big") + b"\x01", kind=codec.POLL)


def _iam_reply_frame(node: IamNode, watts: int) -> codec.Packet:
    return codec.encode_iam(node.id.to_bytes(4, "big") + min(watts, 0xFFFF).to_bytes(2, "big"))


def _cctx_frame(node: CcTxNode, va: int) -> codec.Packet:
    payload = (node.id & 0xFFFF).to_bytes(2, "big") + min(va, 0xFFFF).to_bytes(2, "big")
    return codec.encode_cctx(codec.bytes_to_bits(payload))


_POLL_BITS = 48
_REPLY_BITS = 56
_CCTX_BITS = 64


def _sample(demand: DemandSource, channel: int, times) -> np.ndarray:
    values = np.asarray(demand(channel, np.asarray(times, dtype=float)), dtype=float)
    return np.maximum(np.rint(values), 0).astype(np.int64)


def run_simulation(
    cfg: SimConfig,
    iams: Sequence[IamNode],
    cctxs: Sequence[CcTxNode],
    demand_source: DemandSource,
) -> SimResult:
    if not iams and not cctxs:
        raise InvalidArgument("simulation needs at least one node")
    channels = [n.channel for n in iams] + [n.channel for n in cctxs]
    if len(set(channels)) != len(channels):
        raise InvalidArgument("node channels must be unique")

    seeds = np.random.SeedSequence(cfg.rng_seed).spawn(4)
    rng_flip, rng_turn, rng_age, rng_inline = (np.random.default_rng(s) for s in seeds)
    flipper = _BitFlipper(cfg.bit_flip_probability, rng_flip)
    tau = cfg.air_time
    horizon = cfg.duration

    iams = [replace(n) for n in iams]
    cctxs = [replace(n) for n in cctxs]
    stats = {ch: ChannelStats() for ch in channels}

    r_channel: list[int] = []
    r_time: list[float] = []
    r_sample: list[float] = []
    r_value: list[int] = []
    l_channel: list[int] = []
    l_time: list[float] = []
    l_cat: list[int] = []

    def lose(channel, t, category):
        stats[channel].losses[category] += 1
        l_channel.append(channel)
        l_time.append(t)
        l_cat.append(LOSS_CATEGORIES.index(category))

    # CC-TX transmissions are strictly periodic, so the whole schedule is known up front.
    starts_parts, owner_parts = [], []
    for k, node in enumerate(cctxs):
        n_tx = max(0, math.ceil((horizon - node.next_tx_time) / node.period))
        starts_parts.append(node.next_tx_time + node.period * np.arange(n_tx))
        owner_parts.append(np.full(n_tx, k, dtype=np.int64))
    if cctxs:
        starts = np.concatenate(starts_parts)
        owners = np.concatenate(owner_parts)
        order = np.argsort(starts, kind="stable")
        starts, owners = starts[order], owners[order]
    else:
        starts, owners = np.empty(0), np.empty(0, dtype=np.int64)
    collided = np.zeros(starts.size, dtype=bool)
    close = np.diff(starts) < tau
    collided[:-1] |= close
    collided[1:] |= close
    collided = collided.tolist()
    starts_list = starts.tolist()
    owners_list = owners.tolist()

    learned: dict[int, _Learned] = {}

    def guard_conflict(s: float) -> float | None:
        """Earliest time after ``s`` at which a poll exchange is clear, or None if ``s`` is clear."""
        end = s + cfg.iam_reply_deadline
        for est in learned.values():
            while est.predicted + cfg.guard_after < s:
                est.predicted += est.period
            lo, hi = est.predicted - cfg.guard_before, est.predicted + cfg.guard_after
            if lo < end and s < hi:
                return hi
        return None

    def learn(k: int, start: float):
        est = learned.get(k)
        if est is None:
            learned[k] = _Learned(start, CCTX_PERIOD_NOMINAL, start + CCTX_PERIOD_NOMINAL)
            return
        dt = start - est.last_start
        missed = max(1, round(dt / est.period))
        est.period = (1 - cfg.ema_alpha) * est.period + cfg.ema_alpha * dt / missed
        est.last_start = start
        est.predicted = start + est.period

    def mark_cctx_overlaps(a: float, b: float) -> bool:
        """Mark CC-TX packets overlapping [a, b) as collided; True if any overlap."""
        hit = False
        j = bisect.bisect_right(starts_list, a - tau)
        while j < len(starts_list) and starts_list[j] < b:
            if starts_list[j] + tau > a:
                collided[j] = True
                hit = True
            j += 1
        return hit

    n_iam = len(iams)
    slot = cfg.poll_period / n_iam if n_iam else 0.0
    turn_window = cfg.iam_reply_deadline - 2 * tau
    turn_block = iter(())
    heap: list[tuple[float, int, int]] = []
    if n_iam:
        heapq.heappush(heap, (0.0, 0, 0))  # (time, sequence number, nominal index)

    j_next = 0
    n_cctx_tx = len(starts_list)
    while True:
        t_cctx = starts_list[j_next] + tau if j_next < n_cctx_tx else math.inf
        t_poll = heap[0][0] if heap else math.inf
        if t_cctx == math.inf and t_poll == math.inf:
            break
        if t_cctx <= t_poll:
            j = j_next
            j_next += 1
            k = owners_list[j]
            node = cctxs[k]
            st = stats[node.channel]
            st.attempts += 1
            start = starts_list[j]
            if collided[j]:
                lose(node.channel, t_cctx, COLLISION)
                continue
            flips = flipper.take(_CCTX_BITS)
            if flips:
                sent = _sample(demand_source, node.channel, [start])[0]
                packet = _cctx_frame(node, int(sent)).with_flips(flips)
                try:
                    bits = codec.decode_cctx(packet)
                except ManchesterError:
                    lose(node.channel, t_cctx, MANCHESTER)
                    continue
                value = int.from_bytes(codec.bits_to_bytes(bits)[2:4], "big")
                if value != min(int(sent), 0xFFFF) or codec.bits_to_bytes(bits)[:2] != (node.id & 0xFFFF).to_bytes(2, "big"):
                    st.undetected += 1
            else:
                value = -1
            learn(k, start)
            st.received += 1
            r_channel.append(node.channel)
            r_time.append(t_cctx)
            r_sample.append(start)
            r_value.append(value)
            continue

        s, seq, q = heapq.heappop(heap)
        if s >= horizon:
            continue
        if cfg.guard_enabled:
            clear_at = guard_conflict(s)
            if clear_at is not None:
                heapq.heappush(heap, (clear_at, seq, q))
                continue
        node = iams[q % n_iam]
        st = stats[node.channel]
        st.attempts += 1
        poll_hit = mark_cctx_overlaps(s, s + tau)
        try:
            turn = next(turn_block)
        except StopIteration:
            turn_block = iter(rng_turn.uniform(0, turn_window, 4096).tolist())
            turn = next(turn_block)
        reply_start = s + tau + turn
        reply_end = reply_start + tau
        next_nominal = (q + 1) * slot
        heapq.heappush(heap, (max(next_nominal, s + cfg.iam_reply_deadline), seq + 1, q + 1))

        if not node.powered_at(s):
            lose(node.channel, s, ABSENT)
            continue
        if poll_hit:
            lose(node.channel, s + tau, COLLISION)
            continue
        poll_flips = flipper.take(_POLL_BITS)
        if poll_flips:
            # the IAM's checksum rejects a corrupt poll and no reply is sent
            try:
                codec.decode_iam(_iam_poll_frame(node).with_flips(poll_flips))
            except IntegrityError:
                lose(node.channel, s + tau, CHECKSUM)
                continue
        if mark_cctx_overlaps(reply_start, reply_end):
            lose(node.channel, reply_end, COLLISION)
            continue
        flips = flipper.take(_REPLY_BITS)
        if flips:
            age = float(rng_inline.uniform(0, cfg.staleness_max))
            sent = int(_sample(demand_source, node.channel, [reply_end - age])[0])
            try:
                payload = codec.decode_iam(_iam_reply_frame(node, sent).with_flips(flips))
            except IntegrityError:
                lose(node.channel, reply_end, CHECKSUM)
                continue
            value = int.from_bytes(payload[4:6], "big")
            if value != min(sent, 0xFFFF) or payload[:4] != node.id.to_bytes(4, "big"):
                st.undetected += 1
            node.data_age = age
        else:
            value = -1
        st.received += 1
        r_channel.append(node.channel)
        r_time.append(reply_end)
        r_sample.append(reply_end)
        r_value.append(value)

    readings = np.zeros(len(r_channel), dtype=_READING_DTYPE)
    readings["channel"] = r_channel
    readings["time"] = r_time
    readings["value"] = r_value
    sample_times = np.array(r_sample, dtype=float)

    iam_channels = {n.channel for n in iams}
    by_channel = {n.channel: n for n in list(iams) + list(cctxs)}
    keep = np.ones(readings.size, dtype=bool)
    for ch in channels:
        idx = np.flatnonzero((readings["channel"] == ch) & (readings["value"] < 0))
        if idx.size:
            times = sample_times[idx]
            if ch in iam_channels:
                times = times - rng_age.uniform(0, cfg.staleness_max, idx.size)
            readings["value"][idx] = _sample(demand_source, ch, times)
        sel = np.flatnonzero(readings["channel"] == ch)
        if sel.size == 0:
            continue
        node = by_channel[ch]
        kind = "iam" if ch in iam_channels else "whole_house"
        limit = IAM_MAX_WATTS if kind == "iam" else WHOLE_HOUSE_MAX_WATTS
        for i in sel[readings["value"][sel] > limit]:
            keep[i] = False
            stats[ch].received -= 1
            lose(ch, float(readings["time"][i]), FILTERED)
        kept = sel[keep[sel]]
        if kept.size:
            if ch in iam_channels:
                node.latest_power = int(readings["value"][kept[-1]])
            else:
                node.reading = int(readings["value"][kept[-1]])
    readings = readings[keep]

    losses = np.zeros(len(l_channel), dtype=_LOSS_DTYPE)
    losses["channel"] = l_channel
    losses["time"] = l_time
    losses["category"] = l_cat
    order = np.argsort(losses["time"], kind="stable")
    losses = losses[order]

    return SimResult(cfg, readings, losses, stats, iams, cctxs)

