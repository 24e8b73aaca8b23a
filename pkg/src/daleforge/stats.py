"""Validation statistics and preprocessing for recorded datasets.

Power series are treated as zero-order holds: each reading holds until the
next one. A silence longer than ``LARGE_GAP_SECONDS`` means the meter was off
or unplugged, so the held value is dropped and the interval counts as zero.
"""

from __future__ import annotations

import io
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from daleforge.datasets import DEFAULT_ON_POWER_THRESHOLD, ChannelSeries, HouseDataset, MainsSeries
from daleforge.errors import ConsistencyError, DegenerateInput, InsufficientData, InvalidArgument, UndefinedCorrelation

LARGE_GAP_SECONDS = 120.0
SAMPLE_PERIOD = 6.0
CORRELATION_PERIOD = 60.0
DAY = 86400.0
REFERENCE_KWH_PER_DAY = 9.97


def as_arrays(series) -> tuple[np.ndarray, np.ndarray]:
    """``(times, watts)`` as float arrays from a channel, a mains series or a pair."""
    if isinstance(series, ChannelSeries):
        t, v = series.timestamps, series.power
    elif isinstance(series, MainsSeries):
        t, v = series.timestamps, series.active
    else:
        t, v = series
    t = np.asarray(t, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if t.shape != v.shape or t.ndim != 1:
        raise InvalidArgument("series needs 1-D time and value arrays of equal length")
    return t, v


def cumulative_energy(series, at, max_hold: float | None = LARGE_GAP_SECONDS) -> np.ndarray:
    """Energy in joules from the first reading up to each time in ``at``."""
    t, v = as_arrays(series)
    at = np.asarray(at, dtype=np.float64)
    if t.size == 0:
        return np.zeros(at.shape)
    dt = np.diff(t)
    held = v[:-1].copy()
    if max_hold is not None:
        held[dt > max_hold] = 0.0
    held = np.append(held, 0.0)  # nothing is held past the last reading
    cum = np.concatenate([[0.0], np.cumsum(held[:-1] * dt)])
    k = np.searchsorted(t, at, side="right") - 1
    inside = k >= 0
    kk = np.clip(k, 0, None)
    return np.where(inside, cum[kk] + held[kk] * (at - t[kk]), 0.0)


def energy_joules(series, start=None, end=None, max_hold: float | None = LARGE_GAP_SECONDS) -> float:
    t, _ = as_arrays(series)
    if t.size == 0:
        return 0.0
    start = t[0] if start is None else start
    end = t[-1] if end is None else end
    if end <= start:
        return 0.0
    e = cumulative_energy(series, [start, end], max_hold)
    return float(e[1] - e[0])


def energy_kwh(series, start=None, end=None, max_hold: float | None = LARGE_GAP_SECONDS) -> float:
    return energy_joules(series, start, end, max_hold) / 3.6e6


def resample_mean(series, edges, max_hold: float | None = LARGE_GAP_SECONDS) -> np.ndarray:
    """Time-weighted mean power over each interval between consecutive ``edges``."""
    edges = np.asarray(edges, dtype=np.float64)
    e = cumulative_energy(series, edges, max_hold)
    return np.diff(e) / np.diff(edges)


def common_interval(mains, submeters: Sequence = ()) -> tuple[float, float]:
    """Span of ``mains`` clipped to the earliest and latest submeter readings.

    A submeter that is silent for part of that span (unplugged, or not yet
    installed) simply contributes nothing there.
    """
    t, _ = as_arrays(mains)
    if t.size == 0:
        raise InsufficientData("mains has no readings")
    start, end = t[0], t[-1]
    spans = [u for u in (as_arrays(s)[0] for s in submeters) if u.size]
    if spans:
        start = max(start, min(u[0] for u in spans))
        end = min(end, max(u[-1] for u in spans))
    return float(start), float(end)


# --- dropout -------------------------------------------------------------------------------


def dropout_counts(series, expected_period: float = SAMPLE_PERIOD, large_gap_threshold: float = LARGE_GAP_SECONDS):
    """``(observed, expected)`` reading counts, ignoring gaps of at least ``large_gap_threshold``."""
    t, _ = as_arrays(series)
    if t.size < 2:
        raise InsufficientData("dropout needs at least two readings")
    if expected_period <= 0:
        raise InvalidArgument("expected_period must be positive")
    gaps = np.diff(t)
    kept = gaps[gaps < large_gap_threshold]
    # one reading opens the recording and one more opens each segment after a large gap
    segments = 1 + int(np.count_nonzero(gaps >= large_gap_threshold))
    expected = segments + int(np.sum(np.maximum(1, np.rint(kept / expected_period))))
    observed = t.size
    return observed, expected


def dropout_rate(series, expected_period: float = SAMPLE_PERIOD, large_gap_threshold: float = LARGE_GAP_SECONDS) -> float:
    observed, expected = dropout_counts(series, expected_period, large_gap_threshold)
    return max(0.0, 1.0 - observed / expected)


# --- submetering ---------------------------------------------------------------------------


def proportion_submetered(mains, submeters: Sequence, max_hold: float | None = LARGE_GAP_SECONDS) -> float:
    """Submeter energy divided by mains energy over the interval all series share."""
    start, end = common_interval(mains, submeters)
    total = energy_joules(mains, start, end, max_hold)
    if total <= 0:
        raise DegenerateInput("mains energy is zero over the common interval")
    return sum(energy_joules(s, start, end, max_hold) for s in submeters) / total


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise InsufficientData("correlation needs at least two aligned samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelation("correlation is undefined for a constant series")
    return float(np.dot(dx, dy) / math.sqrt(sxx * syy))


def mains_submeter_correlation(
    mains, submeters: Sequence, resample_period: float = CORRELATION_PERIOD, max_hold: float | None = LARGE_GAP_SECONDS
) -> float:
    """Pearson r between the resampled mains and the resampled sum of submeters."""
    if resample_period <= 0:
        raise InvalidArgument("resample_period must be positive")
    start, end = common_interval(mains, submeters)
    n = int((end - start) // resample_period)
    if n < 2:
        raise InsufficientData("fewer than two resampling periods in the common interval")
    edges = start + resample_period * np.arange(n + 1)
    m = resample_mean(mains, edges, max_hold)
    s = np.zeros(n)
    for sub in submeters:
        s += resample_mean(sub, edges, max_hold)
    return pearson(m, s)


# --- gap filling ---------------------------------------------------------------------------


def gap_fill(series: ChannelSeries, long_gap_threshold: float = LARGE_GAP_SECONDS, cadence: int = 6) -> ChannelSeries:
    """Insert readings at ``cadence`` into every gap longer than 1.5 cadences.

    Fillers inside a gap longer than ``long_gap_threshold`` are zero (the meter
    was off); shorter gaps repeat the previous reading. Original readings are
    kept untouched, and filling an already-filled series changes nothing.
    """
    if int(cadence) != cadence or cadence < 1:
        raise InvalidArgument("cadence must be a positive whole number of seconds")
    t, v = series.timestamps, series.power
    if t.size < 2:
        return series
    gaps = np.diff(t)
    # fillers at t + k*cadence while they stay more than half a cadence before the next reading
    n_fill = np.where(2 * gaps > 3 * cadence, -((-(2 * gaps - cadence)) // (2 * cadence)) - 1, 0)
    if not np.any(n_fill):
        return series
    owner = np.repeat(np.arange(gaps.size), n_fill)
    k = np.arange(owner.size) - np.repeat(np.cumsum(n_fill) - n_fill, n_fill) + 1
    fill_t = t[owner] + k * cadence
    fill_v = np.where(gaps[owner] > long_gap_threshold, 0, v[owner])
    order = np.argsort(np.concatenate([t, fill_t]), kind="stable")
    return ChannelSeries(
        series.channel, np.concatenate([t, fill_t])[order], np.concatenate([v, fill_v])[order], series.unit
    )


# --- histograms and rankings -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    label: str = ""

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("bin_start,bin_end,count\n")
        for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
            buf.write(f"{lo:g},{hi:g},{c:g}\n")
        return buf.getvalue()

    def modes(self, min_fraction: float = 0.01) -> list[float]:
        """Centres of bins that are strict local maxima holding at least ``min_fraction`` of the total."""
        c = np.asarray(self.counts, dtype=float)
        if c.sum() == 0:
            return []
        padded = np.concatenate([[-1.0], c, [-1.0]])
        peak = (c > padded[:-2]) & (c >= padded[2:]) & (c >= min_fraction * c.sum())
        centres = (self.edges[:-1] + self.edges[1:]) / 2
        return centres[peak].tolist()


def power_histogram(series, edges=None, threshold: float = 0.0, bin_width: float = 10.0, label="") -> Histogram:
    """Histogram of readings at or above ``threshold`` (the appliance is on)."""
    _, v = as_arrays(series)
    v = v[v >= threshold]
    if edges is None:
        top = max(float(v.max()) if v.size else 0.0, bin_width)
        edges = np.arange(0.0, top + 2 * bin_width, bin_width)
    counts, edges = np.histogram(v, bins=np.asarray(edges, dtype=float))
    return Histogram(edges, counts, label)


def mains_histogram(series, max_watts: float = 500.0, bin_width: float = 1.0) -> Histogram:
    """Density of mains demand; the default range covers the standing-load region."""
    edges = np.arange(0.0, max_watts + bin_width, bin_width)
    _, v = as_arrays(series)
    counts, _ = np.histogram(v, bins=edges)
    total = max(int(v.size), 1)
    return Histogram(edges, counts / total, "mains")


def hourly_usage(series, threshold: float = DEFAULT_ON_POWER_THRESHOLD, label="") -> Histogram:
    """Fraction of on-readings that fall in each UTC hour of the day."""
    t, v = as_arrays(series)
    hours = ((t[v >= threshold] % DAY) // 3600).astype(int)
    counts = np.bincount(hours, minlength=24)[:24].astype(float)
    if counts.sum():
        counts /= counts.sum()
    return Histogram(np.arange(25.0), counts, label)


def top_k_energy(dataset: HouseDataset, k: int = 10, max_hold: float | None = LARGE_GAP_SECONDS) -> list[tuple[int, str, float]]:
    """Submeters ranked by energy: ``(channel, name, kWh)``, largest first."""
    ranked = [
        (i, dataset.labels[i], energy_kwh(dataset.channels[i], max_hold=max_hold)) for i in dataset.submeters()
    ]
    ranked.sort(key=lambda r: (-r[2], r[0]))
    return ranked[:k]


def daily_energy(series, max_hold: float | None = LARGE_GAP_SECONDS) -> list[tuple[int, float]]:
    """kWh per UTC day as ``(day start, kWh)``; partial first and last days are included."""
    t, _ = as_arrays(series)
    if t.size == 0:
        return []
    first = math.floor(t[0] / DAY) * DAY
    edges = np.arange(first, t[-1] + DAY, DAY)
    bounds = np.clip(edges, t[0], t[-1])
    e = cumulative_energy(series, bounds, max_hold)
    return [(int(d), float(x) / 3.6e6) for d, x in zip(edges[:-1], np.diff(e))]


# --- report --------------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    uptime: float
    total_duration: float
    mean_energy_per_day: float
    mains_vs_submeter_correlation: float
    proportion_submetered: float
    dropout_rate: float
    mains_source: str = "mains.dat"
    channels: int = 0

    def __post_init__(self):
        if not 0.0 <= self.proportion_submetered <= 1.05:
            raise ConsistencyError(f"proportion submetered {self.proportion_submetered:.3f} is outside [0, 1.05]")
        if not 0.0 <= self.dropout_rate <= 1.0:
            raise ConsistencyError(f"dropout rate {self.dropout_rate} is outside [0, 1]")
        if self.uptime > self.total_duration + 1e-9:
            raise ConsistencyError("uptime exceeds total duration")

    def to_text(self) -> str:
        lines = [f"{k} = {v}" for k, v in asdict(self).items()]
        lines.append(f"reference_kwh_per_day = {REFERENCE_KWH_PER_DAY}")
        return "\n".join(lines) + "\n"


@dataclass
class ReportBundle:
    report: ValidationReport
    appliance_histograms: dict[int, Histogram] = field(default_factory=dict)
    hourly: dict[int, Histogram] = field(default_factory=dict)
    mains_histogram: Histogram | None = None
    top_k: list = field(default_factory=list)
    daily: list = field(default_factory=list)


def uptime_seconds(series, large_gap_threshold: float = LARGE_GAP_SECONDS) -> float:
    t, _ = as_arrays(series)
    gaps = np.diff(t)
    return float(np.sum(gaps[gaps < large_gap_threshold]))


def _mains_series(dataset: HouseDataset):
    if dataset.mains is not None and len(dataset.mains) >= 2:
        return dataset.mains, "mains.dat"
    site = dataset.site_meter()
    return dataset.channels[site], f"channel_{site}.dat"


def _threshold(dataset: HouseDataset, index: int) -> float:
    if dataset.metadata is not None:
        try:
            return dataset.metadata.threshold(index)
        except KeyError:
            pass
    return DEFAULT_ON_POWER_THRESHOLD


def report(
    dataset: HouseDataset,
    large_gap_threshold: float = LARGE_GAP_SECONDS,
    expected_period: float = SAMPLE_PERIOD,
    resample_period: float = CORRELATION_PERIOD,
    top_k: int = 10,
    histogram_bin_width: float = 10.0,
    mains_histogram_max: float = 500.0,
) -> ReportBundle:
    """Summary statistics and histogram tables for one house.

    The mains reference is the 1 Hz ``mains.dat`` active power when present,
    otherwise the whole-house meter channel. Dropout is pooled over every
    meter channel.
    """
    if not dataset.channels or all(len(s) == 0 for s in dataset.channels.values()):
        raise InsufficientData("dataset has no readings")
    mains, source = _mains_series(dataset)
    subs = [dataset.channels[i] for i in dataset.submeters() if len(dataset.channels[i])]
    t, _ = as_arrays(mains)
    if t.size < 2:
        raise InsufficientData("mains series needs at least two readings")
    total = float(t[-1] - t[0])
    up = uptime_seconds(mains, large_gap_threshold)
    mains_kwh = energy_kwh(mains, max_hold=large_gap_threshold)
    per_day = mains_kwh / (up / DAY) if up > 0 else 0.0

    observed = expected = 0
    for series in dataset.channels.values():
        if len(series) >= 2:
            o, e = dropout_counts(series, expected_period, large_gap_threshold)
            observed, expected = observed + o, expected + e
    drop = max(0.0, 1.0 - observed / expected) if expected else 0.0

    proportion = proportion_submetered(mains, subs, large_gap_threshold) if subs else 0.0
    try:
        r = mains_submeter_correlation(mains, subs, resample_period, large_gap_threshold) if subs else float("nan")
    except (UndefinedCorrelation, InsufficientData):
        r = float("nan")

    rep = ValidationReport(
        uptime=up,
        total_duration=total,
        mean_energy_per_day=per_day,
        mains_vs_submeter_correlation=r,
        proportion_submetered=proportion,
        dropout_rate=drop,
        mains_source=source,
        channels=len(dataset.channels),
    )
    hists = {
        i: power_histogram(dataset.channels[i], threshold=_threshold(dataset, i), bin_width=histogram_bin_width, label=dataset.labels[i])
        for i in dataset.submeters()
    }
    hourly = {i: hourly_usage(dataset.channels[i], _threshold(dataset, i), dataset.labels[i]) for i in dataset.submeters()}
    return ReportBundle(
        report=rep,
        appliance_histograms=hists,
        hourly=hourly,
        mains_histogram=mains_histogram(mains, mains_histogram_max),
        top_k=top_k_energy(dataset, top_k, large_gap_threshold),
        daily=daily_energy(mains, large_gap_threshold),
    )


def write_report(bundle: ReportBundle, out_dir: str | Path) -> list[Path]:
    """Write ``report.txt`` plus CSV tables into ``out_dir``; returns the files written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, text):
        path = out / name
        path.write_text(text)
        written.append(path)

    put("report.txt", bundle.report.to_text())
    if bundle.mains_histogram is not None:
        put("mains_histogram.csv", bundle.mains_histogram.to_csv())
    for i, h in sorted(bundle.appliance_histograms.items()):
        put(f"histogram_channel_{i}.csv", h.to_csv())
    rows = ["hour," + ",".join(f"channel_{i}" for i in sorted(bundle.hourly))]
    for hour in range(24):
        rows.append(f"{hour}," + ",".join(f"{bundle.hourly[i].counts[hour]:.6f}" for i in sorted(bundle.hourly)))
    put("hourly_usage.csv", "\n".join(rows) + "\n")
    put("top_energy.csv", "rank,channel,name,kwh\n" + "".join(f"{n},{i},{name},{kwh:.6f}\n" for n, (i, name, kwh) in enumerate(bundle.top_k, 1)))
    put("daily_energy.csv", "day_start,kwh\n" + "".join(f"{d},{kwh:.6f}\n" for d, kwh in bundle.daily))
    return written
