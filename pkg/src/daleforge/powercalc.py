"""Waveform synthesis and reduction of voltage/current samples to 1 Hz power figures.

All functions are pure: chunks are immutable and every call returns new objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import signal

from daleforge.errors import InvalidArgument

SQRT2 = math.sqrt(2.0)


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class WaveformChunk:
    """Paired voltage (V) and current (A) samples starting at ``start_time`` (unix seconds)."""

    start_time: float
    sample_rate: int
    voltage: np.ndarray
    current: np.ndarray
    quantized: bool = False

    def __post_init__(self):
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise InvalidArgument(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        object.__setattr__(self, "sample_rate", int(self.sample_rate))
        v = _frozen_array(self.voltage)
        i = _frozen_array(self.current)
        if v.ndim != 1 or i.ndim != 1:
            raise InvalidArgument("voltage and current must be 1-D")
        if v.shape != i.shape:
            raise InvalidArgument(f"voltage has {v.size} samples but current has {i.size}")
        if v.size < 1:
            raise InvalidArgument("chunk must contain at least one sample")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(i))):
            raise InvalidArgument("chunk contains non-finite samples")
        object.__setattr__(self, "voltage", v)
        object.__setattr__(self, "current", i)

    def __len__(self) -> int:
        return self.voltage.size

    @property
    def duration(self) -> float:
        return self.voltage.size / self.sample_rate

    def __eq__(self, other):
        if not isinstance(other, WaveformChunk):
            return NotImplemented
        return (
            self.start_time == other.start_time
            and self.sample_rate == other.sample_rate
            and self.quantized == other.quantized
            and np.array_equal(self.voltage, other.voltage)
            and np.array_equal(self.current, other.current)
        )

    __hash__ = None


@dataclass(frozen=True)
class AdcConfig:
    """Sound-card ADC model.

    ``span_factor`` converts the full-scale figure into the span covered by
    ``2**effective_bits`` codes. The default ``2*sqrt(2)`` treats full scale as an
    RMS value and covers the whole peak-to-peak swing; ``span_factor=1`` treats
    full scale as the span itself (how the 2012 emonTx comparison is worked).
    """

    effective_bits: int = 15
    full_scale_voltage_rms: float = 253.0
    full_scale_current_rms: float = 30.0
    line_input_clip: float = 1.0
    span_factor: float = 2.0 * SQRT2

    def __post_init__(self):
        if not 8 <= self.effective_bits <= 24:
            raise InvalidArgument(f"effective_bits must be in [8, 24], got {self.effective_bits}")
        if self.full_scale_voltage_rms <= 0 or self.full_scale_current_rms <= 0:
            raise InvalidArgument("full-scale values must be positive")
        if self.line_input_clip <= 0 or self.span_factor <= 0:
            raise InvalidArgument("line_input_clip and span_factor must be positive")

    @classmethod
    def emontx_2012(cls) -> "AdcConfig":
        # 10-bit ADC spending one bit on sign: 9 bits across a 30 A range.
        return cls(effective_bits=9, full_scale_current_rms=30.0, span_factor=1.0)

    @property
    def levels(self) -> int:
        return 2 ** self.effective_bits

    @property
    def current_step(self) -> float:
        return self.full_scale_current_rms * self.span_factor / self.levels

    @property
    def voltage_step(self) -> float:
        return self.full_scale_voltage_rms * self.span_factor / self.levels

    def power_resolution(self, volts: float = 230.0) -> float:
        """Smallest resolvable change in power at a fixed ``volts``."""
        return self.current_step * volts


@dataclass(frozen=True)
class PowerMetrics:
    timestamp: float
    active_power: float
    apparent_power: float
    rms_voltage: float

    @property
    def power_factor(self) -> float:
        return self.active_power / self.apparent_power if self.apparent_power else 0.0


def _sample_count(duration: float, sample_rate: float) -> int:
    if sample_rate <= 0:
        raise InvalidArgument(f"sample_rate must be positive, got {sample_rate}")
    exact = duration * sample_rate
    n = round(exact)
    if abs(exact - n) > 1e-9 * max(1.0, abs(exact)):
        raise InvalidArgument(f"duration x sample_rate = {exact} is not an integer sample count")
    if n < 2:
        raise InvalidArgument(f"need at least 2 samples, got {n}")
    return int(n)


def synth_waveform(
    fundamental_hz: float,
    duration: float,
    sample_rate: int,
    v_rms: float,
    current_components: Iterable[tuple[int, float, float]] = (),
    start_time: float = 0.0,
) -> WaveformChunk:
    """Pure sinusoidal voltage plus a current built from harmonic components.

    Each component is ``(harmonic_number, amps_rms, phase_rad)``; a positive phase
    makes that harmonic lag the voltage.
    """
    n = _sample_count(duration, sample_rate)
    t = np.arange(n) / sample_rate
    omega = 2.0 * np.pi * fundamental_hz
    voltage = v_rms * SQRT2 * np.sin(omega * t)
    current = np.zeros(n)
    for harmonic, amps_rms, phase in current_components:
        if harmonic < 1:
            raise InvalidArgument(f"harmonic numbers start at 1, got {harmonic}")
        current += amps_rms * SQRT2 * np.sin(harmonic * omega * t - phase)
    return WaveformChunk(start_time, int(sample_rate), voltage, current)


def rms(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(np.sqrt(np.mean(x * x)))


def compute_metrics(chunk: WaveformChunk, chunk_period: float = 1.0) -> list[PowerMetrics]:
    """Active power, apparent power and RMS voltage for each complete window.

    A trailing window shorter than ``chunk_period`` is dropped.
    """
    if chunk_period <= 0:
        raise InvalidArgument(f"chunk_period must be positive, got {chunk_period}")
    if len(chunk) == 0:
        raise InvalidArgument("empty chunk")
    per_window = int(round(chunk_period * chunk.sample_rate))
    if per_window < 1:
        raise InvalidArgument("chunk_period shorter than one sample")
    n_windows = len(chunk) // per_window
    if n_windows == 0:
        return []
    used = n_windows * per_window
    v = chunk.voltage[:used].reshape(n_windows, per_window)
    i = chunk.current[:used].reshape(n_windows, per_window)
    active = np.mean(v * i, axis=1)
    v_rms = np.sqrt(np.mean(v * v, axis=1))
    i_rms = np.sqrt(np.mean(i * i, axis=1))
    apparent = v_rms * i_rms
    return [
        PowerMetrics(chunk.start_time + k * chunk_period, float(p), float(s), float(vr))
        for k, (p, s, vr) in enumerate(zip(active, apparent, v_rms))
    ]


def quantize(chunk: WaveformChunk, cfg: AdcConfig = AdcConfig()) -> tuple[WaveformChunk, int]:
    """Round every sample to the nearest ADC step; returns the chunk and the number of clipped samples."""
    top = math.floor(cfg.line_input_clip * cfg.levels / 2)
    lo, hi = -top, top - 1
    clipped = 0
    out = []
    for values, step in ((chunk.voltage, cfg.voltage_step), (chunk.current, cfg.current_step)):
        codes = np.rint(values / step)
        clipped += int(np.count_nonzero((codes < lo) | (codes > hi)))
        out.append(np.clip(codes, lo, hi) * step)
    return WaveformChunk(chunk.start_time, chunk.sample_rate, out[0], out[1], quantized=True), clipped


# 80 dB stop band; transition band centred on the cutoff and ending at the new Nyquist.
_STOPBAND_DB = 80.0
_CUTOFF_FRACTION = 0.45
_TRANSITION_FRACTION = 0.10


@lru_cache(maxsize=16)
def anti_alias_taps(source_rate: int, target_rate: int) -> tuple[np.ndarray, int, int]:
    """Kaiser-windowed sinc designed at the polyphase (upsampled) rate."""
    g = math.gcd(source_rate, target_rate)
    up, down = target_rate // g, source_rate // g
    fs_up = source_rate * up
    width = _TRANSITION_FRACTION * target_rate / (fs_up / 2.0)
    numtaps, beta = signal.kaiserord(_STOPBAND_DB, width)
    numtaps |= 1
    taps = signal.firwin(numtaps, _CUTOFF_FRACTION * target_rate, window=("kaiser", beta), fs=fs_up)
    taps.setflags(write=False)
    return taps, up, down


def downsample(chunk: WaveformChunk, target_rate: int) -> WaveformChunk:
    if target_rate <= 0:
        raise InvalidArgument(f"target_rate must be positive, got {target_rate}")
    if int(target_rate) != target_rate:
        raise InvalidArgument(f"target_rate must be an integer, got {target_rate}")
    target_rate = int(target_rate)
    if target_rate > chunk.sample_rate:
        raise InvalidArgument(f"cannot upsample {chunk.sample_rate} Hz to {target_rate} Hz")
    if target_rate == chunk.sample_rate:
        return chunk
    taps, up, down = anti_alias_taps(chunk.sample_rate, target_rate)
    v = signal.resample_poly(chunk.voltage, up, down, window=np.array(taps))
    i = signal.resample_poly(chunk.current, up, down, window=np.array(taps))
    return WaveformChunk(chunk.start_time, target_rate, v, i, quantized=False)


def split_chunks(chunk: WaveformChunk, seconds: float) -> Sequence[WaveformChunk]:
    """Cut a long recording into consecutive chunks of at most ``seconds``."""
    per = int(round(seconds * chunk.sample_rate))
    if per < 1:
        raise InvalidArgument("split length shorter than one sample")
    pieces = []
    for start in range(0, len(chunk), per):
        pieces.append(
            WaveformChunk(
                chunk.start_time + start / chunk.sample_rate,
                chunk.sample_rate,
                chunk.voltage[start : start + per],
                chunk.current[start : start + per],
                chunk.quantized,
            )
        )
    return pieces

