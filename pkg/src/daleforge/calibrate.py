"""Per-installation conversion constants from paired ADC and reference-meter readings.

ADC readings are expressed in ADC steps (the scale of the stored 32-bit integer
samples), so ``volts = adc_value * volts_per_adc_step``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import hilbert

from daleforge.errors import DegenerateInput, InvalidArgument
from daleforge.powercalc import WaveformChunk, rms

PHASE_GATE_POWER_FACTOR = 0.97
PHASE_SEARCH_DEG = 5.0
PHASE_GRID_DEG = 0.01

FULL_SCALE_STEPS = 2**31


@dataclass(frozen=True)
class CalibrationConstants:
    volts_per_adc_step: float
    amps_per_adc_step: float
    phase_difference: float = 0.0

    def __post_init__(self):
        if not (self.volts_per_adc_step > 0 and self.amps_per_adc_step > 0):
            raise InvalidArgument("ADC step constants must be positive")
        if not abs(self.phase_difference) < math.pi / 2:
            raise InvalidArgument(f"|phase_difference| must be below pi/2, got {self.phase_difference}")


@dataclass(frozen=True)
class ReferenceSample:
    adc_v_rms: float
    adc_i_rms: float
    ref_volts_rms: float
    ref_amps_rms: float
    ref_power_factor: float = 1.0

    def __post_init__(self):
        values = (self.adc_v_rms, self.adc_i_rms, self.ref_volts_rms, self.ref_amps_rms)
        if any(v < 0 or not math.isfinite(v) for v in values):
            raise InvalidArgument("RMS values must be finite and non-negative")
        if not 0.0 <= self.ref_power_factor <= 1.0:
            raise InvalidArgument(f"power factor must be in [0, 1], got {self.ref_power_factor}")

    @classmethod
    def from_chunk(cls, raw: WaveformChunk, ref_volts_rms, ref_amps_rms, ref_power_factor=1.0):
        """Build a sample from a chunk whose samples are raw ADC steps."""
        return cls(rms(raw.voltage), rms(raw.current), ref_volts_rms, ref_amps_rms, ref_power_factor)


def _fit_ratio(adc: np.ndarray, ref: np.ndarray) -> float:
    # least squares through the origin: argmin_c sum (ref - c * adc)^2
    return float(np.dot(adc, ref) / np.dot(adc, adc))


def estimate_constants(samples: Sequence[ReferenceSample]) -> CalibrationConstants:
    if not samples:
        raise InvalidArgument("need at least one reference sample")
    adc_v = np.array([s.adc_v_rms for s in samples], dtype=float)
    adc_i = np.array([s.adc_i_rms for s in samples], dtype=float)
    if np.any(adc_v <= 0) or np.any(adc_i <= 0):
        raise DegenerateInput("ADC RMS reading of zero cannot be calibrated")
    ref_v = np.array([s.ref_volts_rms for s in samples], dtype=float)
    ref_i = np.array([s.ref_amps_rms for s in samples], dtype=float)
    return CalibrationConstants(_fit_ratio(adc_v, ref_v), _fit_ratio(adc_i, ref_i))


def fit_residual(samples: Sequence[ReferenceSample], consts: CalibrationConstants) -> tuple[float, float]:
    """Largest absolute (volts, amps) residual of the fitted constants over ``samples``."""
    dv = max(abs(s.ref_volts_rms - consts.volts_per_adc_step * s.adc_v_rms) for s in samples)
    di = max(abs(s.ref_amps_rms - consts.amps_per_adc_step * s.adc_i_rms) for s in samples)
    return dv, di


def _correlation_curve(chunk: WaveformChunk) -> tuple[float, float]:
    v = chunk.voltage - chunk.voltage.mean()
    i = chunk.current - chunk.current.mean()
    quadrature = np.imag(hilbert(i))
    return float(np.mean(v * i)), float(np.mean(v * quadrature))


def estimate_phase(
    chunk: WaveformChunk, ref: ReferenceSample, fundamental_hz: float = 50.0
) -> float | None:
    """Phase (radians) by which the sensor chain delays current relative to voltage.

    Returns ``None`` when the reference power factor is too low for the load to be
    trusted as resistive.
    """
    if len(chunk) < chunk.sample_rate / fundamental_hz:
        raise InvalidArgument("chunk is shorter than one fundamental cycle")
    if ref.ref_power_factor <= PHASE_GATE_POWER_FACTOR:
        return None
    in_phase, quad = _correlation_curve(chunk)
    # correlation of voltage with the current advanced by theta
    grid = np.deg2rad(np.arange(-PHASE_SEARCH_DEG, PHASE_SEARCH_DEG + PHASE_GRID_DEG / 2, PHASE_GRID_DEG))
    curve = in_phase * np.cos(grid) + quad * np.sin(grid)
    k = int(np.argmax(curve))
    theta = grid[k]
    if 0 < k < grid.size - 1:
        y0, y1, y2 = curve[k - 1], curve[k], curve[k + 1]
        denom = y0 - 2 * y1 + y2
        if denom != 0:
            theta += 0.5 * (y0 - y2) / denom * (grid[1] - grid[0])
    return float(-theta)
