"""Stereo voltage/current waveform chunks as 32-bit PCM WAV files.

Samples are stored as signed 32-bit integers, so a normalized sample is
``int / 2**31`` and a physical value is ``normalized * step * 2**31``, i.e.
one integer count per ADC step.
"""

from __future__ import annotations

import math
import re
import wave
from pathlib import Path

import numpy as np

from daleforge.calibrate import FULL_SCALE_STEPS, CalibrationConstants
from daleforge.errors import InvalidArgument, ParseError
from daleforge.powercalc import WaveformChunk

MAX_CHUNK_SECONDS = 3600.0
_INT32 = np.dtype("<i4")
_NAME = re.compile(r"vi-(\d+)_(\d{6})\.wav")


def chunk_filename(start_time: float) -> str:
    """``vi-<seconds>_<microseconds>.wav``: the underscore stands in for the decimal point."""
    if start_time < 0 or not math.isfinite(start_time):
        raise InvalidArgument(f"start time must be a non-negative finite number, got {start_time}")
    seconds = math.floor(start_time)
    micros = round((start_time - seconds) * 1e6)
    if micros == 1_000_000:
        seconds, micros = seconds + 1, 0
    return f"vi-{seconds}_{micros:06d}.wav"


def parse_chunk_filename(name: str) -> float:
    m = _NAME.fullmatch(Path(name).name)
    if not m:
        raise ParseError("not a waveform chunk file name", str(name))
    return int(m.group(1)) + int(m.group(2)) / 1e6


def _to_counts(values: np.ndarray, step: float) -> np.ndarray:
    counts = np.rint(np.asarray(values) / step)
    info = np.iinfo(np.int32)
    return np.clip(counts, info.min, info.max).astype(_INT32)


def write_waveform_chunk(chunk: WaveformChunk, calib: CalibrationConstants | None, directory: str | Path) -> Path:
    """Write ``chunk`` into ``directory``; returns the new file's path.

    With ``calib`` the chunk is in volts and amps. Without it the samples are
    taken to be normalized already (full scale = 1).
    """
    if chunk.duration > MAX_CHUNK_SECONDS:
        raise InvalidArgument(f"chunk lasts {chunk.duration:.0f} s; at most one hour per file")
    if int(chunk.sample_rate) != chunk.sample_rate:
        raise InvalidArgument("WAV files need an integer sample rate")
    if calib is None:
        v_step = i_step = 1.0 / FULL_SCALE_STEPS
    else:
        v_step, i_step = calib.volts_per_adc_step, calib.amps_per_adc_step
    frames = np.empty(2 * len(chunk), dtype=_INT32)
    frames[0::2] = _to_counts(chunk.voltage, v_step)
    frames[1::2] = _to_counts(chunk.current, i_step)
    path = Path(directory) / chunk_filename(chunk.start_time)
    with wave.open(str(path), "wb") as w:
        w.setnchannels(2)
        w.setsampwidth(4)
        w.setframerate(int(chunk.sample_rate))
        w.writeframes(frames.tobytes())
    return path


def read_waveform_chunk(path: str | Path, calib: CalibrationConstants | None = None) -> WaveformChunk:
    """Read a chunk file.

    Without calibration constants the samples cannot be put into physical
    units, so the normalized values in [-1, 1) are returned instead.
    """
    path = Path(path)
    start = parse_chunk_filename(path.name)
    try:
        with wave.open(str(path), "rb") as w:
            if w.getnchannels() != 2 or w.getsampwidth() != 4:
                raise ParseError("expected stereo 32-bit samples", str(path))
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise ParseError(f"unreadable WAV file: {exc}", str(path)) from exc
    frames = np.frombuffer(raw, dtype=_INT32).astype(np.float64)
    normalized = frames / FULL_SCALE_STEPS
    v, i = normalized[0::2], normalized[1::2]
    if calib is None:
        return WaveformChunk(start, rate, v, i)
    return WaveformChunk(
        start,
        rate,
        v * calib.volts_per_adc_step * FULL_SCALE_STEPS,
        i * calib.amps_per_adc_step * FULL_SCALE_STEPS,
        quantized=True,
    )


def list_chunks(directory: str | Path) -> list[Path]:
    """Chunk files in ``directory`` in time order."""
    found = [p for p in Path(directory).iterdir() if _NAME.fullmatch(p.name)]
    return sorted(found, key=lambda p: parse_chunk_filename(p.name))
