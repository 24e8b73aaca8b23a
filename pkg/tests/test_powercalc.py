import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from daleforge.errors import InvalidArgument
from daleforge.powercalc import (
    AdcConfig,
    WaveformChunk,
    compute_metrics,
    downsample,
    quantize,
    rms,
    synth_waveform,
)


def brute_rms(values):
    total = 0.0
    for x in values:
        total += x * x
    return math.sqrt(total / len(values))


def brute_active(v, i):
    total = 0.0
    for a, b in zip(v, i):
        total += a * b
    return total / len(v)


def spectral_magnitude(x, fs, freq):
    """Amplitude of the sinusoid at ``freq`` from a Hann-windowed DFT evaluated at that frequency."""
    n = len(x)
    w = np.hanning(n)
    t = np.arange(n) / fs
    return 2.0 * abs(np.sum(w * x * np.exp(-2j * np.pi * freq * t))) / np.sum(w)


class TestSynthWaveform:
    def test_unity_sinusoid_rms(self):
        chunk = synth_waveform(50, 1, 16000, 230, [(1, 1.0, 0.0)])
        assert rms(chunk.voltage) == pytest.approx(230.0, abs=0.01)
        assert rms(chunk.current) == pytest.approx(1.0, abs=0.001)

    def test_empty_components_give_zero_current(self):
        chunk = synth_waveform(50, 1, 16000, 230, [])
        assert not chunk.current.any()

    def test_third_harmonic_against_per_sample_oracle(self):
        chunk = synth_waveform(50, 0.02, 44100, 230, [(3, 0.5, math.pi / 2)])
        assert len(chunk) == 882
        # oracle: evaluate each sample independently of the vectorised path
        samples = [0.5 * math.sqrt(2) * math.sin(3 * 2 * math.pi * 50 * k / 44100 - math.pi / 2) for k in range(882)]
        assert np.allclose(chunk.current, samples, atol=1e-12)
        assert brute_rms(samples) == pytest.approx(0.5, abs=0.001)
        assert rms(chunk.current) == pytest.approx(0.5, abs=0.001)

    @pytest.mark.parametrize("duration, rate", [(0.0101, 1000), (1.00001, 16000)])
    def test_non_integer_sample_count_rejected(self, duration, rate):
        with pytest.raises(InvalidArgument):
            synth_waveform(50, duration, rate, 230, [])

    def test_zero_sample_rate_rejected(self):
        with pytest.raises(InvalidArgument):
            synth_waveform(50, 1, 0, 230, [])

    def test_harmonic_zero_rejected(self):
        with pytest.raises(InvalidArgument):
            synth_waveform(50, 1, 1000, 230, [(0, 1.0, 0.0)])

    def test_deterministic(self):
        a = synth_waveform(50, 0.1, 8000, 230, [(1, 2.0, 0.3), (5, 0.2, 1.0)])
        b = synth_waveform(50, 0.1, 8000, 230, [(1, 2.0, 0.3), (5, 0.2, 1.0)])
        assert a == b


class TestChunkValidation:
    def test_mismatched_lengths(self):
        with pytest.raises(InvalidArgument):
            WaveformChunk(0.0, 100, [1.0, 2.0], [1.0])

    def test_non_finite(self):
        with pytest.raises(InvalidArgument):
            WaveformChunk(0.0, 100, [1.0, np.nan], [1.0, 1.0])

    def test_empty(self):
        with pytest.raises(InvalidArgument):
            WaveformChunk(0.0, 100, [], [])

    def test_arrays_are_read_only(self):
        chunk = synth_waveform(50, 0.02, 1000, 230, [(1, 1.0, 0.0)])
        with pytest.raises(ValueError):
            chunk.voltage[0] = 1.0


class TestComputeMetrics:
    def test_unity_power_factor(self):
        (m,) = compute_metrics(synth_waveform(50, 1, 16000, 230, [(1, 1.0, 0.0)]))
        assert m.active_power == pytest.approx(230.0, abs=0.05)
        assert m.apparent_power == pytest.approx(230.0, abs=0.05)
        assert m.rms_voltage == pytest.approx(230.0, abs=0.01)

    def test_quadrature_current(self):
        (m,) = compute_metrics(synth_waveform(50, 1, 16000, 230, [(1, 1.0, math.pi / 2)]))
        assert m.active_power == pytest.approx(0.0, abs=0.05)
        assert m.apparent_power == pytest.approx(230.0, abs=0.05)

    def test_non_integer_cycles_within_two_percent(self):
        chunk = synth_waveform(50.5, 10, 16000, 230, [(1, 1.0, 0.0)])
        for m in compute_metrics(chunk):
            assert abs(m.active_power - 230.0) / 230.0 < 0.02

    def test_trailing_partial_window_dropped(self):
        chunk = synth_waveform(50, 2.5, 1000, 230, [(1, 1.0, 0.0)], start_time=100.0)
        metrics = compute_metrics(chunk)
        assert [m.timestamp for m in metrics] == [100.0, 101.0]

    def test_shorter_than_period_gives_nothing(self):
        assert compute_metrics(synth_waveform(50, 0.5, 1000, 230, [])) == []

    def test_bad_period(self):
        with pytest.raises(InvalidArgument):
            compute_metrics(synth_waveform(50, 1, 1000, 230, []), chunk_period=0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1), st.integers(min_value=2, max_value=400))
    def test_matches_brute_force_and_cauchy_schwarz(self, seed, n):
        rng = np.random.default_rng(seed)
        v = rng.normal(0, 200, n)
        i = rng.normal(0, 5, n) + 0.01 * v
        chunk = WaveformChunk(0.0, n, v, i)
        (m,) = compute_metrics(chunk, chunk_period=1.0)
        assert m.active_power == pytest.approx(brute_active(v, i), rel=1e-9, abs=1e-9)
        assert m.apparent_power == pytest.approx(brute_rms(v) * brute_rms(i), rel=1e-9)
        assert abs(m.active_power) <= m.apparent_power * (1 + 1e-6)
        assert m.apparent_power >= 0 and m.rms_voltage >= 0

    @settings(max_examples=40, deadline=None)
    @given(st.floats(min_value=-math.pi, max_value=math.pi))
    def test_integer_cycles_power_factor(self, phi):
        (m,) = compute_metrics(synth_waveform(50, 1, 8000, 230, [(1, 3.0, phi)]))
        expected = m.apparent_power * math.cos(phi)
        assert abs(m.active_power - expected) <= 5e-4 * m.apparent_power


class TestQuantize:
    def test_default_steps(self):
        cfg = AdcConfig()
        assert cfg.current_step == pytest.approx(30 * math.sqrt(2) * 2 / 2**15, rel=1e-15)
        assert cfg.current_step == pytest.approx(2.59e-3, abs=0.005e-3)
        assert cfg.voltage_step == pytest.approx(0.022, rel=0.05)

    def test_emontx_comparison(self):
        cfg = AdcConfig.emontx_2012()
        assert cfg.current_step == 30 / 2**9
        assert cfg.current_step == pytest.approx(0.06, rel=0.05)
        assert cfg.power_resolution(230) == pytest.approx(13.8, rel=0.05)

    def test_samples_land_on_grid(self):
        cfg = AdcConfig()
        chunk = synth_waveform(50, 0.1, 16000, 230, [(1, 4.0, 0.2)])
        q, clipped = quantize(chunk, cfg)
        assert clipped == 0
        assert q.quantized
        codes = q.current / cfg.current_step
        assert np.allclose(codes, np.rint(codes), atol=1e-6)
        assert np.max(np.abs(q.current - chunk.current)) <= cfg.current_step / 2 + 1e-12
        assert np.max(np.abs(q.voltage - chunk.voltage)) <= cfg.voltage_step / 2 + 1e-12

    def test_clipping_is_counted(self):
        cfg = AdcConfig()
        chunk = synth_waveform(50, 0.1, 16000, 230, [(1, 31.0, 0.0)])
        q, clipped = quantize(chunk, cfg)
        assert clipped > 0
        assert np.max(q.current) <= 30 * math.sqrt(2)

    def test_power_error_below_150_mw(self):
        chunk = synth_waveform(50, 1, 16000, 231.7, [(1, 4.3, 0.4), (3, 1.1, 0.9), (5, 0.4, 2.0)])
        q, _ = quantize(chunk, AdcConfig())
        (raw,) = compute_metrics(chunk)
        (quant,) = compute_metrics(q)
        assert abs(raw.active_power - quant.active_power) < 0.150
        assert abs(raw.apparent_power - quant.apparent_power) < 0.150

    def test_bits_out_of_range(self):
        with pytest.raises(InvalidArgument):
            AdcConfig(effective_bits=7)


class TestDownsample:
    def test_band_limited_rms_preserved(self):
        chunk = synth_waveform(50, 1, 44100, 230, [(1, 1.0, 0.0)])
        out = downsample(chunk, 16000)
        assert out.sample_rate == 16000
        assert len(out) == 16000
        assert abs(rms(out.voltage) - rms(chunk.voltage)) / rms(chunk.voltage) < 0.005

    def test_identity_rate(self):
        chunk = synth_waveform(50, 0.1, 16000, 230, [(1, 1.0, 0.0)])
        out = downsample(chunk, 16000)
        assert out == chunk
        assert out.voltage.tobytes() == chunk.voltage.tobytes()

    def test_passband_kept_and_aliases_rejected(self):
        fs = 44100
        n = fs
        t = np.arange(n) / fs
        for freq, aliased in ((5000, 5000), (10000, 6000), (18000, 2000)):
            x = np.sin(2 * np.pi * freq * t)
            out = downsample(WaveformChunk(0.0, fs, x, x), 16000)
            # skip the filter start-up at both edges
            y = out.voltage[400:-400]
            mag = spectral_magnitude(y, 16000, aliased)
            if freq < 0.4 * 16000:
                assert mag == pytest.approx(1.0, abs=0.01)
            else:
                assert 20 * np.log10(max(mag, 1e-12)) < -40

    def test_idempotent_on_band_limited(self):
        chunk = synth_waveform(50, 1, 44100, 230, [(1, 2.0, 0.1), (7, 0.3, 0.5)])
        once = downsample(chunk, 16000)
        twice = downsample(once, 16000)
        assert abs(rms(twice.current) - rms(once.current)) / rms(once.current) < 0.001

    def test_bad_target(self):
        chunk = synth_waveform(50, 0.02, 1000, 230, [])
        with pytest.raises(InvalidArgument):
            downsample(chunk, 0)
        with pytest.raises(InvalidArgument):
            downsample(chunk, 2000)
