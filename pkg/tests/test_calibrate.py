import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from daleforge.calibrate import (
    CalibrationConstants,
    ReferenceSample,
    estimate_constants,
    estimate_phase,
    fit_residual,
)
from daleforge.errors import DegenerateInput, InvalidArgument
from daleforge.powercalc import synth_waveform


def resistive_chunk(shift_deg, freq=50.0, seconds=1.0, rate=16000):
    return synth_waveform(freq, seconds, rate, 230, [(1, 10.0, math.radians(shift_deg))])


def test_single_sample_direct_ratio():
    c = estimate_constants([ReferenceSample(0.5, 0.25, 230.0, 5.0, 1.0)])
    assert c.volts_per_adc_step == 460.0
    assert c.amps_per_adc_step == 20.0


def test_noisy_samples_recover_ground_truth():
    rng = np.random.default_rng(7)
    samples = []
    for adc in (0.3, 0.5, 0.55):
        samples.append(
            ReferenceSample(adc, adc / 2, 460 * adc * (1 + rng.uniform(-0.01, 0.01)), 20 * adc / 2 * (1 + rng.uniform(-0.01, 0.01)))
        )
    c = estimate_constants(samples)
    assert c.volts_per_adc_step == pytest.approx(460, rel=0.01)
    assert c.amps_per_adc_step == pytest.approx(20, rel=0.01)


def test_fit_is_least_squares_minimiser():
    samples = [ReferenceSample(a, a, r, r) for a, r in ((1.0, 2.1), (2.0, 3.9), (3.0, 6.3))]
    c = estimate_constants(samples).volts_per_adc_step

    def sse(k):
        return sum((s.ref_volts_rms - k * s.adc_v_rms) ** 2 for s in samples)

    assert sse(c) <= sse(c + 1e-6) and sse(c) <= sse(c - 1e-6)


def test_zero_adc_current_is_degenerate():
    with pytest.raises(DegenerateInput):
        estimate_constants([ReferenceSample(0.5, 0.0, 230, 0.0)])


def test_empty_list():
    with pytest.raises(InvalidArgument):
        estimate_constants([])


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.tuples(st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.floats(100, 260), st.floats(0.1, 30)), min_size=1, max_size=6),
    st.floats(0.01, 100),
)
def test_scaling_adc_scales_constants_inversely(rows, k):
    base = [ReferenceSample(av, ai, rv, ri) for av, ai, rv, ri in rows]
    scaled = [ReferenceSample(av * k, ai * k, rv, ri) for av, ai, rv, ri in rows]
    a, b = estimate_constants(base), estimate_constants(scaled)
    assert b.volts_per_adc_step == pytest.approx(a.volts_per_adc_step / k, rel=1e-12)
    assert b.amps_per_adc_step == pytest.approx(a.amps_per_adc_step / k, rel=1e-12)


def test_constants_reproduce_reference_within_residual():
    raw = synth_waveform(50, 1, 8000, 230 / 460, [(1, 10 / 20, 0.0)])
    ref = ReferenceSample.from_chunk(raw, 231.0, 10.1)
    other = ReferenceSample(0.4, 0.3, 0.4 * 462, 0.3 * 20.1)
    consts = estimate_constants([ref, other])
    dv, di = fit_residual([ref, other], consts)
    assert abs(consts.volts_per_adc_step * ref.adc_v_rms - ref.ref_volts_rms) <= dv + 1e-12
    assert abs(consts.amps_per_adc_step * ref.adc_i_rms - ref.ref_amps_rms) <= di + 1e-12


def test_constants_validation():
    with pytest.raises(InvalidArgument):
        CalibrationConstants(0.0, 1.0)
    with pytest.raises(InvalidArgument):
        CalibrationConstants(1.0, 1.0, math.pi / 2)


class TestPhase:
    def test_low_power_factor_skipped(self):
        ref = ReferenceSample(1, 1, 230, 10, 0.95)
        assert estimate_phase(resistive_chunk(0), ref) is None

    def test_gate_is_strict(self):
        assert estimate_phase(resistive_chunk(0), ReferenceSample(1, 1, 230, 10, 0.97)) is None

    def test_injected_two_degree_shift(self):
        est = estimate_phase(resistive_chunk(2.0), ReferenceSample(1, 1, 230, 10, 1.0))
        assert math.degrees(est) == pytest.approx(2.0, abs=0.1)

    def test_zero_shift(self):
        est = estimate_phase(resistive_chunk(0.0), ReferenceSample(1, 1, 230, 10, 1.0))
        assert math.degrees(est) == pytest.approx(0.0, abs=0.05)

    @pytest.mark.parametrize("shift", [-3.3, -1.0, 0.7, 4.2])
    def test_matches_closed_form(self, shift):
        # oracle: analytic argmax of a*cos(t) + b*sin(t)
        from daleforge.calibrate import _correlation_curve

        chunk = resistive_chunk(shift)
        a, b = _correlation_curve(chunk)
        closed = -math.atan2(b, a)
        est = estimate_phase(chunk, ReferenceSample(1, 1, 230, 10, 1.0))
        assert est == pytest.approx(closed, abs=math.radians(0.001))
        assert math.degrees(est) == pytest.approx(shift, abs=0.05)

    def test_non_integer_cycles(self):
        chunk = synth_waveform(50.3, 1, 16000, 230, [(1, 10.0, math.radians(2.0))])
        est = estimate_phase(chunk, ReferenceSample(1, 1, 230, 10, 0.99), fundamental_hz=50.3)
        assert math.degrees(est) == pytest.approx(2.0, abs=0.1)

    def test_too_short(self):
        chunk = synth_waveform(50, 0.01, 16000, 230, [(1, 1.0, 0.0)])
        with pytest.raises(InvalidArgument):
            estimate_phase(chunk, ReferenceSample(1, 1, 230, 10, 1.0))
