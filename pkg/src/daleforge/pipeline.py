"""End-to-end scenario synthesis: household demand through the radio network into a dataset."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from daleforge.calibrate import FULL_SCALE_STEPS, CalibrationConstants
from daleforge.datasets import (
    ChannelInfo,
    ChannelSeries,
    HouseDataset,
    HouseMetadata,
    MainsSeries,
    list_chunks,
    read_waveform_chunk,
    write_waveform_chunk,
)
from daleforge.errors import InvalidArgument
from daleforge.household import HouseConfig, Trajectory, mains_waveform, simulate
from daleforge.powercalc import AdcConfig, compute_metrics
from daleforge.rfnet import SimConfig, SimResult, derive_button_events, make_cctx, make_iam, run_simulation

# 2014-01-01T00:00:00Z; synthetic recordings start here unless told otherwise
DEFAULT_EPOCH = 1388534400
CT_ASSUMED_VOLTS = 230.0
SITE_CHANNEL = 1

METER_INVENTORY = {
    "cctx_whole_house": {"manufacturer": "Current Cost", "model": "EnviR", "sample_period": 6, "measures": "apparent"},
    "cctx": {"manufacturer": "Current Cost", "model": "Tx", "sample_period": 6, "measures": "apparent"},
    "iam": {"manufacturer": "EDF", "model": "EcoManager Plug", "sample_period": 6, "measures": "active"},
    "sound_card": {"sample_rate": 16000, "measures": "active, apparent, rms voltage"},
}


def default_calibration(adc: AdcConfig = AdcConfig()) -> CalibrationConstants:
    """Constants for an ADC whose full-scale peak maps onto the 32-bit sample range."""
    span = adc.span_factor / 2
    return CalibrationConstants(
        volts_per_adc_step=adc.full_scale_voltage_rms * span / FULL_SCALE_STEPS,
        amps_per_adc_step=adc.full_scale_current_rms * span / FULL_SCALE_STEPS,
    )


@dataclass
class Scenario:
    dataset: HouseDataset
    trajectory: Trajectory
    sim: SimResult
    epoch: float
    # appliance index for each logged channel (the site meter is absent)
    channel_appliance: dict[int, int]


def _off_intervals(traj: Trajectory, k: int) -> list[tuple[float, float]]:
    """Intervals during which appliance ``k`` draws nothing."""
    app = traj.house.appliances[k]
    idle = np.array([s.active == 0 for s in app.states])
    times = np.append(traj.change_times[k], traj.end)
    flags = idle[traj.state_index[k]]
    out = []
    for a, b, off in zip(times[:-1], times[1:], flags):
        if not off:
            continue
        if out and math.isclose(out[-1][1], a):
            out[-1] = (out[-1][0], float(b))
        else:
            out.append((float(a), float(b)))
    return out


def _demand_source(traj: Trajectory, channel_appliance: dict[int, int], ct_channels: set[int]):
    house = traj.house

    def demand(channel: int, t: np.ndarray) -> np.ndarray:
        if channel == SITE_CHANNEL:
            return traj.mains_apparent(t) * CT_ASSUMED_VOLTS / house.voltage(t)
        k = channel_appliance[channel]
        if channel in ct_channels:
            return traj.appliance_apparent(k, t) * CT_ASSUMED_VOLTS / house.voltage(t)
        return traj.appliance_active(k, t)

    return demand


def build_scenario(
    cfg: HouseConfig,
    duration: float,
    seed: int,
    house_number: int = 1,
    epoch: float = DEFAULT_EPOCH,
    sim_overrides: dict | None = None,
    with_mains: bool = True,
) -> Scenario:
    """Simulate ``duration`` seconds of a house and return it as an on-disk-ready dataset.

    Channel 1 is the whole-house CC-TX clamp. Metered appliances follow in
    catalogue order, each on its IAM or CC-TX. The 1 Hz mains record is the
    exact per-second demand, which is what the waveform meter would report.
    """
    if duration < 2:
        raise InvalidArgument("duration must be at least two seconds")
    seq = np.random.SeedSequence(seed)
    house_seed, node_seed, sim_seed = seq.spawn(3)
    house_rng = np.random.default_rng(house_seed)
    node_rng = np.random.default_rng(node_seed)
    house = cfg.build(house_rng)
    traj = simulate(house, float(duration), house_rng)

    channel_appliance: dict[int, int] = {}
    iams, cctxs = [], [make_cctx(SITE_CHANNEL, node_rng, whole_house=True)]
    ct_channels: set[int] = set()
    infos = [ChannelInfo(SITE_CHANNEL, "aggregate", "cctx_whole_house")]
    outages: dict[int, list[tuple[float, float]]] = {}
    channel = SITE_CHANNEL
    for k, app in enumerate(house.appliances):
        if app.meter is None:
            continue
        channel += 1
        channel_appliance[channel] = k
        if app.meter == "iam":
            gaps = _off_intervals(traj, k) if app.unplug_when_off else []
            outages[channel] = gaps
            iams.append(make_iam(channel, node_rng, outages=gaps))
        else:
            ct_channels.add(channel)
            cctxs.append(make_cctx(channel, node_rng))
        infos.append(ChannelInfo(channel, app.name, "iam" if app.meter == "iam" else "cctx", app.room, app.on_power_threshold))

    sim_cfg = SimConfig(duration=float(duration), rng_seed=int(sim_seed.generate_state(1)[0]), start_time=float(epoch))
    if sim_overrides:
        sim_cfg = replace(sim_cfg, **sim_overrides)
    result = run_simulation(sim_cfg, iams, cctxs, _demand_source(traj, channel_appliance, ct_channels))

    channels = {}
    for info in infos:
        ts, values = result.channel_readings(info.channel)
        unit = "watts" if info.meter == "iam" else "volt-amperes"
        channels[info.channel] = ChannelSeries(info.channel, ts, values, unit)

    buttons = {}
    for ch, gaps in outages.items():
        timeline = []
        for a, b in gaps:
            timeline += [(epoch + a, "power_lost"), (epoch + b, "power_restored")]
        events = derive_button_events(timeline, initial_state=1)
        if events:
            buttons[ch] = events

    mains = None
    if with_mains:
        t = np.arange(int(duration), dtype=np.float64)
        mains = MainsSeries(t + epoch, traj.mains_active(t), traj.mains_apparent(t), house.voltage(t))

    meta_extra = dict(cfg.metadata)
    meta = HouseMetadata(
        house=house_number,
        channels=tuple(infos),
        building_type=meta_extra.get("building_type"),
        construction_year=meta_extra.get("construction_year"),
        heating=meta_extra.get("heating"),
        occupants=meta_extra.get("occupants"),
        meters={k: v for k, v in METER_INVENTORY.items() if k == "sound_card" and with_mains or k != "sound_card"},
    )
    dataset = HouseDataset(
        house=house_number,
        channels=channels,
        labels=meta.labels(),
        button_events=buttons,
        mains=mains,
        calibration=default_calibration() if with_mains else None,
        metadata=meta,
    )
    return Scenario(dataset, traj, result, float(epoch), channel_appliance)


# --- waveform capture and metering ---------------------------------------------------------


def write_waveforms(
    traj: Trajectory,
    directory: str | Path,
    seconds: int,
    calib: CalibrationConstants | None = None,
    chunk_seconds: int = 3600,
    epoch: float = DEFAULT_EPOCH,
    sample_rate: int = 16000,
    start: float = 0.0,
) -> list[Path]:
    """Render ``seconds`` of mains waveform from the trajectory into chunk files."""
    calib = calib or default_calibration()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    done = 0
    while done < seconds:
        n = min(chunk_seconds, seconds - done)
        chunk = mains_waveform(traj, start + done, n, sample_rate=sample_rate, epoch=epoch)
        paths.append(write_waveform_chunk(chunk, calib, directory))
        done += n
    return paths


def meter_directory(directory: str | Path, calib: CalibrationConstants, chunk_period: float = 1.0) -> MainsSeries:
    """Compute 1 Hz (or ``chunk_period``) mains rows from every chunk file in ``directory``."""
    metrics = []
    for path in list_chunks(directory):
        metrics.extend(compute_metrics(read_waveform_chunk(path, calib), chunk_period))
    if not metrics:
        raise InvalidArgument(f"no waveform chunks in {directory}")
    return MainsSeries.from_metrics(metrics)
