"""Ground-truth appliance demand and whole-house mains signal.

Appliances are semi-Markov state machines with exponential dwell times. A house
adds the self-draw of every plug-in monitor and a constant vampire floor, so

    mains(t) = sum of appliance demand(t) + iam_count * 0.9 W + vampire_power

Appliances with ``meter=None`` contribute to mains but are invisible to every
submeter.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from daleforge.errors import InvalidArgument
from daleforge.powercalc import SQRT2, WaveformChunk

IAM_SELF_ACTIVE = 0.9
IAM_SELF_APPARENT = 2.4
DEFAULT_ON_POWER_THRESHOLD = 5.0
METER_KINDS = ("iam", "ct", None)


@dataclass(frozen=True)
class ApplianceState:
    name: str
    active: float
    apparent: float
    mean_dwell: float
    # successor state name -> probability
    next: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.active < 0 or self.apparent < 0:
            raise InvalidArgument(f"state {self.name!r}: powers must be non-negative")
        if self.apparent + 1e-9 < self.active:
            raise InvalidArgument(f"state {self.name!r}: apparent power below active power")
        if not self.mean_dwell > 0:
            raise InvalidArgument(f"state {self.name!r}: dwell time must be positive")


@dataclass(frozen=True)
class ApplianceModel:
    name: str
    states: tuple[ApplianceState, ...]
    initial: str | None = None
    on_power_threshold: float = DEFAULT_ON_POWER_THRESHOLD
    meter: str | None = "iam"
    room: str | None = None
    # IAM is unplugged whenever the appliance sits in its first state
    unplug_when_off: bool = False

    def __post_init__(self):
        if not self.states:
            raise InvalidArgument(f"appliance {self.name!r} has no states")
        names = [s.name for s in self.states]
        if len(set(names)) != len(names):
            raise InvalidArgument(f"appliance {self.name!r} has duplicate state names")
        if self.meter not in METER_KINDS:
            raise InvalidArgument(f"appliance {self.name!r}: unknown meter kind {self.meter!r}")
        if self.on_power_threshold <= 0:
            raise InvalidArgument("on_power_threshold must be positive")
        for s in self.states:
            total = sum(p for _, p in s.next)
            if s.next and abs(total - 1.0) > 1e-9:
                raise InvalidArgument(f"{self.name}.{s.name}: transition probabilities sum to {total}")
            for target, p in s.next:
                if target not in names or p < 0:
                    raise InvalidArgument(f"{self.name}.{s.name}: bad transition to {target!r}")
        if self.initial is not None and self.initial not in names:
            raise InvalidArgument(f"appliance {self.name!r}: unknown initial state {self.initial!r}")

    def index(self, state_name: str) -> int:
        return [s.name for s in self.states].index(state_name)

    def transition_matrix(self) -> np.ndarray:
        n = len(self.states)
        P = np.zeros((n, n))
        for i, s in enumerate(self.states):
            if not s.next:
                P[i, i] = 1.0
            for target, p in s.next:
                P[i, self.index(target)] += p
        return P

    def stationary_fractions(self) -> np.ndarray:
        """Long-run fraction of time in each state (embedded chain weighted by mean dwell)."""
        P = self.transition_matrix()
        n = P.shape[0]
        A = np.vstack([P.T - np.eye(n), np.ones(n)])
        b = np.zeros(n + 1)
        b[-1] = 1.0
        pi = np.linalg.lstsq(A, b, rcond=None)[0]
        dwell = np.array([s.mean_dwell for s in self.states])
        w = np.clip(pi, 0, None) * dwell
        return w / w.sum()

    def mean_active(self) -> float:
        return float(self.stationary_fractions() @ np.array([s.active for s in self.states]))


@dataclass(frozen=True)
class House:
    """Value object: appliance catalogue plus the current state of every appliance."""

    appliances: tuple[ApplianceModel, ...]
    iam_count: int = 0
    vampire_power: float = 0.0
    nominal_voltage: float = 232.0
    voltage_swing: float = 0.015
    clock: float = 0.0
    # per appliance: (state index, seconds left in that state)
    states: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if self.iam_count < 0 or self.vampire_power < 0:
            raise InvalidArgument("iam_count and vampire_power must be non-negative")
        names = [a.name for a in self.appliances]
        if len(set(names)) != len(names):
            raise InvalidArgument("appliance names must be unique")
        if self.states and len(self.states) != len(self.appliances):
            raise InvalidArgument("one state entry per appliance required")

    @classmethod
    def create(cls, appliances: Sequence[ApplianceModel], rng: np.random.Generator, **kwargs) -> "House":
        """Start every appliance in a state drawn from its stationary distribution."""
        states = []
        for app in appliances:
            if app.initial is not None:
                k = app.index(app.initial)
            else:
                k = int(rng.choice(len(app.states), p=app.stationary_fractions()))
            states.append((k, float(rng.exponential(app.states[k].mean_dwell))))
        return cls(tuple(appliances), states=tuple(states), **kwargs)

    @property
    def standing_load(self) -> float:
        return self.iam_count * IAM_SELF_ACTIVE + self.vampire_power

    @property
    def standing_apparent(self) -> float:
        return self.iam_count * IAM_SELF_APPARENT + self.vampire_power

    def metered(self, kind: str | None = "any") -> list[int]:
        if kind == "any":
            return [k for k, a in enumerate(self.appliances) if a.meter is not None]
        return [k for k, a in enumerate(self.appliances) if a.meter == kind]

    def voltage(self, t):
        """Mains RMS voltage; a slow daily swing around the nominal value."""
        t = np.asarray(t, dtype=float)
        return self.nominal_voltage * (1.0 + self.voltage_swing * np.sin(2 * np.pi * t / 86400.0))


def _next_state(app: ApplianceModel, k: int, rng: np.random.Generator) -> int:
    successors = app.states[k].next
    if not successors:
        return k
    targets = [app.index(name) for name, _ in successors]
    probs = [p for _, p in successors]
    return targets[int(rng.choice(len(targets), p=probs))] if len(targets) > 1 else targets[0]


def advance(house: House, dt: float, rng: np.random.Generator) -> House:
    if not dt > 0:
        raise InvalidArgument(f"dt must be positive, got {dt}")
    if not house.states:
        raise InvalidArgument("house has no state; build it with House.create")
    new_states = []
    for app, (k, left) in zip(house.appliances, house.states):
        left -= dt
        while left <= 0:
            k = _next_state(app, k, rng)
            left += rng.exponential(app.states[k].mean_dwell)
        new_states.append((k, float(left)))
    return replace(house, clock=house.clock + dt, states=tuple(new_states))


@dataclass(frozen=True)
class DemandSample:
    appliance_active: tuple[float, ...]
    mains_active: float
    mains_apparent: float


def sample_demand(house: House, t: float | None = None) -> DemandSample:
    """Demand of ``house`` in its current state.

    ``t`` may be any time before the next scheduled transition; demand is held
    constant until then.
    """
    if house.states:
        if t is not None:
            horizon = house.clock + min(left for _, left in house.states)
            if not house.clock <= t < horizon:
                raise InvalidArgument(f"t={t} outside [{house.clock}, {horizon}); advance the house first")
        active = tuple(app.states[k].active for app, (k, _) in zip(house.appliances, house.states))
        apparent = sum(app.states[k].apparent for app, (k, _) in zip(house.appliances, house.states))
    else:
        active, apparent = (), 0.0
    return DemandSample(active, sum(active) + house.standing_load, apparent + house.standing_apparent)


@dataclass(eq=False)
class Trajectory:
    """Piecewise-constant state history of every appliance over ``[start, end)``."""

    house: House
    start: float
    end: float
    change_times: list  # per appliance: array of times at which the state changed (first = start)
    state_index: list  # per appliance: state entered at each change time

    def _states_at(self, k: int, t: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self.change_times[k], t, side="right") - 1
        return self.state_index[k][np.clip(pos, 0, None)]

    def appliance_active(self, k: int, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        table = np.array([s.active for s in self.house.appliances[k].states])
        return table[self._states_at(k, t)]

    def appliance_apparent(self, k: int, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        table = np.array([s.apparent for s in self.house.appliances[k].states])
        return table[self._states_at(k, t)]

    def appliance_state(self, k: int, t) -> np.ndarray:
        return self._states_at(k, np.asarray(t, dtype=float))

    def mains_active(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        total = np.full(t.shape, self.house.standing_load)
        for k in range(len(self.house.appliances)):
            total = total + self.appliance_active(k, t)
        return total

    def mains_apparent(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        total = np.full(t.shape, self.house.standing_apparent)
        for k in range(len(self.house.appliances)):
            total = total + self.appliance_apparent(k, t)
        return total

    def sample(self, t) -> DemandSample:
        t = float(t)
        active = tuple(float(self.appliance_active(k, t)) for k in range(len(self.house.appliances)))
        return DemandSample(active, float(self.mains_active(t)), float(self.mains_apparent(t)))

    def energy_wh(self, k: int) -> float:
        """Exact energy of appliance ``k`` over the trajectory, in watt-hours."""
        times = np.append(self.change_times[k], self.end)
        table = np.array([s.active for s in self.house.appliances[k].states])
        return float(np.sum(table[self.state_index[k]] * np.diff(times)) / 3600.0)

    def time_in_state(self, k: int) -> np.ndarray:
        times = np.append(self.change_times[k], self.end)
        return np.bincount(self.state_index[k], weights=np.diff(times), minlength=len(self.house.appliances[k].states))


def simulate(house: House, horizon: float, rng: np.random.Generator) -> Trajectory:
    """Run every appliance forward for ``horizon`` seconds from ``house.clock``."""
    if not horizon > 0:
        raise InvalidArgument("horizon must be positive")
    if not house.states:
        raise InvalidArgument("house has no state; build it with House.create")
    start, end = house.clock, house.clock + horizon
    change_times, state_index = [], []
    for app, (k, left) in zip(house.appliances, house.states):
        times, idx = [start], [k]
        t = start + left
        while t < end:
            k = _next_state(app, k, rng)
            times.append(t)
            idx.append(k)
            t += rng.exponential(app.states[k].mean_dwell)
        change_times.append(np.array(times))
        state_index.append(np.array(idx, dtype=np.int64))
    return Trajectory(house, start, end, change_times, state_index)


def mains_waveform(
    traj: Trajectory,
    start: float,
    seconds: int,
    sample_rate: int = 16000,
    fundamental_hz: float = 50.0,
    harmonics: Sequence[tuple[int, float]] = ((3, 0.12), (5, 0.06)),
    epoch: float = 0.0,
) -> WaveformChunk:
    """Voltage/current waveform whose per-second P and S match the trajectory's mains demand.

    Each one-second block holds the demand at the start of that second. The
    current's fundamental carries all the active power; harmonic currents
    (given as fractions of the fundamental RMS) only add apparent power, and
    the fundamental is scaled down so the total RMS current still gives S.
    """
    if seconds < 1:
        raise InvalidArgument("need at least one second of waveform")
    t_sec = start + np.arange(seconds)
    P = traj.mains_active(t_sec)
    S = np.maximum(traj.mains_apparent(t_sec), P)
    V = traj.house.voltage(t_sec)
    i_rms = S / V
    distortion = math.sqrt(sum(f * f for _, f in harmonics))
    fund_rms = i_rms / math.sqrt(1.0 + distortion**2)
    # the fundamental must be large enough to carry all the active power
    fund_rms = np.maximum(fund_rms, P / V)
    harm_rms = np.sqrt(np.maximum(i_rms**2 - fund_rms**2, 0.0))
    cos_phi = np.divide(P, V * fund_rms, out=np.ones_like(P), where=fund_rms > 0)
    phi = np.arccos(np.clip(cos_phi, -1.0, 1.0))

    n = seconds * sample_rate
    t = np.arange(n) / sample_rate
    block = np.repeat(np.arange(seconds), sample_rate)
    wt = 2 * np.pi * fundamental_hz * (t + start)
    voltage = V[block] * SQRT2 * np.sin(wt)
    current = fund_rms[block] * SQRT2 * np.sin(wt - phi[block])
    for h, frac in harmonics:
        if distortion > 0:
            current += (frac / distortion) * harm_rms[block] * SQRT2 * np.sin(h * wt)
    return WaveformChunk(epoch + start, sample_rate, voltage, current)


# --- configuration files ---------------------------------------------------------------


def appliance_from_dict(d: Mapping) -> ApplianceModel:
    try:
        states = tuple(
            ApplianceState(
                str(s["name"]),
                float(s["active"]),
                float(s.get("apparent", s["active"])),
                float(s["mean_dwell"]),
                tuple((str(k), float(v)) for k, v in (s.get("next") or {}).items()),
            )
            for s in d["states"]
        )
        return ApplianceModel(
            name=str(d["name"]),
            states=states,
            initial=d.get("initial"),
            on_power_threshold=float(d.get("on_power_threshold", DEFAULT_ON_POWER_THRESHOLD)),
            meter=d.get("meter", "iam"),
            room=d.get("room"),
            unplug_when_off=bool(d.get("unplug_when_off", False)),
        )
    except (KeyError, TypeError) as exc:
        raise InvalidArgument(f"bad appliance entry {d.get('name', '?')!r}: {exc}") from exc


def appliance_to_dict(app: ApplianceModel) -> dict:
    d = {"name": app.name, "meter": app.meter}
    if app.room is not None:
        d["room"] = app.room
    if app.initial is not None:
        d["initial"] = app.initial
    if app.on_power_threshold != DEFAULT_ON_POWER_THRESHOLD:
        d["on_power_threshold"] = app.on_power_threshold
    if app.unplug_when_off:
        d["unplug_when_off"] = True
    d["states"] = [
        {
            "name": s.name,
            "active": s.active,
            "apparent": s.apparent,
            "mean_dwell": s.mean_dwell,
            **({"next": dict(s.next)} if s.next else {}),
        }
        for s in app.states
    ]
    return d


@dataclass(frozen=True)
class HouseConfig:
    """Static description of a house, before any random state is drawn."""

    appliances: tuple[ApplianceModel, ...]
    iam_count: int | None = None
    vampire_power: float = 0.0
    nominal_voltage: float = 232.0
    voltage_swing: float = 0.015
    metadata: dict = field(default_factory=dict)

    def build(self, rng: np.random.Generator) -> House:
        iams = self.iam_count if self.iam_count is not None else sum(a.meter == "iam" for a in self.appliances)
        return House.create(
            self.appliances,
            rng,
            iam_count=iams,
            vampire_power=self.vampire_power,
            nominal_voltage=self.nominal_voltage,
            voltage_swing=self.voltage_swing,
        )


def house_config_from_dict(d: Mapping) -> HouseConfig:
    if not isinstance(d, Mapping) or "appliances" not in d:
        raise InvalidArgument("house configuration needs an 'appliances' list")
    return HouseConfig(
        appliances=tuple(appliance_from_dict(a) for a in d["appliances"]),
        iam_count=d.get("iam_count"),
        vampire_power=float(d.get("vampire_power", 0.0)),
        nominal_voltage=float(d.get("nominal_voltage", 232.0)),
        voltage_swing=float(d.get("voltage_swing", 0.015)),
        metadata=dict(d.get("metadata") or {}),
    )


def house_config_to_dict(cfg: HouseConfig) -> dict:
    d = {
        "vampire_power": cfg.vampire_power,
        "nominal_voltage": cfg.nominal_voltage,
        "voltage_swing": cfg.voltage_swing,
    }
    if cfg.iam_count is not None:
        d["iam_count"] = cfg.iam_count
    if cfg.metadata:
        d["metadata"] = copy.deepcopy(cfg.metadata)
    d["appliances"] = [appliance_to_dict(a) for a in cfg.appliances]
    return d


def load_house_config(path: str | Path) -> HouseConfig:
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise InvalidArgument(f"{path}: {exc}") from exc
    return house_config_from_dict(data)


def dump_house_config(cfg: HouseConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(house_config_to_dict(cfg), fh, sort_keys=False, indent=2)
