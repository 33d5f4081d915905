"""DG, PV and BESS models: action projection, SOC dynamics and operating cost."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, NamedTuple

import numpy as np


class FleetError(ValueError):
    pass


@dataclass(frozen=True)
class DgSpec:
    bus: int
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    ramp_down: float  # MW per step
    ramp_up: float
    cost: float = 0.5  # currency / MWh

    def __post_init__(self):
        if self.p_min > self.p_max or self.q_min > self.q_max:
            raise FleetError(f"DG at bus {self.bus}: min limit above max limit")
        if self.ramp_down < 0 or self.ramp_up < 0:
            raise FleetError(f"DG at bus {self.bus}: negative ramp rate")


@dataclass(frozen=True)
class PvSpec:
    bus: int
    s_max: float  # MVA

    def __post_init__(self):
        if self.s_max <= 0:
            raise FleetError(f"PV at bus {self.bus}: capacity must be positive")


@dataclass(frozen=True)
class BessSpec:
    bus: int
    p_min: float  # MW, negative = charging
    p_max: float
    e_cap: float  # MWh
    soc_min: float  # MWh
    soc_max: float
    eta: float = 0.95
    cost_ch: float = 0.05
    cost_dis: float = 0.05
    soc_init: float | None = None

    def __post_init__(self):
        if not self.soc_min < self.soc_max <= self.e_cap:
            raise FleetError(f"BESS at bus {self.bus}: need soc_min < soc_max <= e_cap")
        if not 0 < self.eta <= 1:
            raise FleetError(f"BESS at bus {self.bus}: eta must lie in (0, 1]")
        if not self.p_min < 0 < self.p_max:
            raise FleetError(f"BESS at bus {self.bus}: need p_min < 0 < p_max")

    @property
    def initial_soc(self) -> float:
        if self.soc_init is None:
            return 0.5 * (self.soc_min + self.soc_max)
        return self.soc_init


@dataclass(frozen=True)
class DeviceFleet:
    dgs: tuple[DgSpec, ...] = ()
    pvs: tuple[PvSpec, ...] = ()
    besss: tuple[BessSpec, ...] = ()

    @property
    def action_dim(self) -> int:
        return 2 * len(self.dgs) + len(self.besss) + len(self.pvs)

    def check_buses(self, n_bus: int, slack: int) -> None:
        for dev in (*self.dgs, *self.pvs, *self.besss):
            if not 0 <= dev.bus < n_bus or dev.bus == slack:
                raise FleetError(f"device bus {dev.bus} is not a load bus of the case")

    def summary(self) -> str:
        lines = []
        for d in self.dgs:
            lines.append(
                f"- DG at bus {d.bus + 1}: P in [{d.p_min:g}, {d.p_max:g}] MW, "
                f"Q in [{d.q_min:g}, {d.q_max:g}] MVAr, ramp -{d.ramp_down:g}/+{d.ramp_up:g} MW per step, "
                f"cost {d.cost:g} per MWh"
            )
        for p in self.pvs:
            lines.append(f"- PV at bus {p.bus + 1}: installed capacity {p.s_max:g} MVA")
        for b in self.besss:
            lines.append(
                f"- BESS at bus {b.bus + 1}: P in [{b.p_min:g}, {b.p_max:g}] MW, "
                f"SOC in [{b.soc_min:g}, {b.soc_max:g}] MWh, efficiency {b.eta:g}"
            )
        return "\n".join(lines)


def fleet_from_dict(data: Mapping[str, Any]) -> DeviceFleet:
    try:
        dgs = tuple(DgSpec(**d) for d in data.get("dgs", []))
        pvs = tuple(PvSpec(**p) for p in data.get("pvs", []))
        besss = tuple(BessSpec(**b) for b in data.get("besss", []))
    except TypeError as exc:
        raise FleetError(f"malformed fleet entry: {exc}") from exc
    return DeviceFleet(dgs, pvs, besss)


def fleet_to_dict(fleet: DeviceFleet) -> dict[str, Any]:
    from dataclasses import asdict

    return {
        "dgs": [asdict(d) for d in fleet.dgs],
        "pvs": [asdict(p) for p in fleet.pvs],
        "besss": [asdict(b) for b in fleet.besss],
    }


def load_fleet(path: str | Path) -> DeviceFleet:
    """Load a fleet JSON file; bundled names (``ieee33``, ``ieee69``, ``tiny4``) also resolve."""
    p = Path(path)
    if not p.exists():
        bundled = Path(str(resources.files("rl2adn") / "data" / "fleets" / f"{p.stem}.json"))
        if p.parent == Path(".") and bundled.exists():
            p = bundled
        else:
            raise FleetError(f"fleet file not found: {path}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FleetError(f"{p}: invalid JSON ({exc})") from exc
    return fleet_from_dict(data)


@dataclass
class DeviceSetpoints:
    p_dg: np.ndarray
    q_dg: np.ndarray
    p_bess: np.ndarray
    q_pv: np.ndarray

    @classmethod
    def zeros(cls, fleet: DeviceFleet) -> "DeviceSetpoints":
        return cls(
            np.zeros(len(fleet.dgs)),
            np.zeros(len(fleet.dgs)),
            np.zeros(len(fleet.besss)),
            np.zeros(len(fleet.pvs)),
        )

    def copy(self) -> "DeviceSetpoints":
        return DeviceSetpoints(self.p_dg.copy(), self.q_dg.copy(), self.p_bess.copy(), self.q_pv.copy())


@dataclass(frozen=True)
class PriceSchedule:
    buy: np.ndarray  # currency / MWh, per step
    sell: np.ndarray

    def __post_init__(self):
        if self.buy.shape != self.sell.shape:
            raise ValueError("buy and sell schedules differ in length")
        if np.any(self.sell > self.buy):
            raise ValueError("sell price exceeds buy price")


def time_of_use_prices(
    horizon: int,
    dt: float,
    off_peak: float = 0.2,
    shoulder: float = 0.3,
    peak: float = 0.45,
    sell_ratio: float = 0.6,
) -> PriceSchedule:
    hours = (np.arange(horizon) * dt) % 24.0
    buy = np.full(horizon, shoulder)
    buy[(hours < 7.0) | (hours >= 23.0)] = off_peak
    buy[((hours >= 10.0) & (hours < 12.0)) | ((hours >= 17.0) & (hours < 21.0))] = peak
    return PriceSchedule(buy=buy, sell=sell_ratio * buy)


@dataclass(frozen=True)
class FeasibleBox:
    """Per-action-component interval the raw [-1, 1] action is mapped onto."""

    lo: np.ndarray
    hi: np.ndarray


def _bess_power_window(b: BessSpec, soc: float, dt: float) -> tuple[float, float]:
    # Largest charge/discharge that keeps the SOC update inside [soc_min, soc_max].
    dis = max(0.0, (soc - b.soc_min) * b.eta / dt)
    ch = max(0.0, (b.soc_max - soc) / (b.eta * dt))
    return max(b.p_min, -ch), min(b.p_max, dis)


def feasible_box(
    fleet: DeviceFleet,
    prev: DeviceSetpoints,
    soc: np.ndarray,
    pv_avail: np.ndarray,
    dt: float,
) -> tuple[FeasibleBox, FeasibleBox]:
    """Static affine-map box and the dynamic clamp box, in action order.

    Action order is ``[P_dg..., P_bess..., Q_dg..., Q_pv...]``.
    """
    map_lo, map_hi, clip_lo, clip_hi = [], [], [], []
    for k, d in enumerate(fleet.dgs):
        map_lo.append(d.p_min)
        map_hi.append(d.p_max)
        clip_lo.append(max(d.p_min, prev.p_dg[k] - d.ramp_down))
        clip_hi.append(min(d.p_max, prev.p_dg[k] + d.ramp_up))
    for k, b in enumerate(fleet.besss):
        lo, hi = _bess_power_window(b, float(soc[k]), dt)
        map_lo.append(b.p_min)
        map_hi.append(b.p_max)
        clip_lo.append(lo)
        clip_hi.append(hi)
    for d in fleet.dgs:
        map_lo.append(d.q_min)
        map_hi.append(d.q_max)
        clip_lo.append(d.q_min)
        clip_hi.append(d.q_max)
    for k, p in enumerate(fleet.pvs):
        q = float(np.sqrt(max(p.s_max**2 - float(pv_avail[k]) ** 2, 0.0)))
        map_lo.append(-q)
        map_hi.append(q)
        clip_lo.append(-q)
        clip_hi.append(q)
    mk = lambda a: np.array(a, dtype=float)  # noqa: E731
    return FeasibleBox(mk(map_lo), mk(map_hi)), FeasibleBox(mk(clip_lo), mk(clip_hi))


def project_setpoints(
    raw: np.ndarray,
    fleet: DeviceFleet,
    prev: DeviceSetpoints,
    soc: np.ndarray,
    pv_avail: np.ndarray,
    dt: float = 0.25,
) -> DeviceSetpoints:
    """Map a raw action in ``[-1, 1]^d`` onto feasible device setpoints.

    Each component is mapped affinely onto its equipment interval, then the DG
    active power is clamped to its ramp window and the BESS power to the range
    that keeps the next SOC inside its limits.
    """
    raw = np.asarray(raw, dtype=float).ravel()
    if raw.size != fleet.action_dim:
        raise ValueError(f"action has {raw.size} components, fleet expects {fleet.action_dim}")
    box, clip = feasible_box(fleet, prev, soc, pv_avail, dt)
    u = np.clip(raw, -1.0, 1.0)
    x = box.lo + 0.5 * (u + 1.0) * (box.hi - box.lo)
    x = np.minimum(np.maximum(x, clip.lo), clip.hi)
    nd, nb = len(fleet.dgs), len(fleet.besss)
    return DeviceSetpoints(
        p_dg=x[:nd].copy(),
        p_bess=x[nd : nd + nb].copy(),
        q_dg=x[nd + nb : 2 * nd + nb].copy(),
        q_pv=x[2 * nd + nb :].copy(),
    )


def setpoints_to_raw(
    sp: DeviceSetpoints,
    fleet: DeviceFleet,
    prev: DeviceSetpoints,
    soc: np.ndarray,
    pv_avail: np.ndarray,
    dt: float = 0.25,
) -> np.ndarray:
    """Inverse of the affine part of :func:`project_setpoints`."""
    box, _ = feasible_box(fleet, prev, soc, pv_avail, dt)
    x = np.concatenate([sp.p_dg, sp.p_bess, sp.q_dg, sp.q_pv])
    span = box.hi - box.lo
    with np.errstate(invalid="ignore", divide="ignore"):
        raw = np.where(span > 0, 2.0 * (x - box.lo) / span - 1.0, 0.0)
    return np.clip(raw, -1.0, 1.0)


class SocStep(NamedTuple):
    soc: float
    clamped: bool


def step_soc(
    soc: float,
    p_bess: float,
    dt: float,
    eta: float,
    soc_min: float = -np.inf,
    soc_max: float = np.inf,
) -> SocStep:
    """Advance one BESS state of charge (MWh); positive power discharges."""
    if p_bess >= 0:
        nxt = soc - p_bess * dt / eta
    else:
        nxt = soc - eta * p_bess * dt
    clamped = nxt < soc_min or nxt > soc_max
    if clamped:
        nxt = min(max(nxt, soc_min), soc_max)
    return SocStep(nxt, clamped)


@dataclass(frozen=True)
class CostTerms:
    dg: float
    bess: float
    grid: float

    @property
    def total(self) -> float:
        return self.dg + self.bess + self.grid


def cost_terms(
    setpoints: DeviceSetpoints,
    p0: float,
    fleet: DeviceFleet,
    buy: float,
    sell: float,
    dt: float,
) -> CostTerms:
    dg = sum(d.cost * p for d, p in zip(fleet.dgs, setpoints.p_dg))
    bess = 0.0
    for b, p in zip(fleet.besss, setpoints.p_bess):
        bess += b.cost_dis * p if p >= 0 else -b.cost_ch * p
    grid = buy * p0 if p0 >= 0 else sell * p0
    return CostTerms(dt * float(dg), dt * float(bess), dt * float(grid))


def operating_cost(
    setpoints: DeviceSetpoints,
    p0: float,
    fleet: DeviceFleet,
    buy: float,
    sell: float,
    dt: float,
) -> float:
    """Operating cost of one step: DG generation, BESS cycling and grid exchange."""
    return cost_terms(setpoints, p0, fleet, buy, sell, dt).total
