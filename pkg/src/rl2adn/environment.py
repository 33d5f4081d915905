"""Energy-management MDP of a distribution feeder.

State: per-bus device powers, loads, voltages and SOC plus the time index.
Action: raw ``[-1, 1]^d`` vector projected onto the device limits.
Reward: negative operating cost, weighted, minus the bus-averaged voltage
penalty and branch-averaged branch-power penalty of the active program.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol

import numpy as np

from .devices import (
    DeviceFleet,
    DeviceSetpoints,
    PriceSchedule,
    cost_terms,
    project_setpoints,
    step_soc,
    time_of_use_prices,
)
from .grid import NetworkCase, PowerFlowError, PowerFlowModel, PowerFlowSolution

TYPICAL_DAY_SEED = 0
N_BUS_FEATURES = 9


@dataclass(frozen=True)
class ProfileConfig:
    night_level: float = 0.55
    morning_peak: float = 0.85
    morning_hour: float = 9.0
    evening_peak: float = 1.05
    evening_hour: float = 19.0
    load_noise: float = 0.05  # bounded uniform, per bus and step
    day_scale_noise: float = 0.05  # bounded uniform, whole-day factor
    sunrise: float = 6.0
    sunset: float = 18.0
    pv_capacity_factor: float = 0.8
    pv_noise: float = 0.1
    off_peak_price: float = 0.2
    shoulder_price: float = 0.3
    peak_price: float = 0.45
    sell_ratio: float = 0.6


@dataclass(frozen=True)
class EnvConfig:
    dt: float = 0.25  # hours
    horizon: int = 96
    beta_r: float = 1.0
    failure_reward: float = -100.0  # scaled by beta_r
    pf_tol: float = 1e-8
    pf_max_iter: int = 50
    training_profiles: str = "random"  # random | typical
    profile: ProfileConfig = field(default_factory=ProfileConfig)

    def __post_init__(self):
        if self.dt <= 0 or self.horizon < 1 or self.beta_r <= 0:
            raise ValueError("need dt > 0, horizon >= 1 and beta_r > 0")
        if self.training_profiles not in ("random", "typical"):
            raise ValueError("training_profiles must be 'random' or 'typical'")


@dataclass(frozen=True)
class Profiles:
    load_mult: np.ndarray  # (T, n_bus)
    pv_avail: np.ndarray  # (T, n_pv), MW
    prices: PriceSchedule

    @property
    def horizon(self) -> int:
        return self.load_mult.shape[0]


def load_shape(hours: np.ndarray, cfg: ProfileConfig) -> np.ndarray:
    """Diurnal double-peak load multiplier."""
    base = cfg.night_level
    morning = (cfg.morning_peak - base) * np.exp(-0.5 * ((hours - cfg.morning_hour) / 1.8) ** 2)
    evening = (cfg.evening_peak - base) * np.exp(-0.5 * ((hours - cfg.evening_hour) / 2.2) ** 2)
    return base + morning + evening


def pv_shape(hours: np.ndarray, cfg: ProfileConfig) -> np.ndarray:
    """Clear-sky bell between sunrise and sunset, peak 1."""
    x = (hours - cfg.sunrise) / (cfg.sunset - cfg.sunrise)
    out = np.where((x > 0) & (x < 1), np.sin(np.pi * np.clip(x, 0, 1)), 0.0)
    return out**1.5


def generate_profiles(
    config: EnvConfig,
    case: NetworkCase,
    fleet: DeviceFleet,
    seed: int,
) -> Profiles:
    """Synthesise one day of load, PV and price profiles.

    Deterministic in ``seed``. :data:`TYPICAL_DAY_SEED` is reserved for the
    typical test day, which carries no noise at all.
    """
    cfg = config.profile
    T = config.horizon
    hours = (np.arange(T) + 0.5) * config.dt % 24.0
    shape = load_shape(hours, cfg)
    sun = pv_shape(hours, cfg)
    s_max = np.array([p.s_max for p in fleet.pvs])
    if seed == TYPICAL_DAY_SEED:
        load = np.repeat(shape[:, None], case.n_bus, axis=1)
        pv = np.outer(sun, s_max * cfg.pv_capacity_factor)
    else:
        rng = np.random.default_rng(seed)
        day = 1.0 + rng.uniform(-cfg.day_scale_noise, cfg.day_scale_noise)
        load = shape[:, None] * day * (1.0 + rng.uniform(-cfg.load_noise, cfg.load_noise, (T, case.n_bus)))
        cf = cfg.pv_capacity_factor * (1.0 + rng.uniform(-cfg.pv_noise, cfg.pv_noise, (T, len(fleet.pvs))))
        pv = sun[:, None] * s_max[None, :] * cf
    pv = np.clip(pv, 0.0, s_max[None, :]) if fleet.pvs else np.zeros((T, 0))
    prices = time_of_use_prices(
        T, config.dt, cfg.off_peak_price, cfg.shoulder_price, cfg.peak_price, cfg.sell_ratio
    )
    return Profiles(load_mult=load, pv_avail=pv, prices=prices)


def typical_day(config: EnvConfig, case: NetworkCase, fleet: DeviceFleet) -> Profiles:
    return generate_profiles(config, case, fleet, TYPICAL_DAY_SEED)


class PenaltyLike(Protocol):
    def voltage_penalty(self, v: np.ndarray) -> np.ndarray: ...

    def branch_penalty(self, s: np.ndarray) -> np.ndarray: ...


def compute_vvr(solution: PowerFlowSolution | np.ndarray, v_min: float, v_max: float) -> float:
    """Fraction of buses strictly outside ``[v_min, v_max]``."""
    v = solution.V if isinstance(solution, PowerFlowSolution) else np.asarray(solution)
    return float(np.count_nonzero(v > v_max) + np.count_nonzero(v < v_min)) / v.size


def compute_bvr(solution: PowerFlowSolution | np.ndarray, capacities: np.ndarray) -> float:
    """Fraction of branches whose apparent power strictly exceeds capacity."""
    s = solution.S_brch if isinstance(solution, PowerFlowSolution) else np.asarray(solution)
    return float(np.count_nonzero(s > np.asarray(capacities))) / s.size


@dataclass
class StepOutcome:
    state: np.ndarray
    reward: float  # final reward r'
    raw_reward: float  # -cost
    penalty_v: float
    penalty_brch: float
    vvr: float
    bvr: float
    v_violations: int
    b_violations: int
    cost: float
    converged: bool
    done: bool
    t: int
    setpoints: DeviceSetpoints | None = None

    def log_row(self) -> dict:
        return {
            "t": self.t,
            "r": self.raw_reward,
            "r_final": self.reward,
            "penalty_v": self.penalty_v,
            "penalty_brch": self.penalty_brch,
            "vvr": self.vvr,
            "bvr": self.bvr,
            "cost": self.cost,
            "converged": int(self.converged),
        }


STEP_LOG_FIELDS = ["t", "r", "r_final", "penalty_v", "penalty_brch", "vvr", "bvr", "cost", "converged"]


class AdnEnv:
    """Single-stream episode simulator; do not share one instance across threads."""

    def __init__(
        self,
        case: NetworkCase,
        fleet: DeviceFleet,
        config: EnvConfig | None = None,
        penalty: PenaltyLike | None = None,
    ):
        fleet.check_buses(case.n_bus, case.slack)
        self.case = case
        self.fleet = fleet
        self.config = config or EnvConfig()
        self.penalty = penalty
        self.model = PowerFlowModel(case)
        self.capacities = case.capacities
        self._dg_bus = np.array([d.bus for d in fleet.dgs], dtype=np.intp)
        self._pv_bus = np.array([p.bus for p in fleet.pvs], dtype=np.intp)
        self._bess_bus = np.array([b.bus for b in fleet.besss], dtype=np.intp)
        self.profiles: Profiles | None = None
        self.t = 0
        self.done = True

    # sizes ---------------------------------------------------------------
    @property
    def action_dim(self) -> int:
        return self.fleet.action_dim

    @property
    def state_dim(self) -> int:
        return N_BUS_FEATURES * self.case.n_bus + 1

    def set_penalty(self, penalty: PenaltyLike) -> None:
        self.penalty = penalty

    def state_scale(self) -> tuple[np.ndarray, np.ndarray]:
        """Offset and scale that bring state entries to order one."""
        n = self.case.n_bus
        p_unit = max(float(np.max(np.abs(self.case.p_load))), 1e-3)
        offset = np.zeros(self.state_dim)
        scale = np.full(self.state_dim, p_unit)
        offset[7 * n : 8 * n] = 1.0
        scale[7 * n : 8 * n] = 0.05
        e_cap = np.ones(n)
        for b in self.fleet.besss:
            e_cap[b.bus] = b.e_cap
        scale[8 * n : 9 * n] = e_cap
        scale[-1] = 1.0
        return offset, scale

    # episode ---------------------------------------------------------------
    def reset(self, profiles: Profiles) -> np.ndarray:
        if profiles.horizon != self.config.horizon:
            raise ValueError(f"profiles cover {profiles.horizon} steps, expected {self.config.horizon}")
        if profiles.load_mult.shape[1] != self.case.n_bus or profiles.pv_avail.shape[1] != len(self.fleet.pvs):
            raise ValueError("profiles do not match the case/fleet dimensions")
        self.profiles = profiles
        self.t = 0
        self.done = False
        self.soc = np.array([b.initial_soc for b in self.fleet.besss], dtype=float)
        sp = DeviceSetpoints.zeros(self.fleet)
        sp.p_dg = np.array([d.p_min for d in self.fleet.dgs], dtype=float)
        sp.q_dg = np.clip(np.zeros(len(self.fleet.dgs)), [d.q_min for d in self.fleet.dgs], [d.q_max for d in self.fleet.dgs]) if self.fleet.dgs else sp.q_dg
        self.setpoints = sp
        p, q = self._injections(sp, 0)
        self.solution = self.model.solve(p, q, self.config.pf_tol, self.config.pf_max_iter)
        self._state = self._build_state(0, self.solution.V)
        return self._state.copy()

    @property
    def state(self) -> np.ndarray:
        return self._state.copy()

    def _loads(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        m = self.profiles.load_mult[t]
        return self.case.p_load * m, self.case.q_load * m

    def _injections(self, sp: DeviceSetpoints, t: int) -> tuple[np.ndarray, np.ndarray]:
        pl, ql = self._loads(t)
        p = -pl
        q = -ql.copy()
        np.add.at(p, self._dg_bus, sp.p_dg)
        np.add.at(q, self._dg_bus, sp.q_dg)
        np.add.at(p, self._pv_bus, self.profiles.pv_avail[t])
        np.add.at(q, self._pv_bus, sp.q_pv)
        np.add.at(p, self._bess_bus, sp.p_bess)
        return p, q

    def _build_state(self, t: int, v: np.ndarray) -> np.ndarray:
        n = self.case.n_bus
        tt = min(t, self.config.horizon - 1)
        pl, ql = self._loads(tt)
        f = np.zeros((N_BUS_FEATURES, n))
        sp = self.setpoints
        np.add.at(f[0], self._dg_bus, sp.p_dg)
        np.add.at(f[1], self._pv_bus, self.profiles.pv_avail[tt])
        np.add.at(f[2], self._bess_bus, sp.p_bess)
        f[3] = pl
        np.add.at(f[4], self._dg_bus, sp.q_dg)
        np.add.at(f[5], self._pv_bus, sp.q_pv)
        f[6] = ql
        f[7] = v
        np.add.at(f[8], self._bess_bus, self.soc)
        return np.concatenate([f.ravel(), [t / self.config.horizon]])

    def penalties(self, solution: PowerFlowSolution, penalty: PenaltyLike | None = None) -> tuple[float, float]:
        penalty = penalty if penalty is not None else self.penalty
        if penalty is None:
            return 0.0, 0.0
        pv = float(np.sum(penalty.voltage_penalty(solution.V))) / self.case.n_bus
        pb = float(np.sum(penalty.branch_penalty(solution.S_brch))) / self.case.n_branch
        return pv, pb

    def step(self, raw_action: np.ndarray, penalty: PenaltyLike | None = None) -> StepOutcome:
        if self.done or self.profiles is None:
            raise RuntimeError("episode finished; call reset() first")
        cfg = self.config
        t = self.t
        pv_avail = self.profiles.pv_avail[t]
        sp = project_setpoints(raw_action, self.fleet, self.setpoints, self.soc, pv_avail, cfg.dt)
        p, q = self._injections(sp, t)
        buy = float(self.profiles.prices.buy[t])
        sell = float(self.profiles.prices.sell[t])
        converged = True
        try:
            sol = self.model.solve(p, q, cfg.pf_tol, cfg.pf_max_iter)
        except PowerFlowError as exc:
            sol = exc.solution
            converged = False

        self.setpoints = sp
        for k, b in enumerate(self.fleet.besss):
            self.soc[k] = step_soc(self.soc[k], sp.p_bess[k], cfg.dt, b.eta, b.soc_min, b.soc_max).soc
        self.t = t + 1

        if converged:
            cost = cost_terms(sp, sol.P_0, self.fleet, buy, sell, cfg.dt).total
            raw_reward = -cost
            pen_v, pen_b = self.penalties(sol, penalty)
            reward = cfg.beta_r * raw_reward - pen_v - pen_b
            nv = int(np.count_nonzero(sol.V > self.case.v_max) + np.count_nonzero(sol.V < self.case.v_min))
            nb = int(np.count_nonzero(sol.S_brch > self.capacities))
            vvr = nv / self.case.n_bus
            bvr = nb / self.case.n_branch
            self.solution = sol
            self.done = self.t >= cfg.horizon
            v_obs = sol.V
        else:
            # A failed solve counts every bus and branch as violated and ends the episode.
            p0 = -float(np.sum(np.delete(p, self.case.slack)))
            cost = cost_terms(sp, p0, self.fleet, buy, sell, cfg.dt).total
            raw_reward = -cost
            pen_v = pen_b = 0.0
            reward = cfg.failure_reward * cfg.beta_r
            nv, nb = self.case.n_bus, self.case.n_branch
            vvr = bvr = 1.0
            self.done = True
            v_obs = self.solution.V

        self._state = self._build_state(self.t, v_obs)
        return StepOutcome(
            state=self._state.copy(),
            reward=float(reward),
            raw_reward=float(raw_reward),
            penalty_v=pen_v,
            penalty_brch=pen_b,
            vvr=vvr,
            bvr=bvr,
            v_violations=nv,
            b_violations=nb,
            cost=float(cost),
            converged=converged,
            done=self.done,
            t=t,
            setpoints=sp,
        )


@dataclass
class TestRecord:
    __test__ = False  # not a pytest class

    cost: float
    vvr: float  # step average
    bvr: float
    voltage_violation_times: int  # bus-steps
    branch_violation_times: int  # branch-steps
    steps: int
    failed_steps: int = 0
    reward: float = 0.0
    step_vvr: list[float] = field(default_factory=list)
    step_cost: list[float] = field(default_factory=list)

    @property
    def violation_times(self) -> int:
        return self.voltage_violation_times + self.branch_violation_times

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TestRecord":
        return cls(**d)


def summarize_outcomes(outcomes: Iterable[StepOutcome], horizon: int) -> TestRecord:
    outs = list(outcomes)
    vvr = [o.vvr for o in outs]
    bvr = [o.bvr for o in outs]
    return TestRecord(
        cost=float(sum(o.cost for o in outs)),
        vvr=float(sum(vvr)) / horizon,
        bvr=float(sum(bvr)) / horizon,
        voltage_violation_times=int(sum(o.v_violations for o in outs)),
        branch_violation_times=int(sum(o.b_violations for o in outs)),
        steps=len(outs),
        failed_steps=sum(1 for o in outs if not o.converged),
        reward=float(sum(o.reward for o in outs)),
        step_vvr=vvr,
        step_cost=[o.cost for o in outs],
    )


def run_episode(
    env: AdnEnv,
    policy: Callable[[np.ndarray], np.ndarray],
    profiles: Profiles,
    logger: "StepLogger | None" = None,
) -> list[StepOutcome]:
    state = env.reset(profiles)
    outs = []
    while not env.done:
        out = env.step(policy(state))
        outs.append(out)
        if logger is not None:
            logger.write(out)
        state = out.state
    return outs


def evaluate_typical_day(
    policy: Callable[[np.ndarray], np.ndarray],
    case: NetworkCase,
    fleet: DeviceFleet,
    penalty: PenaltyLike | None,
    config: EnvConfig | None = None,
    log_path: str | Path | None = None,
) -> TestRecord:
    """Roll a deterministic policy over the noise-free typical day.

    VVR and BVR are step averages over the full horizon; violation times
    count bus-steps and branch-steps.
    """
    config = config or EnvConfig()
    env = AdnEnv(case, fleet, config, penalty)
    profiles = typical_day(config, case, fleet)
    logger = StepLogger(log_path) if log_path else None
    try:
        outs = run_episode(env, policy, profiles, logger)
    finally:
        if logger is not None:
            logger.close()
    return summarize_outcomes(outs, config.horizon)


class StepLogger:
    """CSV writer with one row per environment step."""

    def __init__(self, path: str | Path):
        self._fh = open(path, "w", newline="", encoding="utf-8")
        self._w = csv.DictWriter(self._fh, fieldnames=STEP_LOG_FIELDS)
        self._w.writeheader()

    def write(self, out: StepOutcome) -> None:
        self._w.writerow(out.log_row())

    def close(self) -> None:
        self._fh.close()
