"""Episode loop, training record and checkpoint files."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..environment import AdnEnv, PenaltyLike, generate_profiles, typical_day
from .agent import SacAgent, SacConfig
from .buffer import ReplayBuffer
from .mlp import Mlp

CHECKPOINT_VERSION = 1

EPISODE_LOG_FIELDS = ["episode", "reward", "raw_reward", "cost", "vvr", "bvr", "penalty_v", "penalty_brch", "failed"]


@dataclass
class TrainingResults:
    converged_reward: float
    episode_rewards: list[float] = field(default_factory=list)
    episode_costs: list[float] = field(default_factory=list)
    episode_vvr: list[float] = field(default_factory=list)
    episode_bvr: list[float] = field(default_factory=list)
    episode_failures: list[int] = field(default_factory=list)
    critic_updates: int = 0
    policy_updates: int = 0
    skipped_updates: int = 0
    env_steps: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingResults":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})

    def window_mean(self, series: str, first: bool, n: int = 50) -> float:
        xs = getattr(self, series)
        xs = xs[:n] if first else xs[-n:]
        return float(np.mean(xs)) if xs else float("nan")


def seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent generators for network init/sampling, warmup actions and profiles."""
    children = np.random.SeedSequence(int(seed)).spawn(3)
    return tuple(np.random.default_rng(c) for c in children)  # type: ignore[return-value]


def train(
    env: AdnEnv,
    penalty: PenaltyLike | None,
    config: SacConfig | None = None,
    seed: int = 1,
    stochastic_profiles: bool | None = None,
    episode_log: str | Path | None = None,
    progress: Callable[[int, dict], None] | None = None,
) -> tuple[SacAgent, TrainingResults]:
    """Train a fresh agent on ``env`` with ``penalty`` installed.

    Each episode draws a new day of profiles from a per-run stream (seeds
    are never the reserved typical-day seed) unless ``stochastic_profiles``
    is off, in which case every episode replays the typical day. ``None``
    defers to ``env.config.training_profiles``.
    """
    config = config or SacConfig()
    if stochastic_profiles is None:
        stochastic_profiles = env.config.training_profiles == "random"
    env.set_penalty(penalty)
    agent_rng, warm_rng, prof_rng = seed_streams(seed)
    offset, scale = env.state_scale()
    agent = SacAgent(env.state_dim, env.action_dim, config, agent_rng, offset, scale)
    buf = ReplayBuffer(config.buffer_capacity, env.state_dim, env.action_dim, agent.dtype)
    fixed = None if stochastic_profiles else typical_day(env.config, env.case, env.fleet)

    res = TrainingResults(converged_reward=float("nan"))
    log_fh = open(episode_log, "w", newline="", encoding="utf-8") if episode_log else None
    writer = csv.DictWriter(log_fh, fieldnames=EPISODE_LOG_FIELDS) if log_fh else None
    if writer:
        writer.writeheader()
    steps = 0
    try:
        for ep in range(config.episodes):
            if fixed is None:
                pseed = int(prof_rng.integers(1, 2**31 - 1))
                profiles = generate_profiles(env.config, env.case, env.fleet, pseed)
            else:
                profiles = fixed
            state = env.reset(profiles)
            s_norm = agent.normalize(state)
            tot = {"reward": 0.0, "raw_reward": 0.0, "cost": 0.0, "vvr": 0.0, "bvr": 0.0, "penalty_v": 0.0, "penalty_brch": 0.0}
            failed = 0
            while not env.done:
                if steps < config.warmup_steps:
                    a = warm_rng.uniform(-1.0, 1.0, env.action_dim)
                else:
                    a = agent.act(state)
                out = env.step(a)
                s2_norm = agent.normalize(out.state)
                buf.add(s_norm, a, out.reward, s2_norm, out.done)
                steps += 1
                tot["reward"] += out.reward
                tot["raw_reward"] += out.raw_reward
                tot["cost"] += out.cost
                tot["vvr"] += out.vvr
                tot["bvr"] += out.bvr
                tot["penalty_v"] += out.penalty_v
                tot["penalty_brch"] += out.penalty_brch
                failed += int(not out.converged)
                if steps >= config.warmup_steps and len(buf) >= config.batch_size:
                    if steps % config.value_update_freq == 0:
                        agent.update_critic(buf.sample(config.batch_size, agent.rng), ep)
                    if steps % config.policy_update_freq == 0:
                        agent.update_policy(buf.sample(config.batch_size, agent.rng), ep)
                state, s_norm = out.state, s2_norm
            horizon = env.config.horizon
            res.episode_rewards.append(tot["reward"])
            res.episode_costs.append(tot["cost"])
            res.episode_vvr.append(tot["vvr"] / horizon)
            res.episode_bvr.append(tot["bvr"] / horizon)
            res.episode_failures.append(failed)
            row = {"episode": ep, **tot, "vvr": tot["vvr"] / horizon, "bvr": tot["bvr"] / horizon, "failed": failed}
            if writer:
                writer.writerow(row)
            if progress:
                progress(ep, row)
    finally:
        if log_fh:
            log_fh.close()

    w = min(config.converged_window, len(res.episode_rewards))
    res.converged_reward = float(np.mean(res.episode_rewards[-w:]))
    res.critic_updates = agent.stats.critic_updates
    res.policy_updates = agent.stats.policy_updates
    res.skipped_updates = agent.stats.skipped
    res.env_steps = steps
    return agent, res


# checkpoints ----------------------------------------------------------------


def save_checkpoint(agent: SacAgent, path: str | Path) -> None:
    """Write every parameter tensor plus a JSON header describing shapes."""
    arrays: dict[str, np.ndarray] = {}
    nets = {"policy": agent.policy}
    for i, (c, t) in enumerate(zip(agent.critics, agent.targets)):
        nets[f"critic{i}"] = c
        nets[f"target{i}"] = t
    shapes = {}
    for name, net in nets.items():
        shapes[name] = list(net.sizes)
        for j, p in enumerate(net.params):
            arrays[f"{name}/{j}"] = p
    arrays["obs_offset"] = agent.obs_offset
    arrays["obs_scale"] = agent.obs_scale
    meta = {
        "version": CHECKPOINT_VERSION,
        "state_dim": agent.state_dim,
        "action_dim": agent.action_dim,
        "config": agent.config.to_dict(),
        "networks": shapes,
    }
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path: str | Path) -> SacAgent:
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        config = SacConfig.from_dict(meta["config"])
        agent = SacAgent(meta["state_dim"], meta["action_dim"], config, None, z["obs_offset"], z["obs_scale"])
        nets: dict[str, Mlp] = {"policy": agent.policy}
        for i, (c, t) in enumerate(zip(agent.critics, agent.targets)):
            nets[f"critic{i}"] = c
            nets[f"target{i}"] = t
        for name, net in nets.items():
            if tuple(meta["networks"][name]) != net.sizes:
                raise ValueError(f"shape mismatch for {name}")
            net.params = [np.array(z[f"{name}/{j}"]) for j in range(len(net.params))]
    agent.policy_opt = type(agent.policy_opt)(agent.policy.params)
    agent.critic_opts = [type(o)(c.params) for o, c in zip(agent.critic_opts, agent.critics)]
    return agent
