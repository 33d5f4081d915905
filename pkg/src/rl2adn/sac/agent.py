"""Soft actor-critic: squashed Gaussian policy, soft Q critic, losses and updates.

The loss functions take the exploration noise explicitly so they are pure
functions of their inputs; that is what the finite-difference tests rely on.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .buffer import Batch
from .mlp import Mlp, MlpCache
from .optim import Adam, exponential_lr

LOG_2PI = math.log(2.0 * math.pi)
TANH_EPS = 1e-6


@dataclass(frozen=True)
class SacConfig:
    gamma: float = 0.99
    alpha: float = 0.04
    buffer_capacity: int = 10_000
    batch_size: int = 256
    value_update_freq: int = 1  # environment steps per critic update
    policy_update_freq: int = 2  # environment steps per policy update
    critic_lr: tuple[float, float] = (1e-3, 1e-4)
    policy_lr: tuple[float, float] = (1e-3, 1e-4)
    tau: float = 5e-3
    episodes: int = 500
    hidden: tuple[int, ...] = (256, 256, 256)
    warmup_steps: int = 1000
    twin_critic: bool = False
    log_std_min: float = -20.0
    log_std_max: float = 2.0
    dtype: str = "float32"
    converged_window: int = 50

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.batch_size > self.buffer_capacity:
            raise ValueError("batch size exceeds buffer capacity")
        if self.value_update_freq < 1 or self.policy_update_freq < 1:
            raise ValueError("update frequencies must be >= 1")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        object.__setattr__(self, "critic_lr", tuple(float(x) for x in self.critic_lr))
        object.__setattr__(self, "policy_lr", tuple(float(x) for x in self.policy_lr))
        object.__setattr__(self, "hidden", tuple(int(x) for x in self.hidden))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["critic_lr"] = list(self.critic_lr)
        d["policy_lr"] = list(self.policy_lr)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SacConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown SAC option(s): {', '.join(sorted(unknown))}")
        return cls(**known)


# sampling -----------------------------------------------------------------


@dataclass
class PolicySample:
    a: np.ndarray
    log_prob: np.ndarray
    mu: np.ndarray
    log_std: np.ndarray
    std: np.ndarray
    xi: np.ndarray
    clipped: np.ndarray  # log-std outside its bounds (zero gradient there)
    cache: MlpCache


def _policy_sample(
    policy: Mlp, s: np.ndarray, xi: np.ndarray, lo: float = -20.0, hi: float = 2.0
) -> PolicySample:
    out, cache = policy.forward(s)
    d = out.shape[1] // 2
    mu = out[:, :d]
    raw_ls = out[:, d:]
    log_std = np.clip(raw_ls, lo, hi)
    std = np.exp(log_std)
    xi = np.asarray(xi, dtype=out.dtype)
    a = np.tanh(mu + std * xi)
    gauss = -0.5 * xi * xi - log_std - 0.5 * LOG_2PI
    log_prob = np.sum(gauss - np.log(1.0 - a * a + TANH_EPS), axis=1)
    clipped = (raw_ls < lo) | (raw_ls > hi)
    return PolicySample(a, log_prob, mu, log_std, std, xi, clipped, cache)


def sample_action(
    policy: Mlp, s: np.ndarray, xi: np.ndarray, log_std_bounds: tuple[float, float] = (-20.0, 2.0)
) -> tuple[np.ndarray, np.ndarray]:
    """Reparameterized squashed-Gaussian sample and its log-density.

    ``a = tanh(mu + sigma * xi)``; the log-density includes the
    change-of-variables term ``-sum log(1 - a^2 + eps)``.
    """
    single = np.ndim(s) == 1
    s2 = np.atleast_2d(s)
    xi2 = np.atleast_2d(xi)
    ps = _policy_sample(policy, s2, xi2, *log_std_bounds)
    if single:
        return ps.a[0], ps.log_prob[0]
    return ps.a, ps.log_prob


def _policy_backward(policy: Mlp, ps: PolicySample, g_a: np.ndarray, g_logp: np.ndarray) -> list[np.ndarray]:
    """Gradients of ``sum(g_a * a) + sum(g_logp * log_prob)`` w.r.t. policy params."""
    a = ps.a
    one_m = 1.0 - a * a
    g_u = g_a * one_m + g_logp[:, None] * (2.0 * a * one_m / (one_m + TANH_EPS))
    g_mu = g_u
    g_ls = g_u * ps.std * ps.xi - g_logp[:, None]
    g_ls = np.where(ps.clipped, 0.0, g_ls)
    grads, _ = policy.backward(ps.cache, np.concatenate([g_mu, g_ls], axis=1), input_grad=False)
    return grads


def _q_values(critics: list[Mlp], s: np.ndarray, a: np.ndarray):
    x = np.concatenate([s, a], axis=1)
    outs = [c.forward(x) for c in critics]
    return [o[0][:, 0] for o in outs], [o[1] for o in outs]


# losses -------------------------------------------------------------------


def critic_targets(
    target_critics: list[Mlp],
    policy: Mlp,
    batch: Batch,
    xi_next: np.ndarray,
    gamma: float,
    alpha: float,
    log_std_bounds: tuple[float, float] = (-20.0, 2.0),
) -> np.ndarray:
    ps = _policy_sample(policy, batch.s2, xi_next, *log_std_bounds)
    qs, _ = _q_values(target_critics, batch.s2, ps.a)
    q_next = qs[0] if len(qs) == 1 else np.minimum(qs[0], qs[1])
    return batch.r + gamma * (1.0 - batch.done) * (q_next - alpha * ps.log_prob)


def critic_loss(
    critics: list[Mlp],
    target_critics: list[Mlp],
    policy: Mlp,
    batch: Batch,
    xi_next: np.ndarray,
    gamma: float,
    alpha: float,
    log_std_bounds: tuple[float, float] = (-20.0, 2.0),
) -> tuple[float, list[list[np.ndarray]]]:
    """Mean squared soft Bellman error; the target is held constant.

    With two critics the target uses their minimum and the loss is the sum
    of both regressions.
    """
    n = len(batch.r)
    if n == 0:
        raise ValueError("empty batch")
    y = critic_targets(target_critics, policy, batch, xi_next, gamma, alpha, log_std_bounds)
    qs, caches = _q_values(critics, batch.s, batch.a)
    loss = 0.0
    grads = []
    for c, q, cache in zip(critics, qs, caches):
        err = q - y
        loss += float(np.mean(err * err))
        g, _ = c.backward(cache, (2.0 / n * err)[:, None], input_grad=False)
        grads.append(g)
    return loss, grads


def policy_loss(
    policy: Mlp,
    critics: list[Mlp],
    batch: Batch,
    xi: np.ndarray,
    alpha: float,
    log_std_bounds: tuple[float, float] = (-20.0, 2.0),
) -> tuple[float, list[np.ndarray]]:
    """Mean of ``alpha * log pi(a|s) - Q(s, a)`` with ``a`` reparameterized."""
    n = batch.s.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    ps = _policy_sample(policy, batch.s, xi, *log_std_bounds)
    x = np.concatenate([batch.s, ps.a], axis=1)
    d_s = batch.s.shape[1]
    fwd = [c.forward(x) for c in critics]
    qs = [f[0][:, 0] for f in fwd]
    if len(qs) == 1:
        q = qs[0]
        weights = [np.ones(n, dtype=q.dtype)]
    else:
        pick = qs[0] <= qs[1]
        q = np.where(pick, qs[0], qs[1])
        weights = [pick.astype(q.dtype), (~pick).astype(q.dtype)]
    loss = float(np.mean(alpha * ps.log_prob - q))
    g_a = np.zeros_like(ps.a)
    for c, (_, cache), w in zip(critics, fwd, weights):
        _, g_in = c.backward(cache, (-w / n)[:, None], param_grads=False)
        g_a += g_in[:, d_s:]
    g_logp = np.full(n, alpha / n, dtype=ps.a.dtype)
    return loss, _policy_backward(policy, ps, g_a, g_logp)


def soft_target_update(params: list[np.ndarray], target: list[np.ndarray], tau: float) -> None:
    """In place: ``target <- tau * params + (1 - tau) * target``."""
    for p, t in zip(params, target):
        t *= 1.0 - tau
        t += tau * p


# agent --------------------------------------------------------------------


@dataclass
class UpdateStats:
    critic_updates: int = 0
    policy_updates: int = 0
    skipped: int = 0
    last_critic_loss: float = float("nan")
    last_policy_loss: float = float("nan")
    critic_losses: list[float] = field(default_factory=list)


class SacAgent:
    def __init__(
        self,
        state_dim: int,
        action_dim: int,
        config: SacConfig | None = None,
        rng: np.random.Generator | None = None,
        obs_offset: np.ndarray | None = None,
        obs_scale: np.ndarray | None = None,
    ):
        self.config = config or SacConfig()
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        dt = np.dtype(self.config.dtype)
        self.dtype = dt
        h = self.config.hidden
        self.policy = Mlp((state_dim, *h, 2 * action_dim), self.rng, dt, head_scale=0.1)
        n_critics = 2 if self.config.twin_critic else 1
        self.critics = [Mlp((state_dim + action_dim, *h, 1), self.rng, dt) for _ in range(n_critics)]
        self.targets = [c.copy() for c in self.critics]
        self.policy_opt = Adam(self.policy.params)
        self.critic_opts = [Adam(c.params) for c in self.critics]
        self.obs_offset = np.zeros(state_dim) if obs_offset is None else np.asarray(obs_offset, dtype=float)
        self.obs_scale = np.ones(state_dim) if obs_scale is None else np.asarray(obs_scale, dtype=float)
        self.stats = UpdateStats()

    @property
    def log_std_bounds(self) -> tuple[float, float]:
        return self.config.log_std_min, self.config.log_std_max

    def normalize(self, s: np.ndarray) -> np.ndarray:
        return ((np.asarray(s, dtype=float) - self.obs_offset) / self.obs_scale).astype(self.dtype)

    def act(self, state: np.ndarray, deterministic: bool = False) -> np.ndarray:
        s = self.normalize(state)[None, :]
        if deterministic:
            out = self.policy(s)
            return np.tanh(out[0, : self.action_dim]).astype(float)
        xi = self.rng.standard_normal((1, self.action_dim)).astype(self.dtype)
        a, _ = sample_action(self.policy, s, xi, self.log_std_bounds)
        return a[0].astype(float)

    def deterministic_policy(self):
        return lambda state: self.act(state, deterministic=True)

    def learning_rates(self, episode: float) -> tuple[float, float]:
        c = self.config
        return (
            exponential_lr(c.critic_lr[0], c.critic_lr[1], episode, c.episodes),
            exponential_lr(c.policy_lr[0], c.policy_lr[1], episode, c.episodes),
        )

    def update_critic(self, batch: Batch, episode: float) -> float:
        c = self.config
        xi = self.rng.standard_normal((len(batch.r), self.action_dim)).astype(self.dtype)
        loss, grads = critic_loss(self.critics, self.targets, self.policy, batch, xi, c.gamma, c.alpha, self.log_std_bounds)
        lr, _ = self.learning_rates(episode)
        for critic, opt, g in zip(self.critics, self.critic_opts, grads):
            if not opt.step(critic.params, g, lr):
                self.stats.skipped += 1
        for critic, target in zip(self.critics, self.targets):
            soft_target_update(critic.params, target.params, c.tau)
        self.stats.critic_updates += 1
        self.stats.last_critic_loss = loss
        return loss

    def update_policy(self, batch: Batch, episode: float) -> float:
        c = self.config
        xi = self.rng.standard_normal((len(batch.r), self.action_dim)).astype(self.dtype)
        loss, grads = policy_loss(self.policy, self.critics, batch, xi, c.alpha, self.log_std_bounds)
        _, lr = self.learning_rates(episode)
        if not self.policy_opt.step(self.policy.params, grads, lr):
            self.stats.skipped += 1
        self.stats.policy_updates += 1
        self.stats.last_policy_loss = loss
        return loss
