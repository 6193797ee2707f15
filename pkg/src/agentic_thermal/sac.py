"""Soft Actor-Critic with a squashed-Gaussian policy, twin critics and an
entropy coefficient that is either auto-tuned or externally overridden."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .nn import MLP, Adam

LOG_2PI = math.log(2.0 * math.pi)
SQUASH_EPS = 1e-6
CHECKPOINT_VERSION = 1


class NonPositiveAlpha(ValueError):
    pass


class EmptyBuffer(RuntimeError):
    pass


class AlphaMode(str, Enum):
    AUTO_TUNE = "auto_tune"
    OVERRIDE = "override"


@dataclass(frozen=True)
class SACConfig:
    hidden: tuple[int, ...] = (64, 64)
    gamma: float = 0.99
    tau: float = 0.005
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    alpha_lr: float = 3e-4
    batch_size: int = 64
    buffer_capacity: int = 100_000
    learning_starts: int = 100
    init_alpha: float = 1.0
    target_entropy: float | None = None  # None -> -act_dim
    log_std_min: float = -20.0
    log_std_max: float = 2.0
    train_every: int = 8  # env steps per gradient step

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.init_alpha <= 0:
            raise NonPositiveAlpha("init_alpha must be positive")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("need 1 <= batch_size <= buffer_capacity")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.train_every < 1:
            raise ValueError("train_every must be >= 1")


class Batch(NamedTuple):
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    dones: np.ndarray


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, act_dim))
        self.rewards = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.dones = np.zeros(capacity)
        self.pos = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, action, reward, next_obs, done) -> None:
        i = self.pos
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.dones[i] = float(done)
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if self.size < batch_size:
            raise EmptyBuffer(f"buffer holds {self.size} transitions, need {batch_size}")
        idx = rng.integers(0, self.size, size=batch_size)
        return Batch(self.obs[idx], self.actions[idx], self.rewards[idx],
                     self.next_obs[idx], self.dones[idx])


# -- policy / value math -------------------------------------------------------
# The loss functions below take the Gaussian noise explicitly so that the same
# sample can be re-evaluated under perturbed parameters.

def policy_forward(actor: MLP, obs: np.ndarray, eps: np.ndarray, log_std_min: float,
                   log_std_max: float):
    out, cache = actor.forward(obs)
    d = eps.shape[1]
    mu = out[:, :d]
    log_std_raw = out[:, d:]
    log_std = np.clip(log_std_raw, log_std_min, log_std_max)
    std = np.exp(log_std)
    action = np.tanh(mu + std * eps)
    logp = np.sum(-0.5 * eps ** 2 - log_std - 0.5 * LOG_2PI
                  - np.log(1.0 - action ** 2 + SQUASH_EPS), axis=1)
    aux = (cache, log_std_raw, std)
    return action, logp, aux


def q_value(critic: MLP, obs: np.ndarray, action: np.ndarray):
    x = np.concatenate([obs, action], axis=1)
    out, cache = critic.forward(x)
    return out[:, 0], cache


def critic_loss_and_grads(q1: MLP, q2: MLP, obs, actions, target):
    """0.5 * sum over both critics of the mean squared error to ``target``.

    Gradients are returned as the critics' flat gradient vectors.
    """
    b = obs.shape[0]
    v1, c1 = q_value(q1, obs, actions)
    v2, c2 = q_value(q2, obs, actions)
    e1 = v1 - target
    e2 = v2 - target
    loss = 0.5 * (np.mean(e1 ** 2) + np.mean(e2 ** 2))
    q1.backward(c1, (e1 / b)[:, None])
    q2.backward(c2, (e2 / b)[:, None])
    return loss, q1.grad_flat, q2.grad_flat


def actor_loss_and_grads(actor: MLP, q1: MLP, q2: MLP, obs, eps, alpha: float,
                         log_std_min: float = -20.0, log_std_max: float = 2.0):
    """mean(alpha * log pi(a|s) - min(Q1, Q2)(s, a)) with reparameterised ``a``."""
    b, d = eps.shape
    action, logp, (cache, log_std_raw, std) = policy_forward(actor, obs, eps, log_std_min,
                                                             log_std_max)
    v1, c1 = q_value(q1, obs, action)
    v2, c2 = q_value(q2, obs, action)
    pick1 = v1 <= v2
    q_min = np.where(pick1, v1, v2)
    loss = float(np.mean(alpha * logp - q_min))

    obs_dim = obs.shape[1]
    _, dx1 = q1.backward(c1, (-(pick1.astype(float)) / b)[:, None], need_input_grad=True,
                         param_grads=False)
    _, dx2 = q2.backward(c2, (-((~pick1).astype(float)) / b)[:, None], need_input_grad=True,
                         param_grads=False)
    d_action = dx1[:, obs_dim:] + dx2[:, obs_dim:]

    one_minus_a2 = 1.0 - action ** 2
    dlogp_du = 2.0 * action * one_minus_a2 / (one_minus_a2 + SQUASH_EPS)
    du = d_action * one_minus_a2 + (alpha / b) * dlogp_du
    d_mu = du
    d_log_std = du * std * eps - alpha / b
    d_log_std *= (log_std_raw >= log_std_min) & (log_std_raw <= log_std_max)
    actor.backward(cache, np.concatenate([d_mu, d_log_std], axis=1))
    return loss, actor.grad_flat, logp


def alpha_loss_and_grad(log_alpha: float, logp: np.ndarray, target_entropy: float):
    """-alpha * mean(log pi + target_entropy); gradient taken w.r.t. log alpha."""
    alpha = math.exp(log_alpha)
    m = float(np.mean(logp + target_entropy))
    return -alpha * m, -alpha * m


# -- agent -----------------------------------------------------------------------

class SACAgent:
    def __init__(self, obs_dim: int, act_dim: int, config: SACConfig | None = None,
                 seed: int | np.random.SeedSequence = 0):
        self.config = config or SACConfig()
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        init_ss, sample_ss = ss.spawn(2)
        init_rng = np.random.default_rng(init_ss)
        self.rng = np.random.default_rng(sample_ss)

        h = self.config.hidden
        self.actor = MLP((obs_dim, *h, 2 * act_dim), init_rng, out_scale=0.1)
        self.q1 = MLP((obs_dim + act_dim, *h, 1), init_rng)
        self.q2 = MLP((obs_dim + act_dim, *h, 1), init_rng)
        self.q1_target = self.q1.clone()
        self.q2_target = self.q2.clone()

        c = self.config
        self.actor_opt = Adam([self.actor.flat], lr=c.actor_lr)
        self.critic_opt = Adam([self.q1.flat, self.q2.flat], lr=c.critic_lr)
        self.log_alpha = np.array([math.log(c.init_alpha)])
        self.alpha_opt = Adam([self.log_alpha], lr=c.alpha_lr)
        self.alpha_mode = AlphaMode.AUTO_TUNE
        self.target_entropy = (-float(act_dim) if c.target_entropy is None
                               else float(c.target_entropy))
        self.buffer = ReplayBuffer(c.buffer_capacity, obs_dim, act_dim)
        self.n_updates = 0

    @property
    def alpha(self) -> float:
        return float(math.exp(self.log_alpha[0]))

    def set_alpha(self, value: float) -> None:
        """Override the entropy coefficient; auto-tuning stops from here on."""
        if not value > 0 or not math.isfinite(value):
            raise NonPositiveAlpha(f"alpha must be positive, got {value!r}")
        self.log_alpha[0] = math.log(value)
        self.alpha_mode = AlphaMode.OVERRIDE

    def select_action(self, obs: np.ndarray, deterministic: bool = False) -> np.ndarray:
        x = np.asarray(obs, dtype=float)[None, :]
        out = self.actor(x)[0]
        mu = out[: self.act_dim]
        if deterministic:
            return np.tanh(mu)
        log_std = np.clip(out[self.act_dim:], self.config.log_std_min, self.config.log_std_max)
        eps = self.rng.standard_normal(self.act_dim)
        return np.tanh(mu + np.exp(log_std) * eps)

    def store(self, obs, action, reward, next_obs, done) -> None:
        self.buffer.add(obs, action, reward, next_obs, done)

    def ready(self) -> bool:
        c = self.config
        return len(self.buffer) >= max(c.batch_size, c.learning_starts)

    def update(self, batch: Batch | None = None) -> dict:
        c = self.config
        if batch is None:
            batch = self.buffer.sample(c.batch_size, self.rng)
        b = batch.obs.shape[0]
        d = self.act_dim

        eps_pi = self.rng.standard_normal((b, d))
        _, logp_pi, _ = policy_forward(self.actor, batch.obs, eps_pi, c.log_std_min, c.log_std_max)

        alpha_loss = 0.0
        alpha = self.alpha
        if self.alpha_mode is AlphaMode.AUTO_TUNE:
            alpha_loss, g = alpha_loss_and_grad(float(self.log_alpha[0]), logp_pi,
                                                self.target_entropy)
            self.alpha_opt.step([np.array([g])])

        eps_next = self.rng.standard_normal((b, d))
        a_next, logp_next, _ = policy_forward(self.actor, batch.next_obs, eps_next,
                                              c.log_std_min, c.log_std_max)
        qt1, _ = q_value(self.q1_target, batch.next_obs, a_next)
        qt2, _ = q_value(self.q2_target, batch.next_obs, a_next)
        target = batch.rewards + c.gamma * (1.0 - batch.dones) * (
            np.minimum(qt1, qt2) - alpha * logp_next)

        critic_loss, g1, g2 = critic_loss_and_grads(self.q1, self.q2, batch.obs, batch.actions,
                                                    target)
        self.critic_opt.step([g1, g2])

        actor_loss, ga, _ = actor_loss_and_grads(self.actor, self.q1, self.q2, batch.obs, eps_pi,
                                                 alpha, c.log_std_min, c.log_std_max)
        self.actor_opt.step([ga])

        self.q1_target.polyak_from(self.q1, c.tau)
        self.q2_target.polyak_from(self.q2, c.tau)
        self.n_updates += 1
        return {
            "update_idx": self.n_updates,
            "critic_loss": float(critic_loss),
            "actor_loss": actor_loss,
            "alpha_loss": float(alpha_loss),
            "alpha": self.alpha,
            "alpha_mode": self.alpha_mode.value,
            "entropy": float(-np.mean(logp_pi)),
        }

    # -- checkpointing -------------------------------------------------------

    def _networks(self) -> dict[str, MLP]:
        return {"actor": self.actor, "q1": self.q1, "q2": self.q2,
                "q1_target": self.q1_target, "q2_target": self.q2_target}

    def save(self, path: str | Path) -> None:
        arrays = {}
        shapes = {}
        for name, net in self._networks().items():
            shapes[name] = [list(p.shape) for p in net.params]
            for i, p in enumerate(net.params):
                arrays[f"{name}.{i}"] = p
        header = {
            "format": "agentic-thermal-sac",
            "version": CHECKPOINT_VERSION,
            "obs_dim": self.obs_dim,
            "act_dim": self.act_dim,
            "alpha": self.alpha,
            "alpha_mode": self.alpha_mode.value,
            "target_entropy": self.target_entropy,
            "n_updates": self.n_updates,
            "config": asdict(self.config),
            "shapes": shapes,
        }
        with open(path, "wb") as fh:
            np.savez(fh, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
                     **arrays)

    @classmethod
    def load(cls, path: str | Path) -> "SACAgent":
        with np.load(path) as data:
            header = json.loads(bytes(data["header"]).decode())
            if header.get("format") != "agentic-thermal-sac":
                raise ValueError("not an agentic-thermal SAC checkpoint")
            if header["version"] != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {header['version']}")
            cfg = dict(header["config"])
            cfg["hidden"] = tuple(cfg["hidden"])
            agent = cls(header["obs_dim"], header["act_dim"], SACConfig(**cfg))
            for name, net in agent._networks().items():
                for i, shape in enumerate(header["shapes"][name]):
                    arr = data[f"{name}.{i}"]
                    if list(arr.shape) != shape:
                        raise ValueError(f"shape mismatch for {name}.{i}")
                    net.params[i][...] = arr
        agent.log_alpha[0] = math.log(header["alpha"])
        agent.alpha_mode = AlphaMode(header["alpha_mode"])
        agent.target_entropy = header["target_entropy"]
        agent.n_updates = header["n_updates"]
        return agent
