"""PPO with the clipped surrogate objective, GAE advantages, and Adam."""
from __future__ import annotations

import copy
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .env import EnvConfig, SfpEnv
from .instance import MipInstance
from .policy import Critic, Policy, batch_obs, gaussian_entropy, gaussian_log_prob

log = logging.getLogger(__name__)


class NonFiniteLoss(FloatingPointError):
    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass
class TrainConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    epochs_per_update: int = 4
    minibatch_size: int = 64
    episodes_per_iteration: int = 32
    iterations: int = 50
    learning_rate: float = 3e-4
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    max_grad_norm: float = 0.5
    reward_scale: float = 0.1
    normalize_advantages: bool = True
    eval_every: int = 1
    deterministic_eval: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError("gae_lambda must lie in [0, 1]")
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be positive")
        for name in ("epochs_per_update", "minibatch_size", "episodes_per_iteration",
                     "iterations", "eval_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")


@dataclass
class RolloutBuffer:
    obs: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    values: list = field(default_factory=list)
    dones: list = field(default_factory=list)
    episode_ids: list = field(default_factory=list)
    episode_lengths: list = field(default_factory=list)
    episode_returns: list = field(default_factory=list)
    episode_instances: list = field(default_factory=list)
    lp_solves: int = 0

    def __len__(self):
        return len(self.rewards)

    def arrays(self):
        return (np.array(self.actions), np.array(self.log_probs), np.array(self.rewards),
                np.array(self.values), np.array(self.dones, dtype=float),
                np.array(self.episode_ids))


def episode_rng(seed: int, index: int) -> np.random.Generator:
    """Per-episode stream, independent of batching or worker layout."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def run_episodes(policy: Policy, critic: Critic | None, instances, env_config: EnvConfig,
                 seed: int, deterministic=False, buffer: RolloutBuffer | None = None):
    """Play one episode per entry of ``instances`` in lockstep.

    Forward passes are batched over the live episodes; every episode samples
    from its own generator, so results do not depend on the batch.  Returns
    ``(episode_lengths, lp_solves_per_episode)``; transitions go to ``buffer``
    when one is given.
    """
    envs = [SfpEnv(env_config) for _ in instances]
    obs = [env.reset(inst) for env, inst in zip(envs, instances)]
    rngs = [episode_rng(seed, i) for i in range(len(instances))]
    pending = {i: [] for i in range(len(instances))}
    live = [i for i, env in enumerate(envs) if not env.state.done]
    while live:
        batch = [obs[i] for i in live]
        actions, logps = policy.act(batch, [rngs[i] for i in live], deterministic)
        values = critic.forward(batch_obs(batch, critic.variant)) if critic is not None else None
        still = []
        for k, i in enumerate(live):
            out = envs[i].step(actions[k])
            if buffer is not None:
                pending[i].append((obs[i], actions[k], logps[k], out.reward, values[k], out.done))
            obs[i] = out.obs
            if not out.done:
                still.append(i)
        live = still
    if buffer is not None:
        for i in range(len(instances)):
            # episodes are appended whole, in index order
            for (o, a, lp, r, v, d) in pending[i]:
                buffer.obs.append(o)
                buffer.actions.append(a)
                buffer.log_probs.append(lp)
                buffer.rewards.append(r)
                buffer.values.append(v)
                buffer.dones.append(d)
                buffer.episode_ids.append(i)
            buffer.episode_lengths.append(envs[i].state.episode_length)
            buffer.episode_returns.append(float(sum(t[3] for t in pending[i])))
            buffer.lp_solves += envs[i].state.lp_solves
    lengths = [env.state.episode_length for env in envs]
    solves = [env.state.lp_solves for env in envs]
    return lengths, solves


def collect_rollouts(policy: Policy, critic: Critic, instances, env_config: EnvConfig,
                     count: int, seed: int) -> RolloutBuffer:
    """Collect ``count`` complete episodes on instances drawn uniformly from the pool."""
    for inst in instances:
        if (inst.n, inst.m) != (policy.n, policy.m):
            raise ValueError(f"instance size {(inst.n, inst.m)} does not match policy {(policy.n, policy.m)}")
    pick = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2**31,)))
    chosen = [instances[int(j)] for j in pick.integers(len(instances), size=count)]
    buffer = RolloutBuffer()
    buffer.episode_instances = [inst.digest() for inst in chosen]
    run_episodes(policy, critic, chosen, env_config, seed, buffer=buffer)
    return buffer


def compute_gae(rewards, values, dones, episode_ids, gamma, lam):
    """Backward GAE recursion within each episode.

    A transition's successor value is the next stored value of the same
    episode; terminal transitions (``done``) bootstrap from zero.
    """
    rewards = np.asarray(rewards, float)
    values = np.asarray(values, float)
    dones = np.asarray(dones, float)
    episode_ids = np.asarray(episode_ids)
    T = rewards.size
    adv = np.zeros(T)
    running = 0.0
    for t in range(T - 1, -1, -1):
        last = t == T - 1 or episode_ids[t + 1] != episode_ids[t]
        next_value = 0.0 if last else values[t + 1]
        if last:
            running = 0.0
        delta = rewards[t] + gamma * next_value * (1.0 - dones[t]) - values[t]
        running = delta + gamma * lam * (1.0 - dones[t]) * running
        adv[t] = running
    return adv, adv + values


def clip_fraction(ratio, eps) -> float:
    return float(np.mean(np.abs(ratio - 1.0) > eps))


def clipped_surrogate(ratio, adv, eps):
    """Per-sample ``min(r A, clip(r, 1-eps, 1+eps) A)``."""
    return np.minimum(ratio * adv, np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv)


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.lr, (self.b1, self.b2), self.eps = lr, betas, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]):
        """Descend along ``grads`` (in place on the registered arrays)."""
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, p in self.params.items():
            g = grads[k]
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            p -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads.values():
            g *= scale
    return total


def policy_loss_and_grad(policy: Policy, X, actions, logp_old, adv, eps, entropy_coef):
    """Forward the policy, accumulate gradients of ``-(L_clip + c_ent * H)``.

    Returns a dict with the ratios, the surrogate value, and the entropy.
    """
    mean, log_std = policy.forward(X)
    logp = gaussian_log_prob(mean, log_std, actions)
    ratio = np.exp(logp - logp_old)
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv
    surr = np.minimum(unclipped, clipped)
    B = adv.size
    # d(-mean surr)/d logp: gradient flows only where the unclipped term is the min
    coeff = -(ratio * adv) * (unclipped <= clipped) / B
    inv_var = np.exp(-2.0 * log_std)
    diff = actions - mean
    g_mean = coeff[:, None] * diff * inv_var
    g_log_std = (coeff[:, None] * (diff * diff * inv_var - 1.0)).sum(axis=0) - entropy_coef
    policy.backward(g_mean, g_log_std)
    return {"ratio": ratio, "surrogate": float(surr.mean()),
            "entropy": gaussian_entropy(log_std)}


def value_loss_and_grad(critic: Critic, X, returns, value_coef):
    v = critic.forward(X)
    err = v - returns
    critic.backward(value_coef * 2.0 * err / err.size)
    return float(np.mean(err * err))


def _subset(X, idx):
    if isinstance(X, tuple):
        return tuple(x[idx] for x in X)
    return X[idx]


def ppo_update(policy: Policy, critic: Critic, buffer: RolloutBuffer, config: TrainConfig,
               rng: np.random.Generator, advantages=None, returns=None) -> dict:
    """Several epochs of minibatch Adam steps on the clipped objective.

    ``policy._adam`` / ``critic._adam`` optimizer state persists across calls.
    """
    if len(buffer) == 0:
        return {"surrogate": 0.0, "value_loss": 0.0, "entropy": gaussian_entropy(policy.log_std),
                "clip_fraction": 0.0, "initial_ratio_dev": 0.0, "minibatch_clip_fractions": [],
                "updates": 0}
    actions, logp_old, rewards, values, dones, ids = buffer.arrays()
    if advantages is None:
        advantages, returns = compute_gae(rewards * config.reward_scale, values, dones, ids,
                                          config.gamma, config.gae_lambda)
    adv = advantages
    if config.normalize_advantages and adv.size > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    X = batch_obs(buffer.obs, policy.variant)
    for net in (policy, critic):
        if getattr(net, "_adam", None) is None:
            net._adam = Adam(net.parameters(), config.learning_rate)

    mean0, ls0 = policy.forward(X)
    initial_ratio_dev = float(np.max(np.abs(np.exp(gaussian_log_prob(mean0, ls0, actions) - logp_old) - 1.0)))

    N = adv.size
    surr_hist, vloss_hist, ent_hist, clip_hist = [], [], [], []
    for _ in range(config.epochs_per_update):
        order = rng.permutation(N)
        for start in range(0, N, config.minibatch_size):
            idx = order[start:start + config.minibatch_size]
            Xb = _subset(X, idx)
            policy.zero_grad()
            critic.zero_grad()
            stats = policy_loss_and_grad(policy, Xb, actions[idx], logp_old[idx], adv[idx],
                                         config.clip_eps, config.entropy_coef)
            vloss = value_loss_and_grad(critic, Xb, returns[idx], config.value_coef)
            if not (np.isfinite(stats["surrogate"]) and np.isfinite(vloss)):
                raise NonFiniteLoss("non-finite PPO loss", {
                    "surrogate": stats["surrogate"], "value_loss": vloss,
                    "log_std": policy.log_std.tolist(),
                    "max_ratio": float(np.max(stats["ratio"]))})
            pg, cg = policy.gradients(), critic.gradients()
            clip_grad_norm(pg, config.max_grad_norm)
            clip_grad_norm(cg, config.max_grad_norm)
            policy._adam.step(pg)
            critic._adam.step(cg)
            policy.clamp_log_std()
            surr_hist.append(stats["surrogate"])
            vloss_hist.append(vloss)
            ent_hist.append(stats["entropy"])
            clip_hist.append(clip_fraction(stats["ratio"], config.clip_eps))
    return {"surrogate": float(np.mean(surr_hist)), "value_loss": float(np.mean(vloss_hist)),
            "entropy": float(np.mean(ent_hist)), "clip_fraction": float(np.mean(clip_hist)),
            "initial_ratio_dev": initial_ratio_dev, "minibatch_clip_fractions": clip_hist,
            "updates": len(clip_hist)}


@dataclass
class IterationRecord:
    iteration: int
    train_ep_len_mean: float
    train_ep_len_std: float
    eval_ep_len_mean: float
    eval_ep_len_std: float
    mean_return: float
    surrogate: float
    value_loss: float
    entropy: float
    clip_fraction: float
    lp_solves: int
    seconds: float


TRAIN_LOG_COLUMNS = [f for f in IterationRecord.__dataclass_fields__]


@dataclass
class TrainResult:
    policy: Policy
    critic: Critic
    best_policy: Policy
    best_critic: Critic
    best_iteration: int
    log: list[IterationRecord]
    config: TrainConfig
    env_config: EnvConfig


def evaluate_policy(policy: Policy, instances, env_config: EnvConfig, seed: int,
                    deterministic=False):
    """Episode lengths (and LP solves) of one episode per instance."""
    return run_episodes(policy, None, list(instances), env_config, seed, deterministic)


def train(train_instances: list[MipInstance], eval_instances: list[MipInstance],
          variant, env_config: EnvConfig, config: TrainConfig, on_iteration=None) -> TrainResult:
    """Collect, estimate advantages, update, and evaluate for ``config.iterations`` rounds.

    The best policy by evaluation EpLenMean is kept alongside the final one.
    """
    if not train_instances or not eval_instances:
        raise ValueError("training and evaluation pools must be non-empty")
    train_keys = {i.digest() for i in train_instances}
    if train_keys & {i.digest() for i in eval_instances}:
        raise ValueError("training and evaluation pools overlap")
    n, m = train_instances[0].n, train_instances[0].m
    if env_config.variant.value != getattr(variant, "value", variant):
        raise ValueError("env_config.variant disagrees with the requested variant")
    master = np.random.SeedSequence(config.seed)
    init_seed, update_seed, rollout_seed, eval_seed = (int(s.generate_state(1)[0]) for s in master.spawn(4))
    policy = Policy(variant, n, m, rng=init_seed)
    critic = Critic(variant, n, m, rng=init_seed + 1)
    upd_rng = np.random.default_rng(update_seed)
    best = (np.inf, None, None, -1)
    records = []
    for it in range(config.iterations):
        t0 = time.perf_counter()
        buf = collect_rollouts(policy, critic, train_instances, env_config,
                               config.episodes_per_iteration, seed=rollout_seed + it)
        stats = ppo_update(policy, critic, buf, config, upd_rng)
        if it % config.eval_every == 0 or it == config.iterations - 1:
            lengths, _ = evaluate_policy(policy, eval_instances, env_config, eval_seed,
                                         config.deterministic_eval)
            ev_mean, ev_std = float(np.mean(lengths)), float(np.std(lengths))
            if ev_mean < best[0]:
                best = (ev_mean, copy.deepcopy(policy), copy.deepcopy(critic), it)
        tl = np.array(buf.episode_lengths, float)
        rec = IterationRecord(
            iteration=it + 1,
            train_ep_len_mean=float(tl.mean()), train_ep_len_std=float(tl.std()),
            eval_ep_len_mean=ev_mean, eval_ep_len_std=ev_std,
            mean_return=float(np.mean(buf.episode_returns)),
            surrogate=stats["surrogate"], value_loss=stats["value_loss"],
            entropy=stats["entropy"], clip_fraction=stats["clip_fraction"],
            lp_solves=buf.lp_solves, seconds=time.perf_counter() - t0)
        for name in ("train_ep_len_mean", "mean_return", "surrogate", "value_loss", "entropy"):
            if not np.isfinite(getattr(rec, name)):
                raise NonFiniteLoss(f"non-finite {name} at iteration {it + 1}", asdict(rec))
        records.append(rec)
        log.info("iter %d train %.2f eval %.2f vloss %.3g", rec.iteration,
                 rec.train_ep_len_mean, rec.eval_ep_len_mean, rec.value_loss)
        if on_iteration is not None:
            on_iteration(rec)
    for net in (policy, critic, best[1], best[2]):
        net.__dict__.pop("_adam", None)
    return TrainResult(policy, critic, best[1], best[2], best[3] + 1, records, config, env_config)
