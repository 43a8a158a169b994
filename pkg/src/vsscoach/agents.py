"""Coach learners: DDQN over the 27 discrete formations and DDPG over a
continuous triple with threshold discretization, plus replay buffer and
exploration noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .behaviors import Role, RoleAssignment
from .coach_env import N_ACTIONS
from .nets import (
    CheckpointIntegrityError,
    Network,
    adam_init,
    adam_update,
    backward_batch,
    forward,
    forward_batch,
    hard_sync,
    init_network,
    load_params,
    save_params,
    soft_sync,
)


@dataclass
class Transition:
    state: np.ndarray
    action: int | np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity FIFO ring; sampling is uniform with replacement."""

    def __init__(self, capacity: int, rng: np.random.Generator | None = None):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.rng = rng or np.random.default_rng()
        self._storage: list[Transition] = []
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._storage)

    def push(self, t: Transition) -> None:
        if t.state.shape != t.next_state.shape:
            raise ValueError("state/next_state dimensions differ")
        if not np.isfinite(t.reward):
            raise ValueError("non-finite reward")
        if len(self._storage) < self.capacity:
            self._storage.append(t)
        else:
            self._storage[self._cursor] = t
            self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, batch_size: int,
               rng: np.random.Generator | None = None) -> list[Transition]:
        if not self._storage:
            raise ValueError("cannot sample from an empty buffer")
        rng = rng or self.rng
        idx = rng.integers(0, len(self._storage), size=batch_size)
        return [self._storage[i] for i in idx]


class OuNoise:
    """Mean-reverting time-correlated noise for the continuous coach."""

    def __init__(self, size: int = 3, theta: float = 0.15, sigma: float = 0.2,
                 mu: float = 0.0, dt: float = 1.0):
        self.size = size
        self.theta = theta
        self.sigma = sigma
        self.mu = mu
        self.dt = dt
        self.x = np.full(size, mu, dtype=np.float64)

    def reset(self) -> None:
        self.x = np.full(self.size, self.mu, dtype=np.float64)

    def step(self, rng: np.random.Generator) -> np.ndarray:
        self.x = (self.x + self.theta * (self.mu - self.x) * self.dt
                  + self.sigma * np.sqrt(self.dt) * rng.standard_normal(self.size))
        return self.x.copy()


DISCRETIZE_THRESHOLD = 0.34


def discretize_output(values: np.ndarray) -> RoleAssignment:
    """Per-robot thresholds: attacker below -0.34, goalkeeper above +0.34,
    defender in the closed middle band."""
    roles = []
    for v in np.asarray(values, dtype=np.float64):
        if v < -DISCRETIZE_THRESHOLD:
            roles.append(Role.ATTACKER)
        elif v > DISCRETIZE_THRESHOLD:
            roles.append(Role.GOALKEEPER)
        else:
            roles.append(Role.DEFENDER)
    return tuple(roles)


def _batch_arrays(batch: list[Transition]):
    S = np.stack([t.state for t in batch])
    R = np.array([t.reward for t in batch])
    S2 = np.stack([t.next_state for t in batch])
    done = np.array([t.done for t in batch], dtype=np.float64)
    return S, R, S2, done


def ddqn_targets(online: Network, target: Network, batch: list[Transition],
                 gamma: float) -> np.ndarray:
    """Double-Q targets: online net picks the argmax action, target net
    evaluates it; terminal transitions use the raw reward."""
    y = np.empty(len(batch))
    for i, t in enumerate(batch):
        if t.done:
            y[i] = t.reward
            continue
        q_online = forward(online, t.next_state)
        best = int(np.argmax(q_online))
        q_target = forward(target, t.next_state)
        y[i] = t.reward + gamma * q_target[best]
    return y


class DdqnAgent:
    """Discrete coach: epsilon-greedy over 27 formations, double-Q targets,
    periodic hard target syncs."""

    def __init__(self, state_dim: int, n_actions: int = N_ACTIONS,
                 hidden: tuple[int, ...] = (128, 128), gamma: float = 0.95,
                 learning_rate: float = 1e-3, target_period: int = 1000,
                 eps_start: float = 1.0, eps_end: float = 0.05,
                 eps_decay_steps: int = 9000,
                 rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng()
        dims = [state_dim, *hidden, n_actions]
        acts = ["relu"] * len(hidden) + ["linear"]
        self.online = init_network(dims, acts, rng)
        self.target = hard_sync(self.online.copy(), self.online)
        self.opt = adam_init(self.online, learning_rate)
        self.gamma = gamma
        self.n_actions = n_actions
        self.target_period = target_period
        self.eps_start = eps_start
        self.eps_end = eps_end
        self.eps_decay_steps = eps_decay_steps
        self.learn_steps = 0

    def epsilon(self, env_step: int) -> float:
        """Linear schedule from eps_start to eps_end over eps_decay_steps."""
        frac = min(1.0, env_step / max(1, self.eps_decay_steps))
        return self.eps_start + frac * (self.eps_end - self.eps_start)

    def act(self, state: np.ndarray, epsilon: float,
            rng: np.random.Generator) -> int:
        if epsilon > 0.0 and rng.random() < epsilon:
            return int(rng.integers(self.n_actions))
        return int(np.argmax(forward(self.online, state)))

    def compute_targets(self, batch: list[Transition]) -> np.ndarray:
        return ddqn_targets(self.online, self.target, batch, self.gamma)

    def learn(self, batch: list[Transition]) -> float:
        y = self.compute_targets(batch)
        S, _, _, _ = _batch_arrays(batch)
        actions = np.array([t.action for t in batch], dtype=np.intp)
        q_all = forward_batch(self.online, S)
        q_taken = q_all[np.arange(len(batch)), actions]
        err = q_taken - y
        loss = float(np.mean(err ** 2))
        if not np.isfinite(loss):
            raise ValueError(f"non-finite DDQN loss {loss}")
        G = np.zeros_like(q_all)
        G[np.arange(len(batch)), actions] = 2.0 * err / len(batch)
        grads, _ = backward_batch(self.online, S, G)
        adam_update(self.online, grads, self.opt)
        self.learn_steps += 1
        if self.learn_steps % self.target_period == 0:
            self.target = hard_sync(self.target, self.online)
        return loss

    def networks(self) -> dict[str, Network]:
        return {"online": self.online, "target": self.target}


class DdpgAgent:
    """Continuous coach: tanh-bounded actor, critic over (state, action),
    soft target updates every learner step."""

    def __init__(self, state_dim: int, action_dim: int = 3,
                 hidden: tuple[int, ...] = (128, 128), gamma: float = 0.95,
                 actor_lr: float = 1e-4, critic_lr: float = 1e-3,
                 tau_soft: float = 0.005, noise: OuNoise | None = None,
                 rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng()
        relu = ["relu"] * len(hidden)
        self.actor = init_network([state_dim, *hidden, action_dim],
                                  relu + ["tanh"], rng)
        self.critic = init_network([state_dim + action_dim, *hidden, 1],
                                   relu + ["linear"], rng)
        self.actor_target = hard_sync(self.actor.copy(), self.actor)
        self.critic_target = hard_sync(self.critic.copy(), self.critic)
        self.actor_opt = adam_init(self.actor, actor_lr)
        self.critic_opt = adam_init(self.critic, critic_lr)
        self.gamma = gamma
        self.tau_soft = tau_soft
        self.noise = noise or OuNoise(action_dim)
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.learn_steps = 0

    def act(self, state: np.ndarray, rng: np.random.Generator | None = None,
            explore: bool = False) -> np.ndarray:
        a = forward(self.actor, state)
        if explore:
            if rng is None:
                raise ValueError("exploration requires an rng")
            a = a + self.noise.step(rng)
        return np.clip(a, -1.0, 1.0)

    def learn(self, batch: list[Transition]) -> tuple[float, float]:
        S, R, S2, done = _batch_arrays(batch)
        A = np.stack([np.asarray(t.action, dtype=np.float64) for t in batch])
        n = len(batch)

        a2 = forward_batch(self.actor_target, S2)
        q2 = forward_batch(self.critic_target, np.hstack([S2, a2]))[:, 0]
        y = R + self.gamma * (1.0 - done) * q2

        sa = np.hstack([S, A])
        q = forward_batch(self.critic, sa)[:, 0]
        err = q - y
        critic_loss = float(np.mean(err ** 2))
        actor_in = forward_batch(self.actor, S)
        q_actor = forward_batch(self.critic, np.hstack([S, actor_in]))[:, 0]
        actor_loss = float(-np.mean(q_actor))
        if not (np.isfinite(critic_loss) and np.isfinite(actor_loss)):
            raise ValueError(
                f"non-finite DDPG losses critic={critic_loss} actor={actor_loss}")

        grads, _ = backward_batch(self.critic, sa,
                                  (2.0 * err / n)[:, None])
        adam_update(self.critic, grads, self.critic_opt)

        # ascend Q through the action input of the (just updated) critic
        _, d_input = backward_batch(self.critic, np.hstack([S, actor_in]),
                                    np.full((n, 1), -1.0 / n))
        d_action = d_input[:, self.state_dim:]
        actor_grads, _ = backward_batch(self.actor, S, d_action)
        adam_update(self.actor, actor_grads, self.actor_opt)

        self.critic_target = soft_sync(self.critic_target, self.critic, self.tau_soft)
        self.actor_target = soft_sync(self.actor_target, self.actor, self.tau_soft)
        self.learn_steps += 1
        return critic_loss, actor_loss

    def networks(self) -> dict[str, Network]:
        return {"actor": self.actor, "actor_target": self.actor_target,
                "critic": self.critic, "critic_target": self.critic_target}


CHECKPOINT_ALGOS = ("ddqn", "ddpg")
_EXPECTED_NETS = {"ddqn": ("online", "target"),
                  "ddpg": ("actor", "actor_target", "critic", "critic_target")}


def save_agent(path, algo: str, networks: dict[str, Network]) -> None:
    """Write a named bundle of network streams tagged with the algorithm."""
    if algo not in CHECKPOINT_ALGOS:
        raise ValueError(f"unknown algorithm {algo!r}")
    parts = [b"VSCK", bytes([CHECKPOINT_ALGOS.index(algo)]),
             bytes([len(networks)])]
    for name, net in sorted(networks.items()):
        blob = save_params(net)
        encoded = name.encode("ascii")
        parts.append(bytes([len(encoded)]))
        parts.append(encoded)
        parts.append(len(blob).to_bytes(8, "little"))
        parts.append(blob)
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_agent_networks(path, expect_algo: str) -> dict[str, Network]:
    """Read a bundle, checking the algorithm tag and the expected net names."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 6 or data[:4] != b"VSCK":
        raise CheckpointIntegrityError("not an agent checkpoint")
    algo_idx = data[4]
    if algo_idx >= len(CHECKPOINT_ALGOS):
        raise CheckpointIntegrityError(f"unknown algorithm tag {algo_idx}")
    algo = CHECKPOINT_ALGOS[algo_idx]
    if algo != expect_algo:
        raise CheckpointIntegrityError(
            f"checkpoint holds {algo} networks, expected {expect_algo}")
    pos = 5
    count = data[pos]
    pos += 1
    nets_by_name: dict[str, Network] = {}
    for _ in range(count):
        name_len = data[pos]
        pos += 1
        name = data[pos:pos + name_len].decode("ascii")
        pos += name_len
        blob_len = int.from_bytes(data[pos:pos + 8], "little")
        pos += 8
        nets_by_name[name] = load_params(data[pos:pos + blob_len])
        pos += blob_len
    missing = set(_EXPECTED_NETS[algo]) - set(nets_by_name)
    if missing:
        raise CheckpointIntegrityError(f"checkpoint missing networks {sorted(missing)}")
    return nets_by_name


def restore_ddqn(path, gamma: float = 0.95, target_period: int = 1000) -> DdqnAgent:
    nets_by_name = load_agent_networks(path, "ddqn")
    online = nets_by_name["online"]
    agent = DdqnAgent(online.input_dim, online.output_dim, hidden=(1,),
                      gamma=gamma, target_period=target_period,
                      rng=np.random.default_rng(0))
    agent.online = online
    agent.target = nets_by_name["target"]
    agent.opt = adam_init(agent.online, agent.opt.learning_rate)
    return agent


def restore_ddpg(path, gamma: float = 0.95, tau_soft: float = 0.005) -> DdpgAgent:
    nets_by_name = load_agent_networks(path, "ddpg")
    actor = nets_by_name["actor"]
    agent = DdpgAgent(actor.input_dim, actor.output_dim, hidden=(1,),
                      gamma=gamma, tau_soft=tau_soft,
                      rng=np.random.default_rng(0))
    agent.actor = actor
    agent.actor_target = nets_by_name["actor_target"]
    agent.critic = nets_by_name["critic"]
    agent.critic_target = nets_by_name["critic_target"]
    agent.actor_opt = adam_init(agent.actor, agent.actor_opt.learning_rate)
    agent.critic_opt = adam_init(agent.critic, agent.critic_opt.learning_rate)
    agent.state_dim = actor.input_dim
    agent.action_dim = actor.output_dim
    return agent
