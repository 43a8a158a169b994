"""Training/evaluation harness: seeded RNG fan-out, episode loops with
opponent rotation, structured step logs, checkpoints and report files."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field as dc_field

import numpy as np
import yaml

from .agents import (
    DdpgAgent,
    DdqnAgent,
    OuNoise,
    ReplayBuffer,
    Transition,
    restore_ddpg,
    restore_ddqn,
    save_agent,
)
from .behaviors import BehaviorParams, Role, RoleAssignment, Strategy
from .coach_env import CoachEnv, EnvConfig, encode_assignment
from .sim import EventKind, FieldGeometry, SimParams

OPPONENT_NAMES = {s.value: s for s in Strategy}

# fixed fan-out order for the per-consumer RNG streams
RNG_STREAMS = ("net_init", "env_jitter", "opponent_draw", "action", "ou", "replay")


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(RNG_STREAMS))
    return {name: np.random.default_rng(child)
            for name, child in zip(RNG_STREAMS, children)}


@dataclass(frozen=True)
class RunConfig:
    algorithm: str = "ddqn"
    seed: int = 0
    episodes: int = 300
    episode_seconds: float = 60.0
    opponents: tuple[str, ...] = ("balanced", "offensive", "heavy")
    out_dir: str = "runs/latest"
    checkpoint_every: int = 100
    # learner
    gamma: float = 0.95
    batch_size: int = 64
    replay_capacity: int = 100_000
    learn_start: int = 1000
    replay_ratio: int = 1       # learner steps per environment step
    hidden: tuple[int, ...] = (128, 128)
    q_lr: float = 1e-3
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    target_period: int = 1000
    tau_soft: float = 0.005
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.5   # schedule spans this fraction of all env steps
    ou_theta: float = 0.15
    ou_sigma: float = 0.2
    ou_dt: float = 1.0
    # environment
    stack_size: int = 4
    decision_ticks: int = 60
    w_p: float = 1.0
    goal_reward: float = 100.0
    concede_reward: float = -100.0
    penalty_reward: float = -35.0
    kickoff_jitter: float = 0.01
    # geometry / physics / behavior overrides (dataclass field -> value)
    field: dict = dc_field(default_factory=dict)
    sim: dict = dc_field(default_factory=dict)
    behavior: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in ("ddqn", "ddpg"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not self.opponents:
            raise ValueError("opponent set must not be empty")
        for name in self.opponents:
            if name not in OPPONENT_NAMES:
                raise ValueError(f"unknown opponent {name!r}")

    def env_config(self, episode_seconds: float | None = None) -> EnvConfig:
        return EnvConfig(
            stack_size=self.stack_size,
            decision_ticks=self.decision_ticks,
            episode_seconds=episode_seconds or self.episode_seconds,
            w_p=self.w_p,
            goal_reward=self.goal_reward,
            concede_reward=self.concede_reward,
            penalty_reward=self.penalty_reward,
            kickoff_jitter=self.kickoff_jitter,
            field=FieldGeometry(**self.field),
            sim=SimParams(**self.sim),
            behavior=BehaviorParams(**self.behavior),
        )

    def canonical_dict(self) -> dict:
        # out_dir stays out so identical runs in different places hash alike
        d = dataclasses.asdict(self)
        d.pop("out_dir")
        d["opponents"] = list(self.opponents)
        d["hidden"] = list(self.hidden)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def load_config(path: str | None = None, **overrides) -> RunConfig:
    """Defaults, then YAML file keys, then keyword overrides."""
    data: dict = {}
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"config file {path} must hold a mapping")
        data.update(loaded)
    data.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "opponents" in data:
        data["opponents"] = tuple(data["opponents"])
    if "hidden" in data:
        data["hidden"] = tuple(data["hidden"])
    return RunConfig(**data)


@dataclass
class EpisodeRecord:
    index: int
    opponent: str
    our_goals: int
    their_goals: int
    our_penalties: int
    step_rewards: list[float]
    actions: list[RoleAssignment]

    @property
    def goal_difference(self) -> int:
        return self.our_goals - self.their_goals


LOG_COLUMNS = ("episode", "step", "opponent", "action_index", "roles",
               "reward_shaping", "reward_goal", "reward_penalty",
               "reward_total", "penalties", "score_ours", "score_theirs",
               "sim_time")


def roles_label(roles: RoleAssignment) -> str:
    return "".join(r.value for r in roles)


class StepLogger:
    """One CSV row per coach step, fixed column schema."""

    def __init__(self, path: str):
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(LOG_COLUMNS)

    def log(self, episode: int, step: int, opponent: str, action_index: int,
            roles: RoleAssignment, reward, penalties: int, score,
            sim_time: float) -> None:
        self._writer.writerow([
            episode, step, opponent, action_index, roles_label(roles),
            repr(reward.shaping), repr(reward.goal_bonus),
            repr(reward.penalty_bonus), repr(reward.total), penalties,
            score[0], score[1], repr(sim_time),
        ])

    def close(self) -> None:
        self._fh.close()


def read_episode_log(path: str) -> list[EpisodeRecord]:
    """Rebuild per-episode records from a step log."""
    letter_to_role = {r.value: r for r in Role}
    records: dict[int, EpisodeRecord] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            ep = int(row["episode"])
            rec = records.get(ep)
            if rec is None:
                rec = EpisodeRecord(ep, row["opponent"], 0, 0, 0, [], [])
                records[ep] = rec
            rec.step_rewards.append(float(row["reward_total"]))
            rec.actions.append(tuple(letter_to_role[c] for c in row["roles"]))
            rec.our_goals = int(row["score_ours"])
            rec.their_goals = int(row["score_theirs"])
            rec.our_penalties += int(row["penalties"])
    return [records[k] for k in sorted(records)]


def _count_penalties(events: list[EventKind]) -> int:
    return sum(1 for e in events if e is EventKind.PENALTY_BY_US)


def make_agent(config: RunConfig, rng: np.random.Generator):
    env_cfg = config.env_config()
    state_dim = env_cfg.state_dim
    if config.algorithm == "ddqn":
        total_steps = config.episodes * env_cfg.steps_per_episode
        return DdqnAgent(state_dim, hidden=config.hidden, gamma=config.gamma,
                         learning_rate=config.q_lr,
                         target_period=config.target_period,
                         eps_start=config.eps_start, eps_end=config.eps_end,
                         eps_decay_steps=max(1, int(total_steps * config.eps_fraction)),
                         rng=rng)
    noise = OuNoise(3, theta=config.ou_theta, sigma=config.ou_sigma,
                    dt=config.ou_dt)
    return DdpgAgent(state_dim, hidden=config.hidden, gamma=config.gamma,
                     actor_lr=config.actor_lr, critic_lr=config.critic_lr,
                     tau_soft=config.tau_soft, noise=noise, rng=rng)


def run_training(config: RunConfig) -> dict:
    """Train one coach; writes manifest.json, episodes.csv and checkpoints.

    Returns paths plus the in-memory episode records.
    """
    os.makedirs(config.out_dir, exist_ok=True)
    streams = rng_streams(config.seed)
    agent = make_agent(config, streams["net_init"])
    buffer = ReplayBuffer(config.replay_capacity, streams["replay"])
    env = CoachEnv(config.env_config(), streams["env_jitter"])

    manifest_path = os.path.join(config.out_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump({"config": config.canonical_dict(),
                   "config_hash": config.config_hash(),
                   "seed": config.seed,
                   "rng_streams": list(RNG_STREAMS)}, fh, indent=2, sort_keys=True)
        fh.write("\n")

    log_path = os.path.join(config.out_dir, "episodes.csv")
    logger = StepLogger(log_path)

    opponents = [OPPONENT_NAMES[name] for name in config.opponents]

    records: list[EpisodeRecord] = []
    env_steps = 0
    checkpoints: list[str] = []
    try:
        for episode in range(config.episodes):
            opponent = opponents[int(streams["opponent_draw"].integers(len(opponents)))]
            state = env.reset(opponent)
            if config.algorithm == "ddpg":
                agent.noise.reset()
            record = EpisodeRecord(episode, opponent.value, 0, 0, 0, [], [])
            done = False
            step = 0
            while not done:
                if config.algorithm == "ddqn":
                    action = agent.act(state, agent.epsilon(env_steps),
                                       streams["action"])
                else:
                    action = agent.act(state, streams["ou"], explore=True)
                outcome = env.step(action)
                buffer.push(Transition(state, action, outcome.reward.total,
                                       outcome.observation, outcome.done))
                state = outcome.observation
                env_steps += 1
                if len(buffer) >= config.learn_start:
                    for _ in range(config.replay_ratio):
                        agent.learn(buffer.sample(config.batch_size))
                roles = outcome.info["roles_applied"]
                logger.log(episode, step, opponent.value, encode_assignment(roles),
                           roles, outcome.reward, outcome.info["our_penalties"],
                           outcome.info["score"], outcome.info["sim_time"])
                record.step_rewards.append(outcome.reward.total)
                record.actions.append(roles)
                record.our_penalties += outcome.info["our_penalties"]
                done = outcome.done
                step += 1
            score = outcome.info["score"]
            record.our_goals, record.their_goals = score
            records.append(record)
            if config.checkpoint_every and (episode + 1) % config.checkpoint_every == 0:
                path = os.path.join(config.out_dir, f"checkpoint_ep{episode + 1:05d}.bin")
                save_agent(path, config.algorithm, agent.networks())
                checkpoints.append(path)
    finally:
        logger.close()

    final_path = os.path.join(config.out_dir, "checkpoint_final.bin")
    save_agent(final_path, config.algorithm, agent.networks())
    checkpoints.append(final_path)
    return {"checkpoint": final_path, "checkpoints": checkpoints,
            "log": log_path, "manifest": manifest_path, "records": records}


class RandomCoach:
    """Uniform-random formation picker, the evaluation baseline."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def act(self, state: np.ndarray) -> int:
        return int(self.rng.integers(27))


class GreedyDdqn:
    def __init__(self, agent: DdqnAgent):
        self.agent = agent
        self._rng = np.random.default_rng(0)  # unused at epsilon 0

    def act(self, state: np.ndarray) -> int:
        return self.agent.act(state, 0.0, self._rng)


class GreedyDdpg:
    def __init__(self, agent: DdpgAgent):
        self.agent = agent

    def act(self, state: np.ndarray) -> np.ndarray:
        return self.agent.act(state, explore=False)


def load_policy(checkpoint: str, algorithm: str):
    if algorithm == "ddqn":
        return GreedyDdqn(restore_ddqn(checkpoint))
    if algorithm == "ddpg":
        return GreedyDdpg(restore_ddpg(checkpoint))
    raise ValueError(f"unknown algorithm {algorithm!r}")


@dataclass
class ScoreTable:
    opponent: str
    matches: int
    mean_ours: float
    std_ours: float
    mean_theirs: float
    std_theirs: float
    wins: int
    draws: int
    losses: int


def summarize_matches(opponent: str,
                      results: list[tuple[int, int]]) -> ScoreTable:
    ours = np.array([r[0] for r in results], dtype=np.float64)
    theirs = np.array([r[1] for r in results], dtype=np.float64)
    ddof = 1 if len(results) > 1 else 0
    return ScoreTable(
        opponent=opponent,
        matches=len(results),
        mean_ours=float(ours.mean()),
        std_ours=float(ours.std(ddof=ddof)),
        mean_theirs=float(theirs.mean()),
        std_theirs=float(theirs.std(ddof=ddof)),
        wins=int(np.sum(ours > theirs)),
        draws=int(np.sum(ours == theirs)),
        losses=int(np.sum(ours < theirs)),
    )


def run_matches(policy, opponent: Strategy, matches: int, seed: int,
                env_config: EnvConfig) -> list[EpisodeRecord]:
    """Frozen-policy matches; one independent child seed per match index."""
    match_seeds = np.random.SeedSequence(seed).spawn(matches)
    records = []
    for m, child in enumerate(match_seeds):
        env = CoachEnv(env_config, np.random.default_rng(child))
        state = env.reset(opponent)
        record = EpisodeRecord(m, opponent.value, 0, 0, 0, [], [])
        done = False
        while not done:
            outcome = env.step(policy.act(state))
            state = outcome.observation
            record.step_rewards.append(outcome.reward.total)
            record.actions.append(outcome.info["roles_applied"])
            record.our_penalties += outcome.info["our_penalties"]
            done = outcome.done
        record.our_goals, record.their_goals = outcome.info["score"]
        records.append(record)
    return records


def run_evaluation(checkpoint: str, algorithm: str, opponent: Strategy,
                   matches: int, seed: int,
                   env_config: EnvConfig) -> tuple[ScoreTable, list[EpisodeRecord]]:
    policy = load_policy(checkpoint, algorithm)
    records = run_matches(policy, opponent, matches, seed, env_config)
    results = [(r.our_goals, r.their_goals) for r in records]
    return summarize_matches(opponent.value, results), records


def windowed_return(step_rewards: list[float], window: int = 15) -> list[float]:
    """Element i is the summed reward over steps i..i+window-1, truncated
    at the episode end."""
    if window < 1:
        raise ValueError("window must be >= 1")
    out = []
    # suffix-difference form keeps it O(n)
    suffix = [0.0] * (len(step_rewards) + 1)
    for i in range(len(step_rewards) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + step_rewards[i]
    for i in range(len(step_rewards)):
        j = min(i + window, len(step_rewards))
        out.append(suffix[i] - suffix[j])
    return out


_ROLE_ORDER = {Role.ATTACKER: 0, Role.DEFENDER: 1, Role.GOALKEEPER: 2}


def formation_label(roles: RoleAssignment) -> str:
    """Order-normalized multiset label, e.g. (D, A, A) -> 'AAD'."""
    return "".join(r.value for r in sorted(roles, key=_ROLE_ORDER.get))


def action_distribution(records: list[EpisodeRecord],
                        top_k: int | None = None) -> list[tuple[str, float]]:
    """Percentage of coach steps spent in each formation, largest first."""
    counts: dict[str, int] = {}
    total = 0
    for rec in records:
        for roles in rec.actions:
            label = formation_label(roles)
            counts[label] = counts.get(label, 0) + 1
            total += 1
    if total == 0:
        raise ValueError("no actions recorded")
    dist = sorted(((label, 100.0 * n / total) for label, n in counts.items()),
                  key=lambda kv: (-kv[1], kv[0]))
    return dist[:top_k] if top_k else dist


def penalty_goal_report(records: list[EpisodeRecord]
                        ) -> tuple[list[tuple[int, int]], float | None]:
    """Per-episode (penalties, goal difference) pairs plus their sample
    correlation; None when either series has zero variance."""
    if not records:
        raise ValueError("no episode records")
    pairs = [(r.our_penalties, r.goal_difference) for r in records]
    pens = np.array([p for p, _ in pairs], dtype=np.float64)
    diffs = np.array([d for _, d in pairs], dtype=np.float64)
    if len(pairs) < 2 or pens.std() == 0.0 or diffs.std() == 0.0:
        return pairs, None
    corr = float(np.corrcoef(pens, diffs)[0, 1])
    return pairs, corr


# Published scores for the FIRASim-based system this trainer was modeled
# after. Not comparable with this simulator (different physics, low-level
# behaviors and opponents); written to reports as context, never asserted.
REFERENCE_SCORES = [
    ("ddqn", "heavy", 2.55, 2.07, 4.17, 2.16),
    ("ddqn", "offensive", 2.03, 1.29, 2.75, 1.77),
    ("ddqn", "balanced", 4.27, 1.52, 1.82, 1.44),
    ("ddpg", "heavy", 3.41, 1.84, 3.41, 1.88),
    ("ddpg", "offensive", 2.62, 1.34, 3.06, 1.52),
    ("ddpg", "balanced", 6.10, 1.86, 1.62, 1.12),
]
REFERENCE_NOTE = (
    "context only: published 30-match scores for the FIRASim-based setup "
    "(incl. a tournament opponent, win/loss ratio ~2.0); not reproducible "
    "here and never asserted"
)


def write_reports(run_dir: str, window: int = 15) -> list[str]:
    """Emit windowed-return, action-distribution, penalty-goal and score
    files next to a run's episodes.csv."""
    log_path = os.path.join(run_dir, "episodes.csv")
    records = read_episode_log(log_path)
    written = []

    path = os.path.join(run_dir, "report_windowed_return.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "step", "windowed_return"])
        for rec in records:
            for i, v in enumerate(windowed_return(rec.step_rewards, window)):
                w.writerow([rec.index, i, repr(v)])
    written.append(path)

    path = os.path.join(run_dir, "report_action_distribution.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["formation", "percent"])
        for label, pct in action_distribution(records):
            w.writerow([label, repr(pct)])
    written.append(path)

    path = os.path.join(run_dir, "report_penalty_goal.csv")
    pairs, corr = penalty_goal_report(records)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "penalties", "goal_difference"])
        for rec, (pen, diff) in zip(records, pairs):
            w.writerow([rec.index, pen, diff])
        w.writerow(["correlation", "" if corr is None else repr(corr), ""])
    written.append(path)

    path = os.path.join(run_dir, "report_score_table.csv")
    by_opponent: dict[str, list[tuple[int, int]]] = {}
    for rec in records:
        by_opponent.setdefault(rec.opponent, []).append(
            (rec.our_goals, rec.their_goals))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["source", "algorithm", "opponent", "matches", "mean_ours",
                    "std_ours", "mean_theirs", "std_theirs", "wins", "draws",
                    "losses"])
        for opponent in sorted(by_opponent):
            t = summarize_matches(opponent, by_opponent[opponent])
            w.writerow(["this_run", "", t.opponent, t.matches,
                        repr(t.mean_ours), repr(t.std_ours),
                        repr(t.mean_theirs), repr(t.std_theirs),
                        t.wins, t.draws, t.losses])
        for algo, opp, mo, so, mt, st in REFERENCE_SCORES:
            w.writerow(["reference", algo, opp, 30, mo, so, mt, st, "", "", ""])
        w.writerow(["note", REFERENCE_NOTE] + [""] * 9)
    written.append(path)
    return written
