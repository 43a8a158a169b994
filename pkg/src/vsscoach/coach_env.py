"""Coach environment: observation frames, frame stacking, role decoding,
shaped rewards and the decision-step loop over the simulated match."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field as dc_field

import numpy as np

from .behaviors import (
    BehaviorParams,
    Role,
    RoleAssignment,
    Strategy,
    STRATEGY_ASSIGNMENTS,
    TeamController,
)
from .sim import (
    EventKind,
    FieldGeometry,
    Match,
    SimParams,
    Team,
    WorldState,
    initial_world,
)

FRAME_SIZE = 17

# role digits for the 27-action space: robot0 is the most significant digit
ROLE_DIGITS = (Role.ATTACKER, Role.DEFENDER, Role.GOALKEEPER)
N_ACTIONS = 27


def decode_discrete(index: int) -> RoleAssignment:
    """Base-3 decoding of an action index into a role triple."""
    if not 0 <= index < N_ACTIONS:
        raise ValueError(f"action index {index} outside 0..26")
    return (ROLE_DIGITS[index // 9], ROLE_DIGITS[(index // 3) % 3],
            ROLE_DIGITS[index % 3])


def encode_assignment(roles: RoleAssignment) -> int:
    digits = [ROLE_DIGITS.index(r) for r in roles]
    return digits[0] * 9 + digits[1] * 3 + digits[2]


def ball_potential(ball: tuple[float, float], field: FieldGeometry) -> float:
    """Normalized ball closeness to the opponent goal, in [-1, 0]."""
    go = field.own_goal_center
    ga = field.opponent_goal_center
    d_own = math.hypot(ball[0] - go[0], ball[1] - go[1])
    d_opp = math.hypot(ball[0] - ga[0], ball[1] - ga[1])
    span = math.hypot(ga[0] - go[0], ga[1] - go[1])
    return ((d_own - d_opp) / span - 1.0) / 2.0


def potential_reward(bp_now: float, bp_prev: float, dt_coach: float) -> float:
    """Time-rate of change of the ball potential between coach decisions."""
    if dt_coach <= 0.0:
        raise ValueError("dt_coach must be positive")
    return (bp_now - bp_prev) / dt_coach


@dataclass(frozen=True)
class RewardBreakdown:
    shaping: float
    goal_bonus: float
    penalty_bonus: float

    @property
    def total(self) -> float:
        return self.shaping + self.goal_bonus + self.penalty_bonus


def compose_reward(r_p: float, event: EventKind, w_p: float,
                   goal_reward: float = 100.0,
                   concede_reward: float = -100.0,
                   penalty_reward: float = -35.0) -> RewardBreakdown:
    """Shaping plus the event bonus; opponent penalties contribute nothing."""
    goal = 0.0
    penalty = 0.0
    if event is EventKind.GOAL_FOR:
        goal = goal_reward
    elif event is EventKind.GOAL_AGAINST:
        goal = concede_reward
    elif event is EventKind.PENALTY_BY_US:
        penalty = penalty_reward
    return RewardBreakdown(w_p * r_p, goal, penalty)


def build_observation(world: WorldState, team: Team,
                      field: FieldGeometry) -> np.ndarray:
    """17 normalized features: ball, opponents, teammates, teammate headings.

    The frame is always expressed with the observing team's goal at -x;
    the yellow side therefore sees the point-reflected world.
    """
    from .sim import mirror_world

    if team is Team.YELLOW:
        world = mirror_world(world)
    hx, hy = field.half_length, field.half_width
    obs = np.empty(FRAME_SIZE)
    obs[0] = world.ball.x / hx
    obs[1] = world.ball.y / hy
    k = 2
    for r in world.team_robots(Team.YELLOW):
        obs[k] = r.x / hx
        obs[k + 1] = r.y / hy
        k += 2
    mates = world.team_robots(Team.BLUE)
    for r in mates:
        obs[k] = r.x / hx
        obs[k + 1] = r.y / hy
        k += 2
    for r in mates:
        obs[k] = r.heading / math.pi
        k += 1
    return obs


class ObservationStack:
    """Fixed-depth FIFO of frames, newest last; reset fills every slot."""

    def __init__(self, size: int):
        if size < 1:
            raise ValueError("stack needs at least one frame")
        self.size = size
        self._frames: deque[np.ndarray] = deque(maxlen=size)

    def reset(self, frame: np.ndarray) -> None:
        self._frames.clear()
        for _ in range(self.size):
            self._frames.append(frame.copy())

    def push(self, frame: np.ndarray) -> None:
        self._frames.append(frame.copy())

    @property
    def frames(self) -> list[np.ndarray]:
        return list(self._frames)

    def flat(self) -> np.ndarray:
        return np.concatenate(self._frames)


@dataclass
class StepOutcome:
    observation: np.ndarray  # flattened stack
    reward: RewardBreakdown
    done: bool
    info: dict


@dataclass(frozen=True)
class EnvConfig:
    stack_size: int = 4
    decision_ticks: int = 60        # physics ticks per coach decision
    episode_seconds: float = 60.0
    w_p: float = 1.0
    goal_reward: float = 100.0
    concede_reward: float = -100.0
    penalty_reward: float = -35.0
    kickoff_jitter: float = 0.01    # +-1 cm on robot placements at reset
    field: FieldGeometry = dc_field(default_factory=FieldGeometry)
    sim: SimParams = dc_field(default_factory=SimParams)
    behavior: BehaviorParams = dc_field(default_factory=BehaviorParams)

    @property
    def dt_coach(self) -> float:
        return self.decision_ticks * self.sim.dt

    @property
    def steps_per_episode(self) -> int:
        return max(1, round(self.episode_seconds / self.dt_coach))

    @property
    def state_dim(self) -> int:
        return self.stack_size * FRAME_SIZE


class CoachEnv:
    """Step/reset interface for the role-assignment coach (blue side).

    Each step decodes the coach action, holds the role triple for
    `decision_ticks` physics ticks while both teams' behaviors run, and
    returns the stacked observation plus the shaped reward.
    """

    def __init__(self, config: EnvConfig | None = None,
                 rng: np.random.Generator | None = None):
        self.config = config or EnvConfig()
        self.rng = rng or np.random.default_rng()
        c = self.config
        self._blue = TeamController(Team.BLUE, c.field, c.sim, c.behavior)
        self._yellow = TeamController(Team.YELLOW, c.field, c.sim, c.behavior)
        self._stack = ObservationStack(c.stack_size)
        self._match: Match | None = None
        self._opponent = Strategy.BALANCED
        self._opponent_roles: RoleAssignment = STRATEGY_ASSIGNMENTS[Strategy.BALANCED]
        self._done = True
        self._steps = 0
        self._bp_ref = 0.0

    @property
    def opponent(self) -> Strategy:
        return self._opponent

    def reset(self, opponent: Strategy = Strategy.BALANCED) -> np.ndarray:
        c = self.config
        world = initial_world()
        for r in world.robots:
            r.x += self.rng.uniform(-c.kickoff_jitter, c.kickoff_jitter)
            r.y += self.rng.uniform(-c.kickoff_jitter, c.kickoff_jitter)
        self._match = Match(c.field, c.sim, world, reset_rng=self.rng,
                            reset_jitter=c.kickoff_jitter)
        self._blue.reset()
        self._yellow.reset()
        self._opponent = opponent
        self._opponent_roles = STRATEGY_ASSIGNMENTS[opponent]
        self._done = False
        self._steps = 0
        self._bp_ref = ball_potential(self._match.world.ball.position, c.field)
        self._stack.reset(build_observation(self._match.world, Team.BLUE, c.field))
        return self._stack.flat()

    def _decode_action(self, action) -> RoleAssignment:
        if isinstance(action, (int, np.integer)):
            return decode_discrete(int(action))
        values = np.asarray(action, dtype=np.float64)
        if values.shape == (3,):
            from .agents import discretize_output

            return discretize_output(values)
        raise ValueError(f"cannot interpret coach action {action!r}")

    def step(self, action) -> StepOutcome:
        if self._done or self._match is None:
            raise RuntimeError("step called on a finished episode; reset first")
        c = self.config
        roles = self._decode_action(action)
        events: list[EventKind] = []
        goal_bonus = 0.0
        penalty_bonus = 0.0
        our_penalties = 0
        for _ in range(c.decision_ticks):
            commands = self._blue.commands(self._match.world, roles)
            commands += self._yellow.commands(self._match.world, self._opponent_roles)
            event = self._match.tick(commands)
            if event is EventKind.NONE:
                continue
            events.append(event)
            if event is EventKind.GOAL_FOR:
                goal_bonus += c.goal_reward
            elif event is EventKind.GOAL_AGAINST:
                goal_bonus += c.concede_reward
            elif event is EventKind.PENALTY_BY_US:
                penalty_bonus += c.penalty_reward
                our_penalties += 1
            # resets teleport the ball; restart the shaping baseline there
            self._bp_ref = ball_potential(self._match.world.ball.position, c.field)

        bp_now = ball_potential(self._match.world.ball.position, c.field)
        r_p = potential_reward(bp_now, self._bp_ref, c.dt_coach)
        self._bp_ref = bp_now
        reward = RewardBreakdown(c.w_p * r_p, goal_bonus, penalty_bonus)

        self._steps += 1
        self._done = self._steps >= c.steps_per_episode
        self._stack.push(build_observation(self._match.world, Team.BLUE, c.field))
        world = self._match.world
        info = {
            "events": events,
            "score": (world.score_blue, world.score_yellow),
            "sim_time": world.sim_time,
            "roles_applied": roles,
            "our_penalties": our_penalties,
        }
        return StepOutcome(self._stack.flat(), reward, self._done, info)
