"""2D kinematic simulation of a 3v3 small-robot soccer match.

Robots are differential-drive discs, the ball is a damped free disc.
Collisions are resolved positionally (robots) or by velocity transfer
along the contact normal (robot/ball). Everything is deterministic:
the same world, commands and dt always produce the same successor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import NamedTuple, Sequence

TWO_PI = 2.0 * math.pi


class SimulationError(RuntimeError):
    """Raised when a command or state component is non-finite."""


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    elif a > math.pi:
        a -= TWO_PI
    return a


class Team(Enum):
    BLUE = 0
    YELLOW = 1

    @property
    def other(self) -> "Team":
        return Team.YELLOW if self is Team.BLUE else Team.BLUE


class EventKind(Enum):
    """Per-tick match event, from the blue team's perspective."""

    NONE = "none"
    GOAL_FOR = "goal_for"
    GOAL_AGAINST = "goal_against"
    PENALTY_BY_US = "penalty_committed_by_us"
    PENALTY_BY_THEM = "penalty_committed_by_them"


GOAL_EVENTS = (EventKind.GOAL_FOR, EventKind.GOAL_AGAINST)
PENALTY_EVENTS = (EventKind.PENALTY_BY_US, EventKind.PENALTY_BY_THEM)


@dataclass(frozen=True)
class FieldGeometry:
    """Field dimensions in meters. Blue defends the -x goal."""

    half_length: float = 0.75
    half_width: float = 0.65
    goal_half_width: float = 0.20
    goal_depth: float = 0.10
    goal_area_depth: float = 0.15
    goal_area_half_width: float = 0.35
    penalty_mark_distance: float = 0.375
    corner_cut: float = 0.07  # 45-degree wedge legs; keeps corner balls alive

    def __post_init__(self):
        if not self.goal_half_width < self.half_width:
            raise ValueError("goal mouth wider than the field")
        if not self.goal_area_depth < self.half_length:
            raise ValueError("goal area deeper than the half field")

    @property
    def own_goal_center(self) -> tuple[float, float]:
        return (-self.half_length, 0.0)

    @property
    def opponent_goal_center(self) -> tuple[float, float]:
        return (self.half_length, 0.0)

    def goal_center(self, team: Team) -> tuple[float, float]:
        return self.own_goal_center if team is Team.BLUE else self.opponent_goal_center


@dataclass(frozen=True)
class SimParams:
    """Physics constants; defaults give plausible VSSS play speeds."""

    dt: float = 1.0 / 60.0
    robot_radius: float = 0.05
    ball_radius: float = 0.02135
    max_wheel_speed: float = 0.8
    axle_track: float = 0.075
    ball_damping: float = 0.7      # 1/s, exponential velocity decay
    wall_restitution: float = 0.5  # ball only; robots clamp inelastically
    kick_floor: float = 0.12       # minimum outward speed on robot contact
    kick_gain: float = 1.1         # outward speed per m/s of closing speed
    carry_factor: float = 0.5      # share of robot velocity the ball keeps
    ball_speed_max: float = 1.3    # kick cap; stops sandwich re-kick escalation


class WheelCommand(NamedTuple):
    left: float
    right: float


ZERO_COMMAND = WheelCommand(0.0, 0.0)


@dataclass
class RobotState:
    x: float
    y: float
    heading: float  # radians in (-pi, pi]
    vx: float
    vy: float
    team: Team
    index: int

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass
class BallState:
    x: float
    y: float
    vx: float
    vy: float

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


@dataclass
class WorldState:
    """Full kinematic snapshot: 6 robots (blue 0-2 then yellow 0-2), ball, score, clock."""

    robots: list[RobotState]
    ball: BallState
    score_blue: int = 0
    score_yellow: int = 0
    sim_time: float = 0.0
    tick: int = 0

    def robot(self, team: Team, index: int) -> RobotState:
        return self.robots[team.value * 3 + index]

    def team_robots(self, team: Team) -> list[RobotState]:
        base = team.value * 3
        return self.robots[base:base + 3]

    def copy(self) -> "WorldState":
        return WorldState(
            robots=[replace(r) for r in self.robots],
            ball=replace(self.ball),
            score_blue=self.score_blue,
            score_yellow=self.score_yellow,
            sim_time=self.sim_time,
            tick=self.tick,
        )


def mirror_world(world: WorldState) -> WorldState:
    """Point-reflect the world through the center and swap team labels.

    A rotation by pi preserves chirality, so wheel commands computed in the
    mirrored frame apply unchanged in the original one.
    """
    robots = [None] * 6
    for r in world.robots:
        robots[r.team.other.value * 3 + r.index] = RobotState(
            x=-r.x, y=-r.y, heading=wrap_angle(r.heading + math.pi),
            vx=-r.vx, vy=-r.vy, team=r.team.other, index=r.index,
        )
    return WorldState(
        robots=robots,
        ball=BallState(-world.ball.x, -world.ball.y, -world.ball.vx, -world.ball.vy),
        score_blue=world.score_yellow,
        score_yellow=world.score_blue,
        sim_time=world.sim_time,
        tick=world.tick,
    )


def _check_finite(world: WorldState, commands: Sequence[WheelCommand]) -> None:
    for c in commands:
        if not (math.isfinite(c.left) and math.isfinite(c.right)):
            raise SimulationError(f"non-finite wheel command {c}")
    for r in world.robots:
        if not all(map(math.isfinite, (r.x, r.y, r.heading, r.vx, r.vy))):
            raise SimulationError(f"non-finite robot state {r}")
    b = world.ball
    if not all(map(math.isfinite, (b.x, b.y, b.vx, b.vy))):
        raise SimulationError(f"non-finite ball state {b}")


def step_physics(world: WorldState, commands: Sequence[WheelCommand],
                 params: SimParams, field: FieldGeometry,
                 dt: float | None = None) -> WorldState:
    """Advance the world by one tick. Returns a new WorldState.

    Order: drive robots, advance ball (exact exponential damping), resolve
    robot-ball contacts, separate robot pairs, apply walls, bump the clock.
    """
    if dt is None:
        dt = params.dt
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if len(commands) != len(world.robots):
        raise ValueError("need one wheel command per robot")
    _check_finite(world, commands)

    w = world.copy()
    vmax = params.max_wheel_speed

    for r, cmd in zip(w.robots, commands):
        left = min(max(cmd.left, -vmax), vmax)
        right = min(max(cmd.right, -vmax), vmax)
        v = 0.5 * (left + right)
        omega = (right - left) / params.axle_track
        mid = r.heading + 0.5 * omega * dt
        r.vx = v * math.cos(mid)
        r.vy = v * math.sin(mid)
        r.x += r.vx * dt
        r.y += r.vy * dt
        r.heading = wrap_angle(r.heading + omega * dt)

    ball = w.ball
    lam = params.ball_damping
    decay = math.exp(-lam * dt)
    # exact integral of dx/dt = v, dv/dt = -lam * v over the tick
    travel = (1.0 - decay) / lam if lam > 0.0 else dt
    ball.x += ball.vx * travel
    ball.y += ball.vy * travel
    ball.vx *= decay
    ball.vy *= decay

    sep = 2.0 * params.robot_radius
    n = len(w.robots)
    for i in range(n):
        for j in range(i + 1, n):
            a, b = w.robots[i], w.robots[j]
            dx = b.x - a.x
            dy = b.y - a.y
            dist = math.hypot(dx, dy)
            if dist >= sep:
                continue
            if dist < 1e-9:
                nx, ny = 1.0, 0.0
            else:
                nx, ny = dx / dist, dy / dist
            push = 0.5 * (sep - dist)
            a.x -= nx * push
            a.y -= ny * push
            b.x += nx * push
            b.y += ny * push

    rr = params.robot_radius
    corner_limit = field.half_length + field.half_width - field.corner_cut
    for r in w.robots:
        r.x = min(max(r.x, -field.half_length + rr), field.half_length - rr)
        r.y = min(max(r.y, -field.half_width + rr), field.half_width - rr)
        excess = abs(r.x) + abs(r.y) - (corner_limit - rr * math.sqrt(2.0))
        if excess > 0.0:
            r.x -= math.copysign(0.5 * excess, r.x)
            r.y -= math.copysign(0.5 * excess, r.y)

    # the kick comes from the deepest robot-ball contact only (processing
    # every overlap in list order would hand contested balls to whichever
    # team runs last), but the ball is positionally pushed out of everyone
    contact = params.robot_radius + params.ball_radius
    hit = None
    deepest = 0.0
    for r in w.robots:
        dist = math.hypot(ball.x - r.x, ball.y - r.y)
        if dist < contact and contact - dist > deepest:
            deepest = contact - dist
            hit = (r, dist)
    if hit is not None:
        r, dist = hit
        if dist < 1e-9:
            # degenerate overlap: push along the robot's heading
            nx, ny = math.cos(r.heading), math.sin(r.heading)
        else:
            nx, ny = (ball.x - r.x) / dist, (ball.y - r.y) / dist
        # every touch is a kick whose power follows the closing speed, plus
        # a share of robot motion (lets robots sweep balls along walls);
        # grazing contacts only separate gently
        closing = max(0.0, (r.vx - ball.vx) * nx + (r.vy - ball.vy) * ny)
        power = params.kick_floor + params.kick_gain * closing
        ball.vx = nx * power + params.carry_factor * r.vx
        ball.vy = ny * power + params.carry_factor * r.vy
        speed = math.hypot(ball.vx, ball.vy)
        if speed > params.ball_speed_max:
            scale = params.ball_speed_max / speed
            ball.vx *= scale
            ball.vy *= scale
    # push the ball out of remaining overlaps, deepest first so the order
    # is set by geometry rather than team listing
    for _ in range(2):
        overlaps = []
        for idx, r in enumerate(w.robots):
            dist = math.hypot(ball.x - r.x, ball.y - r.y)
            if dist < contact:
                overlaps.append((contact - dist, idx))
        if not overlaps:
            break
        for _, idx in sorted(overlaps, key=lambda t: (-t[0], t[1])):
            r = w.robots[idx]
            dx = ball.x - r.x
            dy = ball.y - r.y
            dist = math.hypot(dx, dy)
            if dist >= contact:
                continue
            if dist < 1e-9:
                dx, dy, dist = math.cos(r.heading), math.sin(r.heading), 1.0
            ball.x = r.x + dx / dist * contact
            ball.y = r.y + dy / dist * contact

    _ball_walls(ball, params, field)

    w.tick += 1
    w.sim_time = w.tick * params.dt if dt == params.dt else w.sim_time + dt
    return w


def _ball_walls(ball: BallState, params: SimParams, field: FieldGeometry) -> None:
    rb = params.ball_radius
    rest = params.wall_restitution
    top = field.half_width - rb
    if ball.y > top:
        ball.y = top
        ball.vy = -abs(ball.vy) * rest
    elif ball.y < -top:
        ball.y = -top
        ball.vy = abs(ball.vy) * rest

    in_mouth = abs(ball.y) < field.goal_half_width
    side = field.half_length - rb
    back = field.half_length + field.goal_depth - rb
    if in_mouth:
        # the ball may cross the goal line, up to the back of the goal
        if ball.x > back:
            ball.x = back
            ball.vx = -abs(ball.vx) * rest
        elif ball.x < -back:
            ball.x = -back
            ball.vx = abs(ball.vx) * rest
    else:
        if ball.x > side:
            ball.x = side
            ball.vx = -abs(ball.vx) * rest
        elif ball.x < -side:
            ball.x = -side
            ball.vx = abs(ball.vx) * rest

    # 45-degree corner wedges reflect the ball back into play
    limit = field.half_length + field.half_width - field.corner_cut - rb * math.sqrt(2.0)
    excess = abs(ball.x) + abs(ball.y) - limit
    if excess > 0.0:
        sx = math.copysign(1.0, ball.x)
        sy = math.copysign(1.0, ball.y)
        ball.x -= sx * 0.5 * excess
        ball.y -= sy * 0.5 * excess
        v_n = (ball.vx * sx + ball.vy * sy) / math.sqrt(2.0)
        if v_n > 0.0:
            scale = (1.0 + rest) * v_n / math.sqrt(2.0)
            ball.vx -= sx * scale
            ball.vy -= sy * scale


def detect_goal(world: WorldState, field: FieldGeometry) -> EventKind:
    """Goal iff the ball center crossed a goal line inside the goal mouth."""
    b = world.ball
    if abs(b.y) < field.goal_half_width:
        if b.x > field.half_length:
            return EventKind.GOAL_FOR
        if b.x < -field.half_length:
            return EventKind.GOAL_AGAINST
    return EventKind.NONE


def inside_goal_area(x: float, y: float, field: FieldGeometry, team: Team) -> bool:
    if abs(y) > field.goal_area_half_width:
        return False
    if team is Team.BLUE:
        return x <= -field.half_length + field.goal_area_depth
    return x >= field.half_length - field.goal_area_depth


def penalty_condition(world: WorldState, field: FieldGeometry, team: Team) -> bool:
    """True iff >= 2 robots of `team` and the ball occupy `team`'s goal area."""
    if not inside_goal_area(world.ball.x, world.ball.y, field, team):
        return False
    defenders = sum(
        1 for r in world.team_robots(team) if inside_goal_area(r.x, r.y, field, team)
    )
    return defenders >= 2


class PenaltyDetector:
    """Debounces the goal-area rule: one event per continuous violation.

    A latched team stays silent until `rearm` (called on any reset).
    """

    def __init__(self, field: FieldGeometry):
        self.field = field
        self._latched: set[Team] = set()

    def rearm(self) -> None:
        self._latched.clear()

    def detect(self, world: WorldState) -> EventKind:
        for team, event in ((Team.BLUE, EventKind.PENALTY_BY_US),
                            (Team.YELLOW, EventKind.PENALTY_BY_THEM)):
            if team in self._latched:
                continue
            if penalty_condition(world, self.field, team):
                self._latched.add(team)
                return event
        return EventKind.NONE


# Kickoff poses for the blue team (x, y, heading); yellow mirrors across x=0.
# Robots 0 and 2 sit on the centerline so kickoff duels stay even-handed.
_BLUE_KICKOFF = (
    (-0.65, 0.00, 0.0),
    (-0.30, 0.25, 0.0),
    (-0.14, 0.00, 0.0),
)


def kickoff_poses(team: Team) -> list[tuple[float, float, float]]:
    if team is Team.BLUE:
        return [p for p in _BLUE_KICKOFF]
    return [(-x, y, wrap_angle(math.pi - h)) for x, y, h in _BLUE_KICKOFF]


def _placed_robots() -> list[RobotState]:
    robots = []
    for team in (Team.BLUE, Team.YELLOW):
        for i, (x, y, h) in enumerate(kickoff_poses(team)):
            robots.append(RobotState(x=x, y=y, heading=h, vx=0.0, vy=0.0,
                                     team=team, index=i))
    return robots


def initial_world() -> WorldState:
    """Fresh match: kickoff poses, ball at center, zero score and clock."""
    return WorldState(robots=_placed_robots(), ball=BallState(0.0, 0.0, 0.0, 0.0))


def reset_kickoff(world: WorldState, conceding: Team) -> WorldState:
    """Restart after a goal: center ball, kickoff poses, score and clock kept.

    `conceding` is accepted for symmetry with match rules; the restart
    placement itself is the same for either side.
    """
    del conceding
    return WorldState(
        robots=_placed_robots(),
        ball=BallState(0.0, 0.0, 0.0, 0.0),
        score_blue=world.score_blue,
        score_yellow=world.score_yellow,
        sim_time=world.sim_time,
        tick=world.tick,
    )


def reset_penalty(world: WorldState, offender: Team,
                  field: FieldGeometry) -> WorldState:
    """Restart after a penalty: ball on the offender's mark, one opposing
    kicker 0.10 m behind it facing the offender's goal, everyone else at
    kickoff poses."""
    mark_x = field.penalty_mark_distance - field.half_length
    facing = math.pi
    if offender is Team.YELLOW:
        mark_x = -mark_x
        facing = 0.0
    robots = _placed_robots()
    kicker = robots[offender.other.value * 3 + 2]
    kicker.x = mark_x - 0.10 * math.cos(facing)
    kicker.y = 0.0
    kicker.heading = facing
    return WorldState(
        robots=robots,
        ball=BallState(mark_x, 0.0, 0.0, 0.0),
        score_blue=world.score_blue,
        score_yellow=world.score_yellow,
        sim_time=world.sim_time,
        tick=world.tick,
    )


class Match:
    """Owns a world plus the penalty debounce latch and applies match rules.

    `tick` steps physics once, then reports at most one event with goal
    priority, applying the corresponding reset and score update in place.
    With a `reset_rng`, every in-match restart adds +-1 cm of pose noise so
    deterministic play cannot lock into one repeating restart pattern.
    """

    def __init__(self, field: FieldGeometry | None = None,
                 params: SimParams | None = None,
                 world: WorldState | None = None,
                 reset_rng=None, reset_jitter: float = 0.01):
        self.field = field or FieldGeometry()
        self.params = params or SimParams()
        self.world = world.copy() if world is not None else initial_world()
        self._penalties = PenaltyDetector(self.field)
        self._reset_rng = reset_rng
        self._reset_jitter = reset_jitter

    def _jitter_poses(self) -> None:
        if self._reset_rng is None:
            return
        for r in self.world.robots:
            r.x += self._reset_rng.uniform(-self._reset_jitter, self._reset_jitter)
            r.y += self._reset_rng.uniform(-self._reset_jitter, self._reset_jitter)

    def tick(self, commands: Sequence[WheelCommand]) -> EventKind:
        self.world = step_physics(self.world, commands, self.params, self.field)
        event = detect_goal(self.world, self.field)
        if event is EventKind.GOAL_FOR:
            self.world.score_blue += 1
            self.world = reset_kickoff(self.world, Team.YELLOW)
        elif event is EventKind.GOAL_AGAINST:
            self.world.score_yellow += 1
            self.world = reset_kickoff(self.world, Team.BLUE)
        else:
            event = self._penalties.detect(self.world)
            if event is EventKind.PENALTY_BY_US:
                self.world = reset_penalty(self.world, Team.BLUE, self.field)
            elif event is EventKind.PENALTY_BY_THEM:
                self.world = reset_penalty(self.world, Team.YELLOW, self.field)
        if event is not EventKind.NONE:
            self._penalties.rearm()
            self._jitter_poses()
        return event
