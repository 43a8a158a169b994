"""Scripted player behaviors: attacker, defender, goalkeeper.

All control is written for the blue perspective (own goal at -x); the
TeamController mirrors the world for the yellow side, which leaves wheel
commands unchanged because the mirror is a rotation by pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .sim import (
    FieldGeometry,
    SimParams,
    Team,
    WheelCommand,
    WorldState,
    ZERO_COMMAND,
    inside_goal_area,
    mirror_world,
    wrap_angle,
)


class Role(Enum):
    ATTACKER = "A"
    DEFENDER = "D"
    GOALKEEPER = "G"


RoleAssignment = tuple[Role, Role, Role]


class Strategy(Enum):
    BALANCED = "balanced"
    OFFENSIVE = "offensive"
    HEAVILY_OFFENSIVE = "heavy"


STRATEGY_ASSIGNMENTS: dict[Strategy, RoleAssignment] = {
    Strategy.BALANCED: (Role.GOALKEEPER, Role.DEFENDER, Role.ATTACKER),
    Strategy.OFFENSIVE: (Role.GOALKEEPER, Role.ATTACKER, Role.ATTACKER),
    Strategy.HEAVILY_OFFENSIVE: (Role.ATTACKER, Role.ATTACKER, Role.ATTACKER),
}


@dataclass(frozen=True)
class BehaviorParams:
    """Gains and placements for the scripted behaviors."""

    kp: float = 5.0
    ki: float = 0.0
    kd: float = 0.5
    keeper_line_offset: float = 0.08    # from the own goal line
    keeper_line_stagger: float = 0.16   # extra keepers hold lines clear of the area
    defender_line_offset: float = 0.45
    keeper_y_extent: float = 0.20
    defender_y_extent: float = 0.55
    area_hold_margin: float = 0.12      # how far outside the area to hold
    clear_ball_speed: float = 0.2       # keeper only clears slow area balls
    line_x_gain: float = 4.0            # 1/s pull back onto the line
    angular_gain: float = 8.0           # rad/s commanded per rad of heading error
    goto_slow_radius: float = 0.10      # full speed beyond this distance
    approach_distance: float = 0.10     # behind the ball, on the ball-goal line
    approach_stagger: float = 0.09      # extra backoff per additional attacker
    lateral_stagger: float = 0.08
    strike_through: float = 0.08        # aim past the ball center when pushing
    target_wall_margin: float = 0.06    # keep waypoints reachable near walls
    wall_ball_zone: float = 0.10        # within this of a wall, push along it
    ball_avoid_radius: float = 0.12     # repositioning paths detour around the ball
    unstick_window: float = 0.5
    unstick_min_displacement: float = 0.01
    unstick_reverse_time: float = 0.3
    segment_gap: float = 0.005          # dead band between shared line segments


@dataclass(frozen=True)
class PidState:
    """PID gains plus the carried integral / previous-error terms."""

    kp: float
    ki: float
    kd: float
    output_limit: float
    integral: float = 0.0
    prev_error: float = 0.0


def pid_step(pid: PidState, error: float, dt: float) -> tuple[float, PidState]:
    """One PID update; returns (clamped output, next state)."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    integral = pid.integral + error * dt
    max_int = pid.output_limit / max(pid.ki, 1e-6)  # anti-windup
    integral = min(max(integral, -max_int), max_int)
    derivative = (error - pid.prev_error) / dt
    out = pid.kp * error + pid.ki * integral + pid.kd * derivative
    out = min(max(out, -pid.output_limit), pid.output_limit)
    return out, replace(pid, integral=integral, prev_error=error)


def _clamp(v: float, lim: float) -> float:
    return min(max(v, -lim), lim)


def drive_towards(heading: float, direction: float, speed: float,
                  bparams: BehaviorParams, sparams: SimParams) -> WheelCommand:
    """Wheel speeds that move the robot at `speed` in `direction`.

    The robot is front/back symmetric: heading errors beyond pi/2 are
    served by driving in reverse instead of turning around.
    """
    err = wrap_angle(direction - heading)
    sign = 1.0
    if abs(err) > 0.5 * math.pi:
        err = wrap_angle(err + math.pi)
        sign = -1.0
    forward = sign * speed * math.cos(err)
    turn = bparams.angular_gain * err * 0.5 * sparams.axle_track
    vmax = sparams.max_wheel_speed
    return WheelCommand(_clamp(forward - turn, vmax), _clamp(forward + turn, vmax))


def goto_point(robot, target: tuple[float, float],
               bparams: BehaviorParams, sparams: SimParams) -> WheelCommand:
    """Drive to a point, slowing down inside `goto_slow_radius`."""
    dx = target[0] - robot.x
    dy = target[1] - robot.y
    dist = math.hypot(dx, dy)
    if dist < 1e-9:
        return ZERO_COMMAND
    speed = sparams.max_wheel_speed * min(1.0, dist / bparams.goto_slow_radius)
    return drive_towards(robot.heading, math.atan2(dy, dx), speed, bparams, sparams)


def attack_direction(bx: float, by: float, field: FieldGeometry,
                     zone: float, shooter_y: float = 1.0) -> tuple[float, float]:
    """Unit direction the ball should be pushed.

    Open-field balls go at the far post (forcing the keeper to move); a
    dead-center ball is shot across from the shooter's own side. Wall
    balls are swept along the wall instead: toward the mouth on the
    opponent goal line, up the field on the side walls, and away from the
    own mouth on the own goal line (corners chain these rules into an
    escape route).
    """
    if bx > field.half_length - zone and abs(by) >= 0.7 * field.goal_half_width:
        return (0.0, -1.0) if by > 0.0 else (0.0, 1.0)
    if abs(by) > field.half_width - zone:
        return (1.0, 0.0)
    if bx < -field.half_length + zone:
        return (0.0, 1.0) if by >= 0.0 else (0.0, -1.0)
    gx, _ = field.opponent_goal_center
    side = -by if abs(by) > 1e-6 else (-shooter_y if abs(shooter_y) > 1e-9 else 1.0)
    aim_y = math.copysign(0.55 * field.goal_half_width, side)
    dx = gx - bx
    dy = aim_y - by
    norm = math.hypot(dx, dy)
    if norm < 1e-9:
        return (1.0, 0.0)
    return (dx / norm, dy / norm)


def _attack_plan(world: WorldState, robot, field: FieldGeometry,
                 bparams: BehaviorParams, backoff_extra: float,
                 lateral: float, force_approach: bool,
                 forbid_own_area: bool) -> tuple[float, float, bool]:
    """Target point plus whether ball contact is intended on the way."""
    bx, by = world.ball.x, world.ball.y
    ux, uy = attack_direction(bx, by, field, bparams.wall_ball_zone, robot.y)
    behind = (bx - robot.x) * ux + (by - robot.y) * uy > 0.0
    contact = True
    if behind and not force_approach:
        tx = bx + ux * bparams.strike_through
        ty = by + uy * bparams.strike_through
    else:
        back = bparams.approach_distance + backoff_extra
        tx = bx - ux * back - uy * lateral
        ty = by - uy * back + ux * lateral
        margin = bparams.target_wall_margin
        tx = min(max(tx, -field.half_length + margin), field.half_length - margin)
        ty = min(max(ty, -field.half_width + margin), field.half_width - margin)
        if math.hypot(tx - bx, ty - by) >= 0.9 * bparams.approach_distance:
            contact = False  # repositioning: must not plow through the ball
    if forbid_own_area:
        # stay clear of the whole defensive band, not just the area
        # rectangle: a wall ball sliding in must not catch us beside it
        edge = (-field.half_length + field.goal_area_depth
                + bparams.area_hold_margin)
        if tx < edge:
            tx = edge
            contact = False
    return (tx, ty, contact)


def attacker_target(world: WorldState, robot, field: FieldGeometry,
                    bparams: BehaviorParams,
                    backoff_extra: float = 0.0,
                    lateral: float = 0.0,
                    force_approach: bool = False,
                    forbid_own_area: bool = False) -> tuple[float, float]:
    """Where the attacker should drive.

    Behind the ball relative to the push direction it drives straight
    through (the target may sit in a wall: pressing is what squeezes wall
    balls along). Otherwise it swings to an approach point behind the
    ball, clamped inside the field; when walls make that point collapse
    onto the ball, it simply rams the ball to knock it loose. With
    `forbid_own_area` the robot holds at the goal-area edge instead of
    chasing in, which would concede the crowding penalty.
    """
    tx, ty, _ = _attack_plan(world, robot, field, bparams, backoff_extra,
                             lateral, force_approach, forbid_own_area)
    return (tx, ty)


def route_around_ball(robot, target: tuple[float, float],
                      ball: tuple[float, float],
                      avoid_radius: float) -> tuple[float, float]:
    """Detour waypoint when the straight path would plow through the ball."""
    dx = target[0] - robot.x
    dy = target[1] - robot.y
    seg = math.hypot(dx, dy)
    if seg < 1e-9:
        return target
    rbx = ball[0] - robot.x
    rby = ball[1] - robot.y
    along = (rbx * dx + rby * dy) / (seg * seg)
    if along <= 0.0 or along >= 1.0:
        return target
    cx = robot.x + along * dx
    cy = robot.y + along * dy
    if math.hypot(cx - ball[0], cy - ball[1]) >= avoid_radius:
        return target
    # swing wide on the side of the path the robot already favors
    side = 1.0 if (dx * rby - dy * rbx) <= 0.0 else -1.0
    px, py = -dy / seg, dx / seg
    return (ball[0] + side * px * 1.5 * avoid_radius,
            ball[1] + side * py * 1.5 * avoid_radius)


@dataclass
class AttackerMemory:
    """Recent motion samples and the reverse timer for the unstick rule."""

    samples: list[tuple[float, float, float]]
    reverse_until: float = -math.inf
    reverse_sign: float = -1.0

    @classmethod
    def fresh(cls) -> "AttackerMemory":
        return cls(samples=[])


def attacker_command(world: WorldState, robot, memory: AttackerMemory,
                     field: FieldGeometry, bparams: BehaviorParams,
                     sparams: SimParams, backoff_extra: float = 0.0,
                     lateral: float = 0.0,
                     force_approach: bool = False,
                     forbid_own_area: bool = False) -> tuple[WheelCommand, AttackerMemory]:
    """Pursue / push the ball, with wall-unstick: if the robot barely moved
    over the last window while commanding speed, back off briefly."""
    now = world.sim_time
    if now < memory.reverse_until:
        v = memory.reverse_sign * 0.5 * sparams.max_wheel_speed
        return WheelCommand(v, v), memory

    slack = 0.5 * sparams.dt  # tick-quantized clocks never hit the window edge exactly
    samples = [s for s in memory.samples if s[0] >= now - bparams.unstick_window - slack]
    samples.append((now, robot.x, robot.y))
    memory = replace(memory, samples=samples)

    tx, ty, contact = _attack_plan(world, robot, field, bparams, backoff_extra,
                                   lateral, force_approach, forbid_own_area)
    if not contact:
        tx, ty = route_around_ball(robot, (tx, ty), world.ball.position,
                                   bparams.ball_avoid_radius)
    cmd = goto_point(robot, (tx, ty), bparams, sparams)
    commanding = max(abs(cmd.left), abs(cmd.right)) > 0.05
    window_covered = samples[0][0] <= now - bparams.unstick_window + slack
    if commanding and window_covered:
        moved = math.hypot(robot.x - samples[0][1], robot.y - samples[0][2])
        if moved < bparams.unstick_min_displacement:
            sign = -1.0 if (cmd.left + cmd.right) >= 0.0 else 1.0
            memory = AttackerMemory(samples=[], reverse_until=now + bparams.unstick_reverse_time,
                                    reverse_sign=sign)
            v = sign * 0.5 * sparams.max_wheel_speed
            return WheelCommand(v, v), memory
    return cmd, memory


def line_keeper_command(world: WorldState, robot, line_x: float,
                        y_min: float, y_max: float, pid: PidState,
                        bparams: BehaviorParams, sparams: SimParams,
                        clear_mode: str = "off",
                        primary_keeper: bool = False,
                        field: FieldGeometry | None = None,
                        ) -> tuple[WheelCommand, PidState]:
    """Hold the vertical line x=line_x, tracking the ball's y via PID.

    The target y is clamped to [y_min, y_max]; the x error adds a
    proportional pull back onto the line, so the desired motion never
    points past the line toward the own goal. `clear_mode` sends the robot
    off the line after balls in its own goal area: "dead" only for slow
    balls, "eager" for any (the primary keeper also challenges live balls
    behind it). Robots clearing together is exactly how the crowding
    penalty gets conceded, which is the cost of stacking defensive roles.
    """
    if (clear_mode != "off" and field is not None
            and inside_goal_area(world.ball.x, world.ball.y, field, Team.BLUE)):
        slow = world.ball.speed < bparams.clear_ball_speed
        goal_side = (primary_keeper and world.ball.x < robot.x + 0.02
                     and abs(world.ball.y) < y_max + 0.08)
        if slow or goal_side or clear_mode == "eager":
            return goto_point(robot, world.ball.position, bparams, sparams), pid
    target_y = min(max(world.ball.y, y_min), y_max)
    out, pid = pid_step(pid, target_y - robot.y, sparams.dt)
    vx = _clamp(bparams.line_x_gain * (line_x - robot.x), sparams.max_wheel_speed)
    vy = out
    speed = math.hypot(vx, vy)
    if speed < 1e-9:
        return ZERO_COMMAND, pid
    if speed > sparams.max_wheel_speed:
        scale = sparams.max_wheel_speed / speed
        vx *= scale
        vy *= scale
        speed = sparams.max_wheel_speed
    cmd = drive_towards(robot.heading, math.atan2(vy, vx), speed, bparams, sparams)
    return cmd, pid


def _split_extent(extent: float, count: int, rank: int,
                  gap: float) -> tuple[float, float]:
    """Disjoint y-segments for robots sharing a line.

    The first robot keeps the central slot (it spawns centrally and must
    stay in the shooting lane); later ranks fill outward, top first.
    """
    if count <= 1:
        return (-extent, extent)
    slot_by_rank = {2: (0, 1), 3: (1, 0, 2)}[count]
    slot = slot_by_rank[rank]
    width = 2.0 * extent / count
    hi = extent - slot * width
    lo = hi - width
    if slot > 0:
        hi -= gap
    if slot < count - 1:
        lo += gap
    return (lo, hi)


class TeamController:
    """Turns (world, role assignment) into three wheel commands.

    Carries per-robot PID states and attacker memories; `reset` clears them.
    Yellow-side control mirrors the world and reuses the blue-frame logic.
    """

    def __init__(self, team: Team, field: FieldGeometry | None = None,
                 sim_params: SimParams | None = None,
                 behavior_params: BehaviorParams | None = None):
        self.team = team
        self.field = field or FieldGeometry()
        self.sparams = sim_params or SimParams()
        self.bparams = behavior_params or BehaviorParams()
        self.reset()

    def reset(self) -> None:
        bp = self.bparams
        limit = self.sparams.max_wheel_speed
        self._pids = [PidState(bp.kp, bp.ki, bp.kd, limit) for _ in range(3)]
        self._memories = [AttackerMemory.fresh() for _ in range(3)]

    def commands(self, world: WorldState,
                 assignment: RoleAssignment) -> list[WheelCommand]:
        if len(assignment) != 3:
            raise ValueError("assignment needs exactly three roles")
        if self.team is Team.YELLOW:
            world = mirror_world(world)
        field = self.field
        bp = self.bparams
        counts = {role: sum(1 for a in assignment if a is role) for role in Role}
        # the goal area admits one robot: the keeper when there is one,
        # otherwise the lead attacker; everyone else holds at the edge
        attackers_may_enter = counts[Role.GOALKEEPER] == 0
        ranks: dict[Role, int] = {role: 0 for role in Role}
        out: list[WheelCommand] = []
        for i, role in enumerate(assignment):
            robot = world.robot(Team.BLUE, i)
            rank = ranks[role]
            ranks[role] += 1
            if role is Role.ATTACKER:
                # only the lead attacker drives through; the rest hold
                # staggered approach points to avoid mobbing the ball
                lateral = (0.0, bp.lateral_stagger, -bp.lateral_stagger)[rank]
                cmd, self._memories[i] = attacker_command(
                    world, robot, self._memories[i], field, bp, self.sparams,
                    backoff_extra=bp.approach_stagger * rank, lateral=lateral,
                    force_approach=rank > 0,
                    forbid_own_area=not (attackers_may_enter and rank == 0))
            else:
                if role is Role.GOALKEEPER:
                    # the lead keeper guards the whole mouth; extra keepers
                    # hold deeper lines, outside the area, like sweepers
                    line_x = (-field.half_length + bp.keeper_line_offset
                              + bp.keeper_line_stagger * rank)
                    if rank == 0:
                        y_min, y_max = -bp.keeper_y_extent, bp.keeper_y_extent
                    else:
                        y_min, y_max = _split_extent(
                            bp.defender_y_extent, counts[role] - 1, rank - 1,
                            bp.segment_gap)
                else:
                    line_x = -field.half_length + bp.defender_line_offset
                    y_min, y_max = _split_extent(
                        bp.defender_y_extent, counts[role], rank,
                        bp.segment_gap)
                primary = role is Role.GOALKEEPER and rank == 0
                cmd, self._pids[i] = line_keeper_command(
                    world, robot, line_x, y_min, y_max, self._pids[i],
                    bp, self.sparams,
                    clear_mode="eager" if role is Role.GOALKEEPER and rank > 0 else "dead",
                    primary_keeper=primary,
                    field=field)
            out.append(cmd)
        return out
