import math

import numpy as np
import pytest

from vsscoach.behaviors import Role, Strategy
from vsscoach.coach_env import (
    CoachEnv,
    EnvConfig,
    FRAME_SIZE,
    N_ACTIONS,
    ObservationStack,
    RewardBreakdown,
    ball_potential,
    build_observation,
    compose_reward,
    decode_discrete,
    encode_assignment,
    potential_reward,
)
from vsscoach.sim import (
    BallState,
    EventKind,
    FieldGeometry,
    Team,
    initial_world,
    mirror_world,
)

FIELD = FieldGeometry()


class TestBallPotential:
    def test_center(self):
        assert ball_potential((0.0, 0.0), FIELD) == pytest.approx(-0.5, abs=1e-12)

    def test_opponent_goal(self):
        assert ball_potential(FIELD.opponent_goal_center, FIELD) == pytest.approx(0.0, abs=1e-12)

    def test_own_goal(self):
        assert ball_potential(FIELD.own_goal_center, FIELD) == pytest.approx(-1.0, abs=1e-12)

    def test_bounded_over_random_positions(self):
        rng = np.random.default_rng(0)
        xs = rng.uniform(-FIELD.half_length, FIELD.half_length, 10000)
        ys = rng.uniform(-FIELD.half_width, FIELD.half_width, 10000)
        for x, y in zip(xs, ys):
            bp = ball_potential((x, y), FIELD)
            assert -1.0 - 1e-12 <= bp <= 0.0 + 1e-12

    def test_monotone_along_goal_axis(self):
        xs = np.linspace(-FIELD.half_length, FIELD.half_length, 200)
        values = [ball_potential((x, 0.0), FIELD) for x in xs]
        assert all(b > a for a, b in zip(values, values[1:]))


class TestPotentialReward:
    def test_unchanged_is_zero(self):
        assert potential_reward(-0.5, -0.5, 1.0) == 0.0

    def test_forward_motion_positive(self):
        assert potential_reward(-0.4, -0.5, 1.0) == pytest.approx(0.1)

    def test_backward_motion_negative(self):
        assert potential_reward(-0.6, -0.5, 1.0) < 0.0

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            potential_reward(-0.4, -0.5, 0.0)


class TestComposeReward:
    def test_goal_for(self):
        r = compose_reward(0.1, EventKind.GOAL_FOR, 1.0)
        assert r.total == pytest.approx(100.1)

    def test_own_penalty(self):
        r = compose_reward(0.0, EventKind.PENALTY_BY_US, 1.0)
        assert r.total == pytest.approx(-35.0)

    def test_goal_against(self):
        r = compose_reward(0.0, EventKind.GOAL_AGAINST, 1.0)
        assert r.total == pytest.approx(-100.0)

    def test_their_penalty_contributes_nothing(self):
        r = compose_reward(0.05, EventKind.PENALTY_BY_THEM, 1.0)
        assert r.total == pytest.approx(0.05)

    def test_breakdown_sums(self):
        r = RewardBreakdown(shaping=0.2, goal_bonus=100.0, penalty_bonus=-35.0)
        assert r.total == pytest.approx(65.2)


class TestActionSpace:
    def test_endpoints(self):
        assert decode_discrete(0) == (Role.ATTACKER,) * 3
        assert decode_discrete(26) == (Role.GOALKEEPER,) * 3

    def test_thirteen_is_all_defenders(self):
        # 13 = 1*9 + 1*3 + 1 in base 3, digit map 1 -> defender
        assert decode_discrete(13) == (Role.DEFENDER,) * 3

    def test_bijection(self):
        seen = set()
        for idx in range(N_ACTIONS):
            roles = decode_discrete(idx)
            assert encode_assignment(roles) == idx
            seen.add(roles)
        assert len(seen) == N_ACTIONS

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            decode_discrete(27)
        with pytest.raises(ValueError):
            decode_discrete(-1)


class TestObservation:
    def test_ball_normalization(self):
        w = initial_world()
        w.ball = BallState(0.0, 0.0, 0.0, 0.0)
        obs = build_observation(w, Team.BLUE, FIELD)
        assert obs[0] == 0.0 and obs[1] == 0.0
        w.ball = BallState(FIELD.half_length, FIELD.half_width, 0.0, 0.0)
        obs = build_observation(w, Team.BLUE, FIELD)
        assert obs[0] == pytest.approx(1.0) and obs[1] == pytest.approx(1.0)

    def test_heading_feature(self):
        w = initial_world()
        w.robot(Team.BLUE, 0).heading = math.pi / 2
        obs = build_observation(w, Team.BLUE, FIELD)
        assert obs[14] == pytest.approx(0.5)

    def test_layout_and_size(self):
        w = initial_world()
        obs = build_observation(w, Team.BLUE, FIELD)
        assert obs.shape == (FRAME_SIZE,)
        # opponents come before teammates in the frame
        y0 = w.robot(Team.YELLOW, 0)
        assert obs[2] == pytest.approx(y0.x / FIELD.half_length)
        b0 = w.robot(Team.BLUE, 0)
        assert obs[8] == pytest.approx(b0.x / FIELD.half_length)

    def test_features_in_unit_range(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            w = initial_world()
            w.ball = BallState(rng.uniform(-0.75, 0.75), rng.uniform(-0.65, 0.65), 0, 0)
            for r in w.robots:
                r.x = rng.uniform(-0.7, 0.7)
                r.y = rng.uniform(-0.6, 0.6)
                r.heading = rng.uniform(-math.pi, math.pi)
            for team in Team:
                obs = build_observation(w, team, FIELD)
                assert np.all(np.abs(obs) <= 1.0 + 1e-9)

    def test_perspective_invariance(self):
        rng = np.random.default_rng(2)
        w = initial_world()
        w.ball = BallState(0.2, -0.3, 0.1, 0.0)
        for r in w.robots:
            r.x = rng.uniform(-0.7, 0.7)
            r.y = rng.uniform(-0.6, 0.6)
            r.heading = rng.uniform(-math.pi, math.pi)
        blue_view = build_observation(w, Team.BLUE, FIELD)
        yellow_view_of_mirror = build_observation(mirror_world(w), Team.YELLOW, FIELD)
        assert blue_view == pytest.approx(yellow_view_of_mirror, abs=1e-9)


class TestObservationStack:
    def test_reset_fills_all_slots(self):
        stack = ObservationStack(4)
        frame = np.arange(FRAME_SIZE, dtype=float)
        stack.reset(frame)
        assert len(stack.frames) == 4
        for f in stack.frames:
            assert np.array_equal(f, frame)

    def test_push_evicts_oldest(self):
        stack = ObservationStack(3)
        stack.reset(np.zeros(FRAME_SIZE))
        for k in range(1, 6):
            stack.push(np.full(FRAME_SIZE, float(k)))
        values = [f[0] for f in stack.frames]
        assert values == [3.0, 4.0, 5.0]

    def test_flat_concatenates_oldest_first(self):
        stack = ObservationStack(2)
        stack.reset(np.zeros(FRAME_SIZE))
        stack.push(np.ones(FRAME_SIZE))
        flat = stack.flat()
        assert flat.shape == (2 * FRAME_SIZE,)
        assert flat[0] == 0.0 and flat[-1] == 1.0


class TestCoachEnv:
    def make_env(self, seed=0, **kw):
        cfg = EnvConfig(episode_seconds=kw.pop("episode_seconds", 5.0), **kw)
        return CoachEnv(cfg, np.random.default_rng(seed))

    def test_reset_returns_stacked_observation(self):
        env = self.make_env()
        obs = env.reset(Strategy.BALANCED)
        assert obs.shape == (4 * FRAME_SIZE,)
        frames = obs.reshape(4, FRAME_SIZE)
        assert np.array_equal(frames[0], frames[3])

    def test_reset_seeding(self):
        a = self.make_env(seed=42).reset(Strategy.BALANCED)
        b = self.make_env(seed=42).reset(Strategy.BALANCED)
        c = self.make_env(seed=43).reset(Strategy.BALANCED)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_step_accepts_discrete_and_continuous(self):
        env = self.make_env()
        env.reset(Strategy.BALANCED)
        out = env.step(0)
        assert out.info["roles_applied"] == (Role.ATTACKER,) * 3
        out = env.step(np.array([-1.0, 0.0, 1.0]))
        assert out.info["roles_applied"] == (
            Role.ATTACKER, Role.DEFENDER, Role.GOALKEEPER)

    def test_done_at_time_limit_and_step_after_done(self):
        env = self.make_env(episode_seconds=3.0)
        env.reset(Strategy.BALANCED)
        outs = [env.step(0) for _ in range(3)]
        assert [o.done for o in outs] == [False, False, True]
        with pytest.raises(RuntimeError):
            env.step(0)

    def test_rejects_unknown_action(self):
        env = self.make_env()
        env.reset(Strategy.BALANCED)
        with pytest.raises(ValueError):
            env.step("nonsense")
        with pytest.raises(ValueError):
            env.step(np.zeros(4))

    def test_stack_discipline_over_steps(self):
        env = self.make_env(episode_seconds=10.0)
        obs = env.reset(Strategy.BALANCED)
        prev = obs.reshape(4, FRAME_SIZE).copy()
        for _ in range(3):
            out = env.step(13)
            cur = out.observation.reshape(4, FRAME_SIZE)
            assert np.array_equal(cur[:3], prev[1:])
            prev = cur.copy()

    def test_telescoping_shaping_without_events(self):
        # pinned seed verified event-free; the identity must hold exactly
        cfg = EnvConfig(episode_seconds=10.0, w_p=1.0)
        env = CoachEnv(cfg, np.random.default_rng(4))
        env.reset(Strategy.BALANCED)
        bp_start = ball_potential(env._match.world.ball.position, cfg.field)
        total = 0.0
        done = False
        while not done:
            out = env.step(13)  # all defenders: quiet, event-free play
            assert not out.info["events"], "seed no longer event-free"
            total += out.reward.shaping * cfg.dt_coach
            done = out.done
        bp_end = ball_potential(env._match.world.ball.position, cfg.field)
        assert total == pytest.approx(bp_end - bp_start, abs=1e-9)

    def test_goal_reward_and_reset(self):
        # drive heavy offense against an opponent with no attacker presence
        cfg = EnvConfig(episode_seconds=60.0)
        env = CoachEnv(cfg, np.random.default_rng(3))
        env.reset(Strategy.BALANCED)
        saw_goal = False
        done = False
        while not done:
            out = env.step(0)
            if EventKind.GOAL_FOR in out.info["events"]:
                saw_goal = True
                assert out.reward.goal_bonus >= 100.0
                break
            done = out.done
        assert saw_goal, "offense never scored; reward path untested"

    def test_penalty_reward_toggle(self):
        r = compose_reward(0.0, EventKind.PENALTY_BY_US, 1.0, penalty_reward=0.0)
        assert r.total == 0.0

    def test_attackers_raise_ball_potential_vs_passive_opponent(self):
        # derived sign check: with the opponent idle and off the ball, an
        # all-attacker formation must push the ball toward their goal
        from vsscoach.behaviors import TeamController
        from vsscoach.sim import Match, Team, ZERO_COMMAND

        cfg = EnvConfig()
        match = Match(cfg.field, cfg.sim)
        for r in match.world.team_robots(Team.YELLOW):
            r.x, r.y = 0.55, -0.5 + 0.2 * r.index  # parked off-ball
        blue = TeamController(Team.BLUE, cfg.field, cfg.sim, cfg.behavior)
        bp_start = ball_potential(match.world.ball.position, cfg.field)
        best = bp_start
        for _ in range(300):  # 5 seconds
            cmds = blue.commands(match.world, (Role.ATTACKER,) * 3)
            match.tick(list(cmds) + [ZERO_COMMAND] * 3)
            best = max(best, ball_potential(match.world.ball.position, cfg.field))
        assert best > bp_start + 0.05

    def test_opponent_strategies_change_play(self):
        a = self.make_env(seed=5, episode_seconds=10.0)
        a.reset(Strategy.BALANCED)
        b = self.make_env(seed=5, episode_seconds=10.0)
        b.reset(Strategy.HEAVILY_OFFENSIVE)
        obs_a = [a.step(0).observation for _ in range(3)]
        obs_b = [b.step(0).observation for _ in range(3)]
        assert not np.array_equal(obs_a[-1], obs_b[-1])
