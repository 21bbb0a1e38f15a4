import numpy as np
import pytest

from ftrl_steering.dynamics import simulate, simulate_dual
from ftrl_steering.game import brockett, modified_rps, rps
from ftrl_steering.mirror import mirror_inverse, project_H
from ftrl_steering.reachability import monotone_witness
from ftrl_steering.steering import (
    SteeringError,
    greedy_steer_multi,
    loop_generators,
    plan_two_player,
    verify_plan,
    verify_plans,
)
from helpers import bundle, random_profile
import oracles as O

U3 = np.full(3, 1 / 3)


def pairs(game, count, seed):
    rng = np.random.default_rng(seed)
    return [(random_profile(game, rng, 0.02), random_profile(game, rng, 0.02)) for _ in range(count)]


class TestExactPlan:
    def test_uniform_to_target(self):
        g = rps(0.0)
        b = bundle(g)
        target = np.array([0.5, 0.3, 0.2])
        plan = plan_two_player(g, b, U3, target)
        assert len(plan.schedule) == 1 and plan.duration > 0
        # independent oracle: d = P_H log(target), solve the bordered system by hand
        d = O.center(np.log(target))
        system = np.vstack([O.rps_projected(0.0), np.ones(3)])
        w, *_ = np.linalg.lstsq(system, np.append(d, 0.0), rcond=None)
        np.testing.assert_allclose(plan.displacement, d, atol=1e-12)
        np.testing.assert_allclose(plan.w, w, atol=1e-10)
        np.testing.assert_allclose(plan.predicted, target, atol=1e-12)
        assert verify_plan(g, b, U3, plan) < 1e-3
        end = simulate(g, b, U3, plan.schedule).endpoint
        assert np.max(np.abs(end - target)) < 1e-3

    def test_identity(self):
        g = rps(0.5)
        x0 = np.array([0.2, 0.3, 0.5])
        plan = plan_two_player(g, bundle(g), x0, x0)
        assert plan.duration == 0 and len(plan.schedule) == 0
        np.testing.assert_array_equal(plan.predicted, x0)
        assert verify_plan(g, bundle(g), x0, plan) == 0.0

    def test_fifty_pairs(self):
        g = rps(0.5)
        b = bundle(g)
        ps = pairs(g, 50, 3)
        plans = [plan_two_player(g, b, x0, xt) for x0, xt in ps]
        errs = verify_plans(g, b, np.stack([p[0] for p in ps]), plans)
        targets = np.stack([p[1] for p in ps])
        ends = np.stack([p.predicted for p in plans])
        assert np.max(errs) < 1e-3
        assert np.max(np.abs(ends - targets)) < 1e-9

    def test_feasibility(self):
        for g in (rps(0.0), rps(-0.7)):
            b = bundle(g)
            for x0, xt in pairs(g, 30, 5):
                for margin in (0.05, 0.1, 0.5):
                    plan = plan_two_player(g, b, x0, xt, margin)
                    (u, t), = plan.schedule.segments
                    assert abs(u.sum() - 1) < 1e-12
                    assert u.min() >= margin * plan.u0.min() - 1e-12
                    assert u.min() == pytest.approx(margin * plan.u0[np.argmin(u / plan.u0)], abs=1e-9)
                    assert abs(plan.w.sum()) < 1e-10

    def test_dual_linear_exactness(self):
        g = rps(0.0)
        b = bundle(g)
        for x0, xt in pairs(g, 10, 8):
            plan = plan_two_player(g, b, x0, xt)
            (u, t), = plan.schedule.segments
            z0 = mirror_inverse(b, x0)
            zt = simulate_dual(g, b, z0, plan.schedule).dual[-1]
            assert np.max(np.abs(zt - z0 - t * O.rps_projected(0.0) @ u)) < 1e-8

    def test_idempotent_replan(self):
        g = rps(0.5)
        b = bundle(g)
        for x0, xt in pairs(g, 10, 11):
            plan = plan_two_player(g, b, x0, xt)
            reached = simulate(g, b, x0, plan.schedule).endpoint
            again = plan_two_player(g, b, reached, xt)
            assert again.duration < 0.05 * plan.duration

    def test_perturbed_start(self):
        g = rps(0.0)
        b = bundle(g)
        x0, xt = np.array([0.3, 0.3, 0.4]), np.array([0.6, 0.25, 0.15])
        plan = plan_two_player(g, b, x0, xt)
        moved = x0 + np.array([1e-2, -0.5e-2, -0.5e-2])
        shift = np.max(np.abs(simulate(g, b, moved, plan.schedule).endpoint - plan.predicted))
        assert 1e-4 < shift < 5e-2

    def test_dt_convergence(self):
        g = rps(0.0)
        b = bundle(g)
        x0, xt = np.array([0.3, 0.3, 0.4]), np.array([0.6, 0.25, 0.15])
        plan = plan_two_player(g, b, x0, xt)
        errs = [verify_plan(g, b, x0, plan, dt) for dt in (0.1, 0.05, 0.025)]
        assert errs[0] / errs[2] >= 8

    def test_rejections(self):
        with pytest.raises(SteeringError):
            plan_two_player(modified_rps(), bundle(modified_rps()), U3, [0.5, 0.3, 0.2])
        with pytest.raises(SteeringError):
            plan_two_player(brockett(), bundle(brockett()), np.full(6, 0.5), np.full(6, 0.5))
        with pytest.raises(ValueError):
            plan_two_player(rps(0.0), bundle(rps(0.0)), U3, [0.5, 0.3, 0.2], margin=1.0)
        with pytest.raises(Exception):
            plan_two_player(rps(0.0), bundle(rps(0.0)), U3, [1.0, 0.0, 0.0])


class TestGreedy:
    def test_identity(self):
        g = brockett()
        x0 = np.full(6, 0.5)
        plan = greedy_steer_multi(g, bundle(g), x0, x0)
        assert len(plan.schedule) == 0 and plan.distance == 0.0 and plan.status == "reached"

    def test_brockett(self):
        g = brockett()
        b = bundle(g)
        x0 = np.full(6, 0.5)
        target = np.array([0.6, 0.4, 0.4, 0.6, 0.55, 0.45])
        plan = greedy_steer_multi(g, b, x0, target, segment_duration=0.1, density=10)
        assert plan.status == "reached" and plan.heuristic
        assert np.all(np.diff(plan.history) < 0)
        end = simulate(g, b, x0, plan.schedule).endpoint
        assert np.max(np.abs(end - target)) < 5e-2
        # soundness: the recorded distance is what re-simulation gives
        tr = simulate_dual(g, b, mirror_inverse(b, x0), plan.schedule)
        assert abs(np.linalg.norm(tr.dual[-1] - mirror_inverse(b, target)) - plan.distance) < 1e-8
        np.testing.assert_allclose(plan.displacement, tr.dual[-1] - mirror_inverse(b, x0), atol=1e-8)

    def test_modified_rps_stalls(self):
        g = modified_rps()
        b = bundle(g)
        w = monotone_witness(g).w
        x0 = np.array([0.3, 0.4, 0.3])
        # push the target against the witness: lower <w, z> than at the start
        target = b.choice(mirror_inverse(b, x0) - 0.8 * project_H(w))
        assert mirror_inverse(b, target) @ w < mirror_inverse(b, x0) @ w
        plan = greedy_steer_multi(g, b, x0, target, max_segments=200)
        assert plan.status == "stalled"
        assert plan.distance > 1e-2

    def test_loop_generators(self):
        gens = loop_generators(3)
        assert len(gens) == 6
        np.testing.assert_allclose(gens.sum(axis=1), 1.0)
        refl = 2 / 3 - gens
        for r in refl:
            assert np.any(np.all(np.isclose(gens, r), axis=1))

    def test_bad_tau(self):
        with pytest.raises(ValueError):
            greedy_steer_multi(brockett(), bundle(brockett()), np.full(6, 0.5), np.full(6, 0.5), segment_duration=0)

    def test_two_player_controllable_reaches(self):
        g = rps(0.0)
        plan = greedy_steer_multi(g, bundle(g), U3, np.array([0.5, 0.3, 0.2]), max_segments=300)
        assert plan.status == "reached" and plan.distance < 1e-2
