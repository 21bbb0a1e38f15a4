import numpy as np
import pytest

from ftrl_steering.dynamics import (
    GUARD_EPS,
    ControlSchedule,
    InteriorGuardError,
    equivalence_check,
    simulate,
    simulate_batch,
    simulate_dual,
)
from ftrl_steering.game import GameError, brockett, make_builtin, modified_rps, regulated_matching_pennies, rps
from ftrl_steering.mirror import mirror_inverse, project_H
from helpers import bundle, random_profile
import oracles as O

U3 = np.full(3, 1 / 3)


def mild_schedule(rng, m=3, segments=5, total=10.0, spread=1.0):
    us = (1 - spread) / m + spread * rng.dirichlet(np.ones(m), segments)
    ts = rng.dirichlet(np.ones(segments)) * total
    return ControlSchedule(tuple(zip(us, ts)))


def rmp_reference(flat, u):
    """Replicator field from the printed RMP columns, written out by hand."""
    a, b = flat[0], flat[2]
    v = O.rmp_columns(a, b) @ u
    da = a * (1 - a) * (v[0] - v[1])
    db = b * (1 - b) * (v[2] - v[3])
    return np.array([da, -da, db, -db])


class TestExamples:
    def test_neutral_control_is_stationary(self, rng):
        g = rps(0.0)
        for _ in range(3):
            x0 = random_profile(g, rng)
            tr = simulate(g, bundle(g), x0, ControlSchedule.constant(U3, 5.0))
            assert np.max(np.abs(tr.primal - x0)) < 1e-9

    def test_rmp_closed_orbit(self):
        g = regulated_matching_pennies()
        x0 = np.array([0.6, 0.4, 0.6, 0.4])
        tr = simulate(g, bundle(g), x0, ControlSchedule.constant(U3, 50.0), record_every=1)
        late = tr.times >= 1.0
        assert np.min(np.max(np.abs(tr.primal[late] - x0), axis=1)) < 1e-3

    def test_zero_duration(self):
        g = brockett()
        x0 = np.full(6, 0.5)
        for sched in (ControlSchedule(()), ControlSchedule.constant(U3, 0.0)):
            tr = simulate(g, bundle(g), x0, sched)
            np.testing.assert_array_equal(tr.times, [0.0])
            np.testing.assert_array_equal(tr.primal, [x0])

    def test_against_reference_rk4(self, rng):
        """Second route: hand-written replicator field in the primal chart."""
        g = regulated_matching_pennies()
        x0 = np.array([0.3, 0.7, 0.8, 0.2])
        u = rng.dirichlet(np.ones(3))
        tr = simulate(g, bundle(g), x0, ControlSchedule.constant(u, 3.0), dt=1e-3)
        ref = O.rk4(lambda x: rmp_reference(x, u), x0, 3.0, 1e-3)
        np.testing.assert_allclose(tr.endpoint, ref, atol=1e-8)


class TestDual:
    def test_matches_primal_simulation(self, rng):
        g = regulated_matching_pennies()
        b = bundle(g)
        x0 = random_profile(g, rng, 0.05)
        sched = mild_schedule(rng, total=4.0)
        tr = simulate(g, b, x0, sched)
        dual = simulate_dual(g, b, mirror_inverse(b, x0), sched)
        np.testing.assert_array_equal(tr.times, dual.times)
        assert np.max(np.abs(b.choice(dual.dual) - tr.primal)) < 1e-8
        assert np.max(np.abs(project_H(dual.dual, g.learner_actions) - dual.dual)) < 1e-9

    def test_linear_quadrature(self, rng):
        for g in (rps(0.0), rps(0.5), modified_rps()):
            b = bundle(g)
            z0 = mirror_inverse(b, np.array([0.3, 0.3, 0.4]))
            sched = mild_schedule(rng, total=3.0, spread=0.5)
            pa = project_H(g.payoff_tensors[0].T).T
            expected = z0 + sum(t * pa @ u for u, t in sched.segments)
            assert np.max(np.abs(simulate_dual(g, b, z0, sched).dual[-1] - expected)) < 1e-8

    def test_reversal(self):
        g = rps(0.0)
        b = bundle(g)
        z0 = mirror_inverse(b, np.array([0.2, 0.5, 0.3]))
        sched = ControlSchedule(((np.array([0.6, 0.2, 0.2]), 0.7), (np.array([0.1, 0.5, 0.4]), 1.1)))
        fwd = simulate_dual(g, b, z0, sched).dual[-1]
        rev = simulate_dual(g, b, z0, sched.reversed()).dual[-1]
        assert np.max(np.abs(fwd - rev)) < 1e-8
        # reflecting the controls through the neutralizer undoes the displacement
        back = ControlSchedule(tuple((2 / 3 - u, t) for u, t in sched.reversed().segments))
        home = simulate_dual(g, b, fwd, back).dual[-1]
        assert np.max(np.abs(home - z0)) < 1e-8

    def test_rejects_bad_dual(self):
        g = rps(0.0)
        with pytest.raises(GameError):
            simulate_dual(g, bundle(g), np.array([1.0, 0.0, 0.0]), ControlSchedule.constant(U3, 1))
        with pytest.raises(GameError):
            simulate_dual(g, bundle(g, "squared_norm"), np.array([2.0, -1.0, -1.0]), ControlSchedule.constant(U3, 1))


class TestEquivalence:
    @pytest.mark.parametrize("name,params", [("rps", [0.0]), ("rps", [0.5]), ("modified_rps", []),
                                             ("brockett", []), ("regulated_matching_pennies", [])])
    def test_builtins(self, name, params, rng):
        g = make_builtin(name, params)
        x0 = random_profile(g, rng, 0.1)
        assert equivalence_check(g, bundle(g), x0, mild_schedule(rng, total=10.0, spread=0.5)) < 1e-6

    def test_brockett_squared_norm(self):
        g = brockett()
        rng = np.random.default_rng(7)
        sched = mild_schedule(rng, total=4.0, spread=0.15)
        assert equivalence_check(g, bundle(g, "squared_norm"), np.full(6, 0.5), sched) < 1e-6

    def test_zero_duration(self):
        g = brockett()
        assert equivalence_check(g, bundle(g), np.full(6, 0.5), ControlSchedule(())) == 0.0

    def test_batch_matches_single(self, rng):
        g = regulated_matching_pennies()
        b = bundle(g)
        x0s = np.stack([random_profile(g, rng, 0.05) for _ in range(4)])
        scheds = [mild_schedule(rng, segments=int(k), total=2.0) for k in (1, 2, 3, 5)]
        for chart in ("dual", "primal"):
            runs = simulate_batch(g, b, x0s, scheds, chart=chart)
            for x0, s, r in zip(x0s, scheds, runs):
                single = simulate(g, b, x0, s, chart=chart)
                assert np.max(np.abs(single.endpoint - r.endpoint)) < 1e-9


class TestInvariants:
    def test_normalization_and_interior(self, rng):
        g = brockett()
        tr = simulate(g, bundle(g), random_profile(g, rng), mild_schedule(rng, total=8.0, spread=0.5), record_every=1)
        sums = tr.primal.reshape(len(tr), 3, 2).sum(axis=-1)
        assert np.max(np.abs(sums - 1)) < 1e-9
        assert tr.primal.min() > 0
        assert np.all(np.diff(tr.times) > 0) and tr.times[0] == 0

    def test_boundaries_recorded(self, rng):
        g = rps(0.3)
        sched = ControlSchedule(tuple((rng.dirichlet(np.ones(3)), t) for t in (0.1234, 0.5, 0.0371)))
        tr = simulate(g, bundle(g), U3, sched, dt=0.01, record_every=1000)
        np.testing.assert_allclose(tr.times, [0.0, 0.1234, 0.6234, 0.6605], atol=1e-12)

    def test_flow_additivity(self, rng):
        g = regulated_matching_pennies()
        b = bundle(g)
        x0 = random_profile(g, rng, 0.1)
        u = rng.dirichlet(np.ones(3))
        split = simulate(g, b, x0, ControlSchedule(((u, 0.7), (u, 1.3)))).endpoint
        whole = simulate(g, b, x0, ControlSchedule.constant(u, 2.0)).endpoint
        assert np.max(np.abs(split - whole)) < 1e-9

    def test_step_size_convergence(self):
        g = regulated_matching_pennies()
        b = bundle(g)
        x0 = np.array([0.3, 0.7, 0.8, 0.2])
        sched = ControlSchedule(((np.array([0.2, 0.5, 0.3]), 1.5), (np.array([0.6, 0.1, 0.3]), 1.5)))
        ends = [simulate(g, b, x0, sched, dt=dt).endpoint for dt in (0.1, 0.05, 0.025)]
        d1 = np.max(np.abs(ends[0] - ends[1]))
        d2 = np.max(np.abs(ends[1] - ends[2]))
        assert d1 / d2 > 8

    def test_squared_norm_guard(self):
        g = rps(0.0)
        with pytest.raises(InteriorGuardError) as info:
            simulate(g, bundle(g, "squared_norm"), U3, ControlSchedule.constant([1.0, 0.0, 0.0], 5.0))
        assert 0 < info.value.time < 5.0

    def test_entropy_does_not_trip_guard(self):
        g = rps(0.0)
        tr = simulate(g, bundle(g), U3, ControlSchedule.constant([1.0, 0.0, 0.0], 5.0))
        assert tr.primal.min() > GUARD_EPS

    def test_invalid_inputs(self):
        g = rps(0.0)
        with pytest.raises(GameError):
            simulate(g, bundle(g), [1.0, 0.0, 0.0], ControlSchedule.constant(U3, 1.0))
        with pytest.raises(GameError):
            ControlSchedule.constant([0.5, 0.6, -0.1], 1.0)
        with pytest.raises(GameError):
            ControlSchedule.constant(U3, -1.0)
        with pytest.raises(GameError):
            simulate(g, bundle(g), U3, ControlSchedule.constant([0.5, 0.5], 1.0))
