import numpy as np
import pytest

from netresil.compensator import synthesize_compensator
from netresil.lti import StateSpace
from netresil.powergrid import design_tracking_controllers
from netresil.sampling import random_networked_system
from netresil.simulate import (DivergenceError, ReferenceSignal, Scenario,
                               StepSizeError, closed_tracking_loop, l2_norm,
                               max_step, run_scenario, simulate)


def decay():
    return StateSpace(-1, 0, 1, 0)


class TestSimulate:
    def test_analytic_exponential(self):
        traj = simulate(decay(), [1.0], None, T=1.0, h=1e-3)
        assert traj.states[-1, 0] == pytest.approx(np.exp(-1.0), abs=1e-7)

    def test_rotation_returns(self):
        rot = StateSpace([[0, 1], [-1, 0]], [[0], [0]], [[1, 0]], 0)
        h = 2 * np.pi / 6283
        traj = simulate(rot, [1.0, 0.0], None, T=2 * np.pi, h=h)
        assert np.abs(traj.states[-1] - [1.0, 0.0]).max() <= 1e-6

    def test_unstable_run_flags_divergence(self):
        traj = simulate(StateSpace(2.0, 0, 1, 0), [1.0], None, T=30.0, h=1e-2)
        assert traj.diverged
        assert np.all(np.isfinite(traj.states))

    def test_step_guard(self):
        with pytest.raises(StepSizeError):
            simulate(StateSpace(-200.0, 0, 1, 0), [1.0], None, T=1.0, h=1e-2)
        assert max_step(np.array([[-200.0]])) == pytest.approx(5e-4)

    def test_fourth_order_convergence(self):
        ref = np.exp(-1.0)
        e1 = abs(simulate(decay(), [1.0], None, T=1.0, h=0.1).states[-1, 0] - ref)
        e2 = abs(simulate(decay(), [1.0], None, T=1.0, h=0.05).states[-1, 0] - ref)
        assert e1 / e2 >= 8.0

    def test_callable_and_constant_inputs_agree(self):
        g = StateSpace(-1, 1, 1, 0)
        t1 = simulate(g, [0.0], np.array([2.0]), T=2.0, h=1e-3)
        t2 = simulate(g, [0.0], lambda t: np.array([2.0]), T=2.0, h=1e-3)
        assert np.abs(t1.states - t2.states).max() <= 1e-12
        assert t1.states[-1, 0] == pytest.approx(2.0 * (1 - np.exp(-2.0)), abs=1e-6)

    def test_stable_decay_bound(self, rng):
        from netresil.sampling import random_stable_statespace

        g = random_stable_statespace(rng, 3)
        sys = StateSpace(g.A, np.zeros((3, 0)), np.eye(3), None)
        x0 = rng.standard_normal(3)
        h = min(1e-2, 0.09 / np.abs(np.linalg.eigvals(g.A)).max())
        traj = simulate(sys, x0, None, T=40.0, h=h, store_every=50)
        assert np.linalg.norm(traj.states[-1]) < 1e-4 * np.linalg.norm(x0)


class TestL2Norm:
    def test_exponential_closed_form(self):
        traj = simulate(decay(), [1.0], None, T=20.0, h=1e-3)
        rep = l2_norm(traj, "states")
        assert rep.value == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-4)
        assert rep.terminal_ratio < 1e-4

    def test_zero_trajectory(self):
        traj = simulate(decay(), [0.0], None, T=1.0, h=1e-3)
        assert l2_norm(traj, "states").value == 0.0

    def test_time_reversal_invariance(self):
        traj = simulate(decay(), [1.0], None, T=5.0, h=1e-3)
        from netresil.simulate import Trajectory

        rev = Trajectory(times=traj.times, states=traj.states[::-1].copy(),
                         comp_states=traj.comp_states, outputs=traj.outputs,
                         inputs=traj.inputs, h=traj.h)
        assert l2_norm(rev, "states").value == pytest.approx(
            l2_norm(traj, "states").value, rel=1e-12)

    def test_divergent_rejected(self):
        traj = simulate(StateSpace(2.0, 0, 1, 0), [1.0], None, T=30.0, h=1e-2)
        with pytest.raises(DivergenceError):
            l2_norm(traj, "states")


class TestReferenceSignal:
    def test_piecewise_levels(self):
        ref = ReferenceSignal(np.array([0.0, 1.0]), np.array([[0.5], [2.0]]))
        assert ref.sample(0.0)[0] == 0.5
        assert ref.sample(0.999)[0] == 0.5
        assert ref.sample(1.0)[0] == 2.0

    def test_validation(self):
        with pytest.raises(ValueError):
            ReferenceSignal(np.array([1.0]), np.array([[0.5]]))   # must start at 0

    def test_random_levels_shared(self, rng):
        ref = ReferenceSignal.random_levels(rng, 10.0, 2.0, 3, shared=True)
        assert ref.levels.shape == (5, 3)
        assert np.all(ref.levels == ref.levels[:, :1])


class TestRunScenario:
    @pytest.fixture
    def setup(self, rng):
        ns = random_networked_system(rng, 2, 2)
        comp = synthesize_compensator(ns)
        k1, k2, _ = design_tracking_controllers(ns, seed=3)
        return ns, comp, (k1.realize(), k2.realize())

    def test_matches_plain_simulate_bitwise(self, setup, rng):
        ns, comp, pair = setup
        x0 = rng.standard_normal(ns.n)
        level = np.full(ns.q, 0.1)
        sc = Scenario(segments=((0.0, "k"),), horizon=5.0, x0=x0, h=1e-3,
                      reference=ReferenceSignal.constant(level))
        traj, reports = run_scenario(ns, comp, sc, {"k": pair})
        loop = closed_tracking_loop(
            __import__("netresil").compensator.attach_compensator(ns, comp),
            pair, (ns.sub1.q, ns.sub2.q))
        z0 = np.zeros(loop.n)
        z0[ns.n:2 * ns.n] = x0
        ref = simulate(loop, z0, level, T=5.0, h=1e-3)
        assert np.array_equal(traj.states, ref.states[:, ns.n:2 * ns.n])
        assert np.array_equal(traj.comp_states, ref.states[:, :ns.n])
        assert len(reports) == 1 and reports[0].stable

    def test_segments_swap_and_carryover(self, setup, rng):
        ns, comp, pair = setup
        sc = Scenario(segments=((0.0, "a"), (2.0, "b")), horizon=4.0,
                      x0=rng.standard_normal(ns.n), h=1e-3,
                      reference=ReferenceSignal.constant(np.zeros(ns.q)))
        lib = {"a": pair, "b": pair}
        traj, reports = run_scenario(ns, comp, sc, lib)
        # same controller under both keys with carryover: identical to one segment
        sc1 = Scenario(segments=((0.0, "a"),), horizon=4.0, x0=sc.x0, h=1e-3,
                       reference=ReferenceSignal.constant(np.zeros(ns.q)))
        traj1, _ = run_scenario(ns, comp, sc1, lib)
        assert np.abs(traj.states - traj1.states).max() <= 1e-12
        assert [r.key for r in reports] == ["a", "b"]

    def test_reset_policy_zeroes_controller(self, setup, rng):
        ns, comp, pair = setup
        x0 = rng.standard_normal(ns.n)
        ref = ReferenceSignal.constant(np.full(ns.q, 0.2))
        sc_keep = Scenario(segments=((0.0, "a"), (1.0, "b")), horizon=2.0, x0=x0,
                           h=1e-3, reference=ref, carryover=True)
        sc_reset = Scenario(segments=((0.0, "a"), (1.0, "b")), horizon=2.0, x0=x0,
                            h=1e-3, reference=ref, carryover=False)
        lib = {"a": pair, "b": pair}
        t_keep, _ = run_scenario(ns, comp, sc_keep, lib)
        t_reset, _ = run_scenario(ns, comp, sc_reset, lib)
        assert np.abs(t_keep.states - t_reset.states).max() > 0

    def test_compensator_state_never_reset(self, setup, rng):
        ns, comp, pair = setup
        sc = Scenario(segments=((0.0, "a"), (1.0, "b")), horizon=2.0,
                      x0=rng.standard_normal(ns.n), h=1e-3,
                      reference=ReferenceSignal.constant(np.full(ns.q, 0.3)),
                      carryover=False)
        traj, _ = run_scenario(ns, comp, sc, {"a": pair, "b": pair})
        k_swap = np.searchsorted(traj.times, 1.0)
        # phi is continuous through the swap (controller state was zeroed)
        dphi = np.abs(np.diff(traj.comp_states[k_swap - 1:k_swap + 1], axis=0))
        assert dphi.max() <= 1e-2 * max(1.0, np.abs(traj.comp_states).max())

    def test_unknown_key_rejected(self, setup):
        ns, comp, pair = setup
        sc = Scenario(segments=((0.0, "missing"),), horizon=1.0,
                      x0=np.zeros(ns.n), h=1e-3)
        with pytest.raises(KeyError):
            run_scenario(ns, comp, sc, {"k": pair})

    def test_uncompensated_run(self, setup, rng):
        ns, comp, pair = setup
        sc = Scenario(segments=((0.0, "k"),), horizon=2.0,
                      x0=rng.standard_normal(ns.n), h=1e-3)
        traj, _ = run_scenario(ns, None, sc, {"k": pair})
        assert traj.comp_states.shape[1] == 0
        assert traj.states.shape[1] == ns.n

    def test_scenario_validation(self):
        with pytest.raises(ValueError):
            Scenario(segments=((1.0, "k"),), horizon=2.0, x0=np.zeros(2))
        with pytest.raises(ValueError):
            Scenario(segments=((0.0, "a"), (0.5, "b"), (0.25, "c")), horizon=2.0,
                     x0=np.zeros(2))
        with pytest.raises(ValueError):
            Scenario(segments=((0.0, "a"),), horizon=-1.0, x0=np.zeros(2))
