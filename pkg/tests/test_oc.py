import math
from fractions import Fraction

import numpy as np
import pytest

import evdesign as ev


class TestForwardOC:
    def test_mass_conservation_and_monotonicity(self, paper_spec, constrained_policy):
        policy, _ = constrained_policy
        for theta in (paper_spec.theta0, paper_spec.theta1):
            profile = ev.forward_oc(policy, theta)
            assert np.all(np.diff(profile.cumulative_rejection) >= -1e-15)
            assert np.all(np.diff(profile.cumulative_futility) >= -1e-15)
            assert profile.cumulative_futility[-1] == profile.cumulative_futility[-2]

    def test_grow_never_stops(self, paper_spec, grow):
        for theta in (paper_spec.theta0, paper_spec.theta1):
            profile = ev.forward_oc(grow, theta)
            assert np.all(profile.cumulative_futility == 0.0)

    def test_anytime_validity(self, paper_spec, pmax_policy, essmin_policy, grow):
        for policy in (pmax_policy[0], essmin_policy[0], grow):
            for theta in (paper_spec.theta0, paper_spec.theta0 / 2.0):
                profile = ev.forward_oc(policy, theta)
                assert profile.final_rejection <= paper_spec.alpha

    def test_matches_oracle_small_n(self, small_spec, small_e_grid, bet_grid):
        policy, _ = ev.solve_pmax(small_spec, small_e_grid, bet_grid)
        forward = ev.forward_oc(policy, small_spec.theta1)
        oracle, _ = ev.brute_force_oracle(policy, small_spec.theta1)
        assert np.allclose(
            forward.cumulative_rejection, oracle.cumulative_rejection, atol=1e-12
        )
        assert np.allclose(
            forward.cumulative_futility, oracle.cumulative_futility, atol=1e-12
        )
        assert np.allclose(forward.ahz_occupancy, oracle.ahz_occupancy, atol=1e-12)
        assert forward.ess == pytest.approx(oracle.ess, abs=1e-12)

    def test_grid_mismatch_rejected(self, paper_spec, pmax_policy):
        policy, _ = pmax_policy
        other = ev.build_e_grid(paper_spec.alpha, size_log=500, size_lin=500)
        with pytest.raises(ev.GridMismatchError):
            ev.forward_oc(policy, paper_spec.theta1, e_grid=other)

    def test_analysis_points_follow_schedule(self, two_stage_spec, two_stage_constrained):
        policy, _ = two_stage_constrained
        profile = ev.forward_oc(policy, two_stage_spec.theta1, spec=two_stage_spec)
        assert profile.analysis_points == [0, 25, 50]


class TestBruteForceOracle:
    def test_refuses_large_n(self, paper_spec, pmax_policy):
        policy, _ = pmax_policy
        with pytest.raises(ValueError):
            ev.brute_force_oracle(policy, paper_spec.theta1)

    def test_one_step_rejection_probability_is_discrete(self, bet_grid):
        """With one outcome the rejection probability is 0, theta, or 1."""
        for alpha, theta0 in [(0.5, 0.5), (0.05, 0.5), (0.3, 0.4)]:
            spec = ev.DesignSpec(n=1, theta0=theta0, theta1=0.8, alpha=alpha)
            eg = ev.build_e_grid(spec.alpha)
            policy, _ = ev.solve_pmax(spec, eg, bet_grid)
            profile, _ = ev.brute_force_oracle(policy, 0.8)
            assert profile.final_rejection in (0.0, 0.8, 1.0)

    def test_all_in_cannot_reach_high_cap(self):
        # three doublings top out at 8, far below 1/alpha = 20
        spec = ev.DesignSpec(n=3, theta0=0.5, theta1=0.8, alpha=0.05)
        eg = ev.build_e_grid(spec.alpha)
        policy = ev.constant_bet_policy(spec, eg, 1.0)
        profile, _ = ev.brute_force_oracle(policy, 0.8)
        assert profile.final_rejection == 0.0


class TestBinomialBaseline:
    def test_paper_scenario_critical_value(self, paper_spec):
        """Exact rational tail sums pin the critical value independently."""
        baseline = ev.binomial_baseline(paper_spec)
        n = paper_spec.n
        t0 = Fraction(1, 10)
        alpha = Fraction(1, 20)

        def tail(k):
            return sum(
                math.comb(n, j) * t0**j * (1 - t0) ** (n - j) for j in range(k, n + 1)
            )

        k = baseline.critical_value
        assert tail(k) <= alpha < tail(k - 1)
        assert k == 10

    def test_power_near_eighty_percent(self, paper_spec):
        baseline = ev.binomial_baseline(paper_spec)
        assert baseline.power_at(0.242) == pytest.approx(0.80, abs=0.02)

    def test_size_bounded_by_alpha(self, paper_spec):
        baseline = ev.binomial_baseline(paper_spec)
        assert baseline.power_at(paper_spec.theta0) <= paper_spec.alpha


class TestConditionalPower:
    def test_absorbed_state(self, paper_spec, pmax_policy):
        policy, _ = pmax_policy
        assert ev.conditional_power(ev.EState(10, 20.0), policy) == 1.0

    def test_hopeless_state(self, paper_spec, pmax_policy):
        policy, _ = pmax_policy
        assert ev.conditional_power(ev.EState(49, 1.0), policy) == 0.0

    def test_example3_final_stage(self, bet_grid):
        spec = ev.DesignSpec(n=10, theta0=0.5, theta1=0.8, alpha=0.05)
        eg = ev.build_e_grid(spec.alpha)
        policy, _ = ev.solve_pmax(spec, eg, bet_grid)
        cp = ev.conditional_power(ev.EState(9, 12.0), policy)
        assert cp == pytest.approx(0.8, abs=1e-12)

    def test_matches_value_recursion(self, small_spec, small_e_grid, bet_grid):
        policy, _ = ev.solve_pmax(small_spec, small_e_grid, bet_grid)
        table = ev.policy_value(policy, small_spec.theta1, ev.PMax())
        for t, m in [(0, 1.0), (2, 0.7), (5, 3.0)]:
            idx = small_e_grid.project_floor(m)
            cp = ev.conditional_power(ev.EState(t, m), policy)
            assert cp == pytest.approx(table.values[t, idx], abs=1e-12)


class TestSimulatePath:
    def test_fixed_seed_is_reproducible(self, paper_spec, pmax_policy):
        policy, _ = pmax_policy
        a = ev.simulate_path(policy, paper_spec.theta1, seed=11)
        b = ev.simulate_path(policy, paper_spec.theta1, seed=11)
        assert a.outcomes == b.outcomes
        assert a.bets == b.bets
        assert a.evalues == b.evalues

    def test_all_successes_never_decrease(self, paper_spec, pmax_policy):
        policy, _ = pmax_policy
        path = ev.simulate_path(policy, 1.0 - 1e-12, seed=5)
        diffs = np.diff(path.evalues)
        assert np.all(diffs >= 0)

    def test_all_in_bankrupts_on_first_failure(self):
        spec = ev.DesignSpec(n=5, theta0=0.5, theta1=0.8, alpha=0.05)
        eg = ev.build_e_grid(spec.alpha)
        policy = ev.constant_bet_policy(spec, eg, 1.0)
        path = ev.simulate_path(policy, 1e-12, seed=0)
        assert path.stop_reason == "bankrupt"
        assert path.evalues[-1] == 0.0
        assert len(path.outcomes) == 1

    def test_shared_outcome_stream_across_strategies(
        self, paper_spec, pmax_policy, essmin_policy, grow
    ):
        for theta in (paper_spec.theta0, paper_spec.theta1):
            paths = [
                ev.simulate_path(pol, theta, seed=42)
                for pol in (pmax_policy[0], essmin_policy[0], grow)
            ]
            shortest = min(len(p.outcomes) for p in paths)
            first = paths[0].outcomes[:shortest]
            assert all(p.outcomes[:shortest] == first for p in paths)

    def test_continuous_dominates_discrete(self, paper_spec, essmin_policy):
        policy, _ = essmin_policy
        for seed in range(50):
            path = ev.simulate_path(policy, paper_spec.theta1, seed=seed)
            cont = np.array(path.evalues)
            disc = np.array(path.evalues_discrete)
            assert np.all(cont >= disc)


class TestGridLowerBound:
    def test_discrete_power_bounds_continuous(self, small_spec, small_e_grid, bet_grid):
        """Replaying bets on the continuous process can only gain power."""
        import itertools

        policy, values = ev.solve_pmax(small_spec, small_e_grid, bet_grid)
        n = small_spec.n
        theta0, theta1 = small_spec.theta0, small_spec.theta1
        cap = small_e_grid.cap
        cont_power = 0.0
        for path in itertools.product((0, 1), repeat=n):
            prob = math.prod(theta1 if y else 1 - theta1 for y in path)
            idx = small_e_grid.index_of_one
            m_cont = 1.0
            hit_cont = False
            for t, y in enumerate(path):
                code = policy.actions[t, idx]
                bet = float(policy.bet_grid.values[code])
                if 0 < idx < small_e_grid.top_index:
                    u, d = ev.project_update(small_e_grid, idx, bet, theta0)
                    nidx = u if y else d
                else:
                    nidx = idx
                    bet = 0.0
                m_cont = ev.capital_update(m_cont, bet, y, theta0)
                idx = nidx
                if m_cont >= cap:
                    hit_cont = True
            if hit_cont:
                cont_power += prob
        assert values.at_start(small_e_grid) <= cont_power + 1e-12
