import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import evdesign as ev
from evdesign.betting import replay_path

probs = st.floats(min_value=0.01, max_value=0.99)
bets = st.floats(min_value=0.0, max_value=1.0)
evalues = st.floats(min_value=0.0, max_value=100.0)


class TestCapitalUpdate:
    def test_total_loss_of_all_in(self):
        assert ev.capital_update(1.0, 1.0, 0, 0.5) == 0.0

    def test_all_in_doubling(self):
        assert ev.capital_update(10.0, 1.0, 1, 0.5) == 20.0

    def test_direct_arithmetic(self):
        got = ev.capital_update(1.0, 0.158, 1, 0.1)
        assert abs(got - (1.0 + 0.158 * 9.0)) <= 1e-15
        assert abs(got - 2.422) <= 1e-12

    def test_zero_capital_stays_zero(self):
        assert ev.capital_update(0.0, 0.7, 1, 0.2) == 0.0

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            ev.capital_update(1.0, 1.5, 1, 0.5)
        with pytest.raises(ValueError):
            ev.capital_update(1.0, -0.1, 1, 0.5)
        with pytest.raises(ValueError):
            ev.capital_update(1.0, 0.5, 1, 0.0)
        with pytest.raises(ValueError):
            ev.capital_update(1.0, 0.5, 1, 1.0)

    @given(m=evalues, b=bets, theta0=probs)
    def test_martingale_identity(self, m, b, theta0):
        up = ev.capital_update(m, b, 1, theta0)
        down = ev.capital_update(m, b, 0, theta0)
        assert theta0 * up + (1.0 - theta0) * down == pytest.approx(m, rel=1e-12, abs=1e-12)

    @given(m=evalues, b=bets, theta0=probs, frac=st.floats(min_value=0.0, max_value=1.0))
    def test_supermartingale_under_null(self, m, b, theta0, frac):
        theta = theta0 * frac
        up = ev.capital_update(m, b, 1, theta0)
        down = ev.capital_update(m, b, 0, theta0)
        assert theta * up + (1.0 - theta) * down <= m * (1.0 + 1e-12) + 1e-12


class TestKellyBet:
    def test_paper_scenario(self):
        got = ev.kelly_bet(0.1, 0.242)
        assert abs(got - (0.242 - 0.1) / (1.0 - 0.1)) <= 1e-12
        assert got == pytest.approx(0.158, abs=5e-4)

    def test_example3(self):
        assert ev.kelly_bet(0.5, 0.8) == pytest.approx(0.6, abs=1e-12)

    def test_no_edge_no_bet(self):
        assert ev.kelly_bet(0.3, 0.3) == 0.0

    def test_rejects_reversed_order(self):
        with pytest.raises(ValueError):
            ev.kelly_bet(0.4, 0.3)


class TestGrowEvalue:
    def test_empty_product(self):
        assert ev.grow_evalue(0, 0, 0.1, 0.242) == 1.0

    def test_two_wins(self):
        assert ev.grow_evalue(2, 2, 0.1, 0.242) == pytest.approx(5.8564, abs=1e-9)

    @given(
        outcomes=st.lists(st.integers(min_value=0, max_value=1), max_size=30),
        theta0=probs,
        gap=st.floats(min_value=0.0, max_value=0.5),
    )
    def test_matches_constant_kelly_fold(self, outcomes, theta0, gap):
        theta1 = min(theta0 + gap * (1.0 - theta0), 0.99)
        bet = ev.kelly_bet(theta0, theta1)
        m = 1.0
        for y in outcomes:
            m = ev.capital_update(m, bet, y, theta0)
        s = sum(outcomes)
        closed = ev.grow_evalue(s, len(outcomes), theta0, theta1)
        assert m == pytest.approx(closed, rel=1e-12, abs=1e-300)


class TestFormulationEquivalents:
    def test_no_bet(self):
        eq = ev.formulation_equivalents(0.0, 0.1)
        assert eq.lam == 0.0 and eq.q == 0.1

    def test_all_in(self):
        eq = ev.formulation_equivalents(1.0, 0.1)
        assert eq.lam == pytest.approx(10.0, rel=1e-15) and eq.q == 1.0

    def test_example3_bet(self):
        eq = ev.formulation_equivalents(0.6, 0.5)
        assert eq.lam == pytest.approx(1.2, rel=1e-15)
        assert eq.q == pytest.approx(0.8, rel=1e-15)

    @given(
        data=st.lists(
            st.tuples(bets, st.integers(min_value=0, max_value=1)), max_size=8
        ),
        theta0=probs,
    )
    @settings(max_examples=200)
    def test_three_product_forms_agree(self, data, theta0):
        """Capital, ticket, and likelihood-ratio products track each other."""
        m = v = w = 1.0
        for b, y in data:
            eq = ev.formulation_equivalents(b, theta0)
            m = ev.capital_update(m, b, y, theta0)
            v = v * (1.0 + eq.lam * (y - theta0))
            lr = (eq.q / theta0) if y == 1 else (1.0 - eq.q) / (1.0 - theta0)
            w = w * lr
            assert v == pytest.approx(m, rel=1e-12, abs=1e-12)
            assert w == pytest.approx(m, rel=1e-12, abs=1e-12)


class TestGrowthRate:
    def test_zero_bet(self):
        assert ev.growth_rate(0.0, 0.3) == 0.0

    def test_example3_rate(self):
        # 0.91 is the example's rounded bet, so only coarse agreement holds
        assert ev.growth_rate(0.91, 0.5) == pytest.approx(math.log(20.0 / 12.0), abs=2e-3)

    def test_all_in_limit(self):
        assert ev.growth_rate(1.0, 0.1) == pytest.approx(math.log(10.0), rel=1e-15)

    @given(theta0=probs)
    def test_increasing_in_bet(self, theta0):
        grid = np.linspace(0.0, 0.999, 200)
        rates = [ev.growth_rate(b, theta0) for b in grid]
        assert all(b2 > b1 for b1, b2 in zip(rates, rates[1:]))
        assert rates[-1] < math.log(1.0 / theta0)


class TestSolveFinalBet:
    def test_example3(self):
        b = ev.solve_final_bet(12.0, 0.05, 0.5)
        assert 0.905 <= b <= 0.915
        assert abs(ev.growth_rate(b, 0.5) - math.log(1.0 / (0.05 * 12.0))) <= 1e-10

    def test_all_or_nothing_boundary(self):
        assert ev.solve_final_bet(10.0, 0.05, 0.5) == 1.0

    def test_nearly_rejected_needs_nearly_nothing(self):
        # the growth rate is quadratic near b=0, so b* shrinks like sqrt(eps)
        b9 = ev.solve_final_bet(20.0 - 1e-9, 0.05, 0.5)
        b12 = ev.solve_final_bet(20.0 - 1e-12, 0.05, 0.5)
        assert 0.0 < b12 < b9 < 1e-4

    def test_no_solution_in_hopeless_zone(self):
        with pytest.raises(ev.NoSolutionError):
            ev.solve_final_bet(9.99, 0.05, 0.5)

    def test_already_rejected(self):
        with pytest.raises(ev.AlreadyRejectedError):
            ev.solve_final_bet(20.0, 0.05, 0.5)

    def test_conditional_power_jumps_at_boundary(self):
        """Exact two-outcome check: power is theta1 above the boundary, 0 below."""
        m, alpha, theta0, theta1 = 12.0, 0.05, 0.5, 0.8
        blow = ev.final_bet_power_boundary(m, alpha, theta0)
        for b in [blow, 0.7, ev.solve_final_bet(m, alpha, theta0), 1.0]:
            up = ev.capital_update(m, b, 1, theta0)
            down = ev.capital_update(m, b, 0, theta0)
            power = theta1 * (up >= 20.0) + (1 - theta1) * (down >= 20.0)
            assert power == pytest.approx(theta1, abs=1e-15)
        for b in [0.0, 0.3, ev.kelly_bet(theta0, theta1), blow - 1e-9]:
            up = ev.capital_update(m, b, 1, theta0)
            down = ev.capital_update(m, b, 0, theta0)
            assert theta1 * (up >= 20.0) + (1 - theta1) * (down >= 20.0) == 0.0


class TestFinalBetPowerBoundary:
    def test_example3_boundary(self):
        got = ev.final_bet_power_boundary(12.0, 0.05, 0.5)
        assert abs(got - 2.0 / 3.0) <= 1e-12

    def test_all_or_nothing(self):
        assert ev.final_bet_power_boundary(10.0, 0.05, 0.5) == 1.0

    def test_already_at_boundary(self):
        assert ev.final_bet_power_boundary(20.0, 0.05, 0.5) == 0.0


class TestClassifyZone:
    def test_one_doubling_cannot_reach(self):
        spec = ev.DesignSpec(n=10, theta0=0.5, theta1=0.8, alpha=0.05)
        assert ev.classify_zone(ev.EState(9, 0.9), spec) is ev.ZoneLabel.HOPELESS

    def test_almost_hopeless_needs_final_win(self):
        spec = ev.DesignSpec(n=10, theta0=0.5, theta1=0.8, alpha=0.05)
        assert ev.classify_zone(ev.EState(9, 12.0), spec) is ev.ZoneLabel.ALMOST_HOPELESS

    def test_boundary_value_is_almost_hopeless(self):
        # 0.02 = 20 * 0.1^3: three all-in wins reach the boundary exactly
        spec = ev.DesignSpec(n=10, theta0=0.1, theta1=0.242, alpha=0.05)
        assert ev.classify_zone(ev.EState(7, 0.02), spec) is ev.ZoneLabel.ALMOST_HOPELESS

    def test_rejected_and_bankrupt(self):
        spec = ev.DesignSpec(n=10, theta0=0.5, theta1=0.8, alpha=0.05)
        assert ev.classify_zone(ev.EState(3, 20.0), spec) is ev.ZoneLabel.REJECTED
        assert ev.classify_zone(ev.EState(3, 25.0), spec) is ev.ZoneLabel.REJECTED
        assert ev.classify_zone(ev.EState(3, 0.0), spec) is ev.ZoneLabel.BANKRUPT

    def test_open_far_from_boundaries(self):
        spec = ev.DesignSpec(n=10, theta0=0.5, theta1=0.8, alpha=0.05)
        assert ev.classify_zone(ev.EState(0, 1.0), spec) is ev.ZoneLabel.OPEN

    @given(
        t=st.integers(min_value=0, max_value=10),
        m=st.floats(min_value=1e-12, max_value=19.999),
    )
    def test_zone_soundness(self, t, m):
        """All-in betting certifies the hopeless/almost-hopeless split."""
        spec = ev.DesignSpec(n=10, theta0=0.5, theta1=0.8, alpha=0.05)
        zone = ev.classify_zone(ev.EState(t, m), spec)
        best = m * (1.0 / spec.theta0) ** (spec.n - t)
        if zone is ev.ZoneLabel.HOPELESS:
            assert best < 20.0
        elif zone is ev.ZoneLabel.ALMOST_HOPELESS:
            assert best >= 20.0
            # any failure along the all-in streak bankrupts the path
            assert ev.capital_update(m, 1.0, 0, spec.theta0) == 0.0


class TestDiagnosticBounds:
    def test_horizon_endpoint(self, paper_spec):
        bounds = ev.diagnostic_bounds(paper_spec)
        assert bounds.m_upper[-1] == pytest.approx(20.0, rel=1e-12)
        assert bounds.m_lower[-1] == pytest.approx(20.0, rel=1e-12)

    def test_penultimate_value_matches_one_step_rate(self, paper_spec):
        bk = ev.kelly_bet(0.1, 0.242)
        g = 0.242 * math.log(1.0 + bk * 9.0) + 0.758 * math.log(1.0 - bk)
        bounds = ev.diagnostic_bounds(paper_spec)
        assert bounds.m_upper[-2] == pytest.approx(20.0 * math.exp(-g), rel=1e-12)

    def test_monotone_increasing(self, paper_spec):
        bounds = ev.diagnostic_bounds(paper_spec)
        assert np.all(np.diff(bounds.m_upper) > 0)
        assert np.all(np.diff(bounds.m_lower) > 0)


class TestEProcessPath:
    def test_replay_consistency(self):
        path = replay_path([1, 0, 1], [0.5, 0.5, 1.0], 0.5)
        assert path.evalues[0] == 1.0
        assert path.evalues[1] == ev.capital_update(1.0, 0.5, 1, 0.5)
        assert path.successes == [0, 1, 1, 2]

    def test_zero_absorbs(self):
        path = replay_path([0, 1, 1], [1.0, 1.0, 1.0], 0.5)
        assert path.evalues[1:] == [0.0, 0.0, 0.0]
