from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import evdesign as ev
from evdesign.grids import TransitionKernel, project_update


class TestEGrid:
    def test_default_size_and_endpoints(self, e_grid):
        assert e_grid.size == 2001
        assert e_grid.values[0] == 0.0
        assert e_grid.values[-1] == 20.0
        assert 1.0 in e_grid.values

    def test_smallest_positive_value(self, e_grid):
        assert e_grid.values[1] == 1e-5

    def test_strictly_increasing(self, e_grid):
        assert np.all(np.diff(e_grid.values) > 0)

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            ev.build_e_grid(0.05, size_log=0)
        with pytest.raises(ValueError):
            ev.build_e_grid(1.5)

    def test_hash_stable(self, e_grid):
        assert e_grid.content_hash == ev.build_e_grid(0.05).content_hash
        assert e_grid.content_hash != ev.build_e_grid(0.1).content_hash


class TestBetGrid:
    def test_default_members(self, bet_grid):
        expected = [0.0, 0.0001, 0.001] + [i / 100.0 for i in range(1, 100)] + [
            0.999,
            0.9999,
            1.0,
        ]
        assert bet_grid.values.tolist() == expected
        assert bet_grid.size == len(expected) == 105

    def test_contains_no_bet_and_all_in(self, bet_grid):
        assert 0.0 in bet_grid.values
        assert 1.0 in bet_grid.values

    def test_with_bet_inserts(self, bet_grid):
        kelly = ev.kelly_bet(0.1, 0.242)
        bigger = bet_grid.with_bet(kelly)
        assert bigger.size == bet_grid.size + 1
        assert bigger.index_of(kelly) >= 0
        assert bigger.with_bet(kelly).size == bigger.size


class TestProjectFloor:
    def test_cap_then_exact_member(self, e_grid):
        assert e_grid.project_floor(20.0) == e_grid.top_index
        assert e_grid.project_floor(1e9) == e_grid.top_index

    def test_exact_member(self, e_grid):
        assert e_grid.values[e_grid.project_floor(1.0)] == 1.0

    def test_below_smallest_positive_floors_to_zero(self, e_grid):
        assert e_grid.project_floor(5e-6) == 0

    def test_idempotence(self, e_grid):
        idx = e_grid.project_floor(e_grid.values)
        assert np.array_equal(idx, np.arange(e_grid.size))

    @given(
        x=st.floats(min_value=0.0, max_value=25.0),
        y=st.floats(min_value=0.0, max_value=25.0),
    )
    def test_monotone(self, x, y):
        e_grid = ev.build_e_grid(0.05)
        if x <= y:
            assert e_grid.project_floor(x) <= e_grid.project_floor(y)

    def test_rejects_negative(self, e_grid):
        with pytest.raises(ValueError):
            e_grid.project_floor(-0.1)


class TestTransitionKernel:
    def test_zero_bet_stays_put(self, e_grid, bet_grid):
        kern = ev.get_kernel(e_grid, bet_grid, 0.1)
        j = bet_grid.index_of(0.0)
        assert np.array_equal(kern.up[j], np.arange(e_grid.size))
        assert np.array_equal(kern.down[j], np.arange(e_grid.size))

    def test_all_in_failure_bankrupts(self, e_grid, bet_grid):
        kern = ev.get_kernel(e_grid, bet_grid, 0.1)
        j = bet_grid.index_of(1.0)
        assert np.all(kern.down[j][1:-1] == 0)

    def test_capped_boundary_hit_lands_on_top(self):
        # custom grid holding 10 exactly: an all-in doubling caps at 20
        grid = ev.EGrid(
            values=np.array([0.0, 0.5, 1.0, 10.0, 20.0]),
            alpha=0.05,
            size_log=0,
            size_lin=0,
        )
        bg = ev.build_bet_grid()
        kern = TransitionKernel(grid, bg, 0.5)
        j = bg.index_of(1.0)
        assert kern.up[j, 3] == grid.top_index

    def test_absorbing_self_loops(self, e_grid, bet_grid):
        kern = ev.get_kernel(e_grid, bet_grid, 0.1)
        top = e_grid.top_index
        assert np.all(kern.up[:, 0] == 0) and np.all(kern.down[:, 0] == 0)
        assert np.all(kern.up[:, top] == top) and np.all(kern.down[:, top] == top)

    def test_matches_scalar_projection(self, e_grid, bet_grid):
        kern = ev.get_kernel(e_grid, bet_grid, 0.1)
        rng = np.random.default_rng(7)
        states = rng.integers(0, e_grid.size, size=300)
        for j, b in enumerate(bet_grid.values):
            for s in states[:50]:
                u, d = project_update(e_grid, int(s), float(b), 0.1)
                assert kern.up[j, s] == u and kern.down[j, s] == d

    def test_transition_kernel_function(self, paper_spec, e_grid):
        dist = ev.transition_kernel(
            e_grid.index_of_one, 3, 0.5, paper_spec.theta1, paper_spec, e_grid
        )
        assert dist.p_up == paper_spec.theta1
        assert e_grid.values[dist.up_index] <= 1.0 * (1.0 + 0.5 * 9.0)
        assert e_grid.values[dist.down_index] <= 0.5

    @pytest.mark.parametrize("theta0", [0.1, 0.5])
    def test_floor_domination_exact(self, e_grid, bet_grid, theta0):
        """grid[up/down] never exceeds the exact real-arithmetic update."""
        kern = ev.get_kernel(e_grid, bet_grid, theta0)
        g = e_grid.values
        cap = Fraction(e_grid.cap)
        for j, b in enumerate(bet_grid.values):
            up_val = np.minimum(g * (1.0 + b * (1.0 / theta0 - 1.0)), e_grid.cap)
            down_val = g * (1.0 - b)
            # float screen first, exact confirmation for near-ties
            close_up = g[kern.up[j]] >= up_val * (1.0 - 1e-9)
            close_dn = g[kern.down[j]] >= down_val * (1.0 - 1e-9)
            mult_up = 1 + Fraction(b) * (1 / Fraction(theta0) - 1)
            mult_dn = 1 - Fraction(b)
            for s in np.flatnonzero(close_up):
                if s in (0, e_grid.top_index):
                    continue
                exact = min(Fraction(g[s]) * mult_up, cap)
                assert Fraction(g[kern.up[j, s]]) <= exact
            for s in np.flatnonzero(close_dn):
                if s in (0, e_grid.top_index):
                    continue
                exact = Fraction(g[s]) * mult_dn
                assert Fraction(g[kern.down[j, s]]) <= exact

    @pytest.mark.parametrize("theta0", [0.1, 0.5])
    def test_discrete_supermartingale_exact(self, e_grid, bet_grid, theta0):
        """theta0*g[up] + (1-theta0)*g[down] <= g[state] for every pair.

        A fast float screen flags candidate violations; each flag is then
        settled in exact rational arithmetic, where none may survive.
        """
        kern = ev.get_kernel(e_grid, bet_grid, theta0)
        g = e_grid.values
        lhs = theta0 * g[kern.up] + (1.0 - theta0) * g[kern.down]
        flagged = np.argwhere(lhs > g[None, :])
        t0 = Fraction(theta0)
        for j, s in flagged:
            lhs_exact = t0 * Fraction(g[kern.up[j, s]]) + (1 - t0) * Fraction(
                g[kern.down[j, s]]
            )
            assert lhs_exact <= Fraction(g[s]), (
                f"supermartingale violated at bet={bet_grid.values[j]}, m={g[s]}"
            )
