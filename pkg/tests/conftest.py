import pytest

import evdesign as ev

PAPER = dict(n=50, theta0=0.1, theta1=0.242, alpha=0.05, beta=0.2)


@pytest.fixture(scope="session")
def paper_spec():
    return ev.DesignSpec(**PAPER)


@pytest.fixture(scope="session")
def e_grid(paper_spec):
    return ev.build_e_grid(paper_spec.alpha)


@pytest.fixture(scope="session")
def bet_grid():
    return ev.build_bet_grid()


@pytest.fixture(scope="session")
def pmax_policy(paper_spec, e_grid, bet_grid):
    policy, values = ev.solve_pmax(paper_spec, e_grid, bet_grid)
    return policy, values


@pytest.fixture(scope="session")
def essmin_policy(paper_spec, e_grid, bet_grid):
    policy, values = ev.solve_essmin(paper_spec, e_grid, bet_grid)
    return policy, values


@pytest.fixture(scope="session")
def constrained_policy(paper_spec, e_grid, bet_grid):
    policy, trace = ev.solve_constrained(paper_spec, e_grid, bet_grid)
    return policy, trace


@pytest.fixture(scope="session")
def grow(paper_spec, e_grid):
    return ev.grow_policy(paper_spec, e_grid)


@pytest.fixture(scope="session")
def two_stage_spec():
    return ev.DesignSpec(blocks=ev.BlockSchedule((25, 25)), **PAPER)


@pytest.fixture(scope="session")
def two_stage_constrained(two_stage_spec, e_grid, bet_grid):
    policy, trace = ev.solve_blocked(
        two_stage_spec,
        e_grid,
        bet_grid,
        ev.Constrained(0.0, schedule=two_stage_spec.blocks),
    )
    return policy, trace


@pytest.fixture(scope="session")
def small_spec():
    return ev.DesignSpec(n=8, theta0=0.3, theta1=0.6, alpha=0.1, beta=0.3)


@pytest.fixture(scope="session")
def small_e_grid(small_spec):
    return ev.build_e_grid(small_spec.alpha)
