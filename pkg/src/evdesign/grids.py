"""Discretization of the e-value range and bet sizes.

The e-grid joins a log-spaced range below 1 with a linear range from 1 up to
the rejection boundary 1/alpha; e-values are projected onto it by flooring,
which keeps the discrete chain a supermartingale under the null and makes
every discrete power value a lower bound on its continuous counterpart.
Transitions are precomputed once per (bet, state) pair since the update rule
does not depend on the stage.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

# Relative slack under which a floored grid value is close enough to the
# floating-point update that rounding could have pushed the update past the
# true real-arithmetic product; such landings get an exact rational check.
_ULP_SCREEN = 1e-12


@dataclass(frozen=True, eq=False)
class EGrid:
    """Strictly increasing e-values containing 0, 1 and 1/alpha exactly."""

    values: np.ndarray
    alpha: float
    size_log: int
    size_lin: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v[0] != 0.0 or np.any(np.diff(v) <= 0):
            raise ValueError("grid must start at 0 and increase strictly")
        cap = 1.0 / self.alpha
        if 1.0 not in v or cap not in v:
            raise ValueError("grid must contain 1 and 1/alpha exactly")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def cap(self) -> float:
        return 1.0 / self.alpha

    @property
    def top_index(self) -> int:
        return len(self.values) - 1

    @property
    def index_of_one(self) -> int:
        return int(np.searchsorted(self.values, 1.0))

    def project_floor(self, x):
        """Index of the largest grid value <= min(x, 1/alpha).

        Values below the smallest positive grid point floor to index 0, i.e.
        capital too small for the grid to represent is treated as exhausted.
        """
        arr = np.asarray(x, dtype=float)
        if np.any(arr < 0.0):
            raise ValueError("e-values must be nonnegative")
        idx = np.searchsorted(self.values, np.minimum(arr, self.cap), side="right") - 1
        return int(idx) if np.isscalar(x) or arr.ndim == 0 else idx.astype(np.int64)

    @property
    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.values.tobytes())
        h.update(np.float64(self.alpha).tobytes())
        return h.hexdigest()


@dataclass(frozen=True, eq=False)
class BetGrid:
    """Strictly increasing bet fractions; must contain 0 and 1."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(np.diff(v) <= 0):
            raise ValueError("bet grid must increase strictly")
        if v[0] != 0.0 or v[-1] != 1.0:
            raise ValueError("bet grid must contain 0 and 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return len(self.values)

    def index_of(self, b: float) -> int:
        idx = int(np.searchsorted(self.values, b))
        if idx >= len(self.values) or self.values[idx] != b:
            raise ValueError(f"bet {b} is not a grid member")
        return idx

    def with_bet(self, b: float) -> "BetGrid":
        """Grid extended with one extra bet value (no-op if already present)."""
        if not 0.0 <= b <= 1.0:
            raise ValueError("bet must lie in [0, 1]")
        return BetGrid(values=np.unique(np.append(self.values, b)))

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(self.values.tobytes()).hexdigest()


def build_e_grid(alpha: float, size_log: int = 1000, size_lin: int = 1000) -> EGrid:
    """Default e-grid: {0}, geometric 1e-5..1-2eps, linear 1..1/alpha.

    Endpoints are included on both ranges and duplicates removed; with the
    default sizes this yields 2001 points.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if size_log < 2 or size_lin < 2:
        raise ValueError("grid sizes must be at least 2")
    eps = np.finfo(float).eps
    log_part = np.geomspace(1e-5, 1.0 - 2.0 * eps, size_log)
    lin_part = np.linspace(1.0, 1.0 / alpha, size_lin)
    values = np.unique(np.concatenate([[0.0], log_part, lin_part]))
    return EGrid(values=values, alpha=alpha, size_log=size_log, size_lin=size_lin)


def build_bet_grid() -> BetGrid:
    """Default bet grid: {0, 1e-4, 1e-3, 0.01, 0.02, ..., 0.99, 0.999, 0.9999, 1}."""
    values = np.array(
        [0.0, 0.0001, 0.001]
        + [i / 100.0 for i in range(1, 100)]
        + [0.999, 0.9999, 1.0]
    )
    return BetGrid(values=values)


@dataclass(frozen=True)
class TransitionDist:
    """One discrete transition: indices reached on success/failure."""

    up_index: int
    down_index: int
    p_up: float


def _exact_le(grid_value: float, m: float, mult_num, cap: float | None) -> bool:
    """grid_value <= min(m * mult, cap) evaluated in exact rational arithmetic."""
    prod = Fraction(m) * mult_num
    if cap is not None:
        prod = min(prod, Fraction(cap))
    return Fraction(grid_value) <= prod


class TransitionKernel:
    """Precomputed floor-projected transitions for all (bet, state) pairs.

    up[j, s] / down[j, s] are the grid indices reached from state s with bet
    bet_grid.values[j] on a success / failure.  Success values are capped at
    1/alpha before projection so boundary hits land exactly on the top grid
    point; states 0 and 1/alpha self-loop.

    Floating-point updates occasionally round up past a grid point that the
    exact real product does not reach; such landings are detected and pushed
    one index down, so grid[up] and grid[down] never exceed the exact
    continuous update and the discrete chain stays a supermartingale.
    """

    def __init__(self, e_grid: EGrid, bet_grid: BetGrid, theta0: float):
        if not 0.0 < theta0 < 1.0:
            raise ValueError("theta0 must lie in (0, 1)")
        self.e_grid = e_grid
        self.bet_grid = bet_grid
        self.theta0 = theta0
        g = e_grid.values
        cap = e_grid.cap
        S = e_grid.size
        B = bet_grid.size
        top = e_grid.top_index
        up = np.empty((B, S), dtype=np.int32)
        down = np.empty((B, S), dtype=np.int32)
        idx_all = np.arange(S)
        t0_frac = Fraction(theta0)
        for j, b in enumerate(bet_grid.values):
            if b == 0.0:
                up[j] = idx_all
                down[j] = idx_all
                continue
            mult_up = 1.0 + b * (1.0 / theta0 - 1.0)
            up_val = np.minimum(g * mult_up, cap)
            down_val = g * (1.0 - b)
            ui = np.searchsorted(g, up_val, side="right") - 1
            di = np.searchsorted(g, down_val, side="right") - 1
            # self-landings on the success branch are always safe: the real
            # multiplier is >= 1, so grid[s] <= real update holds exactly.
            risky_up = (ui > idx_all) & (g[ui] >= up_val * (1.0 - _ULP_SCREEN))
            risky_dn = (di > 0) & (g[di] >= down_val * (1.0 - _ULP_SCREEN))
            if np.any(risky_up):
                mult_frac = 1 + Fraction(b) * (1 / t0_frac - 1)
                for s in np.flatnonzero(risky_up):
                    if not _exact_le(g[ui[s]], g[s], mult_frac, cap):
                        ui[s] -= 1
            if np.any(risky_dn):
                mult_frac = 1 - Fraction(b)
                for s in np.flatnonzero(risky_dn):
                    if not _exact_le(g[di[s]], g[s], mult_frac, None):
                        di[s] -= 1
            up[j] = ui
            down[j] = di
        # absorbing states: bankrupt and rejected self-loop under every bet
        up[:, 0] = 0
        down[:, 0] = 0
        up[:, top] = top
        down[:, top] = top
        up.setflags(write=False)
        down.setflags(write=False)
        self.up = up
        self.down = down

    def dist(self, state_index: int, bet_index: int, p_up: float) -> TransitionDist:
        return TransitionDist(
            up_index=int(self.up[bet_index, state_index]),
            down_index=int(self.down[bet_index, state_index]),
            p_up=p_up,
        )


_KERNEL_CACHE: dict[tuple[str, str, float], TransitionKernel] = {}


def get_kernel(e_grid: EGrid, bet_grid: BetGrid, theta0: float) -> TransitionKernel:
    """Cached kernel lookup; construction is the expensive part."""
    key = (e_grid.content_hash, bet_grid.content_hash, theta0)
    kern = _KERNEL_CACHE.get(key)
    if kern is None:
        kern = TransitionKernel(e_grid, bet_grid, theta0)
        _KERNEL_CACHE[key] = kern
    return kern


def project_update(e_grid: EGrid, state_index: int, bet: float, theta0: float):
    """Single-state discrete transition (up_index, down_index).

    Same semantics as TransitionKernel, for scalar replay without building
    the full table.
    """
    g = e_grid.values
    top = e_grid.top_index
    if state_index in (0, top):
        return state_index, state_index
    if bet == 0.0:
        return state_index, state_index
    m = g[state_index]
    cap = e_grid.cap
    mult_up = 1.0 + bet * (1.0 / theta0 - 1.0)
    up_val = min(m * mult_up, cap)
    down_val = m * (1.0 - bet)
    ui = int(np.searchsorted(g, up_val, side="right") - 1)
    di = int(np.searchsorted(g, down_val, side="right") - 1)
    if ui > state_index and g[ui] >= up_val * (1.0 - _ULP_SCREEN):
        mult_frac = 1 + Fraction(bet) * (1 / Fraction(theta0) - 1)
        if not _exact_le(g[ui], m, mult_frac, cap):
            ui -= 1
    if di > 0 and g[di] >= down_val * (1.0 - _ULP_SCREEN):
        if not _exact_le(g[di], m, 1 - Fraction(bet), None):
            di -= 1
    return ui, di


def transition_kernel(
    state_index: int,
    t: int,
    bet: float,
    theta_eval: float,
    spec,
    e_grid: EGrid,
) -> TransitionDist:
    """Discrete transition for one state; the rule is time-homogeneous, so t
    only documents the caller's stage."""
    up_i, down_i = project_update(e_grid, state_index, bet, spec.theta0)
    return TransitionDist(up_index=up_i, down_index=down_i, p_up=theta_eval)
