"""Backward-induction solvers for design-optimal betting strategies.

Three reward families are supported on the discretized e-state chain:

* power-maximizing (terminal reward 1 when the e-value sits at 1/alpha),
* expected-sample-size-minimizing (cost -1 per analysis time below 1/alpha),
* power-constrained futility stopping (recruiting costs plus a Lagrange
  bonus for rejection, with a Stop action; the multiplier is tuned by a
  discrete Newton search until the policy's exact miss probability sits
  just below the type II budget).

Blocked variants charge recruiting costs per block and permit Stop only at
block boundaries; within blocks the e-value still evolves one outcome at a
time with 1/alpha absorbing, so the power-maximizing solution (and its
power) is unchanged by the block configuration.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .betting import Action, Bet, BlockSchedule, DesignSpec, EState, Stop, kelly_bet
from .grids import BetGrid, EGrid, TransitionKernel, get_kernel

STOP_CODE = -1


class InfeasibleConstraintError(ValueError):
    """No policy reaches the required power even with an unbounded multiplier."""


class NonConvergenceError(RuntimeError):
    """The multiplier search exhausted its iteration budget."""


@dataclass(frozen=True)
class PMax:
    """Maximize the probability of rejecting by the horizon."""


@dataclass(frozen=True)
class ESSMin:
    """Minimize expected analysis times spent below 1/alpha under theta1.

    With a schedule, recruiting costs are charged per block at boundaries.
    """

    schedule: Optional[BlockSchedule] = None


@dataclass(frozen=True)
class Constrained:
    """Recruiting costs with futility stopping and a rejection bonus lam.

    With a schedule, Stop is permitted and costs charged only at block
    boundaries.
    """

    lam: float
    schedule: Optional[BlockSchedule] = None

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError("lam must be nonnegative")


@dataclass(frozen=True)
class FixedBet:
    """Marker for policies that place one constant bet (not solvable)."""

    bet: float


RewardSpec = Union[PMax, ESSMin, Constrained]


@dataclass(eq=False)
class PolicyTable:
    """Solved strategy: action per (stage, e-grid index).

    actions[t, s] is a bet-grid index, or STOP_CODE for the futility stop.
    Rows below ``start_stage`` (nonzero only for mid-trial re-solves) are
    filler and hold bet 0.
    """

    actions: np.ndarray
    spec: DesignSpec
    e_grid: EGrid
    bet_grid: BetGrid
    rewards: Union[RewardSpec, FixedBet]
    futility_on_hz: bool
    start_stage: int = 0
    diagnostics: dict = field(default_factory=dict)

    def action_at(self, t: int, state_index: int) -> Action:
        code = int(self.actions[t, state_index])
        if code == STOP_CODE:
            return Stop
        return Bet(float(self.bet_grid.values[code]))

    @property
    def first_bet(self) -> Action:
        return self.action_at(0, self.e_grid.index_of_one)

    @property
    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.actions.tobytes())
        h.update(self.e_grid.content_hash.encode())
        h.update(self.bet_grid.content_hash.encode())
        return h.hexdigest()


@dataclass(eq=False)
class ValueTable:
    """Expected reward-to-go per (stage, e-grid index), stages 0..n."""

    values: np.ndarray

    def at_start(self, e_grid: EGrid) -> float:
        return float(self.values[0, e_grid.index_of_one])


@dataclass(frozen=True)
class LagrangeIteration:
    lam: float
    power: float
    ess: float


@dataclass
class LagrangeTrace:
    iterations: list[LagrangeIteration]
    final_lambda: float
    final_policy_id: str
    eps_newton: float


def _reward_kind(rewards) -> str:
    if isinstance(rewards, PMax):
        return "pmax"
    if isinstance(rewards, ESSMin):
        return "essmin"
    if isinstance(rewards, Constrained):
        return "constrained"
    if isinstance(rewards, FixedBet):
        return "fixed"
    raise TypeError(f"unknown reward spec {rewards!r}")


def _schedule_of(rewards) -> Optional[BlockSchedule]:
    return getattr(rewards, "schedule", None)


def _stage_cost(rewards, t: int, n: int) -> float:
    """Recruiting cost charged at stage t (before outcome t+1); 0 for PMax."""
    kind = _reward_kind(rewards)
    if kind == "pmax":
        return 0.0
    sched = _schedule_of(rewards)
    if sched is None:
        return -1.0
    if sched.is_boundary(t):
        return -float(sched.next_block_size(t))
    return 0.0


def _terminal_values(rewards, e_grid: EGrid) -> np.ndarray:
    kind = _reward_kind(rewards)
    g = e_grid.values
    cap = e_grid.cap
    if kind == "pmax":
        return np.where(g >= cap, 1.0, 0.0)
    if kind == "essmin":
        return np.where(g < cap, -1.0, 0.0)
    # constrained: rejection bonus only; stopped/bankrupt paths earn nothing
    return np.where(g >= cap, rewards.lam, 0.0)


def backward_induct(
    spec: DesignSpec,
    e_grid: EGrid,
    bet_grid: BetGrid,
    rewards: RewardSpec,
    kernel: Optional[TransitionKernel] = None,
    start_stage: int = 0,
) -> tuple[PolicyTable, ValueTable]:
    """Solve the Bellman equations stage by stage from the horizon backwards.

    At each stage and non-absorbing state the value of every bet is the
    transition-weighted next-stage value under theta1 plus the stage cost;
    ties are broken toward the smallest bet, and (for constrained rewards)
    toward Stop when stopping matches the best bet.
    """
    kind = _reward_kind(rewards)
    sched = _schedule_of(rewards)
    if sched is not None and sched.n != spec.n:
        raise ValueError("reward schedule does not match the design's n")
    if kernel is None:
        kernel = get_kernel(e_grid, bet_grid, spec.theta0)
    t1 = spec.theta1
    S = e_grid.size
    top = e_grid.top_index
    n = spec.n
    up, down = kernel.up, kernel.down
    cols = np.arange(S)

    values = np.empty((n + 1, S))
    actions = np.zeros((n, S), dtype=np.int32)
    values[n] = _terminal_values(rewards, e_grid)
    v_next = values[n]
    for t in range(n - 1, start_stage - 1, -1):
        q = t1 * v_next[up] + (1.0 - t1) * v_next[down]
        cost = _stage_cost(rewards, t, n)
        best_bet = np.argmax(q, axis=0)
        best_val = q[best_bet, cols] + cost
        act = best_bet.astype(np.int32)
        val = best_val
        if kind == "constrained" and (sched is None or sched.is_boundary(t)):
            stop_wins = best_val <= 0.0
            act = np.where(stop_wins, STOP_CODE, act).astype(np.int32)
            val = np.where(stop_wins, 0.0, best_val)
        # absorbing states override: bet 0 by convention
        act[0] = 0
        act[top] = 0
        if kind == "pmax":
            val[0], val[top] = 0.0, 1.0
        elif kind == "essmin":
            val[0] = _stage_cost(rewards, t, n) + v_next[0]
            val[top] = 0.0
        else:
            val[0], val[top] = 0.0, rewards.lam
        actions[t] = act
        values[t] = val
        v_next = val
    if start_stage > 0:
        values[:start_stage] = 0.0
    futility_on_hz = True
    policy = PolicyTable(
        actions=actions,
        spec=spec,
        e_grid=e_grid,
        bet_grid=bet_grid,
        rewards=rewards,
        futility_on_hz=futility_on_hz,
        start_stage=start_stage,
    )
    return policy, ValueTable(values=values)


def policy_value(
    policy: PolicyTable,
    theta_eval: float,
    rewards: RewardSpec,
    kernel: Optional[TransitionKernel] = None,
) -> ValueTable:
    """Expected reward-to-go of a fixed policy under an arbitrary theta.

    Stop actions terminate with value 0 under every reward family (no
    further recruiting, no rejection bonus).
    """
    kind = _reward_kind(rewards)
    spec = policy.spec
    e_grid = policy.e_grid
    if kernel is None:
        kernel = get_kernel(e_grid, policy.bet_grid, spec.theta0)
    S = e_grid.size
    top = e_grid.top_index
    n = spec.n
    cols = np.arange(S)
    values = np.empty((n + 1, S))
    values[n] = _terminal_values(rewards, e_grid)
    v_next = values[n]
    for t in range(n - 1, policy.start_stage - 1, -1):
        act = policy.actions[t]
        bet_idx = np.where(act == STOP_CODE, 0, act)
        u = kernel.up[bet_idx, cols]
        d = kernel.down[bet_idx, cols]
        val = theta_eval * v_next[u] + (1.0 - theta_eval) * v_next[d]
        val = val + _stage_cost(rewards, t, n)
        val[act == STOP_CODE] = 0.0
        val[0] = {
            "pmax": 0.0,
            "essmin": _stage_cost(rewards, t, n) + v_next[0],
            "constrained": 0.0,
        }[kind]
        val[top] = {"pmax": 1.0, "essmin": 0.0, "constrained": getattr(rewards, "lam", 0.0)}[
            kind
        ]
        values[t] = val
        v_next = val
    if policy.start_stage > 0:
        values[: policy.start_stage] = 0.0
    return ValueTable(values=values)


def _policy_power(policy: PolicyTable, kernel: TransitionKernel) -> float:
    """Exact probability of hitting 1/alpha under theta1 from (0, m=1)."""
    vt = policy_value(policy, policy.spec.theta1, PMax(), kernel=kernel)
    return vt.at_start(policy.e_grid)


def _policy_ess(policy: PolicyTable, kernel: TransitionKernel, theta: float) -> float:
    """Expected recruits: sequential per-step, or block totals at boundaries.

    Recruiting stops on rejection, a Stop action, or bankruptcy.
    """
    spec = policy.spec
    e_grid = policy.e_grid
    sched = _schedule_of(policy.rewards)
    S = e_grid.size
    top = e_grid.top_index
    cols = np.arange(S)
    remaining = np.zeros(S)
    for t in range(spec.n - 1, policy.start_stage - 1, -1):
        act = policy.actions[t]
        bet_idx = np.where(act == STOP_CODE, 0, act)
        u = kernel.up[bet_idx, cols]
        d = kernel.down[bet_idx, cols]
        nxt = theta * remaining[u] + (1.0 - theta) * remaining[d]
        if sched is None:
            nxt = nxt + 1.0
        elif sched.is_boundary(t):
            nxt = nxt + float(sched.next_block_size(t))
        nxt[act == STOP_CODE] = 0.0
        nxt[0] = 0.0
        nxt[top] = 0.0
        remaining = nxt
    return float(remaining[e_grid.index_of_one])


def solve_pmax(
    spec: DesignSpec,
    e_grid: EGrid,
    bet_grid: BetGrid,
    kernel: Optional[TransitionKernel] = None,
) -> tuple[PolicyTable, ValueTable]:
    """Power-maximizing strategy; the start value is the exact grid power."""
    return backward_induct(spec, e_grid, bet_grid, PMax(), kernel=kernel)


def solve_essmin(
    spec: DesignSpec,
    e_grid: EGrid,
    bet_grid: BetGrid,
    kernel: Optional[TransitionKernel] = None,
) -> tuple[PolicyTable, ValueTable]:
    """Expected-sample-size-minimizing strategy (no futility stopping)."""
    rewards = ESSMin(schedule=spec.blocks)
    return backward_induct(spec, e_grid, bet_grid, rewards, kernel=kernel)


def solve_constrained(
    spec: DesignSpec,
    e_grid: EGrid,
    bet_grid: BetGrid,
    eps_newton: float = 0.01,
    max_iter: int = 60,
    kernel: Optional[TransitionKernel] = None,
) -> tuple[PolicyTable, LagrangeTrace]:
    """Tune the rejection bonus until the miss probability sits in [beta-eps, beta).

    A discrete Newton (secant with bisection fallback) runs on the exact
    miss probability of each multiplier's optimal policy.  The miss
    probability is piecewise constant in the multiplier, so the bracket is
    also narrowed toward the constraint crossing; the returned policy is the
    feasible policy closest to the power floor.
    """
    if spec.beta is None:
        raise ValueError("constrained design needs beta in the design spec")
    beta = spec.beta
    if kernel is None:
        kernel = get_kernel(e_grid, bet_grid, spec.theta0)
    sched = spec.blocks
    iterations: list[LagrangeIteration] = []

    def evaluate(lam: float) -> tuple[PolicyTable, float]:
        pol, _ = backward_induct(
            spec, e_grid, bet_grid, Constrained(lam, schedule=sched), kernel=kernel
        )
        power = _policy_power(pol, kernel)
        ess = _policy_ess(pol, kernel, spec.theta1)
        iterations.append(LagrangeIteration(lam=lam, power=power, ess=ess))
        return pol, 1.0 - power

    _, miss_lo = evaluate(0.0)
    lo = 0.0
    hi = float(spec.n)
    pol_hi, miss_hi = evaluate(hi)
    while miss_hi >= beta:
        lo, miss_lo = hi, miss_hi
        hi *= 2.0
        if hi > spec.n * 2.0**30:
            raise InfeasibleConstraintError(
                f"power {1.0 - miss_hi:.4f} cannot reach 1-beta={1.0 - beta:.4f}"
            )
        pol_hi, miss_hi = evaluate(hi)
        if len(iterations) > max_iter:
            raise NonConvergenceError("bracketing exceeded the iteration budget")

    while True:
        in_window = miss_hi < beta and beta - miss_hi <= eps_newton
        tight = (hi - lo) <= 1e-6 * max(1.0, hi)
        if in_window and tight:
            break
        if tight and not in_window:
            raise NonConvergenceError(
                f"miss probability jumps past [beta-eps, beta) near lam={hi:.6g}"
            )
        if len(iterations) >= max_iter:
            raise NonConvergenceError("multiplier search exceeded the iteration budget")
        if miss_lo != miss_hi:
            cand = hi + (beta - miss_hi) * (hi - lo) / (miss_hi - miss_lo)
        else:
            cand = 0.5 * (lo + hi)
        if not lo < cand < hi:
            cand = 0.5 * (lo + hi)
        pol_c, miss_c = evaluate(cand)
        if miss_c >= beta:
            lo, miss_lo = cand, miss_c
        else:
            hi, miss_hi, pol_hi = cand, miss_c, pol_c

    trace = LagrangeTrace(
        iterations=iterations,
        final_lambda=hi,
        final_policy_id=pol_hi.content_hash,
        eps_newton=eps_newton,
    )
    pol_hi.diagnostics["lagrange"] = trace
    return pol_hi, trace


def solve_blocked(
    spec: DesignSpec,
    e_grid: EGrid,
    bet_grid: BetGrid,
    rewards: RewardSpec,
    eps_newton: float = 0.01,
    kernel: Optional[TransitionKernel] = None,
):
    """Solve under a block schedule taken from the design spec.

    PMax ignores recruiting costs entirely, so its blocked solution equals
    the fully sequential one.  ESSMin/Constrained are re-dispatched with the
    schedule attached to their rewards.
    """
    if spec.blocks is None:
        raise ValueError("solve_blocked needs a schedule on the design spec")
    if isinstance(rewards, PMax):
        return backward_induct(spec, e_grid, bet_grid, PMax(), kernel=kernel)
    if isinstance(rewards, ESSMin):
        return backward_induct(
            spec, e_grid, bet_grid, ESSMin(schedule=spec.blocks), kernel=kernel
        )
    if isinstance(rewards, Constrained):
        return solve_constrained(
            spec, e_grid, bet_grid, eps_newton=eps_newton, kernel=kernel
        )
    raise TypeError(f"cannot solve blocked rewards {rewards!r}")


def resolve_from(
    state: EState,
    spec: DesignSpec,
    e_grid: EGrid,
    bet_grid: BetGrid,
    rewards: RewardSpec,
    kernel: Optional[TransitionKernel] = None,
) -> PolicyTable:
    """Re-optimize from the current interim to the horizon.

    With an unchanged design this reproduces the tail of the full solution
    (the backward recursion never looks at earlier stages); passing rewards
    with a revised remaining schedule re-plans the rest of the trial.
    """
    if state.t >= spec.n:
        raise ValueError("nothing left to optimize at or past the horizon")
    idx = e_grid.project_floor(state.m)
    if idx in (0, e_grid.top_index):
        raise ValueError("state is absorbing; no policy needed")
    policy, _ = backward_induct(
        spec, e_grid, bet_grid, rewards, kernel=kernel, start_stage=state.t
    )
    return policy


def constant_bet_policy(
    spec: DesignSpec, e_grid: EGrid, bet: float, bet_grid: Optional[BetGrid] = None
) -> PolicyTable:
    """Policy placing one fixed bet at every live state.

    The bet is inserted into the grid if missing.  Futility accounting by
    hopeless-zone entry is disabled: fixed-bet strategies never stop early.
    """
    from .grids import build_bet_grid

    base = bet_grid if bet_grid is not None else build_bet_grid()
    bg = base.with_bet(bet)
    actions = np.full((spec.n, e_grid.size), bg.index_of(bet), dtype=np.int32)
    actions[:, 0] = bg.index_of(0.0)
    actions[:, e_grid.top_index] = bg.index_of(0.0)
    return PolicyTable(
        actions=actions,
        spec=spec,
        e_grid=e_grid,
        bet_grid=bg,
        rewards=FixedBet(bet),
        futility_on_hz=False,
    )


def grow_policy(spec: DesignSpec, e_grid: EGrid) -> PolicyTable:
    """Constant-Kelly strategy: the growth-rate-optimal baseline."""
    return constant_bet_policy(spec, e_grid, kelly_bet(spec.theta0, spec.theta1))
