"""Exact operating characteristics of a solved betting strategy.

Everything here is computed by propagating probability mass through the
discrete chain (or, for the oracle, by exhaustive path enumeration) - no
Monte Carlo.  Futility accounting follows the reporting convention of the
designs themselves: entering the hopeless zone counts as a futility stop
for the optimized strategies, while fixed-bet baselines never stop early.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import binom

from .betting import DesignSpec, EProcessPath, EState, ZoneLabel, classify_zone
from .grids import BetGrid, EGrid, TransitionKernel, get_kernel, project_update
from .solver import (
    STOP_CODE,
    FixedBet,
    PMax,
    PolicyTable,
    RewardSpec,
    _reward_kind,
    _stage_cost,
)

_MASS_TOL = 1e-12


class GridMismatchError(ValueError):
    """The policy was solved on different grids than the ones supplied."""


@dataclass
class StateDistribution:
    """Live mass over e-grid indices plus absorbed mass by cause."""

    probs: np.ndarray
    rejected: float
    stopped: float
    bankrupt: float
    stop_time_hist: np.ndarray
    bankrupt_time_hist: np.ndarray

    @property
    def total(self) -> float:
        return float(self.probs.sum() + self.rejected + self.stopped + self.bankrupt)


@dataclass
class OCProfile:
    """Cumulative curves per analysis time plus the expected sample size.

    cumulative_rejection[t] is the probability the e-value hit 1/alpha at or
    before time t (type I error under the null boundary, power under the
    alternative boundary).  cumulative_futility[t] counts futility stops at
    or before t: Stop decisions, bankruptcies, and (for optimized
    strategies) presence in the hopeless zone; it stays flat at the horizon
    where no early stopping exists.  ahz_occupancy is a diagnostic: live
    mass currently in the almost-hopeless zone, not counted as stopping.
    """

    theta_eval: float
    cumulative_rejection: np.ndarray
    cumulative_futility: np.ndarray
    ahz_occupancy: np.ndarray
    ess: float
    analysis_points: list[int]
    stop_time_hist: np.ndarray
    bankrupt_time_hist: np.ndarray

    @property
    def final_rejection(self) -> float:
        return float(self.cumulative_rejection[-1])

    @property
    def final_futility(self) -> float:
        return float(self.cumulative_futility[-1])


def _check_grids(policy: PolicyTable, e_grid: Optional[EGrid], bet_grid: Optional[BetGrid]):
    if e_grid is not None and e_grid.content_hash != policy.e_grid.content_hash:
        raise GridMismatchError("e-grid differs from the policy's solve grid")
    if bet_grid is not None and bet_grid.content_hash != policy.bet_grid.content_hash:
        raise GridMismatchError("bet grid differs from the policy's solve grid")


def _hz_cut(e_grid: EGrid, spec: DesignSpec, t: int) -> int:
    """First grid index at or above the hopeless-zone bound at time t."""
    bound = spec.theta0 ** (spec.n - t) / spec.alpha
    return int(np.searchsorted(e_grid.values, bound, side="left"))


def forward_oc(
    policy: PolicyTable,
    theta_eval: float,
    spec: Optional[DesignSpec] = None,
    e_grid: Optional[EGrid] = None,
    bet_grid: Optional[BetGrid] = None,
    kernel: Optional[TransitionKernel] = None,
) -> OCProfile:
    """Propagate the start state forward and read off all curves exactly.

    The evaluation spec defaults to the policy's solve spec; when a spec
    with a block schedule is supplied, expected sample size is charged per
    block and curves are reported at block boundaries (within-block
    boundary hits are still credited at the crossing step, because 1/alpha
    absorbs at every per-outcome transition).
    """
    _check_grids(policy, e_grid, bet_grid)
    spec = spec if spec is not None else policy.spec
    eg = policy.e_grid
    if not 0.0 < theta_eval < 1.0:
        raise ValueError("theta_eval must lie in (0, 1)")
    if kernel is None:
        kernel = get_kernel(eg, policy.bet_grid, policy.spec.theta0)
    n = spec.n
    S = eg.size
    top = eg.top_index
    cols = np.arange(S)
    dist = np.zeros(S)
    dist[eg.index_of_one] = 1.0
    rejected = stopped = bankrupt = 0.0
    stop_hist = np.zeros(n + 1)
    bank_hist = np.zeros(n + 1)
    cum_rej = np.zeros(n + 1)
    cum_fut = np.zeros(n + 1)
    ahz = np.zeros(n + 1)
    live_at = np.zeros(n + 1)

    for t in range(n + 1):
        if t < n:
            act = policy.actions[t]
            stop_mask = act == STOP_CODE
            s_mass = float(dist[stop_mask].sum())
            if s_mass > 0.0:
                stopped += s_mass
                stop_hist[t] += s_mass
                dist[stop_mask] = 0.0
        total = dist.sum() + rejected + stopped + bankrupt
        if abs(total - 1.0) > _MASS_TOL:
            raise AssertionError(f"mass leak at t={t}: total={total!r}")
        cum_rej[t] = rejected
        if t < n:
            k = _hz_cut(eg, spec, t)
            hz_mass = float(dist[1:k].sum()) if policy.futility_on_hz else 0.0
            cum_fut[t] = stopped + bankrupt + hz_mass
            k2 = _hz_cut(eg, spec, t + 1)  # bound/theta0 = next stage's bound
            ahz[t] = float(dist[k:k2].sum())
        else:
            cum_fut[t] = cum_fut[t - 1] if n > 0 else stopped + bankrupt
        live_at[t] = dist.sum()
        if t == n:
            break
        act = policy.actions[t]
        bet_idx = np.where(act == STOP_CODE, 0, act)
        u = kernel.up[bet_idx, cols]
        d = kernel.down[bet_idx, cols]
        nxt = np.zeros(S)
        np.add.at(nxt, u, dist * theta_eval)
        np.add.at(nxt, d, dist * (1.0 - theta_eval))
        rejected += float(nxt[top])
        bankrupt += float(nxt[0])
        bank_hist[t + 1] += float(nxt[0])
        nxt[top] = 0.0
        nxt[0] = 0.0
        dist = nxt

    if spec.blocks is None:
        ess = float(live_at[:n].sum())
        analysis_points = list(range(n + 1))
    else:
        cum = (0,) + spec.blocks.cumulative
        ess = float(
            sum(size * live_at[start] for size, start in zip(spec.blocks.sizes, cum))
        )
        analysis_points = [0] + list(spec.blocks.cumulative)

    return OCProfile(
        theta_eval=theta_eval,
        cumulative_rejection=cum_rej,
        cumulative_futility=cum_fut,
        ahz_occupancy=ahz,
        ess=ess,
        analysis_points=analysis_points,
        stop_time_hist=stop_hist,
        bankrupt_time_hist=bank_hist,
    )


def brute_force_oracle(
    policy: PolicyTable,
    theta_eval: float,
    spec: Optional[DesignSpec] = None,
    rewards: Optional[RewardSpec] = None,
) -> tuple[OCProfile, float]:
    """Exhaustive 2^n path enumeration: curves, sample size, expected reward.

    Replays the discrete update path by path with exact outcome
    probabilities; serves as the independent check of both the backward
    induction values and the forward recursion.  Refuses n > 20.
    """
    spec = spec if spec is not None else policy.spec
    n = spec.n
    if n > 20:
        raise ValueError("path enumeration is limited to n <= 20")
    if rewards is None:
        rewards = policy.rewards if not isinstance(policy.rewards, FixedBet) else PMax()
    kind = _reward_kind(rewards)
    eg = policy.e_grid
    bets = policy.bet_grid.values
    theta0 = policy.spec.theta0
    top = eg.top_index
    start = eg.index_of_one
    g = eg.values

    cum_rej = np.zeros(n + 1)
    cum_fut = np.zeros(n + 1)
    ahz = np.zeros(n + 1)
    stop_hist = np.zeros(n + 1)
    bank_hist = np.zeros(n + 1)
    live_at = np.zeros(n + 1)
    total_reward = 0.0

    lam = getattr(rewards, "lam", 0.0)
    for path in itertools.product((0, 1), repeat=n):
        prob = math.prod(
            theta_eval if y == 1 else 1.0 - theta_eval for y in path
        )
        # replay the discrete chain: record the state sequence and the first
        # time of each absorbing event (Stop happens before the outcome at
        # its stage; hits and bankruptcies happen on the landing stage)
        idx = start
        states = [idx]
        stop_time: Optional[int] = None
        hit_time: Optional[int] = None
        bank_time: Optional[int] = None
        for t in range(n):
            if stop_time is None and hit_time is None and bank_time is None:
                code = int(policy.actions[t, idx])
                if code == STOP_CODE:
                    stop_time = t
                else:
                    b = float(bets[code])
                    u, d = project_update(eg, idx, b, theta0)
                    idx = u if path[t] == 1 else d
                    if idx == top:
                        hit_time = t + 1
                    elif idx == 0:
                        bank_time = t + 1
            states.append(idx)
        if stop_time is not None:
            stop_hist[stop_time] += prob
        if bank_time is not None:
            bank_hist[bank_time] += prob

        for t in range(n + 1):
            hit = hit_time is not None and hit_time <= t
            stopped = stop_time is not None and stop_time <= t
            bank = bank_time is not None and bank_time <= t
            live = not (hit or stopped or bank)
            if hit:
                cum_rej[t] += prob
            if t < n:
                fut = stopped or bank
                if not fut and live and policy.futility_on_hz:
                    if g[states[t]] < theta0 ** (n - t) / spec.alpha:
                        fut = True
                if fut:
                    cum_fut[t] += prob
                if live:
                    bound = theta0 ** (n - t) / spec.alpha
                    if bound <= g[states[t]] < bound / theta0:
                        ahz[t] += prob
            if live:
                live_at[t] += prob

        if kind == "pmax":
            reward = 1.0 if hit_time is not None else 0.0
        elif kind == "essmin":
            # recruiting costs run below 1/alpha (bankruptcy included) but
            # terminate at a Stop; the horizon charges the miss penalty
            reward = 0.0
            for t in range(n):
                if stop_time is not None and t >= stop_time:
                    break
                if states[t] != top:
                    reward += _stage_cost(rewards, t, n)
            if stop_time is None and states[n] != top:
                reward += -1.0
        else:
            # constrained: costs accrue only while live and betting
            reward = lam if hit_time is not None else 0.0
            for t in range(n):
                before_stop = stop_time is None or t < stop_time
                before_hit = hit_time is None or t < hit_time
                before_bank = bank_time is None or t < bank_time
                if before_stop and before_hit and before_bank:
                    reward += _stage_cost(rewards, t, n)
        total_reward += prob * reward
    cum_fut[n] = cum_fut[n - 1] if n > 0 else cum_fut[n]
    ahz[n] = 0.0

    if spec.blocks is None:
        ess = float(live_at[:n].sum())
        analysis_points = list(range(n + 1))
    else:
        cum = (0,) + spec.blocks.cumulative
        ess = float(
            sum(size * live_at[start_t] for size, start_t in zip(spec.blocks.sizes, cum))
        )
        analysis_points = [0] + list(spec.blocks.cumulative)

    profile = OCProfile(
        theta_eval=theta_eval,
        cumulative_rejection=cum_rej,
        cumulative_futility=cum_fut,
        ahz_occupancy=ahz,
        ess=ess,
        analysis_points=analysis_points,
        stop_time_hist=stop_hist,
        bankrupt_time_hist=bank_hist,
    )
    return profile, total_reward


@dataclass
class BinomialBaseline:
    """Exact one-sided fixed-sample binomial test at the design's n and alpha."""

    n: int
    theta0: float
    alpha: float
    critical_value: int

    def power_at(self, theta: float) -> float:
        """P(successes >= critical value) under the given success rate."""
        return float(binom.sf(self.critical_value - 1, self.n, theta))


def binomial_baseline(spec: DesignSpec) -> BinomialBaseline:
    """Smallest success count whose null tail probability is at most alpha."""
    for k in range(spec.n + 2):
        tail = float(binom.sf(k - 1, spec.n, spec.theta0))
        if tail <= spec.alpha:
            return BinomialBaseline(
                n=spec.n, theta0=spec.theta0, alpha=spec.alpha, critical_value=k
            )
    raise AssertionError("unreachable: the empty tail is always <= alpha")


def conditional_power(
    state: EState,
    policy: PolicyTable,
    spec: Optional[DesignSpec] = None,
    kernel: Optional[TransitionKernel] = None,
) -> float:
    """Probability under theta1 of reaching 1/alpha by the horizon.

    The state's e-value is floor-projected onto the grid first; mass is then
    pushed forward under the policy from that point alone.
    """
    spec = spec if spec is not None else policy.spec
    eg = policy.e_grid
    if state.t < policy.start_stage:
        raise ValueError("policy does not cover stages before its start stage")
    idx = eg.project_floor(state.m)
    if idx == eg.top_index:
        return 1.0
    if idx == 0:
        return 0.0
    if kernel is None:
        kernel = get_kernel(eg, policy.bet_grid, policy.spec.theta0)
    S = eg.size
    top = eg.top_index
    cols = np.arange(S)
    dist = np.zeros(S)
    dist[idx] = 1.0
    hit = 0.0
    for t in range(state.t, spec.n):
        act = policy.actions[t]
        dist[act == STOP_CODE] = 0.0
        bet_idx = np.where(act == STOP_CODE, 0, act)
        u = kernel.up[bet_idx, cols]
        d = kernel.down[bet_idx, cols]
        nxt = np.zeros(S)
        np.add.at(nxt, u, dist * spec.theta1)
        np.add.at(nxt, d, dist * (1.0 - spec.theta1))
        hit += float(nxt[top])
        nxt[top] = 0.0
        nxt[0] = 0.0
        dist = nxt
    return hit


def simulate_path(
    policy: PolicyTable,
    theta_true: float,
    seed: int,
    spec: Optional[DesignSpec] = None,
) -> EProcessPath:
    """Draw one trial realization; deterministic for a fixed seed.

    Outcomes are the n pre-drawn uniforms from numpy's PCG64 stream for the
    seed compared against theta_true, so two strategies simulated with the
    same (seed, theta) consume identical outcome sequences.  Bets follow the
    policy on discrete states; the recorded e-values replay the continuous
    update with those bets, alongside the discrete grid values that drive
    stopping.
    """
    spec = spec if spec is not None else policy.spec
    eg = policy.e_grid
    rng = np.random.default_rng(seed)
    uniforms = rng.random(spec.n)
    outcomes_full = (uniforms < theta_true).astype(int)

    idx = eg.index_of_one
    m_cont = 1.0
    theta0 = policy.spec.theta0
    outcomes: list[int] = []
    bets: list[float] = []
    evalues = [1.0]
    evalues_disc = [float(eg.values[idx])]
    successes = [0]
    zones = [classify_zone(EState(0, float(eg.values[idx])), spec)]
    stop_reason = "completed"
    for t in range(spec.n):
        code = int(policy.actions[t, idx])
        if code == STOP_CODE:
            stop_reason = "futility_stop"
            break
        b = float(policy.bet_grid.values[code])
        y = int(outcomes_full[t])
        u, d = project_update(eg, idx, b, theta0)
        idx = u if y == 1 else d
        mult = 1.0 + b * (1.0 / theta0 - 1.0) if y == 1 else 1.0 - b
        m_cont *= mult
        outcomes.append(y)
        bets.append(b)
        evalues.append(m_cont)
        evalues_disc.append(float(eg.values[idx]))
        successes.append(successes[-1] + y)
        zones.append(classify_zone(EState(t + 1, float(eg.values[idx])), spec))
        if idx == eg.top_index:
            stop_reason = "efficacy"
            break
        if idx == 0:
            stop_reason = "bankrupt"
            break
    return EProcessPath(
        outcomes=outcomes,
        bets=bets,
        evalues=evalues,
        successes=successes,
        zones=zones,
        stop_reason=stop_reason,
        evalues_discrete=evalues_disc,
    )
