"""Continuous e-process primitives for single-arm binary-outcome trials.

An e-value is the capital of a bettor who stakes a fraction of their wealth
on each treatment success; capital >= 1/alpha justifies rejecting the null
H0: theta <= theta0 at level alpha, at any time.  This module holds the
closed-form pieces: the one-step capital update, Kelly/likelihood-ratio
baselines, the final-bet solution, and the hopeless-zone geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np


class NoSolutionError(ValueError):
    """The rejection boundary is unreachable in one step (conditional power 0)."""


class AlreadyRejectedError(ValueError):
    """The e-value already sits at or above the rejection boundary."""


@dataclass(frozen=True)
class BlockSchedule:
    """Batching of participants into analysis blocks.

    ``sizes`` are the block sizes in recruitment order; they must sum to the
    design's maximum sample size.  Outcomes are still processed one at a time
    inside a block, but recruiting and stop decisions happen only at block
    boundaries.
    """

    sizes: tuple[int, ...]

    def __post_init__(self):
        if not self.sizes:
            raise ValueError("schedule needs at least one block")
        if any(int(s) != s or s <= 0 for s in self.sizes):
            raise ValueError("block sizes must be positive integers")
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def cumulative(self) -> tuple[int, ...]:
        """Cumulative participant counts at block ends: (s1, s1+s2, ...)."""
        out, tot = [], 0
        for s in self.sizes:
            tot += s
            out.append(tot)
        return tuple(out)

    def is_boundary(self, t: int) -> bool:
        """True when time t is an analysis point (t participants complete a block).

        t = 0 counts as a boundary: it is where the first block is recruited.
        """
        return t == 0 or t in self.cumulative

    def next_block_size(self, t: int) -> int:
        """Size of the block recruited at boundary t (0 when t = n)."""
        if not self.is_boundary(t):
            raise ValueError(f"t={t} is not a block boundary")
        cum = (0,) + self.cumulative
        idx = cum.index(t)
        return self.sizes[idx] if idx < len(self.sizes) else 0


@dataclass(frozen=True)
class DesignSpec:
    """Trial design parameters.

    n       maximum number of participants
    theta0  largest success probability under the null
    theta1  smallest clinically relevant success probability (> theta0)
    alpha   significance level; rejection boundary is 1/alpha
    beta    maximum type II error, needed only for the power-constrained design
    blocks  optional analysis schedule; absent means fully sequential
    """

    n: int
    theta0: float
    theta1: float
    alpha: float
    beta: Optional[float] = None
    blocks: Optional[BlockSchedule] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        object.__setattr__(self, "n", int(self.n))
        if not 0.0 < self.theta0 < 1.0:
            raise ValueError("theta0 must lie in (0, 1)")
        if not self.theta0 < self.theta1 < 1.0:
            raise ValueError("theta1 must lie in (theta0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.beta is not None and not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if self.blocks is not None and self.blocks.n != self.n:
            raise ValueError(
                f"block sizes sum to {self.blocks.n}, expected n={self.n}"
            )

    @property
    def cap(self) -> float:
        """Rejection boundary 1/alpha."""
        return 1.0 / self.alpha


@dataclass(frozen=True)
class EState:
    """Analysis time t and current e-value m."""

    t: int
    m: float

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("t must be nonnegative")
        if self.m < 0.0:
            raise ValueError("e-value must be nonnegative")


@dataclass(frozen=True)
class Bet:
    """Stake a fraction of the current e-value on the next success."""

    amount: float

    def __post_init__(self):
        if not 0.0 <= self.amount <= 1.0:
            raise ValueError("bet must lie in [0, 1]")


class _StopType:
    """Futility-stop action (only available in the power-constrained design)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Stop"


Stop = _StopType()
Action = Union[Bet, _StopType]


class ZoneLabel(Enum):
    REJECTED = "rejected"
    HOPELESS = "hopeless"
    ALMOST_HOPELESS = "almost_hopeless"
    OPEN = "open"
    BANKRUPT = "bankrupt"


@dataclass(frozen=True)
class FormulationEquivalents:
    """Equivalent parameterizations of a bet b.

    lam: ticket count b/theta0 in the bounded-mean betting form.
    q:   implied alternative theta0 + (1-theta0)*b in the likelihood-ratio form.
    """

    lam: float
    q: float


@dataclass
class DiagnosticBounds:
    """Reference e-value curves used as policy-plot overlays.

    m_upper[t] is the e-value from which growth at the Kelly rate (expected
    log-growth per step under theta1) reaches exactly 1/alpha at the horizon.
    m_lower[t] is the e-value that reaches 1/alpha after (n-t)/2 successes
    under Kelly betting, each success multiplying by theta1/theta0.  Both are
    diagnostics only; neither participates in any solve.
    """

    m_upper: np.ndarray
    m_lower: np.ndarray


@dataclass
class EProcessPath:
    """A realized betting trajectory.

    evalues[0] = 1 and evalues[k] replays the capital update over the first k
    outcomes with the recorded bets.  successes is the running success count,
    successes[0] = 0.
    """

    outcomes: list[int]
    bets: list[float]
    evalues: list[float]
    successes: list[int]
    zones: Optional[list[ZoneLabel]] = None
    stop_reason: Optional[str] = None
    evalues_discrete: Optional[list[float]] = None


def _check_bet(b: float) -> None:
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"bet {b} outside [0, 1]")


def _check_theta0(theta0: float) -> None:
    if not 0.0 < theta0 < 1.0:
        raise ValueError(f"theta0 {theta0} outside (0, 1)")


def capital_update(m: float, b: float, y: int, theta0: float) -> float:
    """One-step capital update: the bettor stakes fraction b on {Y=1}.

    A success pays 1/theta0 per unit staked, a failure loses the stake:
    m * (1 + b*(1/theta0 - 1)) on success, m * (1 - b) on failure.
    """
    _check_bet(b)
    _check_theta0(theta0)
    if m < 0.0:
        raise ValueError("e-value must be nonnegative")
    if y not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    if y == 1:
        return m * (1.0 + b * (1.0 / theta0 - 1.0))
    return m * (1.0 - b)


def kelly_bet(theta0: float, theta1: float) -> float:
    """Bet fraction maximizing expected log-growth under theta1."""
    _check_theta0(theta0)
    if theta1 < theta0:
        raise ValueError("theta1 must be >= theta0")
    if not theta1 < 1.0:
        raise ValueError("theta1 must be < 1")
    return (theta1 - theta0) / (1.0 - theta0)


def grow_evalue(s: int, t: int, theta0: float, theta1: float) -> float:
    """Closed form of the constant-Kelly e-process after s successes in t steps.

    Equals the sequential likelihood ratio of Bernoulli(theta1) vs
    Bernoulli(theta0): (theta1/theta0)^s * ((1-theta1)/(1-theta0))^(t-s).
    """
    if not 0 <= s <= t:
        raise ValueError("need 0 <= s <= t")
    return (theta1 / theta0) ** s * ((1.0 - theta1) / (1.0 - theta0)) ** (t - s)


def formulation_equivalents(b: float, theta0: float) -> FormulationEquivalents:
    """Translate a bet fraction into its ticket-count and implied-alternative forms."""
    _check_bet(b)
    _check_theta0(theta0)
    return FormulationEquivalents(lam=b / theta0, q=theta0 + (1.0 - theta0) * b)


def growth_rate(b: float, theta0: float) -> float:
    """Expected log-growth of the e-process under the alternative implied by b.

    With q = theta0 + (1-theta0)*b this is q*log(1 + b*(1/theta0 - 1))
    + (1-q)*log(1-b), zero at b=0 and increasing to log(1/theta0).  At b=1
    the failure branch has weight zero, so the limit log(1/theta0) is used.
    """
    _check_bet(b)
    _check_theta0(theta0)
    if b == 1.0:
        return math.log(1.0 / theta0)
    q = theta0 + (1.0 - theta0) * b
    return q * math.log1p(b * (1.0 / theta0 - 1.0)) + (1.0 - q) * math.log1p(-b)


def final_bet_power_boundary(m_prev: float, alpha: float, theta0: float) -> float:
    """Smallest final bet whose winning branch reaches 1/alpha.

    Any final bet >= this boundary yields one-step conditional power theta1;
    any smaller bet yields 0.  At m_prev = 1/alpha no growth is needed and
    the boundary is 0.
    """
    _check_theta0(theta0)
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    cap = 1.0 / alpha
    if m_prev > cap:
        raise AlreadyRejectedError(f"e-value {m_prev} already above 1/alpha={cap}")
    if m_prev / theta0 < cap:
        raise NoSolutionError(
            f"boundary 1/alpha={cap} unreachable in one step from {m_prev}"
        )
    return (theta0 / (alpha * m_prev) - theta0) / (1.0 - theta0)


def solve_final_bet(
    m_prev: float, alpha: float, theta0: float, tol: float = 1e-12
) -> float:
    """Final bet whose expected growth exactly matches the needed growth.

    Solves growth_rate(b, theta0) = log(1/(alpha*m_prev)) by bisection on
    [boundary, 1]; the root is unique because the growth rate is strictly
    increasing in b.
    """
    cap = 1.0 / alpha
    if m_prev >= cap:
        raise AlreadyRejectedError(f"e-value {m_prev} already at 1/alpha={cap}")
    lo = final_bet_power_boundary(m_prev, alpha, theta0)
    hi = 1.0
    target = math.log(1.0 / (alpha * m_prev))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if growth_rate(mid, theta0) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def classify_zone(state: EState, spec: DesignSpec) -> ZoneLabel:
    """Classify an e-state by reachability of the rejection boundary.

    Hopeless means 1/alpha cannot be reached by the horizon even betting
    everything each step: m * (1/theta0)^(n-t) < 1/alpha.  Almost-hopeless
    means a single failure makes it hopeless.  A state from which an
    all-win streak reaches the boundary exactly is almost-hopeless, not
    hopeless, which is why the test is phrased as reachability instead of
    comparing m against theta0^(n-t)/alpha (the two differ by rounding
    exactly on the boundary).
    """
    m, t = state.m, state.t
    if t > spec.n:
        raise ValueError("t exceeds the horizon")
    cap = spec.cap
    if m >= cap:
        return ZoneLabel.REJECTED
    if m == 0.0:
        return ZoneLabel.BANKRUPT
    per_win = 1.0 / spec.theta0
    if m * per_win ** (spec.n - t) < cap:
        return ZoneLabel.HOPELESS
    if t < spec.n and m * per_win ** (spec.n - t - 1) < cap:
        return ZoneLabel.ALMOST_HOPELESS
    return ZoneLabel.OPEN


def diagnostic_bounds(spec: DesignSpec) -> DiagnosticBounds:
    """Kelly-referenced overlay curves for every analysis time 0..n."""
    bk = kelly_bet(spec.theta0, spec.theta1)
    g = spec.theta1 * math.log1p(bk * (1.0 / spec.theta0 - 1.0)) + (
        1.0 - spec.theta1
    ) * math.log1p(-bk)
    log_cap = math.log(spec.cap)
    steps = spec.n - np.arange(spec.n + 1)
    m_upper = np.exp(log_cap - steps * g)
    m_lower = np.exp(log_cap - (steps / 2.0) * math.log(spec.theta1 / spec.theta0))
    return DiagnosticBounds(m_upper=m_upper, m_lower=m_lower)


def replay_path(
    outcomes: Sequence[int], bets: Sequence[float], theta0: float
) -> EProcessPath:
    """Fold the capital update over a recorded outcome/bet sequence."""
    if len(outcomes) != len(bets):
        raise ValueError("outcomes and bets must have equal length")
    evalues = [1.0]
    successes = [0]
    for y, b in zip(outcomes, bets):
        evalues.append(capital_update(evalues[-1], b, y, theta0))
        successes.append(successes[-1] + (1 if y == 1 else 0))
    return EProcessPath(
        outcomes=list(outcomes),
        bets=list(bets),
        evalues=evalues,
        successes=successes,
    )
