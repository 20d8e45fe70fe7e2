"""Bayesian belief tracking over the hypothesis space.

Evidence enters through two likelihood channels:

* numerical offers: log P(d | h) = -(U_hat(d; h) - u'(t))^2 / (2 sigma^2) up to
  a shared constant, where u'(t) is a concession-based target utility, and
* linguistic signals: Luce-choice log ratios over the hypothesis's weight and
  shape strengths.

Updates multiply both channels under a Naive Bayes assumption and renormalize.
All accumulation is in log space; strengths are floored at STRENGTH_FLOOR
before ratios so no hypothesis ever reaches exactly log(0).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericalBeliefError, SignalValidationError
from .hypotheses import HypothesisSpace
from .scenario import Deal, Scenario
from .signals import (
    ENTITY_ISSUE,
    ENTITY_OPTION,
    STANCE_OPPOSE,
    STANCE_PREFER,
    STRENGTH_FLOOR,
    TYPE_COMPARISON,
    TYPE_POINT,
    Signal,
    resolve_signal,
)


@dataclass(frozen=True)
class ConcessionCurve:
    """Assumed target utility u'(t): start at round 1, end at round T.

    u'(t) = end + (start - end) * (1 - ((t-1)/(T-1))^beta); monotone
    non-increasing for beta > 0.
    """

    start: float = 1.0
    end: float = 0.4
    beta: float = 1.0
    horizon: int = 24

    def __post_init__(self):
        if not 0.0 <= self.end <= self.start <= 1.0:
            raise ValueError(
                f"need 0 <= end <= start <= 1, got start={self.start} end={self.end}"
            )
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")

    def target(self, t: int | float) -> float:
        if not 1 <= t <= self.horizon:
            raise ValueError(f"round {t} outside 1..{self.horizon}")
        if self.horizon == 1:
            return self.start
        progress = ((t - 1) / (self.horizon - 1)) ** self.beta
        return self.end + (self.start - self.end) * (1.0 - progress)


def target_utility(curve: ConcessionCurve, t: int | float) -> float:
    """The assumed target utility at round t under a concession curve."""
    return curve.target(t)


@dataclass(frozen=True)
class UpdateConfig:
    """Knobs of the belief update: offer noise scale and evidence switches."""

    sigma: float = 1.0
    use_offers: bool = True
    use_signals: bool = True
    concession: ConcessionCurve = ConcessionCurve()

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass
class BeliefState:
    """Log posterior over all hypotheses about one opponent."""

    opponent: str
    log_probs: np.ndarray
    round: int = 0

    @classmethod
    def uniform(cls, space: HypothesisSpace, opponent: str) -> "BeliefState":
        return cls(
            opponent=opponent,
            log_probs=np.full(space.size, -np.log(space.size)),
            round=0,
        )

    def posterior(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def entropy(self) -> float:
        p = self.posterior()
        nonzero = p > 0
        return float(-np.sum(p[nonzero] * np.log(p[nonzero])))

    def map_index(self) -> int:
        """Index of the maximum-a-posteriori hypothesis (lowest index on ties)."""
        return int(np.argmax(self.log_probs))


def _log_normalize(log_values: np.ndarray) -> np.ndarray:
    peak = np.max(log_values)
    shifted = log_values - peak
    return shifted - np.log(np.sum(np.exp(shifted)))


def offer_log_likelihoods(
    space: HypothesisSpace, deal: Deal, t: int, cfg: UpdateConfig
) -> np.ndarray:
    """Offer-channel log likelihood for every hypothesis (shared constant dropped)."""
    residual = space.estimated_utilities(deal) - cfg.concession.target(t)
    return -(residual ** 2) / (2.0 * cfg.sigma ** 2)


def offer_log_likelihood(
    space: HypothesisSpace, index: int, deal: Deal, t: int, cfg: UpdateConfig
) -> float:
    residual = space.estimated_utility(index, deal) - cfg.concession.target(t)
    return float(-(residual ** 2) / (2.0 * cfg.sigma ** 2))


def _floored(values: np.ndarray, floor: float) -> np.ndarray:
    return np.maximum(values, floor)


def luce_log_prob(strengths, index: int, floor: float = STRENGTH_FLOOR) -> float:
    """Reference Luce choice rule: log(strength_i / sum of strengths).

    Strengths are floored before the ratio; this scalar form is what every
    vectorized signal-likelihood case reduces to.
    """
    values = _floored(np.asarray(strengths, dtype=float), floor)
    return float(np.log(values[index]) - np.log(values.sum()))


def signal_log_likelihoods(
    space: HypothesisSpace,
    signal: Signal,
    scenario: Scenario,
    floor: float = STRENGTH_FLOOR,
) -> np.ndarray:
    """Luce-choice log likelihood of a signal for every hypothesis.

    Case analysis over (entity, signal_type, stance); comparison signals with
    stance "oppose" are treated as the reversed "prefer" comparison. Returns a
    vector of shape (space.size,). Raises SignalValidationError on targets the
    scenario does not contain.
    """
    refs = resolve_signal(signal, scenario)
    # floor=0 legitimately yields log(0) = -inf for zero-strength targets
    with np.errstate(divide="ignore"):
        return _signal_log_likelihood_cases(space, signal, refs, floor)


def _signal_log_likelihood_cases(space, signal, refs, floor):
    weights = space.weights  # (n_weights, M)
    n_issues = space.n_issues

    def broadcast_weight_term(per_weight: np.ndarray) -> np.ndarray:
        return np.repeat(per_weight, space.n_combos)

    def broadcast_combo_term(per_combo: np.ndarray) -> np.ndarray:
        return np.tile(per_combo, space.n_weights)

    if signal.entity == ENTITY_ISSUE and signal.signal_type == TYPE_POINT:
        m = refs[0][0]
        w = _floored(weights[:, m], floor)
        if signal.stance == STANCE_PREFER:
            # Weights are normalized, so the Luce denominator is 1.
            per_weight = np.log(w) - np.log(_floored(weights.sum(axis=1), floor))
        else:
            if n_issues < 2:
                raise SignalValidationError("oppose-issue signal needs >= 2 issues")
            per_weight = np.log(_floored(1.0 - weights[:, m], floor)) - np.log(n_issues - 1)
        return broadcast_weight_term(per_weight)

    if signal.entity == ENTITY_ISSUE and signal.signal_type == TYPE_COMPARISON:
        (x, _), (y, _) = refs
        if signal.stance == STANCE_OPPOSE:
            x, y = y, x
        wx = _floored(weights[:, x], floor)
        wy = _floored(weights[:, y], floor)
        return broadcast_weight_term(np.log(wx) - np.log(wx + wy))

    if signal.entity == ENTITY_OPTION and signal.signal_type == TYPE_POINT:
        m, j = refs[0]
        values = space.combo_values[m]  # (n_combos, K_m)
        if signal.stance == STANCE_PREFER:
            num = _floored(values[:, j], floor)
            den = _floored(values, floor).sum(axis=1)
            per_combo = np.log(num) - np.log(den)
        else:
            k = space.option_counts[m]
            if k < 2:
                raise SignalValidationError("oppose-option signal needs >= 2 options")
            normalized = values / values.sum(axis=1, keepdims=True)
            per_combo = np.log(_floored(1.0 - normalized[:, j], floor)) - np.log(k - 1)
        return broadcast_combo_term(per_combo)

    # Option comparison: strength of a reference is w_issue * v_issue(option).
    (mx, jx), (my, jy) = refs
    if signal.stance == STANCE_OPPOSE:
        (mx, jx), (my, jy) = (my, jy), (mx, jx)
    vx = space.combo_values[mx][:, jx]  # (n_combos,)
    vy = space.combo_values[my][:, jy]
    sx = _floored(weights[:, mx, None] * vx[None, :], floor)  # (n_weights, n_combos)
    sy = _floored(weights[:, my, None] * vy[None, :], floor)
    return (np.log(sx) - np.log(sx + sy)).reshape(space.size)


def signal_log_likelihood(
    space: HypothesisSpace,
    index: int,
    signal: Signal,
    scenario: Scenario,
    floor: float = STRENGTH_FLOOR,
) -> float:
    """Signal log likelihood for a single hypothesis index."""
    return float(signal_log_likelihoods(space, signal, scenario, floor=floor)[index])


def update_belief(
    space: HypothesisSpace,
    belief: BeliefState,
    deal: Deal | None,
    signals: Sequence[Signal],
    t: int,
    cfg: UpdateConfig,
    scenario: Scenario,
) -> BeliefState:
    """One Naive-Bayes fusion step; returns a new, normalized BeliefState.

    With both evidence channels disabled (or no evidence supplied) the belief
    is unchanged apart from the round stamp.
    """
    if t <= belief.round:
        raise ValueError(
            f"update round {t} must exceed last-updated round {belief.round}"
        )
    log_probs = belief.log_probs.copy()
    if deal is not None and cfg.use_offers:
        log_probs = log_probs + offer_log_likelihoods(space, deal, t, cfg)
    if cfg.use_signals:
        for signal in signals:
            log_probs = log_probs + signal_log_likelihoods(space, signal, scenario)
    log_probs = _log_normalize(log_probs)
    if not np.all(np.isfinite(log_probs)):
        bad = int(np.argmin(np.isfinite(log_probs)))
        raise NumericalBeliefError(bad, f"round {t} update for {belief.opponent}")
    return BeliefState(opponent=belief.opponent, log_probs=log_probs, round=t)


def point_estimate(
    space: HypothesisSpace,
    belief: BeliefState,
    mode: str = "mean",
    scale: float = 100.0,
) -> dict[str, np.ndarray]:
    """Score-table-shaped estimate of the opponent's utility function.

    mode "mean": scale * sum_k P(h_k) w_m^(k) v_m^(k)(o) per issue/option.
    mode "map": the single argmax hypothesis's scaled table (lowest index wins
    ties). The default scale of 100 matches score tables whose per-issue maxima
    sum to 100.
    """
    if mode == "mean":
        return space.mean_tables(belief.posterior(), scale=scale)
    if mode == "map":
        return space.hypothesis_table(belief.map_index(), scale=scale)
    raise ValueError(f"unknown point-estimate mode {mode!r}")


def belief_snapshot(
    space: HypothesisSpace,
    belief: BeliefState,
    top_n: int = 10,
    scale: float = 100.0,
) -> dict:
    """JSON-ready summary: entropy, MAP, top-N hypotheses, estimate table."""
    probs = belief.posterior()
    order = np.argsort(-probs, kind="stable")[:top_n]
    top = []
    for k in order:
        h = space.hypothesis(int(k))
        top.append(
            {
                "index": h.index,
                "weight_index": h.weight_index,
                "ranking": [int(r) for r in space.rankings[h.weight_index]],
                "apexes": list(h.shape_indices),
                "prob": float(probs[k]),
            }
        )
    estimate = point_estimate(space, belief, mode="mean", scale=scale)
    return {
        "opponent": belief.opponent,
        "round": belief.round,
        "entropy": belief.entropy(),
        "map": top[0] if top else None,
        "top": top,
        "estimate": {issue: [float(v) for v in vec] for issue, vec in estimate.items()},
    }

