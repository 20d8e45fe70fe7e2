"""Scikit-learn-style online estimator of one opponent's utility function.

`PreferenceEstimator` wraps the hypothesis space and Bayesian update behind
the familiar fit/partial_fit/predict surface so the opponent model composes
with sklearn tooling (`get_params`, `set_params`, `clone`). `fit` binds the
estimator to a scenario and opponent with a uniform prior; each `partial_fit`
consumes one round of evidence.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .beliefs import (
    BeliefState,
    ConcessionCurve,
    UpdateConfig,
    belief_snapshot,
    point_estimate,
    update_belief,
)
from .hypotheses import DEFAULT_MAX_HYPOTHESES, build_hypothesis_space
from .scenario import Deal, Scenario
from .signals import Signal


class PreferenceEstimator(BaseEstimator):
    """Posterior belief over an opponent's utility function.

    Parameters
    ----------
    sigma : float
        Standard deviation of the offer likelihood, in normalized utility.
    use_offers, use_signals : bool
        Evidence channels to apply during `partial_fit`.
    concession_start, concession_end, concession_beta : float
        Concession curve assumed for the opponent's target utility.
    score_scale : float
        Scale of `predict_score_table` output (100 matches score tables whose
        per-issue maxima sum to 100).
    max_hypotheses : int
        Memory budget; `fit` raises CapacityError beyond it.
    """

    def __init__(
        self,
        sigma: float = 1.0,
        use_offers: bool = True,
        use_signals: bool = True,
        concession_start: float = 1.0,
        concession_end: float = 0.4,
        concession_beta: float = 1.0,
        score_scale: float = 100.0,
        max_hypotheses: int = DEFAULT_MAX_HYPOTHESES,
    ):
        self.sigma = sigma
        self.use_offers = use_offers
        self.use_signals = use_signals
        self.concession_start = concession_start
        self.concession_end = concession_end
        self.concession_beta = concession_beta
        self.score_scale = score_scale
        self.max_hypotheses = max_hypotheses

    def _config(self, horizon: int) -> UpdateConfig:
        return UpdateConfig(
            sigma=self.sigma,
            use_offers=self.use_offers,
            use_signals=self.use_signals,
            concession=ConcessionCurve(
                start=self.concession_start,
                end=self.concession_end,
                beta=self.concession_beta,
                horizon=horizon,
            ),
        )

    def fit(self, scenario: Scenario, opponent: str) -> "PreferenceEstimator":
        """Bind to a scenario and opponent; initialize a uniform prior."""
        scenario.party(opponent)  # raises UnknownPartyError early
        self.scenario_ = scenario
        self.opponent_ = opponent
        self.space_ = build_hypothesis_space(scenario, max_size=self.max_hypotheses)
        self.n_hypotheses_ = self.space_.size
        self.config_ = self._config(scenario.rounds)
        self.belief_ = BeliefState.uniform(self.space_, opponent)
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "belief_"):
            raise NotFittedError(
                "PreferenceEstimator is not fitted; call fit(scenario, opponent)"
            )

    @property
    def round_(self) -> int:
        self._check_fitted()
        return self.belief_.round

    def partial_fit(
        self,
        deal: Deal | None = None,
        signals: Sequence[Signal] = (),
        t: int | None = None,
    ) -> "PreferenceEstimator":
        """Apply one round of evidence (Naive-Bayes fusion, then normalize)."""
        self._check_fitted()
        if t is None:
            t = self.belief_.round + 1
        self.belief_ = update_belief(
            self.space_, self.belief_, deal, signals, t, self.config_, self.scenario_
        )
        return self

    def predict(self, deals: Deal | Iterable[Deal], mode: str = "mean") -> np.ndarray:
        """Estimated normalized utility of deals under the posterior.

        mode "mean" integrates over the posterior; "map" evaluates the single
        argmax hypothesis.
        """
        self._check_fitted()
        single = isinstance(deals, Deal)
        items = [deals] if single else list(deals)
        if mode == "mean":
            probs = self.belief_.posterior()
            out = np.array(
                [float(probs @ self.space_.estimated_utilities(d)) for d in items]
            )
        elif mode == "map":
            k = self.belief_.map_index()
            out = np.array([self.space_.estimated_utility(k, d) for d in items])
        else:
            raise ValueError(f"unknown predict mode {mode!r}")
        return out[0] if single else out

    def predict_score_table(self, mode: str = "mean") -> dict[str, np.ndarray]:
        """Score-table-shaped point estimate at `score_scale`."""
        self._check_fitted()
        return point_estimate(
            self.space_, self.belief_, mode=mode, scale=self.score_scale
        )

    def snapshot(self, top_n: int = 10) -> dict:
        """JSON-ready belief summary (entropy, MAP, top-N, estimate table)."""
        self._check_fitted()
        return belief_snapshot(
            self.space_, self.belief_, top_n=top_n, scale=self.score_scale
        )
