"""Multi-party, multi-issue negotiation simulator with Bayesian opponent modeling."""

from .beliefs import (
    BeliefState,
    ConcessionCurve,
    UpdateConfig,
    belief_snapshot,
    offer_log_likelihood,
    offer_log_likelihoods,
    point_estimate,
    signal_log_likelihood,
    signal_log_likelihoods,
    target_utility,
    update_belief,
)
from .engine import (
    AgentPolicy,
    EstimationConfig,
    NegotiationHistory,
    PreferenceView,
    RoundRecord,
    TrialResult,
    belief_driven_policy,
    llm_agent_policy,
    run_negotiation,
    scripted_concession_policy,
)
from .estimator import PreferenceEstimator
from .hypotheses import (
    Hypothesis,
    HypothesisSpace,
    additive_utility,
    build_hypothesis_space,
    rank_weights,
    triangular_shape,
)
from .llm import ChatCompletionClient, EndpointConfig, llm_extract
from .metrics import MetricsReport, aggregate, render_report, score_mse
from .scenario import (
    Deal,
    Issue,
    Party,
    PublicScenario,
    Scenario,
    bundled_scenario,
    feasibility_scan,
    load_scenario,
)
from .signals import Signal, Utterance, oracle_extract, validate_signal

__version__ = "0.1.0"

__all__ = [
    "AgentPolicy",
    "BeliefState",
    "ChatCompletionClient",
    "ConcessionCurve",
    "Deal",
    "EndpointConfig",
    "EstimationConfig",
    "Hypothesis",
    "HypothesisSpace",
    "Issue",
    "MetricsReport",
    "NegotiationHistory",
    "Party",
    "PreferenceEstimator",
    "PreferenceView",
    "PublicScenario",
    "RoundRecord",
    "Scenario",
    "Signal",
    "TrialResult",
    "UpdateConfig",
    "Utterance",
    "additive_utility",
    "aggregate",
    "belief_driven_policy",
    "belief_snapshot",
    "build_hypothesis_space",
    "bundled_scenario",
    "feasibility_scan",
    "llm_agent_policy",
    "llm_extract",
    "load_scenario",
    "offer_log_likelihood",
    "offer_log_likelihoods",
    "oracle_extract",
    "point_estimate",
    "rank_weights",
    "render_report",
    "run_negotiation",
    "score_mse",
    "scripted_concession_policy",
    "signal_log_likelihood",
    "signal_log_likelihoods",
    "target_utility",
    "triangular_shape",
    "update_belief",
    "validate_signal",
]
