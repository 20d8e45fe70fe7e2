import math

import numpy as np
import pytest

from parley.beliefs import BeliefState, point_estimate
from parley.engine import NegotiationHistory, TrialResult
from parley.metrics import MetricsReport, aggregate, render_report, score_mse


def synthetic_result(full=False, partial=False, latent=False, aborted=False,
                     estimates=None):
    return TrialResult(
        scenario_name="synthetic",
        seed=0,
        history=NegotiationHistory(),
        final_deal=None,
        satisfied_count=0,
        vetoes_satisfied=False,
        full_agreement=full,
        partial_agreement=partial or full,
        latent_hit=latent or partial or full,
        aborted=aborted,
        final_estimates=estimates or {},
    )


def test_aggregate_simple_mix():
    results = [
        synthetic_result(full=True),
        synthetic_result(partial=True),
        synthetic_result(),
    ]
    report = aggregate(results)
    assert report.far == pytest.approx(1 / 3)
    assert report.par == pytest.approx(2 / 3)
    assert report.lar == pytest.approx(2 / 3)


def test_aggregate_all_full():
    report = aggregate([synthetic_result(full=True)] * 4)
    assert (report.far, report.par, report.lar) == (1.0, 1.0, 1.0)
    assert report.far_sd == 0.0


def test_aggregate_counts_exactly_over_500():
    results = (
        [synthetic_result(full=True)] * 120
        + [synthetic_result(partial=True)] * 80
        + [synthetic_result(latent=True)] * 150
        + [synthetic_result()] * 150
    )
    assert len(results) == 500
    report = aggregate(results)
    assert report.far == pytest.approx(120 / 500)
    assert report.par == pytest.approx(200 / 500)
    assert report.lar == pytest.approx(350 / 500)
    for rate, sd in ((report.far, report.far_sd), (report.par, report.par_sd),
                     (report.lar, report.lar_sd)):
        assert sd == pytest.approx(math.sqrt(rate * (1 - rate) / 500))
    assert report.far_sd <= 0.03


def test_aggregate_empty_rejected():
    with pytest.raises(ValueError):
        aggregate([])


def test_aggregate_counts_aborted_as_failures():
    results = [synthetic_result(full=True), synthetic_result(aborted=True)]
    report = aggregate(results)
    assert report.trials == 2
    assert report.aborted == 1
    assert report.far == pytest.approx(0.5)


def test_aggregate_permutation_invariant():
    rng = np.random.default_rng(0)
    results = [synthetic_result(full=rng.random() < 0.4,
                                partial=rng.random() < 0.5,
                                latent=rng.random() < 0.6) for _ in range(60)]
    forward = aggregate(results)
    shuffled = list(results)
    rng.shuffle(shuffled)
    backward = aggregate(shuffled)
    assert forward.to_dict() == backward.to_dict()


def test_score_mse_zero_for_exact_match(harbour):
    truth = harbour.party("SportCo").scores
    estimate = {i: [float(v) for v in vec] for i, vec in truth.items()}
    assert score_mse(estimate, truth) == 0.0


def test_score_mse_constant_offset_is_one(harbour):
    truth = harbour.party("SportCo").scores
    cells = sum(len(v) for v in truth.values())
    assert cells == 19
    estimate = {i: [v + 1.0 for v in vec] for i, vec in truth.items()}
    assert score_mse(estimate, truth) == pytest.approx(1.0)


def test_score_mse_uniform_posterior_frozen_value(harbour, harbour_space):
    # Frozen by an independent one-shot oracle script: the uniform posterior's
    # mean table against SportCo's true scores over 19 cells.
    belief = BeliefState.uniform(harbour_space, "SportCo")
    estimate = point_estimate(harbour_space, belief, mode="mean", scale=100.0)
    value = score_mse(estimate, harbour.party("SportCo").scores)
    assert value == pytest.approx(113.50877192982455, abs=1e-9)


def test_score_mse_shape_mismatch(harbour):
    truth = harbour.party("SportCo").scores
    wrong_width = {i: list(vec) + [0.0] for i, vec in truth.items()}
    with pytest.raises(ValueError):
        score_mse(wrong_width, truth)
    wrong_issues = {i + "_": vec for i, vec in truth.items()}
    with pytest.raises(ValueError):
        score_mse(wrong_issues, truth)


def test_score_mse_invariant_to_consistent_issue_permutation(harbour):
    truth = dict(harbour.party("Mayor").scores)
    estimate = {i: [v + 0.5 for v in vec] for i, vec in truth.items()}
    reversed_truth = dict(reversed(list(truth.items())))
    reversed_estimate = dict(reversed(list(estimate.items())))
    assert score_mse(estimate, truth) == pytest.approx(
        score_mse(reversed_estimate, reversed_truth)
    )


def test_aggregate_computes_leader_mse(harbour):
    truth = harbour.party("DoT").scores
    exact = {i: [float(v) for v in vec] for i, vec in truth.items()}
    offset = {i: [float(v) + 2.0 for v in vec] for i, vec in truth.items()}
    results = [
        synthetic_result(estimates={"SportCo": {"DoT": exact}}),
        synthetic_result(estimates={"SportCo": {"DoT": offset}}),
    ]
    report = aggregate(results, scenario=harbour)
    assert report.mse_per_opponent == {"DoT": pytest.approx(2.0)}
    assert report.mse_avg == pytest.approx(2.0)


def test_metrics_report_validates_rate_ordering():
    with pytest.raises(ValueError):
        MetricsReport(trials=1, aborted=0, far=0.9, par=0.5, lar=1.0,
                      far_sd=0.0, par_sd=0.0, lar_sd=0.0)
    with pytest.raises(ValueError):
        MetricsReport(trials=1, aborted=0, far=-0.1, par=0.5, lar=1.0,
                      far_sd=0.0, par_sd=0.0, lar_sd=0.0)


def test_render_report_mentions_rates():
    report = aggregate([synthetic_result(full=True), synthetic_result()])
    text = render_report(report)
    assert "FAR" in text and "PAR" in text and "LAR" in text
    assert "0.500" in text
