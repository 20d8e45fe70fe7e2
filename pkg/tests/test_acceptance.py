"""Acceptance suite: one test per release criterion, each printing a verdict.

Run with `pytest tests/test_acceptance.py -v -s` to see the PASS lines. All
criteria run fully offline.
"""

import json
import time
from pathlib import Path

import numpy as np

from parley.beliefs import (
    BeliefState,
    ConcessionCurve,
    UpdateConfig,
    signal_log_likelihoods,
    update_belief,
)
from parley.engine import (
    EstimationConfig,
    NegotiationHistory,
    PreferenceView,
    ScriptedConcessionPolicy,
    run_negotiation,
    scripted_concession_policy,
)
from parley.hypotheses import build_hypothesis_space
from parley.llm import parse_extraction_payload
from parley.metrics import aggregate
from parley.scenario import Deal, feasibility_scan
from parley.signals import Signal, TruthfulPreferences, oracle_extract

from conftest import TOY_TRUTH_INDEX

FULL_DEALS = {"A2,B2,C1,D2,E3", "A2,B2,C2,D2,E3", "A2,B2,C3,D3,E3"}


def _verdict(name: str) -> None:
    print(f"\nACCEPTANCE {name}: PASS")


def test_feasibility_exactness(harbour):
    started = time.perf_counter()
    total, partial, full = feasibility_scan(harbour)
    elapsed = time.perf_counter() - started
    assert total == 720
    assert len(partial) == 21
    assert len(full) == 3
    assert elapsed < 1.0
    _verdict("feasibility-exactness (720/21/3)")


def test_hypothesis_space_cardinality(harbour):
    started = time.perf_counter()
    space = build_hypothesis_space(harbour)
    elapsed = time.perf_counter() - started
    assert space.n_weights == 120
    assert space.n_combos == 720
    assert space.size == 86_400
    assert elapsed < 1.0
    _verdict("hypothesis-space-cardinality (120 x 720 = 86,400)")


def test_posterior_soundness_suite(toy, toy_space, harbour, harbour_space):
    started = time.perf_counter()

    # (a) normalization within 1e-9 across 1,000 randomized update sequences
    rng = np.random.default_rng(2024)
    issue_ids = ("X", "Y")
    option_counts = (2, 3)
    checked = 0
    for sequence in range(1000):
        sigma = 0.1 if sequence % 5 == 0 else 1.0  # sharper sensitivity config
        cfg = UpdateConfig(
            sigma=sigma, concession=ConcessionCurve(horizon=toy.rounds)
        )
        belief = BeliefState.uniform(toy_space, "truthful")
        for t in range(1, int(rng.integers(2, 6))):
            deal = Deal(tuple(int(rng.integers(k)) for k in option_counts))
            signals = []
            if rng.random() < 0.8:
                m = int(rng.integers(2))
                if rng.random() < 0.5:
                    signals.append(
                        Signal("t", "issue", "point", (issue_ids[m],), "prefer")
                    )
                else:
                    j = int(rng.integers(option_counts[m]))
                    signals.append(
                        Signal(
                            "t", "option", "point",
                            (f"{issue_ids[m]}{j + 1}",), "oppose",
                        )
                    )
            belief = update_belief(toy_space, belief, deal, signals, t, cfg, toy)
            assert abs(np.exp(belief.log_probs).sum() - 1.0) < 1e-9
            checked += 1
    assert checked >= 1000

    # ... the full-size space stays normalized too
    cfg = UpdateConfig(concession=ConcessionCurve(horizon=24))
    belief = BeliefState.uniform(harbour_space, "DoT")
    for t, label in enumerate(("A2,B3,C4,D3,E3", "A2,B2,C2,D2,E3"), start=1):
        belief = update_belief(
            harbour_space, belief, harbour.parse_deal(label),
            [Signal("DoT", "issue", "point", ("D",), "prefer")], t, cfg, harbour,
        )
        assert abs(np.exp(belief.log_probs).sum() - 1.0) < 1e-9

    # (b) batch vs incremental on the 2-issue toy space, every entry
    cfg = UpdateConfig(concession=ConcessionCurve(horizon=toy.rounds))
    evidence = []
    rng = np.random.default_rng(7)
    for t in range(1, 7):
        deal = Deal(tuple(int(rng.integers(k)) for k in option_counts))
        signals = [
            Signal("t", "issue", "point", (issue_ids[int(rng.integers(2))],),
                   "prefer")
        ]
        evidence.append((deal, signals, t))
    incremental = BeliefState.uniform(toy_space, "t")
    joint_log = incremental.log_probs.copy()
    for deal, signals, t in evidence:
        incremental = update_belief(toy_space, incremental, deal, signals, t,
                                    cfg, toy)
        residual = toy_space.estimated_utilities(deal) - cfg.concession.target(t)
        joint_log = joint_log - residual**2 / (2 * cfg.sigma**2)
        for signal in signals:
            joint_log = joint_log + signal_log_likelihoods(toy_space, signal, toy)
    joint = np.exp(joint_log - joint_log.max())
    joint /= joint.sum()
    assert np.max(np.abs(incremental.posterior() - joint)) < 1e-9

    # (c) Luce partition sums within 1e-12
    prefer_total = np.zeros(toy_space.size)
    oppose_total = np.zeros(toy_space.size)
    for issue_id in issue_ids:
        prefer_total += np.exp(signal_log_likelihoods(
            toy_space, Signal("t", "issue", "point", (issue_id,), "prefer"), toy,
        ))
        oppose_total += np.exp(signal_log_likelihoods(
            toy_space, Signal("t", "issue", "point", (issue_id,), "oppose"), toy,
        ))
    assert np.max(np.abs(prefer_total - 1.0)) < 1e-12
    assert np.max(np.abs(oppose_total - 1.0)) < 1e-12

    for m, issue_id in enumerate(issue_ids):
        option_total = np.zeros(toy_space.size)
        for j in range(option_counts[m]):
            option_total += np.exp(signal_log_likelihoods(
                toy_space,
                Signal("t", "option", "point", (f"{issue_id}{j + 1}",), "prefer"),
                toy, floor=0.0,
            ))
        assert np.max(np.abs(option_total - 1.0)) < 1e-12

    forward = np.exp(signal_log_likelihoods(
        toy_space, Signal("t", "issue", "comparison", ("X", "Y"), "prefer"), toy,
    ))
    backward = np.exp(signal_log_likelihoods(
        toy_space, Signal("t", "issue", "comparison", ("Y", "X"), "prefer"), toy,
    ))
    assert np.max(np.abs(forward + backward - 1.0)) < 1e-12

    assert time.perf_counter() - started < 60.0
    _verdict("posterior-soundness (normalization, batch=incremental, Luce sums)")


def test_oracle_signal_convergence(toy, toy_space):
    started = time.perf_counter()
    cfg = UpdateConfig(use_offers=False, use_signals=True,
                       concession=ConcessionCurve(horizon=toy.rounds))
    party = toy.party("truthful")
    hits = 0
    runs = 200
    for run in range(runs):
        rng = np.random.default_rng(np.random.SeedSequence(run))
        signals = oracle_extract(party, rng, 50)
        belief = BeliefState.uniform(toy_space, "truthful")
        belief = update_belief(toy_space, belief, None, signals, 1, cfg, toy)
        hits += belief.map_index() == TOY_TRUTH_INDEX
    assert hits >= 0.95 * runs, f"MAP hit rate {hits}/{runs}"
    assert time.perf_counter() - started < 60.0
    _verdict(f"oracle-signal-convergence (MAP hit rate {hits}/{runs})")


def _estimation_mse(harbour, use_signals: bool, trials: int) -> float:
    policies = {p.id: scripted_concession_policy() for p in harbour.parties}
    est = EstimationConfig(
        mode="p1",
        signal_source="oracle" if use_signals else "none",
        keep_traces=False,
        update=UpdateConfig(use_offers=True, use_signals=use_signals,
                            concession=ConcessionCurve(horizon=24)),
    )
    results = [
        run_negotiation(harbour, policies, est, seed=seed)
        for seed in range(trials)
    ]
    report = aggregate(results, scenario=harbour)
    return report.mse_avg


def test_estimation_gain_with_signals(harbour):
    mse_with = _estimation_mse(harbour, use_signals=True, trials=100)
    mse_without = _estimation_mse(harbour, use_signals=False, trials=100)
    assert mse_with < mse_without
    reduction = (mse_without - mse_with) / mse_without
    assert reduction >= 0.05, f"relative reduction {reduction:.3f}"
    _verdict(
        "estimation-gain (signals on "
        f"{mse_with:.1f} < off {mse_without:.1f}, -{100 * reduction:.1f}%)"
    )


def test_agreement_gain_with_estimation(harbour):
    trials = 200

    def jittered_policies(seed):
        rng = np.random.default_rng(np.random.SeedSequence((seed, 99)))
        policies = {}
        for party in harbour.parties:
            end = float(rng.uniform(0.35, 0.45))
            beta = float(rng.uniform(0.9, 1.15))
            policies[party.id] = scripted_concession_policy(
                ConcessionCurve(end=end, beta=beta, horizon=24)
            )
        return policies

    estimating, baseline = [], []
    est = EstimationConfig(mode="all", signal_source="oracle", keep_traces=False)
    for seed in range(trials):
        policies = jittered_policies(seed)
        estimating.append(run_negotiation(harbour, policies, est, seed=seed))
        baseline.append(run_negotiation(harbour, policies, None, seed=seed))

    report_est = aggregate(estimating, scenario=harbour)
    report_none = aggregate(baseline, scenario=harbour)
    for report in (report_est, report_none):
        assert report.far <= report.par <= report.lar
    assert report_est.far >= report_none.far
    _verdict(
        f"agreement-gain (FAR estimation {report_est.far:.2f} >= "
        f"none {report_none.far:.2f}; far<=par<=lar everywhere)"
    )


def test_ground_truth_planner_always_full_agreement(harbour):
    started = time.perf_counter()
    view = harbour.public_view()
    me = harbour.party("SportCo")
    views = {}
    for party in harbour.parties[1:]:
        views[party.id] = PreferenceView(
            table={i: np.asarray(v, dtype=float) for i, v in party.scores.items()},
            accept_level=float(party.threshold),
        )
    for run in range(100):
        rng = np.random.default_rng(run)
        end = 0.4 if run == 0 else float(rng.uniform(0.3, 0.5))
        policy = ScriptedConcessionPolicy(ConcessionCurve(end=end, horizon=24))
        deal, _ = policy.propose(view, me, NegotiationHistory(), views, 24, rng)
        assert harbour.format_deal(deal) in FULL_DEALS

    est = EstimationConfig(mode="p1", signal_source="none", pin_truth=True,
                           keep_traces=False)
    policies = {p.id: scripted_concession_policy() for p in harbour.parties}
    for seed in range(10):
        result = run_negotiation(harbour, policies, est, seed=seed)
        assert result.full_agreement
        assert harbour.format_deal(result.final_deal) in FULL_DEALS
    assert time.perf_counter() - started < 30.0
    _verdict("ground-truth-planner (full-agreement deal in 100% of runs)")


def test_signal_extractor_fidelity(harbour):
    started = time.perf_counter()

    # Oracle frequencies vs Luce targets within +/-0.02 over 10,000 samples.
    party = harbour.party("SportCo")
    prefs = TruthfulPreferences.from_party(party)
    samples = 10_000
    signals = oracle_extract(party, 424242, samples,
                             kind_weights={"issue_prefer": 0.5,
                                           "option_prefer": 0.5})
    issue_counts = {i: 0 for i in prefs.issue_ids}
    option_counts: dict[str, int] = {}
    n_issue = n_option = 0
    for signal in signals:
        if signal.entity == "issue":
            issue_counts[signal.targets[0]] += 1
            n_issue += 1
        else:
            option_counts[signal.targets[0]] = (
                option_counts.get(signal.targets[0], 0) + 1
            )
            n_option += 1
    for m, issue_id in enumerate(prefs.issue_ids):
        observed = issue_counts[issue_id] / n_issue
        assert abs(observed - prefs.weights[m]) <= 0.02
    # option targets: P(issue) * Luce(option | issue)
    for m, issue_id in enumerate(prefs.issue_ids):
        scores = party.scores[issue_id]
        total = sum(scores)
        for j, score in enumerate(scores):
            expected = prefs.weights[m] * (score / total)
            observed = option_counts.get(f"{issue_id}{j + 1}", 0) / n_option
            assert abs(observed - expected) <= 0.02

    # LLM-extractor fixture parses bit-exactly.
    fixture = json.loads(
        (Path(__file__).parent / "fixtures" / "extraction_fixture.json").read_text()
    )
    parsed = parse_extraction_payload(fixture["response"], fixture["known_speakers"])
    rendered = {
        agent: [signal.to_wire() for signal in items]
        for agent, items in parsed.items()
    }
    assert rendered == fixture["expected"]

    assert time.perf_counter() - started < 60.0
    _verdict("signal-extractor-fidelity (oracle +/-0.02 over 10k; fixture exact)")
