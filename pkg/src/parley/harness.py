"""Experiment harness: method presets, seeded trial batches, report output.

A master seed expands into independent per-trial seeds via SeedSequence
spawn keys, so any single trial is reproducible in isolation. Reports carry a
fingerprint of the resolved configuration; identical fingerprint + seed means
identical output files when no live endpoint is involved.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .beliefs import ConcessionCurve, UpdateConfig
from .engine import (
    EstimationConfig,
    TrialResult,
    llm_agent_policy,
    run_negotiation,
    scripted_concession_policy,
)
from .errors import ConfigurationError
from .llm import ChatCompletionClient, EndpointConfig
from .metrics import MetricsReport, aggregate, render_report
from .scenario import Scenario, bundled_scenario, load_scenario

METHODS = (
    "proposed-p1",
    "proposed-all",
    "base-om-p1",
    "base-om-all",
    "scripted",
    "base-llm",
    "llm-pe",
)

LLM_METHODS = ("base-llm", "llm-pe")


@dataclass(frozen=True)
class RunConfig:
    """Resolved experiment configuration; mirrors the CLI flags."""

    scenario: str | None = None        # path to a scenario file; None = bundled
    method: str = "proposed-p1"
    trials: int = 100
    seed: int = 0
    workers: int = 1
    signal_source: str = "oracle"      # oracle | llm
    sigma: float = 1.0
    concession_start: float = 1.0
    concession_end: float = 0.4
    concession_beta: float = 1.0
    signals_per_round: int = 1
    jitter: float = 0.05               # +/- range of per-trial concession-end jitter
    out: str | None = None
    force: bool = False
    mse_csv: bool = False
    endpoint_url: str | None = None
    model: str | None = None
    api_token_env: str = "PARLEY_API_TOKEN"

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigurationError(
                f"method: unknown preset {self.method!r}; choose from {METHODS}"
            )
        if self.trials < 1:
            raise ConfigurationError(f"trials: must be >= 1, got {self.trials}")
        if self.workers < 1:
            raise ConfigurationError(f"workers: must be >= 1, got {self.workers}")
        if self.sigma <= 0:
            raise ConfigurationError(f"sigma: must be positive, got {self.sigma}")
        if self.signal_source not in ("oracle", "llm"):
            raise ConfigurationError(
                f"signal_source: must be 'oracle' or 'llm', got {self.signal_source!r}"
            )
        needs_endpoint = self.method in LLM_METHODS or self.signal_source == "llm"
        if needs_endpoint and not self.endpoint_url:
            raise ConfigurationError(
                "endpoint_url: required for LLM-backed methods or signal sources"
            )
        if needs_endpoint and not self.model:
            raise ConfigurationError("model: required alongside endpoint_url")


# Fields that change where/how an experiment executes but not its results;
# they stay out of the fingerprint and of report.json, so a rerun of the same
# experiment produces byte-identical reports.
EXECUTION_FIELDS = frozenset({"workers", "out", "force", "mse_csv"})


def experiment_config(cfg: RunConfig) -> dict:
    """The result-defining subset of the configuration."""
    return {
        k: v for k, v in dataclasses.asdict(cfg).items()
        if k not in EXECUTION_FIELDS
    }


def config_fingerprint(cfg: RunConfig) -> str:
    """Short stable hash of the result-defining configuration."""
    canonical = json.dumps(experiment_config(cfg), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def trial_seed(master_seed: int, index: int) -> int:
    """Per-trial seed derived by a counter-based split of the master seed."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _estimation_for(cfg: RunConfig, keep_traces: bool) -> EstimationConfig | None:
    mode = {
        "proposed-p1": "p1",
        "proposed-all": "all",
        "base-om-p1": "p1",
        "base-om-all": "all",
    }.get(cfg.method)
    if mode is None:
        return None
    use_signals = cfg.method.startswith("proposed")
    update = UpdateConfig(
        sigma=cfg.sigma,
        use_offers=True,
        use_signals=use_signals,
        concession=ConcessionCurve(
            start=cfg.concession_start,
            end=cfg.concession_end,
            beta=cfg.concession_beta,
        ),
    )
    return EstimationConfig(
        mode=mode,
        signal_source=cfg.signal_source if use_signals else "none",
        signals_per_round=cfg.signals_per_round,
        update=update,
        keep_traces=keep_traces,
    )


def _policies_for(cfg: RunConfig, scenario: Scenario, trial_index: int,
                  client: ChatCompletionClient | None):
    if cfg.method == "base-llm":
        return {p.id: llm_agent_policy(client) for p in scenario.parties}
    rng = np.random.default_rng(
        np.random.SeedSequence(cfg.seed, spawn_key=(trial_index, 1))
    )
    policies = {}
    for party in scenario.parties:
        end = cfg.concession_end
        beta = cfg.concession_beta
        if cfg.jitter > 0:
            end = float(np.clip(end + rng.uniform(-cfg.jitter, cfg.jitter), 0.0, 1.0))
            beta = float(max(beta * rng.uniform(0.9, 1.15), 1e-3))
        curve = ConcessionCurve(
            start=cfg.concession_start, end=min(end, cfg.concession_start),
            beta=beta, horizon=scenario.rounds,
        )
        policies[party.id] = scripted_concession_policy(curve)
    return policies


def _load(cfg: RunConfig) -> Scenario:
    return bundled_scenario() if cfg.scenario is None else load_scenario(cfg.scenario)


def run_trial(cfg: RunConfig, trial_index: int,
              scenario: Scenario | None = None,
              keep_traces: bool | None = None,
              client: ChatCompletionClient | None = None) -> TrialResult:
    """Run one trial of an experiment, reproducible in isolation."""
    cfg.validate()
    if cfg.method == "llm-pe":
        raise ConfigurationError(
            "method: 'llm-pe' is a configuration hook only; it is not runnable "
            "in this build"
        )
    scenario = scenario or _load(cfg)
    if keep_traces is None:
        keep_traces = cfg.out is not None
    estimation = _estimation_for(cfg, keep_traces)
    policies = _policies_for(cfg, scenario, trial_index, client)
    return run_negotiation(
        scenario, policies, estimation, seed=trial_seed(cfg.seed, trial_index),
        llm_client=client,
    )


def _run_trial_job(args: tuple[dict, int]) -> TrialResult:
    cfg_dict, index = args
    cfg = RunConfig(**cfg_dict)
    return run_trial(cfg, index)


def run_experiment(cfg: RunConfig) -> tuple[MetricsReport, list[TrialResult]]:
    """Run all trials, aggregate, and (if configured) write output files."""
    cfg.validate()
    scenario = _load(cfg)
    fingerprint = config_fingerprint(cfg)

    client = None
    if cfg.method in LLM_METHODS or cfg.signal_source == "llm":
        client = ChatCompletionClient(
            EndpointConfig(
                base_url=cfg.endpoint_url, model=cfg.model,
                api_token_env=cfg.api_token_env,
            )
        )

    if cfg.workers > 1 and client is None:
        jobs = [(dataclasses.asdict(cfg), i) for i in range(cfg.trials)]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_trial_job, jobs))
    else:
        results = [
            run_trial(cfg, i, scenario=scenario, client=client)
            for i in range(cfg.trials)
        ]

    report = aggregate(results, scenario=scenario, config_fingerprint=fingerprint)
    if cfg.out is not None:
        write_outputs(Path(cfg.out), cfg, scenario, report, results)
    return report, results


def trace_lines(scenario: Scenario, result: TrialResult, trial_index: int):
    """Yield JSON-ready dicts for one trial's line-delimited trace."""
    estimators = sorted(result.belief_traces)
    yield {
        "type": "meta",
        "scenario": scenario.name,
        "trial": trial_index,
        "seed": result.seed,
        "estimators": estimators,
    }
    for estimator in estimators:
        for opponent, snaps in sorted(result.belief_traces[estimator].items()):
            for snap in snaps:
                yield {"type": "belief", "estimator": estimator, **snap}
    for record in result.history.records:
        line = {
            "type": "round",
            "round": record.round,
            "speaker": record.speaker,
            "deal": scenario.format_deal(record.deal),
            "utterance": record.utterance,
            "signals": [s.to_wire() for s in record.signals],
        }
        summary = {}
        for estimator in estimators:
            per_opponent = {}
            for opponent, snaps in result.belief_traces[estimator].items():
                latest = max(
                    (s for s in snaps if s["round"] <= record.round),
                    key=lambda s: s["round"],
                )
                per_opponent[opponent] = {
                    "map_index": latest["map"]["index"] if latest["map"] else None,
                    "entropy": latest["entropy"],
                }
            summary[estimator] = per_opponent
        if summary:
            line["beliefs"] = summary
        yield line
    yield {
        "type": "result",
        "final_deal": scenario.format_deal(result.final_deal)
        if result.final_deal is not None
        else None,
        "satisfied_count": result.satisfied_count,
        "vetoes_satisfied": result.vetoes_satisfied,
        "full_agreement": result.full_agreement,
        "partial_agreement": result.partial_agreement,
        "latent_hit": result.latent_hit,
        "aborted": result.aborted,
        "abort_reason": result.abort_reason,
    }


def _mse_trajectory_rows(scenario: Scenario, results: list[TrialResult]):
    """Per-round MSE of the leader's estimates, averaged over trials."""
    from .metrics import score_mse

    leader = scenario.parties[0].id
    opponents = sorted(p.id for p in scenario.parties if p.id != leader)
    sums: dict[tuple[int, str], float] = {}
    counts: dict[tuple[int, str], int] = {}
    for result in results:
        traces = result.belief_traces.get(leader, {})
        for opponent, snaps in traces.items():
            truth = scenario.party(opponent).scores
            latest: dict | None = None
            snap_by_round = {s["round"]: s for s in snaps}
            for t in range(0, scenario.rounds + 1):
                latest = snap_by_round.get(t, latest)
                if latest is None:
                    continue
                key = (t, opponent)
                sums[key] = sums.get(key, 0.0) + score_mse(latest["estimate"], truth)
                counts[key] = counts.get(key, 0) + 1
    for t in range(0, scenario.rounds + 1):
        row = {"round": t}
        values = []
        for opponent in opponents:
            key = (t, opponent)
            if key in counts:
                row[opponent] = sums[key] / counts[key]
                values.append(row[opponent])
        if values:
            row["avg"] = sum(values) / len(values)
            yield row


def write_outputs(out_dir: Path, cfg: RunConfig, scenario: Scenario,
                  report: MetricsReport, results: list[TrialResult]) -> None:
    """Write report.json, report.txt, traces/, and the optional MSE CSV."""
    if out_dir.exists() and any(out_dir.iterdir()) and not cfg.force:
        raise ConfigurationError(
            f"out: directory {out_dir} is not empty; pass force to overwrite"
        )
    traces_dir = out_dir / "traces"
    traces_dir.mkdir(parents=True, exist_ok=True)

    payload = {
        "config": experiment_config(cfg),
        "fingerprint": report.config_fingerprint,
        "report": report.to_dict(),
    }
    (out_dir / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True))
    (out_dir / "report.txt").write_text(render_report(report) + "\n")

    for i, result in enumerate(results):
        path = traces_dir / f"trial_{i:05d}.jsonl"
        with path.open("w") as fh:
            for line in trace_lines(scenario, result, i):
                fh.write(json.dumps(line, sort_keys=True) + "\n")

    if cfg.mse_csv:
        rows = list(_mse_trajectory_rows(scenario, results))
        if rows:
            opponents = sorted(p.id for p in scenario.parties
                               if p.id != scenario.parties[0].id)
            header = ["round", *opponents, "avg"]
            lines = [",".join(header)]
            for row in rows:
                lines.append(
                    ",".join(
                        str(row.get(col, "")) if col == "round"
                        else (f"{row[col]:.4f}" if col in row else "")
                        for col in header
                    )
                )
            (out_dir / "mse_per_round.csv").write_text("\n".join(lines) + "\n")
