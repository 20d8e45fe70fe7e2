"""Aggregation of trial results into agreement rates and estimation error.

Rates: FAR (all parties satisfied by the final deal), PAR (at least min_agree
including every veto holder), LAR (some round proposed a partially feasible
deal). Aborted trials count as non-agreement in all three and are reported
separately. Rate uncertainty is the binomial standard error sqrt(p(1-p)/n).

MSE compares the leader's final-round point estimates against true score
tables, averaged over all issue-option cells per opponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .engine import TrialResult
from .scenario import Scenario


@dataclass(frozen=True)
class MetricsReport:
    trials: int
    aborted: int
    far: float
    par: float
    lar: float
    far_sd: float
    par_sd: float
    lar_sd: float
    mse_per_opponent: dict[str, float] = field(default_factory=dict)
    mse_avg: float | None = None
    config_fingerprint: str = ""

    def __post_init__(self):
        for name, rate in (("far", self.far), ("par", self.par), ("lar", self.lar)):
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name}={rate} outside [0, 1]")
        if not self.far <= self.par + 1e-12 or not self.par <= self.lar + 1e-12:
            raise ValueError(
                f"rate ordering violated: far={self.far} par={self.par} lar={self.lar}"
            )
        if self.mse_avg is not None and self.mse_avg < 0:
            raise ValueError(f"mse_avg={self.mse_avg} negative")

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "aborted": self.aborted,
            "far": self.far,
            "par": self.par,
            "lar": self.lar,
            "far_sd": self.far_sd,
            "par_sd": self.par_sd,
            "lar_sd": self.lar_sd,
            "mse_per_opponent": dict(self.mse_per_opponent),
            "mse_avg": self.mse_avg,
            "config_fingerprint": self.config_fingerprint,
        }


def score_mse(
    estimate: Mapping[str, Sequence[float]], truth: Mapping[str, Sequence[int]]
) -> float:
    """Mean squared error over all (issue, option) cells of two score tables."""
    if set(estimate) != set(truth):
        raise ValueError(
            f"issue sets differ: {sorted(estimate)} vs {sorted(truth)}"
        )
    total = 0.0
    cells = 0
    for issue_id, truth_vec in truth.items():
        est_vec = estimate[issue_id]
        if len(est_vec) != len(truth_vec):
            raise ValueError(
                f"issue {issue_id}: estimate has {len(est_vec)} options, "
                f"truth has {len(truth_vec)}"
            )
        for e, s in zip(est_vec, truth_vec):
            total += (float(e) - float(s)) ** 2
            cells += 1
    return total / cells


def _rate(flags: Sequence[bool]) -> tuple[float, float]:
    n = len(flags)
    p = sum(flags) / n
    return p, math.sqrt(p * (1.0 - p) / n)


def aggregate(
    results: Sequence[TrialResult],
    scenario: Scenario | None = None,
    estimator: str | None = None,
    config_fingerprint: str = "",
) -> MetricsReport:
    """Fold trial results into a MetricsReport.

    When `scenario` is given, MSE is computed from the final estimates of
    `estimator` (default: the scenario leader) against true score tables,
    averaged over the trials that carry them.
    """
    if not results:
        raise ValueError("no trial results to aggregate")
    far, far_sd = _rate([r.full_agreement for r in results])
    par, par_sd = _rate([r.partial_agreement for r in results])
    lar, lar_sd = _rate([r.latent_hit for r in results])
    aborted = sum(r.aborted for r in results)

    mse_per_opponent: dict[str, float] = {}
    mse_avg: float | None = None
    if scenario is not None:
        leader = estimator or scenario.parties[0].id
        sums: dict[str, float] = {}
        counts: dict[str, int] = {}
        for result in results:
            estimates = result.final_estimates.get(leader, {})
            for opponent, table in estimates.items():
                truth = scenario.party(opponent).scores
                sums[opponent] = sums.get(opponent, 0.0) + score_mse(table, truth)
                counts[opponent] = counts.get(opponent, 0) + 1
        if counts:
            mse_per_opponent = {
                q: sums[q] / counts[q] for q in sorted(counts)
            }
            mse_avg = sum(mse_per_opponent.values()) / len(mse_per_opponent)

    return MetricsReport(
        trials=len(results),
        aborted=aborted,
        far=far,
        par=par,
        lar=lar,
        far_sd=far_sd,
        par_sd=par_sd,
        lar_sd=lar_sd,
        mse_per_opponent=mse_per_opponent,
        mse_avg=mse_avg,
        config_fingerprint=config_fingerprint,
    )


def render_report(report: MetricsReport) -> str:
    """Human-readable aligned table of a MetricsReport."""
    lines = [
        f"trials: {report.trials}    aborted: {report.aborted}    "
        f"config: {report.config_fingerprint or '-'}",
        "",
        "metric   rate     sd",
        f"FAR      {report.far:0.3f}    {report.far_sd:0.3f}",
        f"PAR      {report.par:0.3f}    {report.par_sd:0.3f}",
        f"LAR      {report.lar:0.3f}    {report.lar_sd:0.3f}",
    ]
    if report.mse_per_opponent:
        lines += ["", "estimation MSE (squared score points, final round)"]
        width = max(len(q) for q in report.mse_per_opponent)
        for opponent, value in report.mse_per_opponent.items():
            lines.append(f"  {opponent:<{width}}  {value:8.1f}")
        lines.append(f"  {'average':<{width}}  {report.mse_avg:8.1f}")
    return "\n".join(lines)
