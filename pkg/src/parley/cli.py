"""Command-line entry point: run experiments, scan feasibility, inspect traces."""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import click
import yaml

from .errors import ConfigurationError, ParleyError
from .harness import METHODS, RunConfig, run_experiment
from .metrics import render_report
from .scenario import bundled_scenario, feasibility_scan, load_scenario


@click.group()
def main():
    """Multi-party negotiation simulator with Bayesian opponent modeling."""


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    raw = yaml.safe_load(Path(path).read_text())
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise click.UsageError(f"config file {path} must be a mapping")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise click.UsageError(f"config file has unknown keys: {sorted(unknown)}")
    return raw


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML config file; flags override its values.")
@click.option("--scenario", type=click.Path(exists=True), default=None,
              help="Scenario file (default: bundled Harbour Sport Park).")
@click.option("--method", type=click.Choice(METHODS), default=None)
@click.option("--trials", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--signal-source", type=click.Choice(["oracle", "llm"]), default=None)
@click.option("--sigma", type=float, default=None)
@click.option("--concession-start", type=float, default=None)
@click.option("--concession-end", type=float, default=None)
@click.option("--concession-beta", type=float, default=None)
@click.option("--signals-per-round", type=int, default=None)
@click.option("--jitter", type=float, default=None)
@click.option("--out", type=click.Path(), default=None)
@click.option("--force", is_flag=True, default=False,
              help="Allow writing into a non-empty output directory.")
@click.option("--mse-csv", is_flag=True, default=False,
              help="Also write a per-round MSE trajectory CSV.")
@click.option("--endpoint-url", type=str, default=None)
@click.option("--model", type=str, default=None)
def run(config_path, **flags):
    """Run a seeded batch of negotiation trials and report metrics."""
    values = _load_config_file(config_path)
    for key, value in flags.items():
        if value is None:
            continue
        if key in ("force", "mse_csv") and value is False and key in values:
            continue  # flags default to False; keep the config-file value
        values[key] = value
    try:
        cfg = RunConfig(**values)
        report, _ = run_experiment(cfg)
    except ConfigurationError as exc:
        raise click.UsageError(str(exc))
    except ParleyError as exc:
        raise click.ClickException(str(exc))
    click.echo(render_report(report))
    if cfg.out:
        click.echo(f"\nwrote {cfg.out}/report.json, report.txt, traces/")


@main.command()
@click.option("--scenario", type=click.Path(exists=True), default=None,
              help="Scenario file (default: bundled Harbour Sport Park).")
def feasibility(scenario):
    """Brute-force the deal space and print feasibility statistics."""
    game = bundled_scenario() if scenario is None else load_scenario(scenario)
    total, partial, full = feasibility_scan(game)
    click.echo(f"scenario: {game.name}")
    click.echo(f"deals: {total}")
    click.echo(
        f"partial feasible (>= {game.min_agree} parties incl. vetoes): "
        f"{len(partial)} ({100 * len(partial) / total:.1f}%)"
    )
    click.echo(
        f"full feasible (all {game.n_parties} parties): "
        f"{len(full)} ({100 * len(full) / total:.1f}%)"
    )
    if full:
        click.echo("full-agreement deals:")
        for deal in full:
            utilities = "  ".join(
                f"{p.id}={game.utility(p.id, deal)}" for p in game.parties
            )
            click.echo(f"  {game.format_deal(deal)}  {utilities}")


@main.command()
@click.argument("trace_file", type=click.Path(exists=True))
@click.option("--round", "round_", type=int, required=True,
              help="Round to inspect (0 = prior).")
@click.option("--top", type=int, default=10, show_default=True)
def inspect(trace_file, round_, top):
    """Print belief summaries (entropy, top hypotheses, estimates) at a round."""
    beliefs: dict[str, dict[str, dict]] = {}
    max_round = 0
    with open(trace_file) as fh:
        for raw in fh:
            line = json.loads(raw)
            if line["type"] == "round":
                max_round = max(max_round, line["round"])
            if line["type"] == "belief":
                max_round = max(max_round, line["round"])
                if line["round"] <= round_:
                    views = beliefs.setdefault(line["estimator"], {})
                    current = views.get(line["opponent"])
                    if current is None or line["round"] >= current["round"]:
                        views[line["opponent"]] = line
    if round_ < 0 or round_ > max_round:
        raise click.ClickException(
            f"round {round_} outside the trace's range 0..{max_round}"
        )
    if not beliefs:
        raise click.ClickException("trace carries no belief records")
    for estimator in sorted(beliefs):
        click.echo(f"estimator: {estimator}")
        for opponent in sorted(beliefs[estimator]):
            snap = beliefs[estimator][opponent]
            click.echo(
                f"  opponent {opponent} (as of round {snap['round']}): "
                f"entropy={snap['entropy']:.4f}"
            )
            for entry in snap["top"][:top]:
                click.echo(
                    f"    #{entry['index']:<6d} p={entry['prob']:.4g} "
                    f"ranking={entry['ranking']} apexes={entry['apexes']}"
                )
            click.echo("    estimate:")
            for issue, values in snap["estimate"].items():
                cells = " ".join(f"{v:6.1f}" for v in values)
                click.echo(f"      {issue}: {cells}")


if __name__ == "__main__":
    main()
