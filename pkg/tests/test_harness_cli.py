import json
import math

import pytest
from click.testing import CliRunner

from parley.cli import main
from parley.errors import ConfigurationError
from parley.harness import (
    RunConfig,
    config_fingerprint,
    run_experiment,
    run_trial,
    trial_seed,
)


def small_cfg(**kwargs):
    defaults = dict(method="base-om-p1", trials=3, seed=7, jitter=0.05)
    defaults.update(kwargs)
    return RunConfig(**defaults)


# --- harness -------------------------------------------------------------


def test_trial_seed_split_is_stable_and_distinct():
    seeds = [trial_seed(42, i) for i in range(20)]
    assert seeds == [trial_seed(42, i) for i in range(20)]
    assert len(set(seeds)) == 20
    assert trial_seed(43, 0) != trial_seed(42, 0)


def test_trial_reproducible_in_isolation(harbour):
    cfg = small_cfg(trials=5)
    _, results = run_experiment(cfg)
    alone = run_trial(cfg, 3, scenario=harbour, keep_traces=False)
    assert alone.final_deal == results[3].final_deal
    assert alone.final_estimates == results[3].final_estimates


def test_run_experiment_rate_ordering_and_determinism():
    cfg = small_cfg()
    report_a, _ = run_experiment(cfg)
    report_b, _ = run_experiment(cfg)
    assert report_a.to_dict() == report_b.to_dict()
    assert report_a.far <= report_a.par <= report_a.lar


def test_workers_do_not_change_results():
    sequential, _ = run_experiment(small_cfg(trials=4, workers=1))
    parallel, _ = run_experiment(small_cfg(trials=4, workers=2))
    assert sequential.to_dict() == parallel.to_dict()


def test_fingerprint_tracks_config_changes():
    base = small_cfg()
    assert config_fingerprint(base) == config_fingerprint(small_cfg())
    assert config_fingerprint(base) != config_fingerprint(small_cfg(seed=8))


def test_llm_methods_require_endpoint():
    with pytest.raises(ConfigurationError) as err:
        RunConfig(method="base-llm").validate()
    assert "endpoint_url" in str(err.value)
    with pytest.raises(ConfigurationError):
        RunConfig(method="proposed-p1", signal_source="llm").validate()
    # endpoint plus model passes validation
    RunConfig(method="base-llm", endpoint_url="https://x.test", model="m").validate()


def test_llm_pe_is_a_config_hook_only(harbour):
    cfg = RunConfig(method="llm-pe", endpoint_url="https://x.test", model="m")
    cfg.validate()
    with pytest.raises(ConfigurationError) as err:
        run_trial(cfg, 0, scenario=harbour)
    assert "llm-pe" in str(err.value)


def test_unknown_method_rejected():
    with pytest.raises(ConfigurationError) as err:
        RunConfig(method="quantum").validate()
    assert "method" in str(err.value)


# --- CLI -----------------------------------------------------------------


def test_cli_feasibility_reports_bundled_statistics():
    runner = CliRunner()
    result = runner.invoke(main, ["feasibility"])
    assert result.exit_code == 0
    assert "deals: 720" in result.output
    assert "21 (2.9%)" in result.output
    assert "3 (0.4%)" in result.output
    for deal in ("A2,B2,C1,D2,E3", "A2,B2,C2,D2,E3", "A2,B2,C3,D3,E3"):
        assert deal in result.output


def test_cli_feasibility_toy_extremes(tmp_path):
    toy = """
name: extremes
rounds: 2
min_agree: 2
issues:
  - {id: A, name: Only, options: [one, two]}
parties:
  - {id: p1, name: P1, veto: false, threshold: THRESH1, scores: {A: [5, 0]}}
  - {id: p2, name: P2, veto: false, threshold: THRESH2, scores: {A: [0, 5]}}
"""
    runner = CliRunner()

    # both thresholds unreachable together -> nothing feasible
    unreachable = tmp_path / "unreachable.yaml"
    unreachable.write_text(toy.replace("THRESH1", "5").replace("THRESH2", "5"))
    result = runner.invoke(main, ["feasibility", "--scenario", str(unreachable)])
    assert result.exit_code == 0
    assert "0 (0.0%)" in result.output

    # vacuous thresholds -> every deal feasible
    vacuous = tmp_path / "vacuous.yaml"
    vacuous.write_text(toy.replace("THRESH1", "0").replace("THRESH2", "0"))
    result = runner.invoke(main, ["feasibility", "--scenario", str(vacuous)])
    assert result.exit_code == 0
    assert "2 (100.0%)" in result.output


def test_cli_run_writes_outputs_and_is_reproducible(tmp_path):
    runner = CliRunner()
    out = tmp_path / "exp"
    args = ["run", "--method", "base-om-p1", "--trials", "2", "--seed", "7",
            "--out", str(out)]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    assert (out / "report.json").exists()
    assert (out / "report.txt").exists()
    traces = sorted((out / "traces").glob("trial_*.jsonl"))
    assert len(traces) == 2
    first_bytes = (out / "report.json").read_bytes()

    # refuses to overwrite without --force
    refused = runner.invoke(main, args)
    assert refused.exit_code != 0
    assert "force" in refused.output.lower()

    forced = runner.invoke(main, args + ["--force"])
    assert forced.exit_code == 0
    assert (out / "report.json").read_bytes() == first_bytes


def test_cli_run_proposed_p1_traces_only_leader(tmp_path):
    runner = CliRunner()
    out = tmp_path / "p1run"
    result = runner.invoke(main, [
        "run", "--method", "proposed-p1", "--signal-source", "oracle",
        "--trials", "1", "--seed", "3", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    estimators = set()
    for line in (out / "traces" / "trial_00000.jsonl").read_text().splitlines():
        record = json.loads(line)
        if record["type"] == "belief":
            estimators.add(record["estimator"])
    assert estimators == {"SportCo"}


def test_cli_inspect_round_zero_and_final(tmp_path):
    runner = CliRunner()
    out = tmp_path / "inspectrun"
    assert runner.invoke(main, [
        "run", "--method", "proposed-p1", "--trials", "1", "--seed", "5",
        "--out", str(out),
    ]).exit_code == 0
    trace = str(out / "traces" / "trial_00000.jsonl")

    prior = runner.invoke(main, ["inspect", trace, "--round", "0"])
    assert prior.exit_code == 0, prior.output
    assert f"entropy={math.log(86400):.4f}" in prior.output

    final = runner.invoke(main, ["inspect", trace, "--round", "24"])
    assert final.exit_code == 0
    prior_entropy = math.log(86400)
    entropies = [
        float(part.split("entropy=")[1])
        for part in final.output.splitlines()
        if "entropy=" in part
    ]
    assert entropies and all(e < prior_entropy for e in entropies)

    missing = runner.invoke(main, ["inspect", trace, "--round", "99"])
    assert missing.exit_code != 0
    assert "99" in missing.output

    absent = runner.invoke(main, ["inspect", str(out / "nope.jsonl"),
                                  "--round", "0"])
    assert absent.exit_code != 0


def test_cli_config_file_with_overrides(tmp_path):
    cfg_file = tmp_path / "run.yaml"
    cfg_file.write_text("method: base-om-p1\ntrials: 2\nseed: 11\n")
    runner = CliRunner()
    out = tmp_path / "cfgrun"
    result = runner.invoke(main, [
        "run", "--config", str(cfg_file), "--trials", "1", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    payload = json.loads((out / "report.json").read_text())
    assert payload["config"]["method"] == "base-om-p1"
    assert payload["config"]["trials"] == 1   # CLI override wins
    assert payload["config"]["seed"] == 11
    assert payload["fingerprint"] == payload["report"]["config_fingerprint"]


def test_cli_config_file_unknown_key(tmp_path):
    cfg_file = tmp_path / "bad.yaml"
    cfg_file.write_text("methd: base-om-p1\n")
    runner = CliRunner()
    result = runner.invoke(main, ["run", "--config", str(cfg_file)])
    assert result.exit_code != 0
    assert "methd" in result.output


def test_cli_run_llm_preset_needs_endpoint():
    runner = CliRunner()
    result = runner.invoke(main, ["run", "--method", "base-llm", "--trials", "1"])
    assert result.exit_code != 0
    assert "endpoint_url" in result.output


def test_cli_mse_csv(tmp_path):
    runner = CliRunner()
    out = tmp_path / "csvrun"
    result = runner.invoke(main, [
        "run", "--method", "proposed-p1", "--trials", "1", "--seed", "2",
        "--out", str(out), "--mse-csv",
    ])
    assert result.exit_code == 0, result.output
    csv_path = out / "mse_per_round.csv"
    assert csv_path.exists()
    lines = csv_path.read_text().splitlines()
    assert lines[0].startswith("round,")
    assert len(lines) > 2
