import json

import numpy as np
import pytest

from stealthpath.harness import (
    CSV_COLUMNS,
    ConfigError,
    ExperimentConfig,
    MetricsRow,
    export,
    model_from_config,
    rate_rule_resolve,
    rows_from_json,
    run_experiment,
)
from stealthpath.probkit import Distribution, JointDistribution
from stealthpath.ratesolver import NetworkModel, SolverConfig

FAST = SolverConfig(restarts=4)


def base_config(**overrides):
    obj = {
        "schema": 1,
        "model": {
            "link_count": 3,
            "adversary_budget": 1,
            "link_alphabet_sizes": [2, 2, 2],
            "innocent": {"factors": [[0.5, 0.5]] * 3},
        },
        "scheme": "overwrite-direct",
        "code": {"n": [8], "rate": {"rule": "absolute", "bits": 1.0}, "seed": 2},
        "adversary": {"jam_rule": "worst-over-family",
                      "strategies": ["passthrough"]},
        "detector": "none",
        "trials": 40,
        "master_seed": 9,
    }
    obj.update(overrides)
    return json.dumps(obj)


def test_config_parse_and_validation():
    cfg = ExperimentConfig.from_json(base_config())
    assert cfg.scheme == "overwrite-direct"
    assert cfg.blocklengths == (8,)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(base_config(schema=2))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(base_config(trials=0))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(base_config(scheme="bogus"))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(base_config(
            adversary={"jam_rule": "worst-over-family", "strategies": ["bogus"]}))


def test_model_from_config_mass_form():
    model = model_from_config({
        "link_count": 2, "adversary_budget": 0,
        "link_alphabet_sizes": [2, 2],
        "innocent": {"mass": [0.25, 0.25, 0.25, 0.25]}})
    assert model.product_alphabet_size == 4


def test_rate_rule_resolve():
    model = model_from_config({
        "link_count": 3, "adversary_budget": 1,
        "link_alphabet_sizes": [2, 2, 2],
        "innocent": {"factors": [[0.5, 0.5]] * 3}})
    assert rate_rule_resolve({"rule": "absolute", "bits": 1.0}, model,
                             "overwrite-direct") == 1.0
    bits = rate_rule_resolve({"rule": "bound-minus-epsilon", "epsilon": 0.2},
                             model, "overwrite-direct", FAST)
    assert bits == pytest.approx(1.8, abs=5e-3)


def test_rate_rule_infeasible_model_gives_failure_row():
    cfg = ExperimentConfig.from_json(base_config(
        model={"link_count": 3, "adversary_budget": 1,
               "link_alphabet_sizes": [2, 2, 2],
               "innocent": {"factors": [[1.0, 0.0]] * 3}},
        code={"n": [4], "rate": {"rule": "bound-minus-epsilon", "epsilon": 0.2},
              "seed": 2}))
    rows = run_experiment(cfg, FAST)
    assert len(rows) == 1
    assert rows[0].note.startswith("failed:")
    assert "infeasible" in rows[0].note


def test_run_experiment_deterministic_csv(tmp_path):
    cfg = ExperimentConfig.from_json(base_config())
    paths = []
    for i in (0, 1):
        rows = run_experiment(cfg, FAST)
        p = tmp_path / f"out{i}.csv"
        export(rows, "csv", str(p))
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_run_experiment_low_rate_reliability():
    cfg = ExperimentConfig.from_json(base_config(
        code={"n": [16], "rate": {"rule": "absolute", "bits": 0.5}, "seed": 2}))
    row = run_experiment(cfg, FAST)[0]
    assert row.note == ""
    assert 0.0 <= row.err_innocent_hat <= 1.0
    assert 0.0 <= row.err_active_hat <= 1.0
    assert row.p_err_hat == pytest.approx(row.err_innocent_hat + row.err_active_hat)
    # passthrough on an innocent-matched codebook decodes reliably at low rate
    assert row.p_err_hat <= 0.1


def test_run_experiment_high_rate_stealth_and_detector():
    # rate above the jammed entropy: the active marginal blends into innocent
    cfg = ExperimentConfig.from_json(base_config(
        code={"n": [8], "rate": {"rule": "absolute", "bits": 1.5}, "seed": 2},
        adversary={"jam_rule": "fixed", "jam_set": [0],
                   "strategies": ["passthrough"]},
        detector="optimal-oracle", trials=200))
    row = run_experiment(cfg, FAST)[0]
    assert row.note == ""
    assert row.stealth_gap is not None and row.stealth_gap <= 0.2
    # even the optimal detector is near-blind on a small-gap code
    assert row.alpha_hat + row.beta_hat >= 1.0 - row.stealth_gap - 0.15


def test_worst_over_family_matches_fixed_runs():
    worst_cfg = ExperimentConfig.from_json(base_config())
    worst = run_experiment(worst_cfg, FAST)[0]
    per_j = []
    for j in ([], [0], [1], [2]):
        cfg = ExperimentConfig.from_json(base_config(
            adversary={"jam_rule": "fixed", "jam_set": j,
                       "strategies": ["passthrough"]}))
        per_j.append(run_experiment(cfg, FAST)[0].p_err_hat)
    assert worst.p_err_hat == pytest.approx(max(per_j))


def test_erasure_scheme_runs():
    cfg = ExperimentConfig.from_json(base_config(
        scheme="erasure-layered", gamma=0.6,
        code={"n": [16], "rate": {"rule": "absolute", "bits": 0.5}, "seed": 2},
        adversary={"jam_rule": "worst-over-family"}))
    rows = run_experiment(cfg, SolverConfig(restarts=2))
    assert rows[0].note == ""
    assert rows[0].scheme == "erasure-layered"
    assert rows[0].p_err_hat <= 2.0


def test_export_csv_header_and_empty(tmp_path):
    p = tmp_path / "empty.csv"
    export([], "csv", str(p))
    lines = p.read_text().splitlines()
    assert lines == [",".join(CSV_COLUMNS + ("note",))]


def test_export_json_round_trip(tmp_path):
    row = MetricsRow(scheme="overwrite-direct", n=8, rate_bits=1.0, gamma=0.1,
                     jam_rule="fixed", jam_set="0", strategy="passthrough",
                     trials=10, p_err_hat=0.1, p_err_ci=0.05, alpha_hat=0.2,
                     beta_hat=0.7, ab_ci=0.1, stealth_gap=0.25,
                     err_innocent_hat=0.04, err_active_hat=0.06, note="")
    p = tmp_path / "rows.json"
    export([row], "json", str(p))
    back = rows_from_json(p.read_text())
    assert back == [row]


def test_export_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        export([], "xml", str(tmp_path / "x"))


def test_ci_rule_of_three_at_extremes():
    from stealthpath.harness import _ci_halfwidth
    assert _ci_halfwidth(0.0, 100) == pytest.approx(0.03)
    assert _ci_halfwidth(1.0, 100) == pytest.approx(0.03)
    assert _ci_halfwidth(0.5, 100) == pytest.approx(1.96 * 0.05, abs=1e-12)
