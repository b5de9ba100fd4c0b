import json
import math
from pathlib import Path

import numpy as np
import pytest

from maicsim import cli
from maicsim.harness import (
    ConfigError,
    ScenarioConfig,
    config_to_dict,
    parse_config,
    replicate_appendix,
    run_scenario,
    serialize_config,
)
from maicsim.stochastic import Normal, Poisson

SMALL = {"n": 2000, "seed": 11}


def test_empty_document_yields_appendix_defaults():
    cfg = parse_config("")
    assert cfg.seed == 555
    assert cfg.n == 100_000
    assert cfg.study_A.covariate_names == ("Age", "PLNEN", "ISS", "Refr")
    assert cfg.study_A.treatment_log_hr == pytest.approx(math.log(0.53))
    assert cfg.study_B.treatment_log_hr == pytest.approx(math.log(0.55))
    assert cfg.study_A.baseline_rate == pytest.approx(0.5 / 365)
    assert cfg.study_A.censoring_rate == pytest.approx(0.1 / 365)
    plnen = cfg.study_A.covariates[1]
    assert isinstance(plnen.marginal, Poisson)
    assert plnen.prognostic_coef == pytest.approx(1.0682)
    age_B = cfg.study_B.covariates[0]
    assert isinstance(age_B.marginal, Normal) and age_B.marginal.mean == 62.1
    assert cfg.balance_set == ("PLNEN", "ISS", "Refr")
    assert cfg.interaction is None


def test_unknown_top_level_field():
    with pytest.raises(ConfigError, match="bogus"):
        parse_config('{"bogus": 1}')


def test_unknown_nested_field_names_path():
    with pytest.raises(ConfigError, match="study_A.unknown_rate"):
        parse_config('{"study_A": {"unknown_rate": 1.0}}')


def test_undeclared_balance_covariate():
    with pytest.raises(ConfigError, match="balance_set"):
        parse_config('{"balance_set": ["Nope"]}')


def test_undeclared_interaction_covariate():
    with pytest.raises(ConfigError, match="interaction"):
        parse_config('{"interaction": {"covariate": "Nope", "coefficient": 0.1}}')


def test_missing_dist_field():
    doc = {"study_A": {"covariates": [{"name": "x", "dist": {"kind": "normal",
                                                             "mean": 1.0}}]}}
    with pytest.raises(ConfigError, match="sd"):
        parse_config(doc)


def test_invalid_parameter_reported_with_path():
    doc = {"study_A": {"baseline_rate": -1.0}}
    with pytest.raises(ConfigError, match="study_A"):
        parse_config(doc)


def test_odd_n_rejected():
    with pytest.raises(ConfigError, match="n"):
        parse_config('{"n": 1001}')


def test_round_trip_is_idempotent():
    doc = {"seed": 9, "n": 500,
           "interaction": {"covariate": "Age", "coefficient": 0.005}}
    once = serialize_config(parse_config(doc))
    twice = serialize_config(parse_config(once))
    assert once == twice


def test_interaction_parsing():
    cfg = parse_config('{"interaction": {"covariate": "Age", "coefficient": 0.005}}')
    assert cfg.interaction == ("Age", 0.005)


def test_scenario_internal_consistency():
    result = run_scenario(parse_config(SMALL))
    assert result.bucher.log_hr_AB == pytest.approx(
        result.maic_AC_S2.log_hr - result.marginal_BC_S2.log_hr, abs=1e-12)
    assert result.bucher.se == pytest.approx(
        math.sqrt(result.maic_AC_S2.se**2 + result.marginal_BC_S2.se**2), abs=1e-12)
    assert result.hr_ratio_marginal == pytest.approx(
        result.maic_AC_S2.hr / result.marginal_BC_S2.hr, rel=1e-9)
    assert result.hr_ratio_conditional == pytest.approx(
        result.conditional_AC_S1.hr / result.conditional_BC_S2.hr, rel=1e-9)
    assert 0 < result.ess < result.config.n
    assert result.maic_AC_S2.scale == "marginal"
    assert result.conditional_AC_S1.scale == "conditional"


def test_scenario_determinism():
    cfg = parse_config(SMALL)
    assert run_scenario(cfg).to_json() == run_scenario(cfg).to_json()


def test_scenario_without_censoring_completes():
    doc = dict(SMALL)
    doc["study_A"] = {"censoring_rate": 0.0}
    doc["study_B"] = {"censoring_rate": 0.0}
    result = run_scenario(parse_config(doc))
    assert np.isfinite(result.maic_AC_S2.log_hr)


def test_replicate_report_determinism_and_schema():
    a = replicate_appendix(seed=5, n=2000)
    b = replicate_appendix(seed=5, n=2000)
    assert a.to_json() == b.to_json()
    parsed = json.loads(a.to_json())
    assert {"quantity", "ours", "paper", "tol", "pass"} == set(parsed["rows"][0])
    quantities = [r["quantity"] for r in parsed["rows"]]
    assert "marginal_hr_AC_S1" in quantities
    assert "maic_hr_scenario4" in quantities


def test_stage_annotation_on_failure():
    doc = dict(SMALL)
    doc["balance_set"] = ["Age"]
    doc["study_A"] = {"covariates": [
        {"name": "Age", "dist": {"kind": "bernoulli", "p": 0.0}}]}
    doc["study_B"] = {"covariates": [
        {"name": "Age", "dist": {"kind": "bernoulli", "p": 0.9}}]}
    with pytest.raises(RuntimeError, match="weights"):
        run_scenario(parse_config(doc))


def test_cli_simulate_weights_fit(tmp_path: Path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(SMALL))
    out = tmp_path / "data"
    assert cli.main(["simulate", "--config", str(config), "--out", str(out)]) == 0
    assert (out / "study_A.csv").exists()
    assert (out / "study_B.csv").exists()
    targets = json.loads((out / "targets.json").read_text())
    assert set(targets) == {"Age", "PLNEN", "ISS", "Refr"}

    wfile = tmp_path / "weights.csv"
    assert cli.main(["weights", "--ipd", str(out / "study_A.csv"),
                     "--targets", str(out / "targets.json"),
                     "--balance-set", "PLNEN,ISS,Refr",
                     "--out", str(wfile)]) == 0
    lines = wfile.read_text().splitlines()
    assert lines[0] == "weight"
    assert len(lines) == SMALL["n"] + 1

    assert cli.main(["fit", "--data", str(out / "study_A.csv"),
                     "--weights", str(wfile)]) == 0
    assert cli.main(["fit", "--data", str(out / "study_A.csv"),
                     "--adjust", "PLNEN,ISS,Refr"]) == 0


def test_cli_scenario_runs(capsys, tmp_path: Path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(SMALL))
    assert cli.main(["scenario", "--config", str(config)]) == 0
    captured = capsys.readouterr()
    parsed = json.loads(captured.out)
    assert "maic_AC_S2" in parsed


def test_cli_replicate_writes_reports(tmp_path: Path):
    # tiny n: tolerance rows may fail, but the report must still be written
    # and the exit code reflect the outcome
    code = cli.main(["replicate-appendix", "--seed", "1", "--n", "2000",
                     "--out", str(tmp_path)])
    report = json.loads((tmp_path / "replication.json").read_text())
    assert (tmp_path / "replication.tsv").exists()
    assert code == (0 if report["all_pass"] else 1)
