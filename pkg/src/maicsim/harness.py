"""Scenario configuration and the end-to-end replication pipeline.

A scenario simulates two randomized trials against a shared comparator,
estimates moment-matching weights for the chosen balance set, fits the
weighted univariable Cox model, and assembles marginal/conditional effect
estimates plus the anchored comparison. ``replicate_appendix`` runs the four
canonical scenarios and the simulation-based true effects, and checks every
headline quantity against its reference value within tolerance bands (an
exact match is impossible because the reference values came from a different
random-number stream).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import balance, estimands, stochastic
from .cohortsim import (
    CovariateSpec,
    OutcomeModelSpec,
    TrialData,
    linear_predictor,
    simulate_survival,
    simulate_trial,
)
from .estimands import EffectEstimate, IndirectComparison
from .stochastic import Bernoulli, DistributionSpec, Normal, Poisson, seed_stream

DEFAULT_SEED = 555
DEFAULT_N = 100_000

B_A = math.log(0.53)
B_B = math.log(0.55)
B_PLNEN = 1.0682
B_ISS = -0.6651
B_REFR = 0.0825
BASELINE_RATE = 0.5 / 365
CENSORING_RATE = 0.1 / 365


def default_study_A() -> OutcomeModelSpec:
    return OutcomeModelSpec(
        treatment_log_hr=B_A,
        baseline_rate=BASELINE_RATE,
        censoring_rate=CENSORING_RATE,
        covariates=(
            CovariateSpec("Age", Normal(69.3, 5.0)),
            CovariateSpec("PLNEN", Poisson(3.4), prognostic_coef=B_PLNEN),
            CovariateSpec("ISS", Bernoulli(0.74), prognostic_coef=B_ISS),
            CovariateSpec("Refr", Bernoulli(0.92), prognostic_coef=B_REFR),
        ),
    )


def default_study_B() -> OutcomeModelSpec:
    return OutcomeModelSpec(
        treatment_log_hr=B_B,
        baseline_rate=BASELINE_RATE,
        censoring_rate=CENSORING_RATE,
        covariates=(
            CovariateSpec("Age", Normal(62.1, 5.0)),
            CovariateSpec("PLNEN", Poisson(3.4), prognostic_coef=B_PLNEN),
            CovariateSpec("ISS", Bernoulli(0.77), prognostic_coef=B_ISS),
            CovariateSpec("Refr", Bernoulli(0.92), prognostic_coef=B_REFR),
        ),
    )


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = DEFAULT_SEED
    n: int = DEFAULT_N
    study_A: OutcomeModelSpec = field(default_factory=default_study_A)
    study_B: OutcomeModelSpec = field(default_factory=default_study_B)
    balance_set: tuple[str, ...] = ("PLNEN", "ISS", "Refr")
    interaction: tuple[str, float] | None = None
    output_dir: str | None = None

    def __post_init__(self):
        for name in self.balance_set:
            if name not in self.study_A.covariate_names:
                raise ConfigError("balance_set",
                                  f"{name!r} is not a declared covariate")
        if self.interaction is not None:
            if self.interaction[0] not in self.study_A.covariate_names:
                raise ConfigError("interaction.covariate",
                                  f"{self.interaction[0]!r} is not a declared covariate")


def _reject_unknown(d: dict, allowed, path: str):
    for key in d:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown field")


_DIST_FIELDS = {
    "uniform01": (),
    "normal": ("mean", "sd"),
    "poisson": ("lam",),
    "bernoulli": ("p",),
    "exponential": ("rate",),
}


def _parse_dist(d: dict, path: str) -> DistributionSpec:
    if "kind" not in d:
        raise ConfigError(f"{path}.kind", "missing required field")
    kind = d["kind"]
    if kind not in _DIST_FIELDS:
        raise ConfigError(f"{path}.kind", f"unknown distribution kind {kind!r}")
    fields = _DIST_FIELDS[kind]
    _reject_unknown(d, ("kind", *fields), path)
    missing = [f for f in fields if f not in d]
    if missing:
        raise ConfigError(f"{path}.{missing[0]}", "missing required field")
    cls = {"uniform01": stochastic.Uniform01, "normal": Normal,
           "poisson": Poisson, "bernoulli": Bernoulli,
           "exponential": stochastic.Exponential}[kind]
    try:
        return cls(**{f: float(d[f]) for f in fields})
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def _dist_to_dict(dist: DistributionSpec) -> dict:
    for kind, cls in (("uniform01", stochastic.Uniform01), ("normal", Normal),
                      ("poisson", Poisson), ("bernoulli", Bernoulli),
                      ("exponential", stochastic.Exponential)):
        if isinstance(dist, cls):
            return {"kind": kind, **{f: getattr(dist, f) for f in _DIST_FIELDS[kind]}}
    raise TypeError(f"unknown distribution spec {dist!r}")


def _parse_study(d: dict, default: OutcomeModelSpec, path: str) -> OutcomeModelSpec:
    _reject_unknown(d, ("treatment_log_hr", "baseline_rate", "censoring_rate",
                        "covariates"), path)
    covariates = default.covariates
    if "covariates" in d:
        covariates = []
        for i, cd in enumerate(d["covariates"]):
            cpath = f"{path}.covariates[{i}]"
            _reject_unknown(cd, ("name", "dist", "prognostic_coef",
                                 "interaction_coef"), cpath)
            if "name" not in cd:
                raise ConfigError(f"{cpath}.name", "missing required field")
            if "dist" not in cd:
                raise ConfigError(f"{cpath}.dist", "missing required field")
            covariates.append(CovariateSpec(
                name=str(cd["name"]),
                marginal=_parse_dist(cd["dist"], f"{cpath}.dist"),
                prognostic_coef=float(cd.get("prognostic_coef", 0.0)),
                interaction_coef=float(cd.get("interaction_coef", 0.0)),
            ))
    try:
        return OutcomeModelSpec(
            treatment_log_hr=float(d.get("treatment_log_hr", default.treatment_log_hr)),
            baseline_rate=float(d.get("baseline_rate", default.baseline_rate)),
            censoring_rate=float(d.get("censoring_rate", default.censoring_rate)),
            covariates=tuple(covariates),
        )
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def parse_config(document: str | dict) -> ScenarioConfig:
    """Parse and validate a JSON scenario configuration, applying the
    canonical defaults for anything omitted. An empty document yields the
    full default parameterization."""
    if isinstance(document, str):
        d = json.loads(document) if document.strip() else {}
    else:
        d = dict(document)
    _reject_unknown(d, ("seed", "n", "study_A", "study_B", "balance_set",
                        "interaction", "outputs"), "")
    interaction = None
    if d.get("interaction") is not None:
        idict = d["interaction"]
        _reject_unknown(idict, ("covariate", "coefficient"), "interaction")
        for f in ("covariate", "coefficient"):
            if f not in idict:
                raise ConfigError(f"interaction.{f}", "missing required field")
        interaction = (str(idict["covariate"]), float(idict["coefficient"]))
    output_dir = None
    if d.get("outputs") is not None:
        _reject_unknown(d["outputs"], ("dir",), "outputs")
        output_dir = d["outputs"].get("dir")
    n = int(d.get("n", DEFAULT_N))
    if n < 2 or n % 2 != 0:
        raise ConfigError("n", f"must be a positive even integer, got {n}")
    return ScenarioConfig(
        seed=int(d.get("seed", DEFAULT_SEED)),
        n=n,
        study_A=_parse_study(d.get("study_A", {}), default_study_A(), "study_A"),
        study_B=_parse_study(d.get("study_B", {}), default_study_B(), "study_B"),
        balance_set=tuple(d.get("balance_set", ("PLNEN", "ISS", "Refr"))),
        interaction=interaction,
        output_dir=output_dir,
    )


def config_to_dict(cfg: ScenarioConfig) -> dict:
    def study(m: OutcomeModelSpec) -> dict:
        return {
            "treatment_log_hr": m.treatment_log_hr,
            "baseline_rate": m.baseline_rate,
            "censoring_rate": m.censoring_rate,
            "covariates": [
                {
                    "name": c.name,
                    "dist": _dist_to_dict(c.marginal),
                    "prognostic_coef": c.prognostic_coef,
                    "interaction_coef": c.interaction_coef,
                }
                for c in m.covariates
            ],
        }

    return {
        "seed": cfg.seed,
        "n": cfg.n,
        "study_A": study(cfg.study_A),
        "study_B": study(cfg.study_B),
        "balance_set": list(cfg.balance_set),
        "interaction": None if cfg.interaction is None else
            {"covariate": cfg.interaction[0], "coefficient": cfg.interaction[1]},
        "outputs": None if cfg.output_dir is None else {"dir": cfg.output_dir},
    }


def serialize_config(cfg: ScenarioConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2) + "\n"


def _with_interaction(model: OutcomeModelSpec,
                      interaction: tuple[str, float] | None) -> OutcomeModelSpec:
    if interaction is None:
        return model
    name, coef = interaction
    covariates = tuple(
        CovariateSpec(c.name, c.marginal, c.prognostic_coef, coef)
        if c.name == name else c
        for c in model.covariates
    )
    return OutcomeModelSpec(model.treatment_log_hr, model.baseline_rate,
                            model.censoring_rate, covariates)


def _prognostic_set(model: OutcomeModelSpec) -> list[str]:
    return [c.name for c in model.covariates if c.prognostic_coef != 0.0]


@dataclass(frozen=True)
class ScenarioResult:
    config: ScenarioConfig
    marginal_AC_S1: EffectEstimate
    conditional_AC_S1: EffectEstimate
    marginal_BC_S2: EffectEstimate
    conditional_BC_S2: EffectEstimate
    maic_AC_S2: EffectEstimate
    ess: float
    hr_ratio_marginal: float
    hr_ratio_conditional: float
    bucher: IndirectComparison
    balance: balance.BalanceReport

    def to_json(self) -> str:
        return json.dumps({
            "marginal_AC_S1": json.loads(self.marginal_AC_S1.to_json()),
            "conditional_AC_S1": json.loads(self.conditional_AC_S1.to_json()),
            "marginal_BC_S2": json.loads(self.marginal_BC_S2.to_json()),
            "conditional_BC_S2": json.loads(self.conditional_BC_S2.to_json()),
            "maic_AC_S2": json.loads(self.maic_AC_S2.to_json()),
            "ess": self.ess,
            "hr_ratio_marginal": self.hr_ratio_marginal,
            "hr_ratio_conditional": self.hr_ratio_conditional,
            "bucher": {
                "log_hr_AB": self.bucher.log_hr_AB,
                "se": self.bucher.se,
                "ci95_lo": self.bucher.ci95[0],
                "ci95_hi": self.bucher.ci95[1],
            },
        }, indent=2) + "\n"


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        raise RuntimeError(f"pipeline stage {name!r} failed: {exc}") from exc


def _maic_estimate(trial_A: TrialData, trial_B: TrialData, balance_set):
    names = list(balance_set)
    targets = trial_B.columns(names).mean(axis=0)
    prob = balance.center_covariates(trial_A.columns(names), targets, names)
    weights = balance.estimate_weights(prob)
    est = estimands.marginal_effect(trial_A, weights.w, population="S2")
    report = balance.balance_report(trial_A.columns(names), weights.w, targets, names)
    return est, weights, report


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    """simulate -> summarize -> center -> weight -> fit -> compare."""
    stream = seed_stream(cfg.seed)
    model_A = _with_interaction(cfg.study_A, cfg.interaction)
    model_B = _with_interaction(cfg.study_B, cfg.interaction)
    trial_A = _stage("simulate_A", simulate_trial, model_A, cfg.n, stream)
    trial_B = _stage("simulate_B", simulate_trial, model_B, cfg.n, stream)
    marginal_AC = _stage("fit_marginal_A", estimands.marginal_effect,
                         trial_A, population="S1")
    marginal_BC = _stage("fit_marginal_B", estimands.marginal_effect,
                         trial_B, population="S2")
    conditional_AC = _stage("fit_conditional_A", estimands.conditional_effect,
                            trial_A, _prognostic_set(model_A), population="S1")
    conditional_BC = _stage("fit_conditional_B", estimands.conditional_effect,
                            trial_B, _prognostic_set(model_B), population="S2")
    maic, weights, report = _stage("weights", _maic_estimate,
                                   trial_A, trial_B, cfg.balance_set)
    return ScenarioResult(
        config=cfg,
        marginal_AC_S1=marginal_AC,
        conditional_AC_S1=conditional_AC,
        marginal_BC_S2=marginal_BC,
        conditional_BC_S2=conditional_BC,
        maic_AC_S2=maic,
        ess=weights.ess,
        hr_ratio_marginal=estimands.hr_ratio(maic, marginal_BC),
        hr_ratio_conditional=estimands.hr_ratio(conditional_AC, conditional_BC),
        bucher=estimands.bucher_compare(maic, marginal_BC),
        balance=report,
    )


TRUE_MARGINAL_LOG_HR = math.log(0.76)
CONDITIONAL_HR_RATIO = 0.53 / 0.55


@dataclass(frozen=True)
class ReportRow:
    quantity: str
    ours: float
    paper: float | None
    tol: tuple[float, float]  # inclusive [lo, hi] bounds on ours

    @property
    def passed(self) -> bool:
        return self.tol[0] <= self.ours <= self.tol[1]


@dataclass(frozen=True)
class ReplicationReport:
    seed: int
    n: int
    rows: tuple[ReportRow, ...]

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_json(self) -> str:
        return json.dumps({
            "note": ("reference values come from a different random-number "
                     "stream; agreement is asserted within tolerance bands, "
                     "not exactly"),
            "seed": self.seed,
            "n": self.n,
            "rows": [
                {"quantity": r.quantity, "ours": r.ours, "paper": r.paper,
                 "tol": list(r.tol), "pass": r.passed}
                for r in self.rows
            ],
            "all_pass": self.all_pass,
        }, indent=2) + "\n"

    def to_tsv(self) -> str:
        lines = ["quantity\tours\tpaper\ttol_lo\ttol_hi\tpass"]
        for r in self.rows:
            paper = "" if r.paper is None else f"{r.paper:.7g}"
            lines.append("\t".join([
                r.quantity, f"{r.ours:.7g}", paper,
                f"{r.tol[0]:.7g}", f"{r.tol[1]:.7g}",
                "pass" if r.passed else "FAIL",
            ]))
        return "\n".join(lines) + "\n"


def replicate_appendix(seed: int = DEFAULT_SEED, n: int = DEFAULT_N) -> ReplicationReport:
    """Run the four canonical scenarios plus the true-effect computation and
    compare every headline quantity against its reference value."""
    stream = seed_stream(seed)
    model_A = default_study_A()
    model_B = default_study_B()

    trial_A = simulate_trial(model_A, n, stream)
    trial_B = simulate_trial(model_B, n, stream)

    prognostic = ["PLNEN", "ISS", "Refr"]
    marginal_AC = estimands.marginal_effect(trial_A, population="S1")
    marginal_BC = estimands.marginal_effect(trial_B, population="S2")
    conditional_AC = estimands.conditional_effect(trial_A, prognostic, "S1")
    conditional_BC = estimands.conditional_effect(trial_B, prognostic, "S2")

    maic1, w1, report1 = _maic_estimate(trial_A, trial_B, prognostic)
    maic2, w2, _ = _maic_estimate(trial_A, trial_B, ["PLNEN"])
    ratio_marginal = estimands.hr_ratio(maic1, marginal_BC)
    ratio_conditional = estimands.hr_ratio(conditional_AC, conditional_BC)

    # scenarios 3 and 4: same covariates, outcomes re-simulated with an
    # age-by-treatment interaction in both studies
    interaction = ("Age", 0.005)
    model_A3 = _with_interaction(model_A, interaction)
    model_B3 = _with_interaction(model_B, interaction)
    lp_A3 = linear_predictor(trial_A.X, trial_A.trt, model_A3)
    time_A3, status_A3 = simulate_survival(lp_A3, model_A3, stream)
    trial_A3 = TrialData(trial_A.covariate_names, trial_A.X, trial_A.trt,
                         time_A3, status_A3)
    lp_B3 = linear_predictor(trial_B.X, trial_B.trt, model_B3)
    simulate_survival(lp_B3, model_B3, stream)  # study-B outcomes, unused below
    maic3, w3, _ = _maic_estimate(trial_A3, trial_B, prognostic + ["Age"])
    maic4, w4, _ = _maic_estimate(trial_A3, trial_B, ["Age"])

    # simulation-based true marginal effects of the A-vs-C model in each
    # study population
    model_A_in_S2 = OutcomeModelSpec(model_A.treatment_log_hr,
                                     model_A.baseline_rate,
                                     model_A.censoring_rate,
                                     model_B.covariates)
    true_S1 = estimands.simulated_marginal_loghr(model_A, n, stream)
    true_S2 = estimands.simulated_marginal_loghr(model_A_in_S2, n, stream)

    combined_se = math.sqrt(maic1.se**2 + marginal_AC.se**2)
    rows = (
        ReportRow("marginal_hr_AC_S1", marginal_AC.hr, 0.7575748, (0.747, 0.768)),
        ReportRow("marginal_hr_BC_S2", marginal_BC.hr, 0.7697989, (0.760, 0.780)),
        ReportRow("conditional_hr_AC_S1", conditional_AC.hr, 0.5294677, (0.522, 0.538)),
        ReportRow("conditional_hr_BC_S2", conditional_BC.hr, 0.5500948, (0.542, 0.558)),
        ReportRow("maic_hr_scenario1", maic1.hr, 0.7575572, (0.747, 0.768)),
        ReportRow("maic_hr_scenario2", maic2.hr, 0.7575059, (0.747, 0.768)),
        ReportRow("marginal_hr_ratio", ratio_marginal, 0.9840976, (0.974, 0.994)),
        ReportRow("conditional_hr_ratio", ratio_conditional,
                  CONDITIONAL_HR_RATIO, (0.944, 0.984)),
        ReportRow("noncollapsibility_gap",
                  abs(ratio_marginal - CONDITIONAL_HR_RATIO), None,
                  (0.01, math.inf)),
        ReportRow("maic_hr_scenario3", maic3.hr, 0.8765244, (0.864, 0.889)),
        ReportRow("maic_hr_scenario4", maic4.hr, 0.8769922, (0.864, 0.889)),
        ReportRow("scenario3_vs_scenario4_gap", abs(maic3.hr - maic4.hr),
                  abs(0.8765244 - 0.8769922), (0.0, 0.006)),
        ReportRow("true_marginal_loghr_AC_S1", true_S1, TRUE_MARGINAL_LOG_HR,
                  (TRUE_MARGINAL_LOG_HR - 0.02, TRUE_MARGINAL_LOG_HR + 0.02)),
        ReportRow("true_marginal_loghr_AC_S2", true_S2, TRUE_MARGINAL_LOG_HR,
                  (TRUE_MARGINAL_LOG_HR - 0.02, TRUE_MARGINAL_LOG_HR + 0.02)),
        ReportRow("true_effect_gap", abs(true_S1 - true_S2), 0.0, (0.0, 0.02)),
        ReportRow("scenario1_balance_gap_max", float(report1.abs_gaps.max()),
                  None, (0.0, 1e-6)),
        ReportRow("scenario1_ess_fraction", w1.ess / n, None, (0.0, 1.0 - 1e-12)),
        ReportRow("ess_scenario2_minus_scenario1", w2.ess - w1.ess, None,
                  (0.0, math.inf)),
        ReportRow("ess_scenario1_minus_scenario3", w1.ess - w3.ess, None,
                  (0.0, math.inf)),
        ReportRow("maic_vs_naive_gap_in_combined_se",
                  abs(maic1.log_hr - marginal_AC.log_hr) / combined_se, None,
                  (0.0, 3.0)),
    )
    return ReplicationReport(seed=seed, n=n, rows=rows)
