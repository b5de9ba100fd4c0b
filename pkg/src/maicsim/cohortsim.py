"""Simulation of randomized trial cohorts with exponential survival outcomes.

Covariates are drawn independently from named marginal distributions, the
linear predictor follows a proportional-hazards outcome model with optional
treatment-by-covariate interactions, and event times are generated by
inverse-transform of the conditional exponential law, with independent
exponential censoring.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .coxph import SolverSettings, SurvivalSample, fit_cox
from .stochastic import DistributionSpec, Exponential, RandomStream, draw_variates


@dataclass(frozen=True)
class CovariateSpec:
    name: str
    marginal: DistributionSpec
    prognostic_coef: float = 0.0    # log hazard per unit
    interaction_coef: float = 0.0   # log hazard per unit, treated arm only


@dataclass(frozen=True)
class OutcomeModelSpec:
    treatment_log_hr: float
    baseline_rate: float        # events per day
    censoring_rate: float       # per day; 0 disables censoring
    covariates: tuple[CovariateSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if not self.baseline_rate > 0:
            raise ValueError("baseline_rate must be positive")
        if self.censoring_rate < 0:
            raise ValueError("censoring_rate must be non-negative")
        names = [c.name for c in self.covariates]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate covariate names: {names}")

    @property
    def covariate_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.covariates)


@dataclass(frozen=True)
class SelectionModelSpec:
    theta_age: float
    theta_iss: float
    age_center: float = 65.0


@dataclass(frozen=True)
class TrialData:
    covariate_names: tuple[str, ...]
    X: np.ndarray       # n x K raw covariate values
    trt: np.ndarray     # 0/1
    time: np.ndarray    # days, > 0
    status: np.ndarray  # 1 event, 0 censored

    def __post_init__(self):
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        n = self.X.shape[0]
        if not (self.trt.shape[0] == self.time.shape[0] == self.status.shape[0] == n):
            raise ValueError("parallel arrays must share the row count of X")
        if np.any(self.time <= 0):
            raise ValueError("all times must be positive")
        if not np.all((self.status == 0) | (self.status == 1)):
            raise ValueError("status must be 0/1")
        if not np.all((self.trt == 0) | (self.trt == 1)):
            raise ValueError("trt must be 0/1")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            k = self.covariate_names.index(name)
        except ValueError:
            raise KeyError(f"no covariate named {name!r}") from None
        return self.X[:, k]

    def columns(self, names) -> np.ndarray:
        return np.column_stack([self.column(nm) for nm in names])


@dataclass(frozen=True)
class AggregateSummary:
    """The 'Table 1' of an aggregate-level study: covariate means plus the
    marginal treatment-effect summary."""
    covariate_names: tuple[str, ...]
    means: np.ndarray
    means_treated: np.ndarray
    means_control: np.ndarray
    log_hr: float
    se: float

    def mean(self, name: str) -> float:
        return float(self.means[self.covariate_names.index(name)])


def simulate_covariates(specs, n: int, stream: RandomStream) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    specs = list(specs)
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate covariate names: {names}")
    if not specs:
        return np.empty((n, 0))
    return np.column_stack([draw_variates(stream, s.marginal, n) for s in specs])


def linear_predictor(X: np.ndarray, trt: np.ndarray, model: OutcomeModelSpec) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != len(model.covariates):
        raise ValueError(
            f"design has {X.shape[1]} columns but model declares "
            f"{len(model.covariates)} covariates")
    b = np.array([c.prognostic_coef for c in model.covariates])
    b_int = np.array([c.interaction_coef for c in model.covariates])
    trt = np.asarray(trt, dtype=float)
    return X @ b + (model.treatment_log_hr + X @ b_int) * trt


def latent_event_times(u: np.ndarray, lp: np.ndarray, rate: float) -> np.ndarray:
    """Exponential proportional-hazards inversion: -ln(U) / (rate * exp(LP))."""
    return -np.log(u) / (rate * np.exp(lp))


def simulate_survival(lp: np.ndarray, model: OutcomeModelSpec, stream: RandomStream):
    lp = np.asarray(lp, dtype=float)
    n = lp.shape[0]
    tlat = latent_event_times(stream.uniforms(n), lp, model.baseline_rate)
    if model.censoring_rate == 0:
        return tlat, np.ones(n)
    cens = draw_variates(stream, Exponential(model.censoring_rate), n)
    time = np.minimum(tlat, cens)
    status = (tlat <= cens).astype(float)
    return time, status


def simulate_trial(model: OutcomeModelSpec, n: int, stream: RandomStream) -> TrialData:
    """One 1:1 randomized trial: first n/2 subjects treated."""
    if n % 2 != 0:
        raise ValueError(f"n must be even for 1:1 allocation, got {n}")
    trt = np.concatenate([np.ones(n // 2), np.zeros(n - n // 2)])
    X = simulate_covariates(model.covariates, n, stream)
    lp = linear_predictor(X, trt, model)
    time, status = simulate_survival(lp, model, stream)
    return TrialData(model.covariate_names, X, trt, time, status)


def selection_probabilities(X: np.ndarray, names, sel: SelectionModelSpec) -> np.ndarray:
    """Per-subject probability of study-A membership from
    logit P = theta_age * (Age - center) + theta_iss * ISS."""
    names = list(names)
    for required in ("Age", "ISS"):
        if required not in names:
            raise KeyError(f"selection model requires a column named {required!r}")
    age = X[:, names.index("Age")]
    iss = X[:, names.index("ISS")]
    return expit(sel.theta_age * (age - sel.age_center) + sel.theta_iss * iss)


def assign_study_membership(X: np.ndarray, names, sel: SelectionModelSpec,
                            stream: RandomStream) -> np.ndarray:
    """Bernoulli draw of study membership (1 = study A) per subject."""
    prob = selection_probabilities(X, names, sel)
    return (stream.uniforms(X.shape[0]) < prob).astype(float)


def summarize_aggregate(trial: TrialData,
                        settings: SolverSettings = SolverSettings()) -> AggregateSummary:
    if trial.n == 0:
        raise ValueError("trial is empty")
    fit = fit_cox(SurvivalSample(trial.time, trial.status, trial.trt[:, None]),
                  settings)
    treated = trial.trt == 1
    return AggregateSummary(
        covariate_names=trial.covariate_names,
        means=trial.X.mean(axis=0),
        means_treated=trial.X[treated].mean(axis=0),
        means_control=trial.X[~treated].mean(axis=0),
        log_hr=float(fit.beta[0]),
        se=float(fit.se_model[0]),
    )


def trial_to_csv(trial: TrialData) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["subject_id", *trial.covariate_names, "trt", "time", "status"])
    for i in range(trial.n):
        writer.writerow([
            i,
            *(f"{v:.10g}" for v in trial.X[i]),
            int(trial.trt[i]),
            f"{trial.time[i]:.10g}",
            int(trial.status[i]),
        ])
    return buf.getvalue()


def trial_from_csv(text: str) -> TrialData:
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0]
    if header[0] != "subject_id" or header[-3:] != ["trt", "time", "status"]:
        raise ValueError("unrecognized trial CSV header")
    names = tuple(header[1:-3])
    body = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    return TrialData(names, body[:, : len(names)], body[:, -3], body[:, -2], body[:, -1])
