"""Marginal and conditional treatment-effect estimation and the anchored
indirect comparison.

Every estimate carries its scale (marginal vs. conditional); combining
estimates on different scales raises ScaleMismatch, since a hazard ratio is
non-collapsible and the two scales are not interchangeable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .cohortsim import OutcomeModelSpec, TrialData, simulate_trial
from .coxph import SolverSettings, SurvivalSample, fit_cox
from .stochastic import RandomStream

MARGINAL = "marginal"
CONDITIONAL = "conditional"

Z_975 = 1.959964  # normal 97.5% quantile for the 95% CI


class ScaleMismatch(ValueError):
    """Attempted to combine a marginal and a conditional effect estimate."""


@dataclass(frozen=True)
class EffectEstimate:
    log_hr: float
    se: float
    scale: str                  # MARGINAL or CONDITIONAL
    population: str = ""

    def __post_init__(self):
        if self.scale not in (MARGINAL, CONDITIONAL):
            raise ValueError(f"unknown scale {self.scale!r}")
        # se 0 is allowed so known truths can be expressed as estimates
        if self.se < 0:
            raise ValueError("se must be non-negative")

    @property
    def hr(self) -> float:
        return math.exp(self.log_hr)

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.log_hr - Z_975 * self.se, self.log_hr + Z_975 * self.se)

    def to_json(self) -> str:
        lo, hi = self.ci95
        return json.dumps({
            "log_hr": self.log_hr,
            "hr": self.hr,
            "se": self.se,
            "ci95_lo": lo,
            "ci95_hi": hi,
            "scale": self.scale,
            "population": self.population,
        })


@dataclass(frozen=True)
class IndirectComparison:
    log_hr_AB: float
    se: float
    ci95: tuple[float, float]
    components: tuple[EffectEstimate, EffectEstimate]


def _require_same_scale(d_AC: EffectEstimate, d_BC: EffectEstimate):
    if d_AC.scale != d_BC.scale:
        raise ScaleMismatch(
            f"cannot combine a {d_AC.scale} estimate with a {d_BC.scale} one; "
            "marginal and conditional hazard ratios are distinct estimands")


def marginal_effect(trial: TrialData, weights: np.ndarray | None = None,
                    population: str = "",
                    settings: SolverSettings = SolverSettings()) -> EffectEstimate:
    """Univariable (optionally weighted) Cox fit of outcome on treatment.

    With weights the robust sandwich standard error is reported, since the
    weighted score contributions are no longer independent unit terms.
    """
    sample = SurvivalSample(trial.time, trial.status, trial.trt[:, None], weights)
    fit = fit_cox(sample, settings)
    se = fit.se_robust[0] if weights is not None else fit.se_model[0]
    return EffectEstimate(float(fit.beta[0]), float(se), MARGINAL, population)


def conditional_effect(trial: TrialData, adjustment_set,
                       population: str = "",
                       settings: SolverSettings = SolverSettings()) -> EffectEstimate:
    """Treatment coefficient of the Cox fit adjusted for the named covariates."""
    adjustment_set = list(adjustment_set)
    if not adjustment_set:
        est = marginal_effect(trial, population=population, settings=settings)
        return EffectEstimate(est.log_hr, est.se, CONDITIONAL, population)
    Z = np.column_stack([trial.trt, trial.columns(adjustment_set)])
    fit = fit_cox(SurvivalSample(trial.time, trial.status, Z), settings)
    return EffectEstimate(float(fit.beta[0]), float(fit.se_model[0]),
                          CONDITIONAL, population)


def simulated_marginal_loghr(model: OutcomeModelSpec, n: int,
                             stream: RandomStream) -> float:
    """Univariable Cox treatment coefficient on one simulated cohort."""
    trial = simulate_trial(model, n, stream)
    sample = SurvivalSample(trial.time, trial.status, trial.trt[:, None])
    return float(fit_cox(sample).beta[0])


def true_marginal_effect(model: OutcomeModelSpec, n_large: int,
                         stream: RandomStream) -> float:
    """Simulation-based truth for the marginal log hazard ratio: a
    univariable Cox fit on one very large simulated cohort."""
    if n_large < 10**5:
        raise ValueError("n_large must be at least 1e5 for a stable truth")
    return simulated_marginal_loghr(model, n_large, stream)


def bucher_compare(d_AC: EffectEstimate, d_BC: EffectEstimate) -> IndirectComparison:
    """Anchored indirect comparison: difference of same-scale log hazard
    ratios with variances summed across the two independent trials."""
    _require_same_scale(d_AC, d_BC)
    log_hr = d_AC.log_hr - d_BC.log_hr
    se = math.sqrt(d_AC.se**2 + d_BC.se**2)
    return IndirectComparison(
        log_hr_AB=log_hr,
        se=se,
        ci95=(log_hr - Z_975 * se, log_hr + Z_975 * se),
        components=(d_AC, d_BC),
    )


def hr_ratio(d_AC: EffectEstimate, d_BC: EffectEstimate) -> float:
    _require_same_scale(d_AC, d_BC)
    return math.exp(d_AC.log_hr - d_BC.log_hr)
