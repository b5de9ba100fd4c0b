"""Cox proportional-hazards fitting by Newton-Raphson on the partial likelihood.

Supports subject (case) weights: each subject contributes its weight to both
the event terms and the risk-set sums. Ties are handled with the Breslow
approximation; a warning is emitted when ties are present since the
data-generating process here is continuous-time and ties should not occur.
Variance comes in two flavours: model-based (inverse information) and the
Lin-Wei robust sandwich built from per-subject score residuals.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


class CoxError(Exception):
    pass


class NoEvents(CoxError):
    pass


class SingularInformation(CoxError):
    pass


class MonotoneLikelihood(CoxError):
    """Coefficients diverging (separation); the partial likelihood has no
    finite maximizer."""


@dataclass(frozen=True)
class SolverSettings:
    score_tol: float = 1e-9   # infinity norm of the score at convergence
    max_iters: int = 50
    max_halvings: int = 10
    beta_bound: float = 15.0  # |beta|_inf beyond this flags separation


@dataclass(frozen=True)
class SurvivalSample:
    time: np.ndarray
    status: np.ndarray
    Z: np.ndarray
    w: np.ndarray | None = None

    def __post_init__(self):
        time = np.asarray(self.time, dtype=float)
        status = np.asarray(self.status, dtype=float)
        Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        if Z.shape[0] != time.shape[0]:
            Z = Z.T
        w = np.ones(time.shape[0]) if self.w is None else np.asarray(self.w, dtype=float)
        n = time.shape[0]
        if status.shape[0] != n or Z.shape[0] != n or w.shape[0] != n:
            raise ValueError("time, status, Z and w must have matching length")
        if np.any(time <= 0):
            raise ValueError("all times must be positive")
        if not np.all((status == 0) | (status == 1)):
            raise ValueError("status must be 0/1")
        if np.any(w <= 0):
            raise ValueError("all weights must be positive")
        if not np.any(status == 1):
            raise NoEvents("sample contains no events")
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "status", status)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.time.shape[0]

    @property
    def p(self) -> int:
        return self.Z.shape[1]


@dataclass
class CoxFit:
    beta: np.ndarray
    se_model: np.ndarray
    se_robust: np.ndarray
    loglik_at_solution: float
    iterations: int
    converged: bool
    score_norm: float


class _SortedSample:
    """Sample sorted by ascending time with tie-group indices precomputed."""

    def __init__(self, data: SurvivalSample):
        order = np.argsort(data.time, kind="stable")
        self.order = order
        self.t = data.time[order]
        self.d = data.status[order]
        self.z = data.Z[order]
        self.w = data.w[order]
        # risk set of t_i starts at the first index sharing its time;
        # events at t_i accumulate through the last index sharing its time
        self.first = np.searchsorted(self.t, self.t, side="left")
        self.last = np.searchsorted(self.t, self.t, side="right") - 1
        if np.any(self.first != self.last):
            warnings.warn("tied event times present; using Breslow tie handling")
        self.events = self.d == 1

    def risk_sums(self, beta: np.ndarray):
        """S0, S1, S2 over the risk set of each subject's time."""
        eta = self.z @ beta
        r = self.w * np.exp(eta)
        s0 = np.cumsum(r[::-1])[::-1]
        s1 = np.cumsum((r[:, None] * self.z)[::-1], axis=0)[::-1]
        zz = self.z[:, :, None] * self.z[:, None, :]
        s2 = np.cumsum((r[:, None, None] * zz)[::-1], axis=0)[::-1]
        return eta, s0[self.first], s1[self.first], s2[self.first]


def partial_loglik(beta: np.ndarray, data: SurvivalSample) -> float:
    beta = np.asarray(beta, dtype=float)
    s = _SortedSample(data)
    eta, s0, _, _ = s.risk_sums(beta)
    e = s.events
    return float(np.sum(s.w[e] * (eta[e] - np.log(s0[e]))))


def score_and_information(beta: np.ndarray, data: SurvivalSample):
    """Analytic gradient and negative Hessian of the weighted partial
    log-likelihood."""
    beta = np.asarray(beta, dtype=float)
    s = _SortedSample(data)
    return _score_info(s, beta)[1:]


def _score_info(s: _SortedSample, beta: np.ndarray):
    eta, s0, s1, s2 = s.risk_sums(beta)
    e = s.events
    we = s.w[e]
    zbar = s1[e] / s0[e][:, None]
    loglik = float(np.sum(we * (eta[e] - np.log(s0[e]))))
    grad = (we[:, None] * (s.z[e] - zbar)).sum(axis=0)
    v = s2[e] / s0[e][:, None, None] - zbar[:, :, None] * zbar[:, None, :]
    info = (we[:, None, None] * v).sum(axis=0)
    return loglik, grad, info


def fit_cox(data: SurvivalSample, settings: SolverSettings = SolverSettings()) -> CoxFit:
    """Newton-Raphson from beta = 0 with step-halving."""
    s = _SortedSample(data)
    p = data.p
    beta = np.zeros(p)
    loglik, grad, info = _score_info(s, beta)
    if np.linalg.matrix_rank(info) < p:
        raise SingularInformation("information matrix is singular at beta=0 "
                                  "(constant or collinear design column)")
    iterations = 0
    converged = False
    for iterations in range(1, settings.max_iters + 1):
        if np.max(np.abs(grad)) <= settings.score_tol:
            converged = True
            iterations -= 1
            break
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError as exc:
            raise SingularInformation(str(exc)) from exc
        scale = 1.0
        for _ in range(settings.max_halvings + 1):
            cand = beta + scale * step
            cand_ll, cand_grad, cand_info = _score_info(s, cand)
            if np.isfinite(cand_ll) and cand_ll >= loglik:
                break
            scale *= 0.5
        beta, loglik, grad, info = cand, cand_ll, cand_grad, cand_info
        if np.max(np.abs(beta)) > settings.beta_bound:
            raise MonotoneLikelihood(
                f"|beta| exceeded {settings.beta_bound}; likely separation")
    else:
        iterations = settings.max_iters
    score_norm = float(np.max(np.abs(grad)))
    converged = converged or score_norm <= settings.score_tol
    try:
        cov_model = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise SingularInformation(str(exc)) from exc
    se_model = np.sqrt(np.diag(cov_model))
    fit = CoxFit(
        beta=beta,
        se_model=se_model,
        se_robust=se_model.copy(),
        loglik_at_solution=loglik,
        iterations=iterations,
        converged=converged,
        score_norm=score_norm,
    )
    fit.se_robust = np.sqrt(np.diag(robust_variance(fit, data)))
    return fit


def score_residuals(beta: np.ndarray, data: SurvivalSample) -> np.ndarray:
    """Per-subject score residuals U_i (weights excluded), in input order.

    Sum_i w_i U_i equals the score, hence vanishes at the optimum.
    """
    beta = np.asarray(beta, dtype=float)
    s = _SortedSample(data)
    eta, s0, s1, _ = s.risk_sums(beta)
    zbar = s1 / s0[:, None]
    # cumulative event-time sums d(t)/S0(t) and d(t)*zbar(t)/S0(t) up to each
    # subject's follow-up time (ties included via the tie-group last index)
    inc0 = np.where(s.events, s.w / s0, 0.0)
    inc1 = np.where(s.events[:, None], (s.w / s0)[:, None] * zbar, 0.0)
    g0 = np.cumsum(inc0)[s.last]
    g1 = np.cumsum(inc1, axis=0)[s.last]
    expeta = np.exp(eta)
    u = (s.d[:, None] * (s.z - zbar)
         - expeta[:, None] * (g0[:, None] * s.z - g1))
    out = np.empty_like(u)
    out[s.order] = u
    return out


def robust_variance(fit: CoxFit, data: SurvivalSample) -> np.ndarray:
    """Lin-Wei sandwich: inv(I) (sum_i w_i^2 U_i U_i') inv(I)."""
    _, info = score_and_information(fit.beta, data)
    try:
        bread = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise SingularInformation(str(exc)) from exc
    uw = data.w[:, None] * score_residuals(fit.beta, data)
    meat = uw.T @ uw
    return bread @ meat @ bread
