"""Moment-matching weight estimation for population adjustment.

IPD covariates are centered on the target (aggregate) means; minimizing the
convex objective Q(alpha) = sum_i exp(Xc_i . alpha) with a quasi-Newton
method yields tilting coefficients whose weights w_i = exp(Xc_i . alpha)
satisfy the first-order moment condition: weighted IPD covariate means equal
the target means.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_MAX_EXPONENT = 700.0  # beyond this exp() overflows a double


class TargetOutsideSupport(Exception):
    """The target means cannot be matched: outside the convex hull of the
    IPD covariates, so the tilting coefficients diverge."""


@dataclass(frozen=True)
class BalanceProblem:
    Xc: np.ndarray                      # n x K, centered on target means
    target_means: np.ndarray
    covariate_names: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.Xc.shape[0]

    @property
    def K(self) -> int:
        return self.Xc.shape[1]


@dataclass
class MaicWeights:
    alpha: np.ndarray
    w: np.ndarray
    ess: float
    converged: bool
    grad_norm: float
    iterations: int


@dataclass(frozen=True)
class OptimizerSettings:
    grad_tol: float = 1e-8
    max_iters: int = 500
    initial_alpha: np.ndarray | None = None


@dataclass
class OptimizerDiagnostics:
    converged: bool
    iterations: int
    grad_norm: float
    value: float
    diverged: bool = False


def center_covariates(X_ipd: np.ndarray, target_means, names=None) -> BalanceProblem:
    X_ipd = np.atleast_2d(np.asarray(X_ipd, dtype=float))
    target = np.asarray(target_means, dtype=float).ravel()
    if X_ipd.shape[1] != target.shape[0]:
        raise ValueError(
            f"{X_ipd.shape[1]} covariate columns but {target.shape[0]} target means")
    if names is None:
        names = tuple(f"x{k + 1}" for k in range(X_ipd.shape[1]))
    names = tuple(names)
    if len(names) != X_ipd.shape[1]:
        raise ValueError("covariate names do not match column count")
    return BalanceProblem(X_ipd - target, target, names)


def objective_and_gradient(alpha: np.ndarray, prob: BalanceProblem):
    alpha = np.asarray(alpha, dtype=float)
    e = prob.Xc @ alpha
    if np.max(e, initial=-np.inf) > _MAX_EXPONENT:
        return np.inf, np.full(prob.K, np.nan)
    w = np.exp(e)
    return float(w.sum()), prob.Xc.T @ w


def bfgs_minimize(evaluator, settings: OptimizerSettings,
                  divergence_norm: float | None = None):
    """Quasi-Newton minimization with inverse-Hessian (BFGS) updates and a
    backtracking Armijo line search.

    ``evaluator`` maps alpha to (value, gradient). Stops when the gradient
    infinity norm falls below ``settings.grad_tol``, the iteration budget is
    exhausted, or (if ``divergence_norm`` is set) the iterate's 2-norm
    exceeds it without the gradient vanishing.
    """
    if settings.initial_alpha is None:
        raise ValueError("settings.initial_alpha is required")
    alpha = np.asarray(settings.initial_alpha, dtype=float).copy()
    k = alpha.shape[0]
    f, g = evaluator(alpha)
    if not np.isfinite(f):
        raise ValueError("objective is not finite at the starting point")
    hinv = np.eye(k)
    iterations = 0
    diverged = False
    while np.max(np.abs(g)) > settings.grad_tol and iterations < settings.max_iters:
        direction = -hinv @ g
        if direction @ g >= 0:  # safeguard: fall back to steepest descent
            direction = -g
        step = 1.0
        f_new, g_new, alpha_new = None, None, None
        for _ in range(60):
            cand = alpha + step * direction
            fc, gc = evaluator(cand)
            if np.isfinite(fc) and fc <= f + 1e-4 * step * (direction @ g):
                f_new, g_new, alpha_new = fc, gc, cand
                break
            step *= 0.5
        if alpha_new is None:
            break  # line search failed; gradient norm reported below
        s = alpha_new - alpha
        y = g_new - g
        sy = s @ y
        if sy > 1e-12:
            rho = 1.0 / sy
            v = np.eye(k) - rho * np.outer(s, y)
            hinv = v @ hinv @ v.T + rho * np.outer(s, s)
        alpha, f, g = alpha_new, f_new, g_new
        iterations += 1
        if divergence_norm is not None and np.linalg.norm(alpha) > divergence_norm:
            diverged = True
            break
    grad_norm = float(np.max(np.abs(g)))
    diag = OptimizerDiagnostics(
        converged=grad_norm <= settings.grad_tol,
        iterations=iterations,
        grad_norm=grad_norm,
        value=f,
        diverged=diverged and grad_norm > settings.grad_tol,
    )
    return alpha, diag


def estimate_weights(prob: BalanceProblem,
                     settings: OptimizerSettings = OptimizerSettings()) -> MaicWeights:
    if prob.K < 1:
        raise ValueError("at least one covariate is required")
    if prob.n <= prob.K:
        raise ValueError(f"need n > K, got n={prob.n}, K={prob.K}")
    if settings.initial_alpha is None:
        settings = OptimizerSettings(settings.grad_tol, settings.max_iters,
                                     np.zeros(prob.K))
    alpha, diag = bfgs_minimize(
        lambda a: objective_and_gradient(a, prob), settings, divergence_norm=50.0)
    if diag.diverged or (not diag.converged and np.linalg.norm(alpha) > 50.0):
        raise TargetOutsideSupport(
            "tilting coefficients diverged; target means lie outside the "
            "convex hull of the IPD covariates")
    w = np.exp(prob.Xc @ alpha)
    # a vanishing gradient with collapsed weights is divergence in disguise:
    # the moment condition must hold relative to the weight total
    with np.errstate(invalid="ignore", divide="ignore"):
        rel_gap = np.max(np.abs(prob.Xc.T @ w)) / w.sum()
    if diag.converged and not rel_gap <= 1e-6:
        raise TargetOutsideSupport(
            "weighted moment condition unsatisfied at the stationary point; "
            "target means lie outside the convex hull of the IPD covariates")
    return MaicWeights(
        alpha=alpha,
        w=w,
        ess=effective_sample_size(w),
        converged=diag.converged,
        grad_norm=diag.grad_norm,
        iterations=diag.iterations,
    )


def effective_sample_size(w: np.ndarray) -> float:
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise ValueError("all weights must be positive")
    return float(w.sum() ** 2 / (w**2).sum())


@dataclass(frozen=True)
class BalanceReport:
    covariate_names: tuple[str, ...]
    ipd_means: np.ndarray
    weighted_means: np.ndarray
    target_means: np.ndarray
    abs_gaps: np.ndarray
    ess: float
    ess_fraction: float

    def to_tsv(self) -> str:
        lines = ["covariate\tipd_mean\tweighted_mean\ttarget_mean\tabs_gap"]
        for k, name in enumerate(self.covariate_names):
            lines.append("\t".join([
                name,
                f"{self.ipd_means[k]:.10g}",
                f"{self.weighted_means[k]:.10g}",
                f"{self.target_means[k]:.10g}",
                f"{self.abs_gaps[k]:.6g}",
            ]))
        lines.append(f"ESS\t{self.ess:.10g}\t(fraction {self.ess_fraction:.6g})")
        return "\n".join(lines) + "\n"


def balance_report(X_ipd: np.ndarray, w: np.ndarray, target_means,
                   names=None) -> BalanceReport:
    X_ipd = np.atleast_2d(np.asarray(X_ipd, dtype=float))
    if X_ipd.size == 0:
        X_ipd = X_ipd.reshape(len(w), 0)
    target = np.asarray(target_means, dtype=float).ravel()
    w = np.asarray(w, dtype=float)
    if names is None:
        names = tuple(f"x{k + 1}" for k in range(X_ipd.shape[1]))
    ipd_means = X_ipd.mean(axis=0) if X_ipd.shape[1] else np.empty(0)
    weighted = (w[:, None] * X_ipd).sum(axis=0) / w.sum() if X_ipd.shape[1] else np.empty(0)
    return BalanceReport(
        covariate_names=tuple(names),
        ipd_means=ipd_means,
        weighted_means=weighted,
        target_means=target,
        abs_gaps=np.abs(weighted - target),
        ess=effective_sample_size(w),
        ess_fraction=effective_sample_size(w) / len(w),
    )


def normalized_weights(w: np.ndarray) -> np.ndarray:
    """Display-only rescaling so the weights sum to n; estimates are
    invariant to this scaling."""
    w = np.asarray(w, dtype=float)
    return w * (len(w) / w.sum())
