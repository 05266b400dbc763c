"""Profile likelihood and profile score for the no-pleiotropy model.

With the SNP-exposure effects profiled out, the log-likelihood of the causal
effect is a weighted regression of the outcome effects on the exposure effects
whose per-SNP variance ``sigma_x^2 beta^2 + sigma_y^2`` depends on beta. The
score used throughout is the derivative of that log-likelihood, so the
estimate solves ``profile_score(beta) == 0`` and maximizes ``profile_loglik``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .core import (
    DegenerateVariance,
    FitResult,
    Method,
    MRError,
    NoFiniteRoot,
    SolverConfig,
    SolverReport,
    SummaryData,
    validate,
)


class NonPositiveKappa(MRError, ValueError):
    pass


def _broadcast_beta(beta, data: SummaryData):
    b = np.asarray(beta, dtype=float)
    return b[..., None], data.gamma_hat, data.sigma_x2, data.gamma_cap_hat, data.sigma_y2


def profile_loglik(beta, data: SummaryData):
    """Profile log-likelihood, up to an additive constant.

    ``beta`` may be a scalar or an array; the result has the same shape.
    """
    b, g, sx2, G, sy2 = _broadcast_beta(beta, data)
    r = G - b * g
    out = -0.5 * np.sum(r**2 / (sx2 * b**2 + sy2), axis=-1)
    return out if out.ndim else float(out)


def score_terms(beta, data: SummaryData) -> np.ndarray:
    """Per-SNP contributions to the profile score (last axis indexes SNPs)."""
    b, g, sx2, G, sy2 = _broadcast_beta(beta, data)
    d = sx2 * b**2 + sy2
    return (G - b * g) * (G * sx2 * b + g * sy2) / d**2


def profile_score(beta, data: SummaryData):
    """Derivative of :func:`profile_loglik` with respect to beta."""
    out = np.sum(score_terms(beta, data), axis=-1)
    return out if out.ndim else float(out)


def _relative_score(beta: float, data: SummaryData) -> float:
    terms = score_terms(beta, data)
    scale = np.sum(np.abs(terms))
    total = abs(float(np.sum(terms)))
    return total / scale if scale > 0 else total


@dataclass(frozen=True)
class PsVariance:
    v1_hat: float
    v2_hat: float

    @property
    def se(self) -> float:
        return float(np.sqrt(self.v1_hat) / self.v2_hat)


def ps_variance(beta_hat: float, data: SummaryData) -> PsVariance:
    """Plug-in sandwich pieces for the profile-score estimator.

    The squared true effects in the asymptotic variance are replaced by their
    unbiased estimates ``gamma_hat^2 - sigma_x^2`` and
    ``gamma_cap_hat^2 - sigma_y^2``. The standard error is
    ``sqrt(v1_hat) / v2_hat``.
    """
    g, sx2, G, sy2 = data.gamma_hat, data.sigma_x2, data.gamma_cap_hat, data.sigma_y2
    d2 = (sx2 * beta_hat**2 + sy2) ** 2
    core = (g**2 - sx2) * sy2 + (G**2 - sy2) * sx2
    v2 = float(np.sum(core / d2))
    v1 = float(np.sum((core + sx2 * sy2) / d2))
    if v2 <= 0:
        warnings.warn("plug-in V2 is not positive; instruments are too weak for a sandwich variance")
        raise DegenerateVariance(f"plug-in V2 = {v2:.3g} <= 0")
    if v1 <= 0:
        raise DegenerateVariance(f"plug-in V1 = {v1:.3g} <= 0")
    return PsVariance(v1, v2)


def search_bound(data: SummaryData) -> float:
    """Half-width of the symmetric bracket searched for profile-score roots."""
    strong = np.abs(data.gamma_hat) / data.sigma_x > 2
    if not np.any(strong):
        return 10.0
    ratios = np.abs(data.gamma_cap_hat[strong] / data.gamma_hat[strong])
    return max(10.0, 10.0 * float(np.max(ratios)))


def find_ps_roots(data: SummaryData, config: SolverConfig = SolverConfig(), bound: float | None = None):
    """All local maximizers of the profile log-likelihood on ``[-bound, bound]``.

    The score is scanned on ``config.n_grid`` points and every ``+ -> -``
    sign change is refined with Brent's method.
    """
    bound = search_bound(data) if bound is None else bound
    grid = np.linspace(-bound, bound, config.n_grid)
    psi = profile_score(grid, data)
    roots = []
    exact = np.flatnonzero(psi == 0)
    for i in exact:
        # keep only maxima: the score leaves zero downward
        left = psi[i - 1] if i > 0 else 1.0
        right = psi[i + 1] if i + 1 < grid.size else -1.0
        if left >= 0 and right <= 0:
            roots.append(float(grid[i]))
    crossing = np.flatnonzero((psi[:-1] > 0) & (psi[1:] < 0))
    iterations = 0
    for i in crossing:
        root, info = optimize.brentq(
            profile_score,
            grid[i],
            grid[i + 1],
            args=(data,),
            xtol=1e-15,
            rtol=4 * np.finfo(float).eps,
            maxiter=config.max_iter,
            full_output=True,
        )
        iterations += info.iterations
        roots.append(float(root))
    return sorted(roots), iterations


def fit_ps(data: SummaryData, config: SolverConfig = SolverConfig()) -> FitResult:
    """Maximum profile likelihood estimate of the causal effect.

    Raises
    ------
    NoFiniteRoot
        If the score has no downward sign change in the search bracket.
    DegenerateVariance
        If the plug-in variance pieces are not positive.
    """
    validate(data)
    roots, iterations = find_ps_roots(data, config)
    if not roots:
        raise NoFiniteRoot("profile score has no sign change in the search bracket")
    notes = []
    if len(roots) > 1:
        notes.append(f"profile score has {len(roots)} local maxima; the global one is reported")
    values = profile_loglik(np.array(roots), data)
    beta_hat = float(roots[int(np.argmax(values))])

    norm = _relative_score(beta_hat, data)
    var = ps_variance(beta_hat, data)
    report = SolverReport(
        converged=norm <= config.score_tol,
        iterations=iterations,
        final_score_norm=norm,
        n_roots_found=len(roots),
        warnings=tuple(notes),
        roots=tuple(roots),
    )
    return FitResult(Method.PS, beta_hat, var.se, data.p, report)


def ivw_bias_prediction(beta: float, kappa: float) -> float:
    """Approximate expectation of the IVW estimate under measurement error in the
    exposure effects: ``beta / (1 + 1/kappa)``."""
    if not kappa > 0:
        raise NonPositiveKappa(f"kappa must be positive, got {kappa}")
    return beta / (1.0 + 1.0 / kappa)
