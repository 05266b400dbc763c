"""Adjusted profile score for systematic pleiotropy.

Direct effects ``alpha_j ~ N(0, tau^2)`` inflate the variance of each
residual ``gamma_cap_hat - beta * gamma_hat`` by ``tau^2``. The first score
is the beta-derivative of the overdispersed profile likelihood; the second is
an adjusted tau^2 equation whose every term has mean zero at the truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DegenerateVariance,
    FitResult,
    Method,
    MRError,
    NonConvergence,
    SolverConfig,
    SolverReport,
    SummaryData,
    require_snps,
    validate,
)
from .profile import fit_ps
from .solver import find_roots


@dataclass(frozen=True)
class ApsScore:
    psi1: float
    psi2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.psi1, self.psi2])


@dataclass(frozen=True)
class ApsVariance:
    """Plug-in sandwich ``V2^{-1} V1 V2^{-T}`` for (beta, tau^2)."""

    v1_tilde_hat: np.ndarray
    v2_tilde_hat: np.ndarray
    cov_hat: np.ndarray

    @property
    def beta_se(self) -> float:
        return float(np.sqrt(self.cov_hat[0, 0]))

    @property
    def tau2_se(self) -> float:
        return float(np.sqrt(self.cov_hat[1, 1]))


def _arrays(data: SummaryData):
    return data.gamma_hat, data.sigma_x2, data.gamma_cap_hat, data.sigma_y2


def aps_terms(beta, tau2, data: SummaryData):
    """Per-SNP terms of both adjusted scores; SNPs on the last axis."""
    g, sx2, G, sy2 = _arrays(data)
    b = np.asarray(beta, dtype=float)[..., None]
    t = np.asarray(tau2, dtype=float)[..., None]
    d = sx2 * b**2 + sy2 + t
    r = G - b * g
    psi1 = r * (G * sx2 * b + g * (sy2 + t)) / d**2
    psi2 = sx2 * (r**2 - d) / d**2
    return psi1, psi2


def aps_score(beta: float, tau2: float, data: SummaryData) -> ApsScore:
    t1, t2 = aps_terms(beta, tau2, data)
    return ApsScore(float(np.sum(t1)), float(np.sum(t2)))


def aps_jacobian(beta: float, tau2: float, data: SummaryData) -> np.ndarray:
    """Analytic derivatives ``[[d psi1/d beta, d psi1/d tau2], [d psi2/d beta, d psi2/d tau2]]``."""
    g, sx2, G, sy2 = _arrays(data)
    d = sx2 * beta**2 + sy2 + tau2
    r = G - beta * g
    m = G * sx2 * beta + g * (sy2 + tau2)
    dd_b = 2.0 * sx2 * beta
    j11 = np.sum((-g * m + r * G * sx2) / d**2 - 2.0 * r * m * dd_b / d**3)
    j12 = np.sum(r * g / d**2 - 2.0 * r * m / d**3)
    j21 = np.sum(sx2 * (-2.0 * r * g / d**2 - 2.0 * r**2 * dd_b / d**3 + dd_b / d**2))
    j22 = np.sum(sx2 * (-2.0 * r**2 / d**3 + 1.0 / d**2))
    return np.array([[j11, j12], [j21, j22]])


def information_matrices(beta: float, tau2: float, data: SummaryData, gamma2=None, Gamma2=None):
    """``(V1, V2)`` at (beta, tau^2) with the squared true effects supplied.

    Without ``gamma2``/``Gamma2`` the unbiased plug-ins
    ``gamma_hat^2 - sigma_x^2`` and ``gamma_cap_hat^2 - sigma_y^2 - tau^2`` are used.
    """
    g, sx2, G, sy2 = _arrays(data)
    if gamma2 is None:
        gamma2 = g**2 - sx2
    if Gamma2 is None:
        Gamma2 = G**2 - sy2 - tau2
    d2 = (sx2 * beta**2 + sy2 + tau2) ** 2
    v1 = np.zeros((2, 2))
    v1[0, 0] = np.sum(((gamma2 + sx2) * (sy2 + tau2) + Gamma2 * sx2) / d2)
    v1[1, 1] = np.sum(2.0 * sx2**2 / d2)
    v2 = np.zeros((2, 2))
    v2[0, 0] = np.sum((gamma2 * (sy2 + tau2) + Gamma2 * sx2) / d2)
    v2[0, 1] = np.sum(sx2 * beta / d2)
    v2[1, 1] = np.sum(sx2 / d2)
    return v1, v2


def sandwich(v1: np.ndarray, v2: np.ndarray) -> ApsVariance:
    if not v2[0, 0] > 0 or not v2[1, 1] > 0:
        raise DegenerateVariance(f"plug-in V2 has non-positive diagonal {np.diag(v2)}")
    inv = np.linalg.inv(v2)
    cov = inv @ v1 @ inv.T
    if not (np.all(np.isfinite(cov)) and cov[0, 0] > 0 and cov[1, 1] > 0):
        raise DegenerateVariance("sandwich covariance has non-positive diagonal")
    return ApsVariance(v1, v2, cov)


def aps_variance(beta_hat: float, tau2_hat: float, data: SummaryData) -> ApsVariance:
    v1, v2 = information_matrices(beta_hat, tau2_hat, data)
    return sandwich(v1, v2)


class _ApsSystem:
    def __init__(self, data: SummaryData):
        self.data = data

    def terms(self, beta, tau2):
        return aps_terms(beta, tau2, self.data)

    def jacobian(self, beta, tau2):
        return aps_jacobian(beta, tau2, self.data)

    def tau2_upper(self, beta):
        d = self.data
        b = np.atleast_1d(np.asarray(beta, dtype=float))
        r2 = (d.gamma_cap_hat[None, :] - b[:, None] * d.gamma_hat[None, :]) ** 2
        return 1.5 * np.max(r2, axis=1) + 1e-12 * float(np.min(d.sigma_y2))


def moment_tau2(beta: float, data: SummaryData) -> float:
    r2 = (data.gamma_cap_hat - beta * data.gamma_hat) ** 2
    return max(0.0, float(np.mean(r2 - data.sigma_x2 * beta**2 - data.sigma_y2)))


def search_half_width(variance_fn, beta: float, tau2: float) -> float:
    try:
        return 12.0 * variance_fn(beta, tau2).beta_se
    except (DegenerateVariance, np.linalg.LinAlgError):
        return max(1.0, abs(beta))


def initial_point(data: SummaryData, config: SolverConfig) -> tuple[float, float]:
    try:
        beta = fit_ps(data, config).beta_hat
    except MRError:
        w = 1.0 / data.sigma_y2
        beta = float(np.sum(w * data.gamma_hat * data.gamma_cap_hat) / np.sum(w * data.gamma_hat**2))
    return beta, moment_tau2(beta, data)


def select_root(roots, beta_init: float, config: SolverConfig, method: str):
    good = [r for r in roots if r.score_norm <= config.score_tol]
    if not good:
        best = min(roots, key=lambda r: r.score_norm)
        raise NonConvergence(
            f"{method} solver stalled at score norm {best.score_norm:.3g} > {config.score_tol:g}"
        )
    chosen = min(good, key=lambda r: abs(r.beta - beta_init))
    return good, chosen


def fit_aps(data: SummaryData, config: SolverConfig = SolverConfig(), init: tuple | None = None) -> FitResult:
    """Adjusted profile score estimate of (beta, tau^2).

    ``init`` optionally supplies a warm start ``(beta, tau2)``; by default the
    profile-score estimate and the moment estimate of tau^2 are used.

    Raises
    ------
    NoFiniteRoot, NonConvergence, DegenerateVariance
    """
    validate(data)
    require_snps(data, 3, "APS")
    beta0, tau0 = init if init is not None else initial_point(data, config)
    system = _ApsSystem(data)
    half = search_half_width(lambda b, t: aps_variance(b, t, data), beta0, tau0)
    roots = find_roots(system, beta0, half, config)
    good, chosen = select_root(roots, beta0, config, "APS")

    notes = []
    if len(good) > 1:
        notes.append(f"{len(good)} finite roots found; the one closest to the initializer is reported")
    if chosen.clamped:
        notes.append("tau2 clamped at boundary; tau2_se is unreliable")
    var = aps_variance(chosen.beta, chosen.tau2, data)
    report = SolverReport(
        converged=True,
        iterations=sum(r.iterations for r in roots),
        final_score_norm=chosen.score_norm,
        n_roots_found=len(good),
        warnings=tuple(notes),
        roots=tuple(r.beta for r in good),
    )
    return FitResult(
        Method.APS,
        chosen.beta,
        var.beta_se,
        data.p,
        report,
        tau2_hat=chosen.tau2,
        tau2_se=var.tau2_se,
    )
