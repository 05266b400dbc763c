"""Robust adjusted profile score.

The residuals are standardized by their model standard deviation,
``t_j = (gamma_cap_hat_j - beta * gamma_hat_j) / sqrt(sigma_xj^2 beta^2 + sigma_yj^2 + tau^2)``,
and passed through the derivative of a robust loss. The tau^2 equation is a
robust scale equation recentred by ``delta = E[R rho'(R)]`` so that it has
mean zero under the model. With the squared-error loss both equations are the
adjusted profile scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aps import (
    ApsVariance,
    fit_aps,
    information_matrices,
    moment_tau2,
    sandwich,
    search_half_width,
    select_root,
)
from .core import (
    DegenerateVariance,
    FitResult,
    Method,
    MRError,
    MultipleRootsAmbiguous,
    SolverConfig,
    SolverReport,
    SummaryData,
    require_snps,
    validate,
)
from .losses import RobustLoss, loss_constants
from .profile import fit_ps
from .solver import find_roots


@dataclass(frozen=True)
class RapsScore:
    psi1: float
    psi2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.psi1, self.psi2])


def _pieces(beta, tau2, data: SummaryData):
    b = np.asarray(beta, dtype=float)[..., None]
    t2 = np.asarray(tau2, dtype=float)[..., None]
    g, sx2, G = data.gamma_hat, data.sigma_x2, data.gamma_cap_hat
    d = sx2 * b**2 + data.sigma_y2 + t2
    r = G - b * g
    sd = np.sqrt(d)
    t = r / sd
    num = g * d + r * sx2 * b
    u = num / (d * sd)
    return b, d, r, t, u, num


def standardized_residual(beta, tau2, data: SummaryData) -> np.ndarray:
    """``t_j(beta, tau^2)`` for every SNP."""
    return _pieces(beta, tau2, data)[3]


def raps_terms(beta, tau2, data: SummaryData, loss: RobustLoss):
    delta = loss_constants(loss).delta
    _, d, _, t, u, _ = _pieces(beta, tau2, data)
    rp = loss.rho_prime(t)
    return rp * u, data.sigma_x2 * (t * rp - delta) / d


def raps_score(beta: float, tau2: float, data: SummaryData, loss: RobustLoss = RobustLoss.tukey()) -> RapsScore:
    t1, t2 = raps_terms(beta, tau2, data, loss)
    return RapsScore(float(np.sum(t1)), float(np.sum(t2)))


def robust_profile_loglik(beta, data: SummaryData, loss: RobustLoss):
    """``-sum_j rho(t_j(beta, 0))``; its beta-derivative is the first robust score at tau^2 = 0."""
    out = -np.sum(loss.rho(standardized_residual(beta, 0.0, data)), axis=-1)
    return out if np.ndim(out) else float(out)


def raps_jacobian(beta: float, tau2: float, data: SummaryData, loss: RobustLoss) -> np.ndarray:
    delta = loss_constants(loss).delta
    sx2, g = data.sigma_x2, data.gamma_hat
    _, d, r, t, u, num = _pieces(beta, tau2, data)
    b = float(beta)
    d15, d25 = d**1.5, d**2.5
    rp, rpp = loss.rho_prime(t), loss.rho_double_prime(t)
    du_db = (g * sx2 * b + r * sx2) / d15 - 3.0 * num * sx2 * b / d25
    du_dt = g / d15 - 1.5 * num / d25
    dt_db, dt_dt = -u, -t / (2.0 * d)
    h = t * rp - delta
    dh = rp + t * rpp
    j11 = np.sum(rpp * dt_db * u + rp * du_db)
    j12 = np.sum(rpp * dt_dt * u + rp * du_dt)
    j21 = np.sum(sx2 * (dh * dt_db / d - h * 2.0 * sx2 * b / d**2))
    j22 = np.sum(sx2 * (dh * dt_dt / d - h / d**2))
    return np.array([[j11, j12], [j21, j22]])


def raps_variance(beta_hat: float, tau2_hat: float, data: SummaryData, loss: RobustLoss) -> ApsVariance:
    """Plug-in sandwich with the loss constants rescaling the APS information matrices."""
    c = loss_constants(loss)
    v1, v2 = information_matrices(beta_hat, tau2_hat, data)
    v1r = np.array([[c.c1 * v1[0, 0], 0.0], [0.0, c.c2 * v1[1, 1]]])
    v2r = np.array([[c.delta * v2[0, 0], c.delta * v2[0, 1]], [0.0, 0.5 * (c.delta + c.c3) * v2[1, 1]]])
    return sandwich(v1r, v2r)


class _RapsSystem:
    def __init__(self, data: SummaryData, loss: RobustLoss):
        self.data = data
        self.loss = loss
        self._upper_factor = 1.5 * loss.curvature_at_zero / loss_constants(loss).delta

    def terms(self, beta, tau2):
        return raps_terms(beta, tau2, self.data, self.loss)

    def jacobian(self, beta, tau2):
        return raps_jacobian(beta, tau2, self.data, self.loss)

    def tau2_upper(self, beta):
        d = self.data
        b = np.atleast_1d(np.asarray(beta, dtype=float))
        r2 = (d.gamma_cap_hat[None, :] - b[:, None] * d.gamma_hat[None, :]) ** 2
        return self._upper_factor * np.max(r2, axis=1) + 1e-12 * float(np.min(d.sigma_y2))


def _raps_init(data: SummaryData, config: SolverConfig):
    try:
        fit = fit_aps(data, config)
        return fit.beta_hat, fit.tau2_hat
    except MRError:
        beta = fit_ps(data, config).beta_hat
        return beta, moment_tau2(beta, data)


def fit_raps(
    data: SummaryData,
    loss: RobustLoss = RobustLoss.tukey(),
    config: SolverConfig = SolverConfig(),
    init: tuple | None = None,
) -> FitResult:
    """Robust adjusted profile score estimate of (beta, tau^2).

    Starts from the APS solution (the profile-score estimate if APS fails)
    unless ``init`` is given.

    Raises
    ------
    NoFiniteRoot, NonConvergence, DegenerateVariance
    MultipleRootsAmbiguous
        If two converged roots differ in beta by more than ten combined
        standard errors.
    """
    validate(data)
    require_snps(data, 3, "RAPS")
    beta0, tau0 = init if init is not None else _raps_init(data, config)
    system = _RapsSystem(data, loss)

    def variance(b, t):
        return raps_variance(b, t, data, loss)

    roots = find_roots(system, beta0, search_half_width(variance, beta0, tau0), config)
    good, chosen = select_root(roots, beta0, config, "RAPS")

    notes = []
    if len(good) > 1:
        ses = []
        for r in good:
            try:
                ses.append(variance(r.beta, r.tau2).beta_se)
            except DegenerateVariance:
                ses.append(np.inf)
        for i in range(len(good)):
            for j in range(i + 1, len(good)):
                if abs(good[i].beta - good[j].beta) > 10.0 * np.hypot(ses[i], ses[j]):
                    raise MultipleRootsAmbiguous([r.beta for r in good])
        notes.append(f"{len(good)} finite roots found; the one closest to the initializer is reported")
    if chosen.clamped:
        notes.append("tau2 clamped at boundary; tau2_se is unreliable")
    var = variance(chosen.beta, chosen.tau2)
    report = SolverReport(
        converged=True,
        iterations=sum(r.iterations for r in roots),
        final_score_norm=chosen.score_norm,
        n_roots_found=len(good),
        warnings=tuple(notes),
        roots=tuple(r.beta for r in good),
    )
    return FitResult(
        Method.RAPS,
        chosen.beta,
        var.beta_se,
        data.p,
        report,
        tau2_hat=chosen.tau2,
        tau2_se=var.tau2_se,
        loss=loss,
    )
