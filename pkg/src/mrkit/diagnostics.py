"""Instrument strength, residual Q-Q data and leave-one-out influence."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .aps import fit_aps
from .core import FitResult, Method, MRError, SolverConfig, SummaryData, validate
from .losses import RobustLoss
from .profile import fit_ps
from .raps import fit_raps


class MethodMismatch(MRError):
    pass


def f_statistics(data: SummaryData) -> np.ndarray:
    return data.gamma_hat**2 / data.sigma_x2


def kappa_hat(data: SummaryData) -> float:
    """Average F-statistic minus one, an unbiased estimate of the average
    instrument strength. Can be negative for pure-noise instruments."""
    value = float(np.mean(f_statistics(data)) - 1.0)
    if value < 0:
        warnings.warn(f"estimated instrument strength is negative ({value:.3g})")
    return value


def standardized_residuals(fit: FitResult, data: SummaryData) -> np.ndarray:
    """Residuals of the fitted linear model divided by their model standard deviation.

    For APS and RAPS fits the variance includes the estimated tau^2.
    """
    if fit.n_snps != data.p:
        raise MethodMismatch(f"fit used {fit.n_snps} SNPs but data has {data.p}")
    if fit.method is Method.PS:
        tau2 = 0.0
    elif fit.method in (Method.APS, Method.RAPS):
        tau2 = fit.tau2_hat
    else:
        raise MethodMismatch(f"standardized residuals are not defined for {fit.method.value}")
    b = fit.beta_hat
    r = data.gamma_cap_hat - b * data.gamma_hat
    return r / np.sqrt(b**2 * data.sigma_x2 + data.sigma_y2 + tau2)


def qq_data(std_residuals) -> list[tuple[float, float]]:
    """(theoretical, empirical) quantile pairs with plotting positions (i - 0.5) / p."""
    res = np.sort(np.asarray(std_residuals, dtype=float))
    if res.size == 0:
        raise ValueError("no residuals")
    theo = stats.norm.ppf((np.arange(1, res.size + 1) - 0.5) / res.size)
    return list(zip(theo.tolist(), res.tolist()))


def refit(method: Method, data: SummaryData, config: SolverConfig, loss: RobustLoss | None = None, init=None):
    if method is Method.PS:
        return fit_ps(data, config)
    if method is Method.APS:
        return fit_aps(data, config, init=init)
    if method is Method.RAPS:
        return fit_raps(data, loss or RobustLoss.tukey(), config, init=init)
    raise MethodMismatch(f"leave-one-out is only provided for PS, APS and RAPS, not {method.value}")


def leave_one_out(
    method: Method | str,
    data: SummaryData,
    config: SolverConfig = SolverConfig(),
    loss: RobustLoss | None = None,
    full_fit: FitResult | None = None,
    max_workers: int = 1,
) -> list[tuple[str, object]]:
    """Refit without each SNP in turn.

    Returns ``(snp_id, beta_hat)`` per SNP, in input order; a refit that fails
    yields ``(snp_id, exception)`` instead. APS and RAPS refits re-estimate
    tau^2 and are warm-started at the full-data solution.
    """
    method = Method.parse(method) if isinstance(method, str) else method
    validate(data)
    minimum = 2 if method is Method.PS else 4
    if data.p < minimum:
        raise MRError(f"leave-one-out for {method.value} needs at least {minimum} SNPs")
    if full_fit is None:
        full_fit = refit(method, data, config, loss)
    init = None if method is Method.PS else (full_fit.beta_hat, full_fit.tau2_hat)

    def one(j):
        try:
            return data.snp_ids[j], refit(method, data.drop(j), config, loss, init).beta_hat
        except MRError as exc:
            return data.snp_ids[j], exc

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            return list(pool.map(one, range(data.p)))
    return [one(j) for j in range(data.p)]


@dataclass(frozen=True)
class DiagnosticsReport:
    kappa_hat: float
    f_stats: list
    std_residuals: list
    qq_pairs: list
    loo_estimates: list
    snp_ids: tuple = ()


def diagnose(
    fit: FitResult,
    data: SummaryData,
    config: SolverConfig = SolverConfig(),
    with_loo: bool = True,
) -> DiagnosticsReport:
    resid = standardized_residuals(fit, data)
    loo = leave_one_out(fit.method, data, config, fit.loss, full_fit=fit) if with_loo else []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        kappa = kappa_hat(data)
    return DiagnosticsReport(
        kappa_hat=kappa,
        f_stats=f_statistics(data).tolist(),
        std_residuals=resid.tolist(),
        qq_pairs=qq_data(resid),
        loo_estimates=loo,
        snp_ids=data.snp_ids,
    )
