"""Reference estimators that ignore measurement error in the exposure effects:
inverse-variance weighting, MR-Egger regression and the weighted median."""

from __future__ import annotations

import warnings

import numpy as np

from .core import (
    FitResult,
    Method,
    MRError,
    SolverConfig,
    SolverReport,
    SummaryData,
    require_snps,
    validate,
)


class AllWeightsDegenerate(MRError):
    pass


class DegenerateDesign(MRError):
    pass


class ZeroGammaHat(MRError):
    pass


def _residual_scale(resid: np.ndarray, w: np.ndarray, dof: int) -> float:
    if dof <= 0:
        return 1.0
    return float(np.sqrt(np.sum(w * resid**2) / dof))


def fit_ivw(data: SummaryData) -> FitResult:
    """Weighted regression of outcome on exposure effects through the origin.

    Weights are ``1 / sigma_y^2``. The standard error is the fixed-effect one
    inflated by the residual scale when that exceeds 1 (multiplicative random
    effects).
    """
    validate(data)
    g, G, w = data.gamma_hat, data.gamma_cap_hat, 1.0 / data.sigma_y2
    info = float(np.sum(w * g**2))
    if not info > 0:
        raise AllWeightsDegenerate("all exposure effects are zero")
    beta = float(np.sum(w * g * G) / info)
    scale = _residual_scale(G - beta * g, w, data.p - 1)
    se = np.sqrt(1.0 / info) * max(1.0, scale)
    return FitResult(
        Method.IVW,
        beta,
        float(se),
        data.p,
        SolverReport(),
        convention="weights 1/sigma_y^2; se scaled by max(1, residual scale)",
    )


def fit_egger(data: SummaryData, orient: bool = True) -> FitResult:
    """MR-Egger: weighted regression of outcome on exposure effects with an intercept.

    By default every exposure effect is first oriented to be non-negative,
    which fixes the allele coding and makes the estimate invariant to
    recoding. With ``orient=False`` the regression runs on the coding as
    given, and the intercept makes the slope depend on that coding.
    """
    validate(data)
    require_snps(data, 3, "MR-Egger")
    sign = np.where(orient & (data.gamma_hat < 0), -1.0, 1.0)
    g, G = data.gamma_hat * sign, data.gamma_cap_hat * sign
    w = 1.0 / data.sigma_y2
    if np.ptp(g) == 0:
        raise DegenerateDesign("all oriented exposure effects are equal")

    X = np.column_stack([np.ones_like(g), g])
    xtwx = X.T @ (w[:, None] * X)
    coef = np.linalg.solve(xtwx, X.T @ (w * G))
    scale = _residual_scale(G - X @ coef, w, data.p - 2)
    cov = np.linalg.inv(xtwx) * max(1.0, scale) ** 2
    n_flipped = int(np.sum(sign < 0))
    return FitResult(
        Method.EGGER,
        float(coef[1]),
        float(np.sqrt(cov[1, 1])),
        data.p,
        SolverReport(warnings=(f"oriented {n_flipped} SNPs to positive exposure effect",) if n_flipped else ()),
        intercept=float(coef[0]),
        intercept_se=float(np.sqrt(cov[0, 0])),
        convention=("weights 1/sigma_y^2 after orienting gamma_hat >= 0" if orient else "weights 1/sigma_y^2, coding as given")
        + "; se scaled by max(1, residual scale)",
    )


def weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    """Weighted median with linear interpolation between order statistics.

    Each sorted value sits at cumulative weight ``S_j - w_j / 2`` (weights
    normalized to sum to 1); the estimate interpolates at 1/2.
    """
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order] / np.sum(weights)
    pos = np.cumsum(w) - 0.5 * w
    return float(np.interp(0.5, pos, v))


def _batched_weighted_median(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    order = np.argsort(values, axis=1, kind="stable")
    v = np.take_along_axis(values, order, axis=1)
    w = np.take_along_axis(weights, order, axis=1)
    w = w / w.sum(axis=1, keepdims=True)
    pos = np.cumsum(w, axis=1) - 0.5 * w
    idx = np.clip(np.sum(pos < 0.5, axis=1), 1, v.shape[1] - 1)
    rows = np.arange(v.shape[0])
    x0, x1 = pos[rows, idx - 1], pos[rows, idx]
    y0, y1 = v[rows, idx - 1], v[rows, idx]
    frac = np.clip((0.5 - x0) / np.where(x1 > x0, x1 - x0, 1.0), 0.0, 1.0)
    return y0 + frac * (y1 - y0)


def fit_weighted_median(data: SummaryData, config: SolverConfig = SolverConfig(), seed: int | None = None) -> FitResult:
    """Weighted median of the per-SNP ratio estimates.

    Weights are the first-order inverse variances ``gamma_hat^2 / sigma_y^2``.
    SNPs with ``gamma_hat == 0`` have no ratio and are dropped with a warning.
    The standard error comes from a parametric bootstrap of both effect
    estimates (``config.n_bootstrap`` draws seeded by ``seed`` or
    ``config.seed``).
    """
    validate(data)
    require_snps(data, 3, "weighted median")
    notes = []
    keep = data.gamma_hat != 0
    if not np.all(keep):
        dropped = [s for s, k in zip(data.snp_ids, keep) if not k]
        msg = f"dropped SNPs with zero exposure effect: {', '.join(dropped)}"
        warnings.warn(msg)
        notes.append(msg)
        if not np.any(keep):
            raise ZeroGammaHat("every exposure effect is zero")
        data = data.subset(keep)

    g, sx, G, sy = data.gamma_hat, data.sigma_x, data.gamma_cap_hat, data.sigma_y
    beta = weighted_median(G / g, g**2 / sy**2)

    rng = np.random.default_rng(config.seed if seed is None else seed)
    n = max(int(config.n_bootstrap), 2)
    gb = g + sx * rng.standard_normal((n, g.size))
    Gb = G + sy * rng.standard_normal((n, g.size))
    ok = np.all(gb != 0, axis=1)
    boot = _batched_weighted_median(Gb[ok] / gb[ok], gb[ok] ** 2 / sy**2)
    se = float(np.std(boot, ddof=1))
    return FitResult(
        Method.WMEDIAN,
        beta,
        se,
        data.p,
        SolverReport(warnings=tuple(notes)),
        convention="weights gamma_hat^2/sigma_y^2; parametric bootstrap se",
    )
