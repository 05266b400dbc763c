"""Robust loss families and their standard-normal expectation constants."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import stats

from .core import MRError


class QuadratureNonConvergence(MRError):
    pass


class LossKind(str, Enum):
    L2 = "l2"
    HUBER = "huber"
    TUKEY = "tukey"


DEFAULT_K = {LossKind.L2: 1.0, LossKind.HUBER: 1.345, LossKind.TUKEY: 4.685}


@dataclass(frozen=True)
class RobustLoss:
    """A loss applied to standardized residuals.

    ``k`` is the tuning constant; it is ignored for the squared-error loss.
    Huber defaults to k = 1.345 and Tukey's biweight to k = 4.685.
    """

    kind: LossKind = LossKind.L2
    k: float | None = None

    def __post_init__(self):
        kind = LossKind(self.kind.lower() if isinstance(self.kind, str) else self.kind)
        object.__setattr__(self, "kind", kind)
        k = DEFAULT_K[kind] if self.k is None else float(self.k)
        if not (np.isfinite(k) and k > 0):
            raise ValueError(f"tuning constant must be positive, got {self.k}")
        if kind is LossKind.L2:
            k = DEFAULT_K[kind]
        object.__setattr__(self, "k", k)

    @classmethod
    def l2(cls) -> "RobustLoss":
        return cls(LossKind.L2)

    @classmethod
    def huber(cls, k: float = 1.345) -> "RobustLoss":
        return cls(LossKind.HUBER, k)

    @classmethod
    def tukey(cls, k: float = 4.685) -> "RobustLoss":
        return cls(LossKind.TUKEY, k)

    @property
    def knots(self) -> tuple:
        return () if self.kind is LossKind.L2 else (-self.k, self.k)

    def rho(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind is LossKind.L2:
            return 0.5 * r**2
        k = self.k
        inside = np.abs(r) <= k
        if self.kind is LossKind.HUBER:
            return np.where(inside, 0.5 * r**2, k * (np.abs(r) - 0.5 * k))
        u = np.minimum((r / k) ** 2, 1.0)
        return np.where(inside, 1.0 - (1.0 - u) ** 3, 1.0)

    def rho_prime(self, r):
        """First derivative of the loss."""
        r = np.asarray(r, dtype=float)
        if self.kind is LossKind.L2:
            return r.copy()
        k = self.k
        if self.kind is LossKind.HUBER:
            return np.clip(r, -k, k)
        u = (r / k) ** 2
        return np.where(u <= 1.0, 6.0 * r / k**2 * (1.0 - u) ** 2, 0.0)

    def rho_double_prime(self, r):
        """Second derivative of the loss (one-sided value 0 at Huber knots)."""
        r = np.asarray(r, dtype=float)
        if self.kind is LossKind.L2:
            return np.ones_like(r)
        k = self.k
        if self.kind is LossKind.HUBER:
            return np.where(np.abs(r) < k, 1.0, 0.0)
        u = (r / k) ** 2
        return np.where(u <= 1.0, 6.0 / k**2 * (1.0 - u) * (1.0 - 5.0 * u), 0.0)

    def rho_triple_prime(self, r):
        """Third derivative of the loss; zero almost everywhere for Huber."""
        r = np.asarray(r, dtype=float)
        if self.kind is not LossKind.TUKEY:
            return np.zeros_like(r)
        k = self.k
        u = (r / k) ** 2
        return np.where(u <= 1.0, 24.0 * r / k**4 * (5.0 * u - 3.0), 0.0)

    @property
    def curvature_at_zero(self) -> float:
        return float(self.rho_double_prime(0.0))


def loss_eval(loss: RobustLoss, r):
    """Return ``(rho, rho', rho'')`` evaluated at ``r``."""
    return loss.rho(r), loss.rho_prime(r), loss.rho_double_prime(r)


@dataclass(frozen=True)
class LossConstants:
    delta: float
    c1: float
    c2: float
    c3: float

    def as_tuple(self) -> tuple:
        return (self.delta, self.c1, self.c2, self.c3)


_TAIL = 12.0  # P(|R| > 12) ~ 1e-33


def gaussian_expectation(f, breakpoints=(), tol: float = 1e-10, n_start: int = 64, n_max: int = 8192) -> float:
    """E[f(R)] for R ~ N(0, 1) by piecewise Gauss-Legendre quadrature.

    The line is truncated to [-12, 12] and split at ``breakpoints`` so that
    piecewise-smooth integrands are integrated one smooth piece at a time.
    The node count per piece starts at ``n_start`` and doubles until two
    successive estimates agree to ``tol``.
    """
    edges = sorted({-_TAIL, _TAIL, *(b for b in breakpoints if -_TAIL < b < _TAIL)})

    def estimate(n):
        x, w = np.polynomial.legendre.leggauss(n)
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            half, mid = 0.5 * (b - a), 0.5 * (b + a)
            z = mid + half * x
            total += half * float(np.sum(w * f(z) * stats.norm.pdf(z)))
        return total

    n = n_start
    prev = estimate(n)
    while n < n_max:
        n *= 2
        cur = estimate(n)
        if abs(cur - prev) <= tol:
            return cur
        prev = cur
    raise QuadratureNonConvergence(f"no agreement to {tol} with {n} nodes per piece")


def _quadrature_constants(loss: RobustLoss) -> LossConstants:
    knots = loss.knots
    delta = gaussian_expectation(lambda r: r * loss.rho_prime(r), knots)
    c1 = gaussian_expectation(lambda r: loss.rho_prime(r) ** 2, knots)
    second = gaussian_expectation(lambda r: (r * loss.rho_prime(r)) ** 2, knots)
    c3 = gaussian_expectation(lambda r: r**2 * loss.rho_double_prime(r), knots)
    return LossConstants(delta, c1, 0.5 * (second - delta**2), c3)


@lru_cache(maxsize=None)
def loss_constants(loss: RobustLoss) -> LossConstants:
    """Normal-expectation constants of a loss with derivative rho'.

    For R ~ N(0, 1): delta = E[R rho'(R)], c1 = E[rho'(R)^2],
    c2 = Var(R rho'(R)) / 2 and c3 = E[R^2 rho''(R)].

    The squared-error loss returns exactly (1, 1, 1, 1). Results are cached
    per (kind, k); concurrent first calls just recompute the same value.
    """
    if loss.kind is LossKind.L2:
        return LossConstants(1.0, 1.0, 1.0, 1.0)
    constants = _quadrature_constants(loss)
    if not constants.delta > 0:
        raise QuadratureNonConvergence(f"delta = {constants.delta} is not positive")
    return constants
