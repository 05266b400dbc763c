"""Summary-data containers, validation and shared result types."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import stats


class MRError(Exception):
    """Base class for all errors raised by mrkit."""


class ValidationError(MRError, ValueError):
    pass


class LengthMismatch(ValidationError):
    pass


class NonPositiveStdErr(ValidationError):
    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"standard error at index {index} is not positive and finite")


class NonFiniteValue(ValidationError):
    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"non-finite effect estimate at index {index}")


class DuplicateSnpId(ValidationError):
    pass


class TooFewSnps(ValidationError):
    pass


class NoFiniteRoot(MRError):
    pass


class NonConvergence(MRError):
    pass


class DegenerateVariance(MRError):
    pass


class MultipleRootsAmbiguous(MRError):
    def __init__(self, roots, message: str | None = None):
        self.roots = tuple(roots)
        super().__init__(message or f"estimating equations have distant roots: {self.roots}")


def _as_vector(values) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SummaryData:
    """Per-SNP GWAS summary statistics for one exposure/outcome pair.

    Standard errors are stored (not variances); estimators square them on use.
    Arrays are coerced to read-only float vectors. Construction does not check
    the invariants, call :func:`validate` (or use :meth:`create`) for that.
    """

    snp_ids: tuple
    gamma_hat: np.ndarray
    sigma_x: np.ndarray
    gamma_cap_hat: np.ndarray
    sigma_y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "snp_ids", tuple(str(s) for s in self.snp_ids))
        for name in ("gamma_hat", "sigma_x", "gamma_cap_hat", "sigma_y"):
            object.__setattr__(self, name, _as_vector(getattr(self, name)))

    @classmethod
    def create(cls, gamma_hat, sigma_x, gamma_cap_hat, sigma_y, snp_ids=None) -> "SummaryData":
        if snp_ids is None:
            snp_ids = [f"snp{j + 1}" for j in range(len(np.atleast_1d(gamma_hat)))]
        return validate(cls(snp_ids, gamma_hat, sigma_x, gamma_cap_hat, sigma_y))

    @property
    def p(self) -> int:
        return len(self.gamma_hat)

    @property
    def sigma_x2(self) -> np.ndarray:
        return self.sigma_x**2

    @property
    def sigma_y2(self) -> np.ndarray:
        return self.sigma_y**2

    def subset(self, index) -> "SummaryData":
        index = np.asarray(index)
        ids = np.asarray(self.snp_ids, dtype=object)[index]
        return SummaryData(
            tuple(ids),
            self.gamma_hat[index],
            self.sigma_x[index],
            self.gamma_cap_hat[index],
            self.sigma_y[index],
        )

    def drop(self, j: int) -> "SummaryData":
        keep = np.ones(self.p, dtype=bool)
        keep[j] = False
        return self.subset(keep)

    def __eq__(self, other):
        if not isinstance(other, SummaryData):
            return NotImplemented
        return self.snp_ids == other.snp_ids and all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("gamma_hat", "sigma_x", "gamma_cap_hat", "sigma_y")
        )

    __hash__ = None


def validate(data: SummaryData) -> SummaryData:
    """Check the invariants of ``data`` and return it unchanged.

    Raises
    ------
    LengthMismatch
        If the five columns differ in length or are empty.
    NonPositiveStdErr
        If a standard error is zero, negative or non-finite.
    NonFiniteValue
        If an effect estimate is NaN or infinite.
    DuplicateSnpId
        If two rows share a SNP identifier.
    """
    lengths = {
        "snp_ids": len(data.snp_ids),
        "gamma_hat": len(data.gamma_hat),
        "sigma_x": len(data.sigma_x),
        "gamma_cap_hat": len(data.gamma_cap_hat),
        "sigma_y": len(data.sigma_y),
    }
    if len(set(lengths.values())) != 1:
        raise LengthMismatch(f"column lengths differ: {lengths}")
    if lengths["gamma_hat"] < 1:
        raise LengthMismatch("summary data must contain at least one SNP")

    for effect in (data.gamma_hat, data.gamma_cap_hat):
        bad = np.flatnonzero(~np.isfinite(effect))
        if bad.size:
            raise NonFiniteValue(int(bad[0]))
    for se in (data.sigma_x, data.sigma_y):
        bad = np.flatnonzero(~(np.isfinite(se) & (se > 0)))
        if bad.size:
            raise NonPositiveStdErr(int(bad[0]))

    if len(set(data.snp_ids)) != len(data.snp_ids):
        seen, dup = set(), None
        for s in data.snp_ids:
            if s in seen:
                dup = s
                break
            seen.add(s)
        raise DuplicateSnpId(f"duplicate snp_id {dup!r}")
    return data


def flip_alleles(data: SummaryData, flips: Sequence[bool]) -> SummaryData:
    """Recode the effect allele of the SNPs selected by ``flips``.

    Both the exposure and the outcome effect change sign; standard errors are
    untouched.
    """
    mask = np.asarray(flips, dtype=bool).reshape(-1)
    if mask.shape[0] != len(data.gamma_hat):
        raise LengthMismatch(f"flip mask has length {mask.shape[0]}, expected {len(data.gamma_hat)}")
    sign = np.where(mask, -1.0, 1.0)
    return replace(data, gamma_hat=data.gamma_hat * sign, gamma_cap_hat=data.gamma_cap_hat * sign)


def require_snps(data: SummaryData, minimum: int, method: str) -> None:
    if data.p < minimum:
        raise TooFewSnps(f"{method} needs at least {minimum} SNPs, got {data.p}")


class Method(str, Enum):
    PS = "PS"
    APS = "APS"
    RAPS = "RAPS"
    IVW = "IVW"
    EGGER = "Egger"
    WMEDIAN = "WeightedMedian"

    @classmethod
    def parse(cls, name: str) -> "Method":
        key = name.strip().lower().replace("-", "").replace("_", "")
        aliases = {
            "ps": cls.PS,
            "aps": cls.APS,
            "raps": cls.RAPS,
            "ivw": cls.IVW,
            "egger": cls.EGGER,
            "mregger": cls.EGGER,
            "wmedian": cls.WMEDIAN,
            "weightedmedian": cls.WMEDIAN,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown method {name!r}") from None


@dataclass(frozen=True)
class SolverConfig:
    """Numerical settings shared by every estimator.

    ``score_tol`` is relative: a score component counts as zero when its
    magnitude is below ``score_tol`` times the sum of the absolute per-SNP
    contributions.
    """

    max_iter: int = 200
    score_tol: float = 1e-10
    n_grid: int = 512
    n_starts: int = 8
    n_bootstrap: int = 1000
    seed: int = 0


@dataclass(frozen=True)
class SolverReport:
    converged: bool = True
    iterations: int = 0
    final_score_norm: float = 0.0
    n_roots_found: int = 1
    warnings: tuple = ()
    roots: tuple = ()


@dataclass(frozen=True)
class FitResult:
    method: Method
    beta_hat: float
    beta_se: float
    n_snps: int
    solver: SolverReport = field(default_factory=SolverReport)
    tau2_hat: Optional[float] = None
    tau2_se: Optional[float] = None
    intercept: Optional[float] = None
    intercept_se: Optional[float] = None
    loss: Optional[object] = None
    convention: str = ""

    def ci(self, level: float = 0.95) -> tuple[float, float]:
        """Wald interval ``beta_hat +/- z * beta_se``."""
        if not 0.0 < level < 1.0:
            raise ValueError("ci level must lie in (0, 1)")
        z = stats.norm.ppf(0.5 + level / 2.0)
        return (self.beta_hat - z * self.beta_se, self.beta_hat + z * self.beta_se)

    @property
    def warnings(self) -> tuple:
        return self.solver.warnings
