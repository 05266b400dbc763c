"""Synthetic summary-data studies: generators for six pleiotropy setups, the
bias / RMSE / CI-length / coverage evaluator and a Monte Carlo driver.

Random streams are counter based: every replicate draws from independent
Philox streams keyed by ``(seed, replicate, component)``, so results do not
depend on the order or the process in which replicates run, and adding a
method never changes the simulated data.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .aps import fit_aps
from .baselines import fit_egger, fit_ivw, fit_weighted_median
from .core import Method, MRError, SolverConfig, SummaryData
from .losses import RobustLoss
from .profile import fit_ps
from .raps import fit_raps

# stream components
_PROFILE, _GAMMA_NOISE, _ALPHA, _GAMMA_CAP_NOISE, _BOOTSTRAP = range(5)

# median exposure standard error; outcome/exposure se ratio
SE_X_BASE = 0.01
SE_RATIO = 3.0


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def make_variance_profile(p: int, target_kappa: float, seed: int):
    """Synthetic ``(sigma_x, sigma_y, gamma)`` with average strength exactly ``target_kappa``.

    Exposure standard errors are lognormal around ``SE_X_BASE``; outcome
    standard errors are a lognormally jittered multiple ``SE_RATIO`` of them.
    Instrument z-scores are exponential with random signs, rescaled so that
    ``mean(gamma^2 / sigma_x^2) == target_kappa``.
    """
    if not target_kappa > 0:
        raise ValueError("target_kappa must be positive")
    rng = stream(seed, _PROFILE)
    sigma_x = SE_X_BASE * np.exp(0.25 * rng.standard_normal(p))
    sigma_y = SE_RATIO * sigma_x * np.exp(0.05 * rng.standard_normal(p))
    z = rng.exponential(1.0, p) * rng.choice([-1.0, 1.0], p)
    z *= np.sqrt(target_kappa / np.mean(z**2))
    return sigma_x, sigma_y, z * sigma_x


@dataclass(frozen=True)
class SimSetup:
    setup_id: int
    gamma: np.ndarray
    sigma_x: np.ndarray
    sigma_y: np.ndarray
    beta0: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if self.setup_id not in range(1, 7):
            raise ValueError(f"setup_id must be 1..6, got {self.setup_id}")
        for name in ("gamma", "sigma_x", "sigma_y"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.gamma.shape == self.sigma_x.shape == self.sigma_y.shape):
            raise ValueError("gamma, sigma_x and sigma_y must have equal length")

    @classmethod
    def calibrated(cls, setup_id: int, p: int, kappa: float, seed: int = 0, beta0: float = 0.4) -> "SimSetup":
        """Setup on a synthetic profile, sorted by decreasing instrument strength
        so that index 0 is the strongest instrument."""
        sx, sy, gamma = make_variance_profile(p, kappa, seed)
        order = np.argsort(-np.abs(gamma) / sx, kind="stable")
        return cls(setup_id, gamma[order], sx[order], sy[order], beta0, seed)

    @property
    def p(self) -> int:
        return self.gamma.size

    @property
    def tau0(self) -> float:
        """Scale of the direct effects, twice the mean outcome standard error."""
        return 2.0 * float(np.mean(self.sigma_y))

    @property
    def kappa(self) -> float:
        return float(np.mean(self.gamma**2 / self.sigma_x**2))


@dataclass(frozen=True)
class SimTruth:
    alpha: np.ndarray
    Gamma: np.ndarray
    tau0: float


def direct_effects(setup: SimSetup, rng: np.random.Generator) -> np.ndarray:
    p, tau0 = setup.p, setup.tau0
    sid = setup.setup_id
    if sid == 1:
        return np.zeros(p)
    if sid == 4:
        return tau0 * rng.laplace(0.0, 1.0, p)
    if sid == 5:
        weight = np.abs(setup.gamma) / np.mean(np.abs(setup.gamma))
        return weight * tau0 * rng.standard_normal(p)
    alpha = tau0 * rng.standard_normal(p)
    if sid == 3:
        alpha[0] += 5.0 * tau0
    elif sid == 6:
        n_out = max(1, int(round(0.1 * p)))
        alpha[rng.choice(p, n_out, replace=False)] += 5.0 * tau0
    return alpha


def generate(setup: SimSetup, replicate_index: int) -> tuple[SummaryData, SimTruth]:
    """One simulated data set; bitwise reproducible from ``(setup.seed, replicate_index)``."""
    key = (1, int(replicate_index))
    alpha = direct_effects(setup, stream(setup.seed, *key, _ALPHA))
    Gamma = setup.beta0 * setup.gamma + alpha
    gamma_hat = setup.gamma + setup.sigma_x * stream(setup.seed, *key, _GAMMA_NOISE).standard_normal(setup.p)
    gamma_cap_hat = Gamma + setup.sigma_y * stream(setup.seed, *key, _GAMMA_CAP_NOISE).standard_normal(setup.p)
    ids = [f"snp{j + 1}" for j in range(setup.p)]
    data = SummaryData(ids, gamma_hat, setup.sigma_x, gamma_cap_hat, setup.sigma_y)
    truth = SimTruth(alpha, Gamma, 0.0 if setup.setup_id == 1 else setup.tau0)
    return data, truth


@dataclass(frozen=True)
class MetricRow:
    method: str
    bias_pct: float
    rmse_pct: float
    ci_len_pct: float
    coverage_pct: float
    n_ok: int = 0
    n_failed: int = 0

    @property
    def failure_rate(self) -> float:
        total = self.n_ok + self.n_failed
        return self.n_failed / total if total else 0.0


def summarize(method: str, estimates, ses, beta0: float, level: float = 0.95) -> MetricRow:
    """Table metrics, all in % of ``beta0``.

    Bias uses the mean of the estimates; RMSE is the root of the *median*
    squared error. NaN entries mark failed fits and are excluded.
    """
    est = np.asarray(estimates, dtype=float)
    se = np.asarray(ses, dtype=float)
    ok = np.isfinite(est) & np.isfinite(se)
    n_failed = int(np.sum(~ok))
    est, se = est[ok], se[ok]
    if est.size == 0:
        nan = float("nan")
        return MetricRow(method, nan, nan, nan, nan, 0, n_failed)
    z = stats.norm.ppf(0.5 + level / 2.0)
    err = est - beta0
    return MetricRow(
        method,
        100.0 * float(np.mean(err)) / beta0,
        100.0 * float(np.sqrt(np.median(err**2))) / beta0,
        100.0 * float(np.median(2.0 * z * se)) / beta0,
        100.0 * float(np.mean(np.abs(err) <= z * se)),
        int(est.size),
        n_failed,
    )


@dataclass(frozen=True)
class StudyConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    loss: RobustLoss = field(default_factory=RobustLoss.tukey)
    level: float = 0.95


def fit_method(method: Method, data: SummaryData, study: StudyConfig, seed: int):
    if method is Method.PS:
        return fit_ps(data, study.solver)
    if method is Method.APS:
        return fit_aps(data, study.solver)
    if method is Method.RAPS:
        return fit_raps(data, study.loss, study.solver)
    if method is Method.IVW:
        return fit_ivw(data)
    if method is Method.EGGER:
        return fit_egger(data)
    return fit_weighted_median(data, study.solver, seed=seed)


def run_replicate(setup: SimSetup, index: int, methods: Sequence[Method], study: StudyConfig) -> np.ndarray:
    """``(len(methods), 2)`` array of (estimate, se); NaN rows for failed fits."""
    data, _ = generate(setup, index)
    boot_seed = int(stream(setup.seed, 1, index, _BOOTSTRAP).integers(2**63))
    out = np.full((len(methods), 2), np.nan)
    for i, m in enumerate(methods):
        try:
            fit = fit_method(m, data, study, boot_seed)
        except (MRError, np.linalg.LinAlgError, ValueError):
            continue
        out[i] = fit.beta_hat, fit.beta_se
    return out


def _run_chunk(args):
    setup, indices, methods, study = args
    return [run_replicate(setup, i, methods, study) for i in indices]


def simulate_estimates(
    setup: SimSetup,
    methods: Sequence[Method | str],
    n_reps: int,
    study: StudyConfig = StudyConfig(),
    threads: int = 1,
) -> np.ndarray:
    """Raw ``(n_reps, len(methods), 2)`` estimates and standard errors, index ordered."""
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1")
    methods = [Method.parse(m) if isinstance(m, str) else m for m in methods]
    threads = max(1, min(int(threads), n_reps))
    if threads == 1:
        return np.array([run_replicate(setup, i, methods, study) for i in range(n_reps)])
    chunks = np.array_split(np.arange(n_reps), threads * 4)
    jobs = [(setup, c.tolist(), methods, study) for c in chunks if c.size]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(_run_chunk, jobs))
    return np.array([r for part in parts for r in part])


def run_study(
    setup: SimSetup,
    methods: Sequence[Method | str],
    n_reps: int,
    study: StudyConfig = StudyConfig(),
    threads: int = 1,
) -> list[MetricRow]:
    methods = [Method.parse(m) if isinstance(m, str) else m for m in methods]
    raw = simulate_estimates(setup, methods, n_reps, study, threads)
    return [
        summarize(m.value, raw[:, i, 0], raw[:, i, 1], setup.beta0, study.level) for i, m in enumerate(methods)
    ]


def default_threads() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
