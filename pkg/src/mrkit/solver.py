"""Root finding for the two-equation (beta, tau^2) estimating systems.

Both the adjusted and the robust adjusted profile scores tend to zero as beta
or tau^2 diverge, so every search here runs on finite brackets:

1. for a fixed beta, tau^2 solves the second equation on ``[0, tau2_max]``
   (``tau2_max`` is chosen so the second score is negative there). When the
   second score is already negative at 0 the solution is clamped to 0;
2. the first equation, with tau^2 profiled out, is scanned over a grid of
   beta values around the initializer and every sign change is refined by
   Brent's method;
3. each root is polished by damped Newton steps on the joint system using the
   analytic Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy import optimize

from .core import NoFiniteRoot, SolverConfig

_TAU_GRID = 40
_BISECT_STEPS = 64


class ScoreSystem(Protocol):
    def terms(self, beta, tau2) -> tuple[np.ndarray, np.ndarray]: ...

    def jacobian(self, beta: float, tau2: float) -> np.ndarray: ...

    def tau2_upper(self, beta) -> np.ndarray: ...


@dataclass(frozen=True)
class Root:
    beta: float
    tau2: float
    score_norm: float
    clamped: bool
    iterations: int


def relative_norm(system: ScoreSystem, beta: float, tau2: float, clamped: bool = False) -> float:
    """Largest score component relative to the sum of its absolute terms."""
    t1, t2 = system.terms(beta, tau2)
    norms = []
    for t in (t1, t2) if not clamped else (t1,):
        scale = float(np.sum(np.abs(t)))
        total = abs(float(np.sum(t)))
        norms.append(total / scale if scale > 0 else total)
    return max(norms)


def _second_sum(tau2: float, system: ScoreSystem, beta: float) -> float:
    return float(np.sum(system.terms(beta, tau2)[1]))


def profile_tau2(system: ScoreSystem, betas, exact: bool = True) -> np.ndarray:
    """tau^2 solving the second equation for each beta (0 when clamped).

    With ``exact=False`` the vectorized bisection stops at a relative width
    of about 1e-9, which is enough for locating sign changes on a scan grid.
    """
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    upper = system.tau2_upper(betas)
    frac = np.concatenate([[0.0], np.geomspace(1e-12, 1.0, _TAU_GRID)])
    grid = upper[:, None] * frac[None, :]
    psi2 = np.sum(system.terms(betas[:, None], grid)[1], axis=-1)

    # largest downward crossing: scan back from the (negative) upper end
    pos = psi2 > 0
    crossing = pos[:, :-1] & ~pos[:, 1:]
    has = crossing.any(axis=1)
    last = crossing.shape[1] - 1 - np.argmax(crossing[:, ::-1], axis=1)
    rows = np.arange(betas.size)
    lo = np.where(has, grid[rows, last], 0.0)
    hi = np.where(has, grid[rows, np.minimum(last + 1, grid.shape[1] - 1)], 0.0)
    if not has.any():
        return np.zeros_like(betas)

    if exact and betas.size == 1:
        if lo[0] == hi[0]:
            return lo
        root = optimize.brentq(
            _second_sum, lo[0], hi[0], args=(system, float(betas[0])), xtol=1e-300, rtol=4 * np.finfo(float).eps
        )
        return np.array([root])

    steps = _BISECT_STEPS if exact else 32
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        up = np.sum(system.terms(betas, mid)[1], axis=-1) > 0
        lo = np.where(has & up, mid, lo)
        hi = np.where(has & ~up, mid, hi)
        if np.all(hi - lo <= 1e-15 * np.maximum(hi, 1e-300)):
            break
    return np.where(has, 0.5 * (lo + hi), 0.0)


def _profiled_first(beta: float, system: ScoreSystem) -> float:
    tau2 = float(profile_tau2(system, beta)[0])
    return float(np.sum(system.terms(beta, tau2)[0]))


def _newton_polish(system: ScoreSystem, beta: float, tau2: float, clamped: bool, config: SolverConfig):
    norm = relative_norm(system, beta, tau2, clamped)
    steps = 0
    while norm > config.score_tol and steps < 20:
        steps += 1
        t1, t2 = system.terms(beta, tau2)
        jac = system.jacobian(beta, tau2)
        if clamped:
            if jac[0, 0] == 0:
                break
            delta = np.array([-np.sum(t1) / jac[0, 0], 0.0])
        else:
            try:
                delta = -np.linalg.solve(jac, [np.sum(t1), np.sum(t2)])
            except np.linalg.LinAlgError:
                break
        improved = False
        for damp in (1.0, 0.5, 0.25, 0.125):
            nb, nt = beta + damp * delta[0], max(tau2 + damp * delta[1], 0.0)
            n_new = relative_norm(system, nb, nt, clamped)
            if n_new < norm:
                beta, tau2, norm, improved = nb, nt, n_new, True
                break
        if not improved:
            break
    return beta, tau2, norm, steps


def find_roots(
    system: ScoreSystem,
    beta_init: float,
    half_width: float,
    config: SolverConfig = SolverConfig(),
    max_expansions: int = 4,
) -> list[Root]:
    """All roots of the system found by scanning beta around ``beta_init``.

    The scan uses ``2 * config.n_starts + 1`` equally spaced points on
    ``beta_init +/- half_width``; the window grows fourfold (up to
    ``max_expansions`` times) when it contains no sign change.

    Raises
    ------
    NoFiniteRoot
        If no sign change is found even after widening the window.
    """
    n_points = 2 * max(config.n_starts, 1) + 1
    width = half_width
    for _ in range(max_expansions + 1):
        grid = beta_init + width * np.linspace(-1.0, 1.0, n_points)
        tau = profile_tau2(system, grid, exact=False)
        g = np.sum(system.terms(grid, tau)[0], axis=-1)
        brackets = [(grid[i], grid[i + 1]) for i in np.flatnonzero(g[:-1] * g[1:] < 0)]
        brackets += [(b, b) for b in grid[g == 0]]
        if brackets:
            break
        width *= 4.0
    else:
        raise NoFiniteRoot("first estimating equation has no sign change near the initializer")

    roots = []
    for a, b in brackets:
        calls = [0]

        def first(beta):
            calls[0] += 1
            return _profiled_first(beta, system)

        # the scan used inexact tau^2; recheck signs before bracketing
        fa, fb = first(a), first(b)
        if fa * fb < 0:
            beta = optimize.brentq(first, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=config.max_iter)
        else:
            beta = a if abs(fa) <= abs(fb) else b
        tau2 = float(profile_tau2(system, beta)[0])
        clamped = tau2 == 0.0
        beta, tau2, norm, steps = _newton_polish(system, float(beta), tau2, clamped, config)
        if any(abs(beta - r.beta) <= 1e-9 * (1.0 + abs(beta)) for r in roots):
            continue
        roots.append(Root(float(beta), float(tau2), norm, clamped, calls[0] + steps))
    return roots
