"""Choosing the bundling fraction: the outer stage on top of the pricing game.

Numeric optimization runs the inner Nash equilibrium on an alpha grid and
refines the best bracket. The unlimited-W limit uses closed forms instead,
since that regime is badly conditioned numerically.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from ._scalar import bisect_increasing, golden_max
from .closed_form import b_threshold_cubic
from .market import INFINITE, InvalidConfig, MarketConfig, Mode, is_infinite, symmetric_market
from .nash import EquilibriumResult, find_equilibrium
from .wardrop import WardropConvergenceError

log = logging.getLogger(__name__)

GRID_POINTS = 201
ALPHA_MAX = 1.0 - 1e-9
ALPHA_TOL = 1e-6
OBJECTIVES = ("profit", "welfare")


@dataclass(frozen=True)
class AlphaResult:
    alpha_star: float
    value: float
    curve: Tuple[Tuple[float, float], ...] = field(default=(), repr=False)
    failures: Tuple[Tuple[float, str], ...] = ()
    details: Dict[str, float] = field(default_factory=dict)


class EquilibriumCache:
    """Inner equilibria keyed by alpha, shared between objectives on one market."""

    def __init__(self, template: MarketConfig, solver: Callable[[MarketConfig], EquilibriumResult] = None):
        self.template = template
        self.solver = solver or find_equilibrium
        self._store: Dict[float, object] = {}

    def __call__(self, alpha: float) -> EquilibriumResult:
        alpha = float(alpha)
        if alpha not in self._store:
            try:
                self._store[alpha] = self.solver(self.template.with_alpha(alpha))
            except (WardropConvergenceError, InvalidConfig, FloatingPointError) as exc:
                self._store[alpha] = exc
        hit = self._store[alpha]
        if isinstance(hit, Exception):
            raise hit
        return hit

    def __len__(self) -> int:
        return len(self._store)


class _Failed(Exception):
    pass


def _objective_value(result: EquilibriumResult, objective: str) -> float:
    if not result.converged:
        raise _Failed(f"equilibrium not certified (eps={result.eps_ne:.2e}, rounds={result.iterations})")
    if objective == "profit":
        # per-provider profit of the first incumbent; symmetric incumbents all earn this
        return result.profits[0]
    return result.welfare.social_welfare


def optimize_alpha(
    template: MarketConfig,
    objective: str = "profit",
    cache: Optional[EquilibriumCache] = None,
    grid_points: int = GRID_POINTS,
    tol: float = ALPHA_TOL,
) -> AlphaResult:
    """Maximize ``objective`` of the inner pricing equilibrium over a common alpha.

    A uniform grid over ``[0, 1 - 1e-9]`` locates the best point; golden-section
    search then refines within its neighbouring grid cells. Ties go to the
    smallest alpha. Alphas whose inner equilibrium fails are recorded in
    ``failures`` and skipped.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}, got {objective!r}")
    if template.mode is not Mode.BUNDLED:
        raise InvalidConfig("alpha only matters in bundled markets")
    if is_infinite(template.W):
        raise InvalidConfig("numeric alpha optimization needs finite W; use the closed forms for unlimited W")
    if not template.incumbents:
        raise InvalidConfig("alpha optimization needs an incumbent")
    cache = cache if cache is not None else EquilibriumCache(template)
    failures = []

    def value(a: float) -> float:
        try:
            return _objective_value(cache(a), objective)
        except (_Failed, WardropConvergenceError, InvalidConfig, FloatingPointError) as exc:
            failures.append((float(a), str(exc)))
            log.warning("alpha=%.6g excluded: %s", a, exc)
            return -math.inf

    grid = np.linspace(0.0, ALPHA_MAX, grid_points)
    values = np.array([value(a) for a in grid])
    if not np.isfinite(values).any():
        raise InvalidConfig("inner equilibrium failed at every alpha on the grid")
    k = int(np.argmax(values))  # first maximum, i.e. lowest alpha on ties
    best_a, best_v = float(grid[k]), float(values[k])

    lo = float(grid[max(k - 1, 0)])
    hi = float(grid[min(k + 1, len(grid) - 1)])
    a_ref, v_ref = golden_max(value, lo, hi, tol)
    if v_ref > best_v:
        best_a, best_v = a_ref, v_ref

    curve = tuple((float(a), float(v)) for a, v in zip(grid, values))
    return AlphaResult(best_a, best_v, curve, tuple(failures))


def compute_B_threshold(M) -> float:
    """Licensed bandwidth above which profit-seeking incumbents stop bundling (W unlimited).

    Root ``k*`` of ``-2k^3 - 3 t k^2 + t^2`` on ``[t/2, 1/2]`` with
    ``t = (M-1)/M``; the threshold is ``1/k*``. Unlimited ``M`` gives 2.
    """
    k = _k_star(M)
    return 1.0 / k


def _t(M) -> float:
    if is_infinite(M):
        return 1.0
    if int(M) != M or M < 2:
        raise InvalidConfig(f"M must be an integer >= 2 or INFINITE, got {M}")
    return (M - 1) / M


def _k_star(M) -> float:
    if is_infinite(M):
        return 0.5
    t = _t(M)
    # the cubic is decreasing on the bracket, so bisect its negation
    return bisect_increasing(lambda k: -b_threshold_cubic(k, t), t / 2.0, 0.5, tol=1e-12)


def profit_optimal_alpha_Winf(M, B_t: float) -> AlphaResult:
    """Closed-form profit-maximizing common alpha for ``M`` symmetric incumbents, W unlimited.

    ``details`` holds the companion per-provider price ``p``, mass ``x``, total
    mass ``Q`` and social welfare ``SW``. For unlimited ``M`` the per-provider
    mass vanishes, so ``x`` is omitted and ``Q`` is the limit total.
    """
    if not B_t > 0:
        raise InvalidConfig(f"B_t must be positive, got {B_t}")
    k = _k_star(M)
    t = _t(M)
    B_th = 1.0 / k
    if B_t <= B_th:
        alpha = 1.0 - math.sqrt(B_t / B_th)
        p = k / (2.0 * k + t)
        Q = (1.0 - p) / (k + 1.0)  # M x_i with x_i = (1-p)/(M k + M)
    else:
        alpha = 0.0
        p = 1.0 / (2.0 + B_t * t)
        Q = (1.0 - p) / (1.0 / B_t + 1.0)  # M x_i with x_i = (1-p)/(M/B_t + M)
    SW = 0.5 * Q * Q + p * Q
    details = {"p": p, "Q": Q, "SW": SW, "B_th": B_th, "k_star": k}
    if is_infinite(M):
        return AlphaResult(alpha, 0.0, details=details)
    x = Q / M
    details["x"] = x
    return AlphaResult(alpha, p * x, details=details)


def one_v_one_alpha_star_Winf(B: float) -> float:
    """Profit-maximizing alpha for one incumbent facing one entrant, W unlimited."""
    if not B > 0:
        raise InvalidConfig(f"B must be positive, got {B}")
    return 1.0 - math.sqrt(3.0 * B) / 2.0 if B <= 4.0 / 3.0 else 0.0


def welfare_gap(M, B_t: float, W, return_parts: bool = False):
    """Social welfare lost when incumbents pick alpha for profit instead of welfare.

    Symmetric incumbents, no entrant. Unlimited ``M`` and ``W`` use the limit
    ``1 / (2 + max(2, B_t))``; unlimited ``W`` with finite ``M`` uses the
    closed-form profit optimum against the welfare optimum 1/2 (zero price,
    no congestion at alpha -> 1); finite ``W`` runs :func:`optimize_alpha`
    twice over one shared equilibrium cache.
    """
    if is_infinite(W):
        if is_infinite(M):
            gap = 1.0 / (2.0 + max(2.0, B_t))
            alpha_profit = profit_optimal_alpha_Winf(INFINITE, B_t).alpha_star
            parts = {"SW_welfare": 0.5, "SW_profit": 0.5 - gap, "alpha_profit": alpha_profit}
        else:
            res = profit_optimal_alpha_Winf(M, B_t)
            parts = {"SW_welfare": 0.5, "SW_profit": res.details["SW"], "alpha_profit": res.alpha_star}
            gap = 0.5 - res.details["SW"]
        return (gap, parts) if return_parts else gap
    if is_infinite(M):
        raise InvalidConfig("unlimited M needs unlimited W; numeric gaps need a finite market")
    template = symmetric_market(int(M), B_t, W, 0.0)
    cache = EquilibriumCache(template)
    prof = optimize_alpha(template, "profit", cache)
    welf = optimize_alpha(template, "welfare", cache)
    sw_profit = cache(prof.alpha_star).welfare.social_welfare
    gap = welf.value - sw_profit
    parts = {
        "SW_welfare": welf.value,
        "SW_profit": sw_profit,
        "alpha_welfare": welf.alpha_star,
        "alpha_profit": prof.alpha_star,
    }
    return (gap, parts) if return_parts else gap


def locate_alpha0(template: MarketConfig, baseline_profit: float, tol: float = 1e-9) -> Optional[float]:
    """Alpha at which the first incumbent's bundled profit falls to ``baseline_profit``.

    Bisection on the profit difference; returns ``None`` when bundling never
    beats the baseline at small alpha or never drops below it.
    """
    cache = EquilibriumCache(template)

    def diff(a):
        return baseline_profit - cache(a).profits[0]

    if diff(0.0) >= 0.0 or diff(ALPHA_MAX) <= 0.0:
        return None
    return bisect_increasing(diff, 0.0, ALPHA_MAX, tol=tol)


__all__ = [
    "INFINITE",
    "AlphaResult",
    "EquilibriumCache",
    "compute_B_threshold",
    "locate_alpha0",
    "one_v_one_alpha_star_Winf",
    "optimize_alpha",
    "profit_optimal_alpha_Winf",
    "welfare_gap",
]
