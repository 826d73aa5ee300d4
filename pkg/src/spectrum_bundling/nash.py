"""Provider-side equilibrium: price competition by iterated best response."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ._scalar import golden_max
from .market import (
    InvalidConfig,
    MarketConfig,
    Mode,
    PriceProfile,
    WelfareReport,
    is_infinite,
    welfare_report,
)
from .wardrop import WardropSolution, mass_response, provider_masses, solve_wardrop

log = logging.getLogger(__name__)

TOL_NE = 1e-7
PRICE_TOL = 1e-10
ROUND_TOL = 1e-8
MAX_ROUNDS = 500

# a price slot is (provider id, band): band "p" for the single/licensed price, "u" for unlicensed
Slot = Tuple[int, str]


@dataclass(frozen=True)
class EquilibriumResult:
    prices: PriceProfile
    solution: WardropSolution
    welfare: WelfareReport
    eps_ne: float
    iterations: int
    converged: bool
    history: Tuple[Tuple[float, ...], ...] = field(default=(), repr=False)
    pinned_unlicensed: bool = False
    other_equilibrium: Optional[bool] = None  # set when a second run from high prices was requested

    @property
    def profits(self) -> Tuple[float, ...]:
        return self.welfare.profits


def price_slots(config: MarketConfig, i: int) -> List[Slot]:
    if config.mode is Mode.UNBUNDLED:
        return [(i, "p"), (i, "u")] if config.providers[i].is_incumbent else [(i, "u")]
    return [(i, "p")]


def _get(prices: PriceProfile, slot: Slot) -> float:
    i, band = slot
    return prices.unlicensed[i] if band == "u" else prices.prices[i]


def _set(prices: PriceProfile, updates: Dict[Slot, float]) -> PriceProfile:
    p = list(prices.prices)
    u = list(prices.unlicensed) if prices.unlicensed is not None else None
    for (i, band), v in updates.items():
        if band == "u":
            u[i] = v
        else:
            p[i] = v
    return PriceProfile(tuple(p), None if u is None else tuple(u))


def provider_profit(config: MarketConfig, prices: PriceProfile, i: int) -> float:
    main, unl = provider_masses(config, prices, i)
    v = prices.prices[i] * main
    if prices.unlicensed is not None:
        v += prices.unlicensed[i] * unl
    return v


def _check_finite(config: MarketConfig) -> None:
    unused = config.mode is Mode.BUNDLED and config.alpha == 0.0 and not config.entrants
    if is_infinite(config.W) and not unused:
        raise InvalidConfig("pricing game needs finite W; use the closed forms for the W -> infinity limit")


def _best_slot(config, prices, slot, tol):
    """Best price on one slot, others fixed. Flat regions resolve to the smallest price."""
    top = config.demand.A
    i, band = slot
    response = mass_response(config, prices, i, band)
    if prices.unlicensed is not None:
        fixed_price = prices.prices[i] if band == "u" else prices.unlicensed[i]
    else:
        fixed_price = 0.0

    def profit(v):
        main, unl = response(v)
        if band == "u":
            return v * unl + fixed_price * main
        return v * main + fixed_price * unl

    x, fx = golden_max(profit, 0.0, top, tol)
    f0 = profit(0.0)
    if f0 >= fx - 1e-14:
        return 0.0, f0
    ftop = profit(top)
    if ftop > fx:
        return top, ftop
    return x, fx


def best_response(
    config: MarketConfig,
    i: int,
    prices: PriceProfile,
    slots: Optional[List[Slot]] = None,
    tol: float = PRICE_TOL,
):
    """Profit-maximizing price(s) of provider ``i`` against the other entries of ``prices``.

    Returns ``(price, profit)``; ``price`` is a tuple ``(licensed, unlicensed)``
    for unbundled incumbents. Own-price concavity makes golden-section search
    sufficient; two-price providers are handled by cyclic coordinate ascent.
    """
    _check_finite(config)
    slots = slots or price_slots(config, i)
    if len(slots) == 1:
        v, f = _best_slot(config, prices, slots[0], tol)
        return v, f
    current = prices
    best = None
    for _ in range(50):
        change = 0.0
        for slot in slots:
            v, best = _best_slot(config, current, slot, tol)
            change = max(change, abs(v - _get(current, slot)))
            current = _set(current, {slot: v})
        if change < tol * 10:
            break
    return tuple(_get(current, s) for s in slots), best


def _provider_classes(config: MarketConfig) -> List[List[int]]:
    groups: Dict[tuple, List[int]] = {}
    for p in config.providers:
        groups.setdefault((p.role, p.bandwidth), []).append(p.id)
    return list(groups.values())


def _price_classes(config: MarketConfig, prices: PriceProfile) -> List[List[int]]:
    groups: Dict[tuple, List[int]] = {}
    for p in config.providers:
        key = (p.role, p.bandwidth) + tuple(_get(prices, s) for s in price_slots(config, p.id))
        groups.setdefault(key, []).append(p.id)
    return list(groups.values())


def verify_equilibrium(config: MarketConfig, prices: PriceProfile, tol: float = PRICE_TOL) -> float:
    """Largest profit gain any provider can get by a unilateral price change.

    Identical providers charging identical prices are checked once.
    """
    _check_finite(config)
    base = welfare_report(config, prices, solve_wardrop(config, prices).alloc).profits
    eps = -np.inf
    for members in _price_classes(config, prices):
        i = members[0]
        _, best = best_response(config, i, prices, tol=tol)
        eps = max(eps, best - base[i])
    return float(max(eps, 0.0) if eps > -1e-12 else eps)


def _tatonnement(config, start, slots_of, max_rounds, tol):
    prices = start
    history = [prices.as_vector()]
    classes = _provider_classes(config)
    converged = False
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        change = 0.0
        for members in classes:
            rep = members[0]
            slots = slots_of(rep)
            if not slots:
                continue
            br, _ = best_response(config, rep, prices, slots=slots)
            values = br if isinstance(br, tuple) else (br,)
            updates = {}
            for j in members:
                for (_, band), v in zip(slots, values):
                    updates[(j, band)] = v
                    change = max(change, abs(v - _get(prices, (j, band))))
            prices = _set(prices, updates)
        history.append(prices.as_vector())
        if change < tol:
            converged = True
            break
    return prices, rounds, converged, history


def find_equilibrium(
    config: MarketConfig,
    start: Optional[PriceProfile] = None,
    max_rounds: Optional[int] = None,
    tol: float = ROUND_TOL,
    pin_unlicensed: bool = True,
    check_uniqueness: bool = False,
) -> EquilibriumResult:
    """Nash equilibrium of the pricing game by best-response tatonnement from zero prices.

    Providers with the same role and licensed bandwidth move together, so
    symmetric markets stay symmetric. In unbundled markets with two or more
    providers the unlicensed prices start pinned at zero and only licensed
    prices iterate; the pinned profile is then certified like any other and
    the pin is dropped if certification fails.
    """
    _check_finite(config)
    max_rounds = max_rounds or _max_rounds()
    start = start or PriceProfile.uniform(config, 0.0)
    start.validate(config)
    pinned = pin_unlicensed and config.mode is Mode.UNBUNDLED and config.n >= 2

    if pinned:
        start = _set(start, {(p.id, "u"): 0.0 for p in config.providers})

        def slots_of(i):
            return [s for s in price_slots(config, i) if s[1] != "u"]
    else:
        def slots_of(i):
            return price_slots(config, i)

    prices, rounds, converged, history = _tatonnement(config, start, slots_of, max_rounds, tol)
    eps = verify_equilibrium(config, prices)
    if pinned and eps > TOL_NE:
        log.info("unlicensed price pin failed certification (eps=%.3e); iterating all prices", eps)
        pinned = False
        prices, more, converged, extra = _tatonnement(
            config, prices, lambda i: price_slots(config, i), max_rounds, tol
        )
        rounds += more
        history += extra[1:]
        eps = verify_equilibrium(config, prices)
    solution = solve_wardrop(config, prices)
    other = None
    if check_uniqueness:
        high = PriceProfile.uniform(config, config.demand.A)
        alt, _, _, _ = _tatonnement(config, high, slots_of, max_rounds, tol)
        diff = np.abs(np.array(alt.as_vector()) - np.array(prices.as_vector())).max()
        other = bool(diff > 1e-6)
    return EquilibriumResult(
        prices=prices,
        solution=solution,
        welfare=welfare_report(config, prices, solution.alloc),
        eps_ne=eps,
        iterations=rounds,
        converged=bool(converged and eps <= TOL_NE),
        history=tuple(history),
        pinned_unlicensed=pinned,
        other_equilibrium=other,
    )


def _max_rounds() -> int:
    import os

    return int(os.environ.get("SPECTRUM_EQ_MAXITER", MAX_ROUNDS))


def supermodularity_matrix(config: MarketConfig) -> np.ndarray:
    """The matrix ``M`` with ``p + M x = A 1`` for a linear bundled market of incumbents."""
    if not config.congestion.is_linear:
        raise InvalidConfig("supermodularity test needs linear congestion")
    if config.mode is not Mode.BUNDLED or config.entrants:
        raise InvalidConfig("supermodularity test covers bundled markets of incumbents only")
    k1, k2 = config.demand.k1, config.congestion.k
    a = config.alpha
    B = np.array([p.bandwidth for p in config.providers])
    shared = 0.0 if is_infinite(config.W) else k2 * a * a / config.W
    return np.diag(k2 * (1 - a) ** 2 / B) + np.ones((config.n, config.n)) * (k1 + shared)


def check_supermodularity(config: MarketConfig, alloc=None) -> bool:
    """True when ``M^-1`` is positive on the diagonal and negative off it.

    ``alloc`` is accepted for interface symmetry; in the linear family the
    matrix does not depend on the operating point.
    """
    Minv = np.linalg.inv(supermodularity_matrix(config))
    off = Minv[~np.eye(config.n, dtype=bool)]
    return bool(np.all(np.diag(Minv) > 0) and np.all(off < 0))
