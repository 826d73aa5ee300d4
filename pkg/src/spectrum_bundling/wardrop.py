"""Customer-side equilibrium: given announced prices, how customers split across providers.

Every market mode is mapped onto one set of "links". A link is a service a
customer can buy at price ``p``; its delivered price is

    p + s * g(s * x / b) + w * g(L / W)

where ``x`` is the mass on the link, ``s`` the share of time on the link's own
band of width ``b``, ``w`` the weight with which the link loads the shared
band and ``L`` the total weighted load on it. Links with ``s == 0`` only live
on the shared band (entrants, unlicensed-band offers, bundles at alpha = 1);
they are interchangeable apart from price, so only the cheapest can carry mass
and they are merged into a single "pool" variable. Ties inside the pool are
split evenly; the allocation is otherwise unique.

Identical links (same price and band) are merged into classes with a
multiplicity, which keeps symmetric markets with many providers cheap.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import _kernels
from ._scalar import bisect_increasing
from .market import (
    Allocation,
    InvalidConfig,
    MarketConfig,
    Mode,
    PriceProfile,
    delivered_price,
    is_infinite,
)

log = logging.getLogger(__name__)

TOL_ACTIVE = 1e-10
TOL_RESIDUAL = 1e-9
_NEWTON_TOL = 1e-14


class WardropConvergenceError(RuntimeError):
    """Raised when the solver stalls; ``solution`` holds the best iterate."""

    def __init__(self, message, solution):
        super().__init__(message)
        self.solution = solution


@dataclass(frozen=True)
class WardropSolution:
    alloc: Allocation
    delivered: float
    residuals: Tuple[float, ...]
    iterations: int
    ties: Tuple[int, ...] = ()

    @property
    def max_residual(self) -> float:
        return max(self.residuals) if self.residuals else 0.0


@dataclass(frozen=True)
class _Link:
    providers: Tuple[int, ...]  # identical providers sharing this link type
    unlicensed_slot: bool  # stored in Allocation.unlicensed rather than .masses
    price: float
    s: float
    b: float
    w: float


def _links(
    config: MarketConfig, prices: PriceProfile, group: bool = True, isolate: Optional[int] = None
) -> List[_Link]:
    """Links of every provider; with ``group`` identical providers share one link."""
    unb = config.mode is Mode.UNBUNDLED
    groups: Dict[tuple, List[int]] = {}
    for prov in config.providers:
        i = prov.id
        if group and i != isolate:
            key = (prov.role, prov.bandwidth, prices.prices[i], prices.unlicensed[i] if unb else 0.0)
        else:
            key = (i,)
        groups.setdefault(key, []).append(i)
    out = []
    a = config.alpha
    for members in groups.values():
        ids = tuple(members)
        prov = config.providers[ids[0]]
        p = prices.prices[ids[0]]
        if config.mode is Mode.BUNDLED:
            if prov.is_incumbent and a < 1.0:
                out.append(_Link(ids, False, p, 1.0 - a, prov.bandwidth, a))
            else:
                out.append(_Link(ids, False, p, 0.0, 0.0, 1.0))
        elif unb:
            if prov.is_incumbent:
                out.append(_Link(ids, False, p, 1.0, prov.bandwidth, 0.0))
            out.append(_Link(ids, True, prices.unlicensed[ids[0]], 0.0, 0.0, 1.0))
        else:
            if prov.is_incumbent:
                out.append(_Link(ids, False, p, 1.0, prov.bandwidth, 0.0))
            else:
                out.append(_Link(ids, False, p, 0.0, 0.0, 1.0))
    return out


class _Reduced:
    """Solver variables: one per own-band link (with multiplicity), plus at most one pool."""

    def __init__(self, config: MarketConfig, links: List[_Link]):
        self.config = config
        own_links = [l for l in links if l.s > 0.0]
        pool = [l for l in links if l.s == 0.0]
        self.members: List[List[_Link]] = [[l] for l in own_links]
        price = [l.price for l in own_links]
        s = [l.s for l in own_links]
        b = [l.b for l in own_links]
        w = [l.w for l in own_links]
        n = [len(l.providers) for l in own_links]
        self.pool_members: List[_Link] = []
        self.pool_count = 0
        if pool:
            pmin = min(l.price for l in pool)
            self.pool_members = [l for l in pool if l.price == pmin]
            self.pool_count = sum(len(l.providers) for l in self.pool_members)
            self.members.append(self.pool_members)
            price.append(pmin)
            s.append(0.0)
            b.append(1.0)
            w.append(1.0)
            n.append(1)
        self.price = np.array(price)
        self.s = np.array(s)
        self.b = np.array(b)
        self.w = np.array(w)
        self.n = np.array(n, dtype=float)
        self.own = self.s > 0.0
        self.size = len(price)
        g = config.congestion
        self.k2 = g.k
        self.power = g.power
        self.A = config.demand.A
        self.k1 = config.demand.k1
        self.Qmax = config.demand.max_quantity
        self.invW = 0.0 if is_infinite(config.W) else 1.0 / config.W
        self.W = None if is_infinite(config.W) else config.W

    def link_values(self, y):
        """Mass per provider on each link, as ``(link, value)`` pairs."""
        for c, members in enumerate(self.members):
            value = float(y[c])
            if self.pool_members and members is self.pool_members:
                value /= self.pool_count
            for link in members:
                yield link, value

    # g and friends, vectorised over classes
    def _g(self, u):
        return self.k2 * u if self.power == 1.0 else self.k2 * u ** self.power

    def _dg(self, u):
        if self.power == 1.0:
            return np.full_like(u, self.k2) if isinstance(u, np.ndarray) else self.k2
        return self.k2 * self.power * u ** (self.power - 1.0)

    def _G(self, u):
        p1 = self.power + 1.0
        return self.k2 * u ** p1 / p1

    def gradient(self, y):
        """Delivered price minus P(Q), per class (the potential gradient divided by multiplicity)."""
        Q = float(self.n @ y)
        L = float((self.n * self.w) @ y)
        u = np.where(self.own, self.s * y / np.where(self.own, self.b, 1.0), 0.0)
        cost = self.price + self.s * self._g(u)
        if self.W is not None:
            cost = cost + self.w * float(self._g(L * self.invW))
        return cost - max(self.A - self.k1 * Q, 0.0)

    def potential(self, y):
        Q = float(self.n @ y)
        L = float((self.n * self.w) @ y)
        u = np.where(self.own, self.s * y / np.where(self.own, self.b, 1.0), 0.0)
        val = float(self.n @ (self.price * y + np.where(self.own, self.b, 0.0) * self._G(u)))
        if self.W is not None:
            val += self.W * float(self._G(L * self.invW))
        q = min(Q, self.Qmax)
        return val - (self.A * q - 0.5 * self.k1 * q * q)

    def jacobian(self, y):
        Q = float(self.n @ y)
        L = float((self.n * self.w) @ y)
        b = np.where(self.own, self.b, 1.0)
        u = np.where(self.own, self.s * y / b, 0.0)
        diag = np.where(self.own, self.s * self.s / b * self._dg(u), 0.0)
        J = np.diag(diag)
        if self.W is not None:
            gl = float(self._dg(L * self.invW)) * self.invW
            J += gl * np.outer(self.w, self.n * self.w)
        if Q < self.Qmax:
            J += self.k1 * np.outer(np.ones(self.size), self.n)
        return J

    def coordinate_sweep(self, y):
        for c in range(self.size):
            def f(v, c=c):
                z = y.copy()
                z[c] = v
                return self.gradient(z)[c]

            y[c] = 0.0
            if f(0.0) < 0.0:
                y[c] = bisect_increasing(f, 0.0, self.Qmax / self.n[c], tol=1e-13)
        return y


def _newton(red: _Reduced, max_iter: int, y0=None):
    """Projected Newton on the potential, with coordinate-descent fallback.

    The iteration itself runs in the compiled kernel; whenever its line search
    stalls, one coordinate sweep (exact bisection per variable) is taken here
    and Newton resumes from the result.
    """
    if y0 is None or len(y0) != red.size:
        y = np.zeros(red.size)
    else:
        y = np.array(y0, dtype=float)
    W = red.W if red.W is not None else 1.0
    used = 0
    while used < max_iter:
        y, it, status = _kernels.newton(
            y, red.price, red.s, red.b, red.w, red.n, red.k2, red.power,
            red.A, red.k1, red.Qmax, W, red.W is not None, _NEWTON_TOL, max_iter - used,
        )
        used += it
        if status != _kernels.STALLED:
            break
        y = red.coordinate_sweep(y)
        used += 1
    return y, used


def _expand(config: MarketConfig, red: _Reduced, y) -> Allocation:
    masses = [0.0] * config.n
    unl = [0.0] * config.n if config.mode is Mode.UNBUNDLED else None
    for link, value in red.link_values(y):
        target = unl if link.unlicensed_slot else masses
        for i in link.providers:
            target[i] = value
    return Allocation(tuple(masses), None if unl is None else tuple(unl))


def mass_response(config: MarketConfig, prices: PriceProfile, i: int, band: str = "p"):
    """Callable ``v -> (masses[i], unlicensed[i])`` as provider ``i`` moves one of its prices.

    The other providers' links are built once and Newton is warm-started from
    the previous answer, which makes repeated evaluations inside a
    best-response search cheap. When the moving price sits on an own-band
    link the reduced system keeps its shape and only that price is updated;
    shared-band prices can change the cheapest pool, so they rebuild it.
    Only solver-level residuals are checked.
    """
    base = _links(config, prices, isolate=i)
    mine = [l for l in base if l.providers == (i,)]
    others = [l for l in base if l.providers != (i,)]
    unl_slot = band == "u"
    moving = [l for l in mine if l.unlicensed_slot == unl_slot]
    max_iter = _default_max_iter()
    state = {"y": None}

    fixed = None
    if moving and moving[0].s > 0.0:
        fixed = _Reduced(config, base)
        slot = next(c for c, m in enumerate(fixed.members) if m[0] is moving[0])
    else:
        slot = None
    pool_prices = [l.price for l in others if l.s == 0.0]
    pool_min = min(pool_prices) if pool_prices else math.inf
    layouts = {}

    def reduced(v: float) -> _Reduced:
        if fixed is not None:
            fixed.price[slot] = v
            return fixed
        # the moving link is on the shared band: below the cheapest other offer it is the
        # whole pool, above it is priced out; only exact ties need a fresh build
        key = "below" if v < pool_min else ("above" if v > pool_min else None)
        red = layouts.get(key)
        if red is None:
            links = others + [replace(l, price=v) if any(l is m for m in moving) else l for l in mine]
            red = _Reduced(config, links)
            if key is not None:
                layouts[key] = red
        if key == "below":
            red.price[red.size - 1] = v
        return red

    def residual(red, y):
        F = _kernels.gradient(
            y, red.price, red.s, red.b, red.w, red.n, red.k2, red.power,
            red.A, red.k1, red.invW, red.W is not None,
        )
        return float(np.abs(np.minimum(y, F)).max())

    def response(v: float) -> Tuple[float, float]:
        red = reduced(v)
        y, it = _newton(red, max_iter, state["y"])
        res = residual(red, y)
        if res > TOL_RESIDUAL:
            y, it = _newton(red, max_iter)
            res = residual(red, y)
            if res > TOL_RESIDUAL:
                p = _with_price(prices, i, band, v)
                raise WardropConvergenceError(
                    f"Wardrop residual {res:.3e} after {it} iterations",
                    check_solution(config, p, _expand(config, red, y), it),
                )
        state["y"] = y
        main = unl = 0.0
        for link, value in red.link_values(y):
            if i in link.providers:
                if link.unlicensed_slot:
                    unl = value
                else:
                    main = value
        return main, unl

    return response


def _with_price(prices: PriceProfile, i: int, band: str, v: float) -> PriceProfile:
    if band == "u":
        u = list(prices.unlicensed)
        u[i] = v
        return PriceProfile(prices.prices, tuple(u))
    p = list(prices.prices)
    p[i] = v
    return PriceProfile(tuple(p), prices.unlicensed)


def provider_masses(config: MarketConfig, prices: PriceProfile, i: int) -> Tuple[float, float]:
    """``(masses[i], unlicensed[i])`` at the Wardrop allocation, without the full residual report."""
    return mass_response(config, prices, i)(prices.prices[i])


def check_solution(
    config: MarketConfig, prices: PriceProfile, alloc: Allocation, iterations: int = 0
) -> WardropSolution:
    """Complementarity residuals of ``alloc`` measured straight from the delivered-price formulas."""
    Q = alloc.total
    PQ = config.demand(Q)
    load = alloc.unlicensed_load(config)
    residuals = []
    ties = []
    for prov in config.providers:
        i = prov.id
        d = delivered_price(config, prices, alloc, i, load)
        if config.mode is Mode.UNBUNDLED:
            pairs = [(alloc.unlicensed[i], d[1] if prov.is_incumbent else d)]
            if prov.is_incumbent:
                pairs.append((alloc.masses[i], d[0]))
        else:
            pairs = [(alloc.masses[i], d)]
        r = max(abs(min(x, dv - PQ)) for x, dv in pairs)
        residuals.append(r)
        if all(x <= TOL_ACTIVE for x, _ in pairs) and any(abs(dv - PQ) <= TOL_RESIDUAL for _, dv in pairs):
            ties.append(i)
    return WardropSolution(alloc, PQ, tuple(residuals), iterations, tuple(ties))


def solve_wardrop(
    config: MarketConfig, prices: PriceProfile, max_iter: Optional[int] = None
) -> WardropSolution:
    """Unique Wardrop allocation for fixed prices, by minimizing the convex potential.

    Infinite ``W`` is accepted: the shared band then never congests.
    """
    prices.validate(config)
    red = _Reduced(config, _links(config, prices))
    y, it = _newton(red, max_iter or _default_max_iter())
    sol = check_solution(config, prices, _expand(config, red, y), it)
    if sol.max_residual > TOL_RESIDUAL:
        raise WardropConvergenceError(
            f"Wardrop residual {sol.max_residual:.3e} after {it} iterations", sol
        )
    return sol


def _default_max_iter() -> int:
    import os

    return int(os.environ.get("SPECTRUM_EQ_MAXITER", "200"))


def wardrop_linear_direct(config: MarketConfig, prices: PriceProfile) -> WardropSolution:
    """Exact Wardrop allocation for linear demand and congestion via an active-set linear solve.

    Solves ``p + M x = A 1`` on the active links, dropping links whose mass
    comes out negative and re-adding inactive links that would be undercut.
    """
    if not config.congestion.is_linear:
        raise InvalidConfig("wardrop_linear_direct needs linear congestion")
    prices.validate(config)
    links = _links(config, prices, group=False)
    # shared-band-only links: keep the cheapest (ties handled as one variable)
    pool = [j for j, l in enumerate(links) if l.s == 0.0]
    keep = [j for j, l in enumerate(links) if l.s > 0.0]
    pool_members = []
    if pool:
        pmin = min(links[j].price for j in pool)
        pool_members = [j for j in pool if links[j].price == pmin]
        keep.append(pool_members[0])
    k2 = config.congestion.k
    A, k1 = config.demand.A, config.demand.k1
    shared = 0.0 if is_infinite(config.W) else k2 / config.W
    m = len(keep)
    p = np.array([links[j].price for j in keep])
    s = np.array([links[j].s for j in keep])
    b = np.array([links[j].b if links[j].s > 0 else 1.0 for j in keep])
    w = np.array([links[j].w for j in keep])
    M = np.diag(k2 * s * s / b) + shared * np.outer(w, w) + k1
    active = np.ones(m, dtype=bool)
    x = np.zeros(m)
    rounds = 0
    for rounds in range(1, 2 * m + 2):
        x = np.zeros(m)
        if active.any():
            idx = np.flatnonzero(active)
            sub = M[np.ix_(idx, idx)]
            try:
                x[idx] = np.linalg.solve(sub, A - p[idx])
            except np.linalg.LinAlgError:
                # alpha within rounding of 1 leaves only the rank-one shared term
                log.warning("near-singular linear Wardrop system; using least squares")
                x[idx] = np.linalg.lstsq(sub, A - p[idx], rcond=None)[0]
        neg = active & (x < 0.0)
        if neg.any():
            active &= ~neg
            continue
        slack = p + M @ x - A  # delivered minus P(Q) while Q stays below the clamp
        undercut = (~active) & (slack < -1e-13)
        if not undercut.any():
            break
        active |= undercut
    x = np.maximum(x, 0.0)
    values = {}
    for pos, j in enumerate(keep):
        values[j] = float(x[pos])
    if pool_members:
        share = values[pool_members[0]] / len(pool_members)
        for j in pool_members:
            values[j] = share
    masses = [0.0] * config.n
    unl = [0.0] * config.n if config.mode is Mode.UNBUNDLED else None
    for j, link in enumerate(links):
        v = values.get(j, 0.0)
        (unl if link.unlicensed_slot else masses)[link.providers[0]] = v
    alloc = Allocation(tuple(masses), None if unl is None else tuple(unl))
    return check_solution(config, prices, alloc, rounds)


def price_sensitivity(
    config: MarketConfig, prices: PriceProfile, solution: WardropSolution, i: int
) -> float:
    """Derivative of provider ``i``'s (licensed) mass with respect to its own (licensed) price.

    For bundled markets where every active provider is an incumbent this uses
    the closed coefficient form with ``a_j = (1-alpha)^2/B_j g'((1-alpha)x_j/B_j)``
    and ``b = alpha^2/W g'(alpha Q/W) - P'(Q)``; otherwise it inverts the
    Jacobian of the active links.
    """
    alloc = solution.alloc
    if alloc.masses[i] <= TOL_ACTIVE:
        raise ValueError(f"provider {i} carries no mass")
    g = config.congestion
    alpha = config.alpha
    active = [p.id for p in config.providers if alloc.provider_mass(p.id) > TOL_ACTIVE]
    Q = alloc.total
    if (
        config.mode is Mode.BUNDLED
        and alpha < 1.0
        and all(config.providers[j].is_incumbent for j in active)
    ):
        a = {}
        for j in active:
            B = config.providers[j].bandwidth
            a[j] = (1 - alpha) ** 2 / B * g.derivative((1 - alpha) * alloc.masses[j] / B)
        shared = 0.0
        if not is_infinite(config.W):
            shared = alpha ** 2 / config.W * g.derivative(alpha * Q / config.W)
        bcoef = shared - config.demand.derivative(Q)
        others = [j for j in active if j != i]
        prod_all = math.prod(a.values())
        prod_others = math.prod(a[j] for j in others)
        num = prod_all + bcoef * sum(prod_all / a[j] for j in others) + bcoef * prod_others
        den = prod_others + bcoef * sum(prod_others / a[j] for j in others)
        return -den / num
    red = _Reduced(config, _links(config, prices, isolate=i))
    y = np.zeros(red.size)
    target = None
    for c, members in enumerate(red.members):
        for link in members:
            j = link.providers[0]
            v = alloc.unlicensed[j] if link.unlicensed_slot else alloc.masses[j]
            if red.pool_members and members is red.pool_members:
                y[c] += v * len(link.providers)
            else:
                y[c] = v
            if link.providers == (i,) and not link.unlicensed_slot:
                # a shared-band-only link is differentiable only when it is alone at the pool price
                if link.s > 0 or len(members) == 1:
                    target = c
    if target is None:
        raise ValueError(f"provider {i} ties other shared-band offers; its mass is not differentiable")
    act = y > TOL_ACTIVE
    J = red.jacobian(y)[np.ix_(act, act)]
    pos = int(np.flatnonzero(act).tolist().index(target))
    return -float(np.linalg.inv(J)[pos, pos])


def warm_up() -> None:
    """Compile (or load from cache) the solver kernel ahead of timed work."""
    from .market import make_market

    config = make_market([1.0], 1, 1.0, 0.5)
    solve_wardrop(config, PriceProfile((0.1, 0.1)))
