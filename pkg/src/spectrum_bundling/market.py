"""Market primitives: demand, congestion, providers, prices, allocations, welfare.

All objects are frozen dataclasses; every function here is pure.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple, Union

from scipy import integrate


class _Infinite:
    """Symbolic unlimited bandwidth. Never fed into a congestion function."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITE"

    def __reduce__(self):
        return (_Infinite, ())


INFINITE = _Infinite()

Bandwidth = Union[float, _Infinite]


def is_infinite(value) -> bool:
    return value is INFINITE


class Role(enum.Enum):
    INCUMBENT = "incumbent"
    ENTRANT = "entrant"


class Mode(enum.Enum):
    BUNDLED = "bundled"
    UNBUNDLED = "unbundled"
    EXCLUSIVE = "exclusive"


class InvalidConfig(ValueError):
    pass


@dataclass(frozen=True)
class CongestionFunction:
    """Congestion cost ``g(x) = k x**power``; ``power == 1`` is the linear family."""

    k: float = 1.0
    power: float = 1.0

    def __post_init__(self):
        if not self.k > 0:
            raise InvalidConfig(f"congestion coefficient must be positive, got {self.k}")
        if not self.power >= 1:
            raise InvalidConfig(f"congestion exponent must be >= 1, got {self.power}")

    @classmethod
    def linear(cls, k: float = 1.0) -> "CongestionFunction":
        return cls(k, 1.0)

    @classmethod
    def power_law(cls, k: float, p: float) -> "CongestionFunction":
        return cls(k, p)

    @property
    def is_linear(self) -> bool:
        return self.power == 1.0

    def __call__(self, x: float) -> float:
        if self.power == 1.0:
            return self.k * x
        return self.k * x ** self.power

    def derivative(self, x: float) -> float:
        if self.power == 1.0:
            return self.k
        return self.k * self.power * x ** (self.power - 1.0)

    def antiderivative(self, x: float) -> float:
        """Integral of g from 0 to x."""
        p1 = self.power + 1.0
        return self.k * x ** p1 / p1

    def inverse(self, y: float) -> float:
        if y <= 0:
            return 0.0
        if self.power == 1.0:
            return y / self.k
        return (y / self.k) ** (1.0 / self.power)


@dataclass(frozen=True)
class InverseDemand:
    """Linear inverse demand ``P(q) = A - k1 q``, clamped to zero beyond ``A/k1``."""

    A: float = 1.0
    k1: float = 1.0

    def __post_init__(self):
        if not (self.A > 0 and self.k1 > 0):
            raise InvalidConfig(f"demand needs A > 0 and k1 > 0, got A={self.A}, k1={self.k1}")

    @property
    def max_quantity(self) -> float:
        return self.A / self.k1

    def __call__(self, q: float) -> float:
        return max(self.A - self.k1 * q, 0.0)

    def derivative(self, q: float) -> float:
        return -self.k1 if q < self.max_quantity else 0.0

    def integral(self, q: float) -> float:
        """Integral of P from 0 to q (constant past the clamp point)."""
        q = min(q, self.max_quantity)
        return self.A * q - 0.5 * self.k1 * q * q


@dataclass(frozen=True)
class Provider:
    id: int
    role: Role
    bandwidth: float = 0.0

    def __post_init__(self):
        if self.role is Role.ENTRANT and self.bandwidth != 0:
            raise InvalidConfig(f"entrant {self.id} cannot hold licensed spectrum")
        if self.role is Role.INCUMBENT and not self.bandwidth > 0:
            raise InvalidConfig(f"incumbent {self.id} needs positive licensed bandwidth")

    @property
    def is_incumbent(self) -> bool:
        return self.role is Role.INCUMBENT


@dataclass(frozen=True)
class MarketConfig:
    providers: Tuple[Provider, ...]
    W: Bandwidth = 1.0
    alpha: float = 0.0
    mode: Mode = Mode.BUNDLED
    demand: InverseDemand = field(default_factory=InverseDemand)
    congestion: CongestionFunction = field(default_factory=CongestionFunction)

    def __post_init__(self):
        object.__setattr__(self, "providers", tuple(self.providers))
        if not self.providers:
            raise InvalidConfig("market needs at least one provider")
        if [p.id for p in self.providers] != list(range(len(self.providers))):
            raise InvalidConfig("provider ids must be 0..n-1 in order")
        if not is_infinite(self.W) and not self.W > 0:
            raise InvalidConfig(f"unlicensed bandwidth must be positive, got {self.W}")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidConfig(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.mode is Mode.EXCLUSIVE and len(self.entrants) != 1:
            raise InvalidConfig("exclusive use needs exactly one entrant")

    @property
    def n(self) -> int:
        return len(self.providers)

    @property
    def incumbents(self) -> Tuple[Provider, ...]:
        return tuple(p for p in self.providers if p.is_incumbent)

    @property
    def entrants(self) -> Tuple[Provider, ...]:
        return tuple(p for p in self.providers if not p.is_incumbent)

    @property
    def W_finite(self) -> bool:
        return not is_infinite(self.W)

    def with_alpha(self, alpha: float) -> "MarketConfig":
        return replace(self, alpha=alpha)

    def with_W(self, W: Bandwidth) -> "MarketConfig":
        return replace(self, W=W)

    def with_mode(self, mode: Mode) -> "MarketConfig":
        return replace(self, mode=mode)


def make_market(
    B: Sequence[float] = (1.0,),
    N: int = 0,
    W: Bandwidth = 1.0,
    alpha: float = 0.0,
    mode: Union[Mode, str] = Mode.BUNDLED,
    demand: Optional[InverseDemand] = None,
    congestion: Optional[CongestionFunction] = None,
) -> MarketConfig:
    """Incumbents with licensed bands ``B`` followed by ``N`` entrants."""
    providers = [Provider(i, Role.INCUMBENT, float(b)) for i, b in enumerate(B)]
    providers += [Provider(len(B) + j, Role.ENTRANT) for j in range(N)]
    return MarketConfig(
        providers=tuple(providers),
        W=W if is_infinite(W) else float(W),
        alpha=float(alpha),
        mode=Mode(mode),
        demand=demand or InverseDemand(),
        congestion=congestion or CongestionFunction(),
    )


def symmetric_market(M: int, B_t: float, W: Bandwidth, alpha: float, **kw) -> MarketConfig:
    """``M`` identical incumbents sharing total licensed bandwidth ``B_t``."""
    return make_market([B_t / M] * M, 0, W, alpha, **kw)


@dataclass(frozen=True)
class PriceProfile:
    """Announced prices.

    ``prices[i]`` is provider i's single price (bundled/exclusive) or its
    licensed-band price (unbundled; ignored for entrants). ``unlicensed`` is
    only present in unbundled mode.
    """

    prices: Tuple[float, ...]
    unlicensed: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "prices", tuple(float(p) for p in self.prices))
        if self.unlicensed is not None:
            object.__setattr__(self, "unlicensed", tuple(float(p) for p in self.unlicensed))
            if len(self.unlicensed) != len(self.prices):
                raise InvalidConfig("licensed and unlicensed price vectors differ in length")

    @classmethod
    def uniform(cls, config: MarketConfig, value: float = 0.0) -> "PriceProfile":
        if config.mode is Mode.UNBUNDLED:
            lic = tuple(value if p.is_incumbent else 0.0 for p in config.providers)
            return cls(lic, (value,) * config.n)
        return cls((value,) * config.n)

    def validate(self, config: MarketConfig) -> None:
        if len(self.prices) != config.n:
            raise InvalidConfig(f"expected {config.n} prices, got {len(self.prices)}")
        if (config.mode is Mode.UNBUNDLED) != (self.unlicensed is not None):
            raise InvalidConfig("unlicensed prices are required exactly in unbundled mode")
        top = config.demand.A
        for v in self.prices + (self.unlicensed or ()):
            if not (0.0 <= v <= top) or math.isnan(v):
                raise InvalidConfig(f"price {v} outside [0, {top}]")

    def as_vector(self) -> Tuple[float, ...]:
        return self.prices + (self.unlicensed or ())


@dataclass(frozen=True)
class Allocation:
    """Customer masses; mirrors :class:`PriceProfile` (``masses`` holds the licensed share in unbundled mode)."""

    masses: Tuple[float, ...]
    unlicensed: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "masses", tuple(float(x) for x in self.masses))
        if self.unlicensed is not None:
            object.__setattr__(self, "unlicensed", tuple(float(x) for x in self.unlicensed))

    def provider_mass(self, i: int) -> float:
        extra = self.unlicensed[i] if self.unlicensed is not None else 0.0
        return self.masses[i] + extra

    @property
    def total(self) -> float:
        return sum(self.masses) + sum(self.unlicensed or ())

    def unlicensed_load(self, config: MarketConfig) -> float:
        if config.mode is Mode.UNBUNDLED:
            return sum(self.unlicensed)
        if config.mode is Mode.EXCLUSIVE:
            return sum(self.masses[p.id] for p in config.entrants)
        return sum(
            (config.alpha if p.is_incumbent else 1.0) * self.masses[p.id] for p in config.providers
        )


@dataclass(frozen=True)
class WelfareReport:
    profits: Tuple[float, ...]
    consumer_surplus: float
    social_welfare: float
    delivered_price: float
    total_mass: float


def _shared_congestion(config: MarketConfig, load: float) -> float:
    if is_infinite(config.W):
        return 0.0
    return config.congestion(load / config.W)


def delivered_price(
    config: MarketConfig,
    prices: PriceProfile,
    alloc: Allocation,
    provider_id: int,
    load: Optional[float] = None,
) -> Union[float, Tuple[float, float]]:
    """Announced price plus the congestion a customer of ``provider_id`` experiences.

    Returns a ``(licensed, unlicensed)`` pair for unbundled incumbents.
    ``load`` may pass a precomputed unlicensed load.
    """
    g = config.congestion
    prov = config.providers[provider_id]
    if load is None:
        load = alloc.unlicensed_load(config)
    shared = _shared_congestion(config, load)

    def licensed_term(scale: float, mass: float) -> float:
        if prov.bandwidth <= 0:
            raise InvalidConfig(f"provider {provider_id} has no licensed band")
        return scale * g(scale * mass / prov.bandwidth)

    if config.mode is Mode.BUNDLED:
        p = prices.prices[provider_id]
        if not prov.is_incumbent:
            return p + shared
        a = config.alpha
        own = 0.0 if a == 1.0 else licensed_term(1.0 - a, alloc.masses[provider_id])
        return p + own + a * shared
    if config.mode is Mode.UNBUNDLED:
        unl = prices.unlicensed[provider_id] + shared
        if not prov.is_incumbent:
            return unl
        lic = prices.prices[provider_id] + licensed_term(1.0, alloc.masses[provider_id])
        return lic, unl
    # exclusive: the lone entrant owns W, incumbents only have their licensed band
    p = prices.prices[provider_id]
    if not prov.is_incumbent:
        return p + shared
    return p + licensed_term(1.0, alloc.masses[provider_id])


def consumer_surplus(demand: InverseDemand, Q: float, quadrature: bool = False) -> float:
    """Integral of ``P(q) - P(Q)`` over ``[0, Q]``."""
    if Q < -1e-12 or Q > demand.max_quantity * (1 + 1e-12):
        raise ValueError(f"Q={Q} outside demand domain [0, {demand.max_quantity}]")
    Q = min(max(Q, 0.0), demand.max_quantity)
    if quadrature:
        PQ = demand(Q)
        val, _ = integrate.quad(lambda q: demand(q) - PQ, 0.0, Q, epsabs=0, epsrel=1e-12)
        return val
    return 0.5 * demand.k1 * Q * Q


def provider_profits(config: MarketConfig, prices: PriceProfile, alloc: Allocation) -> Tuple[float, ...]:
    out = []
    for i in range(config.n):
        v = prices.prices[i] * alloc.masses[i]
        if prices.unlicensed is not None:
            v += prices.unlicensed[i] * alloc.unlicensed[i]
        out.append(v)
    return tuple(out)


def welfare_report(config: MarketConfig, prices: PriceProfile, alloc: Allocation) -> WelfareReport:
    profits = provider_profits(config, prices, alloc)
    Q = min(alloc.total, config.demand.max_quantity)
    cs = consumer_surplus(config.demand, Q)
    return WelfareReport(
        profits=profits,
        consumer_surplus=cs,
        social_welfare=cs + sum(profits),
        delivered_price=config.demand(Q),
        total_mass=alloc.total,
    )
