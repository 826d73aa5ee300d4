"""Closed-form equilibria of the linear family (``P(q) = 1 - q``, ``g(x) = x``).

These serve two purposes: a fast path for the scenarios they cover, and an
oracle that is independent of the numeric solvers. Each formula is written
out term by term rather than simplified.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Tuple

from .market import (
    INFINITE,
    InverseDemand,
    InvalidConfig,
    MarketConfig,
    Mode,
    PriceProfile,
    consumer_surplus,
    is_infinite,
    symmetric_market,
)

_DEMAND = InverseDemand()


@dataclass(frozen=True)
class ClosedFormResult:
    prices: Tuple[float, ...]
    masses: Tuple[float, ...]
    profits: Tuple[float, ...]
    Q: float
    CS: float
    SW: float
    provenance: str
    extras: Dict[str, float] = field(default_factory=dict)


def _result(prices, masses, profits, Q, provenance, **extras) -> ClosedFormResult:
    cs = consumer_surplus(_DEMAND, Q)
    return ClosedFormResult(
        prices=tuple(prices),
        masses=tuple(masses),
        profits=tuple(profits),
        Q=Q,
        CS=cs,
        SW=cs + sum(profits),
        provenance=provenance,
        extras=dict(extras),
    )


def _positive(**values) -> None:
    for name, v in values.items():
        if not is_infinite(v) and not v > 0:
            raise InvalidConfig(f"{name} must be positive, got {v}")


def _alpha_below_one(alpha: float) -> None:
    if not 0.0 <= alpha < 1.0:
        raise InvalidConfig(f"closed form needs alpha in [0, 1), got {alpha}")


def monopoly_combined(B: float, W: float) -> ClosedFormResult:
    """Unbundled monopoly: equivalent to a single band of width ``B + W``."""
    _positive(B=B, W=W)
    C = B + W
    x = C / (2.0 * (1.0 + C))
    p = 1.0 - x - x / C
    return _result((p,), (x,), (C / (4.0 * (1.0 + C)),), x, "monopoly_combined")


def monopoly_alpha_star(B: float, W: float) -> float:
    """Bundling fraction at which the bundled monopoly matches the combined band."""
    _positive(B=B, W=W)
    return W / (B + W)


def bundled_monopoly(B: float, W: float, alpha: float) -> ClosedFormResult:
    """Bundled monopoly at a fixed ``alpha``.

    Delivered price ``p + c x`` with ``c = (1-a)^2/B + a^2/W``; the monopolist
    maximizes ``x (1 - x - c x)``.
    """
    _positive(B=B, W=W)
    c = (1.0 - alpha) ** 2 / B + (0.0 if is_infinite(W) else alpha**2 / W)
    x = 1.0 / (2.0 * (1.0 + c))
    p = 0.5
    return _result((p,), (x,), (p * x,), x, "bundled_monopoly", congestion_slope=c)


def exclusive_use_equilibrium(B: float, W: float) -> ClosedFormResult:
    """Incumbent on ``B`` against an entrant that holds ``W`` exclusively.

    Unlimited ``W`` gives the limit in which the entrant is congestion free.
    """
    _positive(B=B, W=W)
    if is_infinite(W):
        p1 = 1.0 / (4.0 + 3.0 * B)
        p2 = 2.0 / (4.0 + 3.0 * B)
        x1 = B * p1
        x2 = (1.0 + B) * p2
        return _result((p1, p2), (x1, x2), (p1 * x1, p2 * x2), x1 + x2, "exclusive_use_limit")
    den = 4.0 + 4.0 * B + 4.0 * W + 3.0 * B * W
    p1 = (2.0 + 2.0 * B + W) / den
    p2 = (2.0 + B + 2.0 * W) / den
    x1 = B * (1.0 + W) / (1.0 + B + W) * p1
    x2 = W * (1.0 + B) / (1.0 + B + W) * p2
    return _result((p1, p2), (x1, x2), (p1 * x1, p2 * x2), x1 + x2, "exclusive_use")


def unbundled_1v1_equilibrium(B: float, W: float) -> ClosedFormResult:
    """One incumbent selling licensed access, open unlicensed band priced at zero.

    ``masses`` is ``(licensed, unlicensed)``; ``extras['alpha0']`` is the
    bundling fraction that reproduces this outcome (unlicensed share of all
    customers). Unlimited ``W`` gives the congestion-free limit where the
    licensed offer is priced out.
    """
    _positive(B=B, W=W)
    if is_infinite(W):
        return _result((0.0, 0.0), (0.0, 1.0), (0.0, 0.0), 1.0, "unbundled_1v1_limit", alpha0=1.0)
    xl = B / (2.0 * (B + 1.0 + W))
    xu = W * (1.0 - xl) / (1.0 + W)
    p1 = (1.0 - xl) / (1.0 + W) - xl / B
    alpha0 = xu / (xu + xl)
    return _result((p1, 0.0), (xl, xu), (p1 * xl, 0.0), xl + xu, "unbundled_1v1", alpha0=alpha0)


def symmetric_bundled_equilibrium(M: int, B_t: float, W, alpha: float) -> ClosedFormResult:
    """``M`` identical bundled incumbents with total licensed bandwidth ``B_t``, no entrant.

    The price is the closed form. Masses come from the exact linear Wardrop
    solve at that price. The published total-mass expression leaves open
    whether its ``B`` means ``B_t`` or ``B_t / M``; both readings are kept in
    ``extras`` as diagnostics.
    """
    if int(M) != M or M < 2:
        raise InvalidConfig(f"symmetric closed form needs an integer M >= 2, got {M}")
    _positive(B_t=B_t, W=W)
    _alpha_below_one(alpha)
    from .wardrop import wardrop_linear_direct

    M = int(M)
    t = (M - 1) / M
    a2 = (1.0 - alpha) ** 2
    if is_infinite(W):
        den = 2.0 * a2 + t * B_t
        p = a2 / den
        q_readings = {}
    else:
        den = 2.0 * a2 * W + t * (alpha**2 * B_t + B_t * W)
        p = a2 * W / den
        tail = t + a2 * W / (M * (a2 * W + alpha**2 * B_t + B_t * W))
        q_readings = {
            "Q_formula_B_total": B_t * W / den * tail,
            "Q_formula_B_per_sp": (B_t / M) * W / den * tail,
        }
    config = symmetric_market(M, B_t, W, alpha)
    x = wardrop_linear_direct(config, PriceProfile((p,) * M)).alloc.masses
    Q = sum(x)
    return _result((p,) * M, x, tuple(p * xi for xi in x), Q, "symmetric_bundled", **q_readings)


def one_v_one_Winf(B: float, alpha: float) -> ClosedFormResult:
    """Bundled incumbent against an entrant when the unlicensed band is unlimited.

    The unlicensed band becomes congestion free, so the entrant is a
    congestion-free competitor charging ``p2 = 2 p1`` (from its own first-order
    condition) and serving ``Q - x1`` with ``Q = 1 - p2``.
    """
    _positive(B=B)
    _alpha_below_one(alpha)
    a2 = (1.0 - alpha) ** 2
    den = 4.0 * a2 + 3.0 * B
    p1 = a2 / den
    x1 = B / den
    profit = B * a2 / den**2
    p2 = 2.0 * a2 / den
    Q = 1.0 - p2
    x2 = Q - x1
    return _result((p1, p2), (x1, x2), (profit, p2 * x2), Q, "one_v_one_Winf")


def congestion_scale_factor(power: float, alpha: float) -> float:
    """Factor ``(1-a)^-(p+1)`` by which bundling divides an incumbent's congestion cost
    once the unlicensed band is unlimited."""
    if not 0.0 <= alpha < 1.0:
        raise InvalidConfig(f"band expansion needs alpha in [0, 1), got {alpha}")
    return (1.0 - alpha) ** -(power + 1.0)


def band_expansion_equivalent(config: MarketConfig, alpha: float = None) -> MarketConfig:
    """Market without unlicensed spectrum that reproduces bundling at ``alpha`` for unlimited W.

    With ``g(x) = k x^p`` the bundled incumbent's cost is
    ``k (1-a)^(p+1) (x/B)^p``, i.e. ``g`` is scaled down by
    :func:`congestion_scale_factor`. The same cost arises from licensed
    bandwidth ``B * factor^(1/p)``, which is what the returned config holds
    (for the linear family this is the factor itself). The returned market has
    ``alpha = 0`` so the unlicensed band carries no load. An incoming finite
    ``W`` is kept; the equivalence is then the large-W approximation.
    """
    alpha = config.alpha if alpha is None else alpha
    if config.mode is not Mode.BUNDLED or config.entrants:
        raise InvalidConfig("band expansion applies to bundled markets of incumbents only")
    factor = congestion_scale_factor(config.congestion.power, alpha)
    scale = factor ** (1.0 / config.congestion.power)
    providers = tuple(replace(p, bandwidth=p.bandwidth * scale) for p in config.providers)
    return replace(config, providers=providers, alpha=0.0)


def b_threshold_cubic(k: float, t: float) -> float:
    """``-2k^3 - 3 t k^2 + t^2``, whose root in ``[t/2, 1/2]`` defines ``1/B_th``."""
    return -2.0 * k**3 - 3.0 * t * k**2 + t * t


__all__ = [
    "INFINITE",
    "ClosedFormResult",
    "band_expansion_equivalent",
    "b_threshold_cubic",
    "bundled_monopoly",
    "congestion_scale_factor",
    "exclusive_use_equilibrium",
    "monopoly_alpha_star",
    "monopoly_combined",
    "one_v_one_Winf",
    "symmetric_bundled_equilibrium",
    "unbundled_1v1_equilibrium",
]
