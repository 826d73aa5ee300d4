import math

import numpy as np
import pytest

from spectrum_bundling.closed_form import (
    band_expansion_equivalent,
    bundled_monopoly,
    congestion_scale_factor,
    exclusive_use_equilibrium,
    monopoly_alpha_star,
    monopoly_combined,
    one_v_one_Winf,
    symmetric_bundled_equilibrium,
    unbundled_1v1_equilibrium,
)
from spectrum_bundling.market import (
    INFINITE,
    CongestionFunction,
    InvalidConfig,
    Mode,
    make_market,
    symmetric_market,
)
from spectrum_bundling.nash import find_equilibrium

RNG_SEED = 2024
N_RANDOM = 100


def _rng():
    return np.random.default_rng(RNG_SEED)


# ---- examples -------------------------------------------------------------


def test_monopoly_combined_examples():
    assert monopoly_combined(1.0, 1.0).profits[0] == pytest.approx(1 / 6)
    assert monopoly_combined(1.0, 3.0).profits[0] == pytest.approx(0.2)
    assert monopoly_combined(1e12, 1.0).profits[0] == pytest.approx(0.25)


def test_monopoly_combined_against_grid_search():
    x = np.linspace(0.0, 1.0, 200001)
    profit = x * (1.0 - x - x / 4.0)  # price that clears a single band of width 4
    assert monopoly_combined(1.0, 3.0).profits[0] == pytest.approx(profit.max(), abs=1e-9)


def test_monopoly_alpha_star_examples():
    assert monopoly_alpha_star(1.0, 1.0) == 0.5
    assert monopoly_alpha_star(3.0, 1.0) == 0.25
    assert monopoly_alpha_star(1.0, 1e-12) == pytest.approx(0.0)


def test_bundled_monopoly_reaches_combined_at_alpha_star():
    for B, W in [(1.0, 1.0), (3.0, 1.0), (0.5, 2.0)]:
        a = monopoly_alpha_star(B, W)
        assert bundled_monopoly(B, W, a).profits[0] == pytest.approx(monopoly_combined(B, W).profits[0], abs=1e-14)


def test_exclusive_examples():
    r = exclusive_use_equilibrium(1.0, 1.0)
    assert r.prices == pytest.approx((1 / 3, 1 / 3))
    assert r.masses == pytest.approx((2 / 9, 2 / 9))
    assert r.profits == pytest.approx((2 / 27, 2 / 27))
    assert r.CS == pytest.approx(8 / 81)
    assert r.SW == pytest.approx(20 / 81)
    r = exclusive_use_equilibrium(3.0, 1.0)
    assert r.prices == pytest.approx((9 / 29, 7 / 29))
    r = exclusive_use_equilibrium(2.0, 2.0)
    assert r.prices[0] == pytest.approx(r.prices[1])


def test_unbundled_examples():
    r = unbundled_1v1_equilibrium(1.0, 1.0)
    assert r.masses == pytest.approx((1 / 6, 5 / 12))
    assert r.prices[0] == pytest.approx(0.25)
    assert r.profits[0] == pytest.approx(1 / 24)
    assert r.extras["alpha0"] == pytest.approx(5 / 7)
    small = unbundled_1v1_equilibrium(1.0, 1e-9)
    assert small.masses[1] == pytest.approx(0.0, abs=1e-8)
    assert small.extras["alpha0"] == pytest.approx(0.0, abs=1e-8)
    assert unbundled_1v1_equilibrium(1.0, 1e9).prices[0] == pytest.approx(0.0, abs=1e-8)
    assert unbundled_1v1_equilibrium(1.0, INFINITE).prices[0] == 0.0


def test_symmetric_examples():
    r = symmetric_bundled_equilibrium(2, 2.0, 1.0, 0.0)
    assert r.prices == pytest.approx((1 / 3, 1 / 3))
    assert r.masses == pytest.approx((2 / 9, 2 / 9))
    assert symmetric_bundled_equilibrium(3, 2.0, 1.0, 1.0 - 1e-9).prices[0] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(InvalidConfig):
        symmetric_bundled_equilibrium(2, 2.0, 1.0, 1.0)
    with pytest.raises(InvalidConfig):
        symmetric_bundled_equilibrium(1, 2.0, 1.0, 0.5)


def test_total_mass_expression_reading():
    """The published total-mass expression matches when its B means the total band."""
    for M, B_t, W, a in [(2, 2.0, 1.0, 0.0), (3, 1.0, 4.0, 0.3), (5, 4.0, 0.5, 0.7)]:
        r = symmetric_bundled_equilibrium(M, B_t, W, a)
        assert r.extras["Q_formula_B_total"] == pytest.approx(r.Q, rel=1e-12)
        assert abs(r.extras["Q_formula_B_per_sp"] - r.Q) > 1e-3


def test_one_v_one_limit_examples():
    r = one_v_one_Winf(1.0, 0.0)
    assert r.prices[0] == pytest.approx(1 / 7)
    assert r.masses[0] == pytest.approx(1 / 7)
    assert r.profits[0] == pytest.approx(1 / 49)
    assert one_v_one_Winf(1.0, 1 - math.sqrt(3) / 2).profits[0] == pytest.approx(1 / 48)
    assert one_v_one_Winf(2.0, 0.0).profits[0] == pytest.approx(0.02)
    with pytest.raises(InvalidConfig):
        one_v_one_Winf(1.0, 1.0)


def test_scale_factor_examples():
    assert congestion_scale_factor(1.0, 0.5) == 4.0
    assert congestion_scale_factor(2.0, 0.5) == 8.0
    assert congestion_scale_factor(3.7, 0.0) == 1.0
    with pytest.raises(InvalidConfig):
        congestion_scale_factor(1.0, 1.0)


# ---- oracle against numeric equilibria --------------------------------------


def test_exclusive_oracle_agrees_with_numeric():
    rng = _rng()
    for _ in range(N_RANDOM):
        B, W = rng.uniform(0.2, 5.0, 2)
        cf = exclusive_use_equilibrium(B, W)
        res = find_equilibrium(make_market([B], 1, W, mode=Mode.EXCLUSIVE))
        assert res.converged
        assert res.prices.prices == pytest.approx(cf.prices, abs=1e-6)
        assert res.solution.alloc.masses == pytest.approx(cf.masses, abs=1e-6)


def test_unbundled_oracle_agrees_with_numeric():
    rng = _rng()
    for _ in range(N_RANDOM):
        B, W = rng.uniform(0.2, 5.0, 2)
        cf = unbundled_1v1_equilibrium(B, W)
        config = make_market([B], 1, W, mode=Mode.UNBUNDLED)
        res = find_equilibrium(config)
        assert res.converged
        assert res.prices.prices[0] == pytest.approx(cf.prices[0], abs=1e-6)
        assert res.solution.alloc.masses[0] == pytest.approx(cf.masses[0], abs=1e-6)
        assert res.solution.alloc.unlicensed_load(config) == pytest.approx(cf.masses[1], abs=1e-6)


def test_monopoly_oracles_agree_with_numeric():
    rng = _rng()
    for _ in range(N_RANDOM):
        B, W = rng.uniform(0.2, 5.0, 2)
        a = rng.uniform(0.0, 0.99)
        cf = bundled_monopoly(B, W, a)
        res = find_equilibrium(make_market([B], 0, W, a))
        assert res.prices.prices[0] == pytest.approx(cf.prices[0], abs=1e-6)
        assert res.solution.alloc.masses[0] == pytest.approx(cf.masses[0], abs=1e-6)
        combined = monopoly_combined(B, W)
        res = find_equilibrium(make_market([B], 0, W, mode=Mode.UNBUNDLED))
        assert res.profits[0] == pytest.approx(combined.profits[0], abs=1e-9)
        assert res.solution.alloc.total == pytest.approx(combined.Q, abs=1e-6)


def test_symmetric_oracle_agrees_with_numeric():
    rng = _rng()
    for _ in range(N_RANDOM):
        M = int(rng.integers(2, 6))
        B_t, W = rng.uniform(0.2, 5.0, 2)
        a = rng.uniform(0.0, 0.95)
        cf = symmetric_bundled_equilibrium(M, B_t, W, a)
        res = find_equilibrium(symmetric_market(M, B_t, W, a))
        assert res.converged
        assert res.prices.prices == pytest.approx(cf.prices, abs=1e-6)
        assert res.solution.alloc.masses == pytest.approx(cf.masses, abs=1e-6)


def test_unlimited_W_limit_is_approached():
    rng = _rng()
    for _ in range(20):
        B = rng.uniform(0.2, 4.0)
        a = rng.uniform(0.0, 0.9)
        cf = one_v_one_Winf(B, a)
        res = find_equilibrium(make_market([B], 1, 1e8, a))
        assert res.prices.prices == pytest.approx(cf.prices, abs=1e-5)
        assert res.solution.alloc.masses == pytest.approx(cf.masses, abs=1e-5)


# ---- qualitative statements ---------------------------------------------------


def test_exclusive_beats_unbundled_for_incumbent():
    rng = _rng()
    for _ in range(200):
        B, W = rng.uniform(0.05, 10.0, 2)
        assert exclusive_use_equilibrium(B, W).profits[0] >= unbundled_1v1_equilibrium(B, W).profits[0]


def test_small_alpha_bundling_beats_exclusive_welfare():
    rng = _rng()
    for _ in range(10):
        B, W = rng.uniform(0.3, 4.0, 2)
        excl = exclusive_use_equilibrium(B, W)
        res = find_equilibrium(make_market([B], 1, W, 0.02))
        assert res.welfare.consumer_surplus > excl.CS
        assert res.welfare.social_welfare > excl.SW


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("entrants", [2, 3])
@pytest.mark.parametrize("B,W", [(1.0, 4.0), (1.0, 1.0)])
def test_free_entrants_make_bundling_equal_unbundling(alpha, entrants, B, W):
    cf = unbundled_1v1_equilibrium(B, W)
    res = find_equilibrium(make_market([B], entrants, W, alpha))
    assert res.converged
    if alpha > cf.extras["alpha0"]:
        # the unbundled optimum would need negative entrant traffic; the incumbent instead sits
        # where free entrants just stay out: x1 = 1 / (1 + alpha / W), p1 = 1 - x1 (1 + c)
        c = (1 - alpha) ** 2 / B + alpha**2 / W
        x1 = 1.0 / (1.0 + alpha / W)
        assert res.profits[0] == pytest.approx(x1 * (1.0 - x1 * (1.0 + c)), abs=1e-8)
        assert res.profits[0] < cf.profits[0]
        assert sum(res.solution.alloc.masses[1:]) <= 1e-9
        return
    assert res.profits[0] == pytest.approx(cf.profits[0], abs=1e-6)
    assert res.welfare.social_welfare == pytest.approx(cf.SW, abs=1e-6)


def test_free_entrant_counterexample_value():
    # B = W = 1, alpha = 0.8: boundary allocation x1 = 5/9 gives profit 1/27 instead of 1/24
    res = find_equilibrium(make_market([1.0], 2, 1.0, 0.8))
    assert res.profits[0] == pytest.approx(1 / 27, abs=1e-8)


def test_crossing_around_alpha0():
    B, W = 1.0, 1.0
    cf = unbundled_1v1_equilibrium(B, W)
    a0 = cf.extras["alpha0"]
    at = find_equilibrium(make_market([B], 1, W, a0))
    assert at.profits[0] == pytest.approx(cf.profits[0], abs=1e-5)
    assert at.profits[1] <= 1e-6
    below = find_equilibrium(make_market([B], 1, W, a0 - 0.1))
    assert below.profits[1] > 0
    assert below.profits[0] > cf.profits[0]
    above = find_equilibrium(make_market([B], 1, W, a0 + 0.1))
    assert above.profits[1] <= 1e-6


def test_symmetric_welfare_grows_with_unlicensed_band():
    rows = [symmetric_bundled_equilibrium(3, 2.0, W, 0.4) for W in (0.25, 0.5, 1, 2, 4, 8, 16)]
    for attr in ("CS", "SW"):
        values = [getattr(r, attr) for r in rows]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
    profits = [r.profits[0] for r in rows]
    assert all(b >= a - 1e-12 for a, b in zip(profits, profits[1:]))


@pytest.mark.parametrize("power", [1.0, 2.0])
def test_band_expansion_matches_bundled_market(power):
    g = CongestionFunction.power_law(1.0, power)
    config = make_market([1.0, 2.0], 0, 1e8, 0.5, congestion=g)
    equiv = band_expansion_equivalent(config)
    factor = congestion_scale_factor(power, 0.5)
    assert [p.bandwidth for p in equiv.providers] == pytest.approx([factor ** (1 / power), 2 * factor ** (1 / power)])
    assert equiv.alpha == 0.0
    a = find_equilibrium(config)
    b = find_equilibrium(equiv)
    assert a.prices.prices == pytest.approx(b.prices.prices, abs=1e-4)
    assert a.solution.alloc.masses == pytest.approx(b.solution.alloc.masses, abs=1e-4)


def test_band_expansion_rejects_entrants():
    with pytest.raises(InvalidConfig):
        band_expansion_equivalent(make_market([1.0], 1, INFINITE, 0.5))
