import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from spectrum_bundling.market import (
    Allocation,
    CongestionFunction,
    Mode,
    PriceProfile,
    delivered_price,
    make_market,
    symmetric_market,
)
from spectrum_bundling.wardrop import (
    TOL_RESIDUAL,
    check_solution,
    mass_response,
    price_sensitivity,
    solve_wardrop,
    wardrop_linear_direct,
)


def test_single_incumbent_half_bundled():
    config = make_market([1.0], 0, 1.0, 0.5)
    sol = solve_wardrop(config, PriceProfile((0.25,)))
    assert sol.alloc.masses[0] == pytest.approx(0.5, abs=1e-10)
    assert sol.delivered == pytest.approx(0.5, abs=1e-10)


@pytest.mark.parametrize("mode", list(Mode))
def test_prices_at_choke_give_no_traffic(mode):
    config = make_market([1.0, 2.0] if mode is not Mode.EXCLUSIVE else [1.0], 1, 1.0, 0.3, mode=mode)
    unl = (1.0,) * config.n if mode is Mode.UNBUNDLED else None
    sol = solve_wardrop(config, PriceProfile((1.0,) * config.n, unl))
    assert sol.alloc.total == pytest.approx(0.0, abs=1e-12)


def test_unbundled_one_vs_one():
    config = make_market([1.0], 0, 1.0, mode=Mode.UNBUNDLED)
    sol = solve_wardrop(config, PriceProfile((0.25,), (0.0,)))
    assert sol.alloc.masses[0] == pytest.approx(1 / 6, abs=1e-10)
    assert sol.alloc.unlicensed[0] == pytest.approx(5 / 12, abs=1e-10)
    assert sol.delivered == pytest.approx(5 / 12, abs=1e-10)


def test_linear_direct_two_incumbents():
    config = symmetric_market(2, 2.0, 1.0, 0.0)
    sol = wardrop_linear_direct(config, PriceProfile((1 / 3, 1 / 3)))
    assert sol.alloc.masses == pytest.approx((2 / 9, 2 / 9), abs=1e-14)


def test_linear_direct_drops_choked_provider():
    config = make_market([1.0, 1.0], 0, 1.0, 0.2)
    sol = wardrop_linear_direct(config, PriceProfile((1.0, 0.2)))
    assert sol.alloc.masses[0] == 0.0
    assert sol.alloc.masses[1] > 0.0
    assert sol.max_residual <= TOL_RESIDUAL


random_market = st.builds(
    lambda B, N, W, alpha, mode, prices, uprices: (B, N, W, alpha, mode, prices, uprices),
    st.lists(st.floats(0.2, 4.0), min_size=1, max_size=3),
    st.integers(0, 2),
    st.floats(0.2, 6.0),
    # alpha within rounding of 1 is numerically singular; exactly 1 is well posed
    st.one_of(st.floats(0.0, 0.999), st.just(1.0)),
    st.sampled_from(list(Mode)),
    st.lists(st.floats(0.0, 1.0), min_size=5, max_size=5),
    st.lists(st.floats(0.0, 0.5), min_size=5, max_size=5),
)


def _build(case):
    B, N, W, alpha, mode, prices, uprices = case
    if mode is Mode.EXCLUSIVE:
        B, N = B[:1], 1
    config = make_market(B, N, W, alpha, mode=mode)
    unl = tuple(uprices[: config.n]) if mode is Mode.UNBUNDLED else None
    return config, PriceProfile(tuple(prices[: config.n]), unl)


@given(random_market)
@settings(max_examples=150, deadline=None)
def test_complementarity_and_direct_agreement(case):
    config, prices = _build(case)
    sol = solve_wardrop(config, prices)
    assert sol.max_residual <= 1e-9
    # residuals are recomputed from the delivered-price formulas, independent of the solver
    again = check_solution(config, prices, sol.alloc)
    assert again.max_residual <= 1e-9
    direct = wardrop_linear_direct(config, prices)
    assert np.allclose(direct.alloc.masses, sol.alloc.masses, atol=1e-8)
    if config.mode is Mode.UNBUNDLED:
        # only the unlicensed total is unique when several providers price the shared band equally
        assert direct.alloc.unlicensed_load(config) == pytest.approx(sol.alloc.unlicensed_load(config), abs=1e-8)


@given(random_market, st.integers(0, 4), st.floats(0.01, 0.2))
@settings(max_examples=80, deadline=None)
def test_raising_own_price_moves_traffic_away(case, who, step):
    config, prices = _build(case)
    i = who % config.n
    if config.mode is Mode.UNBUNDLED and not config.providers[i].is_incumbent:
        return
    base = wardrop_linear_direct(config, prices).alloc
    raised = list(prices.prices)
    raised[i] = min(1.0, raised[i] + step)
    after = wardrop_linear_direct(config, PriceProfile(tuple(raised), prices.unlicensed)).alloc
    assert after.masses[i] <= base.masses[i] + 1e-10
    for j in range(config.n):
        if j != i:
            assert after.provider_mass(j) >= base.provider_mass(j) - 1e-10


def test_power_congestion_against_root_finder():
    g = CongestionFunction.power_law(1.0, 2.0)
    config = make_market([1.5], 0, 2.0, 0.4, congestion=g)
    p = 0.2
    sol = solve_wardrop(config, PriceProfile((p,)))

    def excess(x):
        return p + 0.6 * g(0.6 * x / 1.5) + 0.4 * g(0.4 * x / 2.0) - (1.0 - x)

    assert sol.alloc.masses[0] == pytest.approx(brentq(excess, 0.0, 1.0, xtol=1e-15), abs=1e-10)


def test_starting_point_does_not_matter():
    config = make_market([1.0, 2.0], 1, 1.5, 0.6)
    prices = PriceProfile((0.2, 0.3, 0.1))
    response = mass_response(config, prices, 0)
    # a different path (sweeping the price up from zero) must land on the same allocation
    for v in np.linspace(0.0, 0.2, 9):
        response(v)
    warm = response(0.2)
    cold = solve_wardrop(config, prices).alloc
    assert warm[0] == pytest.approx(cold.masses[0], abs=1e-8)


def test_price_sensitivity_single_incumbent():
    config = make_market([1.0], 0, 1.0, 0.0)
    prices = PriceProfile((0.3,))
    sol = solve_wardrop(config, prices)
    assert price_sensitivity(config, prices, sol, 0) == pytest.approx(-0.5)


def test_price_sensitivity_matches_finite_difference():
    config = symmetric_market(2, 2.0, 1.0, 0.0)
    prices = PriceProfile((1 / 3, 1 / 3))
    sol = solve_wardrop(config, prices)
    h = 1e-5
    up = solve_wardrop(config, PriceProfile((1 / 3 + h, 1 / 3))).alloc.masses[0]
    down = solve_wardrop(config, PriceProfile((1 / 3 - h, 1 / 3))).alloc.masses[0]
    assert price_sensitivity(config, prices, sol, 0) == pytest.approx((up - down) / (2 * h), abs=1e-5)


@given(random_market, st.integers(0, 4))
@settings(max_examples=60, deadline=None)
def test_price_sensitivity_is_negative(case, who):
    config, prices = _build(case)
    sol = solve_wardrop(config, prices)
    i = who % config.n
    if sol.alloc.masses[i] <= 1e-8:
        with pytest.raises(ValueError):
            price_sensitivity(config, prices, sol, i)
        return
    if config.mode is Mode.BUNDLED and _shared_only(config, i):
        rivals = [j for j in range(config.n) if j != i and _shared_only(config, j)]
        if any(prices.prices[j] == prices.prices[i] for j in rivals):
            with pytest.raises(ValueError):
                price_sensitivity(config, prices, sol, i)
            return
    assert price_sensitivity(config, prices, sol, i) < 0


def _shared_only(config, j):
    return not config.providers[j].is_incumbent or config.alpha == 1.0


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("entrants", [2, 3])
def test_bundling_with_free_entrants_maps_to_unbundled(alpha, entrants):
    B, W, p = 1.3, 1.7, 0.15
    bundled = make_market([B], entrants, W, alpha)
    sol = solve_wardrop(bundled, PriceProfile((p,) + (0.0,) * entrants)).alloc
    unb = make_market([B], 0, W, mode=Mode.UNBUNDLED)
    ref = solve_wardrop(unb, PriceProfile((p / (1 - alpha),), (0.0,))).alloc
    x1 = sol.masses[0]
    assert (1 - alpha) * x1 == pytest.approx(ref.masses[0], abs=1e-9)
    assert alpha * x1 + sum(sol.masses[1:]) == pytest.approx(ref.unlicensed[0], abs=1e-9)


def test_ties_are_reported():
    config = make_market([1.0], 1, 1.0, mode=Mode.EXCLUSIVE)
    # the entrant sits exactly at the delivered price with no traffic
    sol = solve_wardrop(config, PriceProfile((0.0, 0.5)))
    d = delivered_price(config, PriceProfile((0.0, 0.5)), sol.alloc, 1)
    assert sol.alloc.masses[1] <= 1e-10
    assert d == pytest.approx(sol.delivered)
    assert 1 in sol.ties
    assert isinstance(sol.alloc, Allocation)
