import math

import numpy as np
import pytest

from spectrum_bundling.alpha import (
    ALPHA_MAX,
    EquilibriumCache,
    compute_B_threshold,
    locate_alpha0,
    one_v_one_alpha_star_Winf,
    optimize_alpha,
    profit_optimal_alpha_Winf,
    welfare_gap,
)
from spectrum_bundling.closed_form import unbundled_1v1_equilibrium
from spectrum_bundling.market import INFINITE, InvalidConfig, Mode, make_market, symmetric_market
from spectrum_bundling.nash import find_equilibrium
from spectrum_bundling.wardrop import WardropConvergenceError

COARSE = 41  # grid for tests that only need the location of a smooth optimum


def _cubic_root(M):
    t = (M - 1) / M
    roots = np.roots([-2.0, -3.0 * t, 0.0, t * t])
    real = [r.real for r in roots if abs(r.imag) < 1e-12 and t / 2 - 1e-12 <= r.real <= 0.5 + 1e-12]
    assert len(real) == 1
    return real[0]


@pytest.mark.parametrize("M", [2, 3, 5, 10, 100])
def test_threshold_against_polynomial_roots(M):
    assert compute_B_threshold(M) == pytest.approx(1.0 / _cubic_root(M), rel=1e-10)


def test_threshold_examples():
    assert compute_B_threshold(INFINITE) == 2.0
    assert compute_B_threshold(2) == pytest.approx(2.951373, abs=1e-6)
    values = [compute_B_threshold(M) for M in (2, 4, 8, 16, 64, 1024)]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(2.0, abs=5e-3)
    with pytest.raises(InvalidConfig):
        compute_B_threshold(1)


def test_profit_optimal_alpha_examples():
    r = profit_optimal_alpha_Winf(INFINITE, 1.0)
    assert r.alpha_star == pytest.approx(1 - math.sqrt(0.5))
    assert r.details["p"] == pytest.approx(0.25)
    assert profit_optimal_alpha_Winf(INFINITE, 3.0).alpha_star == 0.0
    for M in (2, 5, INFINITE):
        assert profit_optimal_alpha_Winf(M, compute_B_threshold(M)).alpha_star == pytest.approx(0.0, abs=1e-15)


def test_profit_optimal_price_is_continuous_at_threshold():
    for M in (2, 5, 50):
        B_th = compute_B_threshold(M)
        lo = profit_optimal_alpha_Winf(M, B_th * (1 - 1e-9)).details
        hi = profit_optimal_alpha_Winf(M, B_th * (1 + 1e-9)).details
        assert lo["p"] == pytest.approx(hi["p"], abs=1e-7)
        assert lo["Q"] == pytest.approx(hi["Q"], abs=1e-7)


def test_one_v_one_alpha_examples():
    assert one_v_one_alpha_star_Winf(1.0) == pytest.approx(1 - math.sqrt(3) / 2)
    assert one_v_one_alpha_star_Winf(2.0) == 0.0


def test_gap_closed_forms():
    assert welfare_gap(INFINITE, 1.0, INFINITE) == pytest.approx(0.25)
    assert welfare_gap(INFINITE, 4.0, INFINITE) == pytest.approx(1 / 6)
    assert welfare_gap(INFINITE, 2.0, INFINITE) == pytest.approx(0.25)
    for b in (0.5, 1.0, 2.0, 4.0):
        assert welfare_gap(M=INFINITE, B_t=b, W=INFINITE) == 1.0 / (2.0 + max(2.0, b))


def test_gap_limit_matches_large_M_closed_form():
    # finite M with unlimited W approaches the double limit
    for b in (1.0, 4.0):
        assert welfare_gap(10**6, b, INFINITE) == pytest.approx(welfare_gap(INFINITE, b, INFINITE), abs=1e-5)


def test_gap_rejects_unlimited_M_with_finite_W():
    with pytest.raises(InvalidConfig):
        welfare_gap(INFINITE, 1.0, 5.0)


@pytest.mark.parametrize("M,B_t", [(2, 1.0), (3, 2.0), (4, 4.0)])
def test_closed_form_alpha_matches_numeric_search(M, B_t):
    template = symmetric_market(M, B_t, 1e8, 0.0)
    numeric = optimize_alpha(template, "profit", grid_points=COARSE)
    closed = profit_optimal_alpha_Winf(M, B_t)
    assert numeric.alpha_star == pytest.approx(closed.alpha_star, abs=5e-3)
    assert numeric.value == pytest.approx(closed.value, abs=1e-6)


@pytest.mark.parametrize("B_t,direction", [(1.0, -1), (4.0, +1)])
def test_welfare_at_profit_optimum_moves_with_M(B_t, direction):
    sw = []
    for M in (2, 4, 8, 16):
        a = profit_optimal_alpha_Winf(M, B_t).alpha_star
        numeric = find_equilibrium(symmetric_market(M, B_t, 1e6, a)).welfare.social_welfare
        sw.append(numeric)
        assert numeric == pytest.approx(profit_optimal_alpha_Winf(M, B_t).details["SW"], abs=1e-5)
    steps = np.diff(sw) * direction
    assert np.all(steps > 0)


def test_welfare_objective_pushes_alpha_to_one():
    res = optimize_alpha(symmetric_market(3, 2.0, 1e6, 0.0), "welfare", grid_points=COARSE)
    assert res.alpha_star >= 1 - 1e-3
    assert res.value == pytest.approx(0.5, abs=1e-4)


def test_alpha_result_invariants():
    res = optimize_alpha(make_market([1.0], 1, 1.0, 0.0), "profit", grid_points=COARSE)
    assert 0.0 <= res.alpha_star <= 1.0
    assert all(res.value >= v - 1e-9 for _, v in res.curve)
    assert len(res.curve) == COARSE
    assert res.curve[0][0] == 0.0 and res.curve[-1][0] == ALPHA_MAX
    assert res.failures == ()


def test_one_v_one_profit_optimum_at_large_W():
    res = optimize_alpha(make_market([1.0], 1, 1e6, 0.0), "profit", grid_points=COARSE)
    assert res.alpha_star == pytest.approx(1 - math.sqrt(3) / 2, abs=1e-3)
    assert res.value == pytest.approx(1 / 48, abs=1e-4)


def test_failed_inner_equilibria_are_recorded_and_skipped():
    def flaky(config):
        if 0.4 < config.alpha < 0.6:
            raise WardropConvergenceError("injected", None)
        return find_equilibrium(config)

    template = make_market([1.0], 0, 1.0, 0.0)
    res = optimize_alpha(template, "profit", EquilibriumCache(template, flaky), grid_points=COARSE)
    assert res.failures
    assert all(0.4 < a < 0.6 for a, _ in res.failures)
    # the bundled monopoly is best at alpha = W / (B + W) = 0.5, which is now excluded
    assert not 0.4 < res.alpha_star < 0.6


def test_optimizer_rejects_unusable_templates():
    with pytest.raises(InvalidConfig):
        optimize_alpha(make_market([1.0], 1, INFINITE, 0.0))
    with pytest.raises(InvalidConfig):
        optimize_alpha(make_market([1.0], 1, 1.0, mode=Mode.UNBUNDLED))
    with pytest.raises(ValueError):
        optimize_alpha(make_market([1.0], 1, 1.0), "revenue")


def test_cache_reuses_equilibria():
    calls = []

    def counting(config):
        calls.append(config.alpha)
        return find_equilibrium(config)

    cache = EquilibriumCache(make_market([1.0], 1, 1.0, 0.0), counting)
    cache(0.3)
    cache(0.3)
    assert calls == [0.3]
    assert len(cache) == 1


def test_locate_alpha0_matches_closed_form():
    cf = unbundled_1v1_equilibrium(1.0, 1.0)
    a0 = locate_alpha0(make_market([1.0], 1, 1.0, 0.0), cf.profits[0], tol=1e-7)
    # past alpha0 the incumbent's profit stays flat for a stretch, so bisection finds its far edge
    assert a0 >= cf.extras["alpha0"] - 1e-6


def test_locate_alpha0_for_several_incumbents():
    template = make_market([1.0, 1.0], 1, 1.0, 0.0)
    baseline = find_equilibrium(make_market([1.0, 1.0], 1, 1.0, mode=Mode.UNBUNDLED)).profits[0]
    a0 = locate_alpha0(template, baseline, tol=1e-6)
    assert a0 is not None and 0.0 < a0 < 1.0
