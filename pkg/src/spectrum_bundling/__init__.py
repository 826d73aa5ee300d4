"""Equilibrium engine for bundling licensed and unlicensed wireless spectrum.

Customers split across providers by a Wardrop equilibrium; providers set
prices in a Nash equilibrium on top of it; the bundling fraction alpha can be
chosen in an outer stage.
"""

from .alpha import (
    AlphaResult,
    compute_B_threshold,
    locate_alpha0,
    one_v_one_alpha_star_Winf,
    optimize_alpha,
    profit_optimal_alpha_Winf,
    welfare_gap,
)
from .closed_form import (
    ClosedFormResult,
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
from .experiments import ScenarioSpec, bundled_scenarios, load_spec, run_sweep
from .market import (
    INFINITE,
    Allocation,
    CongestionFunction,
    InvalidConfig,
    InverseDemand,
    MarketConfig,
    Mode,
    PriceProfile,
    Provider,
    Role,
    WelfareReport,
    consumer_surplus,
    delivered_price,
    is_infinite,
    make_market,
    symmetric_market,
    welfare_report,
)
from .nash import (
    EquilibriumResult,
    best_response,
    check_supermodularity,
    find_equilibrium,
    supermodularity_matrix,
    verify_equilibrium,
)
from .wardrop import (
    WardropConvergenceError,
    WardropSolution,
    price_sensitivity,
    solve_wardrop,
    wardrop_linear_direct,
)

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "AlphaResult",
    "band_expansion_equivalent",
    "best_response",
    "bundled_monopoly",
    "bundled_scenarios",
    "check_supermodularity",
    "ClosedFormResult",
    "compute_B_threshold",
    "congestion_scale_factor",
    "CongestionFunction",
    "consumer_surplus",
    "delivered_price",
    "EquilibriumResult",
    "exclusive_use_equilibrium",
    "find_equilibrium",
    "INFINITE",
    "InvalidConfig",
    "InverseDemand",
    "is_infinite",
    "load_spec",
    "locate_alpha0",
    "make_market",
    "MarketConfig",
    "Mode",
    "monopoly_alpha_star",
    "monopoly_combined",
    "one_v_one_alpha_star_Winf",
    "one_v_one_Winf",
    "optimize_alpha",
    "price_sensitivity",
    "PriceProfile",
    "profit_optimal_alpha_Winf",
    "Provider",
    "Role",
    "run_sweep",
    "ScenarioSpec",
    "solve_wardrop",
    "supermodularity_matrix",
    "symmetric_bundled_equilibrium",
    "symmetric_market",
    "unbundled_1v1_equilibrium",
    "verify_equilibrium",
    "wardrop_linear_direct",
    "WardropConvergenceError",
    "WardropSolution",
    "welfare_gap",
    "welfare_report",
    "WelfareReport",
]
