"""Who should pick alpha? Profit-seeking incumbents versus a welfare planner.

With several symmetric incumbents the bundling fraction can be chosen before
prices are set. Incumbents pick the alpha that maximizes their own profit; a
planner would pick the alpha that maximizes social welfare. This script
shows both choices and the welfare lost between them.

Run:  python3 demos/choosing_alpha.py
"""

from spectrum_bundling import (
    INFINITE,
    compute_B_threshold,
    optimize_alpha,
    profit_optimal_alpha_Winf,
    symmetric_market,
    welfare_gap,
)

print("Licensed-band threshold above which profit-seeking incumbents stop bundling")
print("(unlimited unlicensed band):")
for M in (2, 3, 5, 10, 100, INFINITE):
    label = "inf" if M is INFINITE else M
    print(f"  M = {label:>4}: B_th = {compute_B_threshold(M):.5f}")

print("\nProfit-optimal alpha with an unlimited unlicensed band, M = 4:")
for B_t in (0.5, 1.0, 2.0, 3.0, 4.0):
    r = profit_optimal_alpha_Winf(4, B_t)
    print(f"  B_t = {B_t}: alpha* = {r.alpha_star:.4f}, price {r.details['p']:.4f}, welfare {r.details['SW']:.4f}")

print("\nFinite unlicensed band, M = 2, B_t = 1, W = 2 (numeric search over alpha):")
template = symmetric_market(2, 1.0, 2.0, 0.0)
for objective in ("profit", "welfare"):
    r = optimize_alpha(template, objective, grid_points=51)
    print(f"  maximize {objective:<7}: alpha* = {r.alpha_star:.4f}, value {r.value:.5f}")
gap, parts = welfare_gap(M=2, B_t=1.0, W=2.0, return_parts=True)
print(f"  welfare lost when incumbents choose: {gap:.5f}")

print("\nMany incumbents and an unlimited unlicensed band: gap = 1 / (2 + max(2, B_t))")
for B_t in (0.5, 1.0, 2.0, 4.0, 8.0):
    print(f"  B_t = {B_t}: gap = {welfare_gap(M=INFINITE, B_t=B_t, W=INFINITE):.5f}")
