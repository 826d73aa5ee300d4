"""Write the CSV data behind every bundled figure scenario.

Each scenario file in the package sweeps one parameter and records prices,
customer masses, profits, consumer surplus and welfare (or optimal alpha and
welfare gaps). Output is byte-identical across runs.

Run:  python3 demos/reproduce_figures.py [output_dir] [--quick]

``--quick`` skips the alpha-optimization scenarios (several minutes in total).
"""

import sys
import time
from pathlib import Path

from spectrum_bundling import bundled_scenarios, is_infinite, run_sweep

args = [a for a in sys.argv[1:] if not a.startswith("--")]
quick = "--quick" in sys.argv
out_dir = Path(args[0] if args else "figure_data")
out_dir.mkdir(parents=True, exist_ok=True)

for name, spec in bundled_scenarios().items():
    needs_alpha_search = spec.optimize or (spec.welfare_gap and not is_infinite(spec.W_value))
    if quick and needs_alpha_search:
        print(f"skip  {name}")
        continue
    t0 = time.perf_counter()
    text = run_sweep(spec, out_dir / spec.output)
    statuses = sorted({line.split(",")[1] for line in text.splitlines()[1:]})
    print(f"wrote {out_dir / spec.output}  ({time.perf_counter() - t0:.1f} s, status {'/'.join(statuses)})")
