"""Scenario files and parameter sweeps that emit plot-ready CSV.

A scenario is one JSON document. Three kinds of sweep are supported:

* plain: solve the pricing equilibrium at each point (optionally with
  unbundled / exclusive-use baselines);
* optimize: choose alpha for profit and/or welfare at each point;
* welfare gap: gap between the two optima for several market sizes ``M``.

Rows are written in sweep order, numbers with 12 significant digits, so
repeated runs produce byte-identical files.
"""

from __future__ import annotations

import io
import json
import logging
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from . import closed_form as cf
from .alpha import EquilibriumCache, optimize_alpha, welfare_gap
from .market import INFINITE, InvalidConfig, MarketConfig, Mode, is_infinite, make_market
from .nash import find_equilibrium
from .wardrop import WardropConvergenceError

log = logging.getLogger(__name__)

SWEEP_VARIABLES = ("alpha", "W", "B_t", "M")
BASELINES = ("unbundled", "exclusive")
OBJECTIVES = ("profit", "welfare")


@dataclass(frozen=True)
class Sweep:
    variable: str
    start: float
    stop: float
    step: float

    def points(self) -> List[float]:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [float(f"{self.start + k * self.step:.12g}") for k in range(count)]


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    sweep: Sweep
    mode: str = "bundled"
    M: int = 1
    N: int = 0
    B: Optional[Tuple[float, ...]] = None
    B_t: Optional[float] = None
    W: Union[float, str] = 1.0
    alpha: float = 0.0
    baselines: Tuple[str, ...] = ()
    optimize: Tuple[str, ...] = ()
    welfare_gap: bool = False
    M_values: Tuple[int, ...] = ()
    output: Optional[str] = None

    @classmethod
    def from_dict(cls, data: Dict) -> "ScenarioSpec":
        data = dict(data)
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise InvalidConfig(f"unknown scenario fields: {sorted(unknown)}")
        sweep = data.pop("sweep", None)
        if not isinstance(sweep, dict):
            raise InvalidConfig("scenario needs a 'sweep' object")
        data["sweep"] = Sweep(
            str(sweep["variable"]), float(sweep["start"]), float(sweep["stop"]), float(sweep["step"])
        )
        for key in ("B", "baselines", "optimize", "M_values"):
            if data.get(key) is not None:
                data[key] = tuple(data[key])
        spec = cls(**data)
        spec.validate()
        return spec

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "ScenarioSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @property
    def W_value(self):
        return _parse_W(self.W)

    def validate(self) -> None:
        s = self.sweep
        if s.variable not in SWEEP_VARIABLES:
            raise InvalidConfig(f"sweep variable must be one of {SWEEP_VARIABLES}, got {s.variable!r}")
        if not s.step > 0 or s.stop < s.start:
            raise InvalidConfig("sweep needs step > 0 and stop >= start")
        Mode(self.mode)
        _parse_W(self.W)
        if self.B is not None and self.B_t is not None:
            raise InvalidConfig("give either B (per incumbent) or B_t (symmetric total), not both")
        if self.B is not None and len(self.B) != self.M:
            raise InvalidConfig("len(B) must equal M")
        if s.variable == "B_t" and self.B is not None:
            raise InvalidConfig("sweeping B_t needs a symmetric market (B_t, not B)")
        if s.variable == "alpha" and not (0.0 <= s.start and s.stop <= 1.0):
            raise InvalidConfig("alpha sweep must stay within [0, 1]")
        if s.variable in ("W", "B_t") and not s.start > 0:
            raise InvalidConfig(f"{s.variable} sweep must stay positive")
        if s.variable == "M" and not s.start >= 1:
            raise InvalidConfig("M sweep must start at 1 or more")
        if s.variable == "M" and not self.optimize:
            raise InvalidConfig("sweeping M is only supported for alpha optimization")
        bad = set(self.baselines) - set(BASELINES)
        if bad:
            raise InvalidConfig(f"unknown baselines {sorted(bad)}")
        bad = set(self.optimize) - set(OBJECTIVES)
        if bad:
            raise InvalidConfig(f"unknown objectives {sorted(bad)}")
        if self.welfare_gap and not self.M_values:
            raise InvalidConfig("welfare_gap scenarios need M_values")
        if (self.optimize or self.welfare_gap) and s.variable == "alpha":
            raise InvalidConfig("alpha cannot be swept when it is being optimized")
        if "exclusive" in self.baselines and self.N != 1:
            raise InvalidConfig("exclusive-use baseline needs exactly one entrant")


def _parse_W(W):
    if is_infinite(W) or (isinstance(W, str) and W.lower() in ("inf", "infinity")):
        return INFINITE
    try:
        W = float(W)
    except (TypeError, ValueError):
        raise InvalidConfig(f"W must be positive or 'inf', got {W!r}") from None
    if not W > 0:
        raise InvalidConfig(f"W must be positive or 'inf', got {W}")
    return W


def load_spec(path: Union[str, Path]) -> ScenarioSpec:
    return ScenarioSpec.from_json(path)


def bundled_scenarios() -> Dict[str, ScenarioSpec]:
    """The figure scenarios shipped with the package, keyed by name."""
    out = {}
    folder = resources.files("spectrum_bundling") / "scenarios"
    for entry in sorted(folder.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            spec = ScenarioSpec.from_dict(json.loads(entry.read_text(encoding="utf-8")))
            out[spec.name] = spec
    return out


# --------------------------------------------------------------------------- formatting


def fmt(value) -> str:
    if isinstance(value, str):
        return value
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    value = float(value)
    if value == 0.0:
        value = 0.0  # drop the sign of negative zero
    return format(value, ".12g")


def _write(header: Sequence[str], rows: Sequence[Dict[str, object]]) -> str:
    buf = io.StringIO(newline="")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(row.get(col)) for col in header) + "\n")
    return buf.getvalue()


# --------------------------------------------------------------------------- market building


def _point_params(spec: ScenarioSpec, value: float) -> Dict[str, object]:
    params = {"M": spec.M, "B": spec.B, "B_t": spec.B_t, "W": spec.W_value, "alpha": spec.alpha}
    var = spec.sweep.variable
    if var == "M":
        params["M"] = int(round(value))
    elif var == "W":
        params["W"] = value
    else:
        params[var] = value
    return params


def _market(spec: ScenarioSpec, params: Dict[str, object], mode: Optional[str] = None) -> MarketConfig:
    M = params["M"]
    if params["B"] is not None:
        B = list(params["B"])
    else:
        B_t = params["B_t"] if params["B_t"] is not None else 1.0
        B = [B_t / M] * M
    return make_market(B, spec.N, params["W"], params["alpha"], mode=mode or spec.mode)


def _n_providers(spec: ScenarioSpec) -> int:
    if spec.sweep.variable == "M":
        raise InvalidConfig("per-provider columns need a fixed M")
    return spec.M + spec.N


# --------------------------------------------------------------------------- plain sweeps


def _plain_header(spec: ScenarioSpec) -> List[str]:
    n = _n_providers(spec)
    cols = [spec.sweep.variable, "status"]
    cols += [f"price_{i}" for i in range(n)]
    if spec.mode == "unbundled":
        cols += [f"price_u_{i}" for i in range(n)]
    cols += [f"mass_{i}" for i in range(n)]
    if spec.mode == "unbundled":
        cols += [f"mass_u_{i}" for i in range(n)]
    cols += [f"profit_{i}" for i in range(n)]
    cols += ["Q", "CS", "SW", "eps_ne"]
    for b in spec.baselines:
        cols += [f"{b}_profit_0", f"{b}_Q", f"{b}_CS", f"{b}_SW"]
    return cols


def _equilibrium_row(config: MarketConfig) -> Dict[str, object]:
    res = find_equilibrium(config)
    alloc = res.solution.alloc
    row: Dict[str, object] = {"status": "ok" if res.converged else "not_converged"}
    for i in range(config.n):
        row[f"price_{i}"] = res.prices.prices[i]
        row[f"mass_{i}"] = alloc.masses[i]
        row[f"profit_{i}"] = res.profits[i]
        if res.prices.unlicensed is not None:
            row[f"price_u_{i}"] = res.prices.unlicensed[i]
            row[f"mass_u_{i}"] = alloc.unlicensed[i]
    row.update(Q=res.welfare.total_mass, CS=res.welfare.consumer_surplus, SW=res.welfare.social_welfare)
    row["eps_ne"] = res.eps_ne
    return row


def _closed_form_row(config: MarketConfig) -> Dict[str, object]:
    """Unlimited W: only the closed-form families are available."""
    inc, ent = config.incumbents, config.entrants
    if config.mode is Mode.BUNDLED and len(inc) == 1 and len(ent) == 1 and config.alpha < 1.0:
        r = cf.one_v_one_Winf(inc[0].bandwidth, config.alpha)
    elif config.mode is Mode.EXCLUSIVE and len(inc) == 1:
        r = cf.exclusive_use_equilibrium(inc[0].bandwidth, INFINITE)
    elif config.mode is Mode.UNBUNDLED and len(inc) == 1 and len(ent) == 1:
        r = cf.unbundled_1v1_equilibrium(inc[0].bandwidth, INFINITE)
    elif (
        config.mode is Mode.BUNDLED and not ent and len(inc) >= 2 and config.alpha < 1.0
        and len({p.bandwidth for p in inc}) == 1
    ):
        r = cf.symmetric_bundled_equilibrium(len(inc), sum(p.bandwidth for p in inc), INFINITE, config.alpha)
    else:
        return {"status": "unsupported_unlimited_W"}
    row: Dict[str, object] = {"status": "closed_form"}
    if config.mode is Mode.UNBUNDLED:
        # masses are (licensed, free band); the free band splits evenly, as price ties do
        for i in range(config.n):
            row[f"price_{i}"] = r.prices[0] if i == 0 else 0.0
            row[f"price_u_{i}"] = 0.0
            row[f"mass_{i}"] = r.masses[0] if i == 0 else 0.0
            row[f"mass_u_{i}"] = r.masses[1] / config.n
            row[f"profit_{i}"] = r.profits[0] if i == 0 else 0.0
    else:
        for i in range(config.n):
            row[f"price_{i}"] = r.prices[i]
            row[f"mass_{i}"] = r.masses[i]
            row[f"profit_{i}"] = r.profits[i]
    row.update(Q=r.Q, CS=r.CS, SW=r.SW, eps_ne=float("nan"))
    return row


def _solve_row(config: MarketConfig) -> Dict[str, object]:
    try:
        if is_infinite(config.W):
            return _closed_form_row(config)
        return _equilibrium_row(config)
    except (WardropConvergenceError, InvalidConfig, FloatingPointError) as exc:
        log.warning("solver failure at %s: %s", config, exc)
        return {"status": f"error_{type(exc).__name__}"}


def _baseline(spec, params, name, memo) -> Dict[str, object]:
    config = _market(spec, params, mode=name).with_alpha(0.0)
    key = (name, config)
    if key not in memo:
        row = _solve_row(config)
        memo[key] = {
            f"{name}_profit_0": row.get("profit_0"),
            f"{name}_Q": row.get("Q"),
            f"{name}_CS": row.get("CS"),
            f"{name}_SW": row.get("SW"),
        }
    return memo[key]


def _plain_rows(spec: ScenarioSpec):
    memo: Dict[tuple, Dict[str, object]] = {}
    for value in spec.sweep.points():
        params = _point_params(spec, value)
        row = {spec.sweep.variable: value}
        try:
            row.update(_solve_row(_market(spec, params)))
        except InvalidConfig as exc:
            row["status"] = f"error_{type(exc).__name__}"
        for b in spec.baselines:
            row.update(_baseline(spec, params, b, memo))
        yield row


# --------------------------------------------------------------------------- optimize sweeps


def _optimize_header(spec: ScenarioSpec) -> List[str]:
    cols = [spec.sweep.variable, "status"]
    for obj in spec.optimize:
        cols += [f"alpha_{obj}", f"profit_0_{obj}", f"Q_{obj}", f"CS_{obj}", f"SW_{obj}"]
    for b in spec.baselines:
        cols += [f"{b}_profit_0", f"{b}_Q", f"{b}_CS", f"{b}_SW"]
    return cols


def _optimize_rows(spec: ScenarioSpec):
    memo: Dict[tuple, Dict[str, object]] = {}
    for value in spec.sweep.points():
        params = _point_params(spec, value)
        row: Dict[str, object] = {spec.sweep.variable: value, "status": "ok"}
        try:
            template = _market(spec, params)
            if is_infinite(template.W):
                raise InvalidConfig("alpha optimization at unlimited W is closed-form only")
            cache = EquilibriumCache(template)
            for obj in spec.optimize:
                res = optimize_alpha(template, obj, cache)
                eq = cache(res.alpha_star)
                row[f"alpha_{obj}"] = res.alpha_star
                row[f"profit_0_{obj}"] = eq.profits[0]
                row[f"Q_{obj}"] = eq.welfare.total_mass
                row[f"CS_{obj}"] = eq.welfare.consumer_surplus
                row[f"SW_{obj}"] = eq.welfare.social_welfare
                if res.failures:
                    row["status"] = "partial"
        except (WardropConvergenceError, InvalidConfig, FloatingPointError) as exc:
            row["status"] = f"error_{type(exc).__name__}"
        for b in spec.baselines:
            row.update(_baseline(spec, params, b, memo))
        yield row


# --------------------------------------------------------------------------- welfare gap sweeps


def _gap_header(spec: ScenarioSpec) -> List[str]:
    cols = [spec.sweep.variable, "status"]
    for m in spec.M_values:
        cols += [f"gap_M{m}", f"alpha_profit_M{m}", f"alpha_welfare_M{m}"]
    return cols


def _gap_rows(spec: ScenarioSpec):
    for value in spec.sweep.points():
        params = _point_params(spec, value)
        row: Dict[str, object] = {spec.sweep.variable: value, "status": "ok"}
        B_t = params["B_t"] if params["B_t"] is not None else 1.0
        for m in spec.M_values:
            M = INFINITE if isinstance(m, str) else int(m)
            try:
                gap, parts = welfare_gap(M, B_t, params["W"], return_parts=True)
            except (WardropConvergenceError, InvalidConfig, FloatingPointError) as exc:
                row["status"] = f"error_{type(exc).__name__}"
                continue
            row[f"gap_M{m}"] = gap
            row[f"alpha_profit_M{m}"] = parts.get("alpha_profit")
            row[f"alpha_welfare_M{m}"] = parts.get("alpha_welfare", 1.0)
        yield row


# --------------------------------------------------------------------------- entry point


def sweep_table(spec: ScenarioSpec) -> Tuple[List[str], List[Dict[str, object]]]:
    if spec.welfare_gap:
        return _gap_header(spec), list(_gap_rows(spec))
    if spec.optimize:
        return _optimize_header(spec), list(_optimize_rows(spec))
    return _plain_header(spec), list(_plain_rows(spec))


def run_sweep(spec: ScenarioSpec, output: Optional[Union[str, Path]] = None) -> str:
    """Run a scenario and return its CSV text; also written to ``output`` (or ``spec.output``)."""
    header, rows = sweep_table(spec)
    text = _write(header, rows)
    target = output or spec.output
    if target:
        Path(target).parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text
