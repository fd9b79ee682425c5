"""Simulate classical Bell-analog optics experiments and emit JSON or CSV reports.

    bellcal bell-state --config V
    bellcal chsh-scan bell-V --settings 0,0.7853981634,1.5707963268,-0.7853981634
    bellcal chsh-scan product 0.7853981634,0,0.7853981634,0 --grid 8
    bellcal thermal-verify --n 1000000 --seed 42
    bellcal product-bound --draws 100 --grid 8 --seed 7

Exit status: 0 when every check in the report passes, 1 when one fails,
2 on a usage error.  Reports go to stdout unless ``--out`` is given.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import chsh
from .algebra import CompositeState, is_normalized, phase_distance, schmidt_rank
from .circuit import (
    BenchConfig,
    ProductStateParams,
    build_bell_analog,
    build_product_state,
    reference_state,
    trace_bench,
)
from .optics import PathField
from .report import ExperimentReport
from .thermal import SIGMA_THRESHOLD, thermal_checks

DEFAULT_SEED = 42
DEFAULT_N = 1_000_000
DEFAULT_GRID = 16
DEFAULT_DRAWS = 100
MIN_THERMAL_N = 100
AMPLITUDE_TOL = 1e-10
PRODUCT_BOUND_TOL = 1e-6
PROBE_TOL = 1e-4
PROBE_PARAMS = ProductStateParams(math.pi / 4, 0.0, math.pi / 4, 0.0)
SEED_ENV = "BELLCAL_SEED"


class UsageError(Exception):
    pass


def _describe(obj) -> str:
    if obj is None:
        return ""
    if isinstance(obj, PathField):
        return obj.describe()
    if isinstance(obj, tuple):
        return " | ".join(_describe(o) for o in obj)
    return repr(obj)


def _state_records(state: CompositeState) -> list[dict]:
    records = []
    for k in range(4):
        i, j = divmod(k, 2)
        rec = {"kind": "amplitude", "index": [i, j], "value": complex(state.amplitudes[k])}
        tags = state.mode_tags.get((i, j))
        if tags is not None:
            rec["tags"] = {
                path: tag.label(idx) if kind == "polarization" else tag.name
                for path, tag, idx, kind in zip("ab", tags, (i, j), state.labels)
            }
        records.append(rec)
    return records


def cmd_bell_state(config: str) -> ExperimentReport:
    cfg = BenchConfig(config)
    trace = trace_bench(cfg)
    state = trace[-1].output
    rank = schmidt_rank(state)
    deviation = phase_distance(state, reference_state(config))
    results = _state_records(state)
    results.append({"kind": "schmidt_rank", "value": rank})
    results.append({"kind": "reference_deviation", "value": deviation})
    results.append({"kind": "labels", "a": state.labels[0], "b": state.labels[1]})
    for step, rec in enumerate(trace):
        results.append({"kind": "trace", "step": step, "element": rec.element,
                        "input": _describe(rec.input), "output": _describe(rec.output)})
    checks = {
        "normalized": is_normalized(state),
        "schmidt_rank_2": rank == 2,
        "matches_reference": deviation < AMPLITUDE_TOL,
    }
    return ExperimentReport("bell-state", {"config": config}, results, checks)


def parse_floats(text: str, count: int, degrees: bool) -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"expected {count} comma-separated numbers, got {text!r}") from None
    if len(values) != count or not all(math.isfinite(v) for v in values):
        raise UsageError(f"expected {count} finite comma-separated numbers, got {text!r}")
    return tuple(math.radians(v) for v in values) if degrees else values


def resolve_state(spec: str, params: Optional[str], degrees: bool) -> CompositeState:
    if spec in ("bell-V", "bell-H"):
        if params is not None:
            raise UsageError(f"{spec} takes no parameters")
        return build_bell_analog(BenchConfig(spec[-1]))
    if spec == "product":
        if params is None:
            raise UsageError("product needs alpha,beta,gamma,delta")
        return build_product_state(ProductStateParams(*parse_floats(params, 4, degrees)))
    raise UsageError(f"unknown state {spec!r}; use bell-V, bell-H or product")


def cmd_chsh_scan(state_spec: str, params: Optional[str] = None,
                  settings: Optional[Sequence[float]] = None,
                  grid: Optional[int] = None, degrees: bool = False,
                  sign_pattern: str = "appendix") -> ExperimentReport:
    state = resolve_state(state_spec, params, degrees)
    rank = schmidt_rank(state)
    lattice_n = grid or DEFAULT_GRID
    parameters = {"state": state_spec, "product_params": params, "degrees": degrees,
                  "sign_pattern": sign_pattern, "lattice_points": lattice_n,
                  "schmidt_rank": rank}
    results = []
    if settings is not None:
        parameters["settings"] = list(settings)
        res = chsh.chsh_s(state, settings, sign_pattern)
        t1, p1, t2, p2 = res.settings
        for (t, p), e in zip(((t1, p1), (t1, p2), (t2, p1), (t2, p2)), res.correlations):
            results.append({"kind": "correlation", "theta": t, "phi": p, "value": e})
    else:
        parameters["grid"] = lattice_n
        found = chsh.search_s(state, lattice_n, sign_pattern)
        res = found.best
        results.append({"kind": "grid", "max_abs_s": found.grid_max,
                        "settings": list(found.grid_settings)})
    results.append({"kind": "chsh", "settings": list(res.settings), "s_value": res.s_value,
                    "abs_s": abs(res.s_value), "violates_bound": res.violates_bound})

    angles = chsh.TWO_PI * np.arange(lattice_n) / lattice_n
    lattice = chsh.correlation_lattice(state, angles, angles)
    for i, t in enumerate(angles):
        for j, p in enumerate(angles):
            results.append({"kind": "lattice", "theta": t, "phi": p, "value": lattice[i, j]})

    checks = {"normalized": is_normalized(state),
              "below_tsirelson": abs(res.s_value) <= chsh.TSIRELSON + chsh.VIOLATION_EPS}
    if rank == 1:
        checks["product_bound"] = abs(res.s_value) <= chsh.CLASSICAL_BOUND + PRODUCT_BOUND_TOL
    return ExperimentReport("chsh-scan", parameters, results, checks)


def cmd_thermal_verify(n_samples: int = DEFAULT_N, seed: int = DEFAULT_SEED,
                       config: str = "V", workers: int = 1) -> ExperimentReport:
    if n_samples < MIN_THERMAL_N:
        raise UsageError(f"--n must be at least {MIN_THERMAL_N}")
    checks = thermal_checks(n_samples, seed, BenchConfig(config), workers)
    results = [{
        "name": c.name,
        "channels": list(c.channels),
        "value": c.estimate.value,
        "std_error": c.estimate.std_error,
        "sigma_distance": c.estimate.sigma_distance,
        "pass": c.passed,
    } for c in checks]
    parameters = {"n": n_samples, "seed": seed, "config": config,
                  "sigma_threshold": SIGMA_THRESHOLD}
    verdicts = {f"{i}:{c.name}": c.passed for i, c in enumerate(checks)}
    return ExperimentReport("thermal-verify", parameters, results, verdicts)


def cmd_product_bound(draws: int = DEFAULT_DRAWS, seed: int = DEFAULT_SEED,
                      grid: int = DEFAULT_GRID) -> ExperimentReport:
    if draws < 1:
        raise UsageError("--draws must be at least 1")
    rng = np.random.default_rng(seed)
    results = []
    global_max = 0.0
    for k in range(draws):
        p = ProductStateParams(*rng.uniform(0.0, chsh.TWO_PI, size=4))
        best = chsh.maximize_s(build_product_state(p), grid)
        global_max = max(global_max, abs(best.s_value))
        results.append({"kind": "draw", "index": k, "alpha": p.alpha, "beta": p.beta,
                        "gamma": p.gamma, "delta": p.delta, "max_abs_s": abs(best.s_value),
                        "settings": list(best.settings)})
    probe = abs(chsh.maximize_s(build_product_state(PROBE_PARAMS), grid).s_value)
    results.append({"kind": "probe", "alpha": PROBE_PARAMS.alpha, "beta": PROBE_PARAMS.beta,
                    "gamma": PROBE_PARAMS.gamma, "delta": PROBE_PARAMS.delta,
                    "max_abs_s": probe})
    results.append({"kind": "summary", "global_max_abs_s": global_max})
    checks = {"bound": global_max <= chsh.CLASSICAL_BOUND + PRODUCT_BOUND_TOL,
              "probe_saturates": abs(probe - chsh.CLASSICAL_BOUND) < PROBE_TOL}
    return ExperimentReport("product-bound", {"draws": draws, "seed": seed, "grid": grid},
                            results, checks)


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", default=None, help="output file (default: stdout)")

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=None,
                        help=f"RNG seed (falls back to ${SEED_ENV}, then {DEFAULT_SEED})")

    parser = argparse.ArgumentParser(prog="bellcal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bell-state", parents=[common], help="synthesize a Bell-analog state")
    p.add_argument("--config", choices=("V", "H"), default="V")

    p = sub.add_parser("chsh-scan", parents=[common], help="CHSH value or |S| search")
    p.add_argument("state", help="bell-V, bell-H or product")
    p.add_argument("params", nargs="?", help="alpha,beta,gamma,delta for product states")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--settings", help="theta1,phi1,theta2,phi2")
    mode.add_argument("--grid", type=_positive_int, help=f"grid points per angle (default {DEFAULT_GRID})")
    p.add_argument("--degrees", action="store_true", help="angles given in degrees")
    p.add_argument("--sign-pattern", choices=tuple(chsh.SIGN_PATTERNS), default="appendix")

    p = sub.add_parser("thermal-verify", parents=[common, seeded],
                       help="Monte Carlo check of the thermal-light correlations")
    p.add_argument("--n", type=int, default=DEFAULT_N, dest="n_samples")
    p.add_argument("--config", choices=("V", "H"), default="V")
    p.add_argument("--workers", type=_positive_int, default=1)

    p = sub.add_parser("product-bound", parents=[common, seeded],
                       help="randomized |S| <= 2 audit over product states")
    p.add_argument("--draws", type=_positive_int, default=DEFAULT_DRAWS)
    p.add_argument("--grid", type=_positive_int, default=DEFAULT_GRID)
    return parser


def resolve_seed(flag: Optional[int], environ=os.environ) -> int:
    if flag is not None:
        return flag
    env = environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"${SEED_ENV} is not an integer: {env!r}") from None
    return DEFAULT_SEED


def run(args: argparse.Namespace) -> ExperimentReport:
    if args.command == "bell-state":
        return cmd_bell_state(args.config)
    if args.command == "chsh-scan":
        if args.grid is not None and args.grid < 4:
            raise UsageError("--grid must be at least 4")
        settings = (parse_floats(args.settings, 4, args.degrees)
                    if args.settings is not None else None)
        return cmd_chsh_scan(args.state, args.params, settings, args.grid, args.degrees,
                             args.sign_pattern)
    if args.command == "thermal-verify":
        return cmd_thermal_verify(args.n_samples, resolve_seed(args.seed), args.config,
                                  args.workers)
    if args.command == "product-bound":
        if args.grid < 4:
            raise UsageError("--grid must be at least 4")
        return cmd_product_bound(args.draws, resolve_seed(args.seed), args.grid)
    raise UsageError(f"unknown command {args.command!r}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report = run(args)
    except UsageError as exc:
        parser.error(str(exc))
    text = report.render(args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
