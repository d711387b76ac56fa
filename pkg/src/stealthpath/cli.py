"""Command-line entry point.

Subcommands: solve (rate bounds), simulate (Monte Carlo sweeps), attack
(strategy registry), oracle (exact tiny-instance references), stealth-scan
(exact stealth gaps across blocklengths). Exit codes: 0 success, 1 validation
error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import harness, oracle
from .adversary import JamSet, get_strategy, list_strategies
from .codec import CodeParams, ResourceBudgetError, build_direct_code, build_layered_code
from .harness import ConfigError, ExperimentConfig, model_from_config
from .probkit import TypicalityParams
from .ratesolver import SolverConfig, achievable_rate, solve_a, solve_b

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _load_config(path: str) -> dict:
    with open(path) as fh:
        obj = json.load(fh)
    if obj.get("schema") != 1:
        raise ConfigError('config must declare "schema": 1')
    return obj


def _emit(payload, out: str):
    text = json.dumps(payload, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_solve(args) -> int:
    obj = _load_config(args.config)
    model = model_from_config(obj["model"])
    cfg = SolverConfig(seed=args.seed)
    scheme = obj.get("scheme", "overwrite-direct")
    if scheme == "overwrite-direct":
        sol = solve_b(model, cfg)
        payload = {"bound": "overwrite", "feasible": sol.feasible, "value": sol.value,
                   "feasibility_margin": sol.feasibility_margin, "reason": sol.reason,
                   "p_x": sol.p_x.mass.tolist() if sol.p_x is not None else None}
    else:
        sol = solve_a(model, cfg=cfg)
        payload = {"bound": "erasure", "feasible": sol.feasible, "value": sol.value,
                   "feasibility_margin": sol.feasibility_margin, "reason": sol.reason,
                   "p_u": sol.p_u.mass.tolist() if sol.p_u is not None else None,
                   "kernel": sol.kernel.matrix.tolist() if sol.kernel is not None else None}
    if "epsilon" in obj:
        rate = achievable_rate(model, "overwrite" if scheme == "overwrite-direct"
                               else "erasure", float(obj["epsilon"]), cfg)
        payload["rate_bits"] = rate.bits
        payload["rate_feasible"] = rate.feasible
    _emit(payload, args.out)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    with open(args.config) as fh:
        cfg = ExperimentConfig.from_json(fh.read())
    if args.seed is not None and args.seed != 0:
        cfg = ExperimentConfig(**{**cfg.__dict__, "master_seed": args.seed})
    rows = harness.run_experiment(cfg)
    if args.out:
        harness.export(rows, args.format, args.out)
    else:
        for row in rows:
            print(row)
    return EXIT_OK


def _cmd_attack(args) -> int:
    if args.list:
        _emit(list_strategies(), args.out)
        return EXIT_OK
    print("use --list to enumerate registered strategies", file=sys.stderr)
    return EXIT_VALIDATION


def _build_code_from_config(obj: dict, model, seed: int):
    code = obj.get("code", {})
    params = CodeParams(n=int(code.get("n", 4)), rate=float(code.get("rate_bits", 1.0)),
                        seed=int(code.get("seed", seed)))
    scheme = obj.get("scheme", "overwrite-direct")
    if scheme == "overwrite-direct":
        sol = solve_b(model)
        if not sol.feasible:
            raise ConfigError(f"infeasible: {sol.reason}")
        return build_direct_code(sol.p_x, params)
    sol = solve_a(model)
    if not sol.feasible:
        raise ConfigError(f"infeasible: {sol.reason}")
    return build_layered_code(sol.p_u, sol.kernel, params, model.link_alphabet_sizes)


def _cmd_oracle(args) -> int:
    obj = _load_config(args.config)
    model = model_from_config(obj["model"])
    sub = args.oracle_op
    if sub == "grid-solve":
        sol = oracle.grid_solve_b(model, float(obj.get("resolution", 1e-2)))
        _emit({"feasible": sol.feasible, "value": sol.value,
               "feasibility_margin": sol.feasibility_margin,
               "info": sol.info}, args.out)
        return EXIT_OK
    code = _build_code_from_config(obj, model, args.seed)
    j = JamSet(tuple(obj.get("jam_set", [])))
    if sub == "stealth-gap":
        gap = oracle.exact_stealth_gap(code, model, j)
        _emit({"jam_set": list(j.links), "stealth_gap": gap,
               "n": code.params.n, "messages": code.message_count}, args.out)
    elif sub == "detector":
        alpha, beta, ab = oracle.exhaustive_best_detector(code, model, j)
        _emit({"jam_set": list(j.links), "alpha": alpha, "beta": beta,
               "alpha_plus_beta": ab}, args.out)
    elif sub == "error":
        jamming = obj.get("jamming", "erasure")
        if jamming != "erasure":
            jamming = get_strategy(jamming)
        p = oracle.exact_error_probability(
            code, model, j, jamming, TypicalityParams(float(obj.get("gamma", 0.1))))
        _emit({"jam_set": list(j.links), "p_err": p}, args.out)
    else:
        raise ConfigError(f"unknown oracle operation {sub!r}")
    return EXIT_OK


def _cmd_stealth_scan(args) -> int:
    obj = _load_config(args.config)
    model = model_from_config(obj["model"])
    ns = obj.get("code", {}).get("n", [2, 4])
    if isinstance(ns, int):
        ns = [ns]
    rows = []
    for n in ns:
        scan_obj = {**obj, "code": {**obj.get("code", {}), "n": n}}
        code = _build_code_from_config(scan_obj, model, args.seed)
        for j in model.jam_family():
            if not j:
                continue
            gap = oracle.exact_stealth_gap(code, model, JamSet(j))
            rows.append({"n": n, "jam_set": list(j), "stealth_gap": gap})
    _emit(rows, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stealthpath")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1,
                        help="reserved; results are independent of this value")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="compute achievable-rate bounds")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="")

    p = sub.add_parser("simulate", help="run a Monte Carlo experiment sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("attack", help="jamming strategy registry")
    p.add_argument("--list", action="store_true")
    p.add_argument("--out", default="")

    p = sub.add_parser("oracle", help="exact tiny-instance references")
    p.add_argument("oracle_op",
                   choices=("stealth-gap", "detector", "error", "grid-solve"))
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="")

    p = sub.add_parser("stealth-scan", help="exact stealth gaps across blocklengths")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="")
    return parser


_COMMANDS = {
    "solve": _cmd_solve,
    "simulate": _cmd_simulate,
    "attack": _cmd_attack,
    "oracle": _cmd_oracle,
    "stealth-scan": _cmd_stealth_scan,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ResourceBudgetError, OSError, RuntimeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
