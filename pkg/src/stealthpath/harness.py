"""Experiment orchestration: config ingestion, seeded Monte Carlo sweeps,
metric aggregation, and CSV/JSON export.

A run is fully determined by the config plus the master seed: every trial
derives its randomness as hash(master_seed, label, sweep, hypothesis, trial),
so re-running, reordering, or parallelizing cannot change any number.
"""
from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import oracle
from .adversary import (
    JamSet,
    STRATEGY_IDS,
    estimate_alpha_beta,
    erasure_jam,
    get_strategy,
    optimal_detect,
    overwrite_jam,
)
from .codec import (
    CodeParams,
    ResourceBudgetError,
    build_direct_code,
    build_layered_code,
    decode_erasure,
    decode_overwrite,
    encode,
)
from .probkit import Distribution, JointDistribution, TypicalityParams
from .ratesolver import NetworkModel, SolverConfig, solve_a, solve_b
from .rng import derive_seed

SCHEMES = ("erasure-layered", "overwrite-direct", "layered-under-overwrite")
CSV_COLUMNS = ("scheme", "n", "rate_bits", "gamma", "jam_rule", "jam_set",
               "strategy", "trials", "p_err_hat", "p_err_ci", "alpha_hat",
               "beta_hat", "ab_ci", "stealth_gap")


class ConfigError(ValueError):
    """The experiment config is structurally invalid."""


@dataclass(frozen=True)
class ExperimentConfig:
    model: NetworkModel
    scheme: str
    blocklengths: tuple
    rate_rule: dict          # {"rule": "absolute", "bits": x} or
                             # {"rule": "bound-minus-epsilon", "epsilon": e}
    gamma: float
    jam_rule: str            # "fixed" | "worst-over-family"
    jam_set: tuple           # used when jam_rule == "fixed"
    strategies: tuple        # overwrite strategy ids; ("",) for erasure
    detector: str            # "optimal-oracle" | "none"
    trials: int
    master_seed: int
    code_seed: int

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.blocklengths:
            raise ConfigError("at least one blocklength is required")
        if self.jam_rule not in ("fixed", "worst-over-family"):
            raise ConfigError(f"unknown jam rule {self.jam_rule!r}")
        rule = self.rate_rule.get("rule")
        if rule == "absolute":
            if not float(self.rate_rule.get("bits", 0)) > 0:
                raise ConfigError("absolute rate rule needs positive bits")
        elif rule == "bound-minus-epsilon":
            if not float(self.rate_rule.get("epsilon", 0)) > 0:
                raise ConfigError("bound-minus-epsilon rule needs positive epsilon")
        else:
            raise ConfigError(f"unknown rate rule {rule!r}")
        for sid in self.strategies:
            if sid and sid not in STRATEGY_IDS:
                raise ConfigError(f"unknown strategy id {sid!r}")
        if self.detector not in ("optimal-oracle", "none"):
            raise ConfigError(f"unknown detector {self.detector!r}")

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        obj = json.loads(text)
        if obj.get("schema") != 1:
            raise ConfigError('config must declare "schema": 1')
        model = model_from_config(obj["model"])
        scheme = obj.get("scheme", "overwrite-direct")
        code = obj.get("code", {})
        ns = code.get("n", [8])
        if isinstance(ns, int):
            ns = [ns]
        adversary = obj.get("adversary", {})
        strategies = tuple(adversary.get("strategies", [])) or \
            (("",) if scheme == "erasure-layered" else ("passthrough",))
        return cls(
            model=model,
            scheme=scheme,
            blocklengths=tuple(int(n) for n in ns),
            rate_rule=dict(code.get("rate", {"rule": "absolute", "bits": 1.0})),
            gamma=float(obj.get("gamma", 0.1)),
            jam_rule=adversary.get("jam_rule", "worst-over-family"),
            jam_set=tuple(adversary.get("jam_set", [])),
            strategies=strategies,
            detector=obj.get("detector", "none"),
            trials=int(obj.get("trials", 10_000)),
            master_seed=int(obj.get("master_seed", 0)),
            code_seed=int(code.get("seed", 0)),
        )


def model_from_config(obj: dict) -> NetworkModel:
    sizes = tuple(int(s) for s in obj["link_alphabet_sizes"])
    inn = obj["innocent"]
    if "factors" in inn:
        factors = [Distribution(len(f), np.array(f, dtype=float)) for f in inn["factors"]]
        innocent = JointDistribution.from_factors(factors)
    else:
        innocent = JointDistribution(sizes, np.array(inn["mass"], dtype=float))
    return NetworkModel(
        link_count=int(obj["link_count"]),
        adversary_budget=int(obj["adversary_budget"]),
        link_alphabet_sizes=sizes,
        innocent=innocent,
        allow_symmetrizable=bool(obj.get("allow_symmetrizable", False)),
    )


@dataclass
class TrialRecord:
    sweep: int
    hypothesis: int
    message: int
    jam_set: tuple
    strategy: str
    decode_verdict: str
    decoded_message: int
    detector_verdict: int
    wall_time: float


@dataclass
class MetricsRow:
    scheme: str
    n: int
    rate_bits: float
    gamma: float
    jam_rule: str
    jam_set: str
    strategy: str
    trials: int
    p_err_hat: float
    p_err_ci: float
    alpha_hat: float
    beta_hat: float
    ab_ci: float
    stealth_gap: Optional[float]
    err_innocent_hat: float = 0.0
    err_active_hat: float = 0.0
    note: str = ""


def _ci_halfwidth(p_hat: float, trials: int) -> float:
    """95% binomial half-width; rule-of-three at the degenerate frequencies."""
    if trials < 1 or math.isnan(p_hat):
        return float("nan")
    if p_hat <= 0.0 or p_hat >= 1.0:
        return 3.0 / trials
    return 1.96 * math.sqrt(p_hat * (1.0 - p_hat) / trials)


def rate_rule_resolve(rule: dict, model: NetworkModel, scheme: str,
                      cfg: Optional[SolverConfig] = None) -> float:
    """Turn a rate rule into bits per use; may invoke the rate solvers."""
    if rule["rule"] == "absolute":
        return float(rule["bits"])
    eps = float(rule["epsilon"])
    if scheme == "overwrite-direct":
        sol = solve_b(model, cfg)
    else:
        sol = solve_a(model, cfg=cfg)
    if not sol.feasible:
        raise ConfigError(f"infeasible: {sol.reason}")
    rate = sol.value - eps
    if rate <= 0:
        raise ConfigError("bound minus epsilon is non-positive")
    return rate


def _build_code(cfg: ExperimentConfig, n: int, rate: float, solver_cfg: SolverConfig):
    params = CodeParams(n=n, rate=rate, seed=cfg.code_seed)
    if cfg.scheme == "overwrite-direct":
        sol = solve_b(cfg.model, solver_cfg)
        if not sol.feasible:
            raise ConfigError(f"infeasible: {sol.reason}")
        return build_direct_code(sol.p_x, params)
    sol = solve_a(cfg.model, cfg=solver_cfg)
    if not sol.feasible:
        raise ConfigError(f"infeasible: {sol.reason}")
    return build_layered_code(sol.p_u, sol.kernel, params,
                              cfg.model.link_alphabet_sizes)


def _candidate_jam_sets(cfg: ExperimentConfig) -> List[JamSet]:
    if cfg.jam_rule == "fixed":
        return [JamSet(cfg.jam_set).validate(cfg.model)]
    return [JamSet(j) for j in cfg.model.jam_family()]


@dataclass
class _JamOutcome:
    jam_set: JamSet
    err0: float
    err1: float
    alpha: float
    beta: float

    @property
    def p_err(self) -> float:
        return self.err0 + self.err1


def _run_jam_set(cfg: ExperimentConfig, code, sweep: int, strategy_id: str,
                 j: JamSet, tp: TypicalityParams) -> _JamOutcome:
    model = cfg.model
    strategy = get_strategy(strategy_id) if strategy_id else None
    detector = None
    if cfg.detector == "optimal-oracle" and j.links:
        try:
            inn_n = oracle.exact_innocent_marginal(model, j, code.params.n)
            act_n = oracle.exact_active_marginal(code, j)
            sizes = [model.link_alphabet_sizes[i] for i in j.links]
            detector = lambda x_j: optimal_detect(x_j, sizes, inn_n, act_n)
        except ResourceBudgetError:
            detector = None

    err = [0, 0]
    alarms, missed = 0, 0
    n_msg = code.message_count
    for t in range(cfg.trials):
        for hyp in (0, 1):
            if hyp == 0:
                m = 0
            else:
                m = derive_seed(cfg.master_seed, "message", sweep, t) % n_msg + 1
            tx_seed = derive_seed(cfg.master_seed, "trial", sweep, hyp, t)
            tx = encode(code, model, hyp, m, tx_seed)
            if detector is not None and j.links:
                verdict = detector(tx.links[list(j.links)])
                if hyp == 0 and verdict == 1:
                    alarms += 1
                if hyp == 1 and verdict == 0:
                    missed += 1
            if cfg.scheme == "erasure-layered":
                rx = erasure_jam(tx, j)
                result = decode_erasure(code, rx, tp, model)
            else:
                jam_seed = derive_seed(cfg.master_seed, "jam", sweep, hyp, t,
                                       *j.links)
                rx = overwrite_jam(tx, j, strategy, jam_seed, model, code)
                if cfg.scheme == "overwrite-direct":
                    result = decode_overwrite(code, rx, model)
                else:
                    # Exploratory: layered code under overwrite; typicality
                    # decoding over all links with no correctness claim.
                    result = decode_erasure(code, rx, tp, model)
            if hyp == 0:
                if result.verdict != "innocent":
                    err[0] += 1
            else:
                if not (result.verdict == "message" and result.message == m):
                    err[1] += 1
    nan = float("nan")
    return _JamOutcome(
        jam_set=j,
        err0=err[0] / cfg.trials,
        err1=err[1] / cfg.trials,
        alpha=alarms / cfg.trials if detector is not None else nan,
        beta=missed / cfg.trials if detector is not None else nan,
    )


def run_experiment(cfg: ExperimentConfig,
                   solver_cfg: Optional[SolverConfig] = None) -> List[MetricsRow]:
    """One MetricsRow per (blocklength, strategy) sweep point."""
    solver_cfg = solver_cfg or SolverConfig()
    tp = TypicalityParams(cfg.gamma)
    rows: List[MetricsRow] = []
    sweep_points = [(n, sid) for n in cfg.blocklengths for sid in cfg.strategies]
    for sweep, (n, strategy_id) in enumerate(sweep_points):
        try:
            rows.append(_run_sweep_point(cfg, sweep, n, strategy_id, tp, solver_cfg))
        except (ConfigError, ResourceBudgetError, ValueError) as exc:
            nan = float("nan")
            rows.append(MetricsRow(
                scheme=cfg.scheme, n=n, rate_bits=nan, gamma=cfg.gamma,
                jam_rule=cfg.jam_rule, jam_set="", strategy=strategy_id,
                trials=cfg.trials, p_err_hat=nan, p_err_ci=nan, alpha_hat=nan,
                beta_hat=nan, ab_ci=nan, stealth_gap=None,
                note=f"failed: {exc}"))
    return rows


def _run_sweep_point(cfg: ExperimentConfig, sweep: int, n: int, strategy_id: str,
                     tp: TypicalityParams, solver_cfg: SolverConfig) -> MetricsRow:
    rate = rate_rule_resolve(cfg.rate_rule, cfg.model, cfg.scheme, solver_cfg)
    code = _build_code(cfg, n, rate, solver_cfg)
    outcomes = [_run_jam_set(cfg, code, sweep, strategy_id, j, tp)
                for j in _candidate_jam_sets(cfg)]
    worst = max(outcomes, key=lambda o: o.p_err)  # first argmax in family order

    gap: Optional[float] = None
    note = ""
    try:
        gap = max(oracle.exact_stealth_gap(code, cfg.model, o.jam_set)
                  for o in outcomes if o.jam_set.links) if \
            any(o.jam_set.links for o in outcomes) else 0.0
    except ResourceBudgetError:
        note = "stealth gap outside oracle budget"

    err_ci = math.sqrt(_ci_halfwidth(worst.err0, cfg.trials) ** 2 +
                       _ci_halfwidth(worst.err1, cfg.trials) ** 2)
    ab_ci = math.sqrt(_ci_halfwidth(worst.alpha, cfg.trials) ** 2 +
                      _ci_halfwidth(worst.beta, cfg.trials) ** 2) \
        if not math.isnan(worst.alpha) else float("nan")
    return MetricsRow(
        scheme=cfg.scheme,
        n=n,
        rate_bits=rate,
        gamma=cfg.gamma,
        jam_rule=cfg.jam_rule,
        jam_set="|".join(str(i) for i in worst.jam_set.links),
        strategy=strategy_id,
        trials=cfg.trials,
        p_err_hat=worst.p_err,
        p_err_ci=err_ci,
        alpha_hat=worst.alpha,
        beta_hat=worst.beta,
        ab_ci=ab_ci,
        stealth_gap=gap,
        err_innocent_hat=worst.err0,
        err_active_hat=worst.err1,
        note=note,
    )


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return "%.12g" % value
    return str(value)


def export(rows: Sequence[MetricsRow], fmt: str, path: str) -> None:
    """Write rows as CSV (fixed column order plus a trailing note) or JSON."""
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS + ("note",))]
        for row in rows:
            cells = [_format_cell(getattr(row, col)) for col in CSV_COLUMNS]
            cells.append(row.note.replace(",", ";"))
            lines.append(",".join(cells))
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        payload = []
        for row in rows:
            obj = dataclasses.asdict(row)
            obj["stealth_gap"] = row.stealth_gap
            payload.append(obj)
        text = json.dumps(payload, indent=2, allow_nan=True) + "\n"
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def rows_from_json(text: str) -> List[MetricsRow]:
    return [MetricsRow(**obj) for obj in json.loads(text)]
