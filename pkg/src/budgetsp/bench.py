"""Budget sweeps: accuracy-versus-cost curves for adaptive policies and baselines."""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .chain import train_chain
from .core import AcquisitionState, CostSchedule, ModifiedLossParams, preset, state_cost
from .data import gen_synthetic_chain, gen_synthetic_treebank, load_conllu, load_ocr, train_test_split
from .dep import train_dep
from .oracle import PseudoLabel, SearchKind, pseudo_label
from .policy import (
    build_oneshot_training_set,
    build_oof_predictions,
    default_featurizer,
    train_anytime,
    train_oneshot,
)
from .runtime import (
    Metric,
    all_one_rule,
    anytime_runner,
    evaluate,
    fixed_state_runner,
    myopic_runner,
    oneshot_runner,
    uniform_runner,
    zero_state_rule,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = ["curve", "budget_or_lambda", "class_weight", "accuracy", "feature_cost",
               "inference_calls", "policy_calls", "total_cost", "base_cost", "pseudo_label_cost",
               "error"]
CSV_SCHEMA_VERSION = 1


@dataclass
class SweepConfig:
    task: str = "synthetic"
    lambdas: list[float] = field(default_factory=lambda: [0.05, 0.1, 0.2, 0.4, 0.8])
    budgets: list[float] | None = None
    folds: int = 3
    seed: int = 0
    cost_preset: str = "ocr"
    tier_costs: list[float] | None = None
    inference_cost: float | None = None
    policy_cost: float | None = None
    data_path: str | None = None
    n_examples: int = 1000
    test_fraction: float = 0.1
    epochs: int = 20
    learning_rate: float = 0.1
    search: str = "trajectory"
    tau: float = 0.0
    loss: str = "hamming"
    class_weights: list[float] | None = None
    class_weight_grid: list[float] = field(default_factory=lambda: [1.0])
    use_weights: bool = True
    uniform_fractions: list[float] = field(default_factory=lambda: [0.0, 0.1, 0.2, 0.3, 0.4, 0.5,
                                                                    0.6, 0.7, 0.8, 0.9, 1.0])
    myopic_quantiles: list[float] = field(default_factory=lambda: [0.1, 0.25, 0.5, 0.75, 0.9])
    anytime: bool = True
    anytime_lambda: float = 0.05
    policy_epochs: int = 400
    gate_on: str = "head"
    jobs: int = 1

    def __post_init__(self):
        if self.task not in ("ocr", "depparse", "synthetic"):
            raise ValueError(f"unknown task {self.task!r}")
        if not self.lambdas:
            raise ValueError("lambda list must be non-empty")
        if list(self.lambdas) != sorted(self.lambdas):
            raise ValueError("lambda list must be sorted")
        if self.budgets is not None and list(self.budgets) != sorted(self.budgets):
            raise ValueError("budget list must be sorted")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if not self.class_weight_grid or min(self.class_weight_grid) <= 0:
            raise ValueError("class_weight_grid must be non-empty and positive")

    def schedule(self) -> CostSchedule:
        return preset(self.cost_preset, tier_costs=self.tier_costs,
                      inference_cost=self.inference_cost, policy_cost=self.policy_cost)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class CurvePoint:
    curve: str
    control: float
    accuracy: float
    feature_cost: float
    inference_calls: float
    policy_calls: float
    total_cost: float
    pseudo_label_cost: float | None = None
    error: str | None = None
    class_weight: float | None = None
    base_cost: float = 0.0

    def __post_init__(self):
        if self.error is None:
            if not 0.0 <= self.accuracy <= 1.0:
                raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")
            if min(self.feature_cost, self.total_cost) < 0:
                raise ValueError("costs must be nonnegative")

    def csv_row(self) -> list:
        opt = lambda v: "" if v is None else v
        return [self.curve, self.control, opt(self.class_weight), self.accuracy, self.feature_cost,
                self.inference_calls, self.policy_calls, self.total_cost, self.base_cost,
                opt(self.pseudo_label_cost), self.error or ""]


@dataclass
class SweepResult:
    config: SweepConfig
    points: list[CurvePoint]
    full_feature_cost: float
    extras: dict = field(default_factory=dict)

    def curve(self, name: str) -> list[CurvePoint]:
        return sorted((p for p in self.points if p.curve == name and p.error is None),
                      key=lambda p: (p.feature_cost, p.control))

    def anchor(self, name: str) -> CurvePoint:
        return next(p for p in self.points if p.curve == name)


def write_curve_csv(path, points: Sequence[CurvePoint]) -> None:
    """Comma-separated, one header row, one row per point; empty cells for missing values."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for p in points:
            w.writerow(p.csv_row())


def read_curve_csv(path) -> list[CurvePoint]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            opt = lambda k: float(row[k]) if row[k] else None
            out.append(CurvePoint(row["curve"], float(row["budget_or_lambda"]),
                                  float(row["accuracy"]), float(row["feature_cost"]),
                                  float(row["inference_calls"]), float(row["policy_calls"]),
                                  float(row["total_cost"]), opt("pseudo_label_cost"),
                                  row["error"] or None, opt("class_weight"),
                                  float(row["base_cost"])))
    return out


# ---------------------------------------------------------------------------


@dataclass
class Task:
    train: list
    test: list
    train_fn: Callable[[list], object]
    metric: Metric


def load_task(cfg: SweepConfig) -> Task:
    if cfg.task == "depparse":
        if cfg.data_path:
            data = load_conllu(cfg.data_path)[: cfg.n_examples]
        else:
            data = gen_synthetic_treebank(cfg.n_examples, seed=cfg.seed)
        train_fn = partial(train_dep, epochs=cfg.epochs, learning_rate=cfg.learning_rate,
                           seed=cfg.seed, gate_on=cfg.gate_on)
        metric = Metric.UAS
    else:
        if cfg.task == "ocr" and cfg.data_path:
            data = load_ocr(cfg.data_path, limit_words=cfg.n_examples)
        else:
            data = gen_synthetic_chain(cfg.n_examples, seed=cfg.seed, alphabet_size=26, noise=0.8)
        alphabet = 1 + max(max(x.gold) for x in data)
        train_fn = partial(train_chain, epochs=cfg.epochs, learning_rate=cfg.learning_rate,
                           seed=cfg.seed, alphabet_size=alphabet)
        metric = Metric.LETTER_ACCURACY
    train, test = train_test_split(data, cfg.test_fraction, cfg.seed)
    return Task(train, test, train_fn, metric)


def _pseudo_one(args, kind, params, sched, tau):
    x, gold, predictor = args
    return pseudo_label(kind, x, gold, predictor, params, sched, tau)


def compute_pseudo_labels(data: Sequence, predictors: Sequence, params: ModifiedLossParams,
                          sched: CostSchedule, kind: SearchKind | str = SearchKind.TRAJECTORY,
                          tau: float = 0.0, jobs: int = 1) -> list[PseudoLabel]:
    """Pseudo-labels for every example under its assigned predictor; order preserved."""
    fn = partial(_pseudo_one, kind=SearchKind(kind), params=params, sched=sched, tau=tau)
    items = [(x, x.gold, p) for x, p in zip(data, predictors)]
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))
    return [fn(it) for it in items]


def curve_point(curve: str, control: float, summary, pl_cost=None, class_weight=None) -> CurvePoint:
    """Curve row from an evaluation summary; ``base_cost`` is the per-example mean."""
    base = summary.ledger.base_cost / len(summary.records)
    return CurvePoint(curve, float(control), summary.accuracy, summary.feature_cost,
                      summary.inference_calls, summary.policy_calls, summary.total_cost, pl_cost,
                      class_weight=class_weight, base_cost=base)


def _failed(curve: str, control: float, exc: Exception, class_weight=None) -> CurvePoint:
    nan = math.nan
    return CurvePoint(curve, float(control), nan, nan, nan, nan, nan,
                      error=f"{type(exc).__name__}: {exc}", class_weight=class_weight, base_cost=nan)


def default_budgets(sched: CostSchedule, test: Sequence, predictor) -> list[float]:
    step = min(d for d in sched.tier_costs[1:] if d > 0) if any(sched.tier_costs[1:]) else 1.0
    longest = max(predictor.num_parts(x) for x in test)
    acq = longest * (predictor.num_tiers - 1)
    units = sorted({0, 1, 2, 3, 4, 5, 6, 8, 10, 12, 15, 20, acq})
    return [float(u * step) for u in units if u <= acq]


def run_sweep(cfg: SweepConfig, task: Task | None = None, csv_path=None) -> SweepResult:
    """Full pipeline per lambda: OOF predictors, pseudo-labels, one-shot policy, evaluation.

    Also emits the zero-state and all-one anchors, uniform and myopic
    baseline curves, and (optionally) an anytime curve over ``budgets``.
    """
    task = task or load_task(cfg)
    sched = cfg.schedule()
    rng_seed = cfg.seed
    predictor = task.train_fn(task.train)
    oof = build_oof_predictions(task.train, cfg.folds, task.train_fn, seed=cfg.seed)
    assigned = oof.assigned()
    featurizer = default_featurizer(task.train)
    points: list[CurvePoint] = []
    # every evaluation run, kept so ledgers can be audited against traces
    extras: dict = {"pseudo_labels": {}, "summaries": []}

    def record(point: CurvePoint, summary) -> None:
        points.append(point)
        extras["summaries"].append((point.curve, point.control, point.class_weight, summary))

    zero = evaluate(task.test, fixed_state_runner(zero_state_rule(predictor), predictor, sched),
                    task.metric, sched)
    full = evaluate(task.test, fixed_state_runner(all_one_rule(predictor), predictor, sched),
                    task.metric, sched)
    record(curve_point("anchor-zero", 0.0, zero), zero)
    record(curve_point("anchor-full", 1.0, full), full)

    n_acq = predictor.num_tiers - 1
    base_cw = np.ones(n_acq) if cfg.class_weights is None else np.asarray(cfg.class_weights, float)
    for lam in cfg.lambdas:
        try:
            params = ModifiedLossParams(lam, cfg.loss)
            pls = compute_pseudo_labels(task.train, assigned, params, sched, cfg.search, cfg.tau,
                                        cfg.jobs)
            pl_cost = float(np.mean([state_cost(p.target, sched) for p in pls]))
            extras["pseudo_labels"][lam] = pls
            ts = build_oneshot_training_set(task.train, pls, featurizer, oof.folds, cfg.use_weights)
        except Exception as exc:  # one failed control value must not sink the sweep
            log.exception("lambda=%s failed", lam)
            for cw in cfg.class_weight_grid:
                points.append(_failed("oneshot", lam, exc, cw))
            continue
        for cw in cfg.class_weight_grid:
            try:
                policy = train_oneshot(ts, featurizer, base_cw * cw, epochs=cfg.policy_epochs,
                                       num_tiers=predictor.num_tiers)
                extras.setdefault("oneshot_policies", {})[(lam, cw)] = policy
                summary = evaluate(task.test, oneshot_runner(policy, predictor, sched),
                                   task.metric, sched)
                record(curve_point("oneshot", lam, summary, pl_cost, cw), summary)
            except Exception as exc:
                log.exception("lambda=%s class_weight=%s failed", lam, cw)
                points.append(_failed("oneshot", lam, exc, cw))

    for frac in cfg.uniform_fractions:
        summary = evaluate(task.test, uniform_runner(predictor, sched, frac, rng_seed), task.metric, sched)
        record(curve_point("uniform", frac, summary), summary)

    if cfg.myopic_quantiles:
        conf = np.array([predictor.confidence(x, _zero_state(predictor, x))[1] for x in task.train])
        conf = conf[np.isfinite(conf)]
        for q in cfg.myopic_quantiles:
            thr = float(np.quantile(conf, q)) if len(conf) else 0.0
            summary = evaluate(task.test, myopic_runner(predictor, sched, thr), task.metric, sched)
            record(curve_point("myopic", thr, summary), summary)

    if cfg.anytime:
        try:
            params = ModifiedLossParams(cfg.anytime_lambda, cfg.loss)
            any_pol = train_anytime(task.train, [x.gold for x in task.train], assigned, params,
                                    sched, featurizer, epochs=max(100, cfg.policy_epochs // 2),
                                    use_weights=cfg.use_weights)
            extras["anytime_policy"] = any_pol
            budgets = cfg.budgets if cfg.budgets is not None else default_budgets(sched, task.test, predictor)
            for b in budgets:
                summary = evaluate(task.test, anytime_runner(any_pol, predictor, sched, b),
                                   task.metric, sched)
                record(curve_point("anytime", b, summary), summary)
                extras.setdefault("anytime_summaries", {})[b] = summary
        except Exception as exc:
            log.exception("anytime training failed")
            points.append(_failed("anytime", math.nan, exc))

    extras["predictor"] = predictor
    extras["task"] = task
    result = SweepResult(cfg, points, full.feature_cost, extras)
    if csv_path is not None:
        write_curve_csv(csv_path, points)
    return result


def _zero_state(predictor, x):
    return AcquisitionState.zeros(predictor.num_tiers, predictor.num_parts(x))


# ---------------------------------------------------------------------------
# Curve comparison helpers


def interpolate(curve: Sequence[CurvePoint], cost: float) -> float:
    """Accuracy of the monotone upper envelope of ``curve`` at ``cost`` (linear in between).

    Below the cheapest point the curve is not defined and ``nan`` is returned.
    """
    pts = sorted((p.feature_cost, p.accuracy) for p in curve)
    xs, ys = [], []
    best = -math.inf
    for c, a in pts:
        best = max(best, a)
        if xs and c == xs[-1]:
            ys[-1] = best
        else:
            xs.append(c)
            ys.append(best)
    if cost < xs[0]:
        return math.nan
    return float(np.interp(cost, xs, ys))


def matched_cost_levels(a: Sequence[CurvePoint], b: Sequence[CurvePoint], n: int = 5) -> list[float]:
    """``n`` evenly spaced feature-cost levels inside both curves' cost ranges."""
    lo = max(min(p.feature_cost for p in a), min(p.feature_cost for p in b))
    hi = min(max(p.feature_cost for p in a), max(p.feature_cost for p in b))
    if hi <= lo:
        return [lo]
    return [float(v) for v in np.linspace(lo, hi, n + 2)[1:-1]]
