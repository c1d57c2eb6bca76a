"""Command-line entry point: ``budgetsp <subcommand> [options]``.

Every option has a config-file key of the same name (dashes become
underscores).  Values are resolved as built-in default < ``--config`` JSON
file < explicit flag.  Each command writes its artifacts plus a
``<command>.manifest.json`` into ``--out-dir``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 internal error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import platform
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (
    SweepConfig,
    Task,
    compute_pseudo_labels,
    curve_point,
    load_task,
    run_sweep,
    write_curve_csv,
)
from .chain import ChainModel
from .core import ModifiedLossParams, preset
from .data import DataError
from .dep import DepModel
from .oracle import (
    PseudoLabel,
    SearchKind,
    StateSpaceTooLarge,
    read_jsonl,
    trajectory_search,
    write_jsonl,
)
from .policy import (
    AnytimePolicy,
    OneShotPolicy,
    build_oneshot_training_set,
    build_oof_predictions,
    default_featurizer,
    fold_assignment,
    train_anytime,
    train_oneshot,
)
from .runtime import (
    all_one_rule,
    anytime_runner,
    evaluate,
    fixed_state_runner,
    myopic_runner,
    oneshot_runner,
    uniform_runner,
    zero_state_rule,
)
from .serialize import FormatError, load as load_container

log = logging.getLogger("budgetsp")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4
JSONL_SCHEMA_VERSION = 1
COMMANDS = ("train-predictor", "pseudo-labels", "train-policy", "eval", "sweep")


class UsageError(Exception):
    pass


@dataclass
class CommandConfig:
    subcommand: str = ""
    task: str = "synthetic"
    data: str | None = None
    n_examples: int = 1000
    test_fraction: float = 0.1
    split: str | None = None
    seed: int = 0
    out_dir: str = "."
    model: str | None = None
    policy: str | None = None
    pseudo_labels: str | None = None
    epochs: int = 20
    learning_rate: float = 0.1
    cost_preset: str = "ocr"
    tier_costs: list[float] | None = None
    inference_cost: float | None = None
    policy_cost: float | None = None
    lam: float = 0.1
    lambdas: list[float] = field(default_factory=lambda: [0.05, 0.1, 0.2, 0.4, 0.8])
    loss: str = "hamming"
    search: str = "trajectory"
    tau: float = 0.0
    folds: int = 3
    policy_kind: str = "oneshot"
    class_weights: list[float] | None = None
    class_weight_grid: list[float] = field(default_factory=lambda: [1.0])
    use_weights: bool = True
    policy_epochs: int = 400
    gate_on: str = "head"
    anytime_lambda: float = 0.05
    anytime: bool = True
    budgets: list[float] | None = None
    fractions: list[float] = field(default_factory=lambda: [i / 10 for i in range(11)])
    thresholds: list[float] | None = None
    myopic_quantiles: list[float] = field(default_factory=lambda: [0.1, 0.25, 0.5, 0.75, 0.9])
    dump_trajectory: bool = False
    dump_training_set: bool = False
    dump_traces: bool = False
    jobs: int = field(default_factory=lambda: os.cpu_count() or 1)

    def schedule(self):
        return preset(self.cost_preset, tier_costs=self.tier_costs,
                      inference_cost=self.inference_cost, policy_cost=self.policy_cost)

    def sweep_config(self) -> SweepConfig:
        return SweepConfig(
            task=self.task, lambdas=list(self.lambdas), budgets=self.budgets, folds=self.folds,
            seed=self.seed, cost_preset=self.cost_preset, tier_costs=self.tier_costs,
            inference_cost=self.inference_cost, policy_cost=self.policy_cost,
            data_path=self.data, n_examples=self.n_examples, test_fraction=self.test_fraction,
            epochs=self.epochs, learning_rate=self.learning_rate, search=self.search,
            tau=self.tau, loss=self.loss, class_weights=self.class_weights,
            class_weight_grid=list(self.class_weight_grid), use_weights=self.use_weights,
            uniform_fractions=list(self.fractions), myopic_quantiles=list(self.myopic_quantiles),
            anytime=self.anytime, anytime_lambda=self.anytime_lambda,
            policy_epochs=self.policy_epochs, gate_on=self.gate_on, jobs=self.jobs)


def _floats(text: str) -> list[float]:
    """Comma-separated numbers; ``inf`` allowed."""
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


_ALL = COMMANDS
_DATA_CMDS = COMMANDS
_LOSS_CMDS = ("pseudo-labels", "train-policy", "sweep")

# (field, type, help, subcommands, choices)
OPTIONS = [
    ("task", str, "task family", _DATA_CMDS, ("synthetic", "ocr", "depparse")),
    ("data", str, "dataset path (OCR letter file or CoNLL-U); synthetic data is generated when omitted",
     _DATA_CMDS, None),
    ("n_examples", int, "number of examples to load or generate", _DATA_CMDS, None),
    ("test_fraction", float, "held-out fraction for the test split", _DATA_CMDS, None),
    ("split", str, "which split to process (default: train, or test for eval)",
     ("pseudo-labels", "eval"), ("train", "test", "all")),
    ("seed", int, "random seed", _ALL, None),
    ("out_dir", str, "directory for artifacts and the manifest", _ALL, None),
    ("model", str, "trained predictor file", ("pseudo-labels", "train-policy", "eval"), None),
    ("policy", str, "trained policy file", ("eval",), None),
    ("pseudo_labels", str, "precomputed pseudo-label JSON-lines (one-shot training)",
     ("train-policy",), None),
    ("epochs", int, "predictor training epochs", ("train-predictor", "train-policy", "sweep"), None),
    ("learning_rate", float, "predictor learning rate", ("train-predictor", "train-policy", "sweep"), None),
    ("cost_preset", str, "cost schedule preset", _LOSS_CMDS + ("eval",), ("paper-parse", "ocr", "unit")),
    ("tier_costs", _floats, "override per-tier costs, comma-separated", _LOSS_CMDS + ("eval",), None),
    ("inference_cost", float, "override per-inference cost", _LOSS_CMDS + ("eval",), None),
    ("policy_cost", float, "override per-policy-call cost", _LOSS_CMDS + ("eval",), None),
    ("lam", float, "cost trade-off lambda", ("pseudo-labels", "train-policy"), None),
    ("lambdas", _floats, "sorted lambda list, comma-separated", ("sweep",), None),
    ("loss", str, "structured loss", _LOSS_CMDS, ("hamming", "indicator")),
    ("search", str, "pseudo-label search", _LOSS_CMDS, tuple(k.value for k in SearchKind)),
    ("tau", float, "parsimonious search margin", _LOSS_CMDS, None),
    ("folds", int, "out-of-fold predictor folds", ("train-policy", "sweep"), None),
    ("policy_kind", str, "policy type", ("train-policy", "eval"),
     ("oneshot", "anytime", "uniform", "myopic", "zero", "full")),
    ("class_weights", _floats, "per-tier positive-class weight multipliers", ("train-policy", "sweep"), None),
    ("class_weight_grid", _floats, "scalar class-weight multipliers swept per lambda", ("sweep",), None),
    ("use_weights", _bool, "use importance weights (false: unit weights)", ("train-policy", "sweep"), None),
    ("gate_on", str, "parser tier gating key (depparse)", ("train-predictor", "train-policy", "sweep"),
     ("head", "dependent")),
    ("policy_epochs", int, "policy learner epochs", ("train-policy", "sweep"), None),
    ("anytime_lambda", float, "lambda for the anytime policy", ("sweep",), None),
    ("anytime", _bool, "include the anytime curve", ("sweep",), None),
    ("budgets", _floats, "anytime budgets, comma-separated (inf allowed)", ("eval", "sweep"), None),
    ("fractions", _floats, "uniform baseline acquisition fractions", ("eval", "sweep"), None),
    ("thresholds", _floats, "myopic confidence thresholds", ("eval",), None),
    ("myopic_quantiles", _floats, "myopic thresholds as train-confidence quantiles", ("eval", "sweep"), None),
    ("dump_trajectory", _bool, "also write trajectories.jsonl (trajectory search only)", ("pseudo-labels",), None),
    ("dump_training_set", _bool, "also write training_set.jsonl", ("train-policy",), None),
    ("dump_traces", _bool, "also write traces.jsonl", ("eval",), None),
    ("jobs", int, "worker processes (default: logical cores)", ("pseudo-labels", "train-policy", "sweep"), None),
]
_FIELD_NAMES = {f.name for f in fields(CommandConfig)}
_PATH_INPUTS = ("data", "model", "policy", "pseudo_labels")
_OUTPUT_FIELDS = ("out_dir", "subcommand", "jobs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="budgetsp", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd, help=_HELP[cmd])
        p.add_argument("--config", help="JSON config file; keys are option names with underscores")
        p.add_argument("-v", "--verbose", action="store_true")
        for name, typ, hlp, cmds, choices in OPTIONS:
            if cmd in cmds:
                p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None,
                               choices=choices, help=hlp)
    return parser


_HELP = {
    "train-predictor": "train a multi-tier structured predictor",
    "pseudo-labels": "search acquisition-state pseudo-labels for each example",
    "train-policy": "train a one-shot or anytime acquisition policy",
    "eval": "evaluate a policy or baseline with full cost accounting",
    "sweep": "accuracy-versus-cost curves for all policies and baselines",
}


def resolve_config(args: argparse.Namespace) -> CommandConfig:
    values: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
        unknown = sorted(set(loaded) - _FIELD_NAMES)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        values.update(loaded)
    for name, *_ in OPTIONS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    values["subcommand"] = args.subcommand
    try:
        return CommandConfig(**values)
    except TypeError as exc:
        raise UsageError(str(exc)) from None


def validate_paths(cfg: CommandConfig) -> None:
    """Fail fast on missing inputs and unusable output locations."""
    for name in _PATH_INPUTS:
        p = getattr(cfg, name)
        if p is not None and not Path(p).is_file():
            raise UsageError(f"--{name.replace('_', '-')}: file not found: {p}")
    if cfg.task == "ocr" and cfg.data is None:
        raise UsageError("--data is required for task 'ocr'")
    if cfg.subcommand in ("pseudo-labels", "train-policy", "eval") and cfg.model is None:
        raise UsageError(f"{cfg.subcommand} needs --model")
    if cfg.subcommand == "eval" and cfg.policy_kind in ("oneshot", "anytime") and cfg.policy is None:
        raise UsageError(f"--policy is required for --policy-kind {cfg.policy_kind}")
    if cfg.subcommand == "train-policy" and cfg.policy_kind not in ("oneshot", "anytime"):
        raise UsageError("train-policy supports --policy-kind oneshot or anytime")
    if cfg.dump_trajectory and cfg.search != "trajectory":
        raise UsageError("--dump-trajectory requires --search trajectory")
    if cfg.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if cfg.lam < 0 or cfg.tau < 0:
        raise UsageError("--lam and --tau must be nonnegative")
    try:
        cfg.sweep_config()
        cfg.schedule()
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    out = Path(cfg.out_dir)
    if out.exists() and not out.is_dir():
        raise UsageError(f"--out-dir exists and is not a directory: {out}")
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise UsageError(f"--out-dir is not writable: {out}")


# ---------------------------------------------------------------------------
# Manifests


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def versions() -> dict:
    return {"budgetsp": __version__, "numpy": np.__version__, "python": platform.python_version()}


def build_manifest(cfg: CommandConfig, outputs: list[Path]) -> dict:
    """Config, seed, versions and input digests; ``digest`` hashes exactly those inputs."""
    config = asdict(cfg)
    inputs = {name: {"path": getattr(cfg, name), "sha256": sha256_file(getattr(cfg, name))}
              for name in _PATH_INPUTS if getattr(cfg, name) is not None}
    keyed = {"command": cfg.subcommand,
             "config": {k: v for k, v in config.items() if k not in _OUTPUT_FIELDS + _PATH_INPUTS},
             "inputs": {k: v["sha256"] for k, v in inputs.items()},
             "versions": versions()}
    digest = hashlib.sha256(json.dumps(keyed, sort_keys=True).encode()).hexdigest()
    return {
        "command": cfg.subcommand,
        "config": config,
        "seed": cfg.seed,
        "versions": versions(),
        "inputs": inputs,
        "outputs": {p.name: sha256_file(p) for p in outputs},
        "schemas": {"jsonl": JSONL_SCHEMA_VERSION, "csv": 1, "weights": 1},
        "digest": digest,
    }


def write_manifest(cfg: CommandConfig, outputs: list[Path]) -> Path:
    path = Path(cfg.out_dir) / f"{cfg.subcommand}.manifest.json"
    path.write_text(json.dumps(build_manifest(cfg, outputs), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Commands


def _task(cfg: CommandConfig) -> Task:
    return load_task(cfg.sweep_config())


def _examples(cfg: CommandConfig, task: Task, default: str) -> list:
    split = cfg.split or default
    return {"train": task.train, "test": task.test, "all": task.train + task.test}[split]


def load_predictor(path):
    kind = load_container(path)[0]
    if kind == "chain-model":
        return ChainModel.load(path)
    if kind == "dep-model":
        return DepModel.load(path)
    raise FormatError(f"{path}: expected a predictor file, found {kind!r}")


def load_policy(path):
    kind = load_container(path)[0]
    return AnytimePolicy.load(path) if kind == "anytime-policy" else OneShotPolicy.load(path)


def _check_task(cfg: CommandConfig, predictor) -> None:
    want = DepModel if cfg.task == "depparse" else ChainModel
    if not isinstance(predictor, want):
        raise UsageError(f"--model holds a {type(predictor).__name__}, task {cfg.task!r} needs {want.__name__}")


def cmd_train_predictor(cfg: CommandConfig) -> list[Path]:
    task = _task(cfg)
    model = task.train_fn(task.train)
    out = Path(cfg.out_dir)
    model_path = out / "model.bspk"
    model.save(model_path)
    zero = evaluate(task.test, fixed_state_runner(zero_state_rule(model), model, preset("unit")),
                    task.metric, preset("unit"))
    full = evaluate(task.test, fixed_state_runner(all_one_rule(model), model, preset("unit")),
                    task.metric, preset("unit"))
    report = {"task": cfg.task, "train_examples": len(task.train), "test_examples": len(task.test),
              "metric": task.metric.value, "test_accuracy_cheap": zero.accuracy,
              "test_accuracy_full": full.accuracy}
    report_path = out / "train_report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("cheap-tier accuracy %.4f, full accuracy %.4f", zero.accuracy, full.accuracy)
    return [model_path, report_path]


def cmd_pseudo_labels(cfg: CommandConfig) -> list[Path]:
    task = _task(cfg)
    predictor = load_predictor(cfg.model)
    _check_task(cfg, predictor)
    data = _examples(cfg, task, "train")
    sched = cfg.schedule()
    params = ModifiedLossParams(cfg.lam, cfg.loss)
    out = Path(cfg.out_dir)
    outputs = []
    if cfg.dump_trajectory:
        results = [trajectory_search(x, x.gold, predictor, params, sched) for x in data]
        labels = [pl for _, pl in results]
        traj_path = out / "trajectories.jsonl"
        write_jsonl(traj_path, ({"id": x.uid, "states": [s.to_bitmap() for s in tr.states],
                                 "losses": list(tr.losses)} for x, (tr, _) in zip(data, results)))
        outputs.append(traj_path)
    else:
        labels = compute_pseudo_labels(data, [predictor] * len(data), params, sched, cfg.search,
                                       cfg.tau, cfg.jobs)
    path = out / "pseudo_labels.jsonl"
    write_jsonl(path, (pl.to_record(x.uid, sched) for x, pl in zip(data, labels)))
    return [path] + outputs


def cmd_train_policy(cfg: CommandConfig) -> list[Path]:
    task = _task(cfg)
    predictor = load_predictor(cfg.model)
    _check_task(cfg, predictor)
    sched = cfg.schedule()
    params = ModifiedLossParams(cfg.lam, cfg.loss)
    featurizer = default_featurizer(task.train)
    out = Path(cfg.out_dir)
    outputs = []
    if cfg.policy_kind == "anytime":
        oof = build_oof_predictions(task.train, cfg.folds, task.train_fn, seed=cfg.seed)
        policy = train_anytime(task.train, [x.gold for x in task.train], oof.assigned(), params,
                               sched, featurizer, epochs=cfg.policy_epochs, use_weights=cfg.use_weights)
    else:
        if cfg.pseudo_labels:
            recs = read_jsonl(cfg.pseudo_labels)
            by_id = {r["id"]: PseudoLabel.from_record(r) for r in recs}
            missing = [x.uid for x in task.train if x.uid not in by_id]
            if missing:
                raise DataError(f"{cfg.pseudo_labels}: no pseudo-label for {len(missing)} training "
                                f"examples (first: {missing[0]})")
            labels = [by_id[x.uid] for x in task.train]
            folds = fold_assignment(len(task.train), cfg.folds, cfg.seed)
        else:
            oof = build_oof_predictions(task.train, cfg.folds, task.train_fn, seed=cfg.seed)
            labels = compute_pseudo_labels(task.train, oof.assigned(), params, sched, cfg.search,
                                           cfg.tau, cfg.jobs)
            folds = oof.folds
        ts = build_oneshot_training_set(task.train, labels, featurizer, folds, cfg.use_weights)
        policy = train_oneshot(ts, featurizer, cfg.class_weights, epochs=cfg.policy_epochs,
                               num_tiers=predictor.num_tiers)
        policy.lam = cfg.lam
        if cfg.dump_training_set:
            ts_path = out / "training_set.jsonl"
            write_jsonl(ts_path, ts.records())
            outputs.append(ts_path)
    path = out / "policy.bspk"
    policy.save(path)
    return [path] + outputs


def _eval_rows(cfg: CommandConfig, task: Task, predictor, data) -> tuple[list, list]:
    sched = cfg.schedule()
    rows, runs = [], []

    def add(curve, control, summary):
        rows.append(curve_point(curve, control, summary))
        runs.append((curve, control, summary))

    add("anchor-zero", 0.0, evaluate(data, fixed_state_runner(zero_state_rule(predictor), predictor, sched),
                                     task.metric, sched))
    add("anchor-full", 1.0, evaluate(data, fixed_state_runner(all_one_rule(predictor), predictor, sched),
                                     task.metric, sched))
    kind = cfg.policy_kind
    if kind == "oneshot":
        policy = OneShotPolicy.load(cfg.policy)
        control = policy.lam if policy.lam is not None else math.nan
        add("oneshot", control, evaluate(data, oneshot_runner(policy, predictor, sched), task.metric, sched))
    elif kind == "anytime":
        policy = AnytimePolicy.load(cfg.policy)
        for b in cfg.budgets if cfg.budgets is not None else [0.0, math.inf]:
            add("anytime", b, evaluate(data, anytime_runner(policy, predictor, sched, b), task.metric, sched))
    elif kind == "uniform":
        for f in cfg.fractions:
            add("uniform", f, evaluate(data, uniform_runner(predictor, sched, f, cfg.seed), task.metric, sched))
    elif kind == "myopic":
        thresholds = cfg.thresholds
        if thresholds is None:
            conf = np.array([predictor.confidence(x, zero_state_rule(predictor)(x))[1] for x in task.train])
            conf = conf[np.isfinite(conf)]
            thresholds = [float(np.quantile(conf, q)) for q in cfg.myopic_quantiles] if len(conf) else [0.0]
        for t in thresholds:
            add("myopic", t, evaluate(data, myopic_runner(predictor, sched, t), task.metric, sched))
    return rows, runs


def cmd_eval(cfg: CommandConfig) -> list[Path]:
    task = _task(cfg)
    predictor = load_predictor(cfg.model)
    _check_task(cfg, predictor)
    if cfg.policy is not None and cfg.policy_kind in ("oneshot", "anytime"):
        kind = {OneShotPolicy: "oneshot", AnytimePolicy: "anytime"}[type(load_policy(cfg.policy))]
        if kind != cfg.policy_kind:
            raise UsageError(f"--policy holds a {kind} policy but --policy-kind is {cfg.policy_kind}")
    data = _examples(cfg, task, "test")
    rows, runs = _eval_rows(cfg, task, predictor, data)
    out = Path(cfg.out_dir)
    csv_path = out / "eval.csv"
    write_curve_csv(csv_path, rows)
    outputs = [csv_path]
    if cfg.dump_traces:
        sched = cfg.schedule()
        trace_path = out / "traces.jsonl"

        def records():
            for curve, control, summary in runs:
                for r in summary.records:
                    rec = r.trace.to_record(r.uid, sched)
                    rec.update(curve=curve, control=control)
                    yield rec
        write_jsonl(trace_path, records())
        outputs.append(trace_path)
    for p in rows:
        log.info("%s %s: accuracy %.4f feature_cost %.3f total %.3f", p.curve, p.control,
                 p.accuracy, p.feature_cost, p.total_cost)
    return outputs


def cmd_sweep(cfg: CommandConfig) -> list[Path]:
    scfg = cfg.sweep_config()
    csv_path = Path(cfg.out_dir) / "curve.csv"
    result = run_sweep(scfg, csv_path=csv_path)
    failed = [p for p in result.points if p.error]
    for p in failed:
        log.warning("%s at %s failed: %s", p.curve, p.control, p.error)
    return [csv_path]


HANDLERS = {
    "train-predictor": cmd_train_predictor,
    "pseudo-labels": cmd_pseudo_labels,
    "train-policy": cmd_train_policy,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        validate_paths(cfg)
        outputs = HANDLERS[cfg.subcommand](cfg)
        manifest = write_manifest(cfg, outputs)
        print(json.dumps({"outputs": [str(p) for p in outputs], "manifest": str(manifest)}))
        return EXIT_OK
    except UsageError as exc:
        print(f"budgetsp {args.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FormatError, StateSpaceTooLarge, OSError, UnicodeDecodeError) as exc:
        print(f"budgetsp {args.subcommand}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - last-resort reporting
        log.debug("internal error", exc_info=True)
        print(f"budgetsp {args.subcommand}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
