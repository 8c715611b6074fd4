# ============================================================
# Imports
# ============================================================

import functools
import json
import sys
from pathlib import Path
from typing import Annotated, Any, Callable, Dict, List, Optional, Tuple

import click
import numpy as np
import pandas as pd
import typer
from rich.console import Console
from rich.markup import escape
from typer.core import TyperGroup

from gtboost import experiments
from gtboost.boosting import (
    BoostedModel,
    MultitaskModel,
    fit,
    fit_multitask,
    load_model,
    predict_any,
    save_model,
)
from gtboost.config import get_settings, load_config_file, merge_params
from gtboost.dataset import (
    LabeledDataset,
    TaskBundle,
    apply_standardization,
    generate_synthetic,
    load_dataset,
    pop_feature,
    split_tasks,
    standardize,
    train_valid_split,
)
from gtboost.errors import ConfigError, DataError, GTBoostError
from gtboost.log import get_logger
from gtboost.metrics import auc_pr, auc_roc, evaluate, mrr, precision_at_k
from gtboost.models import (
    BoostConfig,
    CriterionMode,
    EvalReport,
    GTConfig,
    PhaseGridSpec,
    RunConfig,
    SplitCriterionConfig,
    Splitter,
    SyntheticSpec,
    validated,
)

logger = get_logger(__name__)
console = Console(stderr=True)


class UsageExitGroup(TyperGroup):
    """Usage errors (bad flags, missing options) exit with the config-error code."""

    def make_context(self, info_name, args, parent=None, **extra):
        try:
            return super().make_context(info_name, args, parent=parent, **extra)
        except click.UsageError as exc:
            exc.exit_code = ConfigError.exit_code
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as exc:
            exc.exit_code = ConfigError.exit_code
            raise


app = typer.Typer(cls=UsageExitGroup, add_completion=False, no_args_is_help=True,
                  help="Sparse gradient boosting with group-testing split search.")
experiment_app = typer.Typer(no_args_is_help=True, help="Experiment suite: grids, trials, timing, baselines.")
app.add_typer(experiment_app, name="experiment")

# ============================================================
# Modes and Defaults
# ============================================================

MODES: Dict[str, Tuple[CriterionMode, Splitter]] = {
    "plain": (CriterionMode.PLAIN, Splitter.EXHAUSTIVE),
    "gbfs": (CriterionMode.GBFS, Splitter.EXHAUSTIVE),
    "agbm": (CriterionMode.AGBM, Splitter.EXHAUSTIVE),
    "gtgbm": (CriterionMode.AGBM, Splitter.GROUPTEST),
    "multitask-agbm": (CriterionMode.MULTITASK, Splitter.EXHAUSTIVE),
    "multitask-gtgbm": (CriterionMode.MULTITASK, Splitter.GROUPTEST),
}

DATA_DEFAULTS: Dict[str, Any] = {
    "data": None,
    "synthetic": None,
    "target": None,
    "group_column": None,
    "task_column": None,
}

BOOST_DEFAULTS: Dict[str, Any] = {
    "mode": "agbm",
    "mu": 0.01,
    "mu_group": 0.0,
    "mu_task": 0.0,
    "shrinkage": 0.1,
    "alpha": 0.02,
    "iterations": 200,
    "s": 10,
    "delta": 0.1,
    "seed": 0,
    "workers": 1,
    "output_dir": None,
}

# ============================================================
# Shared Options
# ============================================================

ConfigOpt = Annotated[Optional[Path], typer.Option("--config", help="key = value file; flags override it")]
OutputDirOpt = Annotated[Optional[Path], typer.Option("--output-dir", help="Defaults to $GTBOOST_OUTPUT_DIR")]
DataOpt = Annotated[Optional[Path], typer.Option("--data", help="CSV (header row) or svmlight file")]
SyntheticOpt = Annotated[Optional[str], typer.Option("--synthetic", help="Synthetic data, e.g. n=2000,d=100")]
TargetOpt = Annotated[Optional[str], typer.Option("--target", help="CSV target column (name or index)")]
GroupOpt = Annotated[Optional[str], typer.Option("--group-column", help="CSV query-group column")]
TaskOpt = Annotated[Optional[str], typer.Option("--task-column", help="CSV task column (multitask modes)")]
ModeOpt = Annotated[Optional[str], typer.Option("--mode", help=" | ".join(MODES))]
MuOpt = Annotated[Optional[float], typer.Option("--mu", help="Penalty for a feature new to the model")]
MuGroupOpt = Annotated[Optional[float], typer.Option("--mu-group", help="Multitask penalty, new to every task")]
MuTaskOpt = Annotated[Optional[float], typer.Option("--mu-task", help="Multitask penalty, new to this task")]
ShrinkageOpt = Annotated[Optional[float], typer.Option("--shrinkage", help="Learning rate epsilon")]
AlphaOpt = Annotated[Optional[float], typer.Option("--alpha", help="Min node fraction allowed to split")]
IterationsOpt = Annotated[Optional[int], typer.Option("--iterations", help="Boosting rounds N")]
SOpt = Annotated[Optional[int], typer.Option("--s", help="Sparsity guess for group testing")]
DeltaOpt = Annotated[Optional[float], typer.Option("--delta", help="Group-testing failure probability")]
SeedOpt = Annotated[Optional[int], typer.Option("--seed")]
WorkersOpt = Annotated[Optional[int], typer.Option("--workers", help="Parallel workers (results do not change)")]
ModelOpt = Annotated[Path, typer.Option("--model", help="Model JSON written by `train`")]

# ============================================================
# Helpers
# ============================================================

def handle_errors(command: Callable) -> Callable:
    """Report GTBoostError in red and exit with its code."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except GTBoostError as exc:
            console.print(escape(f"[Error] {exc}"), style="red")
            raise typer.Exit(code=exc.exit_code)

    return wrapper


def _progress() -> bool:
    return get_settings().progress or sys.stderr.isatty()


def resolve_params(defaults: Dict[str, Any], config: Optional[Path], flags: Dict[str, Any]) -> Dict[str, Any]:
    from_file = load_config_file(config) if config is not None else {}
    return merge_params(defaults, from_file, flags)


def _output_dir(params: Dict[str, Any]) -> Path:
    out = Path(params.get("output_dir") or get_settings().output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(params: Dict[str, Any]) -> int:
    try:
        return int(params.get("seed") or 0)
    except ValueError as exc:
        raise ConfigError(f"seed must be an integer, got {params.get('seed')!r}") from exc


def write_run_config(command: str, params: Dict[str, Any], out_dir: Path) -> Path:
    record = RunConfig(
        command=command,
        params={k: str(v) if isinstance(v, Path) else v for k, v in params.items()},
        seed=_seed(params),
        output_dir=out_dir,
    )
    path = out_dir / "resolved_config.json"
    path.write_text(record.model_dump_json(indent=1))
    return path


def parse_synthetic(text: str) -> SyntheticSpec:
    """'n=2000,d=100[,noise=1.0][,seed=3]' -> SyntheticSpec."""
    fields: Dict[str, str] = {}
    for part in text.split(","):
        key, sep, value = part.partition("=")
        if not sep or not value.strip():
            raise ConfigError(f"--synthetic expects key=value pairs, got '{part}'")
        fields[key.strip().lower()] = value.strip()
    if "noise" in fields:
        fields["noise_sd"] = fields.pop("noise")
    unknown = set(fields) - {"n", "d", "noise_sd", "seed"}
    if unknown:
        raise ConfigError(f"--synthetic: unknown key(s) {sorted(unknown)}")
    return validated(SyntheticSpec, fields)


def parse_int_list(text: str, name: str) -> List[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"{name} expects comma-separated integers, got '{text}'") from exc


def parse_float_list(text: str, name: str) -> List[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"{name} expects comma-separated numbers, got '{text}'") from exc


def build_boost_config(params: Dict[str, Any]) -> BoostConfig:
    mode = str(params["mode"]).lower()
    if mode not in MODES:
        raise ConfigError(f"unknown mode '{mode}'; choose one of {', '.join(MODES)}")
    criterion_mode, splitter = MODES[mode]
    criterion = validated(SplitCriterionConfig, {
        "mode": criterion_mode,
        "mu": params["mu"] if criterion_mode != CriterionMode.MULTITASK else 0.0,
        "mu_group": params["mu_group"] if criterion_mode == CriterionMode.MULTITASK else 0.0,
        "mu_task": params["mu_task"] if criterion_mode == CriterionMode.MULTITASK else 0.0,
    })
    gt = validated(GTConfig, {"s": params["s"], "delta": params["delta"]}) if splitter == Splitter.GROUPTEST else None
    return validated(BoostConfig, {
        "iterations": params["iterations"],
        "shrinkage": params["shrinkage"],
        "alpha": params["alpha"],
        "criterion": criterion,
        "splitter": splitter,
        "gt": gt,
        "seed": params["seed"],
        "workers": params["workers"],
    })


def _task_labels(values: np.ndarray) -> List[str]:
    return [str(int(v)) if float(v).is_integer() else repr(float(v)) for v in values]


def load_raw(params: Dict[str, Any]) -> Tuple[LabeledDataset, Optional[List[str]]]:
    """Raw dataset from --data or --synthetic, plus per-row task labels when --task-column is set."""
    if params.get("synthetic"):
        if params.get("data"):
            raise ConfigError("give either --data or --synthetic, not both")
        return generate_synthetic(parse_synthetic(params["synthetic"])), None
    if not params.get("data"):
        raise ConfigError("--data or --synthetic is required")
    ds = load_dataset(params["data"], params.get("target"), params.get("group_column"))
    if not params.get("task_column"):
        return ds, None
    ds, tasks = pop_feature(ds, params["task_column"])
    return ds, _task_labels(tasks)


def _standardized(ds: LabeledDataset) -> LabeledDataset:
    return ds if ds.is_standardized else standardize(ds)[0]


def load_training(params: Dict[str, Any]) -> LabeledDataset:
    ds, tasks = load_raw(params)
    if tasks is not None:
        raise ConfigError("--task-column is only used by multitask modes")
    return _standardized(ds)


def load_training_bundle(params: Dict[str, Any]) -> TaskBundle:
    ds, tasks = load_raw(params)
    if tasks is None:
        raise ConfigError("multitask modes need --task-column")
    bundle = split_tasks(ds, tasks)
    return TaskBundle(tasks=tuple(_standardized(t) for t in bundle.tasks), task_names=bundle.task_names)


def _require_target(params: Dict[str, Any]) -> None:
    data = params.get("data")
    if data is not None and Path(data).suffix.lower() not in (".svm", ".libsvm", ".svmlight", ".txt") \
            and params.get("target") is None:
        raise DataError("evaluation needs a label column (--target)")


def _task_index(model: MultitaskModel, labels: Optional[List[str]]) -> Optional[np.ndarray]:
    if labels is None:
        raise ConfigError("multitask models need --task-column")
    lookup = {name: t for t, name in enumerate(model.task_names)}
    unknown = sorted(set(labels) - set(lookup))
    if unknown:
        raise DataError(f"task label(s) {unknown[:5]} not in the model's tasks {model.task_names}")
    return np.array([lookup[label] for label in labels], dtype=np.int64)


def _predict(model, ds: LabeledDataset, labels: Optional[List[str]]) -> np.ndarray:
    if isinstance(model, MultitaskModel):
        return predict_any(model, ds.X, _task_index(model, labels))
    return predict_any(model, ds.X)


def _features_used(model) -> int:
    return len(model.omega) if isinstance(model, BoostedModel) else len(model.omega_group)


def _write_json(path: Path, payload: str) -> Path:
    path.write_text(payload)
    logger.info(f"[CLI] wrote {path}")
    return path


# ============================================================
# train / predict / evaluate
# ============================================================

@app.command("train")
@handle_errors
def cmd_train(
    mode: ModeOpt = None, mu: MuOpt = None, mu_group: MuGroupOpt = None, mu_task: MuTaskOpt = None,
    shrinkage: ShrinkageOpt = None, alpha: AlphaOpt = None, iterations: IterationsOpt = None,
    s: SOpt = None, delta: DeltaOpt = None, seed: SeedOpt = None, workers: WorkersOpt = None,
    data: DataOpt = None, synthetic: SyntheticOpt = None, target: TargetOpt = None,
    group_column: GroupOpt = None, task_column: TaskOpt = None,
    config: ConfigOpt = None, output_dir: OutputDirOpt = None,
):
    """Fit a model; writes model.json, rounds.csv and resolved_config.json."""
    flags = dict(locals())
    flags.pop("config")
    params = resolve_params({**BOOST_DEFAULTS, **DATA_DEFAULTS}, config, flags)
    cfg = build_boost_config(params)
    out_dir = _output_dir(params)

    if cfg.criterion.mode == CriterionMode.MULTITASK:
        model = fit_multitask(load_training_bundle(params), cfg, progress=_progress())
        rounds = pd.concat(
            [pd.DataFrame([r.model_dump() for r in m.history]).assign(task=name)
             for name, m in zip(model.task_names, model.models)],
            ignore_index=True,
        )
    else:
        model = fit(load_training(params), cfg, progress=_progress())
        rounds = pd.DataFrame([r.model_dump() for r in model.history],
                              columns=["round", "train_rmse", "n_selected", "seconds"])

    save_model(model, out_dir / "model.json")
    rounds.to_csv(out_dir / "rounds.csv", index=False)
    write_run_config("train", params, out_dir)
    console.print(f"[green]model -> {out_dir / 'model.json'} ({_features_used(model)} features used)[/green]")


@app.command("predict")
@handle_errors
def cmd_predict(
    model: ModelOpt, data: DataOpt = None, target: TargetOpt = None, group_column: GroupOpt = None,
    task_column: TaskOpt = None, output_dir: OutputDirOpt = None,
):
    """Score a data file; writes predictions.csv with one score per line."""
    params = {"model": model, **DATA_DEFAULTS, "data": data, "target": target, "group_column": group_column,
              "task_column": task_column, "output_dir": output_dir}
    loaded = load_model(model)
    ds, labels = load_raw(params)
    pred = _predict(loaded, ds, labels)
    out_dir = _output_dir(params)
    pd.Series(pred).to_csv(out_dir / "predictions.csv", index=False, header=False)
    write_run_config("predict", params, out_dir)
    console.print(f"[green]{pred.shape[0]} predictions -> {out_dir / 'predictions.csv'}[/green]")


METRICS = ("rmse", "auc-roc", "auc-pr", "precision-at-k", "mrr")


def _strict_metrics(report: EvalReport, pred: np.ndarray, truth: np.ndarray, groups: Optional[np.ndarray],
                    metrics: List[str], ks: List[int]) -> EvalReport:
    """Recompute explicitly requested metrics so their input errors surface instead of being skipped."""
    update: Dict[str, Any] = {}
    for name in metrics:
        if name not in METRICS:
            raise ConfigError(f"unknown metric '{name}'; choose from {', '.join(METRICS)}")
        if name == "auc-roc":
            update["auc_roc"] = auc_roc(pred, truth)
        elif name == "auc-pr":
            update["auc_pr"] = auc_pr(pred, truth)
        elif name == "precision-at-k":
            update["precision_at_k"] = {k: precision_at_k(pred, truth, k, groups) for k in ks}
        elif name == "mrr":
            update["mrr"] = mrr(pred, truth, groups)
    return report.model_copy(update=update)


@app.command("evaluate")
@handle_errors
def cmd_evaluate(
    model: ModelOpt, data: DataOpt = None, target: TargetOpt = None, group_column: GroupOpt = None,
    task_column: TaskOpt = None,
    metric: Annotated[Optional[List[str]], typer.Option("--metric", help=" | ".join(METRICS))] = None,
    k: Annotated[Optional[List[int]], typer.Option("--k", help="Cutoffs for precision@k")] = None,
    output_dir: OutputDirOpt = None,
):
    """Evaluate a model on labeled data; writes evaluation.json and echoes it."""
    params = {"model": model, **DATA_DEFAULTS, "data": data, "target": target, "group_column": group_column,
              "task_column": task_column, "metric": metric or [], "k": k or [1, 2, 5, 10],
              "output_dir": output_dir}
    _require_target(params)
    loaded = load_model(model)
    ds, labels = load_raw(params)
    pred = _predict(loaded, ds, labels)
    report = evaluate(pred, ds.targets, ds.group_ids, params["k"], _features_used(loaded))
    report = _strict_metrics(report, pred, ds.targets, ds.group_ids, params["metric"], params["k"])
    out_dir = _output_dir(params)
    _write_json(out_dir / "evaluation.json", report.model_dump_json(indent=1))
    write_run_config("evaluate", params, out_dir)
    typer.echo(report.model_dump_json(indent=1))


# ============================================================
# experiment sub-commands
# ============================================================

@experiment_app.command("phase-grid")
@handle_errors
def cmd_phase_grid(
    d_values: Annotated[Optional[str], typer.Option("--d-values", help="e.g. 15,30,45")] = None,
    n_values: Annotated[Optional[str], typer.Option("--n-values", help="e.g. 500,1000,2000")] = None,
    replicates: Annotated[Optional[int], typer.Option("--replicates")] = None,
    s: SOpt = None, delta: DeltaOpt = None,
    noise: Annotated[Optional[float], typer.Option("--noise", help="Noise standard deviation")] = None,
    seed: SeedOpt = None, workers: WorkersOpt = None,
    config: ConfigOpt = None, output_dir: OutputDirOpt = None,
):
    """Root-node recovery rate over a (d, n) grid: CSV matrix, tallies, SVG heatmap, frontier JSON."""
    flags = dict(locals())
    flags.pop("config")
    grid = PhaseGridSpec()
    defaults = {
        "d_values": ",".join(map(str, grid.d_values)), "n_values": ",".join(map(str, grid.n_values)),
        "replicates": grid.replicates, "s": grid.s, "delta": grid.delta, "noise": grid.noise_sd,
        "seed": grid.seed, "workers": 1, "output_dir": None,
    }
    params = resolve_params(defaults, config, flags)
    spec = validated(PhaseGridSpec, {
        "d_values": parse_int_list(params["d_values"], "--d-values"),
        "n_values": parse_int_list(params["n_values"], "--n-values"),
        "replicates": params["replicates"], "s": params["s"], "delta": params["delta"],
        "noise_sd": params["noise"], "seed": params["seed"],
    })
    out_dir = _output_dir(params)
    result = experiments.run_phase_grid(spec, workers=int(params["workers"]), progress=_progress())
    experiments.write_phase_grid(result, out_dir)
    experiments.render_phase_heatmap(result, out_dir / "phase_grid.svg")
    frontier, rho = experiments.phase_frontier(result)
    _write_json(out_dir / "phase_frontier.json", json.dumps(
        {"level": 0.9, "frontier": {str(d): n for d, n in frontier.items()},
         "spearman_rho": None if np.isnan(rho) else rho},
        indent=1,
    ))
    write_run_config("experiment phase-grid", params, out_dir)


@experiment_app.command("isolation")
@handle_errors
def cmd_isolation(
    d: Annotated[Optional[int], typer.Option("--d", help="Ambient dimension")] = None,
    s: SOpt = None, delta: DeltaOpt = None,
    trials: Annotated[Optional[int], typer.Option("--trials")] = None,
    seed: SeedOpt = None, config: ConfigOpt = None, output_dir: OutputDirOpt = None,
):
    """Monte Carlo check that a subset plan isolates every active feature; writes isolation.json."""
    flags = dict(locals())
    flags.pop("config")
    defaults = {"d": 90, "s": 3, "delta": 0.2, "trials": 5000, "seed": 0, "output_dir": None}
    params = resolve_params(defaults, config, flags)
    try:
        d, s, delta, trials = int(params["d"]), int(params["s"]), float(params["delta"]), int(params["trials"])
    except ValueError as exc:
        raise ConfigError(f"isolation parameters: {exc}") from exc
    report = experiments.run_isolation_trial(d, s, delta, trials, _seed(params))
    out_dir = _output_dir(params)
    _write_json(out_dir / "isolation.json", report.model_dump_json(indent=1))
    write_run_config("experiment isolation", params, out_dir)
    typer.echo(report.model_dump_json(indent=1))


@experiment_app.command("timing")
@handle_errors
def cmd_timing(
    mu: MuOpt = None, shrinkage: ShrinkageOpt = None, alpha: AlphaOpt = None, iterations: IterationsOpt = None,
    s: SOpt = None, delta: DeltaOpt = None, seed: SeedOpt = None, workers: WorkersOpt = None,
    data: DataOpt = None, synthetic: SyntheticOpt = None, target: TargetOpt = None,
    config: ConfigOpt = None, output_dir: OutputDirOpt = None,
):
    """Equal-rounds A-GBM vs GT-GBM: per-round seconds, operation counters, speed condition."""
    flags = dict(locals())
    flags.pop("config")
    defaults = {**BOOST_DEFAULTS, **DATA_DEFAULTS, "iterations": 5}
    defaults.pop("mode")
    defaults.pop("mu_group")
    defaults.pop("mu_task")
    params = resolve_params(defaults, config, flags)
    shared = {**params, "mu_group": 0.0, "mu_task": 0.0}
    agbm_cfg = build_boost_config({**shared, "mode": "agbm"})
    gt_cfg = build_boost_config({**shared, "mode": "gtgbm"})
    report = experiments.run_timing(load_training(params), agbm_cfg, gt_cfg)
    out_dir = _output_dir(params)
    _write_json(out_dir / "timing.json", report.model_dump_json(indent=1))
    write_run_config("experiment timing", params, out_dir)
    typer.echo(report.model_dump_json(indent=1))


@experiment_app.command("topk")
@handle_errors
def cmd_topk(
    k: Annotated[int, typer.Option("--k", help="Number of top-ranked features to keep")],
    importance: Annotated[Optional[str], typer.Option("--importance", help="gain | split")] = None,
    shrinkage: ShrinkageOpt = None, alpha: AlphaOpt = None, iterations: IterationsOpt = None,
    seed: SeedOpt = None, workers: WorkersOpt = None,
    data: DataOpt = None, synthetic: SyntheticOpt = None, target: TargetOpt = None,
    config: ConfigOpt = None, output_dir: OutputDirOpt = None,
):
    """Unpenalized fit, importance ranking, refit on the top k; writes model_topk.json and importance.csv."""
    flags = dict(locals())
    flags.pop("config")
    defaults = {**BOOST_DEFAULTS, **DATA_DEFAULTS, "k": None, "importance": "gain", "mode": "plain", "mu": 0.0}
    params = resolve_params(defaults, config, flags)
    cfg = build_boost_config(params)
    ds = load_training(params)
    model, ranking = experiments.topk_baseline(ds, int(params["k"]), cfg, str(params["importance"]))
    out_dir = _output_dir(params)
    save_model(model, out_dir / "model_topk.json")
    pd.DataFrame({
        "rank": np.arange(1, len(ranking.order) + 1),
        "feature": list(ranking.order),
        "name": [ds.features.name(j) for j in ranking.order],
        "score": ranking.scores[list(ranking.order)],
    }).to_csv(out_dir / "importance.csv", index=False)
    write_run_config("experiment topk", params, out_dir)


@experiment_app.command("correlations")
@handle_errors
def cmd_correlations(
    model: ModelOpt,
    k: Annotated[int, typer.Option("--k", help="Most important selected features to correlate")] = 20,
    data: DataOpt = None, synthetic: SyntheticOpt = None, target: TargetOpt = None,
    output_dir: OutputDirOpt = None,
):
    """Pearson matrix of a single-task model's top-k selected features; writes correlations.csv."""
    params = {"model": model, "k": k, **DATA_DEFAULTS, "data": data, "synthetic": synthetic,
              "target": target, "output_dir": output_dir}
    loaded = load_model(model)
    if not isinstance(loaded, BoostedModel):
        raise ConfigError("correlations need a single-task model")
    ds, _ = load_raw(params)
    out_dir = _output_dir(params)
    experiments.export_correlations(loaded, ds, k, out_dir / "correlations.csv")
    write_run_config("experiment correlations", params, out_dir)


@experiment_app.command("mu-sweep")
@handle_errors
def cmd_mu_sweep(
    mus: Annotated[Optional[str], typer.Option("--mus", help="e.g. 0,0.001,0.01,0.1")] = None,
    valid_fraction: Annotated[Optional[float], typer.Option("--valid-fraction")] = None,
    mode: ModeOpt = None, shrinkage: ShrinkageOpt = None, alpha: AlphaOpt = None,
    iterations: IterationsOpt = None, s: SOpt = None, delta: DeltaOpt = None,
    seed: SeedOpt = None, workers: WorkersOpt = None,
    data: DataOpt = None, synthetic: SyntheticOpt = None, target: TargetOpt = None,
    group_column: GroupOpt = None, config: ConfigOpt = None, output_dir: OutputDirOpt = None,
):
    """Selected features vs validation accuracy across penalties; writes mu_sweep.csv."""
    flags = dict(locals())
    flags.pop("config")
    defaults = {**BOOST_DEFAULTS, **DATA_DEFAULTS, "mus": "0,0.001,0.01,0.1", "valid_fraction": 0.2}
    params = resolve_params(defaults, config, flags)
    mu_values = parse_float_list(params["mus"], "--mus")
    cfg = build_boost_config({**params, "mu": 0.0})
    raw, tasks = load_raw(params)
    if tasks is not None or cfg.criterion.mode == CriterionMode.MULTITASK:
        raise ConfigError("mu-sweep is single-task")
    train, valid = train_valid_split(raw, 1.0 - float(params["valid_fraction"]), _seed(params))
    if raw.is_standardized:
        train_std, valid_std = train, valid
    else:
        train_std, scale = standardize(train)
        valid_std = apply_standardization(valid, scale)
    table = experiments.run_mu_sweep(train_std, valid_std, cfg, mu_values)
    out_dir = _output_dir(params)
    table.to_csv(out_dir / "mu_sweep.csv", index=False)
    write_run_config("experiment mu-sweep", params, out_dir)
    typer.echo(table.to_string(index=False))


def main() -> None:
    app()
