# ============================================================
# Imports
# ============================================================

import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from joblib import Parallel, delayed  # noqa: E402
from scipy.stats import spearmanr  # noqa: E402
from tqdm import tqdm  # noqa: E402

from gtboost.boosting import BoostedModel, fit, tree_seed  # noqa: E402
from gtboost.config import get_settings  # noqa: E402
from gtboost.dataset import ACTIVE_FEATURES, LabeledDataset, generate_synthetic  # noqa: E402
from gtboost.errors import ConfigError, DataError, InvariantViolation  # noqa: E402
from gtboost.grouptest import (  # noqa: E402
    GroupTestSplitter,
    build_prefix_cache,
    candidate_set,
    isolates,
    make_subset_plan,
    num_subsets,
)
from gtboost.log import get_logger  # noqa: E402
from gtboost.metrics import auc_roc, is_binary, pearson_matrix, rmse  # noqa: E402
from gtboost.models import (  # noqa: E402
    BoostConfig,
    CriterionMode,
    GTConfig,
    IsolationReport,
    MethodTiming,
    PhaseGridSpec,
    Splitter,
    SyntheticSpec,
    TimingReport,
)
from gtboost.splitcore import (  # noqa: E402
    FeatureUsageSets,
    OperationCounters,
    SplitContext,
    best_split_exhaustive,
    sse_root,
)

logger = get_logger(__name__)


def _child_seeds(*key: int, count: int = 2) -> List[int]:
    states = np.random.SeedSequence(list(key)).generate_state(count, dtype=np.uint64)
    return [int(s) for s in states]


# ============================================================
# Phase Transition Grid (root-node candidate recovery)
# ============================================================

@dataclass(frozen=True)
class PhaseGridResult:
    d_values: Tuple[int, ...]
    n_values: Tuple[int, ...]
    successes: np.ndarray
    replicates: int

    @property
    def success_rate(self) -> np.ndarray:
        return self.successes / self.replicates


def root_candidates_recovered(spec: PhaseGridSpec, d: int, n: int, replicate: int) -> bool:
    """One replicate: draw data and a subset plan, run candidate generation at the root."""
    data_seed, plan_seed = _child_seeds(spec.seed, d, n, replicate)
    ds = generate_synthetic(SyntheticSpec(n=n, d=d, noise_sd=spec.noise_sd, seed=data_seed))
    plan = make_subset_plan(d, GTConfig(s=spec.s, delta=spec.delta, seed=plan_seed))
    cache = build_prefix_cache(ds.X, plan)
    found = candidate_set(plan, np.arange(n), cache, ds.targets)
    return set(ACTIVE_FEATURES).issubset(found.features)


def _phase_cell(spec: PhaseGridSpec, d: int, n: int) -> int:
    return sum(root_candidates_recovered(spec, d, n, r) for r in range(spec.replicates))


def run_phase_grid(spec: PhaseGridSpec, workers: int = 1, progress: Optional[bool] = None) -> PhaseGridResult:
    """
    Success rate of root-node candidate recovery of the three active features over a
    (d, n) grid. Cells are independent and seeded by (seed, d, n, replicate).
    """
    cells = [(d, n) for d in spec.d_values for n in spec.n_values]
    show = get_settings().progress if progress is None else progress
    logger.info(f"[PhaseGrid] {len(cells)} cells x {spec.replicates} replicates, s={spec.s} delta={spec.delta}")
    if workers <= 1:
        counts = [_phase_cell(spec, d, n) for d, n in tqdm(cells, desc="phase-grid", disable=not show, leave=False)]
    else:
        counts = Parallel(n_jobs=workers)(delayed(_phase_cell)(spec, d, n) for d, n in cells)
    successes = np.array(counts, dtype=np.int64).reshape(len(spec.d_values), len(spec.n_values))
    for i, d in enumerate(spec.d_values):
        logger.debug(f"[PhaseGrid] d={d} rates={list(successes[i] / spec.replicates)}")
    return PhaseGridResult(tuple(spec.d_values), tuple(spec.n_values), successes, spec.replicates)


def phase_frontier(result: PhaseGridResult, level: float = 0.9) -> Tuple[Dict[int, Optional[int]], float]:
    """
    Smallest n reaching `level` in every d-row (None when never reached), and the
    Spearman correlation between d and that n over rows where it exists.
    """
    frontier: Dict[int, Optional[int]] = {}
    for i, d in enumerate(result.d_values):
        reached = np.flatnonzero(result.success_rate[i] >= level)
        frontier[d] = int(result.n_values[reached[0]]) if reached.size else None
    rows = [(d, n) for d, n in frontier.items() if n is not None]
    if len(rows) < 2 or len({n for _, n in rows}) < 2:
        return frontier, float("nan")
    rho = spearmanr([d for d, _ in rows], [n for _, n in rows])[0]
    return frontier, float(rho)


def write_phase_grid(result: PhaseGridResult, out_dir: Path) -> List[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    matrix = pd.DataFrame(
        result.success_rate,
        index=pd.Index(result.d_values, name="d"),
        columns=[f"n={n}" for n in result.n_values],
    )
    tallies = pd.DataFrame(
        [
            {"d": d, "n": n, "successes": int(result.successes[i, j]), "replicates": result.replicates,
             "success_rate": float(result.success_rate[i, j])}
            for i, d in enumerate(result.d_values)
            for j, n in enumerate(result.n_values)
        ]
    )
    rate_path, tally_path = out_dir / "phase_grid.csv", out_dir / "phase_grid_tallies.csv"
    matrix.to_csv(rate_path)
    tallies.to_csv(tally_path, index=False)
    return [rate_path, tally_path]


def render_phase_heatmap(result: PhaseGridResult, path: Path) -> Path:
    """Linear grayscale SVG heatmap; dark cells are success rates near 1."""
    plt.rcParams["svg.hashsalt"] = "gtboost"
    fig, ax = plt.subplots(figsize=(6, 4))
    image = ax.imshow(result.success_rate, cmap="Greys", vmin=0.0, vmax=1.0, origin="lower", aspect="auto")
    ax.set_xticks(range(len(result.n_values)), [str(n) for n in result.n_values])
    ax.set_yticks(range(len(result.d_values)), [str(d) for d in result.d_values])
    ax.set_xlabel("sample size n")
    ax.set_ylabel("ambient dimension d")
    ax.set_title("root-node recovery rate of the active features")
    fig.colorbar(image, ax=ax, label="success rate")
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


# ============================================================
# Isolation Monte Carlo (subset-count guarantee)
# ============================================================

def run_isolation_trial(d: int, s: int, delta: float, trials: int, seed: int = 0) -> IsolationReport:
    """
    Fraction of trials where some member of a random active set of size s is never
    the only active index of any subset in a fresh plan.
    """
    if not 1 <= s <= d:
        raise ConfigError(f"isolation trial needs 1 <= s <= d, got s={s} d={d}")
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    if seed < 0:
        raise ConfigError(f"seed must be >= 0, got {seed}")
    n_subsets = num_subsets(s, delta)
    failures = 0
    for t in range(trials):
        active_seed, plan_seed = _child_seeds(seed, t)
        active = np.random.default_rng(active_seed).choice(d, size=s, replace=False)
        plan = make_subset_plan(d, GTConfig(s=s, delta=delta, seed=plan_seed))
        failures += not isolates(plan, active)
    report = IsolationReport(
        d=d, s=s, delta=delta, trials=trials, n_subsets=n_subsets,
        failures=failures, failure_rate=failures / trials, seed=seed,
    )
    logger.info(f"[Isolation] d={d} s={s} delta={delta}: failure rate {report.failure_rate:.4f} over {trials} trials")
    return report


# ============================================================
# Timing and Operation Counts
# ============================================================

def speed_condition(n: int, d: int, s: int) -> Tuple[float, float, bool]:
    """Left and right sides of s log s log n << d / log(d/s), and whether LHS < RHS."""
    lhs = s * math.log2(s) * math.log2(n) if s > 1 else 0.0
    rhs = d / math.log2(d / s) if d > s else 0.0
    return lhs, rhs, lhs < rhs


def sample_size_window(d: int, s: int) -> Tuple[float, float]:
    """
    Constant-free sample-size window (d/s)^2 log log(d/s) <~ n <~ exp((d/s) / log(d/s))
    where group testing both finds the split feature and beats exhaustive search.
    """
    r = d / s
    low = r * r * max(1.0, math.log(math.log(r))) if r > math.e else r * r
    if r <= 1.0:
        return low, math.inf
    try:
        high = math.exp(r / math.log(r))
    except OverflowError:
        high = math.inf
    return low, high


def distinct_scan_count(X: np.ndarray, rows: np.ndarray, features: Sequence[int]) -> int:
    """Sum over features of (distinct values at the node - 1): the exhaustive scan length."""
    return int(sum(np.unique(X[rows, j]).size - 1 for j in features))


def _root_counts(ds: LabeledDataset, cfg: BoostConfig) -> OperationCounters:
    rows = np.arange(ds.m)
    features = list(range(ds.d)) if cfg.feature_subset is None else sorted(cfg.feature_subset)
    ctx = SplitContext(ds.X, ds.targets, presort=cfg.splitter == Splitter.EXHAUSTIVE)
    root_sse = sse_root(ds.targets)
    if cfg.splitter == Splitter.GROUPTEST:
        splitter = GroupTestSplitter(ds.X, cfg.gt.model_copy(update={"seed": tree_seed(cfg.seed, 0)}),
                                     None if cfg.feature_subset is None else features)
        splitter.split(ctx, rows, cfg.criterion, FeatureUsageSets(), root_sse)
        budget = splitter.plan.gt_call_budget()
        if ctx.counters.gt_calls > budget:
            raise InvariantViolation(f"root split used {ctx.counters.gt_calls} group tests, budget {budget}")
    else:
        best_split_exhaustive(ctx, rows, features, cfg.criterion, FeatureUsageSets(), root_sse)
        expected = distinct_scan_count(ds.X, rows, features)
        if ctx.counters.threshold_evaluations != expected:
            raise InvariantViolation(
                f"exhaustive root scan counted {ctx.counters.threshold_evaluations} thresholds, expected {expected}"
            )
    return ctx.counters


def _time_method(name: str, ds: LabeledDataset, cfg: BoostConfig) -> MethodTiming:
    root = _root_counts(ds, cfg)
    started = time.perf_counter()
    model = fit(ds, cfg, progress=False)
    total = time.perf_counter() - started
    return MethodTiming(
        method=name,
        rounds=len(model.trees),
        seconds_per_round=[r.seconds for r in model.history],
        total_seconds=total,
        threshold_evaluations=model.counters.threshold_evaluations,
        gt_calls=model.counters.gt_calls,
        samples_touched=model.counters.samples_touched,
        root_threshold_evaluations=root.threshold_evaluations,
        root_gt_calls=root.gt_calls,
        n_selected=len(model.omega),
        train_rmse=model.history[-1].train_rmse if model.history else rmse(np.zeros(ds.m), ds.targets),
    )


def run_timing(ds: LabeledDataset, agbm_cfg: BoostConfig, gt_cfg: BoostConfig) -> TimingReport:
    """
    Equal-rounds comparison of exhaustive A-GBM and GT-GBM: wall-clock per round,
    operation counters (whole fit and one root split) and the speed-condition verdict.
    """
    for attr in ("iterations", "shrinkage", "alpha"):
        if getattr(agbm_cfg, attr) != getattr(gt_cfg, attr):
            raise ConfigError(f"timing configs must share {attr}")
    if agbm_cfg.splitter != Splitter.EXHAUSTIVE or gt_cfg.splitter != Splitter.GROUPTEST:
        raise ConfigError("timing compares an exhaustive config against a grouptest config")
    s, delta = gt_cfg.gt.s, gt_cfg.gt.delta
    lhs, rhs, met = speed_condition(ds.m, ds.d, s)
    low, high = sample_size_window(ds.d, s)
    budget = make_subset_plan(ds.d, gt_cfg.gt).gt_call_budget()
    logger.info(f"[Timing] n={ds.m} d={ds.d} s={s}: speed condition {lhs:.1f} vs {rhs:.1f}")
    methods = [_time_method("agbm", ds, agbm_cfg), _time_method("gtgbm", ds, gt_cfg)]
    return TimingReport(
        n=ds.m, d=ds.d, s=s, delta=delta, n_subsets=num_subsets(s, delta), workers=gt_cfg.workers,
        gt_call_budget_per_node=budget,
        speed_condition_lhs=lhs, speed_condition_rhs=rhs, speed_condition_met=met,
        verdict="speed condition met" if met else "speed condition not met",
        sample_window_low=low, sample_window_high=high,
        methods=methods,
    )


# ============================================================
# GBDT-topK Baseline and Feature Importance
# ============================================================

@dataclass(frozen=True)
class ImportanceRanking:
    """Every feature index, by descending importance; ties go to the lower index."""

    order: Tuple[int, ...]
    scores: np.ndarray
    kind: str = "gain"

    @classmethod
    def from_model(cls, model: BoostedModel, kind: str = "gain") -> "ImportanceRanking":
        if kind == "gain":
            scores = np.asarray(model.feature_gain, dtype=np.float64)
        elif kind == "split":
            scores = np.asarray(model.split_counts, dtype=np.float64)
        else:
            raise ConfigError(f"importance kind must be 'gain' or 'split', got '{kind}'")
        order = np.lexsort((np.arange(scores.size), -scores))
        return cls(order=tuple(int(j) for j in order), scores=scores, kind=kind)

    def top(self, k: int) -> List[int]:
        return list(self.order[:k])


def topk_baseline(ds: LabeledDataset, k: int, base_cfg: BoostConfig,
                  importance: str = "gain") -> Tuple[BoostedModel, ImportanceRanking]:
    """Fit without penalty on all features, rank them, refit on the top k only."""
    if not 1 <= k <= ds.d:
        raise ConfigError(f"k must lie in [1, {ds.d}], got {k}")
    if base_cfg.criterion.mode == CriterionMode.MULTITASK:
        raise ConfigError("topk baseline is single-task")
    unpenalized = base_cfg.criterion.model_copy(update={"mu": 0.0})
    phase_one = base_cfg.model_copy(update={"criterion": unpenalized, "feature_subset": None})
    full_model = fit(ds, phase_one)
    ranking = ImportanceRanking.from_model(full_model, importance)
    top = sorted(ranking.top(k))
    logger.info(f"[TopK] retraining on top {k} features by {importance}: {top[:20]}{'...' if k > 20 else ''}")
    retrained = fit(ds, phase_one.model_copy(update={"feature_subset": top}))
    return retrained, ranking


def export_correlations(model: BoostedModel, ds: LabeledDataset, k: int, path: Path) -> np.ndarray:
    """Write the Pearson matrix of the model's k most important selected features as CSV."""
    ranking = ImportanceRanking.from_model(model)
    selected = [j for j in ranking.order if j in model.omega and np.ptp(ds.X[:, j]) > 0][:k]
    if len(selected) < k:
        raise DataError(f"model has only {len(selected)} non-constant selected features, {k} requested")
    corr = pearson_matrix(ds.X, selected)
    names = [ds.features.name(j) for j in selected]
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(corr, index=names, columns=names).to_csv(path)
    return corr


# ============================================================
# Penalty Sweep (selected features vs accuracy)
# ============================================================

def run_mu_sweep(train: LabeledDataset, valid: LabeledDataset, base_cfg: BoostConfig,
                 mus: Sequence[float]) -> pd.DataFrame:
    """Refit at each mu; `valid` must already be standardized with the training parameters."""
    if not valid.is_standardized:
        raise DataError("validation data must be standardized with the training parameters")
    rows = []
    for mu in mus:
        criterion = base_cfg.criterion.model_copy(update={"mu": float(mu)})
        cfg = BoostConfig.model_validate({**base_cfg.model_dump(), "criterion": criterion.model_dump()})
        started = time.perf_counter()
        model = fit(train, cfg)
        seconds = time.perf_counter() - started
        pred = model.predict_standardized(valid.X)
        rows.append({
            "mu": float(mu),
            "n_selected": len(model.omega),
            "valid_rmse": rmse(pred, valid.targets),
            "valid_auc_roc": auc_roc(pred, valid.targets) if is_binary(valid.targets) else None,
            "seconds": seconds,
        })
        logger.info(f"[MuSweep] mu={mu}: |Omega|={rows[-1]['n_selected']} valid rmse={rows[-1]['valid_rmse']:.5g}")
    return pd.DataFrame(rows)
