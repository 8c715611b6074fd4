# ============================================================
# Imports
# ============================================================

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Set, Union

import numpy as np
from pydantic import ValidationError
from tqdm import tqdm

from gtboost.config import get_settings
from gtboost.dataset import LabeledDataset, StandardizationParams, TaskBundle
from gtboost.errors import ConfigError, DataError, ModelFormatError
from gtboost.grouptest import GroupTestSplitter
from gtboost.log import get_logger
from gtboost.models import (
    MODEL_FORMAT_VERSION,
    BoostConfig,
    CriterionMode,
    ModelFile,
    MultitaskModelFile,
    RoundLog,
    Splitter,
)
from gtboost.splitcore import (
    ExhaustiveSplitter,
    FeatureUsageSets,
    NodeSplitter,
    OperationCounters,
    RegressionTree,
    SplitContext,
    fit_tree,
)

logger = get_logger(__name__)

# ============================================================
# Models
# ============================================================

@dataclass
class BoostedModel:
    """
    H(x) = base + shrinkage * sum_k h_k(x) on standardized inputs.
    `history`, `counters` and `train_residuals` describe the fit and are not persisted.
    """

    base_prediction: float
    trees: List[RegressionTree]
    shrinkage: float
    omega: Set[int]
    standardization: StandardizationParams
    feature_gain: np.ndarray
    split_counts: np.ndarray
    mode: CriterionMode = CriterionMode.AGBM
    history: List[RoundLog] = field(default_factory=list, repr=False)
    counters: OperationCounters = field(default_factory=OperationCounters, repr=False)
    train_residuals: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def d(self) -> int:
        return self.standardization.d

    def predict_standardized(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.predict(X)
        return self.base_prediction + self.shrinkage * total

    def to_record(self) -> ModelFile:
        return ModelFile(
            version=MODEL_FORMAT_VERSION,
            mode=self.mode,
            shrinkage=self.shrinkage,
            base=self.base_prediction,
            standardization=self.standardization.to_records(),
            trees=[tree.to_record() for tree in self.trees],
            omega=sorted(self.omega),
            feature_gain=[float(g) for g in self.feature_gain],
            split_counts=[int(c) for c in self.split_counts],
        )

    @classmethod
    def from_record(cls, record: ModelFile) -> "BoostedModel":
        standardization = StandardizationParams.from_records(record.standardization)
        d = standardization.d
        if len(record.feature_gain) != d:
            raise ModelFormatError(f"feature_gain has {len(record.feature_gain)} entries for {d} features")
        try:
            trees = [RegressionTree.from_record(t, d) for t in record.trees]
        except DataError as exc:
            raise ModelFormatError(str(exc)) from exc
        split_counts = np.array(record.split_counts, dtype=np.int64) if record.split_counts else sum(
            (t.split_counts for t in trees), np.zeros(d, dtype=np.int64)
        )
        return cls(
            base_prediction=record.base,
            trees=trees,
            shrinkage=record.shrinkage,
            omega=set(record.omega),
            standardization=standardization,
            feature_gain=np.array(record.feature_gain, dtype=np.float64),
            split_counts=split_counts,
            mode=record.mode,
        )


@dataclass
class MultitaskModel:
    models: List[BoostedModel]
    task_names: List[str]
    omega_group: Set[int]

    @property
    def omega_task(self) -> List[Set[int]]:
        return [m.omega for m in self.models]

    def to_record(self) -> MultitaskModelFile:
        return MultitaskModelFile(
            version=MODEL_FORMAT_VERSION,
            task_names=list(self.task_names),
            omega_group=sorted(self.omega_group),
            tasks=[m.to_record() for m in self.models],
        )

    @classmethod
    def from_record(cls, record: MultitaskModelFile) -> "MultitaskModel":
        return cls(
            models=[BoostedModel.from_record(t) for t in record.tasks],
            task_names=list(record.task_names),
            omega_group=set(record.omega_group),
        )


AnyModel = Union[BoostedModel, MultitaskModel]

# ============================================================
# Helpers
# ============================================================

def tree_seed(seed: int, k: int) -> int:
    """Seed of tree k's subset plan, derived from the model seed."""
    return int(np.random.SeedSequence([seed, k]).generate_state(1, dtype=np.uint64)[0])


def _allowed_features(cfg: BoostConfig, d: int) -> List[int]:
    if cfg.feature_subset is None:
        return list(range(d))
    if max(cfg.feature_subset) >= d:
        raise ConfigError(f"feature_subset index {max(cfg.feature_subset)} out of range for d={d}")
    return sorted(cfg.feature_subset)


def _make_splitter(cfg: BoostConfig, X: np.ndarray, k: int, allowed: List[int]) -> NodeSplitter:
    if cfg.splitter == Splitter.GROUPTEST:
        gt = cfg.gt.model_copy(update={"seed": tree_seed(cfg.seed, k)})
        return GroupTestSplitter(X, gt, None if cfg.feature_subset is None else allowed)
    return ExhaustiveSplitter(allowed)


def _check_training_data(ds: LabeledDataset) -> None:
    if not ds.is_standardized:
        raise DataError("training data must be standardized first (dataset.standardize)")
    if ds.m < 2:
        raise DataError(f"need at least 2 training samples, got {ds.m}")


def _rmse(residuals: np.ndarray) -> float:
    return float(np.sqrt(np.mean(residuals * residuals)))


class _TaskState:
    """Per-task boosting state: H, residuals, Omega^t and the accumulated importances."""

    def __init__(self, ds: LabeledDataset, cfg: BoostConfig):
        self.ds = ds
        self.ctx = SplitContext(ds.X, presort=cfg.splitter == Splitter.EXHAUSTIVE, workers=cfg.workers)
        self.prediction = np.zeros(ds.m)
        self.residuals = ds.targets.copy()
        self.omega: Set[int] = set()
        self.trees: List[RegressionTree] = []
        self.gain = np.zeros(ds.d)
        self.split_counts = np.zeros(ds.d, dtype=np.int64)
        self.history: List[RoundLog] = []

    def add_tree(self, tree: RegressionTree, shrinkage: float, k: int, started: float) -> Set[int]:
        self.trees.append(tree)
        self.prediction += shrinkage * tree.predict(self.ds.X)
        self.residuals = self.ds.targets - self.prediction
        used = tree.features_used()
        self.omega |= used
        self.gain += tree.feature_gain
        self.split_counts += tree.split_counts
        self.history.append(RoundLog(
            round=k + 1, train_rmse=_rmse(self.residuals), n_selected=len(self.omega),
            seconds=time.perf_counter() - started,
        ))
        return used

    def to_model(self, cfg: BoostConfig) -> BoostedModel:
        return BoostedModel(
            base_prediction=0.0,
            trees=self.trees,
            shrinkage=cfg.shrinkage,
            omega=set(self.omega),
            standardization=self.ds.standardization,
            feature_gain=self.gain,
            split_counts=self.split_counts,
            mode=cfg.criterion.mode,
            history=self.history,
            counters=self.ctx.counters,
            train_residuals=self.residuals,
        )


def _rounds(cfg: BoostConfig, label: str, progress: Optional[bool]):
    show = get_settings().progress if progress is None else progress
    return tqdm(range(cfg.iterations), desc=label, disable=not show, leave=False)


# ============================================================
# Single-Task Boosting (GBFS / A-GBM / GT-GBM)
# ============================================================

def fit(ds: LabeledDataset, cfg: BoostConfig, progress: Optional[bool] = None) -> BoostedModel:
    """
    Boost cfg.iterations trees on squared loss, starting from H = 0.

    Each round fits a tree to the residuals y - H with the configured criterion and
    splitter, adds shrinkage * tree to H, and adds the tree's features to Omega.
    """
    _check_training_data(ds)
    if cfg.criterion.mode == CriterionMode.MULTITASK:
        raise ConfigError("criterion mode 'multitask' needs fit_multitask")
    allowed = _allowed_features(cfg, ds.d)
    state = _TaskState(ds, cfg)
    logger.info(
        f"[Boost] fit mode={cfg.criterion.mode.value} splitter={cfg.splitter.value} "
        f"N={cfg.iterations} m={ds.m} d={ds.d} mu={cfg.criterion.mu}"
    )
    for k in _rounds(cfg, "boost", progress):
        started = time.perf_counter()
        splitter = _make_splitter(cfg, ds.X, k, allowed)
        usage = FeatureUsageSets(omega=set(state.omega))
        tree = fit_tree(state.ctx, state.residuals, cfg.criterion, usage, cfg.alpha, splitter)
        state.add_tree(tree, cfg.shrinkage, k, started)
        logger.debug(f"[Boost] round {k + 1}/{cfg.iterations} rmse={state.history[-1].train_rmse:.6g} "
                     f"|Omega|={len(state.omega)}")
    model = state.to_model(cfg)
    final_rmse = state.history[-1].train_rmse if state.history else _rmse(state.residuals)
    logger.info(f"[Boost] done: {len(model.trees)} trees, |Omega|={len(model.omega)}, train rmse={final_rmse:.6g}")
    return model


# ============================================================
# Multitask Boosting
# ============================================================

def fit_multitask(tb: TaskBundle, cfg: BoostConfig, progress: Optional[bool] = None) -> MultitaskModel:
    """
    Round-robin boosting over tasks (rounds outer, tasks inner). Omega_G grows after
    every task's tree, so later tasks in a round see earlier tasks' selections.
    """
    if cfg.criterion.mode != CriterionMode.MULTITASK:
        raise ConfigError(f"fit_multitask needs criterion mode 'multitask', got '{cfg.criterion.mode.value}'")
    for ds in tb.tasks:
        _check_training_data(ds)
    allowed = _allowed_features(cfg, tb.d)
    states = [_TaskState(ds, cfg) for ds in tb.tasks]
    omega_group: Set[int] = set()
    logger.info(
        f"[Boost] multitask fit T={len(tb)} N={cfg.iterations} d={tb.d} "
        f"mu_group={cfg.criterion.mu_group} mu_task={cfg.criterion.mu_task}"
    )
    for k in _rounds(cfg, "multitask", progress):
        for state in states:
            started = time.perf_counter()
            splitter = _make_splitter(cfg, state.ds.X, k, allowed)
            usage = FeatureUsageSets(omega=set(state.omega), omega_group=set(omega_group),
                                     omega_task=set(state.omega))
            tree = fit_tree(state.ctx, state.residuals, cfg.criterion, usage, cfg.alpha, splitter)
            omega_group |= state.add_tree(tree, cfg.shrinkage, k, started)
    model = MultitaskModel(
        models=[state.to_model(cfg) for state in states],
        task_names=list(tb.task_names),
        omega_group=omega_group,
    )
    logger.info(f"[Boost] multitask done: |Omega_G|={len(omega_group)}, "
                f"|Omega^t|={[len(m.omega) for m in model.models]}")
    return model


# ============================================================
# Inference and Persistence
# ============================================================

def predict(model: BoostedModel, features: np.ndarray) -> np.ndarray:
    """Standardize raw features with the model's params (clamped to [0,1]) and sum the trees."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features.reshape(1, -1)
    if features.shape[1] != model.d:
        raise DataError(f"model expects {model.d} features, got {features.shape[1]}")
    return model.predict_standardized(model.standardization.transform(features, clamp=True))


def save_model(model: AnyModel, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model.to_record().model_dump_json(indent=1))
    logger.info(f"[Model] saved to {path}")
    return path


def load_model(path: str | Path) -> AnyModel:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Model file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: malformed model file ({exc.msg} at char {exc.pos})") from exc
    if not isinstance(raw, dict):
        raise ModelFormatError(f"{path}: model file must hold a JSON object")
    version = raw.get("version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported model format version {version!r}; this build reads version {MODEL_FORMAT_VERSION}"
        )
    try:
        if raw.get("kind") == "multitask":
            return MultitaskModel.from_record(MultitaskModelFile.model_validate(raw))
        return BoostedModel.from_record(ModelFile.model_validate(raw))
    except ValidationError as exc:
        raise ModelFormatError(f"{path}: malformed model file ({exc.error_count()} schema errors)") from exc


def predict_any(model: AnyModel, features: np.ndarray, task: Optional[Sequence[int]] = None) -> np.ndarray:
    """Predict with either model kind; multitask models need a per-row task index."""
    if isinstance(model, BoostedModel):
        return predict(model, features)
    if task is None:
        raise DataError("multitask model needs a task index per row")
    task = np.asarray(task, dtype=np.int64)
    features = np.asarray(features, dtype=np.float64)
    if task.shape != (features.shape[0],):
        raise DataError(f"task index length {task.size} does not match {features.shape[0]} rows")
    bad = (task < 0) | (task >= len(model.models))
    if bad.any():
        raise DataError(f"task index {int(task[bad][0])} outside [0, {len(model.models)})")
    out = np.zeros(features.shape[0])
    for t, sub in enumerate(model.models):
        rows = np.flatnonzero(task == t)
        if rows.size:
            out[rows] = predict(sub, features[rows])
    return out
