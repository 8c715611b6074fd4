# ============================================================
# Imports
# ============================================================

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.datasets import load_svmlight_file
from sklearn.model_selection import GroupShuffleSplit, train_test_split

from gtboost.errors import ConfigError, DataError
from gtboost.log import get_logger
from gtboost.models import StandardizationRecord, SyntheticSpec

logger = get_logger(__name__)

ColumnRef = Union[str, int]

# ============================================================
# Data Model
# ============================================================

@dataclass(frozen=True)
class FeatureMatrix:
    """
    Column-major (Fortran-ordered) m x d matrix of feature values.
    """

    values: np.ndarray
    feature_names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        values = np.asfortranarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1:
            raise DataError(f"Feature matrix must be 2-d with at least one row, got shape {values.shape}")
        if self.feature_names is not None and len(self.feature_names) != values.shape[1]:
            raise DataError(f"{len(self.feature_names)} feature names for {values.shape[1]} columns")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]

    def name(self, j: int) -> str:
        return self.feature_names[j] if self.feature_names else f"f{j}"


@dataclass(frozen=True)
class StandardizationParams:
    """Per-feature min and range; range 0 marks a constant column."""

    mins: np.ndarray
    ranges: np.ndarray

    @classmethod
    def identity(cls, d: int) -> "StandardizationParams":
        return cls(mins=np.zeros(d), ranges=np.ones(d))

    @property
    def d(self) -> int:
        return len(self.mins)

    def transform(self, values: np.ndarray, clamp: bool = True) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != self.d:
            raise DataError(f"Expected {self.d} feature columns, got shape {values.shape}")
        constant = self.ranges == 0
        scale = np.where(constant, 1.0, self.ranges)
        out = (values - self.mins) / scale
        out[:, constant] = 0.0
        if clamp:
            np.clip(out, 0.0, 1.0, out=out)
        return out

    def to_records(self) -> List[StandardizationRecord]:
        return [StandardizationRecord(min=float(lo), range=float(r)) for lo, r in zip(self.mins, self.ranges)]

    @classmethod
    def from_records(cls, records: Sequence[StandardizationRecord]) -> "StandardizationParams":
        return cls(
            mins=np.array([r.min for r in records], dtype=np.float64),
            ranges=np.array([r.range for r in records], dtype=np.float64),
        )


@dataclass(frozen=True)
class LabeledDataset:
    """
    Features plus targets, optional ranking-group ids and the standardization
    that produced the stored features (None while the data is raw).
    """

    features: FeatureMatrix
    targets: np.ndarray
    group_ids: Optional[np.ndarray] = None
    standardization: Optional[StandardizationParams] = None

    def __post_init__(self):
        targets = np.asarray(self.targets, dtype=np.float64)
        if targets.shape != (self.features.m,):
            raise DataError(f"{targets.shape[0] if targets.ndim else 0} targets for {self.features.m} samples")
        if not np.all(np.isfinite(targets)):
            bad = int(np.flatnonzero(~np.isfinite(targets))[0])
            raise DataError(f"Non-finite target at sample {bad}")
        targets.setflags(write=False)
        object.__setattr__(self, "targets", targets)
        if self.group_ids is not None:
            groups = np.asarray(self.group_ids)
            if groups.shape != targets.shape:
                raise DataError("group_ids length does not match the sample count")
            if not np.issubdtype(groups.dtype, np.integer) or (groups.size and groups.min() < 0):
                raise DataError("group_ids must be non-negative integers")
            groups = groups.astype(np.int64)
            groups.setflags(write=False)
            object.__setattr__(self, "group_ids", groups)

    @property
    def m(self) -> int:
        return self.features.m

    @property
    def d(self) -> int:
        return self.features.d

    @property
    def X(self) -> np.ndarray:
        return self.features.values

    @property
    def is_standardized(self) -> bool:
        return self.standardization is not None

    def subset(self, rows: np.ndarray) -> "LabeledDataset":
        rows = np.asarray(rows)
        return LabeledDataset(
            features=FeatureMatrix(self.X[rows], self.features.feature_names),
            targets=self.targets[rows],
            group_ids=None if self.group_ids is None else self.group_ids[rows],
            standardization=self.standardization,
        )


@dataclass(frozen=True)
class TaskBundle:
    tasks: Tuple[LabeledDataset, ...]
    task_names: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.tasks:
            raise DataError("A task bundle needs at least one task")
        dims = {t.d for t in self.tasks}
        if len(dims) != 1:
            raise DataError(f"All tasks must share the feature dimension; got {sorted(dims)} (zero-pad first)")
        names = self.task_names or tuple(f"task{t}" for t in range(len(self.tasks)))
        if len(names) != len(self.tasks):
            raise DataError(f"{len(names)} task names for {len(self.tasks)} tasks")
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "task_names", tuple(names))

    @property
    def d(self) -> int:
        return self.tasks[0].d

    def __len__(self) -> int:
        return len(self.tasks)


# ============================================================
# Loaders
# ============================================================

def _resolve_column(columns: Sequence[str], ref: ColumnRef, role: str) -> int:
    if isinstance(ref, int) or (isinstance(ref, str) and ref.lstrip("-").isdigit() and ref not in columns):
        idx = int(ref)
        if not -len(columns) <= idx < len(columns):
            raise DataError(f"{role} column index {idx} out of range for {len(columns)} columns")
        return idx % len(columns)
    if ref not in columns:
        raise DataError(f"{role} column '{ref}' not found in header {list(columns)}")
    return list(columns).index(ref)


def _parse_cells(cells: pd.Series) -> np.ndarray:
    """Correctly-rounded float parse; unparsable cells become NaN."""
    out = np.empty(len(cells), dtype=np.float64)
    for i, text in enumerate(cells):
        try:
            out[i] = float(text)
        except ValueError:
            out[i] = np.nan
    return out


def load_csv(path: str | Path, target_column: Optional[ColumnRef],
             group_column: Optional[ColumnRef] = None) -> LabeledDataset:
    """
    Load a dense CSV with a header row into a raw (unstandardized) dataset.
    With no target column every column except the group column is a feature and
    the targets are all zero (prediction input).

    Every non-group cell must parse as a finite real; missing cells are errors.
    Row numbers in error messages are 1-based file lines (the header is line 1).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Data file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.ParserError as exc:
        raise DataError(f"{path}: inconsistent column count ({exc})") from exc
    except pd.errors.EmptyDataError as exc:
        raise DataError(f"{path}: file is empty") from exc
    if frame.empty:
        raise DataError(f"{path}: no data rows")

    columns = [str(c) for c in frame.columns]
    target_idx = None if target_column is None else _resolve_column(columns, target_column, "target")
    group_idx = None if group_column is None else _resolve_column(columns, group_column, "group")
    if group_idx is not None and group_idx == target_idx:
        raise DataError("group column and target column must differ")

    parsed = {}
    for idx, name in enumerate(columns):
        cells = frame.iloc[:, idx]
        if cells.isna().any():
            row = int(np.flatnonzero(cells.isna().to_numpy())[0])
            raise DataError(f"{path}: inconsistent column count at row {row + 2}, column '{name}'")
        numbers = _parse_cells(cells.str.strip())
        bad = ~np.isfinite(numbers)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise DataError(
                f"{path}: missing or non-finite value {cells.iloc[row]!r} at row {row + 2}, column '{name}'"
            )
        parsed[idx] = numbers

    feature_idx = [i for i in range(len(columns)) if i not in (target_idx, group_idx)]
    if not feature_idx:
        raise DataError(f"{path}: no feature columns")
    values = np.column_stack([parsed[i] for i in feature_idx])
    groups = None
    if group_idx is not None:
        raw_groups = parsed[group_idx]
        if np.any(raw_groups != np.round(raw_groups)) or np.any(raw_groups < 0):
            raise DataError(f"{path}: group column '{columns[group_idx]}' must hold non-negative integers")
        groups = raw_groups.astype(np.int64)

    logger.info(f"[Data] Loaded {path.name}: m={values.shape[0]} d={values.shape[1]}")
    return LabeledDataset(
        features=FeatureMatrix(values, tuple(columns[i] for i in feature_idx)),
        targets=np.zeros(len(frame)) if target_idx is None else parsed[target_idx],
        group_ids=groups,
    )


def load_svmlight(path: str | Path) -> LabeledDataset:
    """
    Load an svmlight/libsvm file ("label idx:val ...", 1-based strictly increasing
    indices) into a dense raw dataset. Absent entries are 0.0; d is the largest index.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Data file not found: {path}")
    try:
        sparse, labels = load_svmlight_file(str(path), zero_based=False, dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if sparse.shape[0] == 0:
        raise DataError(f"{path}: no samples")
    values = sparse.toarray()
    if values.shape[1] == 0:
        values = np.zeros((values.shape[0], 1))
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: non-finite feature value")
    logger.info(f"[Data] Loaded {path.name}: m={values.shape[0]} d={values.shape[1]}")
    return LabeledDataset(features=FeatureMatrix(values), targets=labels)


def load_dataset(path: str | Path, target_column: Optional[ColumnRef] = None,
                 group_column: Optional[ColumnRef] = None) -> LabeledDataset:
    """Dispatch on extension: .svm/.libsvm/.svmlight/.txt are svmlight, everything else CSV."""
    path = Path(path)
    if path.suffix.lower() in (".svm", ".libsvm", ".svmlight", ".txt"):
        return load_svmlight(path)
    return load_csv(path, target_column, group_column)


# ============================================================
# Standardization and Splitting
# ============================================================

def standardize(ds: LabeledDataset) -> Tuple[LabeledDataset, StandardizationParams]:
    """
    Min-max scale every column into [0, 1]; constant columns become all-zero.
    The returned dataset remembers the params so predictions can reuse them.
    """
    X = ds.X
    mins = X.min(axis=0)
    ranges = X.max(axis=0) - mins
    params = StandardizationParams(mins=mins, ranges=ranges)
    scaled = params.transform(X, clamp=True)
    n_constant = int(np.sum(ranges == 0))
    if n_constant:
        logger.debug(f"[Data] {n_constant} constant column(s) mapped to zero")
    out = LabeledDataset(
        features=FeatureMatrix(scaled, ds.features.feature_names),
        targets=ds.targets,
        group_ids=ds.group_ids,
        standardization=params,
    )
    return out, params


def apply_standardization(ds: LabeledDataset, params: StandardizationParams) -> LabeledDataset:
    """Scale held-out data with training params (clamped to [0, 1])."""
    return LabeledDataset(
        features=FeatureMatrix(params.transform(ds.X, clamp=True), ds.features.feature_names),
        targets=ds.targets,
        group_ids=ds.group_ids,
        standardization=params,
    )


def train_valid_split(ds: LabeledDataset, fraction: float, seed: int = 0) -> Tuple[LabeledDataset, LabeledDataset]:
    """
    Seeded train/validation partition. With group ids, whole groups go to one side
    and `fraction` is the share of groups kept for training.
    """
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"split fraction must lie in (0, 1), got {fraction}")
    if ds.m < 2:
        raise DataError("Need at least 2 samples to split")
    rows = np.arange(ds.m)
    try:
        if ds.group_ids is None:
            train_rows, valid_rows = train_test_split(rows, train_size=fraction, random_state=seed, shuffle=True)
        else:
            splitter = GroupShuffleSplit(n_splits=1, train_size=fraction, random_state=seed)
            train_rows, valid_rows = next(splitter.split(rows, groups=ds.group_ids))
    except ValueError as exc:
        raise DataError(f"Cannot split {ds.m} samples at fraction {fraction}: {exc}") from exc
    return ds.subset(np.sort(train_rows)), ds.subset(np.sort(valid_rows))


# ============================================================
# Synthetic Sparse Additive Data
# ============================================================

ACTIVE_FEATURES = (0, 1, 2)


def synthetic_response(X: np.ndarray) -> np.ndarray:
    """y = 2 x_1 - 3 * 2^{x_2} + log2(1 + x_3) on the first three columns."""
    X = np.asarray(X, dtype=np.float64)
    return 2.0 * X[:, 0] - 3.0 * np.exp2(X[:, 1]) + np.log2(1.0 + X[:, 2])


def generate_synthetic(spec: SyntheticSpec) -> LabeledDataset:
    """
    Draw n samples of d i.i.d. U[0,1] features; only columns 0..2 drive the target.
    Output is already on the [0,1] scale, so the identity standardization is attached.
    """
    if spec.d < 3:
        raise ConfigError(f"synthetic data needs d >= 3, got {spec.d}")
    rng = np.random.default_rng(spec.seed)
    X = rng.random((spec.n, spec.d))
    noise = rng.normal(0.0, spec.noise_sd, spec.n) if spec.noise_sd > 0 else np.zeros(spec.n)
    y = synthetic_response(X) + noise
    return LabeledDataset(
        features=FeatureMatrix(X),
        targets=y,
        standardization=StandardizationParams.identity(spec.d),
    )


# ============================================================
# Multitask Plumbing
# ============================================================

def zero_pad(datasets: Sequence[LabeledDataset]) -> List[LabeledDataset]:
    """Right-pad every dataset with zero columns up to the widest d."""
    width = max(ds.d for ds in datasets)
    padded = []
    for ds in datasets:
        if ds.d == width:
            padded.append(ds)
            continue
        extra = np.zeros((ds.m, width - ds.d))
        names = None
        if ds.features.feature_names:
            names = ds.features.feature_names + tuple(f"pad{j}" for j in range(ds.d, width))
        std = ds.standardization
        if std is not None:
            std = StandardizationParams(
                mins=np.concatenate([std.mins, np.zeros(width - ds.d)]),
                ranges=np.concatenate([std.ranges, np.zeros(width - ds.d)]),
            )
        padded.append(replace(ds, features=FeatureMatrix(np.hstack([ds.X, extra]), names), standardization=std))
    return padded


def split_tasks(ds: LabeledDataset, task_ids: Sequence) -> TaskBundle:
    """Partition one dataset into a TaskBundle by a per-sample task label (sorted label order)."""
    task_ids = np.asarray(task_ids)
    if task_ids.shape != (ds.m,):
        raise DataError("task ids must have one entry per sample")
    labels = sorted(set(task_ids.tolist()))
    tasks = tuple(ds.subset(np.flatnonzero(task_ids == label)) for label in labels)
    return TaskBundle(tasks=tasks, task_names=tuple(str(label) for label in labels))


def pop_feature(ds: LabeledDataset, name: ColumnRef) -> Tuple[LabeledDataset, np.ndarray]:
    """Remove one feature column (by header name or index) and return it alongside the rest."""
    names = ds.features.feature_names or tuple(str(j) for j in range(ds.d))
    j = _resolve_column(names, name, "task")
    if ds.d < 2:
        raise DataError("cannot remove the only feature column")
    keep = [i for i in range(ds.d) if i != j]
    rest = LabeledDataset(
        features=FeatureMatrix(ds.X[:, keep], tuple(names[i] for i in keep) if ds.features.feature_names else None),
        targets=ds.targets,
        group_ids=ds.group_ids,
        standardization=None,
    )
    return rest, ds.X[:, j].copy()
