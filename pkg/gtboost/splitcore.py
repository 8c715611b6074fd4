# ============================================================
# Imports
# ============================================================

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Protocol, Sequence, Set, Tuple

import numpy as np
from joblib import Parallel, delayed

from gtboost.errors import DataError
from gtboost.log import get_logger
from gtboost.models import CriterionMode, LeafNodeRecord, SplitCriterionConfig, SplitNodeRecord, TreeRecord

logger = get_logger(__name__)

# ============================================================
# Operation Counters
# ============================================================

@dataclass
class OperationCounters:
    """
    Machine-independent work counters.

    threshold_evaluations: candidate thresholds scanned ((sample, threshold) pairs)
    gt_calls: group tests evaluated
    samples_touched: samples read by scans and group tests
    feature_scans: single-feature threshold scans
    """

    threshold_evaluations: int = 0
    gt_calls: int = 0
    samples_touched: int = 0
    feature_scans: int = 0

    def add(self, other: "OperationCounters") -> None:
        self.threshold_evaluations += other.threshold_evaluations
        self.gt_calls += other.gt_calls
        self.samples_touched += other.samples_touched
        self.feature_scans += other.feature_scans

    def copy(self) -> "OperationCounters":
        return OperationCounters(**self.__dict__)

    def since(self, earlier: "OperationCounters") -> "OperationCounters":
        return OperationCounters(**{k: v - getattr(earlier, k) for k, v in self.__dict__.items()})


# ============================================================
# Feature Usage Sets and Penalties
# ============================================================

@dataclass
class FeatureUsageSets:
    """
    Omega (features used so far), Omega_G (used by any task) and Omega^t (used by the
    current task). Single-task fits only consult `omega`.
    """

    omega: Set[int] = field(default_factory=set)
    omega_group: Set[int] = field(default_factory=set)
    omega_task: Set[int] = field(default_factory=set)

    def copy(self) -> "FeatureUsageSets":
        return FeatureUsageSets(set(self.omega), set(self.omega_group), set(self.omega_task))

    def mark_used(self, feature: int) -> None:
        self.omega.add(feature)
        self.omega_group.add(feature)
        self.omega_task.add(feature)

    def used(self, cfg: SplitCriterionConfig) -> Set[int]:
        return self.omega_task if cfg.mode == CriterionMode.MULTITASK else self.omega


def feature_penalty(feature: int, cfg: SplitCriterionConfig, usage: FeatureUsageSets) -> float:
    if cfg.mode == CriterionMode.PLAIN:
        return 0.0
    if cfg.mode == CriterionMode.MULTITASK:
        return (cfg.mu_group if feature not in usage.omega_group else 0.0) + (
            cfg.mu_task if feature not in usage.omega_task else 0.0
        )
    return cfg.mu if feature not in usage.omega else 0.0


def split_criterion(raw_sse: float, feature: int, cfg: SplitCriterionConfig,
                    usage: FeatureUsageSets, sse_r: float) -> float:
    """Value of the mode's split criterion for a split with child SSE sum `raw_sse`."""
    base = raw_sse / sse_r if cfg.normalized else raw_sse
    return base + feature_penalty(feature, cfg, usage)


def multitask_criterion(sse_l: float, sse_r_child: float, sse_root: float, feature: int,
                        cfg: SplitCriterionConfig, usage: FeatureUsageSets) -> float:
    """(SSE_L + SSE_R) / SSE_root + mu_G 1{j not in Omega_G} + mu_t 1{j not in Omega^t}."""
    if sse_root <= 0:
        raise DataError(f"root SSE must be positive, got {sse_root}")
    return (sse_l + sse_r_child) / sse_root + (
        (cfg.mu_group if feature not in usage.omega_group else 0.0)
        + (cfg.mu_task if feature not in usage.omega_task else 0.0)
    )


# ============================================================
# Split Records
# ============================================================

@dataclass(frozen=True)
class NodeSplit:
    feature: int
    threshold: float
    criterion_value: float
    raw_sse: float
    is_new_feature: bool

    def sort_key(self) -> Tuple[float, bool, int, float]:
        # lower criterion, then already-used over new, then lower index, then lower threshold
        return (self.criterion_value, self.is_new_feature, self.feature, self.threshold)


TIE_TOLERANCE = 1e-12


def beats(split: NodeSplit, incumbent: Optional[NodeSplit]) -> bool:
    """
    Tie rule comparison. Criterion values within a relative TIE_TOLERANCE are equal,
    so identical partitions reached through different sort orders tie exactly.
    """
    if incumbent is None:
        return True
    a, b = split.criterion_value, incumbent.criterion_value
    if abs(a - b) > TIE_TOLERANCE * max(1.0, abs(a), abs(b)):
        return a < b
    return split.sort_key()[1:] < incumbent.sort_key()[1:]


def best_of(splits: Iterable[Optional[NodeSplit]]) -> Optional[NodeSplit]:
    best = None
    for split in splits:
        if split is not None and beats(split, best):
            best = split
    return best


def sse_root(targets: Sequence[float]) -> float:
    """Sum of squared deviations from the mean."""
    y = np.asarray(targets, dtype=np.float64)
    if y.size == 0:
        raise DataError("sse_root of an empty sequence")
    centered = y - y.mean()
    return float(np.dot(centered, centered))


def scan_thresholds(values: np.ndarray, targets: np.ndarray) -> Optional[Tuple[float, float, int]]:
    """
    Best single split of `targets` ordered by ascending `values`.

    Returns (SSE_L + SSE_R, midpoint threshold, number of thresholds scanned), or None
    when `values` is constant. Ties keep the lowest threshold.
    """
    n = values.shape[0]
    gaps = np.flatnonzero(values[1:] > values[:-1])
    if gaps.size == 0:
        return None
    centered = targets - targets.mean()
    csum = np.cumsum(centered)
    csq = np.cumsum(centered * centered)
    total_sum, total_sq = csum[-1], csq[-1]
    n_left = (gaps + 1).astype(np.float64)
    n_right = n - n_left
    left_sum, left_sq = csum[gaps], csq[gaps]
    right_sum = total_sum - left_sum
    sse = (left_sq - left_sum * left_sum / n_left) + ((total_sq - left_sq) - right_sum * right_sum / n_right)
    np.maximum(sse, 0.0, out=sse)
    k = int(np.argmin(sse))
    g = gaps[k]
    threshold = 0.5 * (values[g] + values[g + 1])
    return float(sse[k]), float(threshold), int(gaps.size)


# ============================================================
# Split Context (immutable node data shared by all splitters)
# ============================================================

class SplitContext:
    """
    Standardized feature matrix, current residuals and, optionally, a global presort
    of every column. Node orders come from filtering the presort with a membership mask.
    """

    def __init__(self, X: np.ndarray, residuals: Optional[np.ndarray] = None,
                 presort: bool = True, workers: int = 1):
        self.X = np.asfortranarray(X, dtype=np.float64)
        self.m, self.d = self.X.shape
        self.residuals = np.zeros(self.m) if residuals is None else np.asarray(residuals, dtype=np.float64)
        self.presorted = np.asfortranarray(np.argsort(self.X, axis=0, kind="stable")) if presort else None
        self.workers = workers
        self.counters = OperationCounters()

    def set_residuals(self, residuals: np.ndarray) -> None:
        residuals = np.asarray(residuals, dtype=np.float64)
        if residuals.shape != (self.m,):
            raise DataError(f"{residuals.shape[0]} residuals for {self.m} samples")
        self.residuals = residuals

    def node_mask(self, rows: np.ndarray) -> np.ndarray:
        mask = np.zeros(self.m, dtype=bool)
        mask[rows] = True
        return mask

    def feature_order(self, rows: np.ndarray, mask: Optional[np.ndarray], feature: int) -> np.ndarray:
        """Node rows sorted by one feature's value (stable in row index)."""
        if self.presorted is not None and mask is not None:
            order = self.presorted[:, feature]
            return order[mask[order]]
        return rows[np.argsort(self.X[rows, feature], kind="stable")]

    def scan_feature(self, rows: np.ndarray, mask: Optional[np.ndarray], feature: int,
                     counters: OperationCounters) -> Optional[Tuple[float, float]]:
        order = self.feature_order(rows, mask, feature)
        result = scan_thresholds(self.X[order, feature], self.residuals[order])
        counters.feature_scans += 1
        counters.samples_touched += order.shape[0]
        if result is None:
            return None
        raw, threshold, scanned = result
        counters.threshold_evaluations += scanned
        return raw, threshold


def _scan_chunk(ctx: SplitContext, rows: np.ndarray, mask: Optional[np.ndarray], features: Sequence[int],
                cfg: SplitCriterionConfig, usage: FeatureUsageSets, sse_r: float
                ) -> Tuple[Optional[NodeSplit], OperationCounters]:
    counters = OperationCounters()
    best = None
    used = usage.used(cfg)
    for j in features:
        result = ctx.scan_feature(rows, mask, j, counters)
        if result is None:
            continue
        raw, threshold = result
        split = NodeSplit(
            feature=int(j),
            threshold=threshold,
            criterion_value=split_criterion(raw, j, cfg, usage, sse_r),
            raw_sse=raw,
            is_new_feature=j not in used,
        )
        if beats(split, best):
            best = split
    return best, counters


def best_split_exhaustive(ctx: SplitContext, rows: np.ndarray, feature_subset: Sequence[int],
                          cfg: SplitCriterionConfig, usage: FeatureUsageSets, sse_r: float
                          ) -> Optional[NodeSplit]:
    """
    Minimize the mode's criterion over every (feature in `feature_subset`, midpoint
    threshold) at the node. Returns None when no feature takes two distinct values.
    """
    rows = np.asarray(rows)
    features = [int(j) for j in feature_subset]
    if rows.shape[0] < 2 or not features:
        return None
    if cfg.normalized and not sse_r > 0:
        raise DataError(f"normalized criteria need a positive root SSE, got {sse_r}")
    mask = ctx.node_mask(rows) if ctx.presorted is not None else None

    if ctx.workers <= 1 or len(features) < 2 * ctx.workers:
        best, counters = _scan_chunk(ctx, rows, mask, features, cfg, usage, sse_r)
        ctx.counters.add(counters)
        return best

    chunks = [list(c) for c in np.array_split(np.array(features), ctx.workers) if len(c)]
    results = Parallel(n_jobs=ctx.workers, prefer="threads")(
        delayed(_scan_chunk)(ctx, rows, mask, chunk, cfg, usage, sse_r) for chunk in chunks
    )
    for _, counters in results:
        ctx.counters.add(counters)
    return best_of(best for best, _ in results)


# ============================================================
# Regression Trees
# ============================================================

@dataclass
class RegressionTree:
    """
    Flat node arrays; node 0 is the root. Leaves have feature -1.
    Samples with x[feature] <= threshold go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    feature_gain: np.ndarray
    split_counts: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def features_used(self) -> Set[int]:
        return {int(f) for f in self.feature if f >= 0}

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of X."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            current = node[active]
            f = self.feature[current]
            go_left = X[active, f] <= self.threshold[current]
            node[active] = np.where(go_left, self.left[current], self.right[current])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_record(self) -> TreeRecord:
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] < 0:
                nodes.append(LeafNodeRecord(leaf=float(self.value[i])))
            else:
                nodes.append(SplitNodeRecord(
                    feature=int(self.feature[i]), threshold=float(self.threshold[i]),
                    left=int(self.left[i]), right=int(self.right[i]),
                ))
        return TreeRecord(nodes=nodes)

    @classmethod
    def from_record(cls, record: TreeRecord, d: int) -> "RegressionTree":
        n = len(record.nodes)
        feature = np.full(n, -1, dtype=np.int64)
        threshold = np.zeros(n)
        left = np.full(n, -1, dtype=np.int64)
        right = np.full(n, -1, dtype=np.int64)
        value = np.zeros(n)
        split_counts = np.zeros(d, dtype=np.int64)
        for i, node in enumerate(record.nodes):
            if isinstance(node, LeafNodeRecord):
                value[i] = node.leaf
                continue
            if node.feature >= d or node.left >= n or node.right >= n:
                raise DataError(f"tree node {i} references a feature or child out of range")
            feature[i], threshold[i], left[i], right[i] = node.feature, node.threshold, node.left, node.right
            split_counts[node.feature] += 1
        return cls(feature, threshold, left, right, value, np.zeros(d), split_counts)


class NodeSplitter(Protocol):
    def split(self, ctx: SplitContext, rows: np.ndarray, cfg: SplitCriterionConfig,
              usage: FeatureUsageSets, sse_r: float) -> Optional[NodeSplit]:
        ...


class ExhaustiveSplitter:
    """Scans every allowed feature at every node."""

    def __init__(self, features: Sequence[int]):
        self.features = [int(j) for j in features]

    def split(self, ctx: SplitContext, rows: np.ndarray, cfg: SplitCriterionConfig,
              usage: FeatureUsageSets, sse_r: float) -> Optional[NodeSplit]:
        return best_split_exhaustive(ctx, rows, self.features, cfg, usage, sse_r)


def min_split_count(alpha: float, m_root: int) -> int:
    """
    Smallest node size allowed to split: the node must hold strictly more than
    alpha * m_root samples, not merely ceil(alpha * m_root). With alpha = 1 the
    root never splits and every tree is a single leaf.
    """
    return max(2, math.floor(alpha * m_root + 1e-9) + 1)


def fit_tree(ctx: SplitContext, residuals: np.ndarray, cfg: SplitCriterionConfig,
             usage: FeatureUsageSets, alpha: float, splitter: NodeSplitter) -> RegressionTree:
    """
    Grow one regression tree on `residuals`, level by level.

    A node stays a leaf when it holds at most alpha * m_root samples, when its
    residuals are all equal, or when the splitter finds no admissible split.
    Features chosen at earlier nodes of this tree are penalty-free at later nodes;
    the caller's `usage` is not modified.
    """
    ctx.set_residuals(residuals)
    y = ctx.residuals
    m_root = ctx.m
    min_count = min_split_count(alpha, m_root)
    tree_usage = usage.copy()
    root_sse = sse_root(y)

    feature: List[int] = [-1]
    threshold: List[float] = [0.0]
    left: List[int] = [-1]
    right: List[int] = [-1]
    value: List[float] = [0.0]
    gain = np.zeros(ctx.d)
    split_counts = np.zeros(ctx.d, dtype=np.int64)

    queue = deque([(0, np.arange(m_root))])
    while queue:
        node, rows = queue.popleft()
        node_y = y[rows]
        value[node] = float(node_y.mean())
        if rows.shape[0] < min_count or np.ptp(node_y) == 0:
            continue
        split = splitter.split(ctx, rows, cfg, tree_usage, root_sse)
        if split is None:
            continue
        goes_left = ctx.X[rows, split.feature] <= split.threshold
        left_rows, right_rows = rows[goes_left], rows[~goes_left]
        if left_rows.size == 0 or right_rows.size == 0:
            continue

        gain[split.feature] += sse_root(node_y) - split.raw_sse
        split_counts[split.feature] += 1
        tree_usage.mark_used(split.feature)

        feature[node], threshold[node] = split.feature, split.threshold
        for child_rows, side in ((left_rows, left), (right_rows, right)):
            child = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            side[node] = child
            queue.append((child, child_rows))

    return RegressionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.float64),
        feature_gain=gain,
        split_counts=split_counts,
    )
