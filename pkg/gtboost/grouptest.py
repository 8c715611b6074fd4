# ============================================================
# Imports
# ============================================================

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from gtboost.errors import ConfigError, DataError
from gtboost.log import get_logger
from gtboost.models import GTConfig, SplitCriterionConfig
from gtboost.splitcore import (
    FeatureUsageSets,
    NodeSplit,
    OperationCounters,
    SplitContext,
    best_split_exhaustive,
    scan_thresholds,
    sse_root,
)

logger = get_logger(__name__)

# ============================================================
# Subset Plans
# ============================================================

def num_subsets(s: int, delta: float) -> int:
    """
    Number of random subsets needed so that, with probability 1 - delta, every one of
    s active features is the only active member of at least one subset.
    """
    if s < 1:
        raise ConfigError(f"s must be >= 1, got {s}")
    if not 0.0 < delta < 1.0:
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    if s == 1:
        return 1
    return math.ceil(math.e * s * math.log(s / delta))


@dataclass(frozen=True)
class SubsetPlan:
    """
    Random feature subsets. The stored order of each subset is the order used for
    binary halving and for the prefix sums.
    """

    subsets: Tuple[np.ndarray, ...]
    generated_seed: int

    @property
    def p(self) -> int:
        return len(self.subsets)

    @property
    def max_subset_size(self) -> int:
        return max(len(g) for g in self.subsets)

    def gt_call_budget(self) -> int:
        """Upper bound on group tests per node: two per halving level per subset."""
        return sum(2 * math.ceil(math.log2(len(g))) for g in self.subsets if len(g) > 1)


def make_subset_plan(d: int, cfg: GTConfig, features: Optional[Sequence[int]] = None) -> SubsetPlan:
    """
    Draw p = num_subsets(s, delta) subsets of ceil(d/s) distinct indices (uniform,
    without replacement, random order). With s = 1 the single subset is every index.
    `features` restricts the universe the subsets are drawn from.
    """
    if d < 1:
        raise ConfigError(f"d must be >= 1, got {d}")
    universe = np.arange(d, dtype=np.int64) if features is None else np.asarray(features, dtype=np.int64)
    rng = np.random.default_rng(cfg.seed)
    p = num_subsets(cfg.s, cfg.delta)
    if cfg.s == 1:
        subsets = (rng.permutation(universe),)
    else:
        size = min(len(universe), math.ceil(len(universe) / cfg.s))
        subsets = tuple(rng.choice(universe, size=size, replace=False) for _ in range(p))
    for g in subsets:
        g.setflags(write=False)
    return SubsetPlan(subsets=subsets, generated_seed=cfg.seed)


def isolates(plan: SubsetPlan, active: Iterable[int]) -> bool:
    """True when every active index is the only active member of some subset."""
    active = np.asarray(sorted(set(active)), dtype=np.int64)
    isolated = np.zeros(active.shape[0], dtype=bool)
    for g in plan.subsets:
        hits = np.isin(active, g)
        if hits.sum() == 1:
            isolated |= hits
    return bool(isolated.all())


# ============================================================
# Prefix-Sum Pseudo-Features
# ============================================================

@dataclass(frozen=True)
class PrefixSumCache:
    """
    prefixes[k][i, r] is the sum of sample i's values over the first r features of
    subset k, so any contiguous slice [l, r) costs one subtraction per sample.
    """

    prefixes: Tuple[np.ndarray, ...]

    def pseudo_feature(self, subset: int, lo: int, hi: int, rows: np.ndarray) -> np.ndarray:
        table = self.prefixes[subset]
        return table[rows, hi] - table[rows, lo]


def build_prefix_cache(X: np.ndarray, plan: SubsetPlan) -> PrefixSumCache:
    X = np.asarray(X, dtype=np.float64)
    prefixes = []
    for g in plan.subsets:
        table = np.zeros((X.shape[0], len(g) + 1), dtype=np.float64, order="F")
        np.cumsum(X[:, g], axis=1, out=table[:, 1:])
        table.setflags(write=False)
        prefixes.append(table)
    return PrefixSumCache(prefixes=tuple(prefixes))


@dataclass(frozen=True)
class SubsetSlice:
    subset: int
    lo: int
    hi: int


def group_test(piece: SubsetSlice, rows: np.ndarray, cache: PrefixSumCache, targets: np.ndarray,
               counters: Optional[OperationCounters] = None) -> float:
    """
    Minimum SSE_L + SSE_R over thresholds of the slice's pseudo-feature at the node;
    the node SSE when the pseudo-feature is constant there.
    """
    rows = np.asarray(rows)
    if rows.shape[0] < 2:
        raise DataError("group_test needs at least 2 samples")
    pseudo = cache.pseudo_feature(piece.subset, piece.lo, piece.hi, rows)
    node_y = targets[rows]
    order = np.argsort(pseudo, kind="stable")
    result = scan_thresholds(pseudo[order], node_y[order])
    if counters is not None:
        counters.gt_calls += 1
        counters.samples_touched += rows.shape[0]
        counters.threshold_evaluations += 0 if result is None else result[2]
    if result is None:
        return sse_root(node_y)
    return result[0]


def binary_search_subset(plan: SubsetPlan, subset: int, rows: np.ndarray, cache: PrefixSumCache,
                         targets: np.ndarray, counters: Optional[OperationCounters] = None) -> int:
    """
    Halve the subset (first ceil(|G|/2) vs the rest), keep the half with the smaller
    group test (ties keep the first half) until one index is left.
    """
    lo, hi = 0, len(plan.subsets[subset])
    while hi - lo > 1:
        mid = lo + (hi - lo + 1) // 2
        left = group_test(SubsetSlice(subset, lo, mid), rows, cache, targets, counters)
        right = group_test(SubsetSlice(subset, mid, hi), rows, cache, targets, counters)
        if left <= right:
            hi = mid
        else:
            lo = mid
    return int(plan.subsets[subset][lo])


@dataclass(frozen=True)
class CandidateSet:
    features: Tuple[int, ...]
    provenance: Dict[int, Tuple[int, ...]]


def _search_subsets(plan: SubsetPlan, subsets: Sequence[int], rows: np.ndarray, cache: PrefixSumCache,
                    targets: np.ndarray) -> Tuple[List[Tuple[int, int]], OperationCounters]:
    counters = OperationCounters()
    found = [(k, binary_search_subset(plan, k, rows, cache, targets, counters)) for k in subsets]
    return found, counters


def candidate_set(plan: SubsetPlan, rows: np.ndarray, cache: PrefixSumCache, targets: np.ndarray,
                  counters: Optional[OperationCounters] = None, workers: int = 1) -> CandidateSet:
    """Binary-search every subset; the surviving indices (deduplicated) form the candidate set."""
    rows = np.asarray(rows)
    indices = list(range(plan.p))
    if workers <= 1 or plan.p < 2 * workers:
        batches = [_search_subsets(plan, indices, rows, cache, targets)]
    else:
        chunks = [list(c) for c in np.array_split(np.array(indices), workers) if len(c)]
        batches = Parallel(n_jobs=workers, prefer="threads")(
            delayed(_search_subsets)(plan, chunk, rows, cache, targets) for chunk in chunks
        )
    provenance: Dict[int, List[int]] = {}
    for found, batch_counters in batches:
        if counters is not None:
            counters.add(batch_counters)
        for k, j in found:
            provenance.setdefault(j, []).append(k)
    return CandidateSet(
        features=tuple(sorted(provenance)),
        provenance={j: tuple(sorted(ks)) for j, ks in provenance.items()},
    )


# ============================================================
# Node Split Subroutine
# ============================================================

def gt_split(ctx: SplitContext, rows: np.ndarray, cfg: SplitCriterionConfig, plan: SubsetPlan,
             cache: PrefixSumCache, usage: FeatureUsageSets, sse_r: float) -> Optional[NodeSplit]:
    """
    Group-testing split search at one node.

    1. l = best normalized criterion over already-used features (inf if none).
    2. Binary-search every subset to collect candidates.
    3. Score candidates exhaustively with the mode's penalties.
    4. Take the best candidate only if it beats l, else the used-feature split.
    """
    rows = np.asarray(rows)
    if rows.shape[0] < 2:
        return None
    if not sse_r > 0:
        raise DataError(f"group-testing split needs a positive root SSE, got {sse_r}")

    used = sorted(usage.used(cfg))
    old_split = best_split_exhaustive(ctx, rows, used, cfg, usage, sse_r) if used else None
    l_value = old_split.criterion_value if old_split is not None else math.inf

    candidates = candidate_set(plan, rows, cache, ctx.residuals, ctx.counters, ctx.workers)
    new_split = best_split_exhaustive(ctx, rows, candidates.features, cfg, usage, sse_r)

    if new_split is not None and new_split.criterion_value < l_value:
        return new_split
    return old_split


class GroupTestSplitter:
    """One subset plan and prefix cache per tree, shared by every node of that tree."""

    def __init__(self, X: np.ndarray, gt: GTConfig, features: Optional[Sequence[int]] = None):
        self.plan = make_subset_plan(X.shape[1], gt, features)
        self.cache = build_prefix_cache(X, self.plan)
        logger.debug(f"[GroupTest] plan p={self.plan.p} subset_size={self.plan.max_subset_size} seed={gt.seed}")

    def split(self, ctx: SplitContext, rows: np.ndarray, cfg: SplitCriterionConfig,
              usage: FeatureUsageSets, sse_r: float) -> Optional[NodeSplit]:
        return gt_split(ctx, rows, cfg, self.plan, self.cache, usage, sse_r)
