import math

import numpy as np
import pytest

from gtboost.dataset import generate_synthetic
from gtboost.errors import ConfigError, DataError
from gtboost.grouptest import (
    GroupTestSplitter,
    SubsetPlan,
    SubsetSlice,
    binary_search_subset,
    build_prefix_cache,
    candidate_set,
    group_test,
    gt_split,
    isolates,
    make_subset_plan,
    num_subsets,
)
from gtboost.models import GTConfig, SplitCriterionConfig, SyntheticSpec
from gtboost.splitcore import FeatureUsageSets, OperationCounters, SplitContext, best_split_exhaustive, sse_root

# ============================================================
# Subset Plans
# ============================================================


@pytest.mark.parametrize(
    "s, delta, expected",
    [(1, 0.1, 1), (1, 0.9, 1), (3, 0.2, 23), (3, 0.1, 28), (10, 0.1, 126), (20, 0.1, 289)],
)
def test_num_subsets(s, delta, expected):
    assert num_subsets(s, delta) == expected
    if s > 1:
        assert expected == math.ceil(math.e * s * math.log(s / delta))


@pytest.mark.parametrize("s, delta", [(0, 0.1), (3, 0.0), (3, 1.0), (3, -0.5)])
def test_num_subsets_rejects_invalid(s, delta):
    with pytest.raises(ConfigError):
        num_subsets(s, delta)


def test_plan_shape_and_determinism():
    plan = make_subset_plan(500, GTConfig(s=10, delta=0.1, seed=4))
    assert plan.p == 126
    assert all(len(g) == 50 and len(set(g.tolist())) == 50 for g in plan.subsets)
    assert all(g.min() >= 0 and g.max() < 500 for g in plan.subsets)
    again = make_subset_plan(500, GTConfig(s=10, delta=0.1, seed=4))
    assert all(np.array_equal(a, b) for a, b in zip(plan.subsets, again.subsets))
    other = make_subset_plan(500, GTConfig(s=10, delta=0.1, seed=5))
    assert not all(np.array_equal(a, b) for a, b in zip(plan.subsets, other.subsets))


def test_plan_with_s_one_holds_every_feature():
    plan = make_subset_plan(17, GTConfig(s=1, delta=0.3, seed=0))
    assert plan.p == 1
    assert sorted(plan.subsets[0].tolist()) == list(range(17))


def test_plan_inclusion_frequency_is_uniform():
    d, cfg = 20, GTConfig(s=4, delta=0.1)
    counts = np.zeros(d)
    draws = 0
    for seed in range(2000):
        plan = make_subset_plan(d, cfg.model_copy(update={"seed": seed}))
        for g in plan.subsets:
            counts[g] += 1
        draws += plan.p
    # each subset holds ceil(d/s) = 5 of the 20 indices
    np.testing.assert_allclose(counts / draws, 5 / 20, atol=0.01)


def test_plan_restricted_universe():
    plan = make_subset_plan(100, GTConfig(s=2, delta=0.5, seed=1), features=[3, 9, 27, 81])
    assert all(set(g.tolist()) <= {3, 9, 27, 81} and len(g) == 2 for g in plan.subsets)


def test_isolates():
    plan = SubsetPlan(subsets=(np.array([0, 1]), np.array([1, 2]), np.array([3])), generated_seed=0)
    assert isolates(plan, [0, 3])
    assert isolates(plan, [2])
    assert not isolates(plan, [0, 1])
    assert not isolates(plan, [4])


def test_gt_call_budget():
    plan = SubsetPlan(subsets=(np.arange(50), np.arange(1), np.arange(8)), generated_seed=0)
    assert plan.gt_call_budget() == 2 * 6 + 0 + 2 * 3


# ============================================================
# Prefix Sums and Group Tests
# ============================================================


def test_pseudo_feature_equals_direct_sum():
    rng = np.random.default_rng(0)
    X = rng.random((30, 12))
    plan = make_subset_plan(12, GTConfig(s=3, delta=0.2, seed=2))
    cache = build_prefix_cache(X, plan)
    rows = np.array([1, 4, 5, 20])
    for k, g in enumerate(plan.subsets):
        for lo, hi in [(0, len(g)), (1, 3), (2, 3)]:
            np.testing.assert_allclose(cache.pseudo_feature(k, lo, hi, rows), X[np.ix_(rows, g[lo:hi])].sum(axis=1),
                                       rtol=1e-12)


def test_single_feature_group_test_equals_exhaustive_raw_sse():
    rng = np.random.default_rng(1)
    X = rng.random((60, 5))
    y = rng.normal(size=60)
    plan = SubsetPlan(subsets=(np.array([2, 0, 4]),), generated_seed=0)
    cache = build_prefix_cache(X, plan)
    rows = np.arange(60)
    ctx = SplitContext(X, y)
    split = best_split_exhaustive(ctx, rows, [0], SplitCriterionConfig(mode="plain"), FeatureUsageSets(), 1.0)
    assert group_test(SubsetSlice(0, 1, 2), rows, cache, y) == pytest.approx(split.raw_sse, rel=1e-12)


def test_group_test_edge_cases():
    X = np.zeros((4, 2))
    plan = SubsetPlan(subsets=(np.array([0, 1]),), generated_seed=0)
    cache = build_prefix_cache(X, plan)
    y = np.array([1.0, 2.0, 3.0, 4.0])
    assert group_test(SubsetSlice(0, 0, 2), np.arange(4), cache, y) == pytest.approx(sse_root(y))
    with pytest.raises(DataError):
        group_test(SubsetSlice(0, 0, 2), np.array([0]), cache, y)


def test_binary_search_finds_the_informative_feature(step_data):
    plan = SubsetPlan(subsets=(np.array([0, 6, 3, 1, 7, 2, 5]),), generated_seed=0)
    cache = build_prefix_cache(step_data.X, plan)
    counters = OperationCounters()
    found = binary_search_subset(plan, 0, np.arange(step_data.m), cache, step_data.targets, counters)
    assert found == 3
    assert counters.gt_calls <= plan.gt_call_budget()


def test_binary_search_over_eight_features_makes_six_group_tests(step_data):
    plan = SubsetPlan(subsets=(np.array([5, 0, 7, 3, 1, 6, 2, 4]),), generated_seed=0)
    cache = build_prefix_cache(step_data.X, plan)
    counters = OperationCounters()
    assert binary_search_subset(plan, 0, np.arange(step_data.m), cache, step_data.targets, counters) == 3
    assert counters.gt_calls == 6 == plan.gt_call_budget()


def test_binary_search_tie_keeps_first_half():
    X = np.ones((10, 4))
    plan = SubsetPlan(subsets=(np.array([2, 0, 3, 1]),), generated_seed=0)
    cache = build_prefix_cache(X, plan)
    found = binary_search_subset(plan, 0, np.arange(10), cache, np.arange(10.0))
    assert found == 2


def test_candidate_set_is_worker_independent(synthetic_wide):
    plan = make_subset_plan(synthetic_wide.d, GTConfig(s=3, delta=0.1, seed=7))
    cache = build_prefix_cache(synthetic_wide.X, plan)
    rows = np.arange(synthetic_wide.m)
    serial_counts, threaded_counts = OperationCounters(), OperationCounters()
    serial = candidate_set(plan, rows, cache, synthetic_wide.targets, serial_counts, workers=1)
    threaded = candidate_set(plan, rows, cache, synthetic_wide.targets, threaded_counts, workers=3)
    assert serial == threaded
    assert serial_counts == threaded_counts
    assert serial_counts.gt_calls <= plan.gt_call_budget()
    assert set(serial.features) == set(serial.provenance)
    assert sorted(k for ks in serial.provenance.values() for k in ks) == list(range(plan.p))


def test_candidate_set_recovers_strong_features(synthetic_wide):
    plan = make_subset_plan(synthetic_wide.d, GTConfig(s=3, delta=0.1, seed=3))
    cache = build_prefix_cache(synthetic_wide.X, plan)
    found = candidate_set(plan, np.arange(synthetic_wide.m), cache, synthetic_wide.targets)
    assert 1 in found.features


@pytest.mark.slow
def test_candidate_set_recovers_all_active_features_across_seeds():
    recovered = 0
    for seed in range(50):
        ds = generate_synthetic(SyntheticSpec(n=5000, d=30, seed=seed))
        plan = make_subset_plan(30, GTConfig(s=3, delta=0.1, seed=seed))
        cache = build_prefix_cache(ds.X, plan)
        found = candidate_set(plan, np.arange(ds.m), cache, ds.targets)
        recovered += {0, 1, 2} <= set(found.features)
    assert recovered >= 45


# ============================================================
# Node Split Subroutine
# ============================================================


def test_gt_split_with_single_subset_matches_exhaustive(step_data):
    cfg = SplitCriterionConfig(mode="agbm", mu=0.05)
    splitter = GroupTestSplitter(step_data.X, GTConfig(s=1, delta=0.5, seed=0))
    rows = np.arange(step_data.m)
    sse_r = sse_root(step_data.targets)
    got = splitter.split(SplitContext(step_data.X, step_data.targets, presort=False), rows, cfg,
                         FeatureUsageSets(), sse_r)
    want = best_split_exhaustive(SplitContext(step_data.X, step_data.targets), rows, range(step_data.d), cfg,
                                 FeatureUsageSets(), sse_r)
    assert (got.feature, got.threshold) == (want.feature, want.threshold) == (3, got.threshold)


def test_gt_split_keeps_used_feature_when_candidates_do_not_beat_it(step_data):
    cfg = SplitCriterionConfig(mode="agbm", mu=0.5)
    plan = SubsetPlan(subsets=(np.array([0, 1]),), generated_seed=0)
    cache = build_prefix_cache(step_data.X, plan)
    ctx = SplitContext(step_data.X, step_data.targets, presort=False)
    usage = FeatureUsageSets(omega={3})
    split = gt_split(ctx, np.arange(step_data.m), cfg, plan, cache, usage, sse_root(step_data.targets))
    assert split.feature == 3 and not split.is_new_feature


def test_gt_split_takes_new_candidate_only_when_strictly_better(step_data):
    cfg = SplitCriterionConfig(mode="agbm", mu=0.0)
    plan = SubsetPlan(subsets=(np.array([3]),), generated_seed=0)
    cache = build_prefix_cache(step_data.X, plan)
    ctx = SplitContext(step_data.X, step_data.targets, presort=False)
    rows = np.arange(step_data.m)
    sse_r = sse_root(step_data.targets)
    split = gt_split(ctx, rows, cfg, plan, cache, FeatureUsageSets(omega={0}), sse_r)
    assert split.feature == 3 and split.is_new_feature
    assert gt_split(ctx, rows[:1], cfg, plan, cache, FeatureUsageSets(), sse_r) is None
    with pytest.raises(DataError):
        gt_split(ctx, rows, cfg, plan, cache, FeatureUsageSets(), 0.0)
