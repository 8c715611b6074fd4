import json

import numpy as np
import pytest

from gtboost.boosting import (
    BoostedModel,
    MultitaskModel,
    fit,
    fit_multitask,
    load_model,
    predict,
    predict_any,
    save_model,
    tree_seed,
)
from gtboost.dataset import LabeledDataset, TaskBundle, generate_synthetic
from gtboost.errors import ConfigError, DataError, ModelFormatError
from gtboost.models import BoostConfig, GTConfig, SplitCriterionConfig, SyntheticSpec

from tests.conftest import make_dataset


def agbm(mu=0.01, **kwargs) -> BoostConfig:
    return BoostConfig(criterion=SplitCriterionConfig(mode="agbm", mu=mu), **kwargs)


def gtgbm(mu=0.01, s=3, delta=0.1, **kwargs) -> BoostConfig:
    return BoostConfig(criterion=SplitCriterionConfig(mode="agbm", mu=mu), splitter="grouptest",
                       gt=GTConfig(s=s, delta=delta), **kwargs)


def multitask(mu_group, mu_task, **kwargs) -> BoostConfig:
    return BoostConfig(criterion=SplitCriterionConfig(mode="multitask", mu_group=mu_group, mu_task=mu_task),
                       **kwargs)


def assert_same_trees(a: BoostedModel, b: BoostedModel):
    assert len(a.trees) == len(b.trees)
    for ta, tb in zip(a.trees, b.trees):
        np.testing.assert_array_equal(ta.feature, tb.feature)
        np.testing.assert_array_equal(ta.threshold, tb.threshold)
        np.testing.assert_array_equal(ta.value, tb.value)
    assert a.omega == b.omega


# ============================================================
# Configuration Contracts
# ============================================================


def test_config_validation():
    with pytest.raises(ValueError):
        SplitCriterionConfig(mode="agbm", mu=1.5)
    with pytest.raises(ValueError):
        SplitCriterionConfig(mode="multitask", mu_group=0.6, mu_task=0.5)
    with pytest.raises(ValueError):
        BoostConfig(splitter="grouptest")
    with pytest.raises(ValueError):
        BoostConfig(criterion=SplitCriterionConfig(mode="gbfs", mu=1.0), splitter="grouptest", gt=GTConfig())
    with pytest.raises(ValueError):
        BoostConfig(feature_subset=[1, 1])
    SplitCriterionConfig(mode="gbfs", mu=40.0)


def test_fit_preconditions(synthetic_small):
    raw = LabeledDataset(features=synthetic_small.features, targets=synthetic_small.targets)
    with pytest.raises(DataError):
        fit(raw, agbm(iterations=1))
    with pytest.raises(ConfigError):
        fit(synthetic_small, multitask(0.1, 0.1, iterations=1))
    with pytest.raises(ConfigError):
        fit(synthetic_small, agbm(iterations=1, feature_subset=[0, 99]))
    with pytest.raises(ConfigError):
        fit_multitask(TaskBundle(tasks=(synthetic_small,)), agbm(iterations=1))


# ============================================================
# Single-Task Boosting
# ============================================================


def test_zero_rounds_predicts_zero(synthetic_small):
    model = fit(synthetic_small, agbm(iterations=0))
    assert model.trees == [] and model.omega == set()
    np.testing.assert_array_equal(predict(model, synthetic_small.X), 0.0)


def test_training_error_decreases(synthetic_small):
    model = fit(synthetic_small, agbm(iterations=30, shrinkage=0.2))
    rmse = [r.train_rmse for r in model.history]
    assert len(rmse) == 30
    assert rmse[-1] < rmse[0] < np.sqrt(np.mean(synthetic_small.targets ** 2))
    assert [r.round for r in model.history] == list(range(1, 31))
    np.testing.assert_allclose(model.train_residuals, synthetic_small.targets - predict(model, synthetic_small.X),
                               atol=1e-12)


@pytest.mark.parametrize("shrinkage", [0.3, 1.0])
def test_training_error_never_increases_without_penalty(shrinkage):
    for seed in range(5):
        ds = generate_synthetic(SyntheticSpec(n=250, d=8, noise_sd=0.5, seed=seed))
        rmse = [r.train_rmse for r in fit(ds, agbm(mu=0.0, iterations=15, shrinkage=shrinkage)).history]
        assert np.all(np.diff(rmse) <= 1e-12)


def test_step_target_is_learned_with_one_feature(step_data):
    model = fit(step_data, agbm(mu=0.5, iterations=5, shrinkage=1.0))
    assert model.omega == {3}
    np.testing.assert_allclose(predict(model, step_data.X), step_data.targets, atol=1e-12)


def test_penalty_shrinks_the_selected_set(synthetic_small):
    free = fit(synthetic_small, agbm(mu=0.0, iterations=20, alpha=0.05))
    sparse = fit(synthetic_small, agbm(mu=0.5, iterations=20, alpha=0.05))
    assert len(sparse.omega) <= len(free.omega)
    assert sparse.omega <= set(range(synthetic_small.d))


def test_full_penalty_freezes_the_first_tree_features():
    for seed in range(20):
        ds = generate_synthetic(SyntheticSpec(n=200, d=10, noise_sd=1.0, seed=seed))
        model = fit(ds, agbm(mu=1.0, iterations=10, alpha=0.05))
        assert [r.n_selected for r in model.history] == [len(model.omega)] * 10


def test_gbfs_mode_penalizes_raw_sse(synthetic_small):
    model = fit(synthetic_small, BoostConfig(criterion=SplitCriterionConfig(mode="gbfs", mu=1e9), iterations=3))
    assert len(model.omega) == 1


def test_feature_subset_restricts_every_split(synthetic_small):
    model = fit(synthetic_small, agbm(mu=0.0, iterations=10, feature_subset=[2, 5, 7]))
    assert model.omega <= {2, 5, 7}
    assert model.feature_gain[[0, 1, 3, 4, 6, 8, 9]].sum() == 0.0


def test_importances_accumulate_over_trees(synthetic_small):
    model = fit(synthetic_small, agbm(iterations=8))
    assert np.all(model.feature_gain >= -1e-9)
    assert set(np.flatnonzero(model.split_counts)) == model.omega
    assert model.split_counts.sum() == sum(int((t.feature >= 0).sum()) for t in model.trees)


def test_group_testing_fit_learns_the_strong_feature(synthetic_wide):
    model = fit(synthetic_wide, gtgbm(mu=0.01, s=3, iterations=10, shrinkage=0.3))
    assert 1 in model.omega
    assert model.history[-1].train_rmse < model.history[0].train_rmse
    assert model.counters.gt_calls > 0


def test_tree_seeds_are_distinct_and_stable():
    seeds = [tree_seed(0, k) for k in range(50)]
    assert len(set(seeds)) == 50
    assert tree_seed(0, 3) == seeds[3]
    assert tree_seed(1, 3) != seeds[3]


# ============================================================
# Determinism and Persistence
# ============================================================


@pytest.mark.parametrize("cfg", [agbm(iterations=6), gtgbm(iterations=4, s=3)])
def test_worker_count_gives_identical_model_files(tmp_path, synthetic_wide, cfg):
    one = save_model(fit(synthetic_wide, cfg.model_copy(update={"workers": 1})), tmp_path / "one.json")
    many = save_model(fit(synthetic_wide, cfg.model_copy(update={"workers": 3})), tmp_path / "many.json")
    assert one.read_bytes() == many.read_bytes()


def test_save_load_round_trip_is_exact(tmp_path, synthetic_small):
    model = fit(synthetic_small, agbm(iterations=12))
    path = save_model(model, tmp_path / "m.json")
    loaded = load_model(path)
    assert isinstance(loaded, BoostedModel)
    np.testing.assert_array_equal(predict(loaded, synthetic_small.X), predict(model, synthetic_small.X))
    assert loaded.omega == model.omega
    np.testing.assert_array_equal(loaded.split_counts, model.split_counts)


def test_load_model_rejects_bad_files(tmp_path, synthetic_small):
    with pytest.raises(DataError, match="not found"):
        load_model(tmp_path / "missing.json")
    path = save_model(fit(synthetic_small, agbm(iterations=2)), tmp_path / "m.json")
    text = path.read_text()

    truncated = tmp_path / "truncated.json"
    truncated.write_text(text[: len(text) // 2])
    with pytest.raises(ModelFormatError):
        load_model(truncated)

    record = json.loads(text)
    record["version"] = 99
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps(record))
    with pytest.raises(ModelFormatError, match="99.*1"):
        load_model(wrong)

    record["version"] = 1
    record["trees"][0]["nodes"][0] = {"feature": 0}
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(record))
    with pytest.raises(ModelFormatError):
        load_model(broken)


def test_predict_checks_dimension_and_accepts_one_row(synthetic_small):
    model = fit(synthetic_small, agbm(iterations=3))
    with pytest.raises(DataError):
        predict(model, np.zeros((2, synthetic_small.d + 1)))
    row = synthetic_small.X[5]
    assert predict(model, row)[0] == predict(model, synthetic_small.X)[5]


# ============================================================
# Multitask Boosting
# ============================================================


def make_tasks(T, seed=0):
    return TaskBundle(tasks=tuple(
        generate_synthetic(SyntheticSpec(n=300, d=12, noise_sd=0.5, seed=seed + t)) for t in range(T)
    ))


@pytest.mark.parametrize("splitter", ["exhaustive", "grouptest"])
def test_single_task_multitask_equals_agbm(splitter):
    bundle = make_tasks(1)
    gt = GTConfig(s=3, delta=0.2) if splitter == "grouptest" else None
    mt = fit_multitask(bundle, multitask(0.1, 0.2, iterations=8, splitter=splitter, gt=gt))
    single = fit(bundle.tasks[0], agbm(mu=0.1 + 0.2, iterations=8, splitter=splitter, gt=gt))
    assert_same_trees(mt.models[0], single)
    assert mt.omega_group == single.omega


@pytest.mark.parametrize("splitter", ["exhaustive", "grouptest"])
def test_zero_group_penalty_decouples_tasks(splitter):
    bundle = make_tasks(3, seed=10)
    gt = GTConfig(s=3, delta=0.2) if splitter == "grouptest" else None
    mt = fit_multitask(bundle, multitask(0.0, 0.3, iterations=6, splitter=splitter, gt=gt))
    for task, sub in zip(bundle.tasks, mt.models):
        assert_same_trees(sub, fit(task, agbm(mu=0.3, iterations=6, splitter=splitter, gt=gt)))
    assert mt.omega_group == set().union(*mt.omega_task)


def test_group_penalty_encourages_shared_features():
    bundle = make_tasks(3, seed=20)
    shared = fit_multitask(bundle, multitask(0.5, 0.1, iterations=10, alpha=0.05))
    separate = fit_multitask(bundle, multitask(0.0, 0.1, iterations=10, alpha=0.05))
    assert len(shared.omega_group) <= len(separate.omega_group)


def test_later_task_sees_group_selection_from_the_same_round():
    rng = np.random.default_rng(3)
    X = rng.random((400, 4))
    first = make_dataset(X, np.where(X[:, 0] > 0.5, 1.0, 0.0))
    # alone, the second task prefers column 1 (it explains more variance than column 0)
    second = make_dataset(X, np.where(X[:, 1] > 0.5, 1.0, 0.0) + np.where(X[:, 0] > 0.5, 0.8, 0.0))
    cfg = multitask(0.5, 0.0, iterations=1, alpha=0.05)
    mt = fit_multitask(TaskBundle(tasks=(first, second)), cfg)
    assert mt.models[0].trees[0].feature[0] == 0
    assert mt.models[1].trees[0].feature[0] == 0
    reversed_order = fit_multitask(TaskBundle(tasks=(second, first)), cfg)
    assert reversed_order.models[0].trees[0].feature[0] == 1


def test_multitask_round_trip_and_task_routing(tmp_path):
    bundle = make_tasks(2, seed=30)
    model = fit_multitask(bundle, multitask(0.2, 0.2, iterations=5))
    loaded = load_model(save_model(model, tmp_path / "mt.json"))
    assert isinstance(loaded, MultitaskModel)
    assert loaded.task_names == ["task0", "task1"]
    X = np.vstack([bundle.tasks[0].X[:4], bundle.tasks[1].X[:4]])
    task = np.array([0] * 4 + [1] * 4)
    want = np.concatenate([predict(model.models[0], X[:4]), predict(model.models[1], X[4:])])
    np.testing.assert_array_equal(predict_any(loaded, X, task), want)
    with pytest.raises(DataError):
        predict_any(loaded, X)
    for bad in ([0, 1, 2, 0, 1, 0, 1, 0], [-1] * 8, [0, 1]):
        with pytest.raises(DataError):
            predict_any(loaded, X, bad)
