# ============================================================
# Shared Fixtures
# ============================================================

from typing import Optional

import numpy as np
import pytest

from gtboost.config import get_settings
from gtboost.dataset import FeatureMatrix, LabeledDataset, StandardizationParams, generate_synthetic
from gtboost.models import SyntheticSpec


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Every test writes under its own tmp dir and sees fresh settings."""
    monkeypatch.setenv("GTBOOST_OUTPUT_DIR", str(tmp_path / "env_out"))
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


def make_dataset(X, y, groups: Optional[np.ndarray] = None) -> LabeledDataset:
    """Dataset already on the [0, 1] scale (identity standardization attached)."""
    X = np.asarray(X, dtype=np.float64)
    return LabeledDataset(
        features=FeatureMatrix(X),
        targets=np.asarray(y, dtype=np.float64),
        group_ids=groups,
        standardization=StandardizationParams.identity(X.shape[1]),
    )


@pytest.fixture
def synthetic_small() -> LabeledDataset:
    return generate_synthetic(SyntheticSpec(n=400, d=10, noise_sd=0.5, seed=1))


@pytest.fixture
def synthetic_wide() -> LabeledDataset:
    return generate_synthetic(SyntheticSpec(n=1500, d=30, noise_sd=0.5, seed=2))


@pytest.fixture
def step_data() -> LabeledDataset:
    """Noise-free target that only depends on column 3 (a step at 0.5)."""
    rng = np.random.default_rng(11)
    X = rng.random((200, 8))
    y = np.where(X[:, 3] <= 0.5, -1.0, 2.0)
    return make_dataset(X, y)


@pytest.fixture
def ranking_csv(tmp_path):
    """Small CSV with a binary label and a query-group column."""
    rng = np.random.default_rng(5)
    rows = ["f0,f1,f2,label,qid"]
    for i in range(60):
        f = rng.random(3)
        label = int(f[0] + 0.3 * rng.random() > 0.6)
        rows.append(f"{float(f[0])!r},{float(f[1])!r},{float(f[2])!r},{label},{i // 6}")
    path = tmp_path / "ranking.csv"
    path.write_text("\n".join(rows) + "\n")
    return path
