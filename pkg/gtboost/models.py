# ============================================================
# Imports
# ============================================================

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Type, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from gtboost.errors import ConfigError

MODEL_FORMAT_VERSION = 1

T = TypeVar("T", bound=BaseModel)


def validated(cls: Type[T], data: Dict[str, Any]) -> T:
    """Build a pydantic record, re-raising validation failures as ConfigError."""
    try:
        return cls.model_validate(data)
    except ValidationError as exc:
        details = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or cls.__name__}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigError(f"Invalid {cls.__name__}: {details}") from exc


# ============================================================
# Split Criterion Configuration
# ============================================================

class CriterionMode(str, Enum):
    PLAIN = "plain"
    GBFS = "gbfs"
    AGBM = "agbm"
    MULTITASK = "multitask"


class Splitter(str, Enum):
    EXHAUSTIVE = "exhaustive"
    GROUPTEST = "grouptest"


class SplitCriterionConfig(BaseModel):
    """
    Which split criterion to minimize and its sparsity penalties.

    gbfs  : SSE_L + SSE_R + mu * 1{new feature}
    agbm  : (SSE_L + SSE_R) / SSE_root + mu * 1{new feature}
    multitask : (SSE_L + SSE_R) / SSE_root + mu_group * 1{j not in group set}
                + mu_task * 1{j not in task set}
    """

    model_config = ConfigDict(frozen=True)

    mode: CriterionMode = CriterionMode.AGBM
    mu: float = Field(default=0.0, ge=0.0)
    mu_group: float = Field(default=0.0, ge=0.0)
    mu_task: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def _check_ranges(self) -> "SplitCriterionConfig":
        if self.mode == CriterionMode.AGBM and self.mu > 1.0:
            raise ValueError(f"A-GBM penalty mu must be in [0, 1], got {self.mu}")
        if self.mode == CriterionMode.MULTITASK and not self.mu_group + self.mu_task < 1.0:
            raise ValueError(
                f"multitask penalties need mu_group + mu_task < 1, got {self.mu_group} + {self.mu_task}"
            )
        return self

    @property
    def normalized(self) -> bool:
        return self.mode in (CriterionMode.AGBM, CriterionMode.MULTITASK)


# ============================================================
# Group Testing and Boosting Configuration
# ============================================================

class GTConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    s: int = Field(default=10, ge=1)
    delta: float = Field(default=0.1, gt=0.0, lt=1.0)
    seed: int = Field(default=0, ge=0)


class BoostConfig(BaseModel):
    """Hyperparameters of one boosting run."""

    model_config = ConfigDict(frozen=True)

    iterations: int = Field(default=200, ge=0)
    shrinkage: float = Field(default=0.1, gt=0.0, le=1.0)
    alpha: float = Field(default=0.02, gt=0.0, le=1.0)
    criterion: SplitCriterionConfig = SplitCriterionConfig()
    splitter: Splitter = Splitter.EXHAUSTIVE
    gt: Optional[GTConfig] = None
    seed: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)
    feature_subset: Optional[List[int]] = None

    @model_validator(mode="after")
    def _check_splitter(self) -> "BoostConfig":
        if self.splitter == Splitter.GROUPTEST:
            if self.gt is None:
                raise ValueError("splitter=grouptest requires a gt config")
            if not self.criterion.normalized:
                raise ValueError("splitter=grouptest needs a normalized criterion (agbm or multitask)")
        if self.feature_subset is not None:
            if not self.feature_subset:
                raise ValueError("feature_subset must not be empty")
            if len(set(self.feature_subset)) != len(self.feature_subset) or min(self.feature_subset) < 0:
                raise ValueError("feature_subset must hold distinct non-negative indices")
        return self


# ============================================================
# Synthetic Data and Experiment Specs
# ============================================================

class SyntheticSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1)
    d: int
    noise_sd: float = Field(default=1.0, ge=0.0)
    seed: int = Field(default=0, ge=0)


class PhaseGridSpec(BaseModel):
    """Default grid spans n/d ratios on both sides of the recovery frontier at unit noise."""

    model_config = ConfigDict(frozen=True)

    d_values: List[int] = Field(default_factory=lambda: [15, 30, 45, 60, 75], min_length=1)
    n_values: List[int] = Field(default_factory=lambda: [500, 1000, 2000, 4000, 8000, 16000], min_length=1)
    replicates: int = Field(default=50, ge=1)
    s: int = Field(default=3, ge=1)
    delta: float = Field(default=0.1, gt=0.0, lt=1.0)
    noise_sd: float = Field(default=1.0, ge=0.0)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_grid(self) -> "PhaseGridSpec":
        if min(self.d_values) < max(3, self.s):
            raise ValueError(f"every d must be >= max(3, s); got {self.d_values}")
        if min(self.n_values) < 2:
            raise ValueError(f"every n must be >= 2; got {self.n_values}")
        return self


# ============================================================
# Model File Schema (versioned JSON)
# ============================================================

class StandardizationRecord(BaseModel):
    min: float
    range: float = Field(ge=0.0)


class SplitNodeRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    feature: int = Field(ge=0)
    threshold: float
    left: int = Field(ge=0)
    right: int = Field(ge=0)


class LeafNodeRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    leaf: float


class TreeRecord(BaseModel):
    nodes: List[Union[SplitNodeRecord, LeafNodeRecord]] = Field(min_length=1)


class ModelFile(BaseModel):
    version: int
    kind: Literal["single"] = "single"
    mode: CriterionMode
    shrinkage: float
    base: float
    standardization: List[StandardizationRecord]
    trees: List[TreeRecord]
    omega: List[int]
    feature_gain: List[float]
    split_counts: List[int] = Field(default_factory=list)


class MultitaskModelFile(BaseModel):
    version: int
    kind: Literal["multitask"] = "multitask"
    task_names: List[str]
    omega_group: List[int]
    tasks: List[ModelFile]


# ============================================================
# Reports
# ============================================================

class RoundLog(BaseModel):
    round: int
    train_rmse: float
    n_selected: int
    seconds: float


class EvalReport(BaseModel):
    """
    Evaluation summary. AUC / ranking fields are None when the labels are not 0/1
    or the data has no groups.
    """

    rmse: float = Field(ge=0.0)
    auc_roc: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    auc_pr: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    precision_at_k: Dict[int, float] = Field(default_factory=dict)
    mrr: Optional[float] = None
    n_features_used: int = Field(ge=0)

    def flat(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {
            "rmse": self.rmse,
            "auc_roc": self.auc_roc,
            "auc_pr": self.auc_pr,
            "mrr": self.mrr,
            "n_features_used": self.n_features_used,
        }
        for k in sorted(self.precision_at_k):
            row[f"precision_at_{k}"] = self.precision_at_k[k]
        return row

    def to_csv_row(self, header: bool = True) -> str:
        row = self.flat()
        values = ",".join("" if v is None else repr(v) if isinstance(v, float) else str(v) for v in row.values())
        return (",".join(row.keys()) + "\n" + values) if header else values


class IsolationReport(BaseModel):
    d: int
    s: int
    delta: float
    trials: int
    n_subsets: int
    failures: int
    failure_rate: float
    seed: int


class MethodTiming(BaseModel):
    method: str
    rounds: int
    seconds_per_round: List[float]
    total_seconds: float
    threshold_evaluations: int
    gt_calls: int
    samples_touched: int
    root_threshold_evaluations: int
    root_gt_calls: int
    n_selected: int
    train_rmse: float


class TimingReport(BaseModel):
    n: int
    d: int
    s: int
    delta: float
    n_subsets: int
    workers: int
    gt_call_budget_per_node: int
    speed_condition_lhs: float
    speed_condition_rhs: float
    speed_condition_met: bool
    verdict: str
    sample_window_low: float
    sample_window_high: float
    methods: List[MethodTiming]


class RunConfig(BaseModel):
    """Resolved parameters of one CLI invocation, echoed next to its outputs."""

    command: str
    params: Dict[str, Any]
    seed: int
    output_dir: Path
