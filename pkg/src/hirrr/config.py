"""Configuration management for HiRRR.

Two kinds of configuration live here: the runtime ``Config`` assembled from
environment variables and ``.env`` files, and the JSON-backed models that
describe fits, grids, split plans, competitor models, simulation scenarios
and cohort construction.
"""

import json
import os
from enum import Enum
from pathlib import Path
from typing import Dict, List, Literal, Optional, Type, TypeVar

import numpy as np
from dotenv import load_dotenv
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from .utils.error_handler import ConfigError

ModelT = TypeVar("ModelT", bound=BaseModel)


class Config(BaseModel):
    """Runtime configuration with validation and defaults."""

    model_config = ConfigDict(validate_default=True, extra="forbid")

    # Execution
    threads: int = Field(default=1, ge=1, description="Worker threads for grids/replicates")
    seed: int = Field(default=0, ge=0, description="Default run seed")

    # Estimation defaults
    max_iters: int = Field(default=5000, ge=0, description="Iteration cap for BCD fitters")
    tolerance: float = Field(
        default=1e-6, gt=0.0, description="Relative objective-change tolerance"
    )
    trim: float = Field(
        default=0.10, ge=0.0, lt=0.5, description="Trim fraction for replicate summaries"
    )

    # Output
    default_output_dir: str = Field(
        default="./hirrr_output", description="Default output directory"
    )

    # Logging
    log_level: str = Field(default="INFO", description="Logging level")
    log_file: str = Field(default="./logs/hirrr.log", description="Log file path")
    enable_audit_logging: bool = Field(default=True, description="Enable audit logging")
    audit_log_file: str = Field(
        default="./logs/hirrr_audit.log", description="Audit log file path"
    )

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level."""
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v.upper() not in valid_levels:
            raise ValueError(f"Log level must be one of {valid_levels}")
        return v.upper()


def validate_env_file(env_file_path: str) -> bool:
    """
    Validate that an environment file exists and is readable.

    Args:
        env_file_path: Path to the environment file

    Returns:
        bool: True if file is valid

    Raises:
        FileNotFoundError: If file doesn't exist
        PermissionError: If file is not readable
        ValueError: If path is not a file
    """
    env_path = Path(env_file_path)

    if not env_path.exists():
        raise FileNotFoundError(f"Environment file not found: {env_file_path}")

    if not env_path.is_file():
        raise ValueError(f"Environment path is not a file: {env_file_path}")

    if not os.access(env_path, os.R_OK):
        raise PermissionError(f"Environment file is not readable: {env_file_path}")

    return True


def load_config(env_file: Optional[str] = None) -> Config:
    """
    Load configuration from environment variables and .env file.

    Args:
        env_file: Optional path to .env file. If None, uses default .env

    Returns:
        Config: Validated configuration instance

    Raises:
        ValueError: If a variable cannot be converted or fails validation
        FileNotFoundError: If specified env_file doesn't exist
        PermissionError: If env_file cannot be read
    """
    try:
        if env_file:
            validate_env_file(env_file)
            load_dotenv(env_file, override=True)
        else:
            load_dotenv()
    except (FileNotFoundError, PermissionError):
        raise
    except (OSError, IOError) as e:
        raise ValueError(f"Failed to load environment file: {e}") from e

    config_data = {}

    env_mapping = {
        "HIRRR_THREADS": "threads",
        "HIRRR_SEED": "seed",
        "HIRRR_MAX_ITERS": "max_iters",
        "HIRRR_TOLERANCE": "tolerance",
        "HIRRR_TRIM": "trim",
        "DEFAULT_OUTPUT_DIR": "default_output_dir",
        "LOG_LEVEL": "log_level",
        "LOG_FILE": "log_file",
        "ENABLE_AUDIT_LOGGING": "enable_audit_logging",
        "AUDIT_LOG_FILE": "audit_log_file",
    }

    for env_var, config_key in env_mapping.items():
        value = os.getenv(env_var)
        if value is None:
            continue
        try:
            if config_key in ["threads", "seed", "max_iters"]:
                config_data[config_key] = int(value)
            elif config_key in ["tolerance", "trim"]:
                config_data[config_key] = float(value)
            elif config_key == "enable_audit_logging":
                config_data[config_key] = value.lower() in ("true", "1", "yes", "on")
            else:
                config_data[config_key] = value
        except ValueError as e:
            raise ValueError(f"Invalid value for {env_var}: {value!r}") from e

    return Config(**config_data)


def ensure_directories(config: Config) -> None:
    """
    Ensure required directories exist.

    Args:
        config: Configuration instance
    """
    Path(config.default_output_dir).mkdir(parents=True, exist_ok=True)
    Path(config.log_file).parent.mkdir(parents=True, exist_ok=True)
    if config.enable_audit_logging:
        Path(config.audit_log_file).parent.mkdir(parents=True, exist_ok=True)


class FitConfig(BaseModel):
    """Settings for a single HiRRR/RRR/GLM fit.

    ``W`` and ``Wtilde`` default to all-ones weights when omitted.
    """

    model_config = ConfigDict(
        arbitrary_types_allowed=True, extra="forbid", populate_by_name=True
    )

    rank: int = Field(default=1, ge=1, description="Reduced rank r")
    lambda_: float = Field(
        default=1.0, ge=0.0, le=1.0, alias="lambda", description="Single-record weight"
    )
    W: Optional[np.ndarray] = Field(default=None, description="n x q weights")
    Wtilde: Optional[np.ndarray] = Field(default=None, description="n1 x q weights")
    tolerance: float = Field(default=1e-6, gt=0.0)
    max_iters: int = Field(default=5000, ge=0)
    seed: int = Field(default=0, ge=0)
    fit_intercept: bool = Field(default=True)
    dispersion: Literal["column", "pooled"] = Field(default="column")
    solver: Literal["auto", "closed_form", "binary", "general"] = Field(default="auto")
    max_halvings: int = Field(default=30, ge=0)

    @field_validator("W", "Wtilde")
    @classmethod
    def validate_weights(cls, v: Optional[np.ndarray]) -> Optional[np.ndarray]:
        """Weights must be a finite non-negative matrix."""
        if v is None:
            return v
        arr = np.asarray(v, dtype=float)
        if arr.ndim != 2:
            raise ValueError("weights must be a 2-D matrix")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("weights must be finite and non-negative")
        return arr

    def weights(self, n: int, n1: int, q: int) -> tuple:
        """Return (W, Wtilde) materialized for the given dimensions.

        Raises:
            ConfigError: If supplied weights do not match the data shape
        """
        W = np.ones((n, q)) if self.W is None else self.W
        Wt = np.ones((n1, q)) if self.Wtilde is None else self.Wtilde
        if W.shape != (n, q):
            raise ConfigError(f"W has shape {W.shape}, expected {(n, q)}")
        if Wt.shape != (n1, q):
            raise ConfigError(f"Wtilde has shape {Wt.shape}, expected {(n1, q)}")
        return W, Wt

    def has_unit_weights(self) -> bool:
        """True when both weight matrices are absent or all ones."""
        return all(w is None or np.all(w == 1.0) for w in (self.W, self.Wtilde))


class CvCriterion(str, Enum):
    """Cross-validation scoring rule."""

    HELD_OUT_LOGLIK = "held_out_loglik"
    TARGET_AUC = "target_auc"


class CvGrid(BaseModel):
    """Grid of (rank, lambda) cells scored by k-fold cross-validation."""

    model_config = ConfigDict(validate_default=True, extra="forbid")

    ranks: List[int] = Field(min_length=1)
    lambdas: List[float] = Field(default_factory=lambda: [1.0], min_length=1)
    folds: int = Field(default=5, ge=2)
    criterion: CvCriterion = Field(default=CvCriterion.HELD_OUT_LOGLIK)
    seed: int = Field(default=0, ge=0)

    @field_validator("ranks")
    @classmethod
    def validate_ranks(cls, v: List[int]) -> List[int]:
        if any(r < 1 for r in v):
            raise ValueError("ranks must be positive")
        return v

    @field_validator("lambdas")
    @classmethod
    def validate_lambdas(cls, v: List[float]) -> List[float]:
        if any(lam < 0 or lam > 1 for lam in v):
            raise ValueError("lambdas must lie in [0, 1]")
        return v


class SplitPlan(BaseModel):
    """Repeated stratified train/test splitting of the multi-record rows."""

    model_config = ConfigDict(validate_default=True, extra="forbid")

    train_fraction: float = Field(default=0.9, gt=0.0, lt=1.0)
    repeats: int = Field(default=10, ge=1)
    include_all_single_records_in_training: bool = Field(default=True)
    seed: int = Field(default=0, ge=0)


DEFAULT_DEMOGRAPHIC_PREFIXES = ["age", "sex:", "race:"]


class ModelSpec(BaseModel):
    """One competitor in split evaluation or simulation replications."""

    model_config = ConfigDict(
        validate_default=True, extra="forbid", populate_by_name=True
    )

    name: str
    estimator: Literal["glm", "glm0", "rrr", "hirrr"]
    rank: Optional[int] = Field(default=None, ge=1)
    lambda_: float = Field(default=1.0, ge=0.0, le=1.0, alias="lambda")
    solver: Literal["auto", "closed_form", "binary", "general"] = Field(default="auto")
    max_iters: int = Field(default=5000, ge=0)
    tolerance: float = Field(default=1e-6, gt=0.0)
    dispersion: Literal["column", "pooled"] = Field(default="column")
    features: Optional[List[str]] = Field(
        default=None, description="Feature-name prefixes kept in X"
    )
    screen_top_k: Optional[int] = Field(default=None, ge=1)
    cv: Optional[CvGrid] = Field(default=None)

    @model_validator(mode="after")
    def validate_rank_source(self) -> "ModelSpec":
        if self.estimator in ("rrr", "hirrr") and self.rank is None and self.cv is None:
            raise ValueError(f"{self.estimator} model '{self.name}' needs rank or cv")
        if self.estimator == "glm0" and self.features is None:
            self.features = list(DEFAULT_DEMOGRAPHIC_PREFIXES)
        return self

    def to_fit_config(self, rank: Optional[int] = None, lam: Optional[float] = None, seed: int = 0) -> FitConfig:
        """Build the FitConfig for this model, optionally overriding rank/lambda."""
        return FitConfig(
            rank=rank if rank is not None else (self.rank or 1),
            lambda_=self.lambda_ if lam is None else lam,
            tolerance=self.tolerance,
            max_iters=self.max_iters,
            seed=seed,
            dispersion=self.dispersion,
            solver=self.solver,
        )


class Scenario(str, Enum):
    """Synthetic outcome type."""

    CONTINUOUS = "continuous"
    BINARY = "binary"


class ScenarioSpec(BaseModel):
    """Simulation setting; defaults follow the desk reproduction."""

    model_config = ConfigDict(validate_default=True, extra="forbid")

    scenario: Scenario = Field(default=Scenario.CONTINUOUS)
    n: int = Field(default=2000, ge=2)
    n1: int = Field(default=7000, ge=0)
    p: int = Field(default=300, ge=1)
    q: int = Field(default=10, ge=1)
    q0: int = Field(default=1, ge=1)
    r: int = Field(default=3, ge=1)
    b: float = Field(default=0.05, ge=0.0)
    target_prevalence: float = Field(default=0.20, gt=0.0, lt=1.0)
    n_test: int = Field(default=2000, ge=2)
    calibration_draws: int = Field(default=100_000, ge=1000)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def validate_dimensions(self) -> "ScenarioSpec":
        if self.r > min(self.p, self.q):
            raise ValueError(f"r={self.r} exceeds min(p, q)={min(self.p, self.q)}")
        if self.q0 > self.q:
            raise ValueError(f"q0={self.q0} exceeds q={self.q}")
        return self


DEFAULT_SURROGATE_MAP: Dict[str, List[str]] = {
    "Depressive": [
        "293.83", "296.2", "296.3", "296.9", "298.0", "300.4", "301.12", "309.0",
    ],
    "Alcohol": [
        "291.0-5", "291.8-9", "303.0-303.9", "305.0", "357.5", "425.5", "571.0-3",
        "535.3", "V11.3",
    ],
    "Drug": ["292.0-1", "304.0-304.9", "305.2-305.8"],
    "Anxiety": ["300.0", "300.1", "300.2", "799.2"],
    "Posttraumatic": ["309.81"],
    "Schizophrenia": ["295.0-295.9", "V11.0"],
    "Bipolar": [
        "296.0", "296.1", "296.4-7", "296.80", "296.81", "296.82", "296.89",
        "296.90", "296.99", "V11.1",
    ],
}


class CohortConfig(BaseModel):
    """Case-control matching and feature construction settings."""

    model_config = ConfigDict(validate_default=True, extra="forbid")

    control_ratio: int = Field(default=5, ge=1)
    age_window: int = Field(default=2, ge=0)
    code_prevalence_floor: float = Field(default=0.005, gt=0.0, lt=1.0)
    truncate_digits: int = Field(default=3, ge=1)
    surrogate_map: Dict[str, List[str]] = Field(
        default_factory=lambda: {k: list(v) for k, v in DEFAULT_SURROGATE_MAP.items()}
    )
    seed: int = Field(default=0, ge=0)


def load_json_model(path: Path, model_cls: Type[ModelT]) -> ModelT:
    """
    Load a JSON config file into a pydantic model.

    Args:
        path: JSON file path
        model_cls: Target model class

    Returns:
        Validated model instance

    Raises:
        ConfigError: If the file is not valid JSON or fails validation
    """
    try:
        data = json.loads(Path(path).read_text())
        return model_cls.model_validate(data)
    except (json.JSONDecodeError, ValidationError) as e:
        raise ConfigError(f"Invalid {model_cls.__name__} file {path}: {e}") from e


def load_model_specs(path: Path) -> List[ModelSpec]:
    """Load a JSON list of ModelSpec entries (or {"models": [...]})."""
    try:
        data = json.loads(Path(path).read_text())
        if isinstance(data, dict):
            data = data.get("models", [])
        return [ModelSpec.model_validate(item) for item in data]
    except (json.JSONDecodeError, ValidationError, TypeError) as e:
        raise ConfigError(f"Invalid model list {path}: {e}") from e
