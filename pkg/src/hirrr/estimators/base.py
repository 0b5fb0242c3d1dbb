"""Core data types shared by all estimators."""

import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..config import FitConfig
from ..expfam import Family, check_support
from ..linalg import is_orthonormal
from ..utils.error_handler import ArgumentError

logger = logging.getLogger(__name__)


def matrix_to_json(M: np.ndarray) -> Dict[str, Any]:
    """Row-major matrix document with explicit dimensions."""
    M = np.asarray(M, dtype=float)
    return {"rows": int(M.shape[0]), "cols": int(M.shape[1]), "data": M.ravel().tolist()}


def matrix_from_json(doc: Dict[str, Any]) -> np.ndarray:
    """Inverse of ``matrix_to_json``."""
    rows, cols = int(doc["rows"]), int(doc["cols"])
    data = np.asarray(doc["data"], dtype=float)
    if data.size != rows * cols:
        raise ArgumentError(f"matrix data has {data.size} entries, expected {rows * cols}")
    return data.reshape(rows, cols)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Multi-record (X, Y) and single-record (Ytilde) data.

    Columns ``0..q0-1`` of Y are the primary outcomes, the rest surrogates.
    """

    X: np.ndarray
    Y: np.ndarray
    Ytilde: np.ndarray
    q0: int
    families: List[Family]
    feature_names: List[str] = field(default_factory=list)
    outcome_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        Yt = np.asarray(self.Ytilde, dtype=float)
        if Yt.size == 0:
            Yt = Yt.reshape(0, Y.shape[1] if Y.ndim == 2 else 0)
        if X.ndim != 2 or Y.ndim != 2 or Yt.ndim != 2:
            raise ArgumentError("X, Y and Ytilde must be 2-D")
        if X.shape[0] != Y.shape[0]:
            raise ArgumentError(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
        if Yt.shape[1] != Y.shape[1]:
            raise ArgumentError("Y and Ytilde must share their column count")
        q = Y.shape[1]
        if not 1 <= self.q0 <= q:
            raise ArgumentError(f"q0 must be in [1, {q}], got {self.q0}")
        families = [Family.parse(f) for f in self.families]
        if len(families) != q:
            raise ArgumentError(f"{len(families)} families for {q} outcomes")
        for k, family in enumerate(families):
            check_support(family, Y[:, k])
            check_support(family, Yt[:, k])
        if not np.all(np.isfinite(X)):
            raise ArgumentError("X must be finite")

        feature_names = list(self.feature_names) or [f"x{j + 1}" for j in range(X.shape[1])]
        outcome_names = list(self.outcome_names) or [f"y{k + 1}" for k in range(q)]
        if len(feature_names) != X.shape[1] or len(outcome_names) != q:
            raise ArgumentError("name lists do not match matrix dimensions")

        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "Y", _frozen(Y))
        object.__setattr__(self, "Ytilde", _frozen(Yt))
        object.__setattr__(self, "families", families)
        object.__setattr__(self, "feature_names", feature_names)
        object.__setattr__(self, "outcome_names", outcome_names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def n1(self) -> int:
        return self.Ytilde.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Y.shape[1]

    def subset(self, rows: Sequence[int], keep_single_records: bool = True) -> "Dataset":
        """Dataset restricted to the given multi-record rows."""
        rows = np.asarray(rows, dtype=int)
        Yt = self.Ytilde if keep_single_records else self.Ytilde[:0]
        return Dataset(
            X=self.X[rows],
            Y=self.Y[rows],
            Ytilde=Yt,
            q0=self.q0,
            families=list(self.families),
            feature_names=list(self.feature_names),
            outcome_names=list(self.outcome_names),
        )

    def without_single_records(self) -> "Dataset":
        return self.subset(np.arange(self.n), keep_single_records=False)

    def select_features(self, columns: Sequence[int]) -> "Dataset":
        """Dataset keeping only the given X columns."""
        columns = np.asarray(columns, dtype=int)
        return Dataset(
            X=self.X[:, columns],
            Y=self.Y,
            Ytilde=self.Ytilde,
            q0=self.q0,
            families=list(self.families),
            feature_names=[self.feature_names[j] for j in columns],
            outcome_names=list(self.outcome_names),
        )

    def to_json(self) -> Dict[str, Any]:
        return {
            "X": matrix_to_json(self.X),
            "Y": matrix_to_json(self.Y),
            "Ytilde": matrix_to_json(self.Ytilde),
            "q0": self.q0,
            "families": [f.value for f in self.families],
            "feature_names": self.feature_names,
            "outcome_names": self.outcome_names,
        }

    @classmethod
    def from_json(cls, doc: Dict[str, Any]) -> "Dataset":
        try:
            return cls(
                X=matrix_from_json(doc["X"]),
                Y=matrix_from_json(doc["Y"]),
                Ytilde=matrix_from_json(doc["Ytilde"]),
                q0=int(doc["q0"]),
                families=[Family.parse(f) for f in doc["families"]],
                feature_names=list(doc.get("feature_names", [])),
                outcome_names=list(doc.get("outcome_names", [])),
            )
        except KeyError as e:
            raise ArgumentError(f"dataset document is missing {e}") from e

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path: Path) -> "Dataset":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass
class ModelParams:
    """Fitted (A, B, mu, Ltilde, phi) with rank r; C = A Bᵀ."""

    A: np.ndarray
    B: np.ndarray
    mu: np.ndarray
    Ltilde: np.ndarray
    phi: np.ndarray
    rank: int
    objective_trace: List[float] = field(default_factory=list)
    converged: bool = True
    iterations: int = 0

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        self.Ltilde = np.asarray(self.Ltilde, dtype=float).reshape(-1, self.rank)
        self.phi = np.asarray(self.phi, dtype=float)
        if self.A.shape[1] != self.rank or self.B.shape[1] != self.rank:
            raise ArgumentError(f"A {self.A.shape} and B {self.B.shape} disagree with rank {self.rank}")
        if self.mu.shape != (self.B.shape[0],) or self.phi.shape != (self.B.shape[0],):
            raise ArgumentError("mu and phi must have length q")

    @property
    def C(self) -> np.ndarray:
        return self.A @ self.B.T

    @property
    def p(self) -> int:
        return self.A.shape[0]

    @property
    def q(self) -> int:
        return self.B.shape[0]

    @property
    def objective(self) -> Optional[float]:
        return self.objective_trace[-1] if self.objective_trace else None

    def theta(self, X: np.ndarray) -> np.ndarray:
        """Natural parameters 1 muᵀ + X A Bᵀ."""
        return self.mu[None, :] + (np.asarray(X, dtype=float) @ self.A) @ self.B.T

    def theta_tilde(self) -> np.ndarray:
        """Natural parameters 1 muᵀ + Ltilde Bᵀ of the single-record part."""
        return self.mu[None, :] + self.Ltilde @ self.B.T

    def check_invariants(self, tol: float = 1e-8) -> bool:
        return is_orthonormal(self.B, tol) and bool(np.all(self.phi > 0))

    def to_json(self) -> Dict[str, Any]:
        """
        Model document with exactly the keys rank, A, B, mu, Ltilde, phi
        and objective_trace.

        ``converged`` and ``iterations`` go to the audit log instead;
        ``from_json`` still reads them when present.
        """
        return {
            "rank": self.rank,
            "A": matrix_to_json(self.A),
            "B": matrix_to_json(self.B),
            "mu": self.mu.tolist(),
            "Ltilde": matrix_to_json(self.Ltilde),
            "phi": self.phi.tolist(),
            "objective_trace": [float(v) for v in self.objective_trace],
        }

    @classmethod
    def from_json(cls, doc: Dict[str, Any]) -> "ModelParams":
        try:
            return cls(
                A=matrix_from_json(doc["A"]),
                B=matrix_from_json(doc["B"]),
                mu=np.asarray(doc["mu"], dtype=float),
                Ltilde=matrix_from_json(doc["Ltilde"]),
                phi=np.asarray(doc["phi"], dtype=float),
                rank=int(doc["rank"]),
                objective_trace=[float(v) for v in doc.get("objective_trace", [])],
                converged=bool(doc.get("converged", True)),
                iterations=int(doc.get("iterations", 0)),
            )
        except KeyError as e:
            raise ArgumentError(f"model document is missing {e}") from e

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path: Path) -> "ModelParams":
        return cls.from_json(json.loads(Path(path).read_text()))


class Estimator(ABC):
    """Abstract base class for registered estimators."""

    def __init__(self, name: str):
        """
        Initialize estimator.

        Args:
            name: Registry name used in configs and logs
        """
        self.name = name
        self.logger = logging.getLogger(f"{__name__}.{name}")

    @abstractmethod
    def fit(self, ds: Dataset, cfg: FitConfig) -> ModelParams:
        """
        Fit the estimator.

        Args:
            ds: Training data
            cfg: Fit settings

        Returns:
            Fitted parameters

        Raises:
            HirrrError: On invalid inputs or divergence
        """
        pass


def check_rank(ds: Dataset, rank: int) -> None:
    """Raise unless 1 <= rank <= min(p, q)."""
    if not 1 <= rank <= min(ds.p, ds.q):
        raise ArgumentError(f"rank {rank} must lie in [1, min(p, q) = {min(ds.p, ds.q)}]")
