"""Pytest configuration and shared fixtures."""

import os
import shutil
import sys
import uuid
import warnings
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest
from scipy.special import expit

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from hirrr.cohort import generate_registry
from hirrr.config import load_config
from hirrr.estimators.base import Dataset
from hirrr.expfam import Family


@pytest.fixture(autouse=True)
def _quiet_fit_warnings():
    """Convergence and Procrustes warnings are asserted explicitly where relevant."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        yield


@pytest.fixture(autouse=True)
def _restore_environ():
    """Env files loaded by a test do not leak into the next one."""
    with patch.dict(os.environ):
        yield


@pytest.fixture
def rng():
    """Seeded random generator."""
    return np.random.default_rng(12345)


@pytest.fixture
def temp_test_dir():
    """Create a temporary directory for test files in the tests directory."""
    tests_dir = Path(__file__).parent
    temp_base = tests_dir / "test_temp"
    temp_base.mkdir(parents=True, exist_ok=True)

    temp_path = temp_base / f"session_{str(uuid.uuid4())[:8]}"
    temp_path.mkdir()
    try:
        (temp_path / "output").mkdir()
        (temp_path / "logs").mkdir()
        yield temp_path
    finally:
        if temp_path.exists():
            shutil.rmtree(temp_path)
        if temp_base.exists() and not list(temp_base.iterdir()):
            temp_base.rmdir()


@pytest.fixture
def env_file(temp_test_dir):
    """A .env file pointing logs and outputs into the temp directory."""
    config_data = {
        "HIRRR_THREADS": "1",
        "HIRRR_SEED": "0",
        "HIRRR_MAX_ITERS": "2000",
        "HIRRR_TOLERANCE": "1e-8",
        "DEFAULT_OUTPUT_DIR": str(temp_test_dir / "output"),
        "LOG_LEVEL": "DEBUG",
        "LOG_FILE": str(temp_test_dir / "logs" / "test.log"),
        "ENABLE_AUDIT_LOGGING": "true",
        "AUDIT_LOG_FILE": str(temp_test_dir / "logs" / "audit.log"),
    }
    path = temp_test_dir / ".env"
    with open(path, "w") as f:
        for key, value in config_data.items():
            f.write(f"{key}={value}\n")
    return path


@pytest.fixture
def test_config(env_file):
    """Create test configuration."""
    return load_config(str(env_file))


def make_low_rank(rng, n, n1, p, q, r, scale=0.5):
    """Features, rank-r coefficients and both linear-predictor blocks."""
    C = scale * rng.standard_normal((p, r)) @ rng.standard_normal((r, q))
    X = rng.standard_normal((n, p))
    Xt = rng.standard_normal((n1, p))
    return X, C, X @ C, Xt @ C


@pytest.fixture
def gaussian_dataset(rng):
    """n=80, n1=120, p=6, q=4, rank-2 Gaussian data."""
    X, _, eta, eta_t = make_low_rank(rng, 80, 120, 6, 4, 2)
    mu = np.array([0.5, -0.3, 0.0, 1.0])
    return Dataset(
        X=X,
        Y=mu + eta + rng.standard_normal(eta.shape),
        Ytilde=mu + eta_t + rng.standard_normal(eta_t.shape),
        q0=1,
        families=[Family.GAUSSIAN] * 4,
    )


@pytest.fixture
def binary_dataset(rng):
    """n=150, n1=200, p=5, q=4, rank-2 Bernoulli data with both classes."""
    X, _, eta, eta_t = make_low_rank(rng, 150, 200, 5, 4, 2, scale=0.6)
    Y = (rng.random(eta.shape) < expit(eta - 0.5)).astype(float)
    Yt = (rng.random(eta_t.shape) < expit(eta_t - 0.5)).astype(float)
    Y[0, :], Y[1, :] = 1.0, 0.0
    return Dataset(X=X, Y=Y, Ytilde=Yt, q0=1, families=[Family.BERNOULLI] * 4)


@pytest.fixture
def mixed_dataset(rng):
    """Bernoulli primary with Gaussian and Poisson surrogates."""
    X, _, eta, eta_t = make_low_rank(rng, 120, 90, 5, 3, 1, scale=0.3)

    def draw(linear):
        return np.column_stack(
            [
                (rng.random(linear.shape[0]) < expit(linear[:, 0])).astype(float),
                linear[:, 1] + rng.standard_normal(linear.shape[0]),
                rng.poisson(np.exp(np.clip(linear[:, 2], -3, 3))).astype(float),
            ]
        )

    Y = draw(eta)
    Y[0, 0], Y[1, 0] = 1.0, 0.0
    return Dataset(
        X=X,
        Y=Y,
        Ytilde=draw(eta_t),
        q0=1,
        families=[Family.BERNOULLI, Family.GAUSSIAN, Family.POISSON],
    )


@pytest.fixture
def registry():
    """Seeded synthetic encounter registry of 500 patients."""
    return generate_registry(500, seed=7)
