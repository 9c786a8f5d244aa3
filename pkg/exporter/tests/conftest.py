from __future__ import annotations

import subprocess
import sys

import numpy as np
import pytest
from sklearn.datasets import make_classification
from sklearn.ensemble import RandomForestClassifier


def run_primary_cli(*args: str) -> subprocess.CompletedProcess:
    """Invoke the inference package through its command-line interface."""
    return subprocess.run(
        [sys.executable, "-m", "treegrate.cli", *args],
        capture_output=True,
        text=True,
    )


def make_dataset(
    n_samples: int, n_features: int = 7, n_classes: int = 7, seed: int = 0
):
    X, y = make_classification(
        n_samples=n_samples,
        n_features=n_features,
        n_informative=min(6, n_features - 1),
        n_redundant=1,
        n_classes=n_classes,
        n_clusters_per_class=1,
        random_state=seed,
    )
    return X.astype(np.float32), y


@pytest.fixture(scope="session")
def small_forest():
    X, y = make_dataset(600, n_features=7, n_classes=3, seed=1)
    return RandomForestClassifier(n_estimators=5, max_depth=5, random_state=1).fit(
        X, y
    )
