import os

import numpy as np
import pytest

os.environ.setdefault("SPARSEPLS_LOG_LEVEL", "WARNING")
os.environ.setdefault("SPARSEPLS_THREADS", "1")


@pytest.fixture(autouse=True)
def fresh_settings():
    """
    Rebuild settings from the environment around every test.

    Tests that monkeypatch SPARSEPLS_* variables would otherwise leak the
    cached instance into later tests.
    """
    from sparsepls.settings import reset_settings

    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def make_xy():
    """Factory for column-centered (Xc, Yc) pairs with a planted linear signal."""

    def build(n: int, p: int, q: int, seed: int = 0, noise: float = 0.5):
        gen = np.random.default_rng(seed)
        X = gen.standard_normal((n, p))
        B = gen.standard_normal((p, q))
        Y = X @ B + noise * gen.standard_normal((n, q))
        return X - X.mean(axis=0), Y - Y.mean(axis=0)

    return build


@pytest.fixture
def regression_dataset():
    """Raw (uncentered) train/test Datasets, n=60/60, p=40, q=2, signal on 8 variables."""
    from sparsepls.data import Dataset

    gen = np.random.default_rng(7)
    p, q = 40, 2
    beta = np.zeros((p, q))
    beta[:8] = gen.uniform(0.5, 1.5, size=(8, q))

    def draw(n: int) -> Dataset:
        X = 2.0 + gen.standard_normal((n, p))
        Y = X @ beta + 0.5 * gen.standard_normal((n, q)) + 1.0
        return Dataset(X=X, Y=Y, beta_true=beta)

    return draw(60), draw(60)
