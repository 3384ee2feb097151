"""Shared fixtures-as-functions for the test suite."""

import numpy as np

from robopt.data_synth import Dataset


def quadratic_dataset(A: np.ndarray, z: np.ndarray) -> Dataset:
    """Dataset whose empirical squared loss is exactly 0.5 (t-z)^T A (t-z)."""
    evals, evecs = np.linalg.eigh(A)
    root = evecs @ np.diag(np.sqrt(np.maximum(evals, 0.0))) @ evecs.T
    p = len(z)
    X = np.sqrt(p) * root  # n = p rows, X^T X / n = A
    return Dataset(X, X @ z, z, "linear", 0)


def random_spd(rng: np.random.Generator, p: int, tau_l: float, tau_u: float) -> np.ndarray:
    """Random symmetric matrix with spectrum in [tau_l, tau_u], both attained."""
    evals = np.sort(rng.uniform(tau_l, tau_u, p))
    evals[0], evals[-1] = tau_l, tau_u
    q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    return q @ np.diag(evals) @ q.T
