"""Geometric median-of-means estimation for heavy-tailed gradient samples.

The estimator buckets the sample into b contiguous blocks, averages each
block, and returns the geometric median of the block means.  The bucket
count is b = floor(log(1/zeta) / psi(7/18)) + 1 for a failure probability
zeta, and the call requires b <= n/2.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

_COINCIDENCE_EPS = 1e-12


@dataclass(frozen=True)
class GmomConfig:
    """Solver knobs for the inner geometric-median computation."""

    weiszfeld_tol: float = 1e-10
    weiszfeld_max_iter: int = 10_000


def psi(x: float) -> float:
    """(1 - x) log((1 - x)/0.9) + x log(x/0.1) on (0, 1)."""
    if not 0.0 < x < 1.0:
        raise ValueError("psi is defined on (0, 1)")
    return (1.0 - x) * np.log((1.0 - x) / 0.9) + x * np.log(x / 0.1)


_PSI_7_18 = psi(7.0 / 18.0)


def bucket_count(zeta: float) -> int:
    """Number of buckets for failure probability zeta in (0, 1)."""
    if not 0.0 < zeta < 1.0:
        raise ValueError("zeta must lie in (0, 1)")
    b = int(np.floor(np.log(1.0 / zeta) / _PSI_7_18)) + 1
    cap = 1 + int(np.floor(3.5 * np.log(1.0 / zeta)))
    assert b <= cap, "bucket count exceeded its analytic cap"
    return b


def geometric_median_objective(point: np.ndarray, points: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(points - point, axis=1)))


def geometric_median(
    points,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    return_info: bool = False,
):
    """Weiszfeld iteration for argmin_mu sum_i ||mu - x_i||_2.

    When an iterate lands on a data point, that point's term is dropped for
    the step and the subgradient optimality condition decides termination
    (the Vardi-Zhang modification).  On non-convergence after ``max_iter``
    the best iterate seen is returned with a warning.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] == 0:
        raise ValueError("geometric median needs at least one point")
    if tol <= 0:
        raise ValueError("tol must be positive")
    k = pts.shape[0]
    if k == 1:
        out = pts[0].copy()
        return (out, {"objective": 0.0, "iterations": 0, "converged": True, "objectives": [0.0]}) if return_info else out

    y = pts.mean(axis=0)
    objectives = [geometric_median_objective(y, pts)]
    best = y.copy()
    best_obj = objectives[0]
    converged = False
    iterations = 0
    scale = 1.0 + float(np.max(np.linalg.norm(pts, axis=1)))

    for iterations in range(1, max_iter + 1):
        dist = np.linalg.norm(pts - y, axis=1)
        near = dist < _COINCIDENCE_EPS * scale
        far = ~near
        if not np.any(far):
            converged = True  # all points coincide with the iterate
            break
        inv = 1.0 / dist[far]
        t_y = (pts[far] * inv[:, None]).sum(axis=0) / inv.sum()
        if np.any(near):
            # Subgradient residual of the far terms at the data point.
            r_vec = ((pts[far] - y) * inv[:, None]).sum(axis=0)
            r = np.linalg.norm(r_vec)
            multiplicity = int(near.sum())
            if r <= multiplicity:
                converged = True
                break
            step = min(1.0, multiplicity / r)
            y_next = (1.0 - step) * t_y + step * y
        else:
            y_next = t_y
        obj = geometric_median_objective(y_next, pts)
        objectives.append(obj)
        if obj < best_obj:
            best_obj = obj
            best = y_next.copy()
        move = np.linalg.norm(y_next - y)
        y = y_next
        if move <= tol * (1.0 + np.linalg.norm(y)):
            converged = True
            break

    if not converged:
        warnings.warn("geometric median did not converge; returning the best iterate", RuntimeWarning)
        y = best
    final_obj = geometric_median_objective(y, pts)
    if final_obj > best_obj:
        y, final_obj = best, best_obj
    if return_info:
        info = {
            "objective": final_obj,
            "iterations": iterations,
            "converged": converged,
            "objectives": objectives,
        }
        return y, info
    return y


def gmom_estimate(gradients, zeta: float, config: GmomConfig = GmomConfig()) -> np.ndarray:
    """Geometric median of bucket means of the rows of ``gradients``.

    The rows are partitioned in the given order into b = bucket_count(zeta)
    contiguous blocks of size floor(n/b); any trailing remainder is unused.
    """
    grads = np.asarray(gradients, dtype=float)
    if grads.ndim == 1:
        grads = grads[:, None]
    n = grads.shape[0]
    b = bucket_count(zeta)
    if b > n / 2:
        raise ValueError(
            f"bucket count b={b} exceeds n/2={n / 2:g}; increase the sample size or use a larger zeta"
        )
    block = n // b
    used = grads[: b * block].reshape(b, block, -1)
    # np.mean reduces pairwise over the block axis, which keeps block means
    # stable under reordering of parallel evaluation.
    means = used.mean(axis=1)
    return geometric_median(means, tol=config.weiszfeld_tol, max_iter=config.weiszfeld_max_iter)


def gmom_error_bound(trace_cov: float, zeta: float, n: int) -> float:
    """High-probability deviation bound 11 sqrt(trace_cov * log(1.4/zeta) / n)."""
    return 11.0 * float(np.sqrt(trace_cov * np.log(1.4 / zeta) / n))
