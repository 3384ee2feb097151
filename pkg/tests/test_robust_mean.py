import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robopt.rng import make_rng
from robopt.robust_mean import (
    GmomConfig,
    bucket_count,
    geometric_median,
    geometric_median_objective,
    gmom_error_bound,
    gmom_estimate,
    psi,
)

# High-precision oracle values computed with mpmath (50 digits):
#   psi(0.9)   = 0.1 log(1/9) + 0.9 log(9)
#   psi(7/18)  = (11/18) log(11/(18*0.9)) + (7/18) log(70/18)
PSI_09 = 1.7577796618689755
PSI_7_18 = 0.2915882625129285


def test_psi_oracle_values():
    assert psi(0.9) == pytest.approx(PSI_09, rel=1e-12)
    assert psi(7.0 / 18.0) == pytest.approx(PSI_7_18, rel=1e-12)


def test_psi_finite_on_grid():
    for x in np.linspace(0.01, 0.99, 99):
        assert math.isfinite(psi(float(x)))


def test_psi_domain_errors():
    for bad in (0.0, 1.0, -0.5, 2.0):
        with pytest.raises(ValueError):
            psi(bad)


def test_bucket_count_examples():
    assert bucket_count(0.999999) == 1
    assert bucket_count(0.1) == 8
    with pytest.raises(ValueError):
        bucket_count(0.0)
    with pytest.raises(ValueError):
        bucket_count(1.0)


@settings(max_examples=1000, deadline=None)
@given(st.floats(min_value=1e-12, max_value=1.0, exclude_max=True))
def test_bucket_count_cap(zeta):
    b = bucket_count(zeta)
    assert 1 <= b <= 1 + math.floor(3.5 * math.log(1.0 / zeta))


def test_geometric_median_single_point():
    point = np.array([3.0, -1.0])
    assert np.array_equal(geometric_median(point[None, :]), point)


def test_geometric_median_square_symmetry():
    center = np.array([2.0, -1.0])
    corners = center + np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    med = geometric_median(corners, tol=1e-12)
    assert np.linalg.norm(med - center) <= 1e-9


def test_geometric_median_one_dimensional():
    med = geometric_median(np.array([[0.0], [0.0], [10.0]]))
    assert abs(med[0]) <= 1e-9


def test_geometric_median_against_grid_oracle():
    rng = make_rng(77)
    for _ in range(10):
        pts = rng.standard_normal((5, 2))
        med = geometric_median(pts, tol=1e-12)
        oracle = _grid_refine_median(pts)
        assert np.linalg.norm(med - oracle) <= 1e-4


def _grid_refine_median(pts: np.ndarray) -> np.ndarray:
    # conservative shrink (plus/minus 4 cells) so flat valleys keep the
    # optimum inside the refined box
    lo = pts.min(axis=0) - 0.5
    hi = pts.max(axis=0) + 0.5
    best = None
    for _ in range(18):
        xs = np.linspace(lo[0], hi[0], 21)
        ys = np.linspace(lo[1], hi[1], 21)
        grid = np.array([[x, y] for x in xs for y in ys])
        objs = np.array([geometric_median_objective(g, pts) for g in grid])
        best = grid[int(np.argmin(objs))]
        span = (hi - lo) / 5.0
        lo, hi = best - span, best + span
    return best


def test_weiszfeld_objective_monotone():
    rng = make_rng(5)
    for _ in range(20):
        pts = rng.standard_normal((8, 3))
        _, info = geometric_median(pts, return_info=True)
        objs = np.array(info["objectives"])
        assert np.all(np.diff(objs) <= 1e-9 * (1 + objs[:-1]))


def test_weiszfeld_handles_coincident_points():
    pts = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [5.0, 0.0]])
    med = geometric_median(pts)
    assert np.linalg.norm(med) <= 1e-9  # majority point is optimal


def test_geometric_median_empty_errors():
    with pytest.raises(ValueError):
        geometric_median(np.zeros((0, 2)))


def test_geometric_median_nonconvergence_warns_and_returns_best():
    rng = make_rng(31)
    pts = rng.standard_normal((12, 3))
    with pytest.warns(RuntimeWarning, match="did not converge"):
        rough, info = geometric_median(pts, tol=1e-15, max_iter=2, return_info=True)
    assert not info["converged"]
    exact = geometric_median(pts, tol=1e-12)
    # best-so-far iterate: objective no worse than any earlier one
    assert info["objective"] <= info["objectives"][0] + 1e-12
    assert geometric_median_objective(rough, pts) >= geometric_median_objective(exact, pts) - 1e-12


def test_gmom_identical_gradients():
    g = np.array([1.0, -2.0, 0.5])
    grads = np.tile(g, (40, 1))
    assert np.allclose(gmom_estimate(grads, zeta=0.1), g)


def test_gmom_single_bucket_is_mean():
    rng = make_rng(3)
    grads = rng.standard_normal((17, 4))
    out = gmom_estimate(grads, zeta=0.999999)  # b = 1
    assert np.allclose(out, grads.mean(axis=0), atol=1e-9)


def test_gmom_bucket_precondition():
    grads = np.zeros((10, 2))
    with pytest.raises(ValueError, match="bucket count"):
        gmom_estimate(grads, zeta=0.1)  # b = 8 > 10/2


def test_gmom_determinism():
    rng = make_rng(9)
    grads = rng.standard_normal((100, 3))
    a = gmom_estimate(grads, zeta=0.2)
    b = gmom_estimate(grads, zeta=0.2)
    assert np.array_equal(a, b)


def test_gmom_in_convex_hull_of_bucket_means():
    from scipy.optimize import nnls

    rng = make_rng(21)
    for dim in (2, 6):
        grads = rng.standard_normal((64, dim)) + 3.0
        b = bucket_count(0.2)
        block = 64 // b
        means = grads[: b * block].reshape(b, block, dim).mean(axis=1)
        est = gmom_estimate(grads, zeta=0.2)
        # convex combination: solve min ||A w - target|| with weights summing to 1
        A = np.vstack([means.T, np.ones(b)])
        target = np.concatenate([est, [1.0]])
        w, resid = nnls(A, target)
        assert resid <= 1e-8


def test_gmom_concentration_mini():
    # smoke-sized version of the concentration gate (full one in acceptance)
    rng = make_rng(2024)
    mu = np.array([1.0, -1.0, 0.5, 0.0, 2.0])
    bound = gmom_error_bound(5.0, 0.1, 400)
    violations = 0
    for _ in range(50):
        sample = mu + rng.standard_normal((400, 5))
        est = gmom_estimate(sample, zeta=0.1)
        violations += np.linalg.norm(est - mu) > bound
    assert violations <= 5


def test_gmom_config_defaults():
    cfg = GmomConfig()
    assert cfg.weiszfeld_tol == 1e-10
    assert cfg.weiszfeld_max_iter == 10_000
