import numpy as np
import pytest

from robopt.data_synth import CovSpec, Dataset, NoiseSpec, gen_linear_heavy_tailed
from robopt.losses import (
    DomainBounds,
    LossModel,
    ball_constrained_quadratic_minimum,
    curvature_constants,
    empirical_loss_many,
    empirical_quadratic_terms,
    empirical_value_and_gradient,
    per_sample_gradient,
    per_sample_value,
    population_oracle_linear,
)

ALL_MODELS = [
    LossModel("squared"),
    LossModel("ridge", gamma=0.7),
    LossModel("glm-logistic"),
    LossModel("pseudo-huber", q=0.2),
]


def _random_z(rng, p, family):
    x = rng.standard_normal(p)
    if family == "glm-logistic":
        y = float(rng.integers(0, 2))
    else:
        y = float(rng.standard_normal())
    return x, y


def test_gradient_direct_substitution():
    g = per_sample_gradient(LossModel("squared"), np.zeros(2), (np.array([1.0, 0.0]), 2.0))
    assert np.allclose(g, [-2.0, 0.0])


def test_glm_gradient_vanishes_at_half_label():
    x = np.array([0.3, -1.2, 0.8])
    g = per_sample_gradient(LossModel("glm-logistic"), np.zeros(3), (x, 0.5))
    assert np.allclose(g, 0.0)


def test_gradient_dimension_mismatch():
    with pytest.raises(ValueError):
        per_sample_gradient(LossModel("squared"), np.zeros(3), (np.ones(2), 1.0))


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.family)
def test_gradient_matches_finite_differences(model):
    rng = np.random.default_rng(0)
    h = 1e-6
    for _ in range(100):
        p = rng.integers(2, 6)
        theta = rng.standard_normal(p)
        z = _random_z(rng, p, model.family)
        g = per_sample_gradient(model, theta, z)
        fd = np.empty(p)
        for j in range(p):
            e = np.zeros(p)
            e[j] = h
            fd[j] = (per_sample_value(model, theta + e, z) - per_sample_value(model, theta - e, z)) / (2 * h)
        denom = max(1.0, np.linalg.norm(g))
        assert np.linalg.norm(fd - g) / denom <= 1e-5


def test_pseudo_huber_fd_tight():
    model = LossModel("pseudo-huber", q=0.2)
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = 4
        theta = rng.standard_normal(p)
        z = _random_z(rng, p, model.family)
        g = per_sample_gradient(model, theta, z)
        h = 1e-6
        fd = np.empty(p)
        for j in range(p):
            e = np.zeros(p)
            e[j] = h
            fd[j] = (per_sample_value(model, theta + e, z) - per_sample_value(model, theta - e, z)) / (2 * h)
        assert np.linalg.norm(fd - g) / max(1.0, np.linalg.norm(g)) <= 1e-6


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.family)
def test_convexity_midpoint(model):
    rng = np.random.default_rng(1)
    for _ in range(100):
        p = rng.integers(2, 5)
        t1, t2 = rng.standard_normal(p), rng.standard_normal(p)
        z = _random_z(rng, p, model.family)
        mid = per_sample_value(model, 0.5 * (t1 + t2), z)
        assert mid <= 0.5 * per_sample_value(model, t1, z) + 0.5 * per_sample_value(model, t2, z) + 1e-12


def test_empirical_single_sample_reduces():
    model = LossModel("ridge", gamma=0.3)
    x, y = np.array([1.0, 2.0]), 0.7
    ds = Dataset(x[None, :], np.array([y]), None, "linear", 0)
    theta = np.array([0.4, -0.2])
    value, grad = empirical_value_and_gradient(model, theta, ds)
    assert value == pytest.approx(per_sample_value(model, theta, (x, y)))
    assert np.allclose(grad, per_sample_gradient(model, theta, (x, y)))


def test_empirical_duplication_invariance():
    model = LossModel("glm-logistic")
    rng = np.random.default_rng(5)
    X = rng.standard_normal((6, 3))
    y = rng.integers(0, 2, 6).astype(float)
    theta = rng.standard_normal(3)
    ds = Dataset(X, y, None, "glm-logistic", 0)
    dup = Dataset(np.vstack([X, X]), np.concatenate([y, y]), None, "glm-logistic", 0)
    v1, g1 = empirical_value_and_gradient(model, theta, ds)
    v2, g2 = empirical_value_and_gradient(model, theta, dup)
    assert v1 == pytest.approx(v2)
    assert np.allclose(g1, g2)


def test_empirical_gradient_interpolation():
    theta_star = np.array([2.0, -1.0, 0.5])
    ds = gen_linear_heavy_tailed(60, 3, theta_star, CovSpec.identity(), NoiseSpec("none"), seed=1)
    _, grad = empirical_value_and_gradient(LossModel("squared"), theta_star, ds)
    assert np.linalg.norm(grad) <= 1e-10


def test_empirical_rejects_empty():
    ds = Dataset(np.zeros((1, 2)), np.zeros(1), None, "linear", 0)
    object.__setattr__(ds, "X", np.zeros((0, 2)))
    object.__setattr__(ds, "y", np.zeros(0))
    with pytest.raises(ValueError):
        empirical_value_and_gradient(LossModel("squared"), np.zeros(2), ds)


def test_empirical_loss_many_matches_scalar():
    model = LossModel("pseudo-huber", q=0.5)
    rng = np.random.default_rng(8)
    X = rng.standard_normal((30, 4))
    y = rng.standard_normal(30)
    ds = Dataset(X, y, None, "linear", 0)
    thetas = rng.standard_normal((7, 4))
    batch = empirical_loss_many(model, ds, thetas)
    singles = [empirical_value_and_gradient(model, t, ds)[0] for t in thetas]
    assert np.allclose(batch, singles)


def test_curvature_glm_lipschitz_constant():
    model = LossModel("glm-logistic", domain_bounds=DomainBounds(L_x=1.0, K_y=1.0))
    report = curvature_constants(model, np.ones(3), ball_radius=1.0)
    assert report.L2 == pytest.approx(2.0)
    assert report.tau_u == pytest.approx(0.25)


def test_curvature_ridge_spectrum_shift():
    model = LossModel("ridge", gamma=0.5, domain_bounds=DomainBounds(L_x=2.0, K_y=1.0))
    report = curvature_constants(model, np.ones(4), ball_radius=1.0)
    assert report.tau_u == pytest.approx(1.5)
    assert report.tau_l == pytest.approx(1.5)


def test_curvature_rank_one_gram():
    X = np.tile(np.eye(3)[0], (10, 1))
    ds = Dataset(X, np.zeros(10), None, "linear", 0)
    model = LossModel("squared", domain_bounds=DomainBounds(L_x=1.0, K_y=1.0))
    report = curvature_constants(model, ds, ball_radius=0.5)
    assert report.tau_u == pytest.approx(1.0)


def test_curvature_requires_domain_bounds():
    with pytest.raises(ValueError):
        curvature_constants(LossModel("squared"), np.ones(2), ball_radius=1.0)


def test_curvature_pseudo_huber_strong_convexity_constants():
    model = LossModel("pseudo-huber", q=0.2, domain_bounds=DomainBounds(L_x=1.0))
    p = 10
    spectrum = np.full(p, 1.0 / (3 * p))
    plain = curvature_constants(model, spectrum, ball_radius=1.0)
    assert plain.tau_l == 0.0  # unknown without the moment constants
    constants = (1.0 / 3, 1.0 / 3, 2.0, 3.0, 3.0)  # (C1', C2', C1'', C4~, sigma2)
    report = curvature_constants(model, spectrum, 1.0, pseudo_huber_constants=constants)
    c1p, c2p, c1pp, c4t, sigma2 = constants
    q = model.q
    expect = (q**3 * c1p**4) / (
        4 * p * (c1p**2 * q**2 + 8 * c1pp**2 * c2p**3 * c4t + 2 * c1p**2 * sigma2) ** 1.5
    )
    assert report.tau_l == pytest.approx(expect)
    assert 0 < report.tau_l <= report.tau_u


def test_lipschitz_bound_monte_carlo():
    D = 0.8
    bounds = DomainBounds(L_x=1.5, K_y=1.0)
    models = [
        LossModel("squared", domain_bounds=bounds),
        LossModel("ridge", gamma=0.4, domain_bounds=bounds),
        LossModel("glm-logistic", domain_bounds=bounds),
        LossModel("pseudo-huber", q=0.3, domain_bounds=bounds),
    ]
    rng = np.random.default_rng(12)
    for model in models:
        L2 = curvature_constants(model, np.ones(3), ball_radius=D).L2
        for _ in range(250):
            theta = rng.standard_normal(3)
            theta *= rng.random() * D / np.linalg.norm(theta)
            x = rng.standard_normal(3)
            x *= rng.random() * bounds.L_x / np.linalg.norm(x)
            if model.family == "glm-logistic":
                y = float(rng.integers(0, 2))
            else:
                y = float(rng.uniform(-bounds.K_y, bounds.K_y))
            g = per_sample_gradient(model, theta, (x, y))
            assert np.linalg.norm(g) <= L2 + 1e-12


def test_smoothness_of_empirical_gradient():
    rng = np.random.default_rng(23)
    X = rng.standard_normal((40, 3))
    y = rng.standard_normal(40)
    ds = Dataset(X, y, None, "linear", 0)
    model = LossModel("squared", domain_bounds=DomainBounds(L_x=10.0, K_y=10.0))
    tau_u = curvature_constants(model, ds, ball_radius=1.0).tau_u
    for _ in range(100):
        t1, t2 = rng.standard_normal(3), rng.standard_normal(3)
        _, g1 = empirical_value_and_gradient(model, t1, ds)
        _, g2 = empirical_value_and_gradient(model, t2, ds)
        assert np.linalg.norm(g1 - g2) <= tau_u * np.linalg.norm(t1 - t2) + 1e-9


@pytest.mark.parametrize("family", ["glm-logistic", "pseudo-huber"])
def test_smoothness_bounded_covariates(family):
    # smoothness constants hold for gradients on norm-bounded covariates
    rng = np.random.default_rng(29)
    L_x = 1.5
    X = rng.standard_normal((50, 4))
    X *= (L_x * rng.random((50, 1))) / np.linalg.norm(X, axis=1, keepdims=True)
    if family == "glm-logistic":
        model = LossModel(family, domain_bounds=DomainBounds(L_x=L_x, K_y=1.0))
        y = rng.integers(0, 2, 50).astype(float)
        tau_u = curvature_constants(model, np.ones(4), ball_radius=1.0).tau_u  # K_phi'' L_x^2
    else:
        model = LossModel(family, q=0.4, domain_bounds=DomainBounds(L_x=L_x))
        y = rng.standard_normal(50)
        gram_top = float(np.linalg.eigvalsh(X.T @ X / 50)[-1])
        tau_u = gram_top  # psi_q' <= 1 so the empirical Hessian is below the Gram
    ds = Dataset(X, y, None, family, 0)
    for _ in range(100):
        t1, t2 = rng.standard_normal(4), rng.standard_normal(4)
        _, g1 = empirical_value_and_gradient(model, t1, ds)
        _, g2 = empirical_value_and_gradient(model, t2, ds)
        assert np.linalg.norm(g1 - g2) <= tau_u * np.linalg.norm(t1 - t2) + 1e-9


def test_population_oracle_at_minimum():
    theta_star = np.array([1.0, -2.0])
    risk, grad, _ = population_oracle_linear(np.ones(2), 0.0, theta_star, sigma2=0.5, theta=theta_star)
    assert np.allclose(grad, 0.0)
    assert risk == pytest.approx(0.25)


def test_population_oracle_ridge_minimizer():
    risk, grad, minimizer = population_oracle_linear(np.ones(2), 1.0, np.array([2.0, 0.0]), 0.0, np.zeros(2))
    assert np.allclose(minimizer, [1.0, 0.0])


def test_population_oracle_rank_deficient_limit():
    # gamma -> 0 minimizer tends to the projection onto the range of Sigma
    diag = np.array([1.0, 2.0, 0.0, 0.0])
    theta_star = np.array([1.0, 1.0, 1.0, 1.0])
    _, _, minimizer = population_oracle_linear(diag, 1e-8, theta_star, 0.0, np.zeros(4))
    assert np.linalg.norm(minimizer - [1.0, 1.0, 0.0, 0.0]) <= 1e-6


def test_population_oracle_full_matrix_cov():
    rng = np.random.default_rng(15)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    sigma = q @ np.diag([2.0, 1.0, 0.5]) @ q.T
    theta_star = rng.standard_normal(3)
    theta = rng.standard_normal(3)
    risk, grad, minimizer = population_oracle_linear(sigma, 0.3, theta_star, 0.1, theta)
    diff = theta - theta_star
    assert risk == pytest.approx(0.5 * diff @ sigma @ diff + 0.05 + 0.15 * theta @ theta)
    assert np.allclose(grad, sigma @ diff + 0.3 * theta)
    assert np.allclose((sigma + 0.3 * np.eye(3)) @ minimizer, sigma @ theta_star)


def test_population_oracle_singular_error():
    with pytest.raises(np.linalg.LinAlgError):
        population_oracle_linear(np.array([1.0, 0.0]), 0.0, np.ones(2), 0.0, np.zeros(2))


def test_ball_constrained_quadratic_interior_and_boundary():
    H = np.diag([1.0, 2.0])
    b = np.array([0.5, 0.0])
    theta, value = ball_constrained_quadratic_minimum(H, b, 0.0, radius=5.0)
    assert np.allclose(theta, [0.5, 0.0])
    assert value == pytest.approx(-0.125)
    theta2, value2 = ball_constrained_quadratic_minimum(H, b, 0.0, radius=0.1)
    assert np.linalg.norm(theta2) == pytest.approx(0.1, rel=1e-9)
    # boundary value must beat every sampled feasible point
    rng = np.random.default_rng(0)
    for _ in range(200):
        u = rng.standard_normal(2)
        u *= 0.1 * rng.random() / np.linalg.norm(u)
        assert 0.5 * u @ H @ u - b @ u >= value2 - 1e-12


def test_quadratic_terms_match_empirical_loss():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((25, 3))
    y = rng.standard_normal(25)
    ds = Dataset(X, y, None, "linear", 0)
    model = LossModel("ridge", gamma=0.2)
    H, b, const = empirical_quadratic_terms(model, ds)
    theta = rng.standard_normal(3)
    direct, _ = empirical_value_and_gradient(model, theta, ds)
    assert direct == pytest.approx(0.5 * theta @ H @ theta - b @ theta + const)
