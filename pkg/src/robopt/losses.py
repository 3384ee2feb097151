"""Loss families with per-sample gradients, empirical aggregates, and
curvature/Lipschitz constants.

Families: ``squared`` (0.5 * residual^2), ``ridge`` (squared plus an l2
penalty), ``glm-logistic`` (negative log likelihood), and ``pseudo-huber``
(smooth Lipschitz surrogate with scale q).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .data_synth import Dataset

FAMILIES = ("squared", "ridge", "glm-logistic", "pseudo-huber")

# Logistic link constants: |Phi'| <= 1, |Phi''| <= 1/4, K_y = 1.
LOGISTIC_K_PHI1 = 1.0
LOGISTIC_K_PHI2 = 0.25


@dataclass(frozen=True)
class DomainBounds:
    """Data-domain radii used by Lipschitz constants: ||x||_2 <= L_x, |y| <= K_y."""

    L_x: float
    K_y: float = float("inf")


@dataclass(frozen=True)
class LossModel:
    family: str
    gamma: float = 0.0  # ridge penalty
    q: float = 0.0  # pseudo-huber scale
    domain_bounds: Optional[DomainBounds] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown loss family {self.family!r}")
        if self.family == "ridge" and self.gamma < 0:
            raise ValueError("ridge penalty must be nonnegative")
        if self.family == "pseudo-huber" and self.q <= 0:
            raise ValueError("pseudo-huber scale q must be positive")


@dataclass(frozen=True)
class CurvatureReport:
    tau_u: float  # smoothness
    tau_l: float  # strong convexity (0 when unknown)
    L2: float  # per-sample gradient Lipschitz bound
    gamma_curv: float  # curvature constant over the ball
    gaussian_width: float  # Gaussian width proxy D * sqrt(p)

    def __post_init__(self):
        if not (self.tau_u >= self.tau_l >= 0):
            raise ValueError("need tau_u >= tau_l >= 0")
        fields = (self.tau_u, self.tau_l, self.L2, self.gamma_curv, self.gaussian_width)
        if not all(np.isfinite(v) and v >= 0 for v in fields):
            raise ValueError("curvature constants must be finite and nonnegative")


def sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t, dtype=float)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _softplus(t: np.ndarray) -> np.ndarray:
    # log(1 + e^t) without overflow
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


def logistic_phi2(t: float) -> float:
    """Second derivative of the logistic link log(1 + e^t)."""
    s = sigmoid(np.asarray([t], dtype=float))[0]
    return float(s * (1.0 - s))


def psi_q(t: np.ndarray, q: float) -> np.ndarray:
    """Derivative of the pseudo-Huber penalty: t / sqrt(1 + (t/q)^2)."""
    return t / np.sqrt(1.0 + (t / q) ** 2)


def _values(model: LossModel, theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    margins = X @ theta
    if model.family == "squared":
        return 0.5 * (y - margins) ** 2
    if model.family == "ridge":
        return 0.5 * (y - margins) ** 2 + 0.5 * model.gamma * float(theta @ theta)
    if model.family == "glm-logistic":
        return -y * margins + _softplus(margins)
    r = y - margins
    return model.q**2 * (np.sqrt(1.0 + (r / model.q) ** 2) - 1.0)


def _gradients(model: LossModel, theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-sample gradients, one row per observation."""
    margins = X @ theta
    if model.family == "squared":
        return (margins - y)[:, None] * X
    if model.family == "ridge":
        return (margins - y)[:, None] * X + model.gamma * theta
    if model.family == "glm-logistic":
        return (sigmoid(margins) - y)[:, None] * X
    return -psi_q(y - margins, model.q)[:, None] * X


def per_sample_value(model: LossModel, theta: np.ndarray, z) -> float:
    x, y = z
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return float(_values(model, np.asarray(theta, dtype=float), x, np.asarray([y], dtype=float))[0])


def per_sample_gradient(model: LossModel, theta: np.ndarray, z) -> np.ndarray:
    """Gradient of the loss at one observation z = (x, y)."""
    x, y = z
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape != theta.shape:
        raise ValueError(f"x has shape {x.shape}, theta has shape {theta.shape}")
    return _gradients(model, theta, x[None, :], np.asarray([y], dtype=float))[0]


def per_sample_gradients(model: LossModel, theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if X.shape[1] != theta.shape[0]:
        raise ValueError("dimension mismatch between X and theta")
    return _gradients(model, theta, X, y)


def _mean_gradient(model: LossModel, theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    n = X.shape[0]
    margins = X @ theta
    if model.family == "squared":
        return X.T @ (margins - y) / n
    if model.family == "ridge":
        return X.T @ (margins - y) / n + model.gamma * theta
    if model.family == "glm-logistic":
        return X.T @ (sigmoid(margins) - y) / n
    return -(X.T @ psi_q(y - margins, model.q)) / n


def empirical_gradient(model: LossModel, theta: np.ndarray, dataset: Dataset) -> np.ndarray:
    """Mean gradient over the dataset (no value computation)."""
    if dataset.n == 0:
        raise ValueError("dataset is empty")
    return _mean_gradient(model, np.asarray(theta, dtype=float), dataset.X, dataset.y)


def empirical_value_and_gradient(model: LossModel, theta: np.ndarray, dataset: Dataset):
    """Mean loss value and mean gradient over the dataset."""
    if dataset.n == 0:
        raise ValueError("dataset is empty")
    theta = np.asarray(theta, dtype=float)
    X, y = dataset.X, dataset.y
    value = float(np.mean(_values(model, theta, X, y)))
    return value, _mean_gradient(model, theta, X, y)


def empirical_loss_many(model: LossModel, dataset: Dataset, thetas: np.ndarray) -> np.ndarray:
    """Mean empirical loss at each row of ``thetas`` (K, p) -> (K,).

    Evaluated in blocks so long trajectories do not materialize an n-by-K
    margin matrix all at once.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    X, y = dataset.X, dataset.y
    out = np.empty(thetas.shape[0])
    block = max(1, 4_000_000 // max(dataset.n, 1))
    for s in range(0, thetas.shape[0], block):
        th = thetas[s : s + block]
        margins = X @ th.T  # (n, k)
        if model.family in ("squared", "ridge"):
            vals = 0.5 * np.mean((y[:, None] - margins) ** 2, axis=0)
            if model.family == "ridge":
                vals = vals + 0.5 * model.gamma * np.sum(th * th, axis=1)
        elif model.family == "glm-logistic":
            vals = np.mean(-y[:, None] * margins + _softplus(margins), axis=0)
        else:
            vals = np.mean(
                model.q**2 * (np.sqrt(1.0 + ((y[:, None] - margins) / model.q) ** 2) - 1.0), axis=0
            )
        out[s : s + block] = vals
    return out


def _spectrum_of(data: Union[Dataset, np.ndarray]) -> np.ndarray:
    """Eigenvalues of the second-moment matrix, ascending.

    A Dataset yields the empirical Gram spectrum; an array is read as the
    diagonal of a population covariance.
    """
    if isinstance(data, Dataset):
        gram = data.X.T @ data.X / data.n
        gram = 0.5 * (gram + gram.T)  # symmetrization guard
        return np.linalg.eigvalsh(gram)
    diag = np.asarray(data, dtype=float)
    if diag.ndim != 1:
        raise ValueError("population covariance description must be a 1-d spectrum")
    return np.sort(diag)


def curvature_constants(
    model: LossModel,
    data: Union[Dataset, np.ndarray],
    ball_radius: float,
    pseudo_huber_constants: Optional[tuple] = None,
) -> CurvatureReport:
    """Smoothness / strong-convexity / Lipschitz constants for a model.

    ``data`` is either a Dataset (empirical constants from the Gram matrix)
    or a 1-d array of population covariance eigenvalues.  ``ball_radius`` is
    the radius D of the l2 constraint ball.

    For pseudo-huber, the strong-convexity constant is only reported when
    the caller supplies ``pseudo_huber_constants = (C1p, C2p, C1pp, C4t,
    sigma2)``; otherwise tau_l = 0.
    """
    spectrum = _spectrum_of(data)
    p = len(spectrum)
    lam_max, lam_min = float(spectrum[-1]), float(spectrum[0])
    D = float(ball_radius)
    bounds = model.domain_bounds

    if model.family in ("squared", "ridge"):
        tau_u = lam_max + model.gamma
        tau_l = lam_min + model.gamma
        if bounds is None or not np.isfinite(bounds.K_y):
            raise ValueError("squared/ridge Lipschitz constant needs domain_bounds with finite K_y")
        L2 = bounds.K_y * bounds.L_x + bounds.L_x**2 * D + model.gamma * D
    elif model.family == "glm-logistic":
        if bounds is None or not np.isfinite(bounds.K_y):
            raise ValueError("GLM Lipschitz constant needs domain_bounds with finite K_y")
        tau_u = LOGISTIC_K_PHI2 * bounds.L_x**2
        tau_l = logistic_phi2(bounds.L_x * D) * lam_min
        L2 = (LOGISTIC_K_PHI1 + bounds.K_y) * bounds.L_x
    else:  # pseudo-huber
        tau_u = lam_max
        if pseudo_huber_constants is not None:
            c1p, c2p, c1pp, c4t, sigma2 = pseudo_huber_constants
            q = model.q
            tau_l = (q**3 * c1p**4) / (
                4.0 * p * (c1p**2 * q**2 + 8.0 * c1pp**2 * c2p**3 * c4t + 2.0 * c1p**2 * sigma2) ** 1.5
            )
        else:
            tau_l = 0.0
        if bounds is None:
            raise ValueError("domain_bounds required for the pseudo-huber Lipschitz constant")
        L2 = model.q * bounds.L_x

    gamma_curv = 4.0 * D**2 * (lam_max + model.gamma)
    return CurvatureReport(
        tau_u=float(tau_u),
        tau_l=float(min(tau_l, tau_u)),
        L2=float(L2),
        gamma_curv=float(gamma_curv),
        gaussian_width=float(D * np.sqrt(p)),
    )


def population_oracle_linear(cov, gamma: float, theta_star: np.ndarray, sigma2: float, theta: np.ndarray):
    """Closed-form population risk for the (regularized) linear model.

    Returns ``(risk, grad, minimizer)`` where risk is
    0.5 (theta - theta*)^T Sigma (theta - theta*) + sigma2/2
    + gamma/2 ||theta||^2, and minimizer = (Sigma + gamma I)^{-1} Sigma theta*.
    """
    theta_star = np.asarray(theta_star, dtype=float)
    theta = np.asarray(theta, dtype=float)
    cov = np.asarray(cov, dtype=float)
    p = len(theta_star)
    sigma = np.diag(cov) if cov.ndim == 1 else cov
    if sigma.shape != (p, p):
        raise ValueError("covariance shape incompatible with theta_star")
    diff = theta - theta_star
    risk = 0.5 * float(diff @ sigma @ diff) + 0.5 * sigma2 + 0.5 * gamma * float(theta @ theta)
    grad = sigma @ diff + gamma * theta
    shifted = sigma + gamma * np.eye(p)
    if np.linalg.eigvalsh(0.5 * (shifted + shifted.T))[0] <= 1e-14:
        raise np.linalg.LinAlgError("Sigma + gamma I is singular; minimizer undefined")
    minimizer = np.linalg.solve(shifted, sigma @ theta_star)
    return risk, grad, minimizer


def ball_constrained_quadratic_minimum(H: np.ndarray, b: np.ndarray, const: float, radius: float):
    """Exact minimizer of 0.5 theta^T H theta - b^T theta + const over ||theta|| <= radius.

    Solved on the ridge path: theta(mu) = (H + mu I)^{-1} b with mu >= 0
    chosen so the constraint holds (mu = 0 when the unconstrained solution is
    interior).  Returns ``(theta, value)``.
    """
    H = 0.5 * (H + H.T)
    p = H.shape[0]
    evals, evecs = np.linalg.eigh(H)
    beta = evecs.T @ b

    def theta_of(mu: float) -> np.ndarray:
        return evecs @ (beta / (evals + mu))

    # Unconstrained (possibly least-norm) solution first.
    tol = max(evals[-1], 1.0) * 1e-12
    coef = np.where(evals > tol, beta / np.where(evals > tol, evals, 1.0), 0.0)
    if np.any((evals <= tol) & (np.abs(beta) > 1e-10 * max(1.0, float(np.linalg.norm(b))))):
        interior = None  # quadratic unbounded along a null direction: constraint must bind
    else:
        interior = evecs @ coef
    if interior is not None and np.linalg.norm(interior) <= radius:
        theta = interior
    else:
        lo, hi = 0.0, max(1.0, float(np.linalg.norm(b)) / radius)
        while np.linalg.norm(theta_of(hi)) > radius:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.linalg.norm(theta_of(mid)) > radius:
                lo = mid
            else:
                hi = mid
        theta = theta_of(hi)
    value = 0.5 * float(theta @ H @ theta) - float(b @ theta) + const
    return theta, value


def empirical_quadratic_terms(model: LossModel, dataset: Dataset):
    """(H, b, const) with empirical loss = 0.5 t^T H t - b^T t + const (squared/ridge)."""
    if model.family not in ("squared", "ridge"):
        raise ValueError("quadratic form only defined for squared/ridge losses")
    H = dataset.X.T @ dataset.X / dataset.n + model.gamma * np.eye(dataset.p)
    b = dataset.X.T @ dataset.y / dataset.n
    const = 0.5 * float(dataset.y @ dataset.y) / dataset.n
    return H, b, const
