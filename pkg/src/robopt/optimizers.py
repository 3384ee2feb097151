"""Iterative first-order methods: classical and accelerated Frank-Wolfe,
their private variants, projected gradient descent, Nesterov momentum in the
strongly convex and smooth regimes, and projected noisy SGD.

Every runner is deterministic given (config, seed); noise draws come from a
dedicated Philox stream per run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .data_synth import Dataset
from .losses import LossModel, empirical_gradient, empirical_loss_many, per_sample_gradients
from .privacy import fw_noise_variance
from .rng import make_rng
from .robust_mean import GmomConfig, gmom_estimate

ALGORITHMS = (
    "fw-classic",
    "fw-accel",
    "fw-accel-private",
    "fw-classic-private",
    "pgd",
    "nesterov-sc",
    "nesterov-smooth",
    "dp-sgd",
)

_FW_ALGOS = ("fw-classic", "fw-accel", "fw-accel-private", "fw-classic-private")
_FW_PRIVATE = ("fw-accel-private", "fw-classic-private")


# ---------------------------------------------------------------------------
# Constraint sets


@dataclass(frozen=True)
class L2Ball:
    """Origin-centered l2 ball of radius ``radius`` (set strong convexity 1/radius)."""

    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    @property
    def alpha(self) -> float:
        return 1.0 / self.radius

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True)
class AllSpace:
    """Unconstrained optimization over R^p."""


ConstraintSet = Union[L2Ball, AllSpace]


def lmo_l2_ball(g: np.ndarray, D: float) -> np.ndarray:
    """argmin_{||v|| <= D} g^T v; the origin on the degenerate g = 0 tie."""
    if D <= 0:
        raise ValueError("ball radius must be positive")
    norm = np.linalg.norm(g)
    if norm == 0.0:
        return np.zeros_like(g)
    return -(D / norm) * g


def project_l2_ball(v: np.ndarray, D: float) -> np.ndarray:
    """Euclidean projection onto the radius-D ball."""
    if D <= 0:
        raise ValueError("ball radius must be positive")
    norm = np.linalg.norm(v)
    if norm <= D:
        return np.asarray(v, dtype=float)
    return (D / norm) * np.asarray(v, dtype=float)


def split_chunks(n: int, T: int) -> list:
    """T contiguous disjoint (start, stop) ranges of size floor(n/T)."""
    if T > n:
        raise ValueError(f"cannot split n={n} samples into T={T} chunks")
    if T < 1:
        raise ValueError("T must be positive")
    size = n // T
    return [(t * size, (t + 1) * size) for t in range(T)]


# ---------------------------------------------------------------------------
# Gradient sources


@dataclass(frozen=True)
class ExactMean:
    """Plain empirical-mean gradients."""


@dataclass(frozen=True)
class NoisedMean:
    """Empirical-mean gradients plus Gaussian noise calibrated to a budget.

    An explicit ``sigma2`` wins; otherwise the variance is derived from
    (epsilon, delta, L2) for the algorithm at hand.
    """

    epsilon: Optional[float] = None
    delta: Optional[float] = None
    L2: Optional[float] = None
    sigma2: Optional[float] = None

    def resolve_sigma2(self, variant: str, n: int, T: int) -> float:
        if self.sigma2 is not None:
            return float(self.sigma2)
        if self.epsilon is None or self.delta is None or self.L2 is None:
            raise ValueError("NoisedMean needs sigma2 or all of (epsilon, delta, L2)")
        return fw_noise_variance(self.L2, n, T, self.epsilon, self.delta, variant)


@dataclass(frozen=True)
class GmomEstimator:
    """Geometric median-of-means over per-sample gradients.

    With ``chunked`` each step consumes its own fresh data chunk (step t uses
    chunk t); otherwise every step buckets the full sample.  With
    ``split_zeta`` the per-call failure probability is zeta / T (union bound
    over the T calls); otherwise zeta is used per call.
    """

    zeta: float
    split_zeta: bool = True
    chunked: bool = True
    config: GmomConfig = field(default_factory=GmomConfig)

    def call_zeta(self, T: int) -> float:
        return self.zeta / T if self.split_zeta else self.zeta


GradSource = Union[ExactMean, NoisedMean, GmomEstimator]


# ---------------------------------------------------------------------------
# Config and trajectory


@dataclass(frozen=True)
class OptimizerConfig:
    algorithm: str
    T: int
    theta0: np.ndarray
    theta1: Optional[np.ndarray] = None
    eta: Optional[float] = None
    lam: Optional[float] = None
    r: float = 0.0
    tau_u: Optional[float] = None
    tau_l: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.T < 1:
            raise ValueError("T must be a positive integer")
        object.__setattr__(self, "theta0", np.asarray(self.theta0, dtype=float))
        if self.theta1 is not None:
            object.__setattr__(self, "theta1", np.asarray(self.theta1, dtype=float))

    def echo(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "T": self.T,
            "eta": self.eta,
            "lam": self.lam,
            "r": self.r,
            "tau_u": self.tau_u,
            "tau_l": self.tau_l,
            "seed": self.seed,
        }


@dataclass
class Trajectory:
    """Iterates plus per-iterate metrics for a single optimization run.

    ``eta_t[k]`` is the step size used to produce iterate k (0 for starting
    points).  ``excess_loss`` is populated when a reference minimum was
    supplied, ``l2_error`` when the generating parameter is known.
    """

    iterates: np.ndarray
    loss: np.ndarray
    excess_loss: Optional[np.ndarray]
    l2_error: Optional[np.ndarray]
    eta_t: np.ndarray
    noise_sigma2: Optional[float]
    noise_draws: int
    seed: int
    algorithm: str
    config_echo: dict

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]

    @property
    def final_loss(self) -> float:
        return float(self.loss[-1])

    @property
    def final_excess(self) -> Optional[float]:
        return None if self.excess_loss is None else float(self.excess_loss[-1])

    @property
    def final_l2_error(self) -> Optional[float]:
        return None if self.l2_error is None else float(self.l2_error[-1])

    def to_csv(self) -> str:
        lines = ["t,loss,excess_loss,l2_err,eta_t"]
        for t in range(len(self.iterates)):
            excess = "" if self.excess_loss is None else repr(float(self.excess_loss[t]))
            l2 = "" if self.l2_error is None else repr(float(self.l2_error[t]))
            lines.append(
                f"{t},{repr(float(self.loss[t]))},{excess},{l2},{repr(float(self.eta_t[t]))}"
            )
        return "\n".join(lines) + "\n"


def _finalize(
    model: LossModel,
    dataset: Dataset,
    iterates: list,
    etas: list,
    sigma2: Optional[float],
    draws: int,
    config: OptimizerConfig,
    reference_value: Optional[float],
) -> Trajectory:
    thetas = np.asarray(iterates)
    loss = empirical_loss_many(model, dataset, thetas)
    excess = None if reference_value is None else loss - reference_value
    l2 = None
    if dataset.theta_star is not None:
        l2 = np.linalg.norm(thetas - dataset.theta_star[None, :], axis=1)
    return Trajectory(
        iterates=thetas,
        loss=loss,
        excess_loss=excess,
        l2_error=l2,
        eta_t=np.asarray(etas, dtype=float),
        noise_sigma2=sigma2,
        noise_draws=draws,
        seed=config.seed,
        algorithm=config.algorithm,
        config_echo=config.echo(),
    )


def _gmom_gradient(model, theta, dataset, chunks, t: int, source: GmomEstimator, T: int) -> np.ndarray:
    if source.chunked:
        start, stop = chunks[t]
        X, y = dataset.X[start:stop], dataset.y[start:stop]
    else:
        X, y = dataset.X, dataset.y
    grads = per_sample_gradients(model, theta, X, y)
    return gmom_estimate(grads, source.call_zeta(T), source.config)


def _require_tau_u(config: OptimizerConfig) -> float:
    if config.tau_u is None or config.tau_u <= 0:
        raise ValueError(f"{config.algorithm} requires a positive tau_u")
    return config.tau_u


# ---------------------------------------------------------------------------
# Frank-Wolfe runners


def run_fw(
    dataset: Dataset,
    model: LossModel,
    constraint: ConstraintSet,
    config: OptimizerConfig,
    grad_source: GradSource,
    reference_value: Optional[float] = None,
) -> Trajectory:
    """Frank-Wolfe over an l2 ball.

    fw-classic uses the decaying rate 2/(t+2); fw-accel uses the fixed rate
    min(1, alpha r / (4 tau_u)) derived from the gradient-norm floor r.  The
    private variants add calibrated Gaussian noise to the full-data gradient
    before the linear minimization step.
    """
    if config.algorithm not in _FW_ALGOS:
        raise ValueError(f"run_fw cannot execute {config.algorithm!r}")
    if not isinstance(constraint, L2Ball):
        raise ValueError("Frank-Wolfe requires a compact l2-ball constraint")
    private = config.algorithm in _FW_PRIVATE
    if private and not isinstance(grad_source, NoisedMean):
        raise ValueError("private Frank-Wolfe requires a NoisedMean gradient source")
    if not private and isinstance(grad_source, NoisedMean):
        raise ValueError("noised gradients pair with the private Frank-Wolfe variants")
    classic = config.algorithm in ("fw-classic", "fw-classic-private")

    D = constraint.radius
    theta = config.theta0
    if np.linalg.norm(theta) > D * (1 + 1e-9):
        raise ValueError("theta0 lies outside the constraint ball")

    eta = None
    if not classic:
        tau_u = _require_tau_u(config)
        if config.eta is not None:
            eta = config.eta
        else:
            if config.r <= 0:
                raise ValueError("fw-accel requires a positive gradient-norm floor r")
            eta = min(1.0, constraint.alpha * config.r / (4.0 * tau_u))
        if not 0.0 < eta <= 1.0:
            raise ValueError("derived learning rate must lie in (0, 1]")

    sigma2 = None
    draws = 0
    if private:
        variant = "classic" if classic else "accelerated"
        sigma2 = grad_source.resolve_sigma2(variant, dataset.n, config.T)
    chunks = None
    if isinstance(grad_source, GmomEstimator) and grad_source.chunked:
        chunks = split_chunks(dataset.n, config.T)

    rng = make_rng(config.seed)
    p = dataset.p
    iterates = [theta.copy()]
    etas = [0.0]
    for t in range(config.T):
        if isinstance(grad_source, GmomEstimator):
            g = _gmom_gradient(model, theta, dataset, chunks, t, grad_source, config.T)
        else:
            g = empirical_gradient(model, theta, dataset)
        if private:
            g = g + np.sqrt(sigma2) * rng.standard_normal(p)
            draws += 1
        v = lmo_l2_ball(g, D)
        eta_t = 2.0 / (t + 2.0) if classic else eta
        theta = (1.0 - eta_t) * theta + eta_t * v
        iterates.append(theta.copy())
        etas.append(eta_t)
    return _finalize(model, dataset, iterates, etas, sigma2, draws, config, reference_value)


# ---------------------------------------------------------------------------
# Projected gradient descent


def run_pgd(
    dataset: Dataset,
    model: LossModel,
    constraint: ConstraintSet,
    config: OptimizerConfig,
    grad_source: GradSource,
    reference_value: Optional[float] = None,
) -> Trajectory:
    """theta <- P_C(theta - eta g).

    The step size defaults to 2/(tau_l + tau_u) in the strongly convex
    regime and 1/tau_u otherwise.  Noised gradients follow the chunked
    scheme: step t averages chunk t's gradients and adds noise whose
    variance is calibrated with the chunk size.
    """
    if config.algorithm != "pgd":
        raise ValueError(f"run_pgd cannot execute {config.algorithm!r}")
    eta = config.eta
    if eta is None:
        tau_u = _require_tau_u(config)
        if config.tau_l is not None and config.tau_l > 0:
            eta = 2.0 / (config.tau_l + tau_u)
        else:
            eta = 1.0 / tau_u

    chunked = isinstance(grad_source, NoisedMean) or (
        isinstance(grad_source, GmomEstimator) and grad_source.chunked
    )
    chunks = split_chunks(dataset.n, config.T) if chunked else None
    sigma2 = None
    draws = 0
    if isinstance(grad_source, NoisedMean):
        chunk_size = chunks[0][1] - chunks[0][0]
        sigma2 = grad_source.resolve_sigma2("chunked-gd", chunk_size, config.T)

    rng = make_rng(config.seed)
    theta = config.theta0.copy()
    iterates = [theta.copy()]
    etas = [0.0]
    for t in range(config.T):
        if isinstance(grad_source, GmomEstimator):
            g = _gmom_gradient(model, theta, dataset, chunks, t, grad_source, config.T)
        elif isinstance(grad_source, NoisedMean):
            start, stop = chunks[t]
            g = per_sample_gradients(model, theta, dataset.X[start:stop], dataset.y[start:stop]).mean(axis=0)
            g = g + np.sqrt(sigma2) * rng.standard_normal(dataset.p)
            draws += 1
        else:
            g = empirical_gradient(model, theta, dataset)
        theta = theta - eta * g
        if isinstance(constraint, L2Ball):
            theta = project_l2_ball(theta, constraint.radius)
        iterates.append(theta.copy())
        etas.append(eta)
    return _finalize(model, dataset, iterates, etas, sigma2, draws, config, reference_value)


# ---------------------------------------------------------------------------
# Nesterov's accelerated gradient descent (unconstrained)


def run_nesterov(
    dataset: Dataset,
    model: LossModel,
    config: OptimizerConfig,
    grad_source: GradSource,
    reference_value: Optional[float] = None,
) -> Trajectory:
    """Two-point momentum over R^p.

    nesterov-sc uses the constant momentum (sqrt(tau_u) - sqrt(tau_l)) /
    (sqrt(tau_u) + sqrt(tau_l)); nesterov-smooth uses the decaying schedule
    (t - 1)/(t + 2).  Gradients are evaluated at the extrapolated point.
    """
    if config.algorithm not in ("nesterov-sc", "nesterov-smooth"):
        raise ValueError(f"run_nesterov cannot execute {config.algorithm!r}")
    tau_u = _require_tau_u(config)
    eta = config.eta if config.eta is not None else 1.0 / tau_u
    lam = config.lam
    if config.algorithm == "nesterov-sc" and lam is None:
        if config.tau_l is None or config.tau_l <= 0:
            raise ValueError("nesterov-sc requires a positive tau_l")
        su, sl = np.sqrt(tau_u), np.sqrt(config.tau_l)
        lam = (su - sl) / (su + sl)

    chunked = isinstance(grad_source, NoisedMean) or (
        isinstance(grad_source, GmomEstimator) and grad_source.chunked
    )
    chunks = split_chunks(dataset.n, config.T) if chunked else None
    sigma2 = None
    draws = 0
    if isinstance(grad_source, NoisedMean):
        chunk_size = chunks[0][1] - chunks[0][0]
        sigma2 = grad_source.resolve_sigma2("chunked-gd", chunk_size, config.T)

    rng = make_rng(config.seed)
    theta_prev = config.theta0.copy()
    theta = config.theta1.copy() if config.theta1 is not None else config.theta0.copy()
    iterates = [theta_prev.copy(), theta.copy()]
    etas = [0.0, 0.0]
    for t in range(1, config.T + 1):
        lam_t = lam if config.algorithm == "nesterov-sc" else (t - 1.0) / (t + 2.0)
        point = theta + lam_t * (theta - theta_prev)
        if isinstance(grad_source, GmomEstimator):
            g = _gmom_gradient(model, point, dataset, chunks, t - 1, grad_source, config.T)
        elif isinstance(grad_source, NoisedMean):
            start, stop = chunks[t - 1]
            g = per_sample_gradients(model, point, dataset.X[start:stop], dataset.y[start:stop]).mean(axis=0)
            g = g + np.sqrt(sigma2) * rng.standard_normal(dataset.p)
            draws += 1
        else:
            g = empirical_gradient(model, point, dataset)
        theta_prev, theta = theta, point - eta * g
        iterates.append(theta.copy())
        etas.append(eta)
    return _finalize(model, dataset, iterates, etas, sigma2, draws, config, reference_value)


# ---------------------------------------------------------------------------
# Projected noisy SGD


def run_dp_sgd(
    dataset: Dataset,
    model: LossModel,
    constraint: L2Ball,
    epsilon: float,
    delta: float,
    seed: int,
    max_n: int = 400,
    sigma2: Optional[float] = None,
    L2: Optional[float] = None,
    reference_value: Optional[float] = None,
) -> Trajectory:
    """One-sample noisy projected SGD for n^2 steps.

    Data are consumed uniformly without replacement within each pass and
    reshuffled between passes.  Step t >= 1 uses
    eta_t = diam(C) / sqrt(t (n^2 L2 + p sigma2)).  ``sigma2`` and ``L2``
    may be overridden; by default L2 comes from the model's curvature report
    and sigma2 from the budget.
    """
    if not isinstance(constraint, L2Ball):
        raise ValueError("dp-sgd requires an l2-ball constraint")
    n, p = dataset.n, dataset.p
    if n > max_n:
        raise ValueError(f"n={n} exceeds the desk-scale guard max_n={max_n} (n^2 steps)")
    if L2 is None:
        from .losses import curvature_constants

        L2 = curvature_constants(model, dataset, constraint.radius).L2
    T = n * n
    if sigma2 is None:
        sigma2 = fw_noise_variance(L2, n, T, epsilon, delta, "sgd")
    rng = make_rng(seed)
    denom = n * n * L2 + p * sigma2
    diam = constraint.diameter
    sigma = np.sqrt(sigma2)

    theta = project_l2_ball(np.zeros(p), constraint.radius)
    iterates = [theta.copy()]
    etas = [0.0]
    perm = None
    for t in range(1, T + 1):
        k = (t - 1) % n
        if k == 0:
            perm = rng.permutation(n)
        i = perm[k]
        g = per_sample_gradients(model, theta, dataset.X[i : i + 1], dataset.y[i : i + 1])[0]
        g = g + sigma * rng.standard_normal(p)
        eta_t = diam / np.sqrt(t * denom)
        theta = project_l2_ball(theta - eta_t * g, constraint.radius)
        iterates.append(theta.copy())
        etas.append(eta_t)
    config = OptimizerConfig(algorithm="dp-sgd", T=T, theta0=np.zeros(p), seed=seed)
    traj = _finalize(model, dataset, iterates, etas, sigma2, T, config, reference_value)
    return traj


# ---------------------------------------------------------------------------
# Stability window for noisy descent


@dataclass(frozen=True)
class StabilityReport:
    k_gd: float
    f1: float
    f2: float
    stable_gd: bool
    nesterov_window_ok: bool


def f1(x: float) -> float:
    """Lower edge of the momentum stability window, as a multiple of tau_l."""
    return ((x + 1.0) * np.sqrt(1.0 - 1.0 / np.sqrt(x)) - x + 1.0) / 2.0


def f2(x: float) -> float:
    """Upper edge of the momentum stability window, as a multiple of tau_l."""
    ratio = (np.sqrt(x) - 1.0) / (np.sqrt(x) + 1.0)
    return (1.0 - 2.0 * (x - 1.0) * ratio) / (2.0 * (1.0 + 2.0 * ratio))


def stability_constants(tau_u: float, tau_l: float, alpha: float) -> StabilityReport:
    """Contraction factor of noisy descent and the momentum stability window.

    k_gd = (tau_u - tau_l + 2 alpha) / (tau_u + tau_l); descent is stable
    when the estimator slope alpha stays below tau_l / 2.  Momentum requires
    f1(tau_u/tau_l) < alpha/tau_l < f2(tau_u/tau_l) with the condition number
    below 1.76.
    """
    if tau_l <= 0:
        raise ValueError("tau_l must be positive")
    if tau_u < tau_l:
        raise ValueError("need tau_u >= tau_l")
    x = tau_u / tau_l
    k_gd = (tau_u - tau_l + 2.0 * alpha) / (tau_u + tau_l)
    lo, hi = f1(x), f2(x)
    return StabilityReport(
        k_gd=float(k_gd),
        f1=float(lo),
        f2=float(hi),
        stable_gd=bool(alpha < tau_l / 2.0),
        nesterov_window_ok=bool(lo < alpha / tau_l < hi and 1.0 < x < 1.76),
    )
