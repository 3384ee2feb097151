"""Catalog and runner for the seven benchmark simulation protocols.

Each scenario pins a data model, a pair of algorithms, and every constant
needed to rebuild a cell from (n, epsilon, algorithm, seed) alone.  Results
are flat tables of final metrics; trajectories are available per cell for
convergence-profile analyses.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.optimize

from .data_synth import CovSpec, Dataset, NoiseSpec, gen_linear_heavy_tailed, gen_logistic_glm, gen_separable
from .losses import (
    DomainBounds,
    LOGISTIC_K_PHI2,
    LossModel,
    ball_constrained_quadratic_minimum,
    empirical_quadratic_terms,
    empirical_value_and_gradient,
    logistic_phi2,
)
from .optimizers import (
    AllSpace,
    GmomEstimator,
    L2Ball,
    NoisedMean,
    OptimizerConfig,
    Trajectory,
    project_l2_ball,
    run_fw,
    run_nesterov,
    run_pgd,
)
from .rng import derive_seed
from .robust_mean import bucket_count

METRICS = ("excess_empirical_loss", "l2_error", "excess_risk_proxy")

# Iteration-count schedules derived from rate formulas can explode for small
# n; cells refuse to run past this guard.
_MAX_T = 50_000


class ScenarioCellError(RuntimeError):
    """An inner failure annotated with the coordinates of the failing cell."""


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    description: str
    n_grid: tuple
    p: int
    epsilons: tuple  # empty for robustness-only scenarios
    delta: Optional[float]
    zeta: Optional[float]
    algorithms: tuple
    seeds: tuple = (0, 1, 2, 3, 4)
    default_scale: float = 1.0
    params: dict = field(default_factory=dict)

    def with_seeds(self, seeds) -> "ScenarioSpec":
        return replace(self, seeds=tuple(int(s) for s in seeds))


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    algorithm: str
    n: int
    p: int
    epsilon: Optional[float]
    seed: int
    metric: str
    value: float


@dataclass
class ResultTable:
    rows: list
    meta: dict = field(default_factory=dict)  # run provenance: scenario, scale, seeds

    def values(self, metric: str, algorithm: str, epsilon: Optional[float] = None, n: Optional[int] = None):
        out = []
        for r in self.rows:
            if r.metric != metric or r.algorithm != algorithm:
                continue
            if epsilon is not None and (r.epsilon is None or not math.isclose(r.epsilon, epsilon)):
                continue
            if n is not None and r.n != n:
                continue
            out.append(r.value)
        return out

    def n_values(self) -> list:
        return sorted({r.n for r in self.rows})

    def median_by_n(self, metric: str, algorithm: str, epsilon: Optional[float] = None) -> dict:
        out = {}
        for n in self.n_values():
            vals = self.values(metric, algorithm, epsilon, n=n)
            if vals:
                out[n] = float(np.median(vals))
        return out


@dataclass
class CellOutcome:
    trajectory: Trajectory
    metrics: dict


# ---------------------------------------------------------------------------
# Catalog


def _f1_spec() -> ScenarioSpec:
    p = 10
    D = 1.0 / (4.0 * np.sqrt(p))
    return ScenarioSpec(
        id="F1",
        description="Private accelerated vs classic Frank-Wolfe on margin-separated data",
        n_grid=(1250, 2500, 5000, 10000),
        p=p,
        epsilons=(0.5, 0.9),
        delta=1.0 / 3.0,
        zeta=None,
        algorithms=("fw-accel-private", "fw-classic-private"),
        params={
            "ball_radius": D,
            "S1": 1.0,
            "L2": float(np.sqrt(p) + p * D),
            "gamma_curv": float(p * (2.0 * D) ** 2),
            "gaussian_width": float(D * np.sqrt(p)),
            "theta0": "zero",
            "gradient_floor_checked": False,
        },
    )


def _f2_spec() -> ScenarioSpec:
    p = 3
    return ScenarioSpec(
        id="F2",
        description="Private accelerated vs classic Frank-Wolfe on a logistic model",
        n_grid=(1375, 2750, 5500),
        p=p,
        epsilons=(0.5, 0.9),
        delta=1.0 / 3.0,
        zeta=1.0 / 3.0,
        algorithms=("fw-accel-private", "fw-classic-private"),
        params={
            "x_half_width": float(1.0 / np.sqrt(p)),
            "L2": 2.0,
            "beta_L": LOGISTIC_K_PHI2,
            "C1": 1.0,
            "radius_rule": "12 p / (phi2(sqrt(p)) n^{2/5})",
            "T_rule": "n^{2/5} log n",
            "theta_star": "ones",
            "theta0": "zero",
        },
    )


def _f3_spec() -> ScenarioSpec:
    p = 10
    return ScenarioSpec(
        id="F3",
        description="Chunked private PGD vs Nesterov on a pseudo-Huber linear model",
        n_grid=(12500, 25000, 50000, 100000),
        p=p,
        epsilons=(0.1, 0.9),
        delta=1.0 / 3.0,
        zeta=None,
        algorithms=("pgd", "nesterov-smooth"),
        default_scale=0.2,
        params={
            "q": 0.2,
            "L2": 0.2,
            "tau_u": float(1.0 / (3 * p)),
            "x_half_width": float(1.0 / np.sqrt(p)),
            "noise": "student-t(3)",
            "T_rule": "n^{1/5}",
            "theta_star": "ones",
            "theta0": "zero",
            "theta1": 1.1,
        },
    )


def _f4_like(scenario_id: str, description: str, n_grid, default_scale: float, t_rule: str) -> ScenarioSpec:
    p = 100
    return ScenarioSpec(
        id=scenario_id,
        description=description,
        n_grid=tuple(n_grid),
        p=p,
        epsilons=(),
        delta=None,
        zeta=0.1,
        algorithms=("pgd", "nesterov-sc"),
        default_scale=default_scale,
        params={
            "tau_l": 2.0 / 3.0,
            "tau_u": 1.0,
            "spectrum": "linspace(2/3, 1, p)",
            "noise": "student-t(3)",
            "theta_star": "ones",
            "theta0": "zero",
            "theta1": "zero",
            "T_rule": t_rule,
            "zeta_per_call": True,
            "estimator": "full-sample gmom",
        },
    )


def _f6_spec() -> ScenarioSpec:
    p = 10
    return ScenarioSpec(
        id="F6",
        description="Robust accelerated vs classic Frank-Wolfe, rank-deficient covariance",
        n_grid=(6250, 12500, 25000, 50000),
        p=p,
        epsilons=(),
        delta=None,
        zeta=0.1,
        algorithms=(
            "fw-accel-m3",
            "fw-classic-m3",
            "fw-accel-m6",
            "fw-classic-m6",
            "fw-accel-m9",
            "fw-classic-m9",
        ),
        default_scale=0.2,
        params={
            "m_values": (3, 6, 9),
            "theta_star": "ones/sqrt(p)",
            "noise": "student-t(3)",
            "gamma_accel": "c_K/3",
            "gamma_classic": "n^{-1/9}",
            "T_rule_accel": "log(n)/c_K^2",
            "T_rule_classic": "n^{1/3}",
            "zeta_per_call": True,
        },
    )


def _f7_spec() -> ScenarioSpec:
    p = 10
    return ScenarioSpec(
        id="F7",
        description="Robust accelerated vs classic Frank-Wolfe, identity covariance",
        n_grid=(2500, 5000, 10000, 20000),
        p=p,
        epsilons=(),
        delta=None,
        zeta=0.1,
        algorithms=("fw-accel", "fw-classic"),
        params={
            "C1": 0.5,
            "theta_star": "ones",
            "noise": "student-t(3)",
            "classic_radius": "2 ||theta*||",
            "T_rule_accel": "log_{1/c}(n^{2/5})",
            "T_rule_classic": "n^{1/3}",
            "zeta_per_call": True,
        },
    )


def scenario_catalog() -> list:
    """All seven benchmark scenario specifications."""
    return [
        _f1_spec(),
        _f2_spec(),
        _f3_spec(),
        _f4_like(
            "F4",
            "Robust PGD vs Nesterov error profiles over iterations",
            (600, 900, 1200, 1500),
            1.0,
            "fixed T=20",
        ),
        _f4_like(
            "F5",
            "Robust PGD vs Nesterov final error over n",
            (7500, 15000, 30000, 60000),
            0.2,
            "log-balanced",
        ),
        _f6_spec(),
        _f7_spec(),
    ]


def get_scenario(scenario_id: str) -> ScenarioSpec:
    for spec in scenario_catalog():
        if spec.id == scenario_id:
            return spec
    raise KeyError(f"unknown scenario id {scenario_id!r}")


# ---------------------------------------------------------------------------
# Shared cell machinery


def _data_seed(spec_id: str, n: int, seed: int) -> int:
    return derive_seed(spec_id, "data", n, seed)


def _run_seed(spec_id: str, n: int, algorithm: str, epsilon, seed: int) -> int:
    return derive_seed(spec_id, "run", n, algorithm, -1.0 if epsilon is None else epsilon, seed)


def _cap_T(T: int, n: int, zeta: float) -> int:
    """Clamp an iteration schedule so every chunk can feed the bucketed
    estimator (chunk size at least twice the bucket count)."""
    cap = n // (2 * bucket_count(zeta))
    if cap < 1:
        raise ValueError(f"n={n} too small for the bucketed estimator at zeta={zeta}")
    return max(1, min(T, cap, _MAX_T))


def gradient_floor_from_margin(S1: float, beta_L: float, alpha: float) -> float:
    """Gradient-norm floor r = S1 * beta_L / alpha for a margin constant S1,
    empirical smoothness beta_L, and set strong convexity alpha.

    The floor is assumed, not verified per dataset; runs record it in their
    config echo.
    """
    return S1 * beta_L / alpha


def _classic_fw_T(n: int, epsilon: float, gamma_curv: float, L2: float, width: float) -> int:
    return max(1, math.ceil((n * epsilon * gamma_curv / (L2 * width)) ** (2.0 / 3.0)))


def _risk_proxy(theta: np.ndarray, theta_star: np.ndarray, spectrum: np.ndarray) -> float:
    diff = theta - theta_star
    return 0.5 * float(np.sum(spectrum * diff * diff))


def _logistic_reference_min(dataset: Dataset, model: LossModel, ball: L2Ball) -> float:
    """Numeric minimum of the empirical logistic loss over the ball."""

    def fun(theta):
        return empirical_value_and_gradient(model, theta, dataset)

    res = scipy.optimize.minimize(fun, np.zeros(dataset.p), jac=True, method="L-BFGS-B")
    theta = res.x
    if np.linalg.norm(theta) > ball.radius:
        # Constrained case: polish with exact-gradient projected descent.
        gram_top = float(np.linalg.eigvalsh(dataset.X.T @ dataset.X / dataset.n)[-1])
        eta = 1.0 / max(LOGISTIC_K_PHI2 * gram_top, 1e-12)
        theta = project_l2_ball(theta, ball.radius)
        for _ in range(2000):
            _, g = empirical_value_and_gradient(model, theta, dataset)
            theta = project_l2_ball(theta - eta * g, ball.radius)
    value, _ = empirical_value_and_gradient(model, theta, dataset)
    return float(value)


# ---------------------------------------------------------------------------
# Per-scenario cell runners


def _cell_f1(spec: ScenarioSpec, n: int, algorithm: str, epsilon: float, seed: int) -> CellOutcome:
    p = spec.p
    D = spec.params["ball_radius"]
    ball = L2Ball(D)
    dataset = gen_separable(n, p, _data_seed(spec.id, n, seed))
    model = LossModel("squared", domain_bounds=DomainBounds(L_x=np.sqrt(p), K_y=1.0))
    L2 = spec.params["L2"]
    H, b, const = empirical_quadratic_terms(model, dataset)
    _, ref_min = ball_constrained_quadratic_minimum(H, b, const, D)
    beta_L = float(np.linalg.eigvalsh(H)[-1])
    S1 = spec.params["S1"]
    run_seed = _run_seed(spec.id, n, algorithm, epsilon, seed)
    source = NoisedMean(epsilon=epsilon, delta=spec.delta, L2=L2)
    if algorithm == "fw-accel-private":
        c = max(0.5, 1.0 - S1 / 8.0)
        T = max(1, math.ceil(np.log(n) / np.log(1.0 / c)))
        config = OptimizerConfig(
            algorithm="fw-accel-private",
            T=T,
            theta0=np.zeros(p),
            r=gradient_floor_from_margin(S1, beta_L, ball.alpha),
            tau_u=beta_L,
            seed=run_seed,
        )
    elif algorithm == "fw-classic-private":
        T = _classic_fw_T(n, epsilon, spec.params["gamma_curv"], L2, spec.params["gaussian_width"])
        config = OptimizerConfig(algorithm="fw-classic-private", T=T, theta0=np.zeros(p), seed=run_seed)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r} for {spec.id}")
    traj = run_fw(dataset, model, ball, config, source, reference_value=ref_min)
    return CellOutcome(traj, {"excess_empirical_loss": traj.final_excess})


def _cell_f2(spec: ScenarioSpec, n: int, algorithm: str, epsilon: float, seed: int) -> CellOutcome:
    p = spec.p
    theta_star = np.ones(p)
    a = spec.params["x_half_width"]
    dataset = gen_logistic_glm(n, p, theta_star, a, _data_seed(spec.id, n, seed))
    model = LossModel("glm-logistic", domain_bounds=DomainBounds(L_x=1.0, K_y=1.0))
    L2 = spec.params["L2"]
    beta_L = spec.params["beta_L"]
    D = 12.0 * p / (logistic_phi2(np.sqrt(p)) * n**0.4)
    ball = L2Ball(D)
    ref_min = _logistic_reference_min(dataset, model, ball)
    run_seed = _run_seed(spec.id, n, algorithm, epsilon, seed)
    source = NoisedMean(epsilon=epsilon, delta=spec.delta, L2=L2)
    if algorithm == "fw-accel-private":
        r = n**-0.4 - np.sqrt(spec.params["C1"] * np.log(2.0 / spec.zeta) / n)
        if r <= 0:
            raise ValueError(f"gradient floor r nonpositive at n={n}")
        T = min(_MAX_T, max(1, math.ceil(n**0.4 * np.log(n))))
        config = OptimizerConfig(
            algorithm="fw-accel-private", T=T, theta0=np.zeros(p), r=float(r), tau_u=beta_L, seed=run_seed
        )
    elif algorithm == "fw-classic-private":
        gamma_curv = LOGISTIC_K_PHI2 * (2.0 * D) ** 2
        T = _classic_fw_T(n, epsilon, gamma_curv, L2, D * np.sqrt(p))
        config = OptimizerConfig(algorithm="fw-classic-private", T=T, theta0=np.zeros(p), seed=run_seed)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r} for {spec.id}")
    traj = run_fw(dataset, model, ball, config, source, reference_value=ref_min)
    return CellOutcome(traj, {"excess_empirical_loss": traj.final_excess})


def _cell_f3(spec: ScenarioSpec, n: int, algorithm: str, epsilon: float, seed: int) -> CellOutcome:
    p = spec.p
    theta_star = np.ones(p)
    dataset = gen_linear_heavy_tailed(
        n,
        p,
        theta_star,
        CovSpec.uniform_box(spec.params["x_half_width"]),
        NoiseSpec("student-t", nu=3.0),
        _data_seed(spec.id, n, seed),
    )
    model = LossModel("pseudo-huber", q=spec.params["q"], domain_bounds=DomainBounds(L_x=1.0))
    tau_u = spec.params["tau_u"]
    T = max(1, math.ceil(n**0.2))
    run_seed = _run_seed(spec.id, n, algorithm, epsilon, seed)
    source = NoisedMean(epsilon=epsilon, delta=spec.delta, L2=spec.params["L2"])
    if algorithm == "pgd":
        config = OptimizerConfig(algorithm="pgd", T=T, theta0=np.zeros(p), tau_u=tau_u, seed=run_seed)
        traj = run_pgd(dataset, model, AllSpace(), config, source)
    elif algorithm == "nesterov-smooth":
        config = OptimizerConfig(
            algorithm="nesterov-smooth",
            T=T,
            theta0=np.zeros(p),
            theta1=np.full(p, spec.params["theta1"]),
            tau_u=tau_u,
            seed=run_seed,
        )
        traj = run_nesterov(dataset, model, config, source)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r} for {spec.id}")
    return CellOutcome(traj, {"l2_error": traj.final_l2_error})


def _cell_f4f5(spec: ScenarioSpec, n: int, algorithm: str, epsilon, seed: int) -> CellOutcome:
    p = spec.p
    tau_l, tau_u = spec.params["tau_l"], spec.params["tau_u"]
    spectrum = np.linspace(tau_l, tau_u, p)
    theta_star = np.ones(p)
    dataset = gen_linear_heavy_tailed(
        n,
        p,
        theta_star,
        CovSpec.diagonal(spectrum),
        NoiseSpec("student-t", nu=3.0),
        _data_seed(spec.id, n, seed),
    )
    model = LossModel("squared")
    if spec.id == "F4":
        T = 20
    elif algorithm == "pgd":
        T = max(1, math.ceil(np.log(np.sqrt(n)) / np.log((tau_u + tau_l) / tau_u)))
    else:
        T = max(1, math.ceil(2.0 * np.log(np.sqrt(n)) / np.log(1.0 / (1.0 - np.sqrt(tau_l / tau_u)))))
    run_seed = _run_seed(spec.id, n, algorithm, epsilon, seed)
    # Full-sample bucketing: at p = 100 a twentieth of these n is far too
    # small a chunk to estimate a stable descent direction.
    source = GmomEstimator(spec.zeta, split_zeta=False, chunked=False)
    if algorithm == "pgd":
        config = OptimizerConfig(
            algorithm="pgd", T=T, theta0=np.zeros(p), tau_u=tau_u, tau_l=tau_l, seed=run_seed
        )
        traj = run_pgd(dataset, model, AllSpace(), config, source)
    elif algorithm == "nesterov-sc":
        config = OptimizerConfig(
            algorithm="nesterov-sc",
            T=T,
            theta0=np.zeros(p),
            theta1=np.zeros(p),
            tau_u=tau_u,
            tau_l=tau_l,
            seed=run_seed,
        )
        traj = run_nesterov(dataset, model, config, source)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r} for {spec.id}")
    metrics = {
        "l2_error": traj.final_l2_error,
        "excess_risk_proxy": _risk_proxy(traj.final, theta_star, spectrum),
    }
    return CellOutcome(traj, metrics)


def _cell_f6(spec: ScenarioSpec, n: int, algorithm: str, epsilon, seed: int) -> CellOutcome:
    p = spec.p
    base, m_tag = algorithm.rsplit("-m", maxsplit=1)
    m = int(m_tag)
    theta_star = np.ones(p) / np.sqrt(p)
    dataset = gen_linear_heavy_tailed(
        n,
        p,
        theta_star,
        CovSpec.rank_m(m),
        NoiseSpec("student-t", nu=3.0),
        _data_seed(spec.id, n, seed + 1000 * m),
    )
    c_k = np.sqrt((p - m) / p)
    head_norm = np.sqrt(m / p)  # norm of the identifiable part of theta*
    run_seed = _run_seed(spec.id, n, algorithm, epsilon, seed)
    source = GmomEstimator(spec.zeta, split_zeta=False)
    if base == "fw-classic":
        gamma = n ** (-1.0 / 9.0)
        model = LossModel("ridge", gamma=gamma)
        radius = head_norm / (1.0 + gamma)
        T = _cap_T(max(1, math.ceil(n ** (1.0 / 3.0))), n, spec.zeta)
        config = OptimizerConfig(algorithm="fw-classic", T=T, theta0=np.zeros(p), seed=run_seed)
    elif base == "fw-accel":
        gamma = c_k / 3.0
        model = LossModel("ridge", gamma=gamma)
        radius = head_norm / (1.0 + c_k)
        u = gamma * head_norm * c_k / (2.0 * (1.0 + c_k) ** 3)
        tau_u = 1.0 + gamma
        T = _cap_T(max(1, math.ceil(np.log(n) / c_k**2)), n, spec.zeta)
        config = OptimizerConfig(
            algorithm="fw-accel", T=T, theta0=np.zeros(p), r=float(u), tau_u=tau_u, seed=run_seed
        )
    else:
        raise ValueError(f"unknown algorithm {algorithm!r} for {spec.id}")
    traj = run_fw(dataset, model, L2Ball(radius), config, source)
    return CellOutcome(traj, {"l2_error": traj.final_l2_error})


def _cell_f7(spec: ScenarioSpec, n: int, algorithm: str, epsilon, seed: int) -> CellOutcome:
    p = spec.p
    theta_star = np.ones(p)
    dataset = gen_linear_heavy_tailed(
        n,
        p,
        theta_star,
        CovSpec.identity(),
        NoiseSpec("student-t", nu=3.0),
        _data_seed(spec.id, n, seed),
    )
    model = LossModel("squared")
    norm_star = float(np.linalg.norm(theta_star))
    run_seed = _run_seed(spec.id, n, algorithm, epsilon, seed)
    source = GmomEstimator(spec.zeta, split_zeta=False)
    if algorithm == "fw-classic":
        radius = 2.0 * norm_star
        T = _cap_T(max(1, math.ceil(n ** (1.0 / 3.0))), n, spec.zeta)
        config = OptimizerConfig(algorithm="fw-classic", T=T, theta0=np.zeros(p), seed=run_seed)
    elif algorithm == "fw-accel":
        c1 = spec.params["C1"]
        radius = norm_star - c1 / n**0.2
        if radius <= 0:
            raise ValueError(f"ball radius nonpositive at n={n}")
        u = c1 / n**0.2  # C1 * lambda_min(Sigma) / n^{1/5} with identity covariance
        c = max(0.5, 1.0 - u / (8.0 * radius))
        T = _cap_T(max(1, math.ceil(0.4 * np.log(n) / np.log(1.0 / c))), n, spec.zeta)
        config = OptimizerConfig(
            algorithm="fw-accel", T=T, theta0=np.zeros(p), r=float(u), tau_u=1.0, seed=run_seed
        )
    else:
        raise ValueError(f"unknown algorithm {algorithm!r} for {spec.id}")
    traj = run_fw(dataset, model, L2Ball(radius), config, source)
    metrics = {
        "l2_error": traj.final_l2_error,
        "excess_risk_proxy": _risk_proxy(traj.final, theta_star, np.ones(p)),
    }
    return CellOutcome(traj, metrics)


_CELL_RUNNERS = {
    "F1": _cell_f1,
    "F2": _cell_f2,
    "F3": _cell_f3,
    "F4": _cell_f4f5,
    "F5": _cell_f4f5,
    "F6": _cell_f6,
    "F7": _cell_f7,
}


def run_cell(spec: ScenarioSpec, n: int, algorithm: str, epsilon, seed: int) -> CellOutcome:
    """Run one (n, algorithm, epsilon, seed) cell and return its trajectory."""
    try:
        return _CELL_RUNNERS[spec.id](spec, n, algorithm, epsilon, seed)
    except Exception as exc:  # annotate with cell coordinates
        raise ScenarioCellError(
            f"{spec.id} cell n={n} algorithm={algorithm} epsilon={epsilon} seed={seed}: {exc}"
        ) from exc


def scaled_grid(spec: ScenarioSpec, scale: float) -> tuple:
    """Shrink every n by ``scale`` (floor, minimum 50), deduplicated."""
    if not 0.0 < scale <= 1.0:
        raise ValueError("scale must lie in (0, 1]")
    seen = []
    for n in spec.n_grid:
        m = max(50, int(math.floor(n * scale)))
        if m not in seen:
            seen.append(m)
    return tuple(seen)


def run_scenario(spec: ScenarioSpec, scale: Optional[float] = None, parallel_width: int = 1) -> ResultTable:
    """Run every cell of a scenario and collect final metrics.

    ``scale`` defaults to the scenario's desk-scale factor.  Results are
    independent of ``parallel_width`` because each cell derives its own
    seeds.
    """
    if not spec.seeds:
        raise ValueError("scenario needs at least one seed")
    if scale is None:
        scale = spec.default_scale
    grid = scaled_grid(spec, scale)
    eps_list = list(spec.epsilons) if spec.epsilons else [None]
    cells = [
        (n, algo, eps, seed)
        for n in grid
        for algo in spec.algorithms
        for eps in eps_list
        for seed in spec.seeds
    ]

    def one(cell):
        n, algo, eps, seed = cell
        outcome = run_cell(spec, n, algo, eps, seed)
        return [
            ResultRow(spec.id, algo, n, spec.p, eps, seed, metric, float(value))
            for metric, value in sorted(outcome.metrics.items())
            if value is not None
        ]

    if parallel_width > 1:
        with ThreadPoolExecutor(max_workers=parallel_width) as pool:
            chunks = list(pool.map(one, cells))
    else:
        chunks = [one(cell) for cell in cells]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=_row_key)
    meta = {"scenario": spec.id, "scale": scale, "n_grid": grid, "seeds": spec.seeds}
    return ResultTable(rows, meta=meta)


# ---------------------------------------------------------------------------
# Aggregation and export


def fit_log_slope(table: ResultTable, metric: str, algorithm: str, epsilon: Optional[float] = None) -> float:
    """Least-squares slope of log(median metric) against log(n)."""
    med = table.median_by_n(metric, algorithm, epsilon)
    if len(med) < 3:
        raise ValueError("need at least 3 distinct n values to fit a slope")
    ns = np.array(sorted(med))
    vals = np.array([med[n] for n in ns])
    if np.any(vals <= 0):
        raise ValueError("medians must be positive for a log-log fit")
    slope = np.polyfit(np.log(ns), np.log(vals), 1)[0]
    return float(slope)


def _row_key(row: ResultRow):
    eps = -math.inf if row.epsilon is None else row.epsilon
    return (row.scenario, row.algorithm, row.n, eps, row.seed, row.metric)


def table_to_csv(table: ResultTable) -> str:
    lines = ["scenario,algorithm,n,p,epsilon,seed,metric,value"]
    for r in sorted(table.rows, key=_row_key):
        eps = "" if r.epsilon is None else repr(float(r.epsilon))
        lines.append(f"{r.scenario},{r.algorithm},{r.n},{r.p},{eps},{r.seed},{r.metric},{repr(float(r.value))}")
    return "\n".join(lines) + "\n"


def export_csv(table: ResultTable, path) -> None:
    Path(path).write_text(table_to_csv(table))


def parse_result_csv(text: str) -> ResultTable:
    lines = [ln for ln in text.strip().split("\n") if ln]
    rows = []
    for line in lines[1:]:
        scenario, algorithm, n, p, eps, seed, metric, value = line.split(",")
        rows.append(
            ResultRow(
                scenario,
                algorithm,
                int(n),
                int(p),
                None if eps == "" else float(eps),
                int(seed),
                metric,
                float(value),
            )
        )
    return ResultTable(rows)
