"""Seeded generators for the synthetic regression benchmarks.

Three data models are supported: linear regression with (possibly heavy
tailed) additive noise, logistic regression, and a margin-separated sign
model. Generation is a pure function of its arguments plus a seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .rng import make_rng

# Rejection sampling gives up after this many proposals per accepted point.
_MAX_REJECTION_FACTOR = 10**6


@dataclass(frozen=True)
class NoiseSpec:
    """Additive response-noise law for the linear model.

    kind is one of ``none``, ``gaussian``, ``student-t``,
    ``truncated-gaussian``.  ``sigma2`` applies to the Gaussian kinds,
    ``nu`` to the t-distribution, ``bound`` to the truncated kind.
    """

    kind: str = "none"
    sigma2: float = 1.0
    nu: float = 3.0
    bound: float = 1.0

    _KINDS = ("none", "gaussian", "student-t", "truncated-gaussian")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind in ("gaussian", "truncated-gaussian") and self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if self.kind == "truncated-gaussian" and self.bound <= 0:
            raise ValueError("truncation bound must be positive")
        if self.kind == "student-t" and self.nu <= 0:
            raise ValueError("degrees of freedom must be positive")

    def variance(self) -> float:
        """Population variance of one noise draw (errors if undefined)."""
        if self.kind == "none":
            return 0.0
        if self.kind == "gaussian":
            return float(self.sigma2)
        if self.kind == "student-t":
            if self.nu <= 2:
                raise ValueError("t-distribution variance requires nu > 2")
            return self.nu / (self.nu - 2.0)
        # Truncated normal on [-b, b]: sigma2 * (1 - 2 b' phi(b') / (2 Phi(b') - 1))
        # with b' = bound / sigma.
        b = self.bound / np.sqrt(self.sigma2)
        phi = np.exp(-0.5 * b * b) / np.sqrt(2 * np.pi)
        from math import erf

        mass = erf(b / np.sqrt(2.0))
        return float(self.sigma2 * (1.0 - 2.0 * b * phi / mass))

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "none":
            return np.zeros(count)
        if self.kind == "gaussian":
            return np.sqrt(self.sigma2) * rng.standard_normal(count)
        if self.kind == "student-t":
            # Ratio-of-Gaussian-to-chi-square construction.
            z = rng.standard_normal(count)
            v = rng.chisquare(self.nu, count)
            return z / np.sqrt(v / self.nu)
        return _truncated_normal(self.sigma2, self.bound, count, rng)


@dataclass(frozen=True)
class CovSpec:
    """Covariate law: centered with a diagonal second moment.

    kinds:
      identity      -- x ~ N(0, I_p)
      diagonal      -- x ~ N(0, diag(values))
      rank-m        -- x ~ N(0, diag(1,...,1,0,...,0)) with m ones
      uniform-box   -- i.i.d. entries Unif[-a, a]   (second moment a^2/3 I_p)
    """

    kind: str = "identity"
    values: Optional[tuple] = None
    m: Optional[int] = None
    half_width: Optional[float] = None

    _KINDS = ("identity", "diagonal", "rank-m", "uniform-box")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        if self.kind == "diagonal":
            if self.values is None or any(v < 0 for v in self.values):
                raise ValueError("diagonal covariance needs nonnegative values")
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.kind == "rank-m" and (self.m is None or self.m < 1):
            raise ValueError("rank-m covariance needs m >= 1")
        if self.kind == "uniform-box" and (self.half_width is None or self.half_width <= 0):
            raise ValueError("uniform-box needs a positive half width")

    @classmethod
    def identity(cls) -> "CovSpec":
        return cls("identity")

    @classmethod
    def diagonal(cls, values: Sequence[float]) -> "CovSpec":
        return cls("diagonal", values=tuple(values))

    @classmethod
    def rank_m(cls, m: int) -> "CovSpec":
        return cls("rank-m", m=m)

    @classmethod
    def uniform_box(cls, half_width: float) -> "CovSpec":
        return cls("uniform-box", half_width=half_width)

    def spectrum(self, p: int) -> np.ndarray:
        """Diagonal of the population second-moment matrix in R^p."""
        if self.kind == "identity":
            return np.ones(p)
        if self.kind == "diagonal":
            if len(self.values) != p:
                raise ValueError(f"diagonal has {len(self.values)} values, expected {p}")
            return np.asarray(self.values, dtype=float)
        if self.kind == "rank-m":
            if self.m > p:
                raise ValueError(f"rank m={self.m} exceeds dimension p={p}")
            return np.concatenate([np.ones(self.m), np.zeros(p - self.m)])
        return np.full(p, self.half_width**2 / 3.0)

    def sample(self, n: int, p: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "uniform-box":
            a = self.half_width
            return rng.uniform(-a, a, size=(n, p))
        scale = np.sqrt(self.spectrum(p))
        return rng.standard_normal((n, p)) * scale


@dataclass(frozen=True)
class Dataset:
    """A regression sample: covariate matrix, responses, and provenance."""

    X: np.ndarray
    y: np.ndarray
    theta_star: Optional[np.ndarray]
    model_tag: str
    seed: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be a matrix")
        if y.shape != (X.shape[0],):
            raise ValueError("y length must match the number of rows of X")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.theta_star is not None:
            ts = np.asarray(self.theta_star, dtype=float)
            if ts.shape != (X.shape[1],):
                raise ValueError("theta_star length must match the number of columns of X")
            object.__setattr__(self, "theta_star", ts)
        if self.model_tag == "separable":
            if X.size and np.max(np.abs(X)) > 1.0 + 1e-12:
                raise ValueError("separable data requires covariate entries in [-1, 1]")
            if not set(np.unique(y)) <= {-1.0, 1.0}:
                raise ValueError("separable data requires labels in {-1, +1}")
        if self.model_tag == "glm-logistic" and not set(np.unique(y)) <= {0.0, 1.0}:
            raise ValueError("logistic data requires labels in {0, 1}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def _truncated_normal(sigma2: float, bound: float, count: int, rng: np.random.Generator) -> np.ndarray:
    sigma = np.sqrt(sigma2)
    out = np.empty(count)
    filled = 0
    attempts = 0
    budget = _MAX_REJECTION_FACTOR * max(count, 1)
    while filled < count:
        want = count - filled
        batch = max(want * 2, 64)
        if attempts + batch > budget:
            raise RuntimeError("truncated-normal rejection sampling exceeded its attempt budget")
        draw = sigma * rng.standard_normal(batch)
        attempts += batch
        keep = draw[np.abs(draw) <= bound]
        take = min(len(keep), want)
        out[filled : filled + take] = keep[:take]
        filled += take
    return out


def sample_truncated_normal(sigma2: float, bound: float, count: int, seed: int) -> np.ndarray:
    """I.i.d. draws of N(0, sigma2) conditioned on [-bound, bound]."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    if bound <= 0:
        raise ValueError("bound must be positive")
    return _truncated_normal(sigma2, bound, count, make_rng(seed))


def gen_linear_heavy_tailed(
    n: int,
    p: int,
    theta_star: np.ndarray,
    cov: CovSpec,
    noise: NoiseSpec,
    seed: int,
) -> Dataset:
    """y_i = x_i^T theta_star + w_i with x per ``cov`` and w per ``noise``."""
    if n < 1 or p < 1:
        raise ValueError("n and p must be at least 1")
    theta_star = np.asarray(theta_star, dtype=float)
    if theta_star.shape != (p,):
        raise ValueError(f"theta_star has shape {theta_star.shape}, expected ({p},)")
    cov.spectrum(p)  # validates dimension compatibility (e.g. m <= p)
    rng = make_rng(seed)
    X = cov.sample(n, p, rng)
    w = noise.sample(n, rng)
    y = X @ theta_star + w
    return Dataset(X, y, theta_star, "linear", seed, meta={"cov": cov.kind, "noise": noise.kind})


def gen_logistic_glm(n: int, p: int, theta_star: np.ndarray, a: float, seed: int) -> Dataset:
    """Logistic model: x entries Unif[-a, a], y ~ Bernoulli(sigmoid(x^T theta*))."""
    if a <= 0:
        raise ValueError("box half width a must be positive")
    theta_star = np.asarray(theta_star, dtype=float)
    if theta_star.shape != (p,):
        raise ValueError(f"theta_star has shape {theta_star.shape}, expected ({p},)")
    rng = make_rng(seed)
    X = rng.uniform(-a, a, size=(n, p))
    prob = 1.0 / (1.0 + np.exp(-(X @ theta_star)))
    y = (rng.random(n) < prob).astype(float)
    return Dataset(X, y, theta_star, "glm-logistic", seed, meta={"a": a})


def gen_separable(n: int, p: int, seed: int) -> Dataset:
    """Margin-separated sign data.

    Rows are uniform on the unit box conditioned on |x^T v*| >= sqrt(p)/2 for
    v* = (1,...,1)/sqrt(p); labels are y = sgn(x^T v*).
    """
    if n < 1 or p < 1:
        raise ValueError("n and p must be at least 1")
    rng = make_rng(seed)
    v_star = np.ones(p) / np.sqrt(p)
    margin = np.sqrt(p) / 2.0
    X = np.empty((n, p))
    filled = 0
    attempts = 0
    budget = _MAX_REJECTION_FACTOR * n
    while filled < n:
        want = n - filled
        batch = min(max(want * 4, 256), 2_000_000)
        if attempts + batch > budget:
            raise RuntimeError("separable sampling could not reach the required margin")
        cand = rng.uniform(-1.0, 1.0, size=(batch, p))
        attempts += batch
        keep = cand[np.abs(cand @ v_star) >= margin]
        take = min(len(keep), want)
        X[filled : filled + take] = keep[:take]
        filled += take
    y = np.sign(X @ v_star)
    return Dataset(X, y, v_star, "separable", seed)


# ---------------------------------------------------------------------------
# File interchange: CSV with header x_1..x_p,y plus a JSON sidecar.


def dataset_to_csv(dataset: Dataset) -> str:
    header = ",".join([f"x_{j + 1}" for j in range(dataset.p)] + ["y"])
    lines = [header]
    for i in range(dataset.n):
        row = [repr(float(v)) for v in dataset.X[i]] + [repr(float(dataset.y[i]))]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def dataset_sidecar(dataset: Dataset) -> dict:
    return {
        "model_tag": dataset.model_tag,
        "seed": dataset.seed,
        "theta_star": None if dataset.theta_star is None else [float(v) for v in dataset.theta_star],
        "n": dataset.n,
        "p": dataset.p,
        "meta": dataset.meta,
    }


def write_dataset_csv(dataset: Dataset, path) -> None:
    """Write ``<path>`` (CSV) and ``<path>.json`` (sidecar)."""
    path = Path(path)
    path.write_text(dataset_to_csv(dataset))
    Path(str(path) + ".json").write_text(json.dumps(dataset_sidecar(dataset), indent=2) + "\n")


def read_dataset_csv(path) -> Dataset:
    path = Path(path)
    lines = path.read_text().strip().split("\n")
    header = lines[0].split(",")
    p = len(header) - 1
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    rows = rows.reshape(-1, p + 1)
    sidecar_path = Path(str(path) + ".json")
    tag, seed, theta_star, meta = "unknown", 0, None, {}
    if sidecar_path.exists():
        side = json.loads(sidecar_path.read_text())
        tag = side.get("model_tag", tag)
        seed = side.get("seed", 0)
        meta = side.get("meta", {})
        if side.get("theta_star") is not None:
            theta_star = np.asarray(side["theta_star"], dtype=float)
    return Dataset(rows[:, :p], rows[:, p], theta_star, tag, seed, meta=meta)
