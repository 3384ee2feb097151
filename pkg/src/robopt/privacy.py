"""Gaussian-mechanism calibration and composition bookkeeping.

Purely analytical: no data is ever observed here.  Out-of-regime inputs
raise instead of being clamped, since privacy parameters must never be
silently approximated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VARIANTS = ("accelerated", "classic", "sgd", "chunked-gd")


class PrivacyRegimeError(ValueError):
    """Raised when inputs fall outside a formula's validity regime."""


def _check_eps_delta(epsilon: float, delta: float) -> None:
    if epsilon <= 0:
        raise PrivacyRegimeError("epsilon must be positive")
    if not 0.0 < delta < 1.0:
        raise PrivacyRegimeError("delta must lie in (0, 1)")


def adv_ok(epsilon: float, delta: float, T: int) -> bool:
    """Validity of the advanced-composition per-step budget split."""
    return epsilon < 2.0 * np.sqrt(2.0 * T * np.log(2.0 / delta)) and delta < 2.0 * T


def _require_adv(epsilon: float, delta: float, T: int) -> None:
    _check_eps_delta(epsilon, delta)
    if T < 1:
        raise PrivacyRegimeError("T must be a positive integer")
    if not adv_ok(epsilon, delta, T):
        raise PrivacyRegimeError(
            f"(epsilon={epsilon}, delta={delta}, T={T}) outside the advanced-composition regime"
        )


def gaussian_sigma2(sensitivity: float, epsilon: float, delta: float) -> float:
    """Gaussian-mechanism variance 2 sens^2 log(1.25/delta) / epsilon^2.

    Valid for epsilon in (0, 1); larger epsilon is rejected because the
    calibration bound does not cover it.
    """
    if sensitivity < 0:
        raise ValueError("sensitivity must be nonnegative")
    _check_eps_delta(epsilon, delta)
    if epsilon >= 1.0:
        raise PrivacyRegimeError(
            "the Gaussian-mechanism calibration requires epsilon < 1; "
            "split the budget across steps first"
        )
    return 2.0 * sensitivity**2 * np.log(1.25 / delta) / epsilon**2


def gradient_mean_sensitivity(L2: float, n: int) -> float:
    """l2 sensitivity of an n-sample gradient average with per-sample bound L2."""
    if L2 < 0 or n < 1:
        raise ValueError("need L2 >= 0 and n >= 1")
    return 2.0 * L2 / n


def per_step_budget(epsilon: float, delta: float, T: int):
    """Per-iteration budget (epsilon / (2 sqrt(2 T log(2/delta))), delta / (2T))."""
    _require_adv(epsilon, delta, T)
    eps_step = epsilon / (2.0 * np.sqrt(2.0 * T * np.log(2.0 / delta)))
    return eps_step, delta / (2.0 * T)


def compose_advanced(epsilon: float, delta: float, T: int) -> float:
    """Total epsilon of T-fold adaptive composition at the per-step budget.

    Returns eps/2 + eps sqrt(T) / (2 sqrt(2 log(2/delta))) *
    (exp(eps / (2 sqrt(2 T log(2/delta)))) - 1); at most eps when eps <= 0.9.
    """
    _require_adv(epsilon, delta, T)
    root = 2.0 * np.sqrt(2.0 * np.log(2.0 / delta))
    eps_tot = epsilon / 2.0 + epsilon * np.sqrt(T) / root * np.expm1(epsilon / (root * np.sqrt(T)))
    if epsilon <= 0.9 and not eps_tot <= epsilon * (1 + 1e-12):
        raise AssertionError("composition exceeded its corollary bound; arithmetic is broken")
    return float(eps_tot)


def fw_noise_variance(L2: float, n: int, T: int, epsilon: float, delta: float, variant: str) -> float:
    """Per-iterate Gaussian noise variance for each private algorithm.

    variant:
      accelerated -- 64 L2^2 T log(5T/(2 delta)) log(2/delta) / (n^2 eps^2)
      classic     -- 32 L2^2 T log^2(n/delta) / (n^2 eps^2)
      sgd         -- 32 L2^2 log(n/delta) log(1/delta) / eps^2
      chunked-gd  -- accelerated formula with n read as the chunk size
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if n < 1:
        raise ValueError("n must be at least 1")
    if L2 < 0:
        raise ValueError("L2 must be nonnegative")
    if T < 0:
        raise ValueError("T must be nonnegative")
    _check_eps_delta(epsilon, delta)
    if variant in ("accelerated", "chunked-gd"):
        if T == 0:
            return 0.0
        _require_adv(epsilon, delta, T)
        return 64.0 * L2**2 * T * np.log(5.0 * T / (2.0 * delta)) * np.log(2.0 / delta) / (n**2 * epsilon**2)
    if variant == "classic":
        return 32.0 * L2**2 * T * np.log(n / delta) ** 2 / (n**2 * epsilon**2)
    return 32.0 * L2**2 * np.log(n / delta) * np.log(1.0 / delta) / epsilon**2


@dataclass(frozen=True)
class PrivacySpec:
    """Budget plus run geometry, with the derived per-step quantities."""

    epsilon: float
    delta: float
    T: int
    L2: float
    n: int

    def __post_init__(self):
        _check_eps_delta(self.epsilon, self.delta)
        if self.T < 1 or self.n < 1:
            raise ValueError("T and n must be positive integers")
        if self.L2 <= 0:
            raise ValueError("L2 must be positive")

    @property
    def eps_small(self) -> bool:
        return self.epsilon <= 0.9

    @property
    def adv_ok(self) -> bool:
        return adv_ok(self.epsilon, self.delta, self.T)

    def step_budget(self):
        return per_step_budget(self.epsilon, self.delta, self.T)

    def sensitivity(self) -> float:
        return gradient_mean_sensitivity(self.L2, self.n)

    def noise_variance(self, variant: str) -> float:
        return fw_noise_variance(self.L2, self.n, self.T, self.epsilon, self.delta, variant)
