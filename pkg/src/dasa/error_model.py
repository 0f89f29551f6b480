"""Worst-case error recursion for the projected stochastic approximation
scheme and numerical certificates for the optimality of the adaptive
lower-envelope stepsizes.

With gap = eta - beta L, the restricted recursion

    e_{k+1} = (1 - gap * delta_k) e_k + (1 + beta)^2 delta_k^2 nu^2

upper-bounds the mean squared distance to the solution whenever every step
lies in the admissible range G = (0, gap / ((1+beta)^2 L^2)].  Outside that
range the unrestricted quadratic-coefficient form

    e_{k+1} = (1 - 2 gap delta_k + (1+beta)^2 L^2 delta_k^2) e_k
              + (1+beta)^2 delta_k^2 nu^2

remains a valid bound for any positive steps; prediction against measured
mean squared errors uses it for that reason.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dasa.stepsize import recursion_sequence


@dataclass(frozen=True)
class ErrorRecursion:
    """Constants of the worst-case error bound: eta, L, nu, beta, e_0.

    e_0 is any positive starting bound (typically the initial squared
    distance, or D^2).  The tighter condition e_0 < 2 nu^2 / L^2 is needed
    only by the optimal-sequence operations and is enforced there.
    """

    eta: float
    lipschitz: float
    nu: float
    beta: float
    e0: float

    def __post_init__(self):
        if not (0 < self.eta <= self.lipschitz):
            raise ValueError("need 0 < eta <= lipschitz")
        if not (0 <= self.beta < self.eta / self.lipschitz):
            raise ValueError("beta must satisfy 0 <= beta < eta/L")
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")
        if not (math.isfinite(self.e0) and self.e0 > 0):
            raise ValueError("e0 must be positive and finite")

    @property
    def gap(self) -> float:
        return self.eta - self.beta * self.lipschitz

    @property
    def step_upper_bound(self) -> float:
        """Largest admissible step: gap / ((1+beta)^2 L^2)."""
        return self.gap / ((1 + self.beta) ** 2 * self.lipschitz**2)

    def noise_coefficient(self) -> float:
        return (1 + self.beta) ** 2 * self.nu**2


def _positive_steps(steps) -> np.ndarray:
    arr = np.asarray(steps, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("steps must be a nonempty one-dimensional sequence")
    if not np.all(arr > 0):
        raise ValueError("all steps must be strictly positive")
    return arr


def evaluate_error(rec: ErrorRecursion, steps) -> np.ndarray:
    """Trace e_0, ..., e_K of the restricted recursion along ``steps``."""
    arr = _positive_steps(steps)
    out = np.empty(arr.size + 1)
    out[0] = rec.e0
    gap = rec.gap
    noise = rec.noise_coefficient()
    e = rec.e0
    for k, d in enumerate(arr):
        e = (1.0 - gap * d) * e + noise * d * d
        out[k + 1] = e
    return out


def optimal_steps(rec: ErrorRecursion, count: int) -> np.ndarray:
    """The error-minimizing lower-envelope sequence delta*_0..delta*_{count-1}.

    Requires nu > 0 and e_0 < 2 nu^2 / L^2 (which places every delta*_k in the
    admissible range and makes the sequence strictly decreasing).
    """
    if rec.nu <= 0:
        raise ValueError("optimal steps need a positive noise bound")
    if not (rec.e0 < 2 * rec.nu**2 / rec.lipschitz**2):
        raise ValueError("optimal steps require e0 < 2 nu^2 / L^2")
    d0 = rec.gap / (2 * (1 + rec.beta) ** 2 * rec.nu**2) * rec.e0
    return recursion_sequence(d0, rec.gap / 2.0, count)


def minimizer_gap(rec: ErrorRecursion, steps) -> float:
    """e_K(steps) - e_K(delta*) for steps inside the admissible range.

    The difference is nonnegative and at least
    (1+beta)^2 nu^2 (delta_{K-1} - delta*_{K-1})^2; steps outside the range
    raise, since the guarantee is only claimed there.
    """
    arr = _positive_steps(steps)
    bound = rec.step_upper_bound
    if np.any(arr > bound * (1 + 1e-12)):
        raise ValueError(
            f"steps leave the admissible range (0, {bound}]; the minimizer "
            "guarantee does not apply"
        )
    star = optimal_steps(rec, arr.size)
    e_given = evaluate_error(rec, arr)[-1]
    e_star = evaluate_error(rec, star)[-1]
    return float(e_given - e_star)


@dataclass(frozen=True)
class ErrorComparison:
    """Observed mean squared errors against the predicted worst-case bound.

    ``ratios[j]`` is observed[j] / predicted e_{j+1}; ``fraction_bounded`` the
    share of iterations with observed <= predicted.
    """

    predicted: np.ndarray
    ratios: np.ndarray
    fraction_bounded: float


def predicted_vs_observed(rec: ErrorRecursion, observed_mse, steps) -> ErrorComparison:
    """Compare measured MSE at iterations 1..K with the predicted bound.

    ``observed_mse[j]`` is the measured mean squared distance after update
    j+1 and ``steps[j]`` the lower stepsize envelope used at that update; the
    two sequences must have equal length.  The prediction iterates the
    unrestricted quadratic-coefficient recursion from e_0, so it stays a
    valid upper bound even when early steps leave the admissible range.
    """
    observed = np.asarray(observed_mse, dtype=np.float64)
    arr = _positive_steps(steps)
    if observed.ndim != 1 or observed.size != arr.size:
        raise ValueError("observed_mse and steps must have equal length")
    if np.any(observed < 0) or not np.all(np.isfinite(observed)):
        raise ValueError("observed_mse must be finite and nonnegative")
    gap = rec.gap
    lip2 = (1 + rec.beta) ** 2 * rec.lipschitz**2
    noise = rec.noise_coefficient()
    predicted = np.empty(arr.size)
    e = rec.e0
    for k, d in enumerate(arr):
        e = (1.0 - 2.0 * gap * d + lip2 * d * d) * e + noise * d * d
        predicted[k] = e
    ratios = observed / predicted
    fraction = float(np.mean(observed <= predicted))
    return ErrorComparison(predicted=predicted, ratios=ratios, fraction_bounded=fraction)
