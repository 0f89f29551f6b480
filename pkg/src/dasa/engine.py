"""Projected stochastic approximation engine with per-player stepsizes, plus
a seeded multi-replication runner and MSE reduction."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats as sps

from dasa import vi
from dasa.vi import DecisionVector, GameInstance


@dataclass(frozen=True, eq=False)
class SolverConfig:
    """Run parameters for one stochastic-approximation trajectory.

    ``policies`` holds one steplength policy per player (objects exposing
    ``next_step``/``fresh``).  ``initial_point`` is a DecisionVector, a
    stacked array, or one of the directives "zero" / "random-feasible".
    ``record_every`` decimates the recorded trace; the final iterate is
    always recorded.  ``record_residual`` defaults to recording the natural
    residual only when the instance has no reference solution.
    """

    iterations: int
    policies: tuple
    initial_point: Union[str, DecisionVector, np.ndarray] = "zero"
    seed: int = 0
    record_every: int = 1
    record_residual: Optional[bool] = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("need at least one iteration")
        object.__setattr__(self, "policies", tuple(self.policies))
        if not self.policies:
            raise ValueError("need at least one steplength policy")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass(frozen=True, eq=False)
class ReplicationResult:
    """Recorded trace of one replication.

    ``ks`` are the recorded iteration indices (1-based, after each update);
    ``sq_dist`` holds ||x_k - x*||^2 when a reference solution is known and
    ``residuals`` the natural residual at gamma=1 when recorded.
    """

    ks: np.ndarray
    sq_dist: Optional[np.ndarray]
    residuals: Optional[np.ndarray]
    final_point: DecisionVector
    seed: int

    def __post_init__(self):
        for name in ("sq_dist", "residuals"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != (len(self.ks),) or np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be nonnegative, finite, and match ks")
            object.__setattr__(self, name, arr)


def _recorded_indices(iterations: int, stride: int) -> np.ndarray:
    ks = list(range(stride, iterations + 1, stride))
    if not ks or ks[-1] != iterations:
        ks.append(iterations)
    return np.asarray(ks, dtype=np.int64)


def _resolve_initial(instance: GameInstance, config: SolverConfig, rng) -> np.ndarray:
    spec = config.initial_point
    if isinstance(spec, str):
        if spec == "zero":
            x0 = np.zeros(instance.dimension)
        elif spec == "random-feasible":
            x0 = vi.sample_feasible_points(instance.feasible_set, 1, rng)[0]
        else:
            raise ValueError(f"unknown initial point directive {spec!r}")
    elif isinstance(spec, DecisionVector):
        x0 = spec.stacked()
    else:
        x0 = np.asarray(spec, dtype=np.float64)
    if x0.size != instance.dimension:
        raise ValueError("initial point has the wrong dimension")
    return vi.project(instance.feasible_set, x0)


def _step_slices(block_sizes) -> list:
    offsets = np.cumsum([0] + list(block_sizes))
    return [slice(offsets[i], offsets[i + 1]) for i in range(len(block_sizes))]


def run_sa(instance: GameInstance, config: SolverConfig) -> ReplicationResult:
    """One stochastic-approximation run: at iteration k the shared noisy
    sample F_hat(x_k, xi_k) is formed once, each player applies its own
    gamma_{k,i} to its block, and the update is projected (blockwise clamp on
    product boxes, one joint projection on coupled polyhedra).  Deterministic
    given (instance, config.seed)."""
    if len(config.policies) != instance.n_players:
        raise ValueError(
            f"{instance.n_players} players but {len(config.policies)} policies"
        )
    rng = np.random.default_rng(config.seed)
    x = _resolve_initial(instance, config, rng)
    policies = [p.fresh() for p in config.policies]
    slices = _step_slices(instance.block_sizes)
    fset = instance.feasible_set
    mapping = instance.mapping

    x_star = instance.reference_solution
    want_residual = (
        config.record_residual if config.record_residual is not None else x_star is None
    )
    ks = _recorded_indices(config.iterations, config.record_every)
    sq_dist = np.empty(len(ks)) if x_star is not None else None
    residuals = np.empty(len(ks)) if want_residual else None

    is_box = isinstance(fset, (vi.Box, vi.ProductOfBoxes))
    if is_box:
        if isinstance(fset, vi.Box):
            lower, upper = fset.lower, fset.upper
        else:
            lower, upper = fset.stacked_bounds()

    step = np.empty(instance.dimension)
    rec = 0
    for k in range(config.iterations):
        for i, policy in enumerate(policies):
            step[slices[i]] = policy.next_step(k)
        fhat = mapping.sampler(x, rng)
        y = x - step * fhat
        if is_box:
            x = np.clip(y, lower, upper)
        else:
            x = vi.project(fset, y)
        if rec < len(ks) and ks[rec] == k + 1:
            if sq_dist is not None:
                d = x - x_star
                sq_dist[rec] = float(d @ d)
            if residuals is not None:
                residuals[rec] = vi.natural_residual(fset, mapping, x, 1.0)
            rec += 1

    return ReplicationResult(
        ks=ks,
        sq_dist=sq_dist,
        residuals=residuals,
        final_point=DecisionVector.from_stacked(x, instance.block_sizes),
        seed=config.seed,
    )


def run_sa_identical(instance: GameInstance, config: SolverConfig) -> ReplicationResult:
    """Reference implementation of the identical-stepsize special case: one
    shared gamma_k and a single projection of the full stacked update,
    x_{k+1} = Pi_X(x_k - gamma_k (F(x_k) + w_k)).  Uses config.policies[0]."""
    rng = np.random.default_rng(config.seed)
    x = _resolve_initial(instance, config, rng)
    policy = config.policies[0].fresh()
    fset = instance.feasible_set
    mapping = instance.mapping

    x_star = instance.reference_solution
    want_residual = (
        config.record_residual if config.record_residual is not None else x_star is None
    )
    ks = _recorded_indices(config.iterations, config.record_every)
    sq_dist = np.empty(len(ks)) if x_star is not None else None
    residuals = np.empty(len(ks)) if want_residual else None

    rec = 0
    for k in range(config.iterations):
        gamma = policy.next_step(k)
        fhat = mapping.sampler(x, rng)
        x = vi.project(fset, x - gamma * fhat)
        if rec < len(ks) and ks[rec] == k + 1:
            if sq_dist is not None:
                d = x - x_star
                sq_dist[rec] = float(d @ d)
            if residuals is not None:
                residuals[rec] = vi.natural_residual(fset, mapping, x, 1.0)
            rec += 1

    return ReplicationResult(
        ks=ks,
        sq_dist=sq_dist,
        residuals=residuals,
        final_point=DecisionVector.from_stacked(x, instance.block_sizes),
        seed=config.seed,
    )


def run_replications(
    instance: GameInstance,
    config: SolverConfig,
    reps: int,
    base_seed: int,
) -> list:
    """Independent replications with seeds base_seed + 0..reps-1, returned in
    seed order.  Replications share no state and may safely be distributed;
    this runner executes them sequentially."""
    if reps < 1:
        raise ValueError("need at least one replication")
    return [
        run_sa(instance, replace(config, seed=base_seed + i)) for i in range(reps)
    ]


@dataclass(frozen=True, eq=False)
class MseCurve:
    """Replication-averaged squared error with a two-sided 90% Student-t band."""

    ks: np.ndarray
    mean: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n_reps: int


def reduce_mse(results: Sequence[ReplicationResult]) -> MseCurve:
    """Mean squared error across replications plus 90% confidence band,
    mean +- t_{0.95, R-1} * s / sqrt(R) (degenerate band for R = 1)."""
    if not results:
        raise ValueError("no replication results")
    ks = results[0].ks
    for r in results:
        if r.sq_dist is None:
            raise ValueError("MSE reduction needs squared-distance traces")
        if len(r.ks) != len(ks) or np.any(r.ks != ks):
            raise ValueError("replications recorded different iteration grids")
    data = np.vstack([r.sq_dist for r in results])
    n = data.shape[0]
    mean = data.mean(axis=0)
    if n > 1:
        half = sps.t.ppf(0.95, n - 1) * data.std(axis=0, ddof=1) / np.sqrt(n)
    else:
        half = np.zeros_like(mean)
    return MseCurve(ks=ks, mean=mean, ci_low=mean - half, ci_high=mean + half, n_reps=n)
