"""Domain types for variational inequalities VI(X, F): decision vectors,
feasible sets with Euclidean projections, noisy mapping oracles, and
solution-quality residuals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from numba import njit


class ProjectionError(RuntimeError):
    """Projection onto a polyhedron did not converge within the cycle cap."""


class EstimationError(RuntimeError):
    """Empirical problem constants could not be estimated."""


def _as_vector(values, name: str = "point") -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def _require_finite(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")


# ---------------------------------------------------------------------------
# decision vectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DecisionVector:
    """Stacked strategy profile x = (x_1; ...; x_N) with per-player blocks."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(_as_vector(b, "block") for b in self.blocks)
        if len(blocks) < 1:
            raise ValueError("a decision vector needs at least one player block")
        for b in blocks:
            _require_finite(b, "decision block")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_stacked(cls, values, block_sizes: Sequence[int]) -> "DecisionVector":
        vec = _as_vector(values)
        sizes = [int(s) for s in block_sizes]
        if any(s < 1 for s in sizes):
            raise ValueError("block sizes must be positive")
        if sum(sizes) != vec.size:
            raise ValueError(
                f"block sizes sum to {sum(sizes)} but vector has dimension {vec.size}"
            )
        offsets = np.cumsum([0] + sizes)
        return cls(tuple(vec[offsets[i]:offsets[i + 1]] for i in range(len(sizes))))

    @property
    def n_players(self) -> int:
        return len(self.blocks)

    @property
    def block_sizes(self) -> tuple:
        return tuple(b.size for b in self.blocks)

    @property
    def dimension(self) -> int:
        return sum(b.size for b in self.blocks)

    def stacked(self) -> np.ndarray:
        return np.concatenate(self.blocks)


# ---------------------------------------------------------------------------
# feasible sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box {x : lower <= x <= upper}."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _as_vector(self.lower, "lower")
        hi = _as_vector(self.upper, "upper")
        _require_finite(lo, "lower")
        _require_finite(hi, "upper")
        if lo.shape != hi.shape:
            raise ValueError("lower and upper bounds must have equal shape")
        if np.any(lo > hi):
            raise ValueError("box requires lower <= upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dimension(self) -> int:
        return self.lower.size

    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))


@dataclass(frozen=True, eq=False)
class ProductOfBoxes:
    """Per-player boxes X = X_1 x ... x X_N; projection splits blockwise."""

    boxes: tuple

    def __post_init__(self):
        boxes = tuple(self.boxes)
        if len(boxes) < 1:
            raise ValueError("need at least one per-player box")
        if not all(isinstance(b, Box) for b in boxes):
            raise TypeError("ProductOfBoxes expects Box components")
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "_lower", np.concatenate([b.lower for b in boxes]))
        object.__setattr__(self, "_upper", np.concatenate([b.upper for b in boxes]))

    @property
    def block_sizes(self) -> tuple:
        return tuple(b.dimension for b in self.boxes)

    @property
    def dimension(self) -> int:
        return int(self._lower.size)

    def stacked_bounds(self) -> tuple:
        return self._lower, self._upper

    def diameter(self) -> float:
        return float(np.linalg.norm(self._upper - self._lower))


@dataclass(frozen=True, eq=False)
class Polyhedron:
    """Capacity-style polyhedron {x : A x <= b, x >= 0}.

    The origin must be feasible (b >= 0), which makes the set nonempty by
    construction.  Rows of A may be real; the box-hull helper additionally
    assumes A >= 0 entrywise (link-route incidence matrices qualify).
    """

    a_matrix: np.ndarray
    b_vector: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(self.a_matrix, dtype=np.float64)
        b = _as_vector(self.b_vector, "capacity vector")
        if a.ndim != 2:
            raise ValueError("constraint matrix must be two-dimensional")
        _require_finite(a.ravel(), "constraint matrix")
        _require_finite(b, "capacity vector")
        if a.shape[0] != b.size:
            raise ValueError("A and b row counts differ")
        if np.any(b < 0):
            raise ValueError("empty polyhedron: b >= 0 required so that 0 is feasible")
        object.__setattr__(self, "a_matrix", a)
        object.__setattr__(self, "b_vector", b)
        object.__setattr__(self, "_row_norms_sq", np.einsum("ij,ij->i", a, a))

    @property
    def dimension(self) -> int:
        return self.a_matrix.shape[1]

    @property
    def n_constraints(self) -> int:
        return self.a_matrix.shape[0]

    def box_hull_upper(self) -> np.ndarray:
        """Componentwise upper bounds implied by the rows, valid for A >= 0.

        u_j = min over rows i with A_ij > 0 of b_i / A_ij.  Raises when some
        coordinate is unbounded (no positive row entry) or A has negative
        entries, since the simple formula is then invalid.
        """
        a, b = self.a_matrix, self.b_vector
        if np.any(a < 0):
            raise EstimationError("box hull needs a nonnegative constraint matrix")
        upper = np.full(self.dimension, np.inf)
        for j in range(self.dimension):
            rows = a[:, j] > 0
            if rows.any():
                upper[j] = np.min(b[rows] / a[rows, j])
        if not np.all(np.isfinite(upper)):
            raise EstimationError("polyhedron is unbounded: diameter undefined")
        return upper

    def diameter_upper_bound(self) -> float:
        """Euclidean diameter of the bounding box [0, u]."""
        return float(np.linalg.norm(self.box_hull_upper()))


FeasibleSet = Union[Box, ProductOfBoxes, Polyhedron]


@njit(cache=True)
def _dykstra_kernel(point, a, b, row_norms_sq, tol, max_cycles):  # pragma: no cover
    m, n = a.shape
    x = point.copy()
    q = np.zeros((m + 1, n))
    prev_diff = np.inf
    for cycle in range(1, max_cycles + 1):
        diff_sq = 0.0
        x_start = x.copy()
        for i in range(m):
            if row_norms_sq[i] == 0.0:
                continue
            viol = -b[i]
            for j in range(n):
                viol += a[i, j] * (x[j] + q[i, j])
            if viol > 0.0:
                t = viol / row_norms_sq[i]
                for j in range(n):
                    y_j = x[j] + q[i, j]
                    new_q = t * a[i, j]
                    d = new_q - q[i, j]
                    diff_sq += d * d
                    q[i, j] = new_q
                    x[j] = y_j - new_q
            else:
                for j in range(n):
                    y_j = x[j] + q[i, j]
                    d = q[i, j]
                    diff_sq += d * d
                    q[i, j] = 0.0
                    x[j] = y_j
        for j in range(n):
            y_j = x[j] + q[m, j]
            p_j = y_j if y_j > 0.0 else 0.0
            new_q = y_j - p_j
            d = new_q - q[m, j]
            diff_sq += d * d
            q[m, j] = new_q
            x[j] = p_j
        for j in range(n):
            d = x[j] - x_start[j]
            diff_sq += d * d
        diff = np.sqrt(diff_sq)
        if diff <= tol:
            # The primal iterate can dwell while increments still move, and a
            # slow linear rate can stall below tol far from the limit; require
            # the geometric-tail estimate of the remaining error to pass too.
            rho = diff / prev_diff if prev_diff > 0.0 else 0.0
            if diff == 0.0 or (rho < 1.0 and diff * rho / (1.0 - rho) <= tol):
                return x, cycle, True
        prev_diff = diff
    return x, max_cycles, False


def project(
    feasible_set: FeasibleSet,
    point,
    tol: float = 1e-10,
    max_cycles: int = 1_000_000,
) -> np.ndarray:
    """Euclidean projection of ``point`` onto the feasible set.

    Boxes project by componentwise clamping.  Polyhedra run Dykstra's
    alternating projections over the capacity halfspaces and the nonnegative
    orthant until the cycle-to-cycle change of the full iterate/increment
    state is below ``tol``.
    """
    p = _as_vector(point)
    _require_finite(p, "point")
    if isinstance(feasible_set, Box):
        if p.size != feasible_set.dimension:
            raise ValueError("point dimension does not match the set")
        return np.clip(p, feasible_set.lower, feasible_set.upper)
    if isinstance(feasible_set, ProductOfBoxes):
        if p.size != feasible_set.dimension:
            raise ValueError("point dimension does not match the set")
        lower, upper = feasible_set.stacked_bounds()
        return np.clip(p, lower, upper)
    if isinstance(feasible_set, Polyhedron):
        if p.size != feasible_set.dimension:
            raise ValueError("point dimension does not match the set")
        a, b = feasible_set.a_matrix, feasible_set.b_vector
        # Points within the convergence tolerance of the set count as fixed
        # points; Dykstra outputs are feasible only to ~tol, and without the
        # slack the operator would not be numerically idempotent.
        if np.all(a @ p <= b + tol) and np.all(p >= -tol):
            return p.copy()
        result, cycles, ok = _dykstra_kernel(
            p, a, b, feasible_set._row_norms_sq, float(tol), int(max_cycles)
        )
        if not ok:
            raise ProjectionError(
                f"Dykstra projection did not converge within {max_cycles} cycles"
            )
        return result
    raise TypeError(f"unsupported feasible set type: {type(feasible_set)!r}")


def contains(feasible_set: FeasibleSet, point, tol: float = 1e-8) -> bool:
    """Set membership up to an absolute constraint-violation tolerance."""
    p = _as_vector(point)
    if isinstance(feasible_set, Box):
        return bool(
            np.all(p >= feasible_set.lower - tol) and np.all(p <= feasible_set.upper + tol)
        )
    if isinstance(feasible_set, ProductOfBoxes):
        lower, upper = feasible_set.stacked_bounds()
        return bool(np.all(p >= lower - tol) and np.all(p <= upper + tol))
    if isinstance(feasible_set, Polyhedron):
        return bool(
            np.all(feasible_set.a_matrix @ p <= feasible_set.b_vector + tol)
            and np.all(p >= -tol)
        )
    raise TypeError(f"unsupported feasible set type: {type(feasible_set)!r}")


# ---------------------------------------------------------------------------
# mappings and problem constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MappingPair:
    """Deterministic mapping F and its unbiased noisy oracle.

    ``f`` evaluates F on a stacked n-vector.  ``sampler`` draws one noisy
    evaluation F_hat(x, xi) using the supplied random generator; its
    conditional mean must equal F(x) at every feasible x.
    """

    f: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[np.ndarray, np.random.Generator], np.ndarray]
    dimension: int

    def __post_init__(self):
        if int(self.dimension) < 1:
            raise ValueError("mapping dimension must be positive")
        object.__setattr__(self, "dimension", int(self.dimension))


def _stacked_input(mapping: MappingPair, x) -> np.ndarray:
    vec = x.stacked() if isinstance(x, DecisionVector) else _as_vector(x)
    if vec.size != mapping.dimension:
        raise ValueError(
            f"mapping expects dimension {mapping.dimension}, got {vec.size}"
        )
    return vec


def evaluate_mapping(mapping: MappingPair, x) -> np.ndarray:
    """Deterministic evaluation F(x); same input gives bit-identical output."""
    return np.asarray(mapping.f(_stacked_input(mapping, x)), dtype=np.float64)


def sample_noisy_mapping(mapping: MappingPair, x, rng: np.random.Generator) -> np.ndarray:
    """One draw of the noisy oracle F_hat(x, xi); advances ``rng``."""
    return np.asarray(mapping.sampler(_stacked_input(mapping, x), rng), dtype=np.float64)


def natural_residual(feasible_set: FeasibleSet, mapping: MappingPair, x, gamma: float) -> float:
    """||x - Pi_X(x - gamma F(x))||; zero exactly at solutions of VI(X, F)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    vec = _stacked_input(mapping, x)
    fx = evaluate_mapping(mapping, vec)
    return float(np.linalg.norm(vec - project(feasible_set, vec - gamma * fx)))


@dataclass(frozen=True)
class ProblemConstants:
    """Strong-monotonicity modulus, Lipschitz constant, noise bound, diameter.

    eta and lipschitz are strictly positive with eta <= lipschitz; nu bounds
    the conditional second moment of the oracle noise (nu = 0 for exact
    oracles); diameter is finite only for bounded sets and may be omitted.
    """

    eta: float
    lipschitz: float
    nu: float
    diameter: Optional[float] = None

    def __post_init__(self):
        for name in ("eta", "lipschitz", "nu"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.eta <= 0:
            raise ValueError("eta must be strictly positive")
        if self.lipschitz <= 0:
            raise ValueError("lipschitz must be strictly positive")
        # a strongly monotone Lipschitz mapping always has eta <= L; the tiny
        # slack absorbs rounding in empirical estimates
        if self.eta > self.lipschitz * (1 + 1e-9):
            raise ValueError("eta cannot exceed the Lipschitz constant")
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")
        if self.diameter is not None:
            d = float(self.diameter)
            if not (math.isfinite(d) and d > 0):
                raise ValueError("diameter must be positive and finite when set")
            object.__setattr__(self, "diameter", d)


@dataclass(frozen=True, eq=False)
class GameInstance:
    """A VI problem bundle: mapping pair, feasible set, constants, blocks."""

    mapping: MappingPair
    feasible_set: FeasibleSet
    constants: ProblemConstants
    block_sizes: tuple
    reference_solution: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.block_sizes)
        if any(s < 1 for s in sizes):
            raise ValueError("block sizes must be positive")
        if sum(sizes) != self.mapping.dimension:
            raise ValueError("block sizes do not sum to the mapping dimension")
        object.__setattr__(self, "block_sizes", sizes)
        if self.reference_solution is not None:
            ref = _as_vector(self.reference_solution, "reference solution")
            if ref.size != self.mapping.dimension:
                raise ValueError("reference solution has the wrong dimension")
            object.__setattr__(self, "reference_solution", ref)

    @property
    def dimension(self) -> int:
        return self.mapping.dimension

    @property
    def n_players(self) -> int:
        return len(self.block_sizes)


# ---------------------------------------------------------------------------
# empirical constant estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantEstimates:
    """Raw sampled estimates, unvalidated (eta_min may be <= 0 for maps that
    fail strong monotonicity on some sampled pair)."""

    eta: float
    lipschitz: float
    nu: float
    diameter: float


def sample_feasible_points(
    feasible_set: FeasibleSet, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``count`` feasible points (uniform box samples, projected for
    polyhedra).  Requires a bounded set."""
    if isinstance(feasible_set, Box):
        lower, upper = feasible_set.lower, feasible_set.upper
        return rng.uniform(lower, upper, size=(count, lower.size))
    if isinstance(feasible_set, ProductOfBoxes):
        lower, upper = feasible_set.stacked_bounds()
        return rng.uniform(lower, upper, size=(count, lower.size))
    if isinstance(feasible_set, Polyhedron):
        upper = feasible_set.box_hull_upper()
        raw = rng.uniform(0.0, upper, size=(count, upper.size))
        return np.vstack([project(feasible_set, row) for row in raw])
    raise TypeError(f"unsupported feasible set type: {type(feasible_set)!r}")


def raw_constant_estimates(
    mapping: MappingPair,
    feasible_set: FeasibleSet,
    samples: int,
    rng: np.random.Generator,
    noise_draws: int = 128,
) -> ConstantEstimates:
    """Pairwise sampled estimates of (eta, L, nu, D) without validation.

    L_hat is a lower bound on L and D_hat a lower bound on D; eta_hat is an
    upper bound on eta; all up to sampling error.  nu_hat is the largest
    empirical root-mean-square noise norm over the sampled points.
    """
    if samples < 2:
        raise ValueError("need at least two sample points")
    pts = sample_feasible_points(feasible_set, samples, rng)
    values = np.vstack([evaluate_mapping(mapping, p) for p in pts])

    eta_min = np.inf
    lip_max = 0.0
    diam_max = 0.0
    for i in range(samples):
        dx = pts[i + 1 :] - pts[i]
        df = values[i + 1 :] - values[i]
        nx2 = np.einsum("ij,ij->i", dx, dx)
        keep = nx2 > 0
        if not keep.any():
            continue
        dx, df, nx2 = dx[keep], df[keep], nx2[keep]
        inner = np.einsum("ij,ij->i", dx, df)
        nf = np.sqrt(np.einsum("ij,ij->i", df, df))
        eta_min = min(eta_min, float(np.min(inner / nx2)))
        lip_max = max(lip_max, float(np.max(nf / np.sqrt(nx2))))
        diam_max = max(diam_max, float(np.sqrt(np.max(nx2))))
    if not math.isfinite(eta_min):
        raise EstimationError("all sampled point pairs coincide")

    nu2_max = 0.0
    for i in range(samples):
        draws = np.vstack(
            [sample_noisy_mapping(mapping, pts[i], rng) for _ in range(noise_draws)]
        )
        w = draws - values[i]
        nu2_max = max(nu2_max, float(np.mean(np.einsum("ij,ij->i", w, w))))

    return ConstantEstimates(eta_min, lip_max, math.sqrt(nu2_max), diam_max)


def estimate_constants(
    mapping: MappingPair,
    feasible_set: FeasibleSet,
    samples: int,
    rng: np.random.Generator,
    noise_draws: int = 128,
) -> ProblemConstants:
    """Sampled ProblemConstants for a bounded set; see raw_constant_estimates.

    Raises EstimationError when the sampled pairs contradict strong
    monotonicity (eta_hat <= 0); use raw_constant_estimates to inspect such
    instances without validation.
    """
    raw = raw_constant_estimates(mapping, feasible_set, samples, rng, noise_draws)
    if raw.eta <= 0:
        raise EstimationError(
            f"mapping is not strongly monotone on the sampled pairs (eta_hat={raw.eta:.3e})"
        )
    return ProblemConstants(
        eta=raw.eta,
        lipschitz=max(raw.lipschitz, raw.eta),
        nu=raw.nu,
        diameter=raw.diameter if raw.diameter > 0 else None,
    )
