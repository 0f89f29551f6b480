"""Stochastic bandwidth-sharing game: network topology and routing model,
utility/congestion mapping with a uniform noise model, the twelve benchmark
parameter settings, and deterministic reference solvers for the equilibrium.

Each user i routes flow x_i(r) over its route set and pays
-sum_r xi_i(r) log(1 + x_i(r)) plus a shared congestion cost m_c ||A x||^2,
subject to link capacities A x <= m_b b and x >= 0.  The equilibrium mapping
is F(x) = -(xi_bar_i(r) / (1 + x_i(r)))_{i,r} + 2 m_c A^T A x, which is also
the gradient of the summed expected cost, so deterministic gradient-type
solvers apply for reference solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import numpy as np

from dasa import vi
from dasa.vi import GameInstance, MappingPair, Polyhedron, ProblemConstants


class ReferenceSolveError(RuntimeError):
    """Deterministic reference solve hit its iteration cap."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SettingParams:
    """Multipliers of one benchmark setting: capacities (m_b), congestion
    cost (m_c), noise mean (m_xi), and noise width (d_xi)."""

    setting_id: int
    m_b: float
    m_c: float
    m_xi: float
    d_xi: float

    def __post_init__(self):
        for name in ("m_b", "m_c", "m_xi", "d_xi"):
            if not (math.isfinite(getattr(self, name)) and getattr(self, name) > 0):
                raise ValueError(f"{name} must be positive and finite")


_SETTINGS = (
    (1, 1.0, 1.0, 5.0, 2.0),
    (2, 0.1, 1.0, 5.0, 2.0),
    (3, 0.01, 1.0, 5.0, 2.0),
    (4, 0.1, 2.0, 2.0, 1.0),
    (5, 0.1, 1.0, 2.0, 1.0),
    (6, 0.1, 0.5, 2.0, 1.0),
    (7, 1.0, 1.0, 1.0, 5.0),
    (8, 1.0, 1.0, 2.0, 5.0),
    (9, 1.0, 1.0, 5.0, 5.0),
    (10, 1.0, 0.01, 1.0, 1.0),
    (11, 1.0, 0.01, 1.0, 2.0),
    (12, 1.0, 0.01, 1.0, 5.0),
)


def settings_table() -> tuple:
    """The twelve benchmark settings S(1)..S(12)."""
    return tuple(SettingParams(*row) for row in _SETTINGS)


def setting(setting_id: int) -> SettingParams:
    for row in _SETTINGS:
        if row[0] == setting_id:
            return SettingParams(*row)
    raise ValueError(f"unknown setting id {setting_id}; valid ids are 1..12")


@dataclass(frozen=True, eq=False)
class NetworkTopology:
    """Link-route incidence model of the shared network.

    ``routing_matrix`` is the 0/1 matrix with A[l, r] = 1 iff route r
    traverses link l; ``capacities`` the base per-link capacities;
    ``route_sets`` the per-user tuples of global route indices (0-based,
    contiguous, covering all routes).  ``xi_means``/``xi_halfwidths`` are the
    per-route base mean and half-width of the uniform demand weight
    (defaults 1.0 and 0.5).
    """

    routing_matrix: np.ndarray
    capacities: np.ndarray
    route_sets: tuple
    xi_means: Optional[np.ndarray] = None
    xi_halfwidths: Optional[np.ndarray] = None

    def __post_init__(self):
        a = np.ascontiguousarray(self.routing_matrix, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("routing matrix must be two-dimensional")
        if not np.all(np.isin(a, (0.0, 1.0))):
            raise ValueError("routing matrix entries must be 0 or 1")
        if np.any(a.sum(axis=0) < 1):
            raise ValueError("every route must traverse at least one link")
        b = np.ascontiguousarray(self.capacities, dtype=np.float64)
        if b.shape != (a.shape[0],) or np.any(b < 0) or not np.all(np.isfinite(b)):
            raise ValueError("capacities must be one nonnegative value per link")

        sets = tuple(tuple(int(r) for r in rs) for rs in self.route_sets)
        flat = [r for rs in sets for r in rs]
        if sorted(flat) != list(range(a.shape[1])):
            raise ValueError("route sets must disjointly cover all routes")
        if flat != list(range(a.shape[1])):
            raise ValueError(
                "route sets must be contiguous per user in global route order"
            )
        if any(len(rs) == 0 for rs in sets):
            raise ValueError("every user needs at least one route")

        n_routes = a.shape[1]
        means = self.xi_means
        means = np.full(n_routes, 1.0) if means is None else np.ascontiguousarray(means, dtype=np.float64)
        widths = self.xi_halfwidths
        widths = np.full(n_routes, 0.5) if widths is None else np.ascontiguousarray(widths, dtype=np.float64)
        if means.shape != (n_routes,) or np.any(means < 0):
            raise ValueError("xi_means must be one nonnegative value per route")
        if widths.shape != (n_routes,) or np.any(widths < 0):
            raise ValueError("xi_halfwidths must be one nonnegative value per route")

        object.__setattr__(self, "routing_matrix", a)
        object.__setattr__(self, "capacities", b)
        object.__setattr__(self, "route_sets", sets)
        object.__setattr__(self, "xi_means", means)
        object.__setattr__(self, "xi_halfwidths", widths)

    @property
    def n_links(self) -> int:
        return self.routing_matrix.shape[0]

    @property
    def n_routes(self) -> int:
        return self.routing_matrix.shape[1]

    @property
    def n_users(self) -> int:
        return len(self.route_sets)

    @property
    def block_sizes(self) -> tuple:
        return tuple(len(rs) for rs in self.route_sets)


def load_topology(path: Union[str, Path]) -> NetworkTopology:
    """Read a topology table: header row, then one row per link with fields
    link-id, capacity, and a comma-separated list of 1-based route ids.
    User assignments come from comment lines of the form ``# user 3: 6,7``.
    """
    text = Path(path).read_text()
    return parse_topology(text)


def parse_topology(text: str) -> NetworkTopology:
    user_routes: dict = {}
    xi_mean = None
    xi_halfwidth = None
    rows = []
    header_seen = False
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if body.lower().startswith("user"):
                head, _, tail = body.partition(":")
                user_id = int(head.split()[1])
                user_routes[user_id] = [int(t) - 1 for t in tail.split(",") if t.strip()]
            elif body.lower().startswith("xi_mean"):
                xi_mean = [float(t) for t in body.partition(":")[2].split()]
            elif body.lower().startswith("xi_halfwidth"):
                xi_halfwidth = [float(t) for t in body.partition(":")[2].split()]
            continue
        if not header_seen:
            header_seen = True  # column-name row
            continue
        fields = line.split()
        if len(fields) != 3:
            raise ValueError(f"malformed topology row: {raw!r}")
        rows.append((int(fields[0]), float(fields[1]), [int(t) - 1 for t in fields[2].split(",") if t.strip()]))
    if not rows:
        raise ValueError("topology file has no link rows")
    if not user_routes:
        raise ValueError("topology file declares no '# user i: ...' route sets")

    n_links = len(rows)
    n_routes = 1 + max(max(rs, default=-1) for _, _, rs in rows)
    a = np.zeros((n_links, n_routes))
    b = np.zeros(n_links)
    for link_id, cap, routes in rows:
        idx = link_id - 1
        if not (0 <= idx < n_links):
            raise ValueError(f"link id {link_id} out of range")
        b[idx] = cap
        for r in routes:
            a[idx, r] = 1.0
    sets = tuple(tuple(user_routes[u]) for u in sorted(user_routes))

    def _per_route(values):
        # a single value broadcasts; otherwise one value per route
        if values is None:
            return None
        if len(values) == 1:
            return np.full(n_routes, values[0])
        return np.asarray(values, dtype=np.float64)

    return NetworkTopology(
        routing_matrix=a,
        capacities=b,
        route_sets=sets,
        xi_means=_per_route(xi_mean),
        xi_halfwidths=_per_route(xi_halfwidth),
    )


def default_topology() -> NetworkTopology:
    """The shipped 20-link / 9-route / 5-user instance."""
    text = resources.files("dasa.data").joinpath("default_topology.txt").read_text()
    return parse_topology(text)


def sample_xi(
    topology: NetworkTopology, params: SettingParams, rng: np.random.Generator
) -> np.ndarray:
    """One draw of the route demand weights, xi(r) ~ Uniform centered at
    m_xi * mean_r with half-width d_xi * halfwidth_r.  Draws may be negative
    for wide settings; only the mean enters the deterministic mapping."""
    center = params.m_xi * topology.xi_means
    half = params.d_xi * topology.xi_halfwidths
    return rng.uniform(center - half, center + half)


def analytic_constants(topology: NetworkTopology, params: SettingParams) -> ProblemConstants:
    """Closed-form problem constants for one setting.

    With u the per-route capacity box hull, eigenvalue bounds of the
    symmetric Jacobian diag(xi_bar_r/(1+x_r)^2) + 2 m_c A^T A give
    eta = min_r xi_bar_r/(1+u_r)^2 + 2 m_c lambda_min(A^T A) and
    L = max_r xi_bar_r + 2 m_c lambda_max(A^T A).  The noise bound is the
    stacked uniform variance at x = 0, nu^2 = sum_r (d_xi w_r)^2 / 3, and
    D = ||u|| bounds the feasible-set diameter.
    """
    a = topology.routing_matrix
    xi_bar = params.m_xi * topology.xi_means
    gram_eigs = np.linalg.eigvalsh(a.T @ a)
    lam_min = max(float(gram_eigs[0]), 0.0)
    lam_max = float(gram_eigs[-1])
    poly = Polyhedron(a, params.m_b * topology.capacities)
    u = poly.box_hull_upper()
    eta = float(np.min(xi_bar / (1.0 + u) ** 2)) + 2 * params.m_c * lam_min
    lip = float(np.max(xi_bar)) + 2 * params.m_c * lam_max
    half = params.d_xi * topology.xi_halfwidths
    nu = math.sqrt(float(np.sum(half * half)) / 3.0)
    return ProblemConstants(eta=eta, lipschitz=lip, nu=nu, diameter=float(np.linalg.norm(u)))


def build_instance(topology: NetworkTopology, params: SettingParams) -> GameInstance:
    """Assemble the GameInstance for one setting: mapping, noisy oracle,
    capacity polyhedron, and analytic constants."""
    a = topology.routing_matrix
    xi_bar = params.m_xi * topology.xi_means
    half = params.d_xi * topology.xi_halfwidths
    lo = xi_bar - half
    hi = xi_bar + half
    gram2 = 2.0 * params.m_c * (a.T @ a)

    def mapping_f(x: np.ndarray) -> np.ndarray:
        return -xi_bar / (1.0 + x) + gram2 @ x

    def mapping_sampler(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        xi = rng.uniform(lo, hi)
        return -xi / (1.0 + x) + gram2 @ x

    mapping = MappingPair(f=mapping_f, sampler=mapping_sampler, dimension=topology.n_routes)
    feasible = Polyhedron(a, params.m_b * topology.capacities)
    constants = analytic_constants(topology, params)
    return GameInstance(
        mapping=mapping,
        feasible_set=feasible,
        constants=constants,
        block_sizes=topology.block_sizes,
        name=f"bandwidth-S{params.setting_id}",
    )


def solve_reference(
    instance: GameInstance,
    tol: float = 1e-8,
    max_iterations: int = 1_000_000,
) -> np.ndarray:
    """Deterministic equilibrium via the extragradient method.

    Two projections per iteration with stepsize 1/(2L), run until the
    natural residual at gamma = 1/L drops below ``tol``; independent of the
    stochastic engine.  Raises ReferenceSolveError with the final residual
    when the iteration cap is hit.
    """
    fset = instance.feasible_set
    f = instance.mapping.f
    lip = instance.constants.lipschitz
    gamma = 1.0 / (2.0 * lip)
    gamma_res = 1.0 / lip
    x = vi.project(fset, np.zeros(instance.dimension))
    residual = math.inf
    for _ in range(max_iterations):
        fx = f(x)
        residual = float(np.linalg.norm(x - vi.project(fset, x - gamma_res * fx)))
        if residual <= tol:
            return x
        x_half = vi.project(fset, x - gamma * fx)
        x = vi.project(fset, x - gamma * f(x_half))
    raise ReferenceSolveError(
        f"extragradient did not reach residual {tol} within {max_iterations} "
        f"iterations (final residual {residual:.3e})",
        residual,
    )


def solve_reference_projected_gradient(
    instance: GameInstance,
    tol: float = 1e-8,
    gamma: Optional[float] = None,
    max_iterations: int = 1_000_000,
) -> np.ndarray:
    """Independent cross-check oracle: fixed-step projected gradient.

    The default stepsize eta/L^2 is safe for any strongly monotone Lipschitz
    mapping; gradient mappings with symmetric Jacobians (this game) converge
    much faster with gamma = 1/L.
    """
    fset = instance.feasible_set
    f = instance.mapping.f
    consts = instance.constants
    if gamma is None:
        gamma = consts.eta / consts.lipschitz**2
    gamma_res = 1.0 / consts.lipschitz
    x = vi.project(fset, np.zeros(instance.dimension))
    residual = math.inf
    for _ in range(max_iterations):
        fx = f(x)
        residual = float(np.linalg.norm(x - vi.project(fset, x - gamma_res * fx)))
        if residual <= tol:
            return x
        x = vi.project(fset, x - gamma * fx)
    raise ReferenceSolveError(
        f"projected gradient did not reach residual {tol} within "
        f"{max_iterations} iterations (final residual {residual:.3e})",
        residual,
    )
