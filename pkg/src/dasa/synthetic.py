"""Synthetic strongly monotone affine test instance with a known solution."""

from __future__ import annotations

import numpy as np

from dasa.vi import Box, GameInstance, MappingPair, ProblemConstants, ProductOfBoxes


def affine_instance(
    dimension: int = 10,
    eta: float = 1.0,
    lipschitz: float = 5.0,
    nu: float = 1.0,
    box_upper: float = 5.0,
    n_players: int = 5,
    target: np.ndarray | None = None,
) -> GameInstance:
    """F(x) = B (x - x*) with diagonal B spread over [eta, lipschitz].

    The root x* lies strictly inside the product box [0, box_upper]^n, so it
    is the exact VI solution.  The oracle adds i.i.d. uniform noise with
    stacked second moment exactly nu^2 at every point.  Fully deterministic
    construction; the default target spans [0.3, 0.8] * box_upper.
    """
    if dimension < 1 or n_players < 1 or n_players > dimension:
        raise ValueError("need 1 <= n_players <= dimension")
    if not (0 < eta <= lipschitz):
        raise ValueError("need 0 < eta <= lipschitz")
    if nu < 0 or box_upper <= 0:
        raise ValueError("nu must be nonnegative and box_upper positive")

    diag = np.linspace(eta, lipschitz, dimension)
    if target is None:
        target = box_upper * np.linspace(0.3, 0.8, dimension)
    else:
        target = np.asarray(target, dtype=np.float64)
        if target.shape != (dimension,):
            raise ValueError("target has the wrong dimension")
        if np.any(target <= 0) or np.any(target >= box_upper):
            raise ValueError("target must lie strictly inside the box")

    half_width = nu * np.sqrt(3.0 / dimension)

    def mapping_f(x: np.ndarray) -> np.ndarray:
        return diag * (x - target)

    def mapping_sampler(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        noise = rng.uniform(-half_width, half_width, size=dimension)
        return diag * (x - target) + noise

    sizes = [len(b) for b in np.array_split(np.arange(dimension), n_players)]
    boxes = tuple(Box(np.zeros(s), np.full(s, box_upper)) for s in sizes)
    return GameInstance(
        mapping=MappingPair(f=mapping_f, sampler=mapping_sampler, dimension=dimension),
        feasible_set=ProductOfBoxes(boxes),
        constants=ProblemConstants(
            eta=eta,
            lipschitz=lipschitz,
            nu=nu,
            diameter=float(box_upper * np.sqrt(dimension)),
        ),
        block_sizes=tuple(sizes),
        reference_solution=target,
        name="synthetic-affine",
    )
