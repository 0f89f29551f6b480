"""Per-player steplength policies and validators for the stepsize conditions
that drive almost-sure convergence of the distributed scheme.

All adaptive rules share the contraction form s_{k+1} = s_k (1 - a s_k),
which is strictly positive and strictly decreasing whenever 0 < a s_0 < 1:

* lower envelope   delta*_0 = (eta - beta L) e_0 / (2 (1+beta)^2 nu^2),
                   a = (eta - beta L) / 2
* upper envelope   Gamma*_0 = (eta - beta L) e_0 / (2 (1+beta) nu^2),
                   a = (eta - beta L) / (2 (1+beta))
* player rule      gamma_{0,i} = r_i c D^2 / ((1 + (eta-2c)/L)^2 nu^2),
                   a = c / r_i
"""

from __future__ import annotations

import copy
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit


@njit(cache=True)
def _recursion_sequence(s0, a, count):  # pragma: no cover
    out = np.empty(count)
    s = s0
    for k in range(count):
        out[k] = s
        s = s * (1.0 - a * s)
    return out


def recursion_sequence(s0: float, coefficient: float, count: int) -> np.ndarray:
    """First ``count`` terms of s_{k+1} = s_k (1 - coefficient * s_k)."""
    if count < 1:
        raise ValueError("count must be positive")
    return _recursion_sequence(float(s0), float(coefficient), int(count))


class _SequentialPolicy:
    """Shared bookkeeping: steps must be requested as k = 0, 1, 2, ..."""

    def __init__(self):
        self._k = 0
        self._current: float | None = None

    @property
    def current(self) -> float | None:
        """Last emitted stepsize, or None before the first call."""
        return self._current

    @property
    def last_index(self) -> int:
        """Iteration index of the last emitted step (-1 before the first)."""
        return self._k - 1

    def _check_order(self, k: int) -> None:
        if k != self._k:
            raise ValueError(
                f"out-of-order stepsize request: expected k={self._k}, got k={k}"
            )

    def fresh(self):
        """A copy reset to k = 0, leaving this policy's state untouched."""
        p = copy.copy(self)
        p._k = 0
        p._current = None
        return p


class HarmonicPolicy(_SequentialPolicy):
    """Harmonic baseline gamma_k = theta / (k+1) (1-indexed so k=0 is defined)."""

    def __init__(self, theta: float):
        super().__init__()
        if not (math.isfinite(theta) and theta > 0):
            raise ValueError("theta must be positive and finite")
        self.theta = float(theta)

    def next_step(self, k: int) -> float:
        self._check_order(k)
        self._current = self.theta / (k + 1)
        self._k += 1
        return self._current

    def sequence(self, count: int) -> np.ndarray:
        return self.theta / (np.arange(1, count + 1, dtype=np.float64))

    def __repr__(self):
        return f"HarmonicPolicy(theta={self.theta})"


class CentralizedAdaptivePolicy(_SequentialPolicy):
    """Adaptive envelope sequences delta*_k (mode 'lower') / Gamma*_k ('upper').

    Requires 0 <= beta < eta/L and 0 < e_0 < 2 nu^2 / L^2; when e_0 is not
    given it defaults to diameter^2.  Emitted steps are strictly positive and
    strictly decreasing.
    """

    def __init__(
        self,
        eta: float,
        lipschitz: float,
        nu: float,
        beta: float = 0.0,
        e0: float | None = None,
        diameter: float | None = None,
        mode: str = "lower",
    ):
        super().__init__()
        if not (0 < eta <= lipschitz):
            raise ValueError("need 0 < eta <= lipschitz")
        if nu <= 0:
            raise ValueError("adaptive policies need a positive noise bound nu")
        if not (0 <= beta < eta / lipschitz):
            raise ValueError("beta must satisfy 0 <= beta < eta/L")
        if e0 is None:
            if diameter is None:
                raise ValueError("provide e0 explicitly or a diameter for e0 = D^2")
            e0 = diameter * diameter
        if not (0 < e0 < 2 * nu * nu / (lipschitz * lipschitz)):
            raise ValueError("e0 must lie in (0, 2 nu^2 / L^2)")
        if mode not in ("lower", "upper"):
            raise ValueError("mode must be 'lower' or 'upper'")
        self.eta = float(eta)
        self.lipschitz = float(lipschitz)
        self.nu = float(nu)
        self.beta = float(beta)
        self.e0 = float(e0)
        self.mode = mode
        gap = self.eta - self.beta * self.lipschitz
        if mode == "lower":
            self._s0 = gap / (2 * (1 + self.beta) ** 2 * self.nu**2) * self.e0
            self._coeff = gap / 2.0
        else:
            self._s0 = gap / (2 * (1 + self.beta) * self.nu**2) * self.e0
            self._coeff = gap / (2.0 * (1 + self.beta))

    @property
    def coefficient(self) -> float:
        return self._coeff

    def next_step(self, k: int) -> float:
        self._check_order(k)
        if self._current is None:
            self._current = self._s0
        else:
            s = self._current
            self._current = s * (1.0 - self._coeff * s)
        self._k += 1
        return self._current

    def sequence(self, count: int) -> np.ndarray:
        return recursion_sequence(self._s0, self._coeff, count)

    def __repr__(self):
        return (
            f"CentralizedAdaptivePolicy(eta={self.eta}, L={self.lipschitz}, "
            f"nu={self.nu}, beta={self.beta}, e0={self.e0}, mode={self.mode!r})"
        )


class DasaPlayerPolicy(_SequentialPolicy):
    """One player's distributed adaptive rule.

    The player picks a private parameter r in [1, 1 + (eta-2c)/L]; the shared
    coordination constant c satisfies 0 < c < eta/2.  The error-minimizing
    start gamma_0 = r c D^2 / ((1+(eta-2c)/L)^2 nu^2) is only certified when
    D < sqrt(2) nu / L.  With ``strict=False`` a violated certificate is
    downgraded to a warning and, when the implied start would break the
    positivity of the recursion (c gamma_0 / r >= 1), gamma_0 is rescaled so
    that c gamma_0 / r = 1/2.  The rescaling keeps gamma_0 proportional to r,
    so the cross-player coordination identity gamma_{k,i}/r_i = gamma_{k,j}/r_j
    is preserved; only the error-optimality certificate lapses.
    """

    _SAFE_START = 0.5

    def __init__(
        self,
        c: float,
        r: float,
        eta: float,
        lipschitz: float,
        nu: float,
        diameter: float,
        strict: bool = True,
    ):
        super().__init__()
        if not (0 < eta <= lipschitz):
            raise ValueError("need 0 < eta <= lipschitz")
        if not (0 < c < eta / 2):
            raise ValueError("coordination constant must satisfy 0 < c < eta/2")
        r_hi = 1.0 + (eta - 2 * c) / lipschitz
        if not (1.0 - 1e-12 <= r <= r_hi * (1 + 1e-12)):
            raise ValueError(f"player parameter r must lie in [1, {r_hi}]")
        if nu <= 0:
            raise ValueError("DASA needs a positive noise bound nu")
        if not (math.isfinite(diameter) and diameter > 0):
            raise ValueError("DASA needs a finite positive diameter")
        self.c = float(c)
        self.r = float(min(max(r, 1.0), r_hi))
        self.eta = float(eta)
        self.lipschitz = float(lipschitz)
        self.nu = float(nu)
        self.diameter = float(diameter)
        self.strict = bool(strict)
        self.hypothesis_ok = diameter < math.sqrt(2.0) * nu / lipschitz
        self.start_rescaled = False

        gamma0 = self.r * self.c / (r_hi**2 * self.nu**2) * self.diameter**2
        if not self.hypothesis_ok:
            if strict:
                raise ValueError(
                    "diameter hypothesis D < sqrt(2) nu / L fails; pass strict=False "
                    "to run with the certificate lapsed"
                )
            warnings.warn(
                "DASA diameter hypothesis D < sqrt(2) nu / L fails; the stepsize "
                "sequence stays valid but its error-optimality certificate lapses",
                stacklevel=2,
            )
            if (self.c / self.r) * gamma0 >= 1.0:
                gamma0 = self._SAFE_START * self.r / self.c
                self.start_rescaled = True
        self._gamma0 = gamma0

    @property
    def beta(self) -> float:
        """Spread bound implied by the r-range: beta = (eta - 2c)/L."""
        return (self.eta - 2 * self.c) / self.lipschitz

    @property
    def gamma0(self) -> float:
        return self._gamma0

    def next_step(self, k: int) -> float:
        self._check_order(k)
        if self._current is None:
            self._current = self._gamma0
        else:
            g = self._current
            self._current = g * (1.0 - (self.c / self.r) * g)
        self._k += 1
        return self._current

    def sequence(self, count: int) -> np.ndarray:
        return recursion_sequence(self._gamma0, self.c / self.r, count)

    def __repr__(self):
        return (
            f"DasaPlayerPolicy(c={self.c}, r={self.r}, eta={self.eta}, "
            f"L={self.lipschitz}, nu={self.nu}, D={self.diameter})"
        )


def coordination_ratio(policies, k: int) -> list:
    """gamma_{k,i} / r_i for each player; equal across players by design.

    All policies must share (c, eta, L, nu, D) and have emitted step k last.
    """
    if not policies:
        raise ValueError("need at least one policy")
    head = policies[0]
    for p in policies[1:]:
        same = (
            p.c == head.c
            and p.eta == head.eta
            and p.lipschitz == head.lipschitz
            and p.nu == head.nu
            and p.diameter == head.diameter
        )
        if not same:
            raise ValueError("policies do not share the DASA constants")
    ratios = []
    for p in policies:
        if p.last_index != k:
            raise ValueError(
                f"policy advanced to k={p.last_index}, expected k={k}"
            )
        ratios.append(p.current / p.r)
    return ratios


@dataclass(frozen=True)
class Assumption2Report:
    """Numerical diagnostics for the stepsize conditions over a horizon K.

    ``envelopes_ok``: delta_k <= min_i gamma_{k,i} and Gamma_k >= max_i
    gamma_{k,i} for all k.  ``spread_ok``: (Gamma_k - delta_k)/delta_k <= beta.
    ``divergent_sum_ok``: every player's partial sum of gamma at K still grew
    by more than 1% over its value at K/2.  ``square_summable_ok``: every
    player's tail sum of gamma^2 over [K/2, K) is below 1% of its total.
    """

    horizon: int
    envelopes_ok: bool
    spread_ok: bool
    max_spread: float
    divergent_sum_ok: bool
    sum_growth: tuple
    square_summable_ok: bool
    tail_fractions: tuple

    @property
    def all_ok(self) -> bool:
        return (
            self.envelopes_ok
            and self.spread_ok
            and self.divergent_sum_ok
            and self.square_summable_ok
        )


def validate_assumption2(
    deltas,
    gammas_per_player,
    big_gammas,
    beta: float,
    horizon: int | None = None,
) -> Assumption2Report:
    """Check envelope, spread, and summability diagnostics for step sequences.

    ``deltas`` and ``big_gammas`` are the lower/upper envelope sequences,
    ``gammas_per_player`` the per-player sequences; all of equal length K (or
    truncated to ``horizon``).  Envelope and spread comparisons allow a 1e-12
    relative slack for rounding.
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    big_gammas = np.asarray(big_gammas, dtype=np.float64)
    gammas = [np.asarray(g, dtype=np.float64) for g in gammas_per_player]
    if deltas.size == 0 or big_gammas.size == 0 or not gammas or gammas[0].size == 0:
        raise ValueError("sequences must be nonempty")
    k_max = min([deltas.size, big_gammas.size] + [g.size for g in gammas])
    if horizon is not None:
        k_max = min(k_max, int(horizon))
    if k_max < 2:
        raise ValueError("need a horizon of at least 2")
    deltas = deltas[:k_max]
    big_gammas = big_gammas[:k_max]
    stack = np.vstack([g[:k_max] for g in gammas])

    slack = 1e-12
    g_min = stack.min(axis=0)
    g_max = stack.max(axis=0)
    envelopes_ok = bool(
        np.all(deltas <= g_min * (1 + slack)) and np.all(big_gammas >= g_max * (1 - slack))
    )
    spread = (big_gammas - deltas) / deltas
    max_spread = float(spread.max())
    spread_ok = bool(max_spread <= beta + slack)

    half = k_max // 2
    growth = []
    tails = []
    for g in stack:
        csum = np.cumsum(g)
        growth.append(float(csum[-1] / csum[half - 1]))
        sq = g * g
        total = float(sq.sum())
        tails.append(float(sq[half:].sum() / total))
    divergent_sum_ok = bool(all(r > 1.01 for r in growth))
    square_summable_ok = bool(all(t < 0.01 for t in tails))

    return Assumption2Report(
        horizon=k_max,
        envelopes_ok=envelopes_ok,
        spread_ok=spread_ok,
        max_spread=max_spread,
        divergent_sum_ok=divergent_sum_ok,
        sum_growth=tuple(growth),
        square_summable_ok=square_summable_ok,
        tail_fractions=tuple(tails),
    )
