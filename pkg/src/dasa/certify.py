"""Numerical certification of the stepsize-calculus identities: the
two-recursion coupling, the upper/lower envelope relation, the closed-form
error trace, the minimizer gap bound, cross-player coordination, and the
summability diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dasa.error_model import ErrorRecursion, evaluate_error, minimizer_gap, optimal_steps
from dasa.stepsize import (
    CentralizedAdaptivePolicy,
    DasaPlayerPolicy,
    HarmonicPolicy,
    recursion_sequence,
    validate_assumption2,
)


@dataclass(frozen=True)
class Certification:
    name: str
    passed: bool
    worst: float
    tolerance: float
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: worst {self.worst:.3e} vs tol {self.tolerance:.0e} ({self.detail})"


def two_recursion_coupling(
    draws: int = 100, k_max: int = 10_000, seed: int = 20240501
) -> Certification:
    """lambda_k = c gamma_k for the coupled recursions lambda(1-lambda) and
    gamma(1-c gamma), lambda_0 = c gamma_0: worst |lambda_k - c gamma_k| /
    lambda_0 over random (c, gamma_0) pairs with 0 < gamma_0 < 1/c."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_rel = 0.0
    for _ in range(draws):
        c = rng.uniform(0.05, 20.0)
        gamma0 = rng.uniform(0.01, 0.99) / c
        lam = recursion_sequence(c * gamma0, 1.0, k_max + 1)
        gam = recursion_sequence(gamma0, c, k_max + 1)
        dev = np.abs(lam - c * gam)
        worst = max(worst, float(dev.max() / lam[0]))
        worst_rel = max(worst_rel, float((dev / lam).max()))
    tol = 1e-12
    return Certification(
        name="two-recursion coupling",
        passed=worst <= tol and worst_rel <= tol,
        worst=max(worst, worst_rel),
        tolerance=tol,
        detail=f"{draws} random (c, gamma_0) pairs, k <= {k_max}",
    )


def _random_envelope_tuple(rng):
    lip = rng.uniform(0.5, 5.0)
    eta = lip * rng.uniform(0.05, 1.0)
    beta = rng.uniform(0.0, 0.95) * eta / lip
    nu = rng.uniform(0.2, 3.0)
    e0 = rng.uniform(0.05, 0.95) * 2 * nu**2 / lip**2
    return eta, lip, beta, nu, e0


def envelope_coupling(
    draws: int = 50, k_max: int = 10_000, seed: int = 20240502
) -> Certification:
    """Gamma*_k = (1+beta) delta*_k for the upper/lower adaptive envelopes:
    worst |Gamma*_k - (1+beta) delta*_k| / Gamma*_0 over random constants."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_rel = 0.0
    for _ in range(draws):
        eta, lip, beta, nu, e0 = _random_envelope_tuple(rng)
        lower = CentralizedAdaptivePolicy(eta, lip, nu, beta, e0, mode="lower")
        upper = CentralizedAdaptivePolicy(eta, lip, nu, beta, e0, mode="upper")
        ds = lower.sequence(k_max + 1)
        gs = upper.sequence(k_max + 1)
        dev = np.abs(gs - (1 + beta) * ds)
        worst = max(worst, float(dev.max() / gs[0]))
        worst_rel = max(worst_rel, float((dev / gs).max()))
    tol = 1e-12
    return Certification(
        name="upper/lower envelope coupling",
        passed=worst <= tol and worst_rel <= tol,
        worst=max(worst, worst_rel),
        tolerance=tol,
        detail=f"{draws} random (eta, L, beta, nu, e0) tuples, k <= {k_max}",
    )


def closed_form_error(
    draws: int = 20, k_max: int = 10_000, seed: int = 20240503
) -> Certification:
    """Along the optimal steps the error trace collapses to the closed form
    e_k = 2 (1+beta)^2 nu^2 / (eta - beta L) * delta*_k; includes the worked
    chain e_1 = 0.3936 for (eta, L, beta, nu, e0) = (1, 2, 0.25, 1, 0.4)."""
    rng = np.random.default_rng(seed)
    tuples = [(1.0, 2.0, 0.25, 1.0, 0.4)]
    tuples += [_random_envelope_tuple(rng) for _ in range(draws - 1)]
    worst = 0.0
    chain_ok = True
    for i, (eta, lip, beta, nu, e0) in enumerate(tuples):
        rec = ErrorRecursion(eta=eta, lipschitz=lip, nu=nu, beta=beta, e0=e0)
        star = optimal_steps(rec, k_max + 1)
        trace = evaluate_error(rec, star[:-1])
        closed = 2 * (1 + beta) ** 2 * nu**2 / (eta - beta * lip) * star
        worst = max(worst, float(np.max(np.abs(trace - closed)) / e0))
        if i == 0:
            chain_ok = abs(trace[1] - 0.3936) <= 1e-15 and abs(star[0] - 0.064) <= 1e-15
    tol = 1e-12
    return Certification(
        name="closed-form error trace",
        passed=worst <= tol and chain_ok,
        worst=worst,
        tolerance=tol,
        detail=f"{len(tuples)} tuples, k <= {k_max}, worked chain e_1 = 0.3936",
    )


def minimizer_gap_bound(
    draws: int = 1000, horizon: int = 50, seed: int = 20240504
) -> Certification:
    """Random admissible step sequences never beat the optimal ones, with gap
    at least (1+beta)^2 nu^2 (delta_{K-1} - delta*_{K-1})^2; the K=1 case is
    an exact quadratic identity."""
    rng = np.random.default_rng(seed)
    rec = ErrorRecursion(eta=1.0, lipschitz=2.0, nu=1.0, beta=0.25, e0=0.4)
    cap = rec.step_upper_bound
    star = optimal_steps(rec, horizon)
    noise = rec.noise_coefficient()
    worst_violation = -np.inf
    for _ in range(draws):
        steps = rng.uniform(1e-6, cap, size=horizon)
        gap = minimizer_gap(rec, steps)
        bound = noise * (steps[-1] - star[-1]) ** 2
        worst_violation = max(worst_violation, float(bound - gap))
    # K = 1: e_1(d) - e_1(d*) == noise * (d - d*)^2 exactly
    d1 = min(star[0] + 0.01, cap)
    identity_dev = abs(minimizer_gap(rec, [d1]) - noise * (d1 - star[0]) ** 2)
    tol = 1e-12
    passed = worst_violation <= 1e-15 and identity_dev <= tol
    return Certification(
        name="minimizer gap bound",
        passed=passed,
        worst=max(worst_violation, identity_dev),
        tolerance=tol,
        detail=f"{draws} random sequences in the admissible box, K = {horizon}",
    )


def coordination_identity(
    n_players: int = 5, k_max: int = 10_000, seed: int = 20240505
) -> Certification:
    """gamma_{k,i} / r_i agrees across players to 1e-12 relative spread, the
    r = 1 player reproduces delta*_k, and the r = 1 + (eta-2c)/L player
    reproduces Gamma*_k (with e_0 = D^2)."""
    rng = np.random.default_rng(seed)
    eta, lip, c, nu, diameter = 1.0, 2.0, 0.25, 1.0, 0.5
    beta = (eta - 2 * c) / lip
    rs = [1.0, 1.0 + beta] + list(rng.uniform(1.0, 1.0 + beta, size=n_players - 2))
    policies = [
        DasaPlayerPolicy(c=c, r=r, eta=eta, lipschitz=lip, nu=nu, diameter=diameter)
        for r in rs
    ]
    seqs = np.vstack([p.sequence(k_max + 1) / p.r for p in policies])
    spread = float(((seqs.max(axis=0) - seqs.min(axis=0)) / seqs.max(axis=0)).max())

    e0 = diameter * diameter
    lower = CentralizedAdaptivePolicy(eta, lip, nu, beta, e0, mode="lower")
    upper = CentralizedAdaptivePolicy(eta, lip, nu, beta, e0, mode="upper")
    dev_min = float(
        np.max(np.abs(policies[0].sequence(k_max + 1) - lower.sequence(k_max + 1)))
        / lower.sequence(1)[0]
    )
    dev_max = float(
        np.max(np.abs(policies[1].sequence(k_max + 1) - upper.sequence(k_max + 1)))
        / upper.sequence(1)[0]
    )
    worst = max(spread, dev_min, dev_max)
    tol = 1e-12
    return Certification(
        name="cross-player coordination",
        passed=worst <= tol,
        worst=worst,
        tolerance=tol,
        detail=f"{n_players} players, k <= {k_max}, envelope attainment included",
    )


def summability_diagnostics(horizon: int = 1_000_000) -> Certification:
    """The adaptive family passes the divergence/square-summability
    heuristics at a long horizon; theta/(k+1)^2 fails the divergence check."""
    eta, lip, c, nu, diameter = 1.0, 2.0, 0.25, 1.0, 0.5
    beta = (eta - 2 * c) / lip
    rs = [1.0, 1.0 + 0.4 * beta, 1.0 + beta]
    gammas = [
        DasaPlayerPolicy(c=c, r=r, eta=eta, lipschitz=lip, nu=nu, diameter=diameter).sequence(horizon)
        for r in rs
    ]
    e0 = diameter * diameter
    deltas = CentralizedAdaptivePolicy(eta, lip, nu, beta, e0, mode="lower").sequence(horizon)
    big = CentralizedAdaptivePolicy(eta, lip, nu, beta, e0, mode="upper").sequence(horizon)
    report = validate_assumption2(deltas, gammas, big, beta)

    ks = np.arange(1, horizon + 1, dtype=np.float64)
    squared = 0.1 / ks**2
    squared_report = validate_assumption2(squared, [squared], squared, 0.0)

    passed = report.all_ok and not squared_report.divergent_sum_ok
    worst = max(report.max_spread - beta, 0.0)
    return Certification(
        name="summability diagnostics",
        passed=passed,
        worst=worst,
        tolerance=1e-12,
        detail=(
            f"adaptive family ok={report.all_ok}, "
            f"theta/(k+1)^2 divergence ok={squared_report.divergent_sum_ok} (must be False), "
            f"K={horizon}"
        ),
    )


def harmonic_within_admissible_range(theta: float, rec: ErrorRecursion) -> bool:
    """Whether theta/(k+1) stays inside the admissible step range for all k."""
    return HarmonicPolicy(theta).next_step(0) <= rec.step_upper_bound


def run_all() -> list:
    """Every certification, in a stable order."""
    return [
        two_recursion_coupling(),
        envelope_coupling(),
        closed_form_error(),
        minimizer_gap_bound(),
        coordination_identity(),
        summability_diagnostics(),
    ]
