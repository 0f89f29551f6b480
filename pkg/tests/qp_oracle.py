"""Brute-force projection oracle: enumerate active sets of the constraints
[A; -I] y <= [b; 0] and keep the feasible candidate closest to the point.
Independent of the Dykstra implementation; practical for n, m <= 4."""

import itertools

import numpy as np


def project_qp(point: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m, n = a.shape
    c_mat = np.vstack([a, -np.eye(n)])
    d = np.concatenate([b, np.zeros(n)])
    best, best_dist = None, np.inf
    for k in range(n + 1):
        for subset in itertools.combinations(range(m + n), k):
            if not subset:
                y = point.copy()
            else:
                rows = c_mat[list(subset)]
                rhs = d[list(subset)]
                mu = np.linalg.lstsq(rows @ rows.T, rows @ point - rhs, rcond=None)[0]
                y = point - rows.T @ mu
            if np.all(c_mat @ y <= d + 1e-9):
                dist = float((y - point) @ (y - point))
                if dist < best_dist - 1e-15:
                    best_dist, best = dist, y
    return best
