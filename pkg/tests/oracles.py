"""Independent reference implementations used to pin expected values.

Everything here is deliberately naive: full dynamic programs without the
banding optimization, dense matrix inverses, and brute-force recounts.
Test expectations come from these, never from the code under test.
"""

import numpy as np


def dtw_oracle(a: np.ndarray, b: np.ndarray) -> float:
    """Unconstrained DTW by exhaustive DP over the full cost lattice."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = len(a), len(b)
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = (a[i - 1] - b[j - 1]) ** 2
            acc[i, j] = cost + min(acc[i - 1, j], acc[i, j - 1],
                                   acc[i - 1, j - 1])
    return float(np.sqrt(acc[n, m]))


def banded_dtw_oracle(a: np.ndarray, b: np.ndarray, r: int) -> float:
    """Banded DTW by the same exhaustive DP, cells outside |i-j| <= r
    forbidden."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = len(a), len(b)
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if abs((i - 1) - (j - 1)) > r:
                continue
            cost = (a[i - 1] - b[j - 1]) ** 2
            acc[i, j] = cost + min(acc[i - 1, j], acc[i, j - 1],
                                   acc[i - 1, j - 1])
    return float(np.sqrt(acc[n, m]))


def ridge_oracle(x: np.ndarray, y: np.ndarray, lam: float):
    """Standardized ridge by dense inverse: returns (weights, intercept,
    mean, std) matching the centered/scaled normal-equation formulation."""
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    z = (x - mean) / std
    w = np.linalg.inv(z.T @ z + lam * np.eye(z.shape[1])) @ z.T @ (y - y.mean())
    return w, float(y.mean()), mean, std


def smape_oracle(y, y_hat) -> float:
    """Term-by-term factor-2 sMAPE with explicit zero handling."""
    total = 0.0
    for a, p in zip(y, y_hat):
        denom = abs(a) + abs(p)
        total += 0.0 if denom == 0 else 2.0 * abs(p - a) / denom
    return 100.0 * total / len(y)


def skewness_oracle(values) -> float:
    """Third standardized moment g1 from raw moment sums."""
    x = np.asarray(values, dtype=float)
    m = x.mean()
    m2 = np.mean((x - m) ** 2)
    m3 = np.mean((x - m) ** 3)
    return float(m3 / m2 ** 1.5)


def median_quadrant_oracle(mean_cpc, cv):
    """Sort-based median split; at-median values land on the low side."""
    def median_by_sort(vals):
        s = sorted(vals)
        n = len(s)
        mid = n // 2
        return s[mid] if n % 2 else (s[mid - 1] + s[mid]) / 2.0

    med_m = median_by_sort(mean_cpc)
    med_c = median_by_sort(cv)
    out = []
    for m, c in zip(mean_cpc, cv):
        out.append(f"{'high' if m > med_m else 'low'}"
                   f"/{'high' if c > med_c else 'low'}")
    return out
