"""Independent brute-force oracles used to pin expected values.

Everything here is deliberately naive (double loops, explicit elimination)
and shares no code with the implementation it checks.
"""

import numpy as np


def ks_bruteforce(a, b) -> float:
    """O(n*m) sup of |ECDF_a - ECDF_b| over every pooled sample point."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    best = 0.0
    for x in np.concatenate([a, b]):
        fa = np.mean(a <= x)
        fb = np.mean(b <= x)
        best = max(best, abs(fa - fb))
    return float(best)


def wasserstein_bruteforce(a, b) -> float:
    """Exact integral of |ECDF_a - ECDF_b| over the merged support."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    xs = np.sort(np.concatenate([a, b]))
    total = 0.0
    for lo, hi in zip(xs[:-1], xs[1:]):
        fa = np.mean(a <= lo)
        fb = np.mean(b <= lo)
        total += abs(fa - fb) * (hi - lo)
    return float(total)


def gaussian_elimination_solve(a, rhs):
    """Textbook Gaussian elimination with partial pivoting."""
    a = np.array(a, dtype=float)
    rhs = np.array(rhs, dtype=float)
    n = len(rhs)
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(a[col:, col])))
        if abs(a[pivot, col]) < 1e-300:
            raise ZeroDivisionError("singular matrix")
        if pivot != col:
            a[[col, pivot]] = a[[pivot, col]]
            rhs[[col, pivot]] = rhs[[pivot, col]]
        for row in range(col + 1, n):
            factor = a[row, col] / a[col, col]
            a[row, col:] -= factor * a[col, col:]
            rhs[row] -= factor * rhs[col]
    x = np.zeros(n)
    for row in range(n - 1, -1, -1):
        x[row] = (rhs[row] - a[row, row + 1:] @ x[row + 1:]) / a[row, row]
    return x


def ridge_oracle(x, y, lam):
    """Standardized ridge weights via explicit normal equations."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    means = x.mean(axis=0)
    stds = x.std(axis=0)
    stds = np.where(stds > 1e-12, stds, 1.0)
    z = (x - means) / stds
    yc = y - y.mean()
    p = x.shape[1]
    weights = gaussian_elimination_solve(z.T @ z + lam * np.eye(p), z.T @ yc)
    return weights, float(y.mean()), means, stds


def nll_grid_temperature(logits, labels, grid):
    """Grid-search temperature minimizing the NLL; independent of the
    golden-section implementation."""
    logits = np.asarray(logits, dtype=float)
    labels = np.asarray(labels, dtype=int)
    best_t, best_nll = None, np.inf
    for t in grid:
        z = logits / t
        z = z - z.max(axis=1, keepdims=True)
        probs = np.exp(z)
        probs /= probs.sum(axis=1, keepdims=True)
        p_true = np.clip(probs[np.arange(len(labels)), labels], 1e-12, None)
        nll = float(-np.mean(np.log(p_true)))
        if nll < best_nll:
            best_t, best_nll = float(t), nll
    return best_t, best_nll


def trapezoid_integral(xs, ys) -> float:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    return float(np.sum((ys[1:] + ys[:-1]) / 2.0 * np.diff(xs)))
