"""One-dimensional Gaussian kernel density estimation.

Shared by the operational-design-domain model and the drift overlay plots.
Bandwidth follows Silverman's rule of thumb,

    h = 0.9 * min(sigma, IQR / 1.34) * n^(-1/5),

floored at ``h_min = 1e-6 * max(1, |mean|)`` so constant samples still yield
a proper (if extremely narrow) density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import UndefinedStatisticError

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def silverman_bandwidth(sample: np.ndarray) -> float:
    sample = np.asarray(sample, dtype=np.float64)
    n = len(sample)
    mean = float(np.mean(sample))
    floor = 1e-6 * max(1.0, abs(mean))
    if n < 2:
        return floor
    sigma = float(np.std(sample, ddof=1))
    iqr = float(np.quantile(sample, 0.75) - np.quantile(sample, 0.25))
    spread = min(sigma, iqr / 1.34) if iqr > 0 else sigma
    h = 0.9 * spread * n ** (-0.2)
    return max(h, floor)


@dataclass(frozen=True)
class GaussianKde1d:
    """Fixed-bandwidth Gaussian KDE over a 1-D sample."""

    sample: np.ndarray
    bandwidth: float

    @classmethod
    def fit(cls, sample, bandwidth: float | None = None) -> "GaussianKde1d":
        arr = np.asarray(sample, dtype=np.float64)
        arr = arr[~np.isnan(arr)]
        if len(arr) == 0:
            raise UndefinedStatisticError("cannot fit a KDE on an empty sample")
        h = silverman_bandwidth(arr) if bandwidth is None else float(bandwidth)
        if h <= 0:
            raise UndefinedStatisticError("bandwidth must be positive")
        arr = np.array(arr, dtype=np.float64)
        arr.setflags(write=False)
        return cls(sample=arr, bandwidth=h)

    def log_density(self, x) -> np.ndarray:
        """log p(x), evaluated stably via log-sum-exp over all kernels."""
        pts = np.atleast_1d(np.asarray(x, dtype=np.float64))
        z = (pts[:, None] - self.sample[None, :]) / self.bandwidth
        log_norm = math.log(len(self.sample) * self.bandwidth) + _LOG_SQRT_2PI
        return logsumexp(-0.5 * z * z, axis=1) - log_norm

    def density(self, x) -> np.ndarray:
        return np.exp(self.log_density(x))

    def evaluation_grid(self, n_points: int = 512, pad_bandwidths: float = 3.0) -> np.ndarray:
        lo = float(np.min(self.sample)) - pad_bandwidths * self.bandwidth
        hi = float(np.max(self.sample)) + pad_bandwidths * self.bandwidth
        return np.linspace(lo, hi, n_points)
