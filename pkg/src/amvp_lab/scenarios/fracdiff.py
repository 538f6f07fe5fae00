"""Fractional differencing: binomial weights of (1 - L)^d and the truncated filter."""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve


def frac_diff_weights(d: float, n: int) -> np.ndarray:
    """Coefficients pi_0..pi_{n-1} of the expansion of (1 - L)^d.

    Uses pi_0 = 1 and pi_j = pi_{j-1} * (j - 1 - d) / j.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    w = np.empty(n)
    w[0] = 1.0
    for j in range(1, n):
        w[j] = w[j - 1] * (j - 1 - d) / j
    return w


def apply_frac_filter(series, d: float, truncation: int) -> np.ndarray:
    """Apply (1 - L)^d to ``series`` with the expansion cut at ``truncation`` lags.

    Pre-sample values are taken as zero, so the output has the input's length.
    """
    if truncation < 1:
        raise ValueError("truncation must be >= 1")
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        return x.copy()
    w = frac_diff_weights(d, min(truncation, x.size))
    # direct convolution is exact to rounding; FFT is only worth it on long inputs
    if x.size * w.size > 2_000_000:
        return fftconvolve(x, w)[: x.size]
    return np.convolve(x, w)[: x.size]
