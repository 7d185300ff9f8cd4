"""Batch-means errors and affine fits shared by the diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from hyperlab.dynamics.errors import FitUnstable


def batch_means_stderr(values: np.ndarray, blocks: int = 20) -> np.ndarray:
    """Standard error of the mean along axis 0 from ``blocks`` batch means."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    blocks = max(2, min(blocks, n))
    size = n // blocks
    trimmed = values[: size * blocks]
    means = trimmed.reshape((blocks, size) + values.shape[1:]).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(blocks)


def sample_stderr(values: np.ndarray) -> np.ndarray:
    """Across-sample standard error along axis 0 (zero for a single sample)."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] < 2:
        return np.zeros(values.shape[1:])
    return values.std(axis=0, ddof=1) / np.sqrt(values.shape[0])


@dataclass(frozen=True)
class AffineFit:
    """y ~ slope * x + intercept over x[start:stop]."""

    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float
    start: int
    stop: int


def affine_fit(x: np.ndarray, y: np.ndarray) -> AffineFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or np.ptp(x) == 0:
        raise FitUnstable("affine fit needs at least two distinct abscissae")
    if np.ptp(y) == 0:
        return AffineFit(0.0, float(y[0]), 1.0, 0.0, 0, x.size)
    result = stats.linregress(x, y)
    return AffineFit(
        float(result.slope),
        float(result.intercept),
        float(result.rvalue**2),
        float(result.stderr),
        0,
        x.size,
    )


def best_window_fit(x: np.ndarray, y: np.ndarray, min_window: int = 8, min_r2: float = 0.99) -> AffineFit:
    """Affine fit over the contiguous window (length >= min_window) of maximal R^2.

    Ties prefer longer windows.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 2:
        raise FitUnstable(f"need at least 2 points for a fit, got {n}")
    window = min(min_window, n)
    best: AffineFit | None = None
    for start in range(0, n - window + 1):
        for stop in range(start + window, n + 1):
            fit = affine_fit(x[start:stop], y[start:stop])
            candidate = AffineFit(fit.slope, fit.intercept, fit.r_squared, fit.slope_stderr, start, stop)
            if best is None or candidate.r_squared > best.r_squared + 1e-12:
                best = candidate
            elif abs(candidate.r_squared - best.r_squared) <= 1e-12 and stop - start > best.stop - best.start:
                best = candidate
    assert best is not None
    if best.r_squared < min_r2:
        raise FitUnstable(f"best window R^2 = {best.r_squared:.4f} below {min_r2}")
    return best
