"""Reconstruction quality metrics and a Monte-Carlo distribution check.

PSNR and SSIM operate on latents interpreted as (width, height, channels)
images; SSIM uses Gaussian-weighted local windows on each channel slice
and averages the per-channel means.  ``gaussianity_check`` verifies that
simulated samples have the mean and variance a noise model predicts, in
units of standard errors, and is the workhorse behind the
channel-to-forward equivalence tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .diffusion import Latent

__all__ = ["MetricReport", "GaussianityReport", "mse", "psnr", "ssim", "gaussianity_check"]

PSNR_CAP_DB = 99.0

ArrayLike = Union[Latent, np.ndarray]


def _values(x: ArrayLike) -> np.ndarray:
    if isinstance(x, Latent):
        return x.data
    return np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class MetricReport:
    """Aggregated metrics for one experiment cell.

    ``psnr_db`` is computed from the aggregated ``mse`` and ``peak``, so
    the three fields stay mutually consistent by construction.
    """

    psnr_db: float
    ssim: float
    mse: float
    n: int
    peak: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.mse < 0.0:
            raise ValueError(f"mse must be >= 0, got {self.mse}")
        if not -1.0 <= self.ssim <= 1.0:
            raise ValueError(f"ssim must lie in [-1, 1], got {self.ssim}")
        expected = psnr_from_mse(self.mse, self.peak)
        if not math.isclose(self.psnr_db, expected, rel_tol=1e-9, abs_tol=1e-9):
            raise ValueError(
                f"psnr_db {self.psnr_db} inconsistent with mse {self.mse} "
                f"and peak {self.peak} (expected {expected})"
            )


def mse(a: ArrayLike, b: ArrayLike) -> float:
    """Mean squared difference between two equally shaped signals."""
    av, bv = _values(a), _values(b)
    if av.shape != bv.shape:
        raise ValueError(f"shape mismatch: {av.shape} vs {bv.shape}")
    d = av - bv
    return float(np.mean(d * d))


def psnr_from_mse(err: float, peak: float = 1.0) -> float:
    """PSNR in dB for a known mean squared error, capped at 99 dB."""
    if peak <= 0.0:
        raise ValueError(f"peak must be > 0, got {peak!r}")
    if err < 0.0:
        raise ValueError(f"mse must be >= 0, got {err!r}")
    if err == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(peak * peak / err), PSNR_CAP_DB)


def psnr(a: ArrayLike, b: ArrayLike, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs return the 99 dB cap."""
    return psnr_from_mse(mse(a, b), peak)


def _gaussian_kernel(window: int, sigma: float) -> np.ndarray:
    half = (window - 1) / 2.0
    x = np.arange(window) - half
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()


def _ssim_channel(a: np.ndarray, b: np.ndarray, kernel: np.ndarray, c1: float, c2: float) -> float:
    win = kernel.shape[0]
    wa = np.lib.stride_tricks.sliding_window_view(a, (win, win))
    wb = np.lib.stride_tricks.sliding_window_view(b, (win, win))
    mu_a = np.tensordot(wa, kernel, axes=([2, 3], [0, 1]))
    mu_b = np.tensordot(wb, kernel, axes=([2, 3], [0, 1]))
    m_aa = np.tensordot(wa * wa, kernel, axes=([2, 3], [0, 1]))
    m_bb = np.tensordot(wb * wb, kernel, axes=([2, 3], [0, 1]))
    m_ab = np.tensordot(wa * wb, kernel, axes=([2, 3], [0, 1]))
    var_a = m_aa - mu_a * mu_a
    var_b = m_bb - mu_b * mu_b
    cov = m_ab - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def ssim(
    a: Latent,
    b: Latent,
    window: int = 7,
    k1: float = 0.01,
    k2: float = 0.03,
    peak: float = 1.0,
    kernel_sigma: float = 1.5,
) -> float:
    """Structural similarity with Gaussian-weighted local statistics.

    Each channel slice is scanned with a ``window x window`` Gaussian
    kernel over every fully contained position; per-channel map means are
    averaged.  Identical inputs give exactly 1; anticorrelated structure
    drives the value negative.

    Raises
    ------
    ValueError
        On shape mismatch, an even or too-small window, or a window
        larger than the image plane.
    """
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    w, h, _ = a.shape
    if window > w or window > h:
        raise ValueError(f"window {window} larger than image plane ({w}x{h})")
    if peak <= 0.0:
        raise ValueError(f"peak must be > 0, got {peak!r}")
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    kernel = _gaussian_kernel(window, kernel_sigma)
    img_a, img_b = a.as_image(), b.as_image()
    vals = [
        _ssim_channel(img_a[:, :, c], img_b[:, :, c], kernel, c1, c2)
        for c in range(a.shape[2])
    ]
    return float(np.mean(vals))


@dataclass(frozen=True)
class GaussianityReport:
    """Outcome of a sample-moment check against a target Gaussian."""

    n: int
    tol_se: float
    passed: bool
    failures: tuple[str, ...]
    max_mean_dev_se: float
    max_var_dev_se: float


def gaussianity_check(
    samples: np.ndarray,
    mu: ArrayLike,
    sigma2: ArrayLike,
    tol_se: float = 4.0,
) -> GaussianityReport:
    """Check sample means and variances against a Gaussian prediction.

    ``samples`` has one row per draw and one column per dimension.  Each
    dimension's sample mean must lie within ``tol_se`` standard errors of
    ``mu`` (standard error ``sqrt(sigma2 / n)``) and its unbiased sample
    variance within ``tol_se`` standard errors of ``sigma2`` (standard
    error ``sigma2 * sqrt(2 / (n - 1))``).

    Requires at least 1000 draws; fewer make the variance standard error
    formula too unreliable to act on.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.ndim != 2:
        raise ValueError(f"samples must be a 2-D array, got ndim={samples.ndim}")
    n, d = samples.shape
    if n < 1000:
        raise ValueError(f"too few samples: need at least 1000 draws, got {n}")
    mu_t = np.broadcast_to(np.asarray(_values(mu), dtype=np.float64), (d,))
    s2_t = np.broadcast_to(np.asarray(_values(sigma2), dtype=np.float64), (d,))
    if np.any(s2_t < 0.0):
        raise ValueError("sigma2 must be >= 0")

    mean = samples.mean(axis=0)
    var = samples.var(axis=0, ddof=1)
    se_mean = np.sqrt(s2_t / n)
    se_var = s2_t * math.sqrt(2.0 / (n - 1))

    failures = []
    with np.errstate(divide="ignore", invalid="ignore"):
        mean_dev = np.abs(mean - mu_t) / se_mean
        var_dev = np.abs(var - s2_t) / se_var
    # zero target variance: the samples must be exactly constant
    mean_dev = np.where(s2_t == 0.0, np.where(mean == mu_t, 0.0, np.inf), mean_dev)
    var_dev = np.where(s2_t == 0.0, np.where(var == 0.0, 0.0, np.inf), var_dev)
    for j in range(d):
        if mean_dev[j] > tol_se:
            failures.append(
                f"dim {j}: mean {mean[j]:.6g} deviates {mean_dev[j]:.2f} SE "
                f"from {mu_t[j]:.6g}"
            )
        if var_dev[j] > tol_se:
            failures.append(
                f"dim {j}: variance {var[j]:.6g} deviates {var_dev[j]:.2f} SE "
                f"from {s2_t[j]:.6g}"
            )
    return GaussianityReport(
        n=n,
        tol_se=tol_se,
        passed=not failures,
        failures=tuple(failures),
        max_mean_dev_se=float(np.max(mean_dev)),
        max_var_dev_se=float(np.max(var_dev)),
    )
