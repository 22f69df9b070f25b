"""Hybrid training objective for the codec and a small SGD trainer.

Three terms, each a per-element mean:

- ``guidance_kl``: KL from the uncompressed received distribution
  ``N(y, sigma^2)`` to the decoder's Gaussian ``N(mu_y, sigma_y^2)``;
  aligns the compressed branch with what the reverse diffusion process
  expects to consume.
- ``prior_kl``: KL from the decoder's Gaussian to the standard normal;
  the usual variational regularizer.
- ``surrogate_mse``: squared error between the reparameterized
  reconstruction and the uncompressed received signal; stands in for the
  post-denoising error, which it upper-bounds up to an additive constant.

``total = lambda * prior_kl + surrogate_mse + gamma * guidance_kl``.

Reported values use per-element means so the weights transfer across
latent sizes.  Parameter updates, however, descend the summed objective
(mean gradient scaled by batch * elements): with the documented default
learning rate the mean-objective gradient is too small to move the
parameters at all, and the summed objective is what makes that rate
meaningful.  See the decisions log in the repository root for the
trade-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .codec import (
    CodecParams,
    GaussianParams,
    backward_batch,
    clone_params,
    forward_down_batch,
    forward_up_batch,
    params_to_vector,
    snr_feature,
    vector_to_params,
)
from .diffusion import GaussianSourceModel, Latent
from .errors import TrainingDivergedError
from .metrics import psnr_from_mse

__all__ = [
    "LossWeights",
    "LossBreakdown",
    "TrainConfig",
    "TrainRecord",
    "guidance_kl",
    "prior_kl",
    "surrogate_mse",
    "hybrid_loss",
    "hybrid_loss_batch",
    "reconstruction_psnr",
    "train_codec",
]


@dataclass(frozen=True)
class LossWeights:
    """Weights of the KL terms: ``lam`` on the prior, ``gamma`` on guidance."""

    lam: float = 0.1
    gamma: float = 0.1

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0.0):
            raise ValueError(f"lam must be finite and >= 0, got {self.lam!r}")
        if not (math.isfinite(self.gamma) and self.gamma >= 0.0):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma!r}")


@dataclass(frozen=True)
class LossBreakdown:
    """Per-element mean loss terms and their weighted total."""

    l_kl: float
    l_mse: float
    l_g: float
    total: float
    weights: LossWeights

    def __post_init__(self):
        expected = self.weights.lam * self.l_kl + self.l_mse + self.weights.gamma * self.l_g
        # nan parts (a diverged step) recompose to nan, which != itself
        both_nan = math.isnan(self.total) and math.isnan(expected)
        if self.total != expected and not both_nan:
            raise ValueError(
                f"total {self.total!r} does not recompose from the parts ({expected!r})"
            )


def _latent_data(x: Union[Latent, np.ndarray]) -> np.ndarray:
    return x.data if isinstance(x, Latent) else np.asarray(x, dtype=np.float64)


def guidance_kl(y: Union[Latent, np.ndarray], sigma: float, q: GaussianParams) -> float:
    """Mean elementwise KL from ``N(y, sigma^2)`` to ``N(q.mu, q.sigma^2)``."""
    sigma = float(sigma)
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise ValueError(f"sigma must be finite and > 0, got {sigma!r}")
    yv = _latent_data(y)
    if yv.shape != q.mu.shape:
        raise ValueError(f"shape mismatch: y {yv.shape} vs q {q.mu.shape}")
    d = q.mu - yv
    val = (
        np.log(q.sigma / sigma)
        + (sigma * sigma + d * d) / (2.0 * q.sigma * q.sigma)
        - 0.5
    )
    return float(np.mean(val))


def prior_kl(q: GaussianParams) -> float:
    """Mean elementwise KL from ``N(q.mu, q.sigma^2)`` to the standard normal."""
    s2 = q.sigma * q.sigma
    val = 0.5 * (q.mu * q.mu + s2 - np.log(s2) - 1.0)
    return float(np.mean(val))


def surrogate_mse(y_hat: Union[Latent, np.ndarray], s_hat: Union[Latent, np.ndarray]) -> float:
    """Mean squared error between the reconstruction and the received signal."""
    a, b = _latent_data(y_hat), _latent_data(s_hat)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.mean(d * d))


def hybrid_loss(
    y: Union[Latent, np.ndarray],
    sigma: float,
    q: GaussianParams,
    y_hat: Union[Latent, np.ndarray],
    s_hat: Union[Latent, np.ndarray],
    weights: LossWeights = LossWeights(),
) -> LossBreakdown:
    """Assemble the three terms into the weighted training objective."""
    l_kl = prior_kl(q)
    l_mse = surrogate_mse(y_hat, s_hat)
    l_g = guidance_kl(y, sigma, q)
    total = weights.lam * l_kl + l_mse + weights.gamma * l_g
    return LossBreakdown(l_kl=l_kl, l_mse=l_mse, l_g=l_g, total=total, weights=weights)


# ---------------------------------------------------------------------------
# batched loss with exact gradients


def hybrid_loss_batch(
    params: CodecParams,
    Y: np.ndarray,
    sigma: float,
    snr: float,
    eps1: np.ndarray,
    eps2: np.ndarray,
    eps_y: np.ndarray,
    weights: LossWeights,
) -> tuple[LossBreakdown, CodecParams]:
    """Mean-reduction loss over a batch and its exact parameter gradients.

    ``Y`` is (batch, n); ``eps1`` and ``eps_y`` are (batch, n) unit
    normals for the uncompressed received signal and the
    reparameterization, ``eps2`` is (batch, m) for the transmit noise.
    All noise is passed explicitly so finite-difference validation can
    hold it fixed.  Returns per-element mean losses and gradients of the
    mean total.
    """
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise ValueError(f"sigma must be finite and > 0, got {sigma!r}")
    B, n = Y.shape
    sigma = float(sigma)

    Z, down_ctx = forward_down_batch(params, Y)
    Zhat = Z + sigma * eps2
    feat = snr_feature(params, snr)
    Mu, Lv, Sy, Yhat, up_ctx = forward_up_batch(params, Zhat, feat, eps_y)
    Shat = Y + sigma * eps1

    eLv = np.exp(Lv)
    inv_eLv = np.exp(-Lv)
    diff = Mu - Y
    resid = Yhat - Shat

    l_kl = float(np.mean(0.5 * (Mu * Mu + eLv - Lv - 1.0)))
    l_mse = float(np.mean(resid * resid))
    l_g = float(
        np.mean(0.5 * Lv - math.log(sigma) + (sigma * sigma + diff * diff) * inv_eLv * 0.5 - 0.5)
    )
    lam, gamma = weights.lam, weights.gamma
    total = lam * l_kl + l_mse + gamma * l_g
    breakdown = LossBreakdown(l_kl=l_kl, l_mse=l_mse, l_g=l_g, total=total, weights=weights)

    scale = 1.0 / (B * n)
    dMu = scale * (lam * Mu + 2.0 * resid + gamma * diff * inv_eLv)
    dLv = scale * (
        lam * 0.5 * (eLv - 1.0)
        + resid * up_ctx["eps_y"] * Sy
        + gamma * 0.5 * (1.0 - (sigma * sigma + diff * diff) * inv_eLv)
    )
    grads = backward_batch(params, down_ctx, up_ctx, dMu, dLv)
    return breakdown, grads


def reconstruction_psnr(
    params: CodecParams,
    Y: np.ndarray,
    sigma: float,
    snr: float,
    eps2: np.ndarray,
    eps_y: np.ndarray,
    peak: float = 1.0,
) -> float:
    """Codec-only reconstruction quality on a fixed batch with fixed noise."""
    Z, _ = forward_down_batch(params, Y)
    Zhat = Z + sigma * eps2
    feat = snr_feature(params, snr)
    _, _, _, Yhat, _ = forward_up_batch(params, Zhat, feat, eps_y)
    err = float(np.mean((Yhat - Y) ** 2))
    return psnr_from_mse(err, peak)


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    """Plain SGD settings; momentum of 0 disables the velocity term."""

    steps: int = 2000
    batch: int = 4
    lr: float = 1e-4
    momentum: float = 0.0
    eval_every: int = 100
    holdout: int = 64
    common_noise: bool = False

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError(f"steps must be >= 0, got {self.steps}")
        if self.batch < 1:
            raise ValueError(f"batch must be >= 1, got {self.batch}")
        if not (math.isfinite(self.lr) and self.lr > 0.0):
            raise ValueError(f"lr must be finite and > 0, got {self.lr!r}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum!r}")
        if self.eval_every < 1:
            raise ValueError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.holdout < 1:
            raise ValueError(f"holdout must be >= 1, got {self.holdout}")


@dataclass(frozen=True)
class TrainRecord:
    """One training step: losses, and holdout PSNR on evaluation steps."""

    step: int
    breakdown: LossBreakdown
    eval_psnr: Optional[float] = None


SourceLike = Union[GaussianSourceModel, Sequence[Latent]]


def _draw_batch(
    source: SourceLike,
    shape: tuple[int, int, int],
    batch: int,
    rng: np.random.Generator,
    cursor: list[int],
) -> np.ndarray:
    if isinstance(source, GaussianSourceModel):
        w, h, c = shape
        return source.mean + math.sqrt(source.variance) * rng.standard_normal((batch, w * h * c))
    rows = []
    for _ in range(batch):
        rows.append(source[cursor[0] % len(source)].data)
        cursor[0] += 1
    return np.stack(rows)


def train_codec(
    source: SourceLike,
    sigma: float,
    params: CodecParams,
    weights: LossWeights,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> tuple[CodecParams, list[TrainRecord]]:
    """Train the codec against an AWGN channel of standard deviation ``sigma``.

    Each step draws a batch from ``source`` (a Gaussian model or a fixed
    dataset cycled in order), simulates the uncompressed received signal
    ``y + sigma * eps1`` and the compressed one ``F_d(y) + sigma * eps2``,
    decodes, and descends the hybrid objective.  The SNR conditioning input
    is ``1 / sigma^2`` (the transmit vector is unit power under the default
    normalization).  With ``common_noise`` the transmit noise reuses the
    leading components of ``eps1`` instead of an independent draw.

    The input parameters are not modified; the trained copy is returned
    together with one record per step.  Holdout data and its noise are
    frozen up front, so ``eval_psnr`` movement reflects parameter change
    only.  A non-finite loss aborts with TrainingDivergedError.
    """
    sigma = float(sigma)
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise ValueError(f"sigma must be finite and > 0, got {sigma!r}")
    params = clone_params(params)
    n, m = params.n, params.m
    snr = 1.0 / (sigma * sigma)

    hold_Y = _draw_batch(source, params.shape, cfg.holdout, rng, [0])
    hold_eps2 = rng.standard_normal((cfg.holdout, m))
    hold_eps_y = rng.standard_normal((cfg.holdout, n))

    vec = params_to_vector(params)
    velocity = np.zeros_like(vec)
    grad_scale = cfg.batch * n  # updates descend the summed objective
    cursor = [0]
    records: list[TrainRecord] = []
    last_finite = 0

    for step in range(1, cfg.steps + 1):
        Y = _draw_batch(source, params.shape, cfg.batch, rng, cursor)
        eps1 = rng.standard_normal((cfg.batch, n))
        eps2 = eps1[:, :m].copy() if cfg.common_noise else rng.standard_normal((cfg.batch, m))
        eps_y = rng.standard_normal((cfg.batch, n))

        breakdown, grads = hybrid_loss_batch(params, Y, sigma, snr, eps1, eps2, eps_y, weights)
        if not math.isfinite(breakdown.total):
            raise TrainingDivergedError(step=step, last_finite_step=last_finite)
        last_finite = step

        gvec = params_to_vector(grads) * grad_scale
        if cfg.momentum > 0.0:
            velocity = cfg.momentum * velocity - cfg.lr * gvec
            vec = vec + velocity
        else:
            vec = vec - cfg.lr * gvec
        params = vector_to_params(params, vec)

        eval_psnr = None
        if step % cfg.eval_every == 0 or step == cfg.steps:
            eval_psnr = reconstruction_psnr(params, hold_Y, sigma, snr, hold_eps2, hold_eps_y)
        records.append(TrainRecord(step=step, breakdown=breakdown, eval_psnr=eval_psnr))

    return params, records
