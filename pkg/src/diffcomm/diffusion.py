"""Forward diffusion, ancestral reverse denoising, and the receiver-side
operations that treat channel noise as part of the forward process.

Two receive strategies are supported.  ``adaptive_receive`` scales the
received signal so it matches the forward state at the step nearest the
channel's noise level, and denoising starts there.  ``compensate_to_step``
instead adds just enough extra noise to reach a chosen target step, so a
fixed-length reverse run can be used regardless of channel quality.

The denoiser is pluggable.  ``AnalyticGaussianDenoiser`` is the built-in
stand-in for a trained noise-prediction network: for latents with i.i.d.
Gaussian elements it returns the exact conditional expectation of the
injected noise, which makes end-to-end statistics checkable in closed
form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .schedule import (
    Schedule,
    StepMapping,
    compensation_variance,
    sigma2_to_step,
)

__all__ = [
    "Latent",
    "Denoiser",
    "GaussianSourceModel",
    "AnalyticGaussianDenoiser",
    "analytic_gaussian_denoiser",
    "forward_sample",
    "reverse_step",
    "compensate_to_step",
    "adaptive_receive",
    "denoise_from_step",
]


@dataclass(frozen=True)
class Latent:
    """Flat real-valued latent with its logical (width, height, channels) shape."""

    data: np.ndarray
    shape: tuple[int, int, int]

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        shape = tuple(int(v) for v in self.shape)
        object.__setattr__(self, "shape", shape)
        if data.ndim != 1:
            raise ValueError(f"latent data must be one-dimensional, got {data.ndim}")
        if len(shape) != 3 or any(v < 1 for v in shape):
            raise ValueError(f"shape must be three positive integers, got {shape}")
        w, h, c = shape
        if w * h * c != data.size:
            raise ValueError(
                f"shape {shape} implies {w * h * c} elements, data has {data.size}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("latent components must be finite")
        data.flags.writeable = False

    @property
    def n(self) -> int:
        return self.data.size

    def with_data(self, data: np.ndarray) -> "Latent":
        """Same logical shape, new values."""
        return Latent(data=data, shape=self.shape)

    def as_image(self) -> np.ndarray:
        """View as a (width, height, channels) array for windowed metrics."""
        return self.data.reshape(self.shape)


@runtime_checkable
class Denoiser(Protocol):
    """Noise-prediction interface consumed by the reverse process."""

    def predict_noise(self, y_t: Latent, t: int) -> Latent:
        """Estimate the standard-normal noise present in ``y_t`` at step ``t``."""
        ...


@dataclass(frozen=True)
class GaussianSourceModel:
    """I.i.d. Gaussian source: every latent element is N(mean, variance)."""

    mean: float = 0.0
    variance: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise ValueError(f"mean must be finite, got {self.mean!r}")
        if not (math.isfinite(self.variance) and self.variance >= 0.0):
            raise ValueError(f"variance must be finite and >= 0, got {self.variance!r}")

    def draw(self, shape: tuple[int, int, int], rng: np.random.Generator) -> Latent:
        w, h, c = shape
        data = self.mean + math.sqrt(self.variance) * rng.standard_normal(w * h * c)
        return Latent(data=data, shape=tuple(shape))


@dataclass(frozen=True)
class AnalyticGaussianDenoiser:
    """Exact noise predictor for i.i.d. Gaussian sources.

    For ``y_t = sqrt(ab_t) * y0 + sqrt(1 - ab_t) * eps`` with
    ``y0 ~ N(m, v)`` elementwise, the conditional expectation of the noise
    is linear in ``y_t``::

        E[eps | y_t] = sqrt(1 - ab_t) * (y_t - sqrt(ab_t) * m)
                       / (ab_t * v + 1 - ab_t)

    A frozen stand-in for a trained network; no parameters, no state.
    """

    model: GaussianSourceModel
    schedule: Schedule

    def predict_noise(self, y_t: Latent, t: int) -> Latent:
        ab = self.schedule.alpha_bar(t)
        m, v = self.model.mean, self.model.variance
        denom = ab * v + (1.0 - ab)
        eps = math.sqrt(1.0 - ab) * (y_t.data - math.sqrt(ab) * m) / denom
        return y_t.with_data(eps)


def analytic_gaussian_denoiser(
    model: GaussianSourceModel, schedule: Schedule
) -> AnalyticGaussianDenoiser:
    """Build the closed-form denoiser for an i.i.d. Gaussian source."""
    return AnalyticGaussianDenoiser(model=model, schedule=schedule)


def forward_sample(
    y0: Latent, t: int, schedule: Schedule, rng: np.random.Generator
) -> Latent:
    """Jump directly to forward step ``t``:
    ``sqrt(ab_t) * y0 + sqrt(1 - ab_t) * eps``.

    ``t = 0`` returns ``y0`` unchanged without consuming generator state.
    """
    ab = schedule.alpha_bar(t)
    if t == 0:
        return y0
    eps = rng.standard_normal(y0.n)
    return y0.with_data(math.sqrt(ab) * y0.data + math.sqrt(1.0 - ab) * eps)


def reverse_step(
    y_t: Latent,
    t: int,
    denoiser: Denoiser,
    schedule: Schedule,
    rng: np.random.Generator,
) -> Latent:
    """One ancestral reverse step from ``t`` to ``t - 1``.

    The mean subtracts the predicted noise::

        mu = (y_t - (1 - a_t)/sqrt(1 - ab_t) * eps_hat) / sqrt(a_t)

    and the added variance is the forward posterior's,
    ``(1 - ab_{t-1}) * (1 - a_t) / (1 - ab_t)``.  At ``t = 1`` the
    previous state is noiseless (``ab_0 = 1``), the variance vanishes,
    and the step is deterministic.
    """
    if t < 1 or t > schedule.T:
        raise IndexError(f"step {t} outside [1, {schedule.T}]")
    a_t = schedule.alpha(t)
    ab_t = schedule.alpha_bar(t)
    ab_prev = schedule.alpha_bar(t - 1)
    eps_hat = denoiser.predict_noise(y_t, t)
    mu = (y_t.data - (1.0 - a_t) / math.sqrt(1.0 - ab_t) * eps_hat.data) / math.sqrt(a_t)
    if t == 1:
        return y_t.with_data(mu)
    var = (1.0 - ab_prev) * (1.0 - a_t) / (1.0 - ab_t)
    return y_t.with_data(mu + math.sqrt(var) * rng.standard_normal(y_t.n))


def compensate_to_step(
    s_hat: Latent,
    sigma2: float,
    t_target: int,
    schedule: Schedule,
    rng: np.random.Generator,
) -> Latent:
    """Top up channel noise so the signal sits exactly at step ``t_target``.

    Adds independent noise of variance ``step_to_sigma2(t_target) - sigma2``
    and scales by ``sqrt(ab_target)``; the result is distributed like a
    forward sample of the clean source at ``t_target``.  At the boundary
    where the channel variance already matches the step, nothing is added.

    Raises CompensationInfeasibleError (via ``compensation_variance``)
    when the channel is noisier than the target step allows.
    """
    extra = compensation_variance(schedule, t_target, sigma2)
    ab = schedule.alpha_bar(t_target)
    if extra == 0.0:
        data = math.sqrt(ab) * s_hat.data
    else:
        eps = rng.standard_normal(s_hat.n)
        data = math.sqrt(ab) * (s_hat.data + math.sqrt(extra) * eps)
    return s_hat.with_data(data)


def adaptive_receive(
    s_hat: Latent, sigma2: float, schedule: Schedule
) -> tuple[Latent, StepMapping]:
    """Scale a received signal onto the nearest forward step.

    Returns the scaled latent ``sqrt(ab_u) * s_hat`` and the mapping that
    says which step ``u`` the reverse process should start from.  With
    ``sigma2 = 0`` the signal is already clean: step 0, scale 1, and the
    data pass through unchanged.
    """
    mapping = sigma2_to_step(schedule, sigma2)
    if mapping.step_u == 0:
        return s_hat, mapping
    return s_hat.with_data(mapping.scale * s_hat.data), mapping


def denoise_from_step(
    y_u: Latent,
    u: int,
    denoiser: Denoiser,
    schedule: Schedule,
    rng: np.random.Generator,
) -> Latent:
    """Run the reverse process from step ``u`` down to the clean state.

    ``u = 0`` is already clean and returns the input unchanged.
    """
    if u < 0 or u > schedule.T:
        raise IndexError(f"step {u} outside [0, {schedule.T}]")
    y = y_u
    for t in range(u, 0, -1):
        y = reverse_step(y, t, denoiser, schedule, rng)
    return y
