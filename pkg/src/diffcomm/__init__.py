"""Diffusion-based semantic communication over noisy channels.

The library treats channel noise as partial progress through a
forward diffusion process: the receiver maps the measured noise level
to a diffusion step and runs the reverse process from there, instead of
training separate models per condition.  A variational codec compresses
latents for bandlimited links, trained with a hybrid KL / reconstruction
objective.  Everything is numpy; there is no framework dependency.
"""

from .channels import (
    ChannelOutput,
    ComplexVector,
    MimoChannel,
    awgn_transmit,
    measure_snr,
    mimo_svd_decompose,
    mimo_transmit,
    mmse_coefficient,
    rayleigh_transmit_mmse,
)
from .codec import (
    CodecArch,
    CodecParams,
    GaussianParams,
    compressed_length,
    downsample,
    init_codec,
    k_from_channel_count,
    load_codec,
    reparameterize,
    save_codec,
    upsample,
)
from .diffusion import (
    AnalyticGaussianDenoiser,
    Denoiser,
    GaussianSourceModel,
    Latent,
    adaptive_receive,
    analytic_gaussian_denoiser,
    compensate_to_step,
    denoise_from_step,
    forward_sample,
    reverse_step,
)
from .errors import (
    CompensationInfeasibleError,
    ConfigurationError,
    DeepFadeError,
    DegenerateChannelError,
    InfiniteSnrError,
    NumericOverflowError,
    RankDeficientChannelError,
    SaturationError,
    TrainingDivergedError,
)
from .loss import (
    LossBreakdown,
    LossWeights,
    TrainConfig,
    TrainRecord,
    guidance_kl,
    hybrid_loss,
    hybrid_loss_batch,
    prior_kl,
    reconstruction_psnr,
    surrogate_mse,
    train_codec,
)
from .metrics import (
    GaussianityReport,
    MetricReport,
    gaussianity_check,
    mse,
    psnr,
    psnr_from_mse,
    ssim,
)
from .schedule import (
    Schedule,
    StepMapping,
    build_linear_schedule,
    compensation_variance,
    sigma2_to_step,
    step_to_sigma2,
    step_to_snr_db,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyticGaussianDenoiser",
    "ChannelOutput",
    "CodecArch",
    "CodecParams",
    "CompensationInfeasibleError",
    "ComplexVector",
    "ConfigurationError",
    "DeepFadeError",
    "DegenerateChannelError",
    "Denoiser",
    "GaussianParams",
    "GaussianSourceModel",
    "GaussianityReport",
    "InfiniteSnrError",
    "Latent",
    "LossBreakdown",
    "LossWeights",
    "MetricReport",
    "MimoChannel",
    "NumericOverflowError",
    "RankDeficientChannelError",
    "SaturationError",
    "Schedule",
    "StepMapping",
    "TrainConfig",
    "TrainRecord",
    "TrainingDivergedError",
    "adaptive_receive",
    "analytic_gaussian_denoiser",
    "awgn_transmit",
    "build_linear_schedule",
    "compensate_to_step",
    "compensation_variance",
    "compressed_length",
    "denoise_from_step",
    "downsample",
    "forward_sample",
    "gaussianity_check",
    "guidance_kl",
    "hybrid_loss",
    "hybrid_loss_batch",
    "init_codec",
    "k_from_channel_count",
    "load_codec",
    "measure_snr",
    "mimo_svd_decompose",
    "mimo_transmit",
    "mmse_coefficient",
    "mse",
    "prior_kl",
    "psnr",
    "psnr_from_mse",
    "reconstruction_psnr",
    "rayleigh_transmit_mmse",
    "reparameterize",
    "reverse_step",
    "save_codec",
    "sigma2_to_step",
    "ssim",
    "step_to_sigma2",
    "step_to_snr_db",
    "surrogate_mse",
    "train_codec",
    "upsample",
]
