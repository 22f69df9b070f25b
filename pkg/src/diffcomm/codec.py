"""Latent compression codec: a downsampler to a shorter transmit vector
and an SNR-conditioned upsampler that outputs a Gaussian over the
reconstruction, sampled via the reparameterization trick.

The maps are small fully connected networks built from residual
bottleneck blocks (linear, leaky rectifier, linear, plus skip).  The
closing layer of every residual branch starts at zero, so an untrained
codec is a fixed linear projection: block-mean pooling on the way down,
nearest-neighbor repetition on the way up.  With ``k = 1`` both
projections are the identity.

The forward pass is written so that an exact reverse-mode backward pass
(`backward_batch`) can mirror it layer by layer; the training loop and
loss live in :mod:`diffcomm.loss`.  No autodiff framework is involved,
which is why the gradient check against finite differences in the test
suite is load-bearing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .diffusion import Latent
from .errors import ConfigurationError, NumericOverflowError

__all__ = [
    "CodecArch",
    "LinearParams",
    "ResidualBlock",
    "CodecParams",
    "GaussianParams",
    "compressed_length",
    "k_from_channel_count",
    "init_codec",
    "downsample",
    "downsample_with_scale",
    "upsample",
    "reparameterize",
    "snr_feature",
    "save_codec",
    "load_codec",
    "params_to_vector",
    "vector_to_params",
]

LRELU_SLOPE = 0.01
LOGVAR_MIN = -10.0
LOGVAR_MAX = 10.0
LAYOUT_VERSION = 1
# compression rate per configured channel count; see k_from_channel_count
RATE_PER_CHANNEL = 0.0013


@dataclass(frozen=True)
class CodecArch:
    """Width settings for the residual bottleneck blocks."""

    hidden: int = 64
    blocks: int = 2

    def __post_init__(self):
        if self.hidden < 1:
            raise ConfigurationError("arch.hidden", f"must be >= 1, got {self.hidden}")
        if self.blocks < 1:
            raise ConfigurationError("arch.blocks", f"must be >= 1, got {self.blocks}")


@dataclass
class LinearParams:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)


@dataclass
class ResidualBlock:
    fc1: LinearParams  # opens the bottleneck
    fc2: LinearParams  # closes it; zero at initialization


@dataclass
class CodecParams:
    """All trainable state plus the switches that shape the forward pass."""

    shape: tuple[int, int, int]
    k: float
    arch: CodecArch
    down_blocks: list[ResidualBlock]
    down_proj: LinearParams
    up_mu_proj: LinearParams
    up_mu_blocks: list[ResidualBlock]
    lv_fc1: LinearParams
    lv_fc2: LinearParams
    power_norm: bool = True
    snr_conditioning: bool = True
    snr_to_mu: bool = False
    snr_db_range: tuple[float, float] = (0.0, 12.0)

    @property
    def n(self) -> int:
        w, h, c = self.shape
        return w * h * c

    @property
    def m(self) -> int:
        return self.down_proj.W.shape[0]


@dataclass(frozen=True)
class GaussianParams:
    """Elementwise Gaussian over the reconstruction: mean and positive scale."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        if mu.shape != sigma.shape:
            raise ValueError(f"mu and sigma shapes differ: {mu.shape} vs {sigma.shape}")
        if not np.all(sigma > 0.0):
            raise ValueError("sigma must be strictly positive")


def compressed_length(n: int, k: float) -> int:
    """Transmit vector length for compression ratio ``k``: round(k * n), >= 1."""
    if not 0.0 < k <= 1.0:
        raise ConfigurationError("k", f"must lie in (0, 1], got {k!r}")
    m = int(round(k * n))
    if m < 1:
        raise ConfigurationError("k", f"ratio {k!r} rounds to an empty vector for n={n}")
    if m > n:
        raise ConfigurationError("k", f"ratio {k!r} exceeds the uncompressed length for n={n}")
    return m


def k_from_channel_count(C: int, n: int) -> float:
    """Compression ratio for a configured channel count ``C``.

    The convention is a rate of ``0.0013 * C``; the transmit length is
    rounded to the nearest integer for the given latent size and the
    ratio reported back as ``m / n`` so configs can state either form.
    """
    if C < 1:
        raise ConfigurationError("C", f"must be >= 1, got {C}")
    m = int(round(RATE_PER_CHANNEL * C * n))
    if m < 1:
        raise ConfigurationError("C", f"channel count {C} rounds to an empty vector for n={n}")
    if m > n:
        raise ConfigurationError("C", f"channel count {C} exceeds the uncompressed length for n={n}")
    return m / n


def _block_mean_matrix(m: int, n: int) -> np.ndarray:
    """Fixed projection averaging contiguous input blocks; identity when m == n."""
    P = np.zeros((m, n))
    for i in range(m):
        lo = (i * n) // m
        hi = ((i + 1) * n) // m
        P[i, lo:hi] = 1.0 / (hi - lo)
    return P


def _repeat_matrix(n: int, m: int) -> np.ndarray:
    """Fixed upsampling by nearest input element; identity when n == m."""
    Q = np.zeros((n, m))
    for j in range(n):
        Q[j, (j * m) // n] = 1.0
    return Q


def _init_block(n: int, hidden: int, rng: np.random.Generator) -> ResidualBlock:
    w1 = 0.05 * rng.standard_normal((hidden, n))
    return ResidualBlock(
        fc1=LinearParams(W=w1, b=np.zeros(hidden)),
        fc2=LinearParams(W=np.zeros((n, hidden)), b=np.zeros(n)),
    )


def init_codec(
    shape: tuple[int, int, int],
    k: float,
    arch: CodecArch,
    rng: np.random.Generator,
    power_norm: bool = True,
    snr_conditioning: bool = True,
    snr_to_mu: bool = False,
    snr_db_range: tuple[float, float] = (0.0, 12.0),
) -> CodecParams:
    """Freshly initialized codec; identical seeds give identical parameters.

    Residual branches start at exactly zero, so the initial maps are the
    fixed projections described in the module docstring.  The variance
    head is small-random throughout so SNR conditioning is live from the
    start.
    """
    shape = tuple(int(v) for v in shape)
    if len(shape) != 3 or any(v < 1 for v in shape):
        raise ConfigurationError("shape", f"must be three positive integers, got {shape}")
    lo, hi = float(snr_db_range[0]), float(snr_db_range[1])
    if not lo < hi:
        raise ConfigurationError("snr_db_range", f"must satisfy lo < hi, got {snr_db_range}")
    w, h, c = shape
    n = w * h * c
    m = compressed_length(n, k)

    down_blocks = [_init_block(n, arch.hidden, rng) for _ in range(arch.blocks)]
    down_proj = LinearParams(W=_block_mean_matrix(m, n), b=np.zeros(m))

    mu_in = m + 1 if snr_to_mu else m
    Q = _repeat_matrix(n, m)
    if snr_to_mu:
        Q = np.concatenate([Q, np.zeros((n, 1))], axis=1)
    up_mu_proj = LinearParams(W=Q, b=np.zeros(n))
    assert up_mu_proj.W.shape == (n, mu_in)
    up_mu_blocks = [_init_block(n, arch.hidden, rng) for _ in range(arch.blocks)]

    lv_fc1 = LinearParams(W=0.05 * rng.standard_normal((arch.hidden, m + 1)), b=np.zeros(arch.hidden))
    lv_fc2 = LinearParams(W=0.05 * rng.standard_normal((n, arch.hidden)), b=np.zeros(n))

    return CodecParams(
        shape=shape,
        k=float(k),
        arch=arch,
        down_blocks=down_blocks,
        down_proj=down_proj,
        up_mu_proj=up_mu_proj,
        up_mu_blocks=up_mu_blocks,
        lv_fc1=lv_fc1,
        lv_fc2=lv_fc2,
        power_norm=bool(power_norm),
        snr_conditioning=bool(snr_conditioning),
        snr_to_mu=bool(snr_to_mu),
        snr_db_range=(lo, hi),
    )


def snr_feature(params: CodecParams, snr: float) -> float:
    """Normalized SNR input to the network.

    Linear SNR is converted to dB and mapped affinely so the configured
    ``snr_db_range`` covers roughly [-1, 1].  Returns 0 when conditioning
    is ablated, making the network invariant to the SNR argument.
    """
    if not params.snr_conditioning:
        return 0.0
    snr = float(snr)
    if not (math.isfinite(snr) and snr > 0.0):
        raise ValueError(f"snr must be finite and > 0, got {snr!r}")
    lo, hi = params.snr_db_range
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return (10.0 * math.log10(snr) - mid) / half


# ---------------------------------------------------------------------------
# batched forward/backward
#
# All arrays carry a leading batch axis.  Forward passes return a context
# holding every intermediate the mirrored backward pass needs.


def _lrelu(a: np.ndarray) -> np.ndarray:
    return np.where(a > 0.0, a, LRELU_SLOPE * a)


def _lrelu_grad(a: np.ndarray) -> np.ndarray:
    return np.where(a > 0.0, 1.0, LRELU_SLOPE)


def _block_forward(block: ResidualBlock, x: np.ndarray) -> tuple[np.ndarray, dict]:
    a = x @ block.fc1.W.T + block.fc1.b
    hmid = _lrelu(a)
    out = x + hmid @ block.fc2.W.T + block.fc2.b
    return out, {"x": x, "a": a, "h": hmid}


def _block_backward(
    block: ResidualBlock, ctx: dict, dout: np.ndarray
) -> tuple[np.ndarray, ResidualBlock]:
    dh = dout @ block.fc2.W
    dW2 = dout.T @ ctx["h"]
    db2 = dout.sum(axis=0)
    da = dh * _lrelu_grad(ctx["a"])
    dW1 = da.T @ ctx["x"]
    db1 = da.sum(axis=0)
    dx = dout + da @ block.fc1.W
    grads = ResidualBlock(
        fc1=LinearParams(W=dW1, b=db1), fc2=LinearParams(W=dW2, b=db2)
    )
    return dx, grads


def forward_down_batch(params: CodecParams, Y: np.ndarray) -> tuple[np.ndarray, dict]:
    """Compress a (batch, n) array; returns (batch, m) and the backward context."""
    x = Y
    blocks_ctx = []
    for block in params.down_blocks:
        x, ctx = _block_forward(block, x)
        blocks_ctx.append(ctx)
    z_raw = x @ params.down_proj.W.T + params.down_proj.b
    ctx = {"blocks": blocks_ctx, "x_proj_in": x, "z_raw": z_raw}
    if params.power_norm:
        c = np.sqrt(np.mean(z_raw * z_raw, axis=1))
        if np.any(c == 0.0):
            raise ValueError("cannot power-normalize an all-zero transmit vector")
        Z = z_raw / c[:, None]
        ctx["c"] = c
    else:
        Z = z_raw
    ctx["Z"] = Z
    return Z, ctx


def forward_up_batch(
    params: CodecParams, Zhat: np.ndarray, feat: float, eps_y: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, dict]:
    """Decode a (batch, m) array.

    Returns ``(Mu, Lv, Sy, Yhat, ctx)`` where ``Yhat = Mu + Sy * eps_y``
    and ``Lv`` is the clamped log variance.
    """
    B = Zhat.shape[0]
    feat_col = np.full((B, 1), feat)

    mu_in = np.concatenate([Zhat, feat_col], axis=1) if params.snr_to_mu else Zhat
    x = mu_in @ params.up_mu_proj.W.T + params.up_mu_proj.b
    mu_blocks_ctx = []
    for block in params.up_mu_blocks:
        x, bctx = _block_forward(block, x)
        mu_blocks_ctx.append(bctx)
    Mu = x

    lv_in = np.concatenate([Zhat, feat_col], axis=1)
    a2 = lv_in @ params.lv_fc1.W.T + params.lv_fc1.b
    h2 = _lrelu(a2)
    lv_raw = h2 @ params.lv_fc2.W.T + params.lv_fc2.b
    Lv = np.clip(lv_raw, LOGVAR_MIN, LOGVAR_MAX)
    Sy = np.exp(0.5 * Lv)
    Yhat = Mu + Sy * eps_y

    ctx = {
        "mu_in": mu_in,
        "mu_blocks": mu_blocks_ctx,
        "lv_in": lv_in,
        "a2": a2,
        "h2": h2,
        "clamp_mask": (lv_raw > LOGVAR_MIN) & (lv_raw < LOGVAR_MAX),
        "Sy": Sy,
        "eps_y": eps_y,
    }
    return Mu, Lv, Sy, Yhat, ctx


def zero_grads(params: CodecParams) -> CodecParams:
    """Parameter-shaped container of zeros (gradients accumulate into copies)."""

    def zlin(p: LinearParams) -> LinearParams:
        return LinearParams(W=np.zeros_like(p.W), b=np.zeros_like(p.b))

    def zblock(b: ResidualBlock) -> ResidualBlock:
        return ResidualBlock(fc1=zlin(b.fc1), fc2=zlin(b.fc2))

    return replace(
        params,
        down_blocks=[zblock(b) for b in params.down_blocks],
        down_proj=zlin(params.down_proj),
        up_mu_proj=zlin(params.up_mu_proj),
        up_mu_blocks=[zblock(b) for b in params.up_mu_blocks],
        lv_fc1=zlin(params.lv_fc1),
        lv_fc2=zlin(params.lv_fc2),
    )


def backward_batch(
    params: CodecParams,
    down_ctx: dict,
    up_ctx: dict,
    dMu: np.ndarray,
    dLv: np.ndarray,
) -> CodecParams:
    """Exact reverse-mode gradients of a scalar loss through the whole codec.

    ``dMu`` and ``dLv`` are the loss gradients at the decoder outputs
    (after the caller has folded in the reparameterization chain).  The
    channel noise between encoder and decoder is additive, so the decoder
    input gradient passes straight through to the encoder output.
    Returns a parameter-shaped structure of gradients.
    """
    g = zero_grads(params)
    m = params.m

    # variance head
    dlv_raw = dLv * up_ctx["clamp_mask"]
    g.lv_fc2.W[...] = dlv_raw.T @ up_ctx["h2"]
    g.lv_fc2.b[...] = dlv_raw.sum(axis=0)
    dh2 = dlv_raw @ params.lv_fc2.W
    da2 = dh2 * _lrelu_grad(up_ctx["a2"])
    g.lv_fc1.W[...] = da2.T @ up_ctx["lv_in"]
    g.lv_fc1.b[...] = da2.sum(axis=0)
    dZhat = (da2 @ params.lv_fc1.W)[:, :m]

    # mean head
    dx = dMu
    for block, bctx, gblock in zip(
        reversed(params.up_mu_blocks),
        reversed(up_ctx["mu_blocks"]),
        reversed(g.up_mu_blocks),
    ):
        dx, grads = _block_backward(block, bctx, dx)
        gblock.fc1.W[...] = grads.fc1.W
        gblock.fc1.b[...] = grads.fc1.b
        gblock.fc2.W[...] = grads.fc2.W
        gblock.fc2.b[...] = grads.fc2.b
    g.up_mu_proj.W[...] = dx.T @ up_ctx["mu_in"]
    g.up_mu_proj.b[...] = dx.sum(axis=0)
    dZhat = dZhat + (dx @ params.up_mu_proj.W)[:, :m]

    # through the additive channel noise into the encoder
    dZ = dZhat
    if params.power_norm:
        z_raw = down_ctx["z_raw"]
        c = down_ctx["c"][:, None]
        inner = np.sum(dZ * z_raw, axis=1, keepdims=True)
        dz_raw = dZ / c - z_raw * inner / (z_raw.shape[1] * c**3)
    else:
        dz_raw = dZ
    g.down_proj.W[...] = dz_raw.T @ down_ctx["x_proj_in"]
    g.down_proj.b[...] = dz_raw.sum(axis=0)
    dx = dz_raw @ params.down_proj.W
    for block, bctx, gblock in zip(
        reversed(params.down_blocks),
        reversed(down_ctx["blocks"]),
        reversed(g.down_blocks),
    ):
        dx, grads = _block_backward(block, bctx, dx)
        gblock.fc1.W[...] = grads.fc1.W
        gblock.fc1.b[...] = grads.fc1.b
        gblock.fc2.W[...] = grads.fc2.W
        gblock.fc2.b[...] = grads.fc2.b
    return g


# ---------------------------------------------------------------------------
# public single-latent operations


def _check_finite(name: str, arr: np.ndarray):
    if not np.all(np.isfinite(arr)):
        raise NumericOverflowError(name)


def downsample_with_scale(y: Latent, params: CodecParams) -> tuple[Latent, float]:
    """Compress one latent; also return the power-normalization divisor.

    The divisor is the root mean square of the raw projection output (1.0
    when normalization is disabled); the transmitted vector is the raw
    output divided by it, giving unit mean per-symbol power.  The scale is
    assumed known at the receiver.
    """
    if y.shape != params.shape:
        raise ValueError(f"latent shape {y.shape} does not match codec shape {params.shape}")
    x = y.data[None, :]
    for i, block in enumerate(params.down_blocks):
        x, _ = _block_forward(block, x)
        _check_finite(f"down_block_{i}", x)
    z_raw = x @ params.down_proj.W.T + params.down_proj.b
    _check_finite("down_proj", z_raw)
    if params.power_norm:
        c = float(np.sqrt(np.mean(z_raw * z_raw)))
        if c == 0.0:
            raise ValueError("cannot power-normalize an all-zero transmit vector")
        z = z_raw[0] / c
    else:
        c = 1.0
        z = z_raw[0]
    return Latent(data=z, shape=(params.m, 1, 1)), c


def downsample(y: Latent, params: CodecParams) -> Latent:
    """Compress one latent to the transmit vector."""
    return downsample_with_scale(y, params)[0]


def upsample(
    z_hat: Latent, snr: float, params: CodecParams, rng: np.random.Generator
) -> tuple[GaussianParams, Latent]:
    """Decode a received vector into a Gaussian and a reparameterized draw.

    Returns the elementwise Gaussian ``(mu, sigma)`` and the sample
    ``mu + sigma * eps`` with ``eps`` drawn from ``rng``.  ``snr`` is the
    linear channel SNR used for conditioning.
    """
    if z_hat.n != params.m:
        raise ValueError(f"received length {z_hat.n} does not match codec length {params.m}")
    feat = snr_feature(params, snr)
    eps_y = rng.standard_normal(params.n)
    Mu, Lv, Sy, Yhat, _ = forward_up_batch(params, z_hat.data[None, :], feat, eps_y[None, :])
    _check_finite("up_mu", Mu)
    _check_finite("up_logvar", Lv)
    q = GaussianParams(mu=Mu[0].copy(), sigma=Sy[0].copy())
    return q, Latent(data=Yhat[0], shape=params.shape)


def reparameterize(q: GaussianParams, eps: np.ndarray) -> np.ndarray:
    """Deterministic reparameterization ``mu + sigma * eps``."""
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != q.mu.shape:
        raise ValueError(f"eps shape {eps.shape} does not match mu {q.mu.shape}")
    return q.mu + q.sigma * eps


# ---------------------------------------------------------------------------
# parameter flattening and serialization


def _param_arrays(params: CodecParams) -> list[tuple[str, np.ndarray]]:
    out = []
    for i, b in enumerate(params.down_blocks):
        out += [
            (f"down_blocks_{i}_fc1_W", b.fc1.W),
            (f"down_blocks_{i}_fc1_b", b.fc1.b),
            (f"down_blocks_{i}_fc2_W", b.fc2.W),
            (f"down_blocks_{i}_fc2_b", b.fc2.b),
        ]
    out += [("down_proj_W", params.down_proj.W), ("down_proj_b", params.down_proj.b)]
    out += [("up_mu_proj_W", params.up_mu_proj.W), ("up_mu_proj_b", params.up_mu_proj.b)]
    for i, b in enumerate(params.up_mu_blocks):
        out += [
            (f"up_mu_blocks_{i}_fc1_W", b.fc1.W),
            (f"up_mu_blocks_{i}_fc1_b", b.fc1.b),
            (f"up_mu_blocks_{i}_fc2_W", b.fc2.W),
            (f"up_mu_blocks_{i}_fc2_b", b.fc2.b),
        ]
    out += [("lv_fc1_W", params.lv_fc1.W), ("lv_fc1_b", params.lv_fc1.b)]
    out += [("lv_fc2_W", params.lv_fc2.W), ("lv_fc2_b", params.lv_fc2.b)]
    return out


def params_to_vector(params: CodecParams) -> np.ndarray:
    """Flatten all trainable arrays in a fixed documented order."""
    return np.concatenate([arr.ravel() for _, arr in _param_arrays(params)])


def vector_to_params(template: CodecParams, vec: np.ndarray) -> CodecParams:
    """Rebuild parameters from a flat vector (inverse of params_to_vector)."""
    new = clone_params(template)
    offset = 0
    for _, arr in _param_arrays(new):
        size = arr.size
        arr[...] = vec[offset : offset + size].reshape(arr.shape)
        offset += size
    if offset != vec.size:
        raise ValueError(f"vector length {vec.size} does not match parameter count {offset}")
    return new


def clone_params(params: CodecParams) -> CodecParams:
    """Deep copy of the trainable state; switches are shared immutables."""

    def clin(p: LinearParams) -> LinearParams:
        return LinearParams(W=p.W.copy(), b=p.b.copy())

    def cblock(b: ResidualBlock) -> ResidualBlock:
        return ResidualBlock(fc1=clin(b.fc1), fc2=clin(b.fc2))

    return replace(
        params,
        down_blocks=[cblock(b) for b in params.down_blocks],
        down_proj=clin(params.down_proj),
        up_mu_proj=clin(params.up_mu_proj),
        up_mu_blocks=[cblock(b) for b in params.up_mu_blocks],
        lv_fc1=clin(params.lv_fc1),
        lv_fc2=clin(params.lv_fc2),
    )


def save_codec(params: CodecParams, path) -> None:
    """Serialize parameters and switches as named arrays with a layout version."""
    meta = {
        "layout_version": np.int64(LAYOUT_VERSION),
        "shape": np.asarray(params.shape, dtype=np.int64),
        "k": np.float64(params.k),
        "hidden": np.int64(params.arch.hidden),
        "blocks": np.int64(params.arch.blocks),
        "power_norm": np.bool_(params.power_norm),
        "snr_conditioning": np.bool_(params.snr_conditioning),
        "snr_to_mu": np.bool_(params.snr_to_mu),
        "snr_db_range": np.asarray(params.snr_db_range, dtype=np.float64),
    }
    arrays = {name: arr for name, arr in _param_arrays(params)}
    np.savez(path, **meta, **arrays)


def load_codec(path) -> CodecParams:
    """Reconstruct parameters written by :func:`save_codec`."""
    with np.load(path) as data:
        version = int(data["layout_version"])
        if version != LAYOUT_VERSION:
            raise ValueError(f"unsupported codec layout version {version}")
        shape = tuple(int(v) for v in data["shape"])
        arch = CodecArch(hidden=int(data["hidden"]), blocks=int(data["blocks"]))
        rng = np.random.default_rng(0)  # structure only; values overwritten below
        params = init_codec(
            shape=shape,
            k=float(data["k"]),
            arch=arch,
            rng=rng,
            power_norm=bool(data["power_norm"]),
            snr_conditioning=bool(data["snr_conditioning"]),
            snr_to_mu=bool(data["snr_to_mu"]),
            snr_db_range=tuple(float(v) for v in data["snr_db_range"]),
        )
        for name, arr in _param_arrays(params):
            stored = data[name]
            if stored.shape != arr.shape:
                raise ValueError(f"array {name} has shape {stored.shape}, expected {arr.shape}")
            arr[...] = stored
    return params
