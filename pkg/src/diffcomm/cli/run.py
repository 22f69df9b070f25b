"""Seeded experiment drivers: simulation grids, training, sweeps, CSV.

Every random draw comes from a generator derived by hashing the run seed
together with the coordinates of the work item (channel type, noise
variance, trial index; or sweep parameter and value).  Cells are
therefore order-independent and individually replayable, grids can run
on a thread pool without affecting results, and repeated runs produce
byte-identical CSV files.

Float columns are written at 6 significant digits.  Each driver writes
a resolved copy of its configuration (defaults and derived quantities
filled in) next to its outputs so any artifact can be replayed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from ..channels import (
    ChannelOutput,
    ComplexVector,
    awgn_transmit,
    mimo_svd_decompose,
    mimo_transmit,
    rayleigh_transmit_mmse,
)
from ..codec import (
    CodecArch,
    CodecParams,
    compressed_length,
    downsample,
    init_codec,
    k_from_channel_count,
    load_codec,
    save_codec,
    upsample,
)
from ..diffusion import (
    AnalyticGaussianDenoiser,
    GaussianSourceModel,
    Latent,
    compensate_to_step,
    denoise_from_step,
    forward_sample,
)
from ..errors import ConfigurationError
from ..loss import LossWeights, TrainConfig, train_codec
from ..metrics import MetricReport, psnr_from_mse, ssim
from ..schedule import Schedule, build_linear_schedule, sigma2_to_step
from .config import Cell, ExperimentConfig, resolved_config

__all__ = [
    "RunResult",
    "emit_csv",
    "render_report",
    "run_simulate",
    "run_sweep",
    "run_train",
]

_SIMULATE_HEADER = ["channel", "snr_db", "sigma2", "step_u", "trials", "psnr_db", "ssim", "mse"]
_COMPARE_HEADER = [
    "channel",
    "snr_db",
    "sigma2",
    "trials",
    "psnr_adaptive_db",
    "psnr_compensate_db",
    "psnr_forward_db",
    "delta_adaptive_compensate_db",
    "delta_compensate_forward_db",
    "ci95_lo_db",
    "ci95_hi_db",
]
_TRAIN_HEADER = ["step", "l_kl", "l_mse", "l_g", "total", "eval_psnr"]
_SWEEP_HEADER = ["param", "value", "psnr_db", "ssim", "mse"]


@dataclass(frozen=True)
class RunResult:
    """A finished table: CSV header, rows, and per-cell metric reports
    (reports are omitted for comparison tables, whose rows carry paired
    deltas rather than a single metric triple)."""

    header: tuple[str, ...]
    rows: tuple[tuple, ...]
    reports: Optional[tuple[MetricReport, ...]] = None


# ---------------------------------------------------------------------------
# seeding


def _canon(part) -> str:
    if isinstance(part, float):
        return format(part, ".12g")
    return str(part)


def _derive_rng(*parts) -> np.random.Generator:
    """Generator keyed by a hash of the given coordinates."""
    key = "|".join(_canon(p) for p in parts)
    digest = hashlib.sha256(key.encode("ascii")).digest()
    return np.random.default_rng(int.from_bytes(digest[:16], "big"))


# ---------------------------------------------------------------------------
# sources


def _make_source_draw(cfg: ExperimentConfig) -> Callable[[int, np.random.Generator], Latent]:
    """Returns trial -> latent; file sources cycle in order, gaussian
    sources draw fresh from the trial generator."""
    src = cfg.source
    if src.kind == "file":
        with np.load(src.path) as archive:
            if "latents" not in archive.files:
                raise ConfigurationError("source.path", f"{src.path} has no 'latents' array")
            data = np.asarray(archive["latents"], dtype=np.float64)
        if data.ndim != 4 or data.shape[1:] != src.shape:
            raise ConfigurationError(
                "source.path",
                f"expected latents of shape (count, {src.shape[0]}, {src.shape[1]}, "
                f"{src.shape[2]}), got {data.shape}",
            )

        def draw_file(trial: int, rng: np.random.Generator) -> Latent:
            row = data[trial % data.shape[0]]
            return Latent(data=row.reshape(-1).copy(), shape=src.shape)

        return draw_file

    model = GaussianSourceModel(mean=src.m, variance=src.v)

    def draw_gaussian(trial: int, rng: np.random.Generator) -> Latent:
        return model.draw(src.shape, rng)

    return draw_gaussian


def _ssim_window(shape: tuple[int, int, int]) -> Optional[int]:
    side = min(7, shape[0], shape[1])
    if side % 2 == 0:
        side -= 1
    return side if side >= 3 else None


def _simulate_codec(cfg: ExperimentConfig, schedule: Schedule) -> Optional[CodecParams]:
    if not cfg.codec.enabled:
        return None
    k = cfg.codec_k()
    arch = CodecArch(hidden=cfg.codec.hidden, blocks=cfg.codec.blocks)
    if cfg.codec.params_path is not None:
        params = load_codec(cfg.codec.params_path)
        if params.shape != cfg.source.shape:
            raise ConfigurationError(
                "codec.params_path",
                f"stored shape {params.shape} does not match source shape {cfg.source.shape}",
            )
        if params.m != compressed_length(cfg.source.n, k):
            raise ConfigurationError(
                "codec.params_path",
                f"stored length {params.m} does not match configured compression",
            )
        return params
    return init_codec(
        cfg.source.shape,
        k,
        arch,
        _derive_rng(cfg.seed, "codec-init"),
        power_norm=cfg.codec.power_norm,
        snr_conditioning=cfg.codec.snr_conditioning,
        snr_to_mu=cfg.codec.snr_to_mu,
        snr_db_range=cfg.codec.snr_db_range,
    )


# ---------------------------------------------------------------------------
# the per-trial pipeline


def _transmit(
    cfg: ExperimentConfig,
    values: np.ndarray,
    sigma: float,
    rng: np.random.Generator,
    schedule: Schedule,
) -> ChannelOutput:
    """Send a real vector through the configured channel.

    Odd-length vectors are zero-padded by one element for the complex
    interleave; the pad is dropped again after ``to_real``.  Fading
    coefficients not pinned in the config are drawn per trial.
    """
    if values.size % 2 != 0:
        values = np.concatenate([values, [0.0]])
    z = ComplexVector.from_real(values)
    ch = cfg.channel
    if ch.type == "awgn":
        return awgn_transmit(z, sigma, rng, schedule)
    if ch.type == "rayleigh":
        h = ch.h
        if h is None:
            h = complex(rng.standard_normal(), rng.standard_normal()) / math.sqrt(2.0)
        return rayleigh_transmit_mmse(z, h, sigma, rng, schedule, convention=ch.convention)
    H = (
        rng.standard_normal((ch.M, ch.M)) + 1j * rng.standard_normal((ch.M, ch.M))
    ) / math.sqrt(2.0)
    return mimo_transmit(z, mimo_svd_decompose(H), sigma, rng, schedule)


def _stream_slices(n_real: int, streams: int) -> list[slice]:
    width = n_real // streams
    return [slice(i * width, (i + 1) * width) for i in range(streams)]


@dataclass(frozen=True)
class _TrialSetup:
    cfg: ExperimentConfig
    schedule: Schedule
    denoiser: AnalyticGaussianDenoiser
    draw: Callable[[int, np.random.Generator], Latent]
    params: Optional[CodecParams]


def _receive_base(
    setup: _TrialSetup, out: ChannelOutput, n: int, snr_nominal: float, rng: np.random.Generator
) -> np.ndarray:
    """Channel output -> latent-domain estimate (decode if compressed)."""
    received = out.received.to_real()
    if setup.params is None:
        return received[:n]
    z_hat = Latent(data=received[: setup.params.m], shape=(setup.params.m, 1, 1))
    _, decoded = upsample(z_hat, snr_nominal, setup.params, rng)
    return decoded.data


def _denoise_streams(
    setup: _TrialSetup, base: np.ndarray, out: ChannelOutput, rng: np.random.Generator
) -> np.ndarray:
    """Adaptive route: scale each stream onto its step and run the chain."""
    recon = np.empty_like(base)
    for sl, mapping in zip(_stream_slices(base.size, len(out.mappings)), out.mappings):
        y_u = Latent(data=mapping.scale * base[sl], shape=(sl.stop - sl.start, 1, 1))
        recon[sl] = denoise_from_step(y_u, mapping.step_u, setup.denoiser, setup.schedule, rng).data
    return recon


def _compensate_streams(
    setup: _TrialSetup,
    base: np.ndarray,
    out: ChannelOutput,
    t_target: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Fixed-step route: top every stream up to ``t_target`` and denoise.

    The top-up uses the noise variance each stream actually carries
    (``effective_sigma2``); the fading convention only influences which
    step the adaptive route starts from, never the physical noise level.
    """
    recon = np.empty_like(base)
    for sl, s2 in zip(_stream_slices(base.size, len(out.mappings)), out.effective_sigma2):
        s_hat = Latent(data=base[sl], shape=(sl.stop - sl.start, 1, 1))
        y_t = compensate_to_step(s_hat, s2, t_target, setup.schedule, rng)
        recon[sl] = denoise_from_step(y_t, t_target, setup.denoiser, setup.schedule, rng).data
    return recon


def _trial_metrics(
    setup: _TrialSetup, y0: Latent, recon: np.ndarray, window: Optional[int]
) -> tuple[float, Optional[float]]:
    diff = recon - y0.data
    err = float(np.mean(diff * diff))
    s = None
    if window is not None:
        s = ssim(y0, y0.with_data(recon), window=window)
    return err, s


def _run_cell(setup: _TrialSetup, cell: Cell) -> tuple:
    cfg = setup.cfg
    window = _ssim_window(cfg.source.shape)
    sigma = math.sqrt(cell.sigma2)
    snr_nominal = math.inf if cell.sigma2 == 0.0 else 1.0 / cell.sigma2
    kind = cfg.mode.kind
    n = cfg.source.n

    mses: list[float] = []
    ssims: list[float] = []
    comp_mses: list[float] = []
    fwd_mses: list[float] = []
    deltas: list[float] = []

    for trial in range(cfg.source.count):
        rng = _derive_rng(cfg.seed, cfg.channel.type, cell.sigma2, trial)
        y0 = setup.draw(trial, rng)
        transmitted = y0.data if setup.params is None else downsample(y0, setup.params).data
        out = _transmit(cfg, transmitted, sigma, rng, setup.schedule)
        base = _receive_base(setup, out, n, snr_nominal, rng)

        if kind == "adaptive":
            recon = _denoise_streams(setup, base, out, rng)
        elif kind == "fixed_step":
            recon = _compensate_streams(setup, base, out, cfg.mode.t_target, rng)
        else:
            recon = _denoise_streams(setup, base, out, rng)
            comp = _compensate_streams(setup, base, out, cfg.mode.t_target, rng)
            fwd_t = forward_sample(y0, cfg.mode.t_target, setup.schedule, rng)
            fwd = denoise_from_step(
                fwd_t, cfg.mode.t_target, setup.denoiser, setup.schedule, rng
            ).data
            comp_err = float(np.mean((comp - y0.data) ** 2))
            fwd_err = float(np.mean((fwd - y0.data) ** 2))
            comp_mses.append(comp_err)
            fwd_mses.append(fwd_err)
            deltas.append(10.0 * math.log10(fwd_err / comp_err))

        err, s = _trial_metrics(setup, y0, recon, window)
        mses.append(err)
        if s is not None:
            ssims.append(s)

    mean_mse = float(np.mean(mses))
    mean_ssim = float(np.mean(ssims)) if ssims else None

    if kind == "compare":
        comp_mse = float(np.mean(comp_mses))
        fwd_mse = float(np.mean(fwd_mses))
        p_ad = psnr_from_mse(mean_mse)
        p_comp = psnr_from_mse(comp_mse)
        p_fwd = psnr_from_mse(fwd_mse)
        d = np.asarray(deltas)
        half = 1.96 * float(np.std(d, ddof=1)) / math.sqrt(d.size) if d.size > 1 else 0.0
        center = float(np.mean(d))
        return (
            cfg.channel.type,
            cell.snr_db,
            cell.sigma2,
            cfg.source.count,
            p_ad,
            p_comp,
            p_fwd,
            p_ad - p_comp,
            p_comp - p_fwd,
            center - half,
            center + half,
        )

    if kind == "adaptive":
        try:
            step_u: Optional[int] = sigma2_to_step(setup.schedule, cell.sigma2).step_u
        except Exception:
            step_u = None
    else:
        step_u = cfg.mode.t_target
    return (
        cfg.channel.type,
        cell.snr_db,
        cell.sigma2,
        step_u,
        cfg.source.count,
        psnr_from_mse(mean_mse),
        mean_ssim,
        mean_mse,
    )


# ---------------------------------------------------------------------------
# drivers


def _cell_worker(setup: _TrialSetup, cell: Cell) -> tuple:
    try:
        return _run_cell(setup, cell)
    except Exception as exc:
        raise RuntimeError(
            f"cell channel={setup.cfg.channel.type} snr_db={cell.snr_db:.6g}: {exc}"
        ) from exc


def _map_cells(worker, items, threads: int) -> list:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, items))
    return [worker(item) for item in items]


def _write_text(path: str, text: str):
    try:
        with open(path, "w", encoding="ascii", newline="") as handle:
            handle.write(text)
    except OSError as exc:
        raise RuntimeError(f"cannot write {path}: {exc}") from exc


def _write_run_files(cfg: ExperimentConfig, out_dir: str, table, log_lines: list[str]):
    os.makedirs(out_dir, exist_ok=True)
    emit_csv(table, os.path.join(out_dir, cfg.output.csv))
    _write_text(os.path.join(out_dir, cfg.output.log), "".join(line + "\n" for line in log_lines))
    _write_text(
        os.path.join(out_dir, "resolved_config.json"),
        json.dumps(resolved_config(cfg), indent=2, sort_keys=True) + "\n",
    )


def run_simulate(cfg: ExperimentConfig, out_dir: str = ".", threads: int = 1) -> RunResult:
    """Run the (channel x SNR) grid in the configured mode.

    One CSV row per cell aggregating ``source.count`` trials.  Adaptive
    and fixed-step modes report PSNR/SSIM/MSE; compare mode runs the
    adaptive, compensate-to-target, and pure-forward routes on shared
    source and channel draws and reports the paired deltas with a 95%
    confidence interval on compensate-vs-forward.  Failures carry the
    coordinates of the offending cell.
    """
    schedule = build_linear_schedule(cfg.schedule.T, cfg.schedule.beta_start, cfg.schedule.beta_end)
    setup = _TrialSetup(
        cfg=cfg,
        schedule=schedule,
        denoiser=AnalyticGaussianDenoiser(
            GaussianSourceModel(mean=cfg.source.m, variance=cfg.source.v), schedule
        ),
        draw=_make_source_draw(cfg),
        params=_simulate_codec(cfg, schedule),
    )
    rows = _map_cells(lambda cell: _cell_worker(setup, cell), cfg.channel.cells, threads)

    header = _COMPARE_HEADER if cfg.mode.kind == "compare" else _SIMULATE_HEADER
    reports = None
    if cfg.mode.kind != "compare":
        reports = tuple(
            MetricReport(
                psnr_db=row[5],
                ssim=(row[6] if row[6] is not None else 1.0),
                mse=row[7],
                n=row[4],
            )
            for row in rows
        )
    log_lines = [f"simulate mode={cfg.mode.kind} cells={len(rows)} trials={cfg.source.count}"]
    log_lines += [
        f"cell channel={cfg.channel.type} snr_db={cell.snr_db:.6g} done"
        for cell in cfg.channel.cells
    ]
    table = (list(header), [list(r) for r in rows])
    _write_run_files(cfg, out_dir, table, log_lines)
    return RunResult(header=tuple(header), rows=tuple(tuple(r) for r in rows), reports=reports)


def _train_source(cfg: ExperimentConfig):
    if cfg.source.kind == "file":
        draw = _make_source_draw(cfg)
        rng = _derive_rng(cfg.seed, "dataset")
        return [draw(i, rng) for i in range(cfg.source.count)]
    return GaussianSourceModel(mean=cfg.source.m, variance=cfg.source.v)


def run_train(cfg: ExperimentConfig, out_dir: str = ".") -> tuple[CodecParams, RunResult]:
    """Train the codec at the configured operating point.

    Writes the per-step loss table to ``output.csv``, the trained
    parameters to ``output.params``, and the resolved config.  Returns
    the parameters and the table.
    """
    if cfg.codec.C is None and cfg.codec.k is None:
        raise ConfigurationError("codec.C, codec.k", "training needs a compression setting")
    schedule = build_linear_schedule(cfg.schedule.T, cfg.schedule.beta_start, cfg.schedule.beta_end)
    params0 = _simulate_codec_required(cfg, schedule)
    sigma = math.sqrt(10.0 ** (-cfg.train.snr_db / 10.0))
    tcfg = TrainConfig(
        steps=cfg.train.steps,
        batch=cfg.train.batch,
        lr=cfg.train.lr,
        momentum=cfg.train.momentum,
        eval_every=cfg.train.eval_every,
        holdout=cfg.train.holdout,
        common_noise=cfg.train.common_noise,
    )
    weights = LossWeights(lam=cfg.loss.lam, gamma=cfg.loss.gamma)
    params, records = train_codec(
        _train_source(cfg), sigma, params0, weights, tcfg, _derive_rng(cfg.seed, "train")
    )

    rows = [
        [rec.step, rec.breakdown.l_kl, rec.breakdown.l_mse, rec.breakdown.l_g,
         rec.breakdown.total, rec.eval_psnr]
        for rec in records
    ]
    table = (list(_TRAIN_HEADER), rows)
    final = next((r.eval_psnr for r in reversed(records) if r.eval_psnr is not None), None)
    log_lines = [
        f"train steps={cfg.train.steps} batch={cfg.train.batch} snr_db={cfg.train.snr_db:.6g}",
        f"final eval_psnr={'n/a' if final is None else format(final, '.6g')}",
    ]
    os.makedirs(out_dir, exist_ok=True)
    save_codec(params, os.path.join(out_dir, cfg.output.params))
    _write_run_files(cfg, out_dir, table, log_lines)
    return params, RunResult(header=tuple(_TRAIN_HEADER), rows=tuple(tuple(r) for r in rows))


def _simulate_codec_required(cfg: ExperimentConfig, schedule: Schedule) -> CodecParams:
    params = _simulate_codec(
        cfg if cfg.codec.enabled else _enable_codec(cfg), schedule
    )
    assert params is not None
    return params


def _enable_codec(cfg: ExperimentConfig) -> ExperimentConfig:
    return replace(cfg, codec=replace(cfg.codec, enabled=True))


def run_sweep(cfg: ExperimentConfig, out_dir: str = ".", threads: int = 1) -> RunResult:
    """Train and evaluate one codec per hyperparameter grid value.

    Each grid point is seeded by (seed, parameter name, value), so
    reordering the grid cannot change any row.  Evaluation transmits
    ``sweep.trials`` latents end to end (codec, channel at the training
    SNR, adaptive receive, denoise) and reports PSNR/SSIM/MSE.
    """
    if cfg.sweep is None:
        raise ConfigurationError("sweep", "section is required for a sweep run")
    if cfg.sweep.param != "C" and cfg.codec.C is None and cfg.codec.k is None:
        raise ConfigurationError("codec.C, codec.k", "sweep training needs a compression setting")
    if cfg.channel.type == "mimo":
        raise ConfigurationError("channel.type", "sweep evaluation does not support mimo")

    schedule = build_linear_schedule(cfg.schedule.T, cfg.schedule.beta_start, cfg.schedule.beta_end)
    model = GaussianSourceModel(mean=cfg.source.m, variance=cfg.source.v)
    denoiser = AnalyticGaussianDenoiser(model, schedule)
    steps = cfg.train.steps if cfg.sweep.steps is None else cfg.sweep.steps
    trials = cfg.source.count if cfg.sweep.trials is None else cfg.sweep.trials
    sigma2 = 10.0 ** (-cfg.train.snr_db / 10.0)
    sigma = math.sqrt(sigma2)
    snr = 1.0 / sigma2
    window = _ssim_window(cfg.source.shape)
    arch = CodecArch(hidden=cfg.codec.hidden, blocks=cfg.codec.blocks)

    def run_point(value: float) -> list:
        try:
            lam, gamma = cfg.loss.lam, cfg.loss.gamma
            if cfg.sweep.param == "lambda":
                lam = value
            elif cfg.sweep.param == "gamma":
                gamma = value
            if cfg.sweep.param == "C":
                k = k_from_channel_count(int(value), cfg.source.n)
            else:
                k = cfg.codec_k()
            rng = _derive_rng(cfg.seed, "sweep", cfg.sweep.param, value)
            params0 = init_codec(
                cfg.source.shape, k, arch, rng,
                power_norm=cfg.codec.power_norm,
                snr_conditioning=cfg.codec.snr_conditioning,
                snr_to_mu=cfg.codec.snr_to_mu,
                snr_db_range=cfg.codec.snr_db_range,
            )
            tcfg = TrainConfig(
                steps=steps,
                batch=cfg.train.batch,
                lr=cfg.train.lr,
                momentum=cfg.train.momentum,
                eval_every=max(1, steps),
                holdout=cfg.train.holdout,
                common_noise=cfg.train.common_noise,
            )
            params, _ = train_codec(model, sigma, params0, LossWeights(lam, gamma), tcfg, rng)

            mses, ssims = [], []
            setup = _TrialSetup(
                cfg=cfg, schedule=schedule, denoiser=denoiser,
                draw=lambda trial, r: model.draw(cfg.source.shape, r), params=params,
            )
            for trial in range(trials):
                trng = _derive_rng(cfg.seed, "sweep-eval", cfg.sweep.param, value, trial)
                y0 = model.draw(cfg.source.shape, trng)
                z = downsample(y0, params).data
                out = _transmit(cfg, z, sigma, trng, schedule)
                base = _receive_base(setup, out, cfg.source.n, snr, trng)
                recon = _denoise_streams(setup, base, out, trng)
                err, s = _trial_metrics(setup, y0, recon, window)
                mses.append(err)
                if s is not None:
                    ssims.append(s)
            mean_mse = float(np.mean(mses))
            mean_ssim = float(np.mean(ssims)) if ssims else None
            return [cfg.sweep.param, value, psnr_from_mse(mean_mse), mean_ssim, mean_mse]
        except Exception as exc:
            raise RuntimeError(f"grid {cfg.sweep.param}={value:.6g}: {exc}") from exc

    rows = _map_cells(run_point, cfg.sweep.values, threads)
    table = (list(_SWEEP_HEADER), rows)
    log_lines = [
        f"sweep param={cfg.sweep.param} points={len(rows)} steps={steps} trials={trials}"
    ]
    _write_run_files(cfg, out_dir, table, log_lines)
    reports = tuple(
        MetricReport(
            psnr_db=row[2], ssim=(row[3] if row[3] is not None else 1.0), mse=row[4], n=trials
        )
        for row in rows
    )
    return RunResult(
        header=tuple(_SWEEP_HEADER), rows=tuple(tuple(r) for r in rows), reports=reports
    )


# ---------------------------------------------------------------------------
# CSV


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".6g")


def emit_csv(table: tuple[list, list], path: str) -> None:
    """Write (header, rows) as CSV: floats at 6 significant digits,
    deterministic order, header-only file for an empty table."""
    header, rows = table
    buf = io.StringIO()
    buf.write(",".join(str(h) for h in header) + "\n")
    for row in rows:
        buf.write(",".join(_format_cell(c) for c in row) + "\n")
    _write_text(path, buf.getvalue())


def render_report(path: str) -> str:
    """Render a CSV file as an aligned text table.

    Numeric columns are right-aligned, text columns left-aligned, with a
    dashed rule under the header.
    """
    try:
        with open(path, "r", encoding="ascii", newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise RuntimeError(f"cannot read {path}: {exc}") from exc
    if not rows:
        return ""

    def is_number(cell: str) -> bool:
        if cell == "":
            return False
        try:
            float(cell)
            return True
        except ValueError:
            return False

    cols = max(len(r) for r in rows)
    grid = [r + [""] * (cols - len(r)) for r in rows]
    widths = [max(len(row[i]) for row in grid) for i in range(cols)]
    numeric = [
        all(is_number(row[i]) or row[i] == "" for row in grid[1:]) and len(grid) > 1
        for i in range(cols)
    ]

    def fmt_row(row: list[str]) -> str:
        parts = []
        for i, cell in enumerate(row):
            parts.append(cell.rjust(widths[i]) if numeric[i] else cell.ljust(widths[i]))
        return "  ".join(parts).rstrip()

    lines = [fmt_row(grid[0]), "  ".join("-" * w for w in widths)]
    lines += [fmt_row(row) for row in grid[1:]]
    return "\n".join(lines) + "\n"
