"""Streaming multichannel dereverberation (weighted prediction error).

Per frequency, late reverberation is linearly predicted from delayed past
frames and subtracted. The stream is processed in blocks: filters are
re-estimated on each completed block (iteratively reweighted least squares
with power-spectrum weights) and applied to the frames of the following
block, so no frame waits on future input. The first block passes through
unchanged while the filters warm up.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure
from .signal_core import MultichannelSpectrogram


@dataclass(frozen=True)
class WpeConfig:
    prediction_delay: int = 2      # frames
    filter_taps: int = 10          # frames per frequency
    iterations: int = 2
    regularization: float = 1e-4
    block_len_s: float = 4.0

    def __post_init__(self):
        if self.prediction_delay < 1:
            raise ValueError("prediction_delay must be >= 1")
        if self.filter_taps < 0:
            raise ValueError("filter_taps must be >= 0 (0 bypasses)")


def _tap_stack(x: np.ndarray, lo: int, hi: int, delay: int, taps: int) -> np.ndarray:
    """Delayed tap tensor for frames [lo, hi): F x (C*taps) x (hi-lo).

    x is the full zero-history stream (F x C x T); taps reaching before
    frame 0 read zeros.
    """
    n_freq, n_chan, _ = x.shape
    width = hi - lo
    out = np.zeros((n_freq, n_chan * taps, width), dtype=x.dtype)
    for k in range(taps):
        src_lo, src_hi = lo - delay - k, hi - delay - k
        a, b = max(src_lo, 0), max(src_hi, 0)
        if b <= a:
            continue
        dst_a = a - src_lo
        out[:, k * n_chan:(k + 1) * n_chan, dst_a:dst_a + (b - a)] = x[:, :, a:b]
    return out


def _solve_filters(x_block: np.ndarray, taps_block: np.ndarray,
                   cfg: WpeConfig) -> np.ndarray:
    """Estimate prediction filters on one block, F x (C*taps) x C."""
    n_freq, n_chan, _ = x_block.shape
    dim = taps_block.shape[1]
    taps_h = np.conj(np.swapaxes(taps_block, 1, 2))  # F x T x DK
    x_h = np.conj(np.swapaxes(x_block, 1, 2))        # F x T x C
    est = x_block
    filters = np.zeros((n_freq, dim, n_chan), dtype=x_block.dtype)
    for _ in range(max(1, cfg.iterations)):
        power = np.maximum(np.mean(np.abs(est) ** 2, axis=1), 1e-10)  # F x T
        weighted = taps_block / power[:, None, :]
        corr = weighted @ taps_h
        cross = weighted @ x_h
        load = (cfg.regularization * np.trace(corr, axis1=-2, axis2=-1).real / dim) \
            .astype(corr.real.dtype)
        eye = np.eye(dim, dtype=corr.real.dtype)
        boost = 1.0
        for attempt in range(4):
            try:
                filters = np.linalg.solve(
                    corr + (boost * load[:, None, None] + 1e-12) * eye, cross)
                break
            except np.linalg.LinAlgError:
                boost *= 100.0
                if attempt == 3:
                    raise NumericalFailure(
                        "normal equations stayed singular after loading boosts")
        est = x_block - apply_filters(filters, taps_block)
    return filters


def apply_filters(filters: np.ndarray, taps_block: np.ndarray) -> np.ndarray:
    """Prediction G^H x_tap per frame: F x C x T."""
    return np.conj(np.swapaxes(filters, 1, 2)) @ taps_block


def dereverberate(spec: MultichannelSpectrogram,
                  cfg: WpeConfig | None = None) -> MultichannelSpectrogram:
    """Block-online dereverberation of the whole stream.

    Block b's output subtracts the prediction made by the filters fitted on
    block b-1 (block 0 passes through). filter_taps = 0 returns the input
    unchanged.
    """
    cfg = cfg or WpeConfig()
    if cfg.filter_taps == 0:
        return spec
    # single-precision internals: the prediction residual is far above the
    # float32 noise floor and the linear solves carry diagonal loading
    x = np.transpose(spec.bins, (2, 0, 1)).astype(np.complex64)  # F x C x T
    total = x.shape[2]
    block_f = max(cfg.filter_taps + cfg.prediction_delay + 2,
                  int(round(cfg.block_len_s / spec.frame_hop_s)))
    out = x.copy()
    filters = None
    for lo in range(0, total, block_f):
        hi = min(lo + block_f, total)
        taps_block = _tap_stack(x, lo, hi, cfg.prediction_delay, cfg.filter_taps)
        if filters is not None:
            out[:, :, lo:hi] = x[:, :, lo:hi] - apply_filters(filters, taps_block)
        filters = _solve_filters(x[:, :, lo:hi], taps_block, cfg)
    return MultichannelSpectrogram(
        bins=np.transpose(out, (1, 2, 0)).astype(np.complex128),
        frame_times=spec.frame_times, sample_rate=spec.sample_rate,
        frame_len=spec.frame_len, hop=spec.hop)


def direct_to_reverberant_db(signal: np.ndarray, direct: np.ndarray) -> float:
    """DRR of a signal against its known direct-path component.

    Projects the signal onto the direct reference; the ratio of projected
    to residual energy is the DRR.
    """
    y = np.asarray(signal, dtype=np.float64).ravel()
    d = np.asarray(direct, dtype=np.float64).ravel()
    n = min(len(y), len(d))
    y, d = y[:n], d[:n]
    denom = float(d @ d)
    if denom < 1e-20:
        return -np.inf
    alpha = float(y @ d) / denom
    resid = y - alpha * d
    return float(10.0 * np.log10((alpha * alpha * denom) / max(resid @ resid, 1e-20)))
