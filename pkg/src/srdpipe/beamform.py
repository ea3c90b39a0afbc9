"""Mask-based MVDR beamforming with dual-window SCM estimation.

Per output channel the target SCM comes from a short trailing window of
that channel's speech mask, the noise SCM from a long trailing window of
the noise mask, and the interference SCM is the noise SCM plus every other
channel's target SCM. Weights refresh periodically; each refresh block is
beamformed with weights whose estimation windows end at the block's end,
so the stream is causal at block granularity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .css import TfMaskSet
from .errors import InsufficientMaskMass, NumericalFailure
from .signal_core import AudioBuffer, MultichannelSpectrogram, StftConfig, istft


@dataclass
class Scm:
    """Per-frequency spatial covariance, F x C x C Hermitian."""

    matrix: np.ndarray
    mask_mass: float

    def __add__(self, other: "Scm") -> "Scm":
        return Scm(self.matrix + other.matrix, self.mask_mass + other.mask_mass)


@dataclass(frozen=True)
class BeamformConfig:
    noise_window_s: float = 10.0
    target_window_s: float = 2.4
    refresh_s: float = 0.8
    diagonal_load: float = 1e-3
    reference_channel: int = 0
    mask_mass_threshold: float = 1e-3

    def __post_init__(self):
        if self.refresh_s > self.target_window_s:
            raise ValueError("refresh must not exceed the target window")


def estimate_scm(spec: MultichannelSpectrogram, mask: np.ndarray,
                 threshold: float = 1e-3) -> Scm:
    """Mask-weighted spatial covariance of a frame window.

    Phi(f) = sum_t m[t,f] y[t,f] y[t,f]^H / sum_t m[t,f]. Raises
    InsufficientMaskMass when the total mask weight is below threshold
    (caller keeps its previous estimate).
    """
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != spec.bins.shape[1:]:
        raise ValueError(f"mask shape {mask.shape} does not match frames {spec.bins.shape[1:]}")
    mass = float(mask.sum())
    if mass < threshold:
        raise InsufficientMaskMass(f"mask mass {mass:.2e} below {threshold:.2e}")
    y = np.transpose(spec.bins, (2, 0, 1))            # F x C x T
    num = (y * mask.T[:, None, :]) @ np.conj(np.swapaxes(y, 1, 2))
    den = np.maximum(mask.sum(axis=0), 1e-12)
    mat = num / den[:, None, None]
    mat = 0.5 * (mat + np.conj(np.swapaxes(mat, -1, -2)))
    return Scm(matrix=mat, mask_mass=mass)


def mvdr_weights(target: Scm, interference: Scm,
                 cfg: BeamformConfig | None = None) -> np.ndarray:
    """Per-frequency MVDR weights, shape F x C.

    w(f) = (Phi_v^{-1} Phi_s / trace(Phi_v^{-1} Phi_s)) e_ref, after
    diagonal-loading the interference SCM relative to its trace. Output is
    taken as w^H y. Frequencies whose trace term is (near) zero get zero
    weights; if every frequency is degenerate the target is absent and
    NumericalFailure is raised so the caller can zero-fill the period.
    """
    cfg = cfg or BeamformConfig()
    phi_v = interference.matrix
    n_chan = phi_v.shape[-1]
    load = cfg.diagonal_load * np.trace(phi_v, axis1=-2, axis2=-1).real / n_chan
    eye = np.eye(n_chan)
    phi_v = phi_v + (load[:, None, None] + 1e-12) * eye
    try:
        num = np.linalg.solve(phi_v, target.matrix)
    except np.linalg.LinAlgError as e:
        raise NumericalFailure(f"interference SCM not invertible: {e}") from e
    tr = np.trace(num, axis1=-2, axis2=-1).real
    ok = tr > 1e-12
    if not ok.any():
        raise NumericalFailure("target SCM has no power at any frequency")
    weights = np.zeros((phi_v.shape[0], n_chan), dtype=complex)
    weights[ok] = num[ok][:, :, cfg.reference_channel] / tr[ok, None]
    return weights


def apply_weights(weights: np.ndarray, spec_bins: np.ndarray) -> np.ndarray:
    """w^H y per TF bin: weights F x C, bins C x T x F -> T x F."""
    return np.einsum("fc,ctf->tf", weights.conj(), spec_bins)


@dataclass
class BeamformResult:
    outputs: list[AudioBuffer]
    output_bins: np.ndarray            # N x T x F enhanced spectra
    flagged_periods: list[tuple[int, int, int]]  # (channel, frame_lo, frame_hi)


def run_beamformer(spec: MultichannelSpectrogram, masks: TfMaskSet,
                   cfg: BeamformConfig | None = None,
                   stft_cfg: StftConfig | None = None) -> BeamformResult:
    """Beamform every output channel across the stream.

    Weights refresh every refresh_s from trailing mask windows ending at
    the current block's end. Channels whose target never had mask mass, or
    whose solve degenerates, emit zeros for the block (flagged).
    """
    cfg = cfg or BeamformConfig()
    stft_cfg = stft_cfg or StftConfig(frame_len=spec.frame_len, hop=spec.hop)
    if masks.segment_span != (0, spec.n_frames):
        raise ValueError("mask stream must cover the whole spectrogram")
    n_out = masks.n_outputs
    hop_s = spec.frame_hop_s
    refresh_f = max(1, int(round(cfg.refresh_s / hop_s)))
    target_f = max(1, int(round(cfg.target_window_s / hop_s)))
    noise_f = max(1, int(round(cfg.noise_window_s / hop_s)))

    total = spec.n_frames
    out_bins = np.zeros((n_out, total, spec.n_freq), dtype=complex)
    flagged: list[tuple[int, int, int]] = []
    noise_scm: Scm | None = None
    target_scms: list[Scm | None] = [None] * n_out

    for lo in range(0, total, refresh_f):
        hi = min(lo + refresh_f, total)
        n_lo, t_lo = max(0, hi - noise_f), max(0, hi - target_f)
        try:
            noise_scm = estimate_scm(spec.slice_frames(n_lo, hi),
                                     masks.noise_mask[n_lo:hi],
                                     cfg.mask_mass_threshold)
        except InsufficientMaskMass:
            pass  # keep previous
        win = spec.slice_frames(t_lo, hi)
        for n in range(n_out):
            try:
                target_scms[n] = estimate_scm(win, masks.speech_masks[n, t_lo:hi],
                                              cfg.mask_mass_threshold)
            except InsufficientMaskMass:
                pass
        for n in range(n_out):
            target = target_scms[n]
            if target is None:
                flagged.append((n, lo, hi))
                continue
            parts = [s for j, s in enumerate(target_scms) if j != n and s is not None]
            if noise_scm is not None:
                parts.append(noise_scm)
            if parts:
                interference = parts[0]
                for p in parts[1:]:
                    interference = interference + p
            else:
                interference = Scm(np.zeros_like(target.matrix), 0.0)
            try:
                w = mvdr_weights(target, interference, cfg)
            except NumericalFailure:
                flagged.append((n, lo, hi))
                continue
            out_bins[n, lo:hi] = apply_weights(w, spec.bins[:, lo:hi])

    outputs = []
    for n in range(n_out):
        mono = MultichannelSpectrogram(
            bins=out_bins[n][None], frame_times=spec.frame_times,
            sample_rate=spec.sample_rate, frame_len=spec.frame_len, hop=spec.hop)
        outputs.append(istft(mono, stft_cfg))
    return BeamformResult(outputs=outputs, output_bins=out_bins,
                          flagged_periods=flagged)


def si_snr(estimate: np.ndarray, reference: np.ndarray) -> float:
    """Scale-invariant signal-to-noise ratio in dB."""
    est = np.asarray(estimate, dtype=np.float64).ravel()
    ref = np.asarray(reference, dtype=np.float64).ravel()
    n = min(len(est), len(ref))
    est, ref = est[:n] - est[:n].mean(), ref[:n] - ref[:n].mean()
    denom = float(ref @ ref)
    if denom < 1e-20:
        return -np.inf
    proj = (est @ ref) / denom * ref
    noise = est - proj
    return float(10.0 * np.log10((proj @ proj) / max(noise @ noise, 1e-20)))
