"""Sound source localization over an azimuth grid.

Mask-weighted direction log-likelihoods use the complex angular central
Gaussian model on magnitude-normalized observation vectors, evaluated
against far-field plane-wave steering vectors. A face tracklet conditions
the likelihood through a uniform direction window centered on the face.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import EmptyWindow
from .signal_core import MultichannelSpectrogram

SPEED_OF_SOUND = 343.0


@dataclass(frozen=True)
class ArrayGeometry:
    """Microphone positions in the device frame, meters.

    Default: one center microphone at the origin plus six on a circle of
    radius 4.25 cm with 60 degree spacing (mic 1 on the +x axis).
    """

    positions: np.ndarray = None
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        pos = self.positions
        if pos is None:
            pos = circular_array_positions()
        pos = np.asarray(pos, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"positions must be (n_mics, 3), got {pos.shape}")
        object.__setattr__(self, "positions", pos)

    @property
    def n_mics(self) -> int:
        return self.positions.shape[0]

    def delays_s(self, azimuth_deg: float, elevation_deg: float = 0.0) -> np.ndarray:
        """Arrival-time offsets (seconds) per mic for a far-field plane wave
        from the given direction, relative to the origin. Mics closer to the
        source receive earlier (negative delay)."""
        u = unit_vector(azimuth_deg, elevation_deg)
        return -(self.positions @ u) / self.speed_of_sound


def circular_array_positions(radius: float = 0.0425, n_perimeter: int = 6,
                             center: bool = True) -> np.ndarray:
    angles = np.arange(n_perimeter) * (2.0 * np.pi / n_perimeter)
    ring = np.stack([radius * np.cos(angles), radius * np.sin(angles),
                     np.zeros(n_perimeter)], axis=1)
    if center:
        return np.vstack([np.zeros((1, 3)), ring])
    return ring


def unit_vector(azimuth_deg: float, elevation_deg: float = 0.0) -> np.ndarray:
    az = np.deg2rad(azimuth_deg)
    el = np.deg2rad(elevation_deg)
    return np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])


def wrap_degrees(x):
    """Wrap angle differences to [-180, 180)."""
    return np.mod(np.asarray(x, dtype=np.float64) + 180.0, 360.0) - 180.0


@dataclass(frozen=True)
class SteeringGrid:
    """Unit-norm plane-wave steering vectors on a uniform azimuth grid.

    vectors: F x n_azimuths x n_mics, complex.
    """

    azimuths_deg: np.ndarray
    vectors: np.ndarray

    @property
    def n_azimuths(self) -> int:
        return len(self.azimuths_deg)

    @property
    def step_deg(self) -> float:
        return 360.0 / self.n_azimuths

    @classmethod
    def build(cls, geometry: ArrayGeometry, freqs_hz: np.ndarray,
              step_deg: float = 5.0) -> "SteeringGrid":
        azimuths = np.arange(0.0, 360.0, step_deg)
        # delays: n_az x n_mics
        delays = np.stack([geometry.delays_s(a) for a in azimuths])
        # phase e^{-j 2 pi f tau}: mic receiving earlier leads in phase
        phase = np.exp(-2j * np.pi * np.asarray(freqs_hz)[:, None, None] * delays[None])
        return cls(azimuths_deg=azimuths, vectors=phase / np.sqrt(geometry.n_mics))


@dataclass(frozen=True)
class SslConfig:
    prior_width_deg: float = 25.0
    epsilon: float = 0.01

    def __post_init__(self):
        if self.prior_width_deg <= 0:
            raise ValueError("prior_width_deg must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def per_frame_loglik(
    spec: MultichannelSpectrogram,
    mask: np.ndarray,
    grid: SteeringGrid,
    cfg: SslConfig | None = None,
    block: int = 64,
) -> np.ndarray:
    """Direction log-likelihood of every frame, shape T x n_azimuths.

    Per frame t: -sum_f m[t,f] * log(1 - |z^H h|^2 / (1 + eps)) with z the
    magnitude-normalized observation. Frames with negligible energy
    contribute zero.

    Arguments:
        spec: C x T x F observation
        mask: T x F weights in [0, 1]
        grid: steering vectors on the evaluation frequencies
    """
    cfg = cfg or SslConfig()
    y = np.transpose(spec.bins, (2, 0, 1))  # F x C x T
    norms = np.linalg.norm(y, axis=1, keepdims=True)
    z = np.where(norms > 1e-8, y / np.maximum(norms, 1e-30), 0.0)
    mask = np.asarray(mask, dtype=np.float64)
    n_frames = y.shape[2]
    out = np.empty((n_frames, grid.n_azimuths))
    scale = 1.0 / (1.0 + cfg.epsilon)
    for start in range(0, n_frames, block):
        zt = np.conj(z[:, :, start:start + block])
        # |z^H h|^2 per (f, azimuth, t)
        cor = grid.vectors @ zt
        power = np.minimum((cor * cor.conj()).real, 1.0)
        out[start:start + block] = -np.einsum(
            "tf,fot->to", mask[start:start + block], np.log1p(-power * scale))
    return out


def ssl_loglik(
    spec: MultichannelSpectrogram,
    mask: np.ndarray,
    grid: SteeringGrid,
    cfg: SslConfig | None = None,
) -> np.ndarray:
    """Segment-level direction log-likelihood vector, shape n_azimuths."""
    return per_frame_loglik(spec, mask, grid, cfg).sum(axis=0)


def tracklet_window(grid: SteeringGrid, tracklet_azimuth_deg: float,
                    cfg: SslConfig) -> np.ndarray:
    """Boolean mask of grid points within +-prior_width/2 of the tracklet."""
    half = cfg.prior_width_deg / 2.0
    d = np.abs(wrap_degrees(grid.azimuths_deg - tracklet_azimuth_deg))
    return d <= half + 1e-9


def tracklet_ssl_likelihood(
    loglik: np.ndarray,
    tracklet_azimuth_deg: float,
    grid: SteeringGrid,
    cfg: SslConfig | None = None,
) -> float:
    """Tracklet-conditioned direction log-likelihood.

    Uniformly averages the per-azimuth likelihood over the grid points
    inside the tracklet's direction window (log-sum-exp minus log count).
    """
    cfg = cfg or SslConfig()
    inside = tracklet_window(grid, tracklet_azimuth_deg, cfg)
    k = int(np.count_nonzero(inside))
    if k == 0:
        raise EmptyWindow(
            f"no grid point within {cfg.prior_width_deg / 2:.1f} deg of "
            f"{tracklet_azimuth_deg:.1f} deg (grid step {grid.step_deg:.1f})")
    return float(logsumexp(np.asarray(loglik)[inside]) - np.log(k))
