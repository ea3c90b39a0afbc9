"""STFT engine, multichannel buffers, and separation input features.

Shape conventions (C: channels, T: frames, F: frequency bins):
    AudioBuffer.samples           C x S
    MultichannelSpectrogram.bins  C x T x F
    FeatureFrames.vectors         T x D
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile
from scipy.signal import get_window

from .errors import ConfigInvalid, ConfigMismatch

DEFAULT_SAMPLE_RATE = 16000


@dataclass(frozen=True)
class AudioBuffer:
    """Multichannel PCM audio, one row per channel, amplitudes in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 2:
            raise ValueError(f"samples must be (channels, samples), got {samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate


@dataclass(frozen=True)
class StftConfig:
    """Analysis/synthesis framing. Defaults: 32 ms frames, 50% overlap,
    square-root Hann on both sides (perfect reconstruction)."""

    frame_len: int = 512
    hop: int = 256
    window: str = "sqrt_hann"

    def __post_init__(self):
        if not 0 < self.hop <= self.frame_len:
            raise ConfigInvalid(f"need 0 < hop <= frame_len, got hop={self.hop}, frame_len={self.frame_len}")

    def analysis_window(self) -> np.ndarray:
        return _make_window(self.window, self.frame_len)

    def synthesis_window(self) -> np.ndarray:
        return _make_window(self.window, self.frame_len)

    def ola_gain(self) -> float:
        """Constant that overlap-added analysis*synthesis windows sum to.

        Raises ConfigInvalid if the sum is not constant (no perfect
        reconstruction with this window/hop pair).
        """
        prod = self.analysis_window() * self.synthesis_window()
        span = 3 * self.frame_len
        acc = np.zeros(span + self.frame_len)
        for start in range(0, span, self.hop):
            acc[start:start + self.frame_len] += prod
        interior = acc[self.frame_len:span]
        gain = float(np.median(interior))
        if gain <= 0 or np.max(np.abs(interior - gain)) > 1e-8 * gain:
            raise ConfigInvalid(
                f"window {self.window!r} with hop {self.hop} does not satisfy the overlap-add condition")
        return gain

    @property
    def n_freq(self) -> int:
        return self.frame_len // 2 + 1


def _make_window(name: str, frame_len: int) -> np.ndarray:
    if name == "sqrt_hann":
        return np.sqrt(get_window("hann", frame_len, fftbins=True))
    if name == "hann":
        return get_window("hann", frame_len, fftbins=True)
    if name == "rect":
        return np.ones(frame_len)
    raise ConfigInvalid(f"unknown window {name!r}")


@dataclass(frozen=True)
class MultichannelSpectrogram:
    """One-sided complex STFT, bins indexed (channel, frame, frequency)."""

    bins: np.ndarray
    frame_times: np.ndarray
    sample_rate: int
    frame_len: int
    hop: int

    def __post_init__(self):
        bins = np.asarray(self.bins)
        object.__setattr__(self, "bins", bins)
        object.__setattr__(self, "frame_times", np.asarray(self.frame_times, dtype=np.float64))
        if bins.ndim != 3:
            raise ValueError(f"bins must be (channel, frame, freq), got {bins.shape}")
        if bins.shape[2] != self.frame_len // 2 + 1:
            raise ValueError("n_freq must equal frame_len/2 + 1")
        if len(self.frame_times) != bins.shape[1]:
            raise ValueError("frame_times length must match frame count")
        if len(self.frame_times) > 1 and not np.all(np.diff(self.frame_times) > 0):
            raise ValueError("frame_times must be strictly increasing")

    @property
    def n_channels(self) -> int:
        return self.bins.shape[0]

    @property
    def n_frames(self) -> int:
        return self.bins.shape[1]

    @property
    def n_freq(self) -> int:
        return self.bins.shape[2]

    @property
    def frame_hop_s(self) -> float:
        return self.hop / self.sample_rate

    def freqs_hz(self) -> np.ndarray:
        return np.fft.rfftfreq(self.frame_len, 1.0 / self.sample_rate)

    def slice_frames(self, start: int, stop: int) -> "MultichannelSpectrogram":
        return MultichannelSpectrogram(
            bins=self.bins[:, start:stop],
            frame_times=self.frame_times[start:stop],
            sample_rate=self.sample_rate,
            frame_len=self.frame_len,
            hop=self.hop,
        )


def stft(audio: AudioBuffer, cfg: StftConfig | None = None) -> MultichannelSpectrogram:
    """Short-time Fourier transform of every channel.

    Frame t covers samples [t*hop, t*hop + frame_len); a trailing partial
    frame is dropped. Returns the one-sided spectrum.
    """
    cfg = cfg or StftConfig()
    cfg.ola_gain()  # raises ConfigInvalid early on a bad window pair
    x = audio.samples
    if x.shape[1] < cfg.frame_len:
        raise ConfigMismatch(
            f"need at least frame_len={cfg.frame_len} samples, got {x.shape[1]}")
    n_frames = 1 + (x.shape[1] - cfg.frame_len) // cfg.hop
    win = cfg.analysis_window()
    # C x T x frame_len view without copying
    strides = (x.strides[0], cfg.hop * x.strides[1], x.strides[1])
    frames = np.lib.stride_tricks.as_strided(
        x, shape=(x.shape[0], n_frames, cfg.frame_len), strides=strides)
    bins = np.fft.rfft(frames * win, axis=-1)
    frame_times = np.arange(n_frames) * (cfg.hop / audio.sample_rate)
    return MultichannelSpectrogram(
        bins=bins, frame_times=frame_times, sample_rate=audio.sample_rate,
        frame_len=cfg.frame_len, hop=cfg.hop)


def istft(spec: MultichannelSpectrogram, cfg: StftConfig | None = None) -> AudioBuffer:
    """Overlap-add synthesis. Output length is (n_frames-1)*hop + frame_len."""
    cfg = cfg or StftConfig()
    if spec.n_freq != cfg.n_freq or spec.frame_len != cfg.frame_len or spec.hop != cfg.hop:
        raise ConfigMismatch(
            f"spectrogram framing ({spec.frame_len}, {spec.hop}) does not match "
            f"config ({cfg.frame_len}, {cfg.hop})")
    gain = cfg.ola_gain()
    win = cfg.synthesis_window()
    frames = np.fft.irfft(spec.bins, n=cfg.frame_len, axis=-1) * win
    n_out = (spec.n_frames - 1) * cfg.hop + cfg.frame_len
    out = np.zeros((spec.n_channels, n_out))
    for t in range(spec.n_frames):
        out[:, t * cfg.hop:t * cfg.hop + cfg.frame_len] += frames[:, t]
    return AudioBuffer(samples=out / gain, sample_rate=spec.sample_rate)


@dataclass(frozen=True)
class FeatureFrames:
    """Per-frame separation features: center-channel log magnitude followed
    by the wrapped inter-channel phase differences of every other channel."""

    vectors: np.ndarray
    frame_times: np.ndarray
    n_freq: int
    center_channel: int = 0
    normalized: bool = True

    @property
    def n_frames(self) -> int:
        return self.vectors.shape[0]

    def slice_frames(self, start: int, stop: int) -> "FeatureFrames":
        return FeatureFrames(
            vectors=self.vectors[start:stop],
            frame_times=self.frame_times[start:stop],
            n_freq=self.n_freq,
            center_channel=self.center_channel,
            normalized=self.normalized,
        )


def wrap_phase(x: np.ndarray) -> np.ndarray:
    """Wrap angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x), 2.0 * np.pi)


def extract_features(
    spec: MultichannelSpectrogram,
    center_channel: int = 0,
    normalize: bool = True,
    norm_window_s: float = 4.0,
) -> FeatureFrames:
    """Build the separation input features.

    Per frame: log magnitude of the center channel, then for each other
    channel the phase difference against the center, wrapped to (-pi, pi].
    With ``normalize`` the running mean over the trailing ``norm_window_s``
    seconds is subtracted per dimension; short histories use all available
    frames.
    """
    if spec.n_channels < 2:
        raise ConfigMismatch("feature extraction needs at least 2 channels")
    center = spec.bins[center_channel]
    logmag = np.log(np.abs(center) + 1e-10)
    others = [c for c in range(spec.n_channels) if c != center_channel]
    ipd = wrap_phase(np.angle(spec.bins[others]) - np.angle(center)[None])
    # T x (F + (C-1)*F)
    vectors = np.concatenate(
        [logmag] + [ipd[i] for i in range(len(others))], axis=1)
    if normalize:
        win = max(1, int(round(norm_window_s * spec.sample_rate / spec.hop)))
        vectors = vectors - _trailing_mean(vectors, win)
    return FeatureFrames(
        vectors=vectors, frame_times=spec.frame_times, n_freq=spec.n_freq,
        center_channel=center_channel, normalized=normalize)


def _trailing_mean(x: np.ndarray, win: int) -> np.ndarray:
    """Mean over frames [max(0, t-win+1), t] for each t, per column."""
    csum = np.cumsum(x, axis=0)
    out = np.empty_like(x)
    t = np.arange(x.shape[0])
    lo = np.maximum(t - win + 1, 0)
    counts = (t - lo + 1).astype(np.float64)
    out = csum - np.where(lo[:, None] > 0, csum[lo - 1], 0.0)
    return out / counts[:, None]


def read_wav(path) -> AudioBuffer:
    """Read a PCM16 or float32 WAV file into an AudioBuffer."""
    rate, data = wavfile.read(path)
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        data = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        data = data.astype(np.float64)
    else:
        raise ConfigMismatch(f"unsupported WAV dtype {data.dtype}")
    if data.ndim == 1:
        data = data[None, :]
    else:
        data = data.T
    return AudioBuffer(samples=data, sample_rate=int(rate))


def write_wav(path, audio: AudioBuffer, dtype: str = "float32") -> None:
    """Write an AudioBuffer as multichannel WAV (PCM16 or float32)."""
    data = audio.samples.T
    if dtype == "int16":
        out = (np.clip(data, -1.0, 1.0) * 32767.0).astype(np.int16)
    elif dtype == "float32":
        out = data.astype(np.float32)
    else:
        raise ConfigInvalid(f"unsupported WAV dtype {dtype!r}")
    wavfile.write(path, audio.sample_rate, out)
