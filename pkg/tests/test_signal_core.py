import numpy as np
import pytest

from srdpipe.errors import ConfigInvalid, ConfigMismatch
from srdpipe.signal_core import (AudioBuffer, StftConfig, MultichannelSpectrogram,
                                 extract_features, istft, read_wav, stft,
                                 wrap_phase, write_wav)


@pytest.fixture
def cfg():
    return StftConfig()


def test_sine_peak_bin(cfg):
    t = np.arange(16000) / 16000.0
    audio = AudioBuffer(np.sin(2 * np.pi * 1000 * t)[None, :])
    spec = stft(audio, cfg)
    mag = np.abs(spec.bins[0]).mean(axis=0)
    assert mag.argmax() == 32  # 1000 * 512 / 16000


def test_zero_input_zero_spectrogram(cfg):
    spec = stft(AudioBuffer(np.zeros((3, 8000))), cfg)
    assert np.all(spec.bins == 0)


def test_zero_spectrogram_zero_audio(cfg):
    spec = stft(AudioBuffer(np.zeros((2, 4096))), cfg)
    out = istft(spec, cfg)
    assert np.all(out.samples == 0)


@pytest.mark.parametrize("n_samples", [4096, 5000, 16000])
def test_roundtrip_interior(cfg, n_samples):
    rng = np.random.default_rng(n_samples)
    x = rng.uniform(-0.9, 0.9, size=(2, n_samples))
    y = istft(stft(AudioBuffer(x), cfg), cfg)
    n = y.n_samples
    edge = cfg.frame_len - cfg.hop
    a = x[:, :n][:, edge:n - edge]
    b = y.samples[:, edge:n - edge]
    assert np.linalg.norm(b - a) / np.linalg.norm(a) < 1e-6


def test_roundtrip_quarter_hop():
    cfg = StftConfig(frame_len=512, hop=128)
    rng = np.random.default_rng(1)
    x = rng.standard_normal((1, 8192)) * 0.3
    y = istft(stft(AudioBuffer(x), cfg), cfg)
    edge = cfg.frame_len
    n = y.n_samples
    a, b = x[:, edge:n - edge], y.samples[:, edge:n - edge]
    assert np.linalg.norm(b - a) / np.linalg.norm(a) < 1e-6


def test_linearity(cfg):
    rng = np.random.default_rng(2)
    x = rng.standard_normal((1, 6000))
    y = rng.standard_normal((1, 6000))
    lhs = stft(AudioBuffer(2.0 * x - 3.0 * y), cfg).bins
    rhs = 2.0 * stft(AudioBuffer(x), cfg).bins - 3.0 * stft(AudioBuffer(y), cfg).bins
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_unit_impulse_spectrum_synthesis(cfg):
    bins = np.ones((1, 1, cfg.n_freq), dtype=complex)
    spec = MultichannelSpectrogram(bins=bins, frame_times=np.array([0.0]),
                                   sample_rate=16000, frame_len=cfg.frame_len,
                                   hop=cfg.hop)
    out = istft(spec, cfg)
    expected = np.fft.irfft(bins[0, 0], n=cfg.frame_len) * cfg.synthesis_window() / cfg.ola_gain()
    assert np.allclose(out.samples[0], expected)


def test_bad_window_pair_rejected():
    with pytest.raises(ConfigInvalid):
        stft(AudioBuffer(np.zeros((1, 2048))), StftConfig(frame_len=512, hop=200))
    with pytest.raises(ConfigInvalid):
        StftConfig(frame_len=256, hop=512)


def test_istft_dimension_mismatch(cfg):
    spec = stft(AudioBuffer(np.zeros((1, 4096))), cfg)
    with pytest.raises(ConfigMismatch):
        istft(spec, StftConfig(frame_len=256, hop=128))


def test_frame_times_strictly_increasing(cfg):
    spec = stft(AudioBuffer(np.zeros((1, 16000))), cfg)
    assert np.all(np.diff(spec.frame_times) > 0)
    assert spec.n_freq == cfg.frame_len // 2 + 1


def test_wrap_phase_range():
    x = np.array([-np.pi, np.pi, 0.0, 3.5, -3.5, 7.0])
    w = wrap_phase(x)
    assert np.all(w > -np.pi - 1e-12)
    assert np.all(w <= np.pi + 1e-12)
    assert w[0] == pytest.approx(np.pi)  # -pi maps to +pi
    assert np.allclose(np.exp(1j * w), np.exp(1j * x))


def test_identical_channels_zero_ipd(cfg):
    rng = np.random.default_rng(3)
    x = rng.standard_normal(8000)
    spec = stft(AudioBuffer(np.stack([x, x, x])), cfg)
    feats = extract_features(spec, normalize=False)
    ipd = feats.vectors[:, cfg.n_freq:]
    assert np.max(np.abs(ipd)) < 1e-9


def test_delayed_channel_ipd_slope(cfg):
    rng = np.random.default_rng(4)
    d = 3
    x = rng.standard_normal(16000)
    delayed = np.concatenate([np.zeros(d), x[:-d]])
    spec = stft(AudioBuffer(np.stack([x, delayed])), cfg)
    feats = extract_features(spec, normalize=False)
    ipd = feats.vectors[:, cfg.n_freq:2 * cfg.n_freq]
    mag = np.abs(spec.bins[0])
    k = np.arange(cfg.n_freq)
    expected = wrap_phase(-2.0 * np.pi * k * d / cfg.frame_len)
    # circular mean over frames, weighted by energy; skip wrap-adjacent bins
    mean_ipd = np.angle(np.sum(mag ** 2 * np.exp(1j * ipd), axis=0))
    usable = np.abs(np.abs(expected) - np.pi) > 0.2
    assert np.allclose(mean_ipd[usable], expected[usable], atol=0.05)


def test_ipd_antisymmetry(cfg):
    rng = np.random.default_rng(5)
    x = rng.standard_normal((2, 8000))
    x[1, 100:] = x[0, :-100]
    fwd = extract_features(stft(AudioBuffer(x), cfg), center_channel=0,
                           normalize=False).vectors[:, cfg.n_freq:]
    rev = extract_features(stft(AudioBuffer(x[::-1]), cfg), center_channel=0,
                           normalize=False).vectors[:, cfg.n_freq:]
    assert np.allclose(np.exp(1j * fwd), np.exp(-1j * rev), atol=1e-9)


def test_stationary_input_normalizes_to_zero(cfg):
    t = np.arange(16000 * 6) / 16000.0
    x = 0.5 * np.sin(2 * np.pi * 1000 * t)  # phase-coherent across frames
    spec = stft(AudioBuffer(np.stack([x, x])), cfg)
    feats = extract_features(spec, normalize=True, norm_window_s=4.0)
    window_frames = int(round(4.0 * 16000 / cfg.hop))
    tail = feats.vectors[window_frames:]
    assert np.max(np.abs(tail)) < 1e-8


def test_wav_roundtrip(tmp_path):
    rng = np.random.default_rng(6)
    audio = AudioBuffer(rng.uniform(-0.5, 0.5, size=(7, 4000)))
    path_f = tmp_path / "f32.wav"
    write_wav(path_f, audio, dtype="float32")
    back = read_wav(path_f)
    assert back.sample_rate == 16000
    assert back.n_channels == 7
    assert np.allclose(back.samples, audio.samples, atol=1e-6)
    path_i = tmp_path / "i16.wav"
    write_wav(path_i, audio, dtype="int16")
    back16 = read_wav(path_i)
    assert np.allclose(back16.samples, audio.samples, atol=1e-4)


def test_short_input_rejected(cfg):
    with pytest.raises(ConfigMismatch):
        stft(AudioBuffer(np.zeros((1, 100))), cfg)
