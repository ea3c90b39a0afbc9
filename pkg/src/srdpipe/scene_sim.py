"""Synthetic meeting scenes: room acoustics, schedules, tracklets, embeddings.

A scene is specified declaratively (room, speakers, word-level schedule,
noise) and rendered deterministically from a seed: image-method room
impulse responses, a spherically isotropic noise field built from many
plane waves, per-speaker reverberant stems whose sum is exactly the
mixture, plus face tracklets and ground-truth embedding vectors for the
attribution modules.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.signal import lfilter, oaconvolve

from .errors import SpecInvalid
from .face_id import (Tracklet, write_tracklets_jsonl, read_tracklets_jsonl,
                      write_gallery_json, write_background_bin)
from .localization import ArrayGeometry, unit_vector
from .signal_core import AudioBuffer, write_wav, read_wav

EMBEDDING_DIM = 128

_WORDS = (
    "the and was for that with this from have are not but all one out "
    "they what were when your can said there use each which she how "
    "their will other about many then them these some her would make "
    "like him into time has look two more write see number way could "
    "people than first water been call who oil its now find long down "
    "day did get come made may part over new sound take only little work"
).split()


@dataclass(frozen=True)
class WordSpec:
    text: str
    t_start: float
    t_end: float


@dataclass(frozen=True)
class UtteranceSpec:
    speaker_id: str
    words: tuple[WordSpec, ...]

    @property
    def t_start(self) -> float:
        return self.words[0].t_start

    @property
    def t_end(self) -> float:
        return self.words[-1].t_end


@dataclass(frozen=True)
class SpeakerSpec:
    speaker_id: str
    azimuth_deg: float
    distance_m: float = 1.5
    height_m: float = 1.15
    voice_seed: int = 0
    face_seed: int = 0
    invited: bool = False


@dataclass(frozen=True)
class SceneSpec:
    name: str
    speakers: tuple[SpeakerSpec, ...]
    schedule: tuple[UtteranceSpec, ...]
    room_dims: tuple[float, float, float] = (6.0, 5.0, 3.0)
    rt60_s: float = 0.2
    device_pos: tuple[float, float, float] = (2.8, 2.4, 0.75)
    snr_db: float | None = 20.0
    sample_rate: int = 16000
    reflection_order: int = 2
    tracklet_jitter_deg: float = 2.0
    tracklet_interval_s: float = 0.5
    tracklet_max_len_s: float | None = None
    face_noise: float = 0.2
    embedding_noise: float = 0.05
    tail_s: float = 0.8

    def validate(self) -> None:
        if not self.speakers:
            raise SpecInvalid("scene needs at least one speaker")
        ids = [s.speaker_id for s in self.speakers]
        if len(set(ids)) != len(ids):
            raise SpecInvalid("duplicate speaker ids")
        for s in self.speakers:
            if not 0.0 <= s.azimuth_deg < 360.0:
                raise SpecInvalid(f"azimuth of {s.speaker_id} outside [0, 360)")
        for utt in self.schedule:
            if utt.speaker_id not in ids:
                raise SpecInvalid(f"utterance for unknown speaker {utt.speaker_id}")
            last = None
            for w in utt.words:
                if w.t_start < 0:
                    raise SpecInvalid("schedule times must be non-negative")
                if w.t_end <= w.t_start:
                    raise SpecInvalid(f"word {w.text!r} has a reversed span")
                if last is not None and w.t_start < last:
                    raise SpecInvalid("words inside an utterance must be ordered")
                last = w.t_end
        if self.rt60_s < 0:
            raise SpecInvalid("rt60 must be non-negative")
        for s in self.speakers:
            pos = self.speaker_position(s)
            for x, dim in zip(pos, self.room_dims):
                if not 0.15 <= x <= dim - 0.15:
                    raise SpecInvalid(f"{s.speaker_id} at {pos} falls outside the room")

    def speaker_position(self, s: SpeakerSpec) -> np.ndarray:
        d = np.asarray(self.device_pos, dtype=np.float64)
        return d + s.distance_m * unit_vector(s.azimuth_deg) \
            + np.array([0.0, 0.0, s.height_m - d[2]])

    @property
    def duration_s(self) -> float:
        end = max((u.t_end for u in self.schedule), default=1.0)
        return end + self.tail_s

    def to_json(self) -> str:
        obj = asdict(self)
        return json.dumps(obj, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SceneSpec":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as e:
            raise SpecInvalid(f"scene spec is not valid JSON: {e}") from e
        return cls.from_dict(obj)

    @classmethod
    def from_dict(cls, obj: dict) -> "SceneSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise SpecInvalid(f"unknown scene spec keys: {sorted(unknown)}")
        try:
            speakers = tuple(SpeakerSpec(**s) for s in obj.pop("speakers"))
            schedule = tuple(
                UtteranceSpec(
                    speaker_id=u["speaker_id"],
                    words=tuple(WordSpec(**w) for w in u["words"]))
                for u in obj.pop("schedule"))
            for key in ("room_dims", "device_pos"):
                if key in obj:
                    obj[key] = tuple(obj[key])
            spec = cls(speakers=speakers, schedule=schedule, **obj)
        except (TypeError, KeyError) as e:
            raise SpecInvalid(f"malformed scene spec: {e}") from e
        spec.validate()
        return spec


@dataclass
class SceneOutput:
    spec: SceneSpec
    seed: int
    mixture: AudioBuffer
    stems: dict[str, AudioBuffer]
    direct_stems: dict[str, AudioBuffer]
    noise: AudioBuffer
    tracklets: list[Tracklet]
    voice_vectors: dict[str, np.ndarray]
    face_signatures: dict[str, np.ndarray]
    reference: list[dict]

    @property
    def meeting_id(self) -> str:
        return f"{self.spec.name}-{self.seed}"

    def invited_ids(self) -> list[str]:
        return [s.speaker_id for s in self.spec.speakers if s.invited]

    def enrollment_voice(self) -> dict[str, np.ndarray]:
        return {h: self.voice_vectors[h] for h in self.invited_ids()}

    def enrollment_galleries(self, n_images: int = 8) -> dict[str, np.ndarray]:
        out = {}
        for idx, s in enumerate(self.spec.speakers):
            if not s.invited:
                continue
            rng = np.random.default_rng([self.seed, 500 + idx])
            sig = self.face_signatures[s.speaker_id]
            feats = sig[None] + self.spec.face_noise * rng.standard_normal((n_images, len(sig)))
            out[s.speaker_id] = feats / np.linalg.norm(feats, axis=1, keepdims=True)
        return out

    def background_set(self, count: int = 200) -> np.ndarray:
        rng = np.random.default_rng([self.seed, 911])
        feats = rng.standard_normal((count, EMBEDDING_DIM))
        return feats / np.linalg.norm(feats, axis=1, keepdims=True)


def seeded_unit_vector(seed: int, tag: int, dim: int = EMBEDDING_DIM) -> np.ndarray:
    v = np.random.default_rng([seed, tag]).standard_normal(dim)
    return v / np.linalg.norm(v)


def sabine_reflection_coeff(room_dims, rt60_s: float) -> float:
    lx, ly, lz = room_dims
    volume = lx * ly * lz
    surface = 2.0 * (lx * ly + lx * lz + ly * lz)
    alpha = min(0.161 * volume / (surface * max(rt60_s, 1e-6)), 0.9999)
    return math.sqrt(1.0 - alpha)


def room_impulse_response(room_dims, src_pos, mic_pos, rt60_s: float,
                          reflection_order: int, sample_rate: int,
                          speed_of_sound: float = 343.0,
                          direct_only: bool = False,
                          pulse_halfwidth: int = 40) -> np.ndarray:
    """Image-method impulse response with fractional-delay sinc pulses.

    Amplitudes follow beta^hits / distance; rt60 = 0 keeps only the direct
    path (pure delay and attenuation).
    """
    src = np.asarray(src_pos, dtype=np.float64)
    mic = np.asarray(mic_pos, dtype=np.float64)
    dims = np.asarray(room_dims, dtype=np.float64)
    order = 0 if (direct_only or rt60_s <= 0) else reflection_order
    beta = 0.0 if order == 0 else sabine_reflection_coeff(room_dims, rt60_s)

    # per-axis image coordinates and wall-hit counts
    axes = []
    for ax in range(3):
        coords, hits = [], []
        m_max = (order + 1) // 2 + 1
        for m in range(-m_max, m_max + 1):
            for sign, h in ((1, abs(2 * m)), (-1, abs(2 * m - 1))):
                if h <= order:
                    coords.append(2.0 * m * dims[ax] + sign * src[ax])
                    hits.append(h)
        axes.append((np.asarray(coords), np.asarray(hits)))

    cx, hx = axes[0]
    cy, hy = axes[1]
    cz, hz = axes[2]
    gx, gy, gz = np.meshgrid(np.arange(len(cx)), np.arange(len(cy)),
                             np.arange(len(cz)), indexing="ij")
    total_hits = hx[gx] + hy[gy] + hz[gz]
    keep = total_hits <= order
    pos = np.stack([cx[gx][keep], cy[gy][keep], cz[gz][keep]], axis=-1)
    hits = total_hits[keep]
    dists = np.linalg.norm(pos - mic[None, :], axis=-1)
    amps = beta ** hits / np.maximum(dists, 0.1)
    delays = dists / speed_of_sound * sample_rate

    w = pulse_halfwidth
    rir = np.zeros(int(np.ceil(delays.max())) + 2 * w + 2)
    i0 = np.ceil(delays - w).astype(int)
    idx = i0[:, None] + np.arange(2 * w + 1)[None, :]
    x = idx - delays[:, None]
    pulse = np.sinc(x) * 0.5 * (1.0 + np.cos(np.pi * x / w))
    vals = amps[:, None] * pulse
    ok = (idx >= 0) & (idx < len(rir))
    np.add.at(rir, idx[ok], vals[ok])
    return rir


def isotropic_noise(n_samples: int, mic_positions: np.ndarray, sample_rate: int,
                    rng: np.random.Generator, n_directions: int = 64,
                    speed_of_sound: float = 343.0, block: int = 2 ** 17) -> np.ndarray:
    """Spherically isotropic noise as many independent plane waves.

    Returns (n_mics, n_samples); each direction's white noise reaches every
    microphone with the geometric arrival offset, applied as a circular
    phase ramp on fixed-size blocks (the sub-sample wraparound at block
    edges is negligible for noise)."""
    g = rng.standard_normal((n_directions, 3))
    dirs = g / np.linalg.norm(g, axis=1, keepdims=True)
    x = rng.standard_normal((n_directions, n_samples)).astype(np.float32)
    delays = -(dirs @ mic_positions.T) / speed_of_sound  # K x M
    freqs = np.fft.rfftfreq(block, 1.0 / sample_rate)
    ramp = np.exp(-2j * np.pi * delays[:, :, None] * freqs[None, None, :]) \
        .astype(np.complex64)
    out = np.zeros((mic_positions.shape[0], n_samples), dtype=np.float64)
    for lo in range(0, n_samples, block):
        n = min(block, n_samples - lo)
        spectra = np.fft.rfft(x[:, lo:lo + n], n=block, axis=-1)
        acc = np.einsum("kf,kmf->mf", spectra, ramp)
        out[:, lo:lo + n] += np.fft.irfft(acc, n=block, axis=-1)[:, :n]
    return out / math.sqrt(n_directions)


def _synth_dry_stem(spec: SceneSpec, speaker_idx: int, seed: int,
                    n_samples: int) -> np.ndarray:
    """Word bursts of speaker-colored noise under raised-cosine envelopes."""
    sr = spec.sample_rate
    speaker = spec.speakers[speaker_idx]
    rng = np.random.default_rng([seed, 100 + speaker_idx])
    timbre = np.random.default_rng([speaker.voice_seed, 7])
    pole_r = 0.85
    pole_ang = math.pi * (0.08 + 0.45 * timbre.random())
    ar = [1.0, -2.0 * pole_r * math.cos(pole_ang), pole_r * pole_r]
    out = np.zeros(n_samples)
    ramp_len = int(0.02 * sr)
    ramp = 0.5 * (1.0 - np.cos(np.linspace(0, np.pi, ramp_len)))
    for utt in spec.schedule:
        if utt.speaker_id != speaker.speaker_id:
            continue
        for word in utt.words:
            a = int(round(word.t_start * sr))
            b = min(int(round(word.t_end * sr)), n_samples)
            if b - a < 2 * ramp_len:
                continue
            burst = lfilter([1.0], ar, rng.standard_normal(b - a))
            burst += 0.15 * rng.standard_normal(b - a)
            burst *= 0.15 / max(np.sqrt(np.mean(burst ** 2)), 1e-12)
            env = np.ones(b - a)
            env[:ramp_len] = ramp
            env[-ramp_len:] = ramp[::-1]
            out[a:b] += burst * env
    return out


def simulate(spec: SceneSpec, seed: int = 0) -> SceneOutput:
    """Render a scene: reverberant stems, noise, mixture, tracklets, vectors.

    Deterministic: the same spec and seed reproduce identical output bytes.
    """
    spec.validate()
    sr = spec.sample_rate
    n_samples = int(round(spec.duration_s * sr))
    geometry = ArrayGeometry()
    mic_pos = np.asarray(spec.device_pos) + geometry.positions

    # reverberant and direct-path images per speaker
    stems_raw, direct_raw = {}, {}
    for idx, speaker in enumerate(spec.speakers):
        dry = _synth_dry_stem(spec, idx, seed, n_samples)
        src = spec.speaker_position(speaker)
        chans, dchans = [], []
        for m in range(geometry.n_mics):
            rir = room_impulse_response(spec.room_dims, src, mic_pos[m],
                                        spec.rt60_s, spec.reflection_order, sr)
            drir = room_impulse_response(spec.room_dims, src, mic_pos[m],
                                         spec.rt60_s, spec.reflection_order, sr,
                                         direct_only=True)
            chans.append(oaconvolve(dry, rir)[:n_samples])
            dchans.append(oaconvolve(dry, drir)[:n_samples])
        stems_raw[speaker.speaker_id] = np.stack(chans)
        direct_raw[speaker.speaker_id] = np.stack(dchans)

    speech_sum = np.sum([stems_raw[s.speaker_id] for s in spec.speakers], axis=0)

    if spec.snr_db is None:
        noise_raw = np.zeros_like(speech_sum)
    else:
        rng_noise = np.random.default_rng([seed, 2])
        noise_raw = isotropic_noise(n_samples, mic_pos - np.asarray(spec.device_pos),
                                    sr, rng_noise)
        active = np.abs(speech_sum).max(axis=0) > 1e-5
        p_speech = float(np.mean(speech_sum[:, active] ** 2)) if active.any() else 1e-12
        p_noise = float(np.mean(noise_raw ** 2))
        gain = math.sqrt(p_speech / (p_noise * 10.0 ** (spec.snr_db / 10.0)))
        noise_raw = noise_raw * gain

    mixture_raw = speech_sum + noise_raw
    norm = 0.5 / max(float(np.abs(mixture_raw).max()), 1e-9)

    stems = {k: AudioBuffer(v * norm, sr) for k, v in stems_raw.items()}
    direct_stems = {k: AudioBuffer(v * norm, sr) for k, v in direct_raw.items()}
    noise = AudioBuffer(noise_raw * norm, sr)
    mixture_samples = np.sum([stems[s.speaker_id].samples for s in spec.speakers],
                             axis=0) + noise.samples
    mixture = AudioBuffer(mixture_samples, sr)

    voice_vectors = {s.speaker_id: seeded_unit_vector(s.voice_seed, 10)
                     for s in spec.speakers}
    face_signatures = {s.speaker_id: seeded_unit_vector(s.face_seed, 11)
                       for s in spec.speakers}

    tracklets = _build_tracklets(spec, seed, face_signatures)

    reference = [
        {"meeting_id": f"{spec.name}-{seed}", "speaker": utt.speaker_id,
         "text": w.text, "t_start": round(w.t_start, 6), "t_end": round(w.t_end, 6)}
        for utt in spec.schedule for w in utt.words
    ]
    reference.sort(key=lambda r: (r["t_start"], r["speaker"], r["text"]))

    return SceneOutput(
        spec=spec, seed=seed, mixture=mixture, stems=stems,
        direct_stems=direct_stems, noise=noise, tracklets=tracklets,
        voice_vectors=voice_vectors, face_signatures=face_signatures,
        reference=reference)


def _build_tracklets(spec: SceneSpec, seed: int,
                     face_signatures: dict[str, np.ndarray]) -> list[Tracklet]:
    duration = spec.duration_s
    out = []
    for idx, speaker in enumerate(spec.speakers):
        rng = np.random.default_rng([seed, 300 + idx])
        max_len = spec.tracklet_max_len_s or duration
        piece = 0
        t0 = 0.0
        while t0 < duration - 1e-6:
            t1 = min(t0 + max_len, duration)
            times = np.arange(t0, t1 + 1e-9, spec.tracklet_interval_s)
            if times[-1] < t1 - 1e-6:
                times = np.append(times, t1)
            az = speaker.azimuth_deg + spec.tracklet_jitter_deg * rng.standard_normal(len(times))
            feats = face_signatures[speaker.speaker_id][None] + \
                spec.face_noise * rng.standard_normal((len(times), EMBEDDING_DIM))
            feats = feats / np.linalg.norm(feats, axis=1, keepdims=True)
            out.append(Tracklet(
                tracklet_id=f"trk-{speaker.speaker_id}-{piece}",
                t_start=float(t0), t_end=float(t1),
                azimuth_samples=np.stack([times, az], axis=1),
                features=feats))
            piece += 1
            t0 = t1
    out.sort(key=lambda t: (t.t_start, t.tracklet_id))
    return out


# ---------------------------------------------------------------------------
# Schedule builders and the named scene catalog

def _make_utterance(rng: np.random.Generator, speaker_id: str, t0: float,
                    n_words: int) -> UtteranceSpec:
    words = []
    t = t0
    for _ in range(n_words):
        dur = 0.2 + 0.15 * rng.random()
        words.append(WordSpec(text=_WORDS[rng.integers(len(_WORDS))],
                              t_start=round(t, 4), t_end=round(t + dur, 4)))
        t += dur + 0.04 + 0.04 * rng.random()
    return UtteranceSpec(speaker_id=speaker_id, words=tuple(words))


def _alternating_schedule(rng, speaker_ids, total_s, gap_s=0.35,
                          words_per_turn=(4, 8), t0=0.6):
    utts = []
    t = t0
    k = 0
    while t < total_s:
        spk = speaker_ids[k % len(speaker_ids)]
        utt = _make_utterance(rng, spk, t, int(rng.integers(*words_per_turn)))
        utts.append(utt)
        t = utt.t_end + gap_s
        k += 1
    return tuple(utts)


def _overlapped_schedule(rng, speaker_ids, total_s, t0=0.6):
    utts = []
    for spk in speaker_ids:
        t = t0
        while t < total_s:
            utt = _make_utterance(rng, spk, t, int(rng.integers(4, 8)))
            utts.append(utt)
            t = utt.t_end + 0.25 + 0.2 * rng.random()
    return tuple(sorted(utts, key=lambda u: (u.t_start, u.speaker_id)))


def _meeting_schedule(rng, speaker_ids, total_s, overlap_prob=0.25, t0=0.8):
    utts = []
    t = t0
    prev_end = t0
    while t < total_s:
        spk = speaker_ids[int(rng.integers(len(speaker_ids)))]
        utt = _make_utterance(rng, spk, t, int(rng.integers(3, 9)))
        utts.append(utt)
        if rng.random() < overlap_prob:
            # next speaker barges in before this turn ends
            others = [s for s in speaker_ids if s != spk]
            spk2 = others[int(rng.integers(len(others)))]
            start2 = utt.t_start + 0.4 * (utt.t_end - utt.t_start)
            utt2 = _make_utterance(rng, spk2, start2, int(rng.integers(3, 6)))
            utts.append(utt2)
            t = max(utt.t_end, utt2.t_end) + 0.4 + 0.2 * rng.random()
        else:
            t = utt.t_end + 0.4 + 0.3 * rng.random()
        prev_end = t
    return tuple(sorted(utts, key=lambda u: (u.t_start, u.speaker_id)))


def standard_scenes() -> dict[str, SceneSpec]:
    """Named scene catalog used across the test suite and demos."""
    scenes = {}

    rng = np.random.default_rng(101)
    scenes["single-speaker"] = SceneSpec(
        name="single-speaker",
        speakers=(SpeakerSpec("alice", 45.0, voice_seed=11, face_seed=12, invited=True),),
        schedule=_alternating_schedule(rng, ["alice"], 8.0),
        rt60_s=0.2, snr_db=25.0)

    rng = np.random.default_rng(102)
    scenes["two-speaker-full-overlap"] = SceneSpec(
        name="two-speaker-full-overlap",
        speakers=(SpeakerSpec("alice", 30.0, voice_seed=11, face_seed=12, invited=True),
                  SpeakerSpec("bob", 120.0, voice_seed=21, face_seed=22, invited=True)),
        schedule=_overlapped_schedule(rng, ["alice", "bob"], 8.0),
        rt60_s=0.15, snr_db=25.0)

    rng = np.random.default_rng(103)
    scenes["turn-taking"] = SceneSpec(
        name="turn-taking",
        speakers=(SpeakerSpec("alice", 20.0, voice_seed=11, face_seed=12, invited=True),
                  SpeakerSpec("bob", 200.0, voice_seed=21, face_seed=22, invited=True)),
        schedule=_alternating_schedule(rng, ["alice", "bob"], 58.0, gap_s=0.35),
        rt60_s=0.2, snr_db=20.0)

    rng = np.random.default_rng(104)
    scenes["co-located-pair"] = SceneSpec(
        name="co-located-pair",
        speakers=(SpeakerSpec("alice", 90.0, voice_seed=11, face_seed=12, invited=True),
                  SpeakerSpec("bob", 94.0, voice_seed=21, face_seed=22, invited=True)),
        schedule=_alternating_schedule(rng, ["alice", "bob"], 28.0, gap_s=0.4),
        rt60_s=0.2, snr_db=25.0)

    rng = np.random.default_rng(105)
    scenes["twin-voice"] = SceneSpec(
        name="twin-voice",
        speakers=(SpeakerSpec("cara", 0.0, voice_seed=33, face_seed=31, invited=True),
                  SpeakerSpec("dana", 180.0, voice_seed=33, face_seed=41, invited=True)),
        schedule=_alternating_schedule(rng, ["cara", "dana"], 28.0, gap_s=0.4),
        rt60_s=0.2, snr_db=25.0)

    rng = np.random.default_rng(106)
    scenes["four-speaker-meeting"] = SceneSpec(
        name="four-speaker-meeting",
        speakers=(SpeakerSpec("alice", 15.0, voice_seed=11, face_seed=12, invited=True),
                  SpeakerSpec("bob", 100.0, voice_seed=21, face_seed=22, invited=True),
                  SpeakerSpec("gina", 190.0, voice_seed=51, face_seed=52),
                  SpeakerSpec("hugo", 280.0, voice_seed=61, face_seed=62)),
        schedule=_meeting_schedule(rng, ["alice", "bob", "gina", "hugo"], 70.0),
        rt60_s=0.25, snr_db=20.0)

    return scenes


# ---------------------------------------------------------------------------
# Disk layout

def write_scene(out: SceneOutput, outdir) -> None:
    """Write the documented scene directory layout.

    mixture.wav, stems/<speaker>.wav, tracklets.jsonl, reference.jsonl,
    embeddings.json, enrollment.json, galleries.json, background.bin,
    scene.json.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "stems").mkdir(exist_ok=True)
    write_wav(outdir / "mixture.wav", out.mixture)
    for spk, stem in out.stems.items():
        write_wav(outdir / "stems" / f"{spk}.wav", stem)
    write_tracklets_jsonl(outdir / "tracklets.jsonl", out.tracklets)
    with open(outdir / "reference.jsonl", "w") as f:
        for rec in out.reference:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    emb = {
        spk: {"voice": [float(f"{v:.7g}") for v in out.voice_vectors[spk]],
              "face": [float(f"{v:.7g}") for v in out.face_signatures[spk]]}
        for spk in sorted(out.voice_vectors)
    }
    with open(outdir / "embeddings.json", "w") as f:
        json.dump(emb, f, sort_keys=True, indent=1)
    enrollment = [
        {"speaker_id": spk, "embedding": [float(f"{v:.7g}") for v in vec]}
        for spk, vec in sorted(out.enrollment_voice().items())
    ]
    with open(outdir / "enrollment.json", "w") as f:
        json.dump(enrollment, f, sort_keys=True, indent=1)
    write_gallery_json(outdir / "galleries.json", out.enrollment_galleries())
    write_background_bin(outdir / "background.bin", out.background_set())
    with open(outdir / "scene.json", "w") as f:
        f.write(out.spec.to_json() + "\n")
    with open(outdir / "meeting.json", "w") as f:
        json.dump({"meeting_id": out.meeting_id, "seed": out.seed}, f, sort_keys=True)


def load_scene(outdir) -> SceneOutput:
    """Rebuild a SceneOutput from a scene directory (re-simulates from the
    stored spec and seed so every ground-truth artifact is available)."""
    outdir = Path(outdir)
    with open(outdir / "scene.json") as f:
        spec = SceneSpec.from_json(f.read())
    with open(outdir / "meeting.json") as f:
        seed = json.load(f)["seed"]
    return simulate(spec, seed)
