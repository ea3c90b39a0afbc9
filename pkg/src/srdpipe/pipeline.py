"""End-to-end stream orchestration: dereverberate, separate, beamform,
recognize, attribute, merge.

The batch driver executes the full chain while keeping virtual-time
bookkeeping: every word is stamped with the time its audio became
available downstream of the separation window (unlabeled emission), and
again when its speech event closed and attribution committed (label
emission). A paced test can therefore assert the streaming latency
contract without wall-clock flakiness. Stages communicate in FIFO order
per stream; attribution is a single serialized consumer over all streams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .beamform import BeamformResult, run_beamformer
from .config import PipelineConfig
from .css import MaskChunk, OracleMaskProvider, TfMaskSet, run_css, stitch_chunks
from .dereverb import dereverberate
from .diarize import Diarizer, SpeechEvent, SpeakerRegistry, Word
from .face_id import FaceIdentifier, Tracklet
from .localization import SteeringGrid
from .scene_sim import SceneOutput
from .signal_core import AudioBuffer, extract_features, stft
from .speaker_id import enroll_signature


@dataclass(frozen=True)
class TranscriptRecord:
    t_start: float
    t_end: float
    speaker: str
    text: str
    channel: int
    posterior: float

    def as_dict(self, meeting_id: str | None = None) -> dict:
        out = {
            "t_start": round(self.t_start, 6), "t_end": round(self.t_end, 6),
            "speaker": self.speaker, "text": self.text, "channel": self.channel,
            "posterior": float(f"{self.posterior:.6g}"),
        }
        if meeting_id is not None:
            out["meeting_id"] = meeting_id
        return out


@dataclass
class AttributedTranscript:
    records: list[TranscriptRecord]
    meeting_id: str | None = None

    def to_jsonl(self, path) -> None:
        with open(path, "w") as f:
            for r in self.records:
                f.write(json.dumps(r.as_dict(self.meeting_id), sort_keys=True) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "AttributedTranscript":
        records, meeting_id = [], None
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                meeting_id = obj.pop("meeting_id", meeting_id)
                records.append(TranscriptRecord(**obj))
        return cls(records=records, meeting_id=meeting_id)

    def as_dicts(self) -> list[dict]:
        return [r.as_dict(self.meeting_id) for r in self.records]

    def rendered(self) -> str:
        return "\n".join(
            f"[{r.t_start:8.2f} {r.t_end:8.2f}] {r.speaker:<12} {r.text}"
            for r in self.records)


def merge_streams(per_channel: list[list[TranscriptRecord]]) -> list[TranscriptRecord]:
    """Merge per-channel attributed words into one globally ordered list.

    Sorted by start time; ties by channel index, then text. Keeps every
    word (leakage control is the separation stage's job)."""
    merged = [r for records in per_channel for r in records]
    merged.sort(key=lambda r: (r.t_start, r.channel, r.text))
    return merged


@dataclass(frozen=True)
class Emission:
    """One streaming output: kind is "word" (unlabeled) or "label"."""

    v_time: float
    kind: str
    t_start: float
    t_end: float
    text: str
    channel: int
    speaker: str | None = None


@dataclass
class PipelineResult:
    transcript: AttributedTranscript
    emissions: list[Emission]
    mask_stream: TfMaskSet
    beamform: BeamformResult
    flags: list[str] = field(default_factory=list)


class RecognizerProvider(Protocol):
    """Turns enhanced channel streams into time-marked speech events.

    Events close at silences longer than the flush plus at the provider's
    maximum event length; word times stay within the stream extent and
    events are emitted in monotone order per channel.
    """

    def recognize(self, enhanced: list[AudioBuffer], masks: TfMaskSet,
                  frame_times: np.ndarray) -> list[list[SpeechEvent]]: ...


class OracleRecognizer:
    """Scene-truth recognizer: routes every ground-truth word to the CSS
    channel carrying the most of its masked energy, then groups each
    channel's words into speech events split at silences > silence_s and
    capped at max_event_s (keeps label latency bounded)."""

    def __init__(self, scene: SceneOutput, stft_cfg, silence_s: float = 0.3,
                 max_event_s: float = 2.0, center_channel: int = 0,
                 stem_power: dict[str, np.ndarray] | None = None):
        self.silence_s = silence_s
        self.max_event_s = max_event_s
        self.words = [(r["speaker"], r["text"], r["t_start"], r["t_end"])
                      for r in scene.reference]
        self.stem_power = stem_power or _stem_power(scene, stft_cfg, center_channel)
        self.frame_cover_s = stft_cfg.frame_len / scene.mixture.sample_rate

    def _word_frames(self, frame_times: np.ndarray, t_start: float, t_end: float):
        lo = int(np.searchsorted(frame_times, t_start - self.frame_cover_s, side="right"))
        hi = int(np.searchsorted(frame_times, t_end, side="left"))
        return lo, max(hi, lo + 1)

    def recognize(self, enhanced: list[AudioBuffer], masks: TfMaskSet,
                  frame_times: np.ndarray) -> list[list[SpeechEvent]]:
        n_out = masks.n_outputs
        per_channel: list[list[tuple]] = [[] for _ in range(n_out)]
        for speaker, text, t0, t1 in self.words:
            lo, hi = self._word_frames(frame_times, t0, t1)
            power = self.stem_power[speaker][lo:hi]
            energies = [
                float(np.sum(masks.speech_masks[n, lo:hi] * power))
                for n in range(n_out)
            ]
            channel = int(np.argmax(energies))
            per_channel[channel].append((t0, t1, text))
        events: list[list[SpeechEvent]] = []
        for channel, items in enumerate(per_channel):
            items.sort()
            groups: list[list[tuple]] = []
            for item in items:
                if (groups
                        and item[0] - groups[-1][-1][1] <= self.silence_s
                        and item[1] - groups[-1][0][0] <= self.max_event_s):
                    groups[-1].append(item)
                else:
                    groups.append([item])
            channel_events = []
            for group in groups:
                lo, hi = self._word_frames(frame_times, group[0][0], group[-1][1])
                hi = min(hi, masks.n_frames)
                lo = min(lo, hi - 1)
                channel_events.append(SpeechEvent(
                    channel=channel,
                    words=[Word(text=w[2], t_start=w[0], t_end=w[1]) for w in group],
                    frame_span=(lo, hi),
                    masks=masks.speech_masks[channel, lo:hi]))
            events.append(channel_events)
        return events


class OracleEmbeddingProvider:
    """Scene-truth speaker embeddings: the mask-energy-weighted mixture of
    the active speakers' ground-truth voice vectors plus spherical noise,
    renormalized. Deterministic per requested span."""

    def __init__(self, scene: SceneOutput, stft_cfg, noise: float = 0.05,
                 seed: int = 0, center_channel: int = 0,
                 stem_power: dict[str, np.ndarray] | None = None):
        self.noise = noise
        self.seed = seed
        self.speaker_ids = [s.speaker_id for s in scene.spec.speakers]
        self.vectors = np.stack([scene.voice_vectors[s] for s in self.speaker_ids])
        power = stem_power or _stem_power(scene, stft_cfg, center_channel)
        self.stem_power = np.stack([power[s] for s in self.speaker_ids])

    def embed_segment(self, span: tuple[int, int], mask: np.ndarray) -> np.ndarray:
        lo, hi = span
        weights = np.einsum("stf,tf->s", self.stem_power[:, lo:hi], mask)
        total = float(weights.sum())
        rng = np.random.default_rng([self.seed, 55, lo, hi])
        g = rng.standard_normal(self.vectors.shape[1])
        if total < 1e-12:
            v = g
        else:
            v = (weights / total) @ self.vectors + self.noise * g
        return v / np.linalg.norm(v)


def _stem_bins(scene: SceneOutput, stft_cfg, center_channel: int = 0) -> dict[str, np.ndarray]:
    return {
        s.speaker_id: stft(scene.stems[s.speaker_id], stft_cfg).bins[center_channel]
        for s in scene.spec.speakers
    }


def _stem_power(scene: SceneOutput, stft_cfg, center_channel: int = 0) -> dict[str, np.ndarray]:
    return {k: np.abs(v) ** 2
            for k, v in _stem_bins(scene, stft_cfg, center_channel).items()}


@dataclass
class Providers:
    masks: object
    recognizer: RecognizerProvider
    embeddings: object


def oracle_providers(scene: SceneOutput, config: PipelineConfig,
                     seed: int = 0) -> Providers:
    bins = _stem_bins(scene, config.stft)
    power = {k: np.abs(v) ** 2 for k, v in bins.items()}
    return Providers(
        masks=OracleMaskProvider.from_scene(scene, config.stft,
                                            n_outputs=config.css.n_outputs,
                                            seed=seed, stem_bins=bins),
        recognizer=OracleRecognizer(scene, config.stft,
                                    silence_s=config.recognizer.flush_s,
                                    max_event_s=config.recognizer.max_event_s,
                                    stem_power=power),
        embeddings=OracleEmbeddingProvider(scene, config.stft, seed=seed,
                                           stem_power=power),
    )


@dataclass
class MeetingInputs:
    mixture: AudioBuffer
    tracklets: list[Tracklet] = field(default_factory=list)
    enrollment_voice: dict[str, np.ndarray] = field(default_factory=dict)
    galleries: dict[str, np.ndarray] = field(default_factory=dict)
    background: np.ndarray | None = None
    meeting_id: str | None = None

    @classmethod
    def from_scene(cls, scene: SceneOutput) -> "MeetingInputs":
        return cls(
            mixture=scene.mixture,
            tracklets=list(scene.tracklets),
            enrollment_voice=scene.enrollment_voice(),
            galleries=scene.enrollment_galleries(),
            background=scene.background_set(),
            meeting_id=scene.meeting_id,
        )


def run_pipeline(inputs: MeetingInputs, providers: Providers,
                 config: PipelineConfig | None = None,
                 use_video: bool = True) -> PipelineResult:
    """Execute the full chain on one meeting and return the merged
    transcript plus the streamed emission log."""
    config = config or PipelineConfig()
    flags: list[str] = []
    spec = stft(inputs.mixture, config.stft)
    if config.wpe.enabled:
        spec = dereverberate(spec, config.wpe.to_wpe_config())
    features = extract_features(spec, center_channel=config.mvdr.reference_channel)

    chunks: list[MaskChunk] = list(run_css(spec, providers.masks, config.css,
                                           features=features,
                                           center_channel=config.mvdr.reference_channel))
    masks = stitch_chunks(chunks)
    if masks.flagged:
        flags.append("css: one or more segments fell back to pass-through masks")

    # per-frame availability (seconds) of final masks and enhanced audio
    hop_s = spec.frame_hop_s
    cover_s = config.stft.frame_len / spec.sample_rate
    avail = np.zeros(spec.n_frames)
    for c in chunks:
        lo, hi = c.masks.segment_span
        end = c.emitted_at_frame
        avail[lo:hi] = (end - 1) * hop_s + cover_s

    def avail_at(t: float) -> float:
        idx = min(max(int(t / hop_s), 0), spec.n_frames - 1)
        return float(avail[idx])

    bf = run_beamformer(spec, masks, config.mvdr, config.stft)
    if bf.flagged_periods:
        flags.append(f"beamform: {len(bf.flagged_periods)} zero-filled periods")

    per_channel_events = providers.recognizer.recognize(bf.outputs, masks,
                                                        spec.frame_times)

    registry = SpeakerRegistry(c_guest=config.speaker.c_guest,
                               update_signatures=config.speaker.update_signatures)
    for speaker_id, emb in sorted(inputs.enrollment_voice.items()):
        registry.enroll(speaker_id, enroll_signature(emb))

    face = None
    tracklets = list(inputs.tracklets) if use_video else []
    if use_video and tracklets and inputs.background is not None:
        face = FaceIdentifier(inputs.background, config.face.to_face_config(),
                              calibration=config.face.load_calibration())
        for person, gallery in sorted(inputs.galleries.items()):
            face.enroll(person, gallery)

    grid = SteeringGrid.build(config.geometry.to_geometry(), spec.freqs_hz(),
                              step_deg=config.ssl.grid_step_deg)
    diarizer = Diarizer(
        spec=spec, grid=grid, registry=registry,
        embedding_provider=providers.embeddings,
        tracklets=tracklets, face=face,
        ssl_cfg=config.ssl.to_ssl_config(), cfg=config.fusion)

    flush = config.recognizer.flush_s
    emissions: list[Emission] = []
    ordered_events = sorted(
        (event for events in per_channel_events for event in events),
        key=lambda e: (e.t_end, e.channel, e.t_start))
    per_channel_records: list[list[TranscriptRecord]] = [
        [] for _ in range(len(per_channel_events))]
    for event in ordered_events:
        for w in event.words:
            emissions.append(Emission(
                v_time=avail_at(w.t_end + flush), kind="word",
                t_start=w.t_start, t_end=w.t_end, text=w.text,
                channel=event.channel))
        label_time = avail_at(event.t_end + flush)
        for result in diarizer.process_event(event):
            for w in result.words:
                emissions.append(Emission(
                    v_time=label_time, kind="label", t_start=w.t_start,
                    t_end=w.t_end, text=w.text, channel=event.channel,
                    speaker=result.speaker))
                per_channel_records[event.channel].append(TranscriptRecord(
                    t_start=w.t_start, t_end=w.t_end, speaker=result.speaker,
                    text=w.text, channel=event.channel,
                    posterior=result.posterior))
    emissions.sort(key=lambda e: (e.v_time, e.kind, e.t_start, e.channel, e.text))

    transcript = AttributedTranscript(
        records=merge_streams(per_channel_records),
        meeting_id=inputs.meeting_id)
    return PipelineResult(transcript=transcript, emissions=emissions,
                          mask_stream=masks, beamform=bf, flags=flags)


def run_pipeline_on_scene(scene: SceneOutput, config: PipelineConfig | None = None,
                          seed: int = 0, use_video: bool = True) -> PipelineResult:
    """Convenience wrapper: oracle providers wired from a simulated scene."""
    config = config or PipelineConfig()
    return run_pipeline(MeetingInputs.from_scene(scene),
                        oracle_providers(scene, config, seed=seed),
                        config, use_video=use_video)
