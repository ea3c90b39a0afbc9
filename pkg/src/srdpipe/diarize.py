"""Speaker attribution of recognized speech events.

Each speech event (a sequence of time-marked words on one separated
channel) is first segmented at word boundaries with a sticky direction
HMM, then every subsegment is attributed by fusing three cues over the
candidate face tracklets: the tracklet's face-identity posterior, the
voice-embedding score against each speaker's signature, and the
tracklet-conditioned direction likelihood. Committing an attribution
updates the winner's voice signature online.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import EmptyHypothesisSet
from .face_id import FaceIdentifier, Tracklet
from .localization import SslConfig, SteeringGrid, per_frame_loglik, tracklet_ssl_likelihood
from .signal_core import MultichannelSpectrogram
from .speaker_id import (VoiceSignature, check_embedding, speaker_loglik,
                         update_signature)


@dataclass(frozen=True)
class Word:
    text: str
    t_start: float
    t_end: float


@dataclass
class SpeechEvent:
    """Recognized words between silences on one CSS output channel, with
    the channel's TF masks over the event's frame span."""

    channel: int
    words: list[Word]
    frame_span: tuple[int, int]
    masks: np.ndarray                      # span_len x F
    enhanced: np.ndarray | None = None     # optional enhanced audio slice

    def __post_init__(self):
        if not self.words:
            raise ValueError("a speech event needs at least one word")
        times = [w.t_start for w in self.words]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("event words must be time-ordered")

    @property
    def t_start(self) -> float:
        return self.words[0].t_start

    @property
    def t_end(self) -> float:
        return self.words[-1].t_end


@dataclass
class Subsegment:
    words: list[Word]
    frame_span: tuple[int, int]

    @property
    def t_start(self) -> float:
        return self.words[0].t_start

    @property
    def t_end(self) -> float:
        return self.words[-1].t_end


@dataclass(frozen=True)
class FusionConfig:
    w_face: float = 1.0
    w_speaker: float = 1.0
    w_ssl: float = 1.0
    ssl_mass_normalization: bool = True
    self_loop: float = 0.98
    min_tracklet_overlap: float = 0.5

    def __post_init__(self):
        if min(self.w_face, self.w_speaker, self.w_ssl) < 0:
            raise ValueError("modality weights must be non-negative")


@dataclass
class SubsegmentAttribution:
    words: list[Word]
    t_start: float
    t_end: float
    channel: int
    speaker: str
    posterior: float
    posteriors: dict[str, float]
    tracklet_id: str | None = None
    tracklet_posterior: float | None = None


def _viterbi_states(logpost: np.ndarray, self_loop: float) -> np.ndarray:
    """Most likely sticky state path; logpost is T x n_states."""
    n_t, n_s = logpost.shape
    if self_loop >= 1.0 or n_s == 1:
        return np.full(n_t, int(logpost.sum(axis=0).argmax()))
    stay = np.log(self_loop)
    switch = np.log((1.0 - self_loop) / (n_s - 1))
    delta = logpost[0].copy()
    back = np.zeros((n_t, n_s), dtype=np.int64)
    for t in range(1, n_t):
        best_prev = int(delta.argmax())
        cand_switch = delta[best_prev] + switch
        stayed = delta + stay
        take_stay = stayed >= cand_switch
        back[t] = np.where(take_stay, np.arange(n_s), best_prev)
        delta = np.where(take_stay, stayed, cand_switch) + logpost[t]
    path = np.zeros(n_t, dtype=np.int64)
    path[-1] = int(delta.argmax())
    for t in range(n_t - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path


def segment_event(event: SpeechEvent, frame_logliks: np.ndarray,
                  frame_times: np.ndarray, cfg: FusionConfig | None = None,
                  frame_mask_mass: np.ndarray | None = None) -> list[Subsegment]:
    """Split an event into direction-homogeneous subsegments.

    Viterbi over per-frame direction posteriors with a sticky self-loop;
    detected change points snap to the nearest word boundary. Single-word
    events (and self_loop >= 1) pass through unsplit.

    Arguments:
        frame_logliks: span_len x n_azimuths direction log-likelihoods
        frame_times: span_len frame times (seconds)
        frame_mask_mass: per-frame mask mass for scale normalization
    """
    cfg = cfg or FusionConfig()
    whole = [Subsegment(words=list(event.words), frame_span=event.frame_span)]
    if len(event.words) <= 1 or cfg.self_loop >= 1.0 or frame_logliks.shape[0] < 2:
        return whole
    ll = np.asarray(frame_logliks, dtype=np.float64)
    if cfg.ssl_mass_normalization and frame_mask_mass is not None:
        ll = ll / np.maximum(frame_mask_mass, 1.0)[:, None]
    logpost = ll - logsumexp(ll, axis=1, keepdims=True)
    path = _viterbi_states(logpost, cfg.self_loop)
    change_frames = np.nonzero(np.diff(path) != 0)[0] + 1
    if len(change_frames) == 0:
        return whole

    # candidate split points: between word i-1 and word i
    boundaries = np.array([
        0.5 * (event.words[i - 1].t_end + event.words[i].t_start)
        for i in range(1, len(event.words))
    ])
    split_idx = sorted({
        int(np.argmin(np.abs(boundaries - frame_times[t]))) + 1
        for t in change_frames
    })
    lo, hi = event.frame_span
    pieces = []
    word_groups = np.split(np.asarray(event.words, dtype=object), split_idx)
    cut_times = [boundaries[i - 1] for i in split_idx]
    cut_frames = [lo + int(np.searchsorted(frame_times, ct)) for ct in cut_times]
    edges = [lo] + cut_frames + [hi]
    for words, a, b in zip(word_groups, edges[:-1], edges[1:]):
        if len(words) == 0:
            continue
        pieces.append(Subsegment(words=list(words), frame_span=(a, max(b, a + 1))))
    return pieces or whole


class SpeakerRegistry:
    """Voice signatures for every hypothesis identity (invited and guests)."""

    def __init__(self, c_guest: float = 0.3, update_signatures: bool = True):
        self.c_guest = c_guest
        self.update_signatures = update_signatures
        self.voices: dict[str, VoiceSignature] = {}

    def enroll(self, speaker_id: str, signature: VoiceSignature) -> None:
        self.voices[speaker_id] = signature

    def ensure(self, speaker_id: str) -> None:
        self.voices.setdefault(speaker_id, VoiceSignature.empty())

    @property
    def hypothesis_set(self) -> list[str]:
        return sorted(self.voices)

    def score(self, speaker_id: str, embedding: np.ndarray) -> float:
        return speaker_loglik(embedding, self.voices[speaker_id], self.c_guest)

    def commit(self, speaker_id: str, embedding: np.ndarray) -> None:
        if self.update_signatures:
            self.voices[speaker_id] = update_signature(self.voices[speaker_id], embedding)


def attribute(
    subsegment: Subsegment,
    channel: int,
    embedding: np.ndarray,
    candidates: list[tuple[Tracklet, dict[str, float]]],
    registry: SpeakerRegistry,
    subseg_loglik: np.ndarray | None,
    grid: SteeringGrid | None,
    ssl_cfg: SslConfig | None = None,
    cfg: FusionConfig | None = None,
) -> SubsegmentAttribution:
    """Fuse face, voice, and direction evidence into a speaker posterior.

    Per (speaker h, tracklet r): the joint log-score is the weighted sum of
    log face posterior P(h | r), the voice score, and the tracklet's
    direction likelihood; the posterior over speakers marginalizes the
    tracklets by log-sum-exp. Without candidate tracklets the face and
    direction terms drop (audio-only fallback). Ties break toward the
    lexicographically smallest speaker id.

    Arguments:
        candidates: (tracklet, face posterior over identities) pairs that
            pass the temporal-overlap gate
        subseg_loglik: per-azimuth direction log-likelihood of the
            subsegment, already mass-normalized when configured
    """
    cfg = cfg or FusionConfig()
    ssl_cfg = ssl_cfg or SslConfig()
    ids = registry.hypothesis_set
    if not ids:
        raise EmptyHypothesisSet("no enrolled speakers and no guests")
    d = check_embedding(embedding)
    voice = np.array([cfg.w_speaker * registry.score(h, d) for h in ids])

    if not candidates:
        log_p = voice.copy()
        joint = None
    else:
        rows = []
        for tracklet, face_post in candidates:
            face = np.array([
                cfg.w_face * np.log(max(face_post.get(h, 0.0), 1e-12)) for h in ids])
            if subseg_loglik is not None and grid is not None:
                mid = 0.5 * (subsegment.t_start + subsegment.t_end)
                ssl = cfg.w_ssl * tracklet_ssl_likelihood(
                    subseg_loglik, tracklet.azimuth_at(mid), grid, ssl_cfg)
            else:
                ssl = 0.0
            rows.append(face + voice + ssl)
        joint = np.stack(rows, axis=1)  # |H| x |R|
        log_p = logsumexp(joint, axis=1)

    log_p = log_p - logsumexp(log_p)
    posterior = np.exp(log_p)
    best = min(range(len(ids)), key=lambda i: (-posterior[i], ids[i]))
    tracklet_id, tracklet_post = None, None
    if candidates:
        r_scores = joint[best]
        r_best = int(np.argmax(r_scores))
        tracklet_id = candidates[r_best][0].tracklet_id
        tracklet_post = float(np.exp(r_scores[r_best] - logsumexp(r_scores)))
    return SubsegmentAttribution(
        words=subsegment.words, t_start=subsegment.t_start,
        t_end=subsegment.t_end, channel=channel, speaker=ids[best],
        posterior=float(posterior[best]),
        posteriors={h: float(p) for h, p in zip(ids, posterior)},
        tracklet_id=tracklet_id, tracklet_posterior=tracklet_post)


def commit(attribution: SubsegmentAttribution, registry: SpeakerRegistry,
           embedding: np.ndarray) -> None:
    """Fold the attributed subsegment's embedding into the winner's
    signature (no-op when online updates are disabled)."""
    registry.commit(attribution.speaker, embedding)


class Diarizer:
    """Per-meeting attribution state: one serialized committer over the
    speech events of all channels, in event order."""

    def __init__(
        self,
        spec: MultichannelSpectrogram,
        grid: SteeringGrid,
        registry: SpeakerRegistry,
        embedding_provider,
        tracklets: list[Tracklet] | None = None,
        face: FaceIdentifier | None = None,
        ssl_cfg: SslConfig | None = None,
        cfg: FusionConfig | None = None,
    ):
        self.spec = spec
        self.grid = grid
        self.registry = registry
        self.embeddings = embedding_provider
        self.tracklets = list(tracklets or [])
        self.face = face
        self.ssl_cfg = ssl_cfg or SslConfig()
        self.cfg = cfg or FusionConfig()
        self._face_posteriors: dict[str, dict[str, float]] = {}
        self._resolve_tracklets()

    def _resolve_tracklets(self) -> None:
        """Run face identification over the tracklet stream up front (the
        vision lane runs ahead of audio), spawning guests as needed."""
        if self.face is None:
            self.tracklets = []
            return
        for t in sorted(self.tracklets, key=lambda t: (t.t_start, t.tracklet_id)):
            self.face.resolve_or_spawn(t)
        for person in self.face.identities:
            self.registry.ensure(person)
        for t in self.tracklets:
            self._face_posteriors[t.tracklet_id] = self.face.posterior(t)

    def candidates_for(self, t_start: float, t_end: float) -> list[tuple[Tracklet, dict[str, float]]]:
        out = []
        for t in self.tracklets:
            if t.overlap_fraction(t_start, t_end) >= self.cfg.min_tracklet_overlap:
                out.append((t, self._face_posteriors[t.tracklet_id]))
        return out

    def process_event(self, event: SpeechEvent) -> list[SubsegmentAttribution]:
        lo, hi = event.frame_span
        window = self.spec.slice_frames(lo, hi)
        frame_ll = per_frame_loglik(window, event.masks, self.grid, self.ssl_cfg)
        mass = event.masks.sum(axis=1)
        subsegments = segment_event(event, frame_ll, window.frame_times,
                                    self.cfg, mass)
        results = []
        for sub in subsegments:
            a, b = sub.frame_span
            d = self.embeddings.embed_segment((a, b), event.masks[a - lo:b - lo])
            ll = frame_ll[a - lo:b - lo].sum(axis=0)
            if self.cfg.ssl_mass_normalization:
                ll = ll / max(float(mass[a - lo:b - lo].sum()), 1.0)
            result = attribute(
                sub, event.channel, d,
                self.candidates_for(sub.t_start, sub.t_end),
                self.registry, ll, self.grid, self.ssl_cfg, self.cfg)
            commit(result, self.registry, d)
            results.append(result)
        return results
