"""Continuous speech separation driver.

Runs a mask provider over sliding windows (2.4 s segments every 0.8 s by
default) and stitches the per-segment masks into N continuous streams by
aligning each segment's channel order with the running order. The goodness
of a candidate permutation is the mean squared error between masked
magnitude spectrograms on the frames shared by adjacent segments; ties
prefer keeping the current order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import permutations
from typing import Protocol

import numpy as np

from .errors import NoOverlap, ShapeMismatch
from .signal_core import FeatureFrames, MultichannelSpectrogram, extract_features


@dataclass
class TfMaskSet:
    """N speech masks plus one noise mask on a frame x frequency grid."""

    speech_masks: np.ndarray   # N x T x F in [0, 1]
    noise_mask: np.ndarray     # T x F in [0, 1]
    segment_span: tuple[int, int]
    flagged: bool = False

    def __post_init__(self):
        self.speech_masks = np.asarray(self.speech_masks, dtype=np.float64)
        self.noise_mask = np.asarray(self.noise_mask, dtype=np.float64)
        if self.speech_masks.ndim != 3:
            raise ShapeMismatch(f"speech_masks must be (N, T, F), got {self.speech_masks.shape}")
        if self.noise_mask.shape != self.speech_masks.shape[1:]:
            raise ShapeMismatch("noise mask shape differs from speech masks")
        span_len = self.segment_span[1] - self.segment_span[0]
        if self.speech_masks.shape[1] != span_len:
            raise ShapeMismatch(
                f"masks cover {self.speech_masks.shape[1]} frames, span says {span_len}")
        for grid in (self.speech_masks, self.noise_mask):
            if grid.size and (grid.min() < -1e-9 or grid.max() > 1.0 + 1e-9):
                raise ValueError("mask values must lie in [0, 1]")

    @property
    def n_outputs(self) -> int:
        return self.speech_masks.shape[0]

    @property
    def n_frames(self) -> int:
        return self.speech_masks.shape[1]

    def permuted(self, perm: tuple[int, ...]) -> "TfMaskSet":
        return TfMaskSet(
            speech_masks=self.speech_masks[list(perm)],
            noise_mask=self.noise_mask,
            segment_span=self.segment_span,
            flagged=self.flagged)

    def slice_frames(self, start: int, stop: int) -> "TfMaskSet":
        """Slice in stream frame coordinates."""
        s0 = self.segment_span[0]
        return TfMaskSet(
            speech_masks=self.speech_masks[:, start - s0:stop - s0],
            noise_mask=self.noise_mask[start - s0:stop - s0],
            segment_span=(start, stop),
            flagged=self.flagged)


@dataclass(frozen=True)
class CssConfig:
    segment_len_s: float = 2.4
    hop_s: float = 0.8
    n_outputs: int = 2

    def __post_init__(self):
        if not self.hop_s < self.segment_len_s:
            raise ValueError("hop must be shorter than the segment (the overlap stitches)")

    def segment_frames(self, frame_hop_s: float) -> int:
        return max(2, int(round(self.segment_len_s / frame_hop_s)))

    def hop_frames(self, frame_hop_s: float) -> int:
        return max(1, int(round(self.hop_s / frame_hop_s)))


class MaskProvider(Protocol):
    """Segment-level mask estimator: features in, one TfMaskSet out.

    The output must span exactly the requested frames."""

    def masks_for_segment(self, features: FeatureFrames,
                          span: tuple[int, int]) -> TfMaskSet: ...


def oracle_masks(segment_stems: list[np.ndarray], noise: np.ndarray,
                 span: tuple[int, int], delta: float = 1e-10) -> TfMaskSet:
    """Ideal magnitude-ratio masks from per-source and noise spectrograms.

    speech mask n = |S_n| / (sum_j |S_j| + |V| + delta); the noise mask is
    the analogous ratio for |V|.
    """
    mags = [np.abs(np.asarray(s)) for s in segment_stems]
    vmag = np.abs(np.asarray(noise))
    for m in mags + [vmag]:
        if m.shape != vmag.shape:
            raise ShapeMismatch("stem and noise spectrograms must share a shape")
    denom = np.sum(mags, axis=0) + vmag + delta
    return TfMaskSet(
        speech_masks=np.stack([m / denom for m in mags]),
        noise_mask=vmag / denom,
        segment_span=span)


def assign_utterance_channels(schedule, n_outputs: int,
                              release_s: float = 0.6) -> list[tuple[object, int]]:
    """Utterance-to-channel scheduling for the mask oracle.

    A speaker stays on the channel that last carried them (a continuing
    voice never flips channels). Otherwise the utterance goes to a channel
    that has been quiet since release_s before it starts (most idle first),
    so overlapping or quickly exchanged utterances land on different
    channels; when none is free the least recently busy channel takes it.
    """
    busy = [-np.inf] * n_outputs
    last_speaker: list[str | None] = [None] * n_outputs
    out = []
    for utt in sorted(schedule, key=lambda u: (u.t_start, u.speaker_id)):
        sticky = [n for n in range(n_outputs) if last_speaker[n] == utt.speaker_id]
        free = [n for n in range(n_outputs) if utt.t_start >= busy[n]]
        pool = sticky or free or range(n_outputs)
        chan = min(pool, key=lambda n: (busy[n], n))
        out.append((utt, chan))
        busy[chan] = max(busy[chan], utt.t_end + release_s)
        last_speaker[chan] = utt.speaker_id
    return out


class OracleMaskProvider:
    """Test stand-in for the separation network: ideal ratio masks from
    per-channel ground-truth stems, emitted in a per-segment scrambled
    channel order (seeded) so stitching has real work to do."""

    def __init__(self, stem_specs: list[np.ndarray], noise_spec: np.ndarray,
                 n_outputs: int = 2, scramble: bool = True, seed: int = 0):
        self.stems = [np.asarray(s) for s in stem_specs]
        if len(self.stems) > n_outputs:
            raise ShapeMismatch(f"{len(self.stems)} channel stems exceed "
                                f"{n_outputs} outputs")
        self.noise = np.asarray(noise_spec)
        self.n_outputs = n_outputs
        self.scramble = scramble
        self.seed = seed
        self.applied_order: dict[int, tuple[int, ...]] = {}

    @classmethod
    def from_scene(cls, scene_output, stft_cfg, n_outputs: int = 2,
                   scramble: bool = True, seed: int = 0, center_channel: int = 0,
                   release_s: float = 0.6, pad_pre_s: float = 0.1,
                   pad_post_s: float = 0.35,
                   stem_bins: dict | None = None) -> "OracleMaskProvider":
        """Build channel stems from a simulated scene.

        Utterances are scheduled onto output channels (see
        assign_utterance_channels); a channel's stem is the sum of its
        speakers' reverberant stems restricted to the padded frames of the
        utterances it carries.
        """
        from .signal_core import stft
        if stem_bins is None:
            stem_bins = {
                s.speaker_id: stft(scene_output.stems[s.speaker_id],
                                   stft_cfg).bins[center_channel]
                for s in scene_output.spec.speakers
            }
        noise = stft(scene_output.noise, stft_cfg).bins[center_channel]
        n_frames = noise.shape[0]
        hop_s = stft_cfg.hop / scene_output.mixture.sample_rate
        windows = np.zeros((n_outputs, len(stem_bins), n_frames), dtype=bool)
        speaker_idx = {s.speaker_id: i for i, s in enumerate(scene_output.spec.speakers)}
        for utt, chan in assign_utterance_channels(scene_output.spec.schedule, n_outputs,
                                                   release_s):
            lo = max(0, int((utt.t_start - pad_pre_s) / hop_s))
            hi = min(n_frames, int(np.ceil((utt.t_end + pad_post_s) / hop_s)))
            windows[chan, speaker_idx[utt.speaker_id], lo:hi] = True
        stems = []
        for chan in range(n_outputs):
            acc = np.zeros_like(noise)
            for s, idx in speaker_idx.items():
                acc += stem_bins[s] * windows[chan, idx][:, None]
            stems.append(acc)
        return cls(stems, noise, n_outputs=n_outputs, scramble=scramble, seed=seed)

    def masks_for_segment(self, features: FeatureFrames,
                          span: tuple[int, int]) -> TfMaskSet:
        lo, hi = span
        stems = [s[lo:hi] for s in self.stems]
        while len(stems) < self.n_outputs:
            stems.append(np.zeros_like(self.noise[lo:hi]))
        masks = oracle_masks(stems, self.noise[lo:hi], span)
        if self.scramble:
            rng = np.random.default_rng([self.seed, 77, lo])
            order = tuple(int(i) for i in rng.permutation(self.n_outputs))
        else:
            order = tuple(range(self.n_outputs))
        self.applied_order[lo] = order
        return masks.permuted(order)


def align_permutation(prev: TfMaskSet, curr: TfMaskSet,
                      prev_mixture_mag: np.ndarray,
                      curr_mixture_mag: np.ndarray) -> tuple[int, ...]:
    """Channel order of ``curr`` that best continues ``prev``.

    Returns the permutation pi minimizing the summed MSE between the masked
    magnitude spectrograms of both segments on their shared frames; exact
    ties keep the order closest to identity.

    Arguments:
        prev_mixture_mag / curr_mixture_mag: magnitude spectrograms covering
            each segment's span (frames x freq).
    """
    lo = max(prev.segment_span[0], curr.segment_span[0])
    hi = min(prev.segment_span[1], curr.segment_span[1])
    if hi <= lo:
        raise NoOverlap(f"segments {prev.segment_span} and {curr.segment_span} share no frames")
    pa, pb = lo - prev.segment_span[0], hi - prev.segment_span[0]
    ca, cb = lo - curr.segment_span[0], hi - curr.segment_span[0]
    prev_masked = prev.speech_masks[:, pa:pb] * prev_mixture_mag[pa:pb]
    curr_masked = curr.speech_masks[:, ca:cb] * curr_mixture_mag[ca:cb]
    n = prev.n_outputs
    best = None
    for perm in permutations(range(n)):
        mse = sum(float(np.mean((prev_masked[i] - curr_masked[perm[i]]) ** 2))
                  for i in range(n))
        mismatch = sum(1 for i in range(n) if perm[i] != i)
        key = (mse, mismatch, perm)
        if best is None or key < best:
            best = key
    return best[2]


@dataclass
class MaskChunk:
    """One stitched hop of the continuous mask stream.

    emitted_at_frame: stream frame index whose arrival completed the source
    segment (emission time in frames; latency accounting uses it).
    applied_perm: the channel order chosen against the running order.
    """

    masks: TfMaskSet
    emitted_at_frame: int
    applied_perm: tuple[int, ...] = ()


def run_css(spec: MultichannelSpectrogram, provider: MaskProvider,
            cfg: CssConfig | None = None,
            features: FeatureFrames | None = None,
            center_channel: int = 0):
    """Drive the provider over sliding segments, yielding stitched chunks.

    Each yielded chunk covers the hop-length frame range for which the just
    completed segment is the newest estimate (the final segment emits its
    whole remaining span). Provider failures fall back to pass-through
    masks (speech 0 = 1) and flag the chunk.
    """
    cfg = cfg or CssConfig()
    if features is None:
        features = extract_features(spec, center_channel=center_channel)
    seg_f = cfg.segment_frames(spec.frame_hop_s)
    hop_f = cfg.hop_frames(spec.frame_hop_s)
    total = spec.n_frames
    mix_mag = np.abs(spec.bins[center_channel])

    prev_aligned: TfMaskSet | None = None
    start = 0
    while start < total:
        end = min(start + seg_f, total)
        flagged = False
        try:
            masks = provider.masks_for_segment(features.slice_frames(start, end),
                                               (start, end))
            if masks.segment_span != (start, end) or masks.n_outputs != cfg.n_outputs:
                raise ShapeMismatch(
                    f"provider returned span {masks.segment_span} with "
                    f"{masks.n_outputs} outputs for span {(start, end)}")
        except Exception:
            masks = _passthrough_masks(cfg.n_outputs, (start, end), spec.n_freq)
            flagged = True
        perm = tuple(range(cfg.n_outputs))
        if prev_aligned is not None:
            perm = align_permutation(
                prev_aligned, masks,
                mix_mag[prev_aligned.segment_span[0]:prev_aligned.segment_span[1]],
                mix_mag[start:end])
            masks = masks.permuted(perm)
        chunk_end = end if end >= total else min(start + hop_f, end)
        chunk = masks.slice_frames(start, chunk_end)
        chunk.flagged = chunk.flagged or flagged
        yield MaskChunk(masks=chunk, emitted_at_frame=end, applied_perm=perm)
        if end >= total:
            break
        prev_aligned = masks
        start += hop_f


def _passthrough_masks(n_outputs: int, span: tuple[int, int], n_freq: int) -> TfMaskSet:
    t = span[1] - span[0]
    speech = np.zeros((n_outputs, t, n_freq))
    speech[0] = 1.0
    return TfMaskSet(speech_masks=speech, noise_mask=np.zeros((t, n_freq)),
                     segment_span=span, flagged=True)


def stitch_chunks(chunks: list[MaskChunk]) -> TfMaskSet:
    """Concatenate stitched chunks into one mask set covering the stream."""
    if not chunks:
        raise ValueError("no chunks to stitch")
    masks = [c.masks for c in chunks]
    expect = masks[0].segment_span[0]
    for m in masks:
        if m.segment_span[0] != expect:
            raise ShapeMismatch("chunks do not tile the stream")
        expect = m.segment_span[1]
    return TfMaskSet(
        speech_masks=np.concatenate([m.speech_masks for m in masks], axis=1),
        noise_mask=np.concatenate([m.noise_mask for m in masks], axis=0),
        segment_span=(masks[0].segment_span[0], masks[-1].segment_span[1]),
        flagged=any(m.flagged for m in masks))


def chunk_availability(chunks: list[MaskChunk], n_frames: int) -> np.ndarray:
    """Per-frame emission frame index (when each frame's masks became final)."""
    avail = np.zeros(n_frames, dtype=np.int64)
    for c in chunks:
        lo, hi = c.masks.segment_span
        avail[lo:hi] = c.emitted_at_frame
    return avail


def dump_masks(mask_set: TfMaskSet, path, fmt: str = "json") -> None:
    """Debug dump of a mask stream.

    json: {"span": [lo, hi], "speech": [channel][frame][freq],
           "noise": [frame][freq]}, values rounded to 6 digits, frame-major.
    npz: arrays ``speech`` (N x T x F), ``noise`` (T x F), ``span``.
    """
    if fmt == "npz":
        np.savez_compressed(path, speech=mask_set.speech_masks,
                            noise=mask_set.noise_mask,
                            span=np.asarray(mask_set.segment_span))
        return
    obj = {
        "span": list(mask_set.segment_span),
        "speech": np.round(mask_set.speech_masks, 6).tolist(),
        "noise": np.round(mask_set.noise_mask, 6).tolist(),
    }
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True)


def load_masks(path, fmt: str = "json") -> TfMaskSet:
    if fmt == "npz":
        data = np.load(path)
        return TfMaskSet(speech_masks=data["speech"], noise_mask=data["noise"],
                         segment_span=tuple(int(v) for v in data["span"]))
    with open(path) as f:
        obj = json.load(f)
    return TfMaskSet(speech_masks=np.asarray(obj["speech"]),
                     noise_mask=np.asarray(obj["noise"]),
                     segment_span=tuple(obj["span"]))
