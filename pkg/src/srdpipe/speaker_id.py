"""Speaker identification from unit embeddings.

A speaker's voice signature is the mean direction of their embeddings on
the unit sphere; scoring an observed embedding against a signature reduces
to their cosine (a shared-concentration directional model). Guests start
with no audio history and score a constant until their first attributed
segment; signatures keep updating online as segments are attributed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import NotNormalized

EMBEDDING_DIM = 128
DEFAULT_GUEST_SCORE = 0.3


def check_embedding(vector: np.ndarray, tol: float = 1e-3) -> np.ndarray:
    """Validate unit length (within tol) and return an exactly-unit copy."""
    v = np.asarray(vector, dtype=np.float64).ravel()
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > tol:
        raise NotNormalized(f"embedding norm {norm:.6f} is not 1 within {tol}")
    return v / norm


@dataclass(frozen=True)
class VoiceSignature:
    """Mean embedding direction plus the count of contributing segments.

    n_segments == 0 marks a guest without audio history; mean_direction is
    None in that state.
    """

    mean_direction: np.ndarray | None
    n_segments: int = 0

    def __post_init__(self):
        if self.n_segments < 0:
            raise ValueError("n_segments must be >= 0")
        if (self.mean_direction is None) != (self.n_segments == 0):
            raise ValueError("mean_direction must be set exactly when n_segments > 0")
        if self.mean_direction is not None:
            object.__setattr__(self, "mean_direction", check_embedding(self.mean_direction))

    @classmethod
    def empty(cls) -> "VoiceSignature":
        return cls(mean_direction=None, n_segments=0)


class EmbeddingProvider(Protocol):
    """Maps an enhanced segment (or masked spectrogram span) to a unit
    embedding; must be deterministic for identical input."""

    def embed_segment(self, span: tuple[int, int], mask: np.ndarray) -> np.ndarray: ...


def speaker_loglik(embedding: np.ndarray, signature: VoiceSignature,
                   c_guest: float = DEFAULT_GUEST_SCORE) -> float:
    """Log-likelihood score of an embedding under a speaker's signature.

    Enrolled or updated speakers: cosine (dot of unit vectors). Guests with
    no history: the constant c_guest.
    """
    d = check_embedding(embedding)
    if signature.n_segments == 0:
        return float(c_guest)
    return float(signature.mean_direction @ d)


def update_signature(signature: VoiceSignature, embedding: np.ndarray) -> VoiceSignature:
    """Fold one attributed segment's embedding into the running mean.

    mean <- normalize((n * mean + d) / (n + 1)); a guest's first update
    adopts the embedding as-is.
    """
    d = check_embedding(embedding)
    n = signature.n_segments
    if n == 0:
        return VoiceSignature(mean_direction=d, n_segments=1)
    mixed = (n * signature.mean_direction + d) / (n + 1)
    norm = np.linalg.norm(mixed)
    if norm < 1e-12:
        # perfectly opposing update; keep the old direction
        return VoiceSignature(signature.mean_direction, n + 1)
    return VoiceSignature(mean_direction=mixed / norm, n_segments=n + 1)


def enroll_signature(embeddings: np.ndarray) -> VoiceSignature:
    """Signature from enrollment embeddings: normalized mean, one
    contribution counted per window."""
    e = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    e = np.stack([check_embedding(row) for row in e])
    mean = e.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        raise NotNormalized("enrollment embeddings cancel out")
    return VoiceSignature(mean_direction=mean / norm, n_segments=len(e))


def sliding_windows(n_samples: int, sample_rate: int, window_s: float = 1.5,
                    hop_s: float = 0.75) -> list[tuple[int, int]]:
    """Enrollment window layout over an audio clip (used by providers)."""
    win = int(round(window_s * sample_rate))
    hop = int(round(hop_s * sample_rate))
    if n_samples <= win:
        return [(0, n_samples)]
    return [(s, s + win) for s in range(0, n_samples - win + 1, hop)]
