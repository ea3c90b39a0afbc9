"""Tracklet-level face identification.

Each known identity gets its own linear classifier trained against a fixed
background set of negative features (set-to-set matching with per-identity
decision boundaries). Tracklet scores aggregate per-frame confidences with
a high percentile so the best frames decide, and identities whose score
stays under a threshold spawn new guest labels online.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CalibrationMissing, DegenerateGallery, NotNormalized

FEATURE_DIM = 128


def _check_unit_rows(x: np.ndarray, what: str, tol: float = 1e-3) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    norms = np.linalg.norm(x, axis=1)
    if np.any(np.abs(norms - 1.0) > tol):
        raise NotNormalized(f"{what} must be unit vectors (max |norm-1| = "
                            f"{np.max(np.abs(norms - 1.0)):.2e})")
    return x / norms[:, None]


@dataclass
class Tracklet:
    """A time-contiguous single-person face track."""

    tracklet_id: str
    t_start: float
    t_end: float
    azimuth_samples: np.ndarray  # K x 2 rows of (time_s, azimuth_deg)
    features: np.ndarray         # N x d unit rows

    def __post_init__(self):
        self.azimuth_samples = np.atleast_2d(np.asarray(self.azimuth_samples, dtype=np.float64))
        self.features = _check_unit_rows(self.features, f"tracklet {self.tracklet_id} features")
        if self.features.shape[0] < 1:
            raise ValueError("a tracklet needs at least one feature")
        if self.t_end < self.t_start:
            raise ValueError("tracklet span reversed")

    def azimuth_at(self, t: float) -> float:
        times = self.azimuth_samples[:, 0]
        return float(np.interp(t, times, self.azimuth_samples[:, 1]))

    def overlap_fraction(self, t_start: float, t_end: float) -> float:
        """Fraction of [t_start, t_end] covered by this tracklet."""
        span = max(t_end - t_start, 1e-9)
        ov = min(self.t_end, t_end) - max(self.t_start, t_start)
        return max(ov, 0.0) / span


@dataclass(frozen=True)
class FaceIdConfig:
    theta_new: float = 0.0          # spawn a guest below this score
    negative_weight: float = 10.0   # class weight multiplier on background
    percentile: float = 95.0        # nearest-rank aggregation percentile
    svm_c: float = 1.0
    tol: float = 1e-6
    max_iter: int = 2000
    gallery_cap: int = 50           # guest gallery growth limit


@dataclass
class IdentityClassifier:
    """Linear decision function <x, w> + cos_weight * cos(x, signature) - bias."""

    weights: np.ndarray
    cos_weight: float
    bias: float
    signature: np.ndarray

    def frame_scores(self, features: np.ndarray) -> np.ndarray:
        feats = np.atleast_2d(features)
        cos = feats @ self.signature
        return feats @ self.weights + self.cos_weight * cos - self.bias


def _dual_cd_svm(x: np.ndarray, y: np.ndarray, c: np.ndarray,
                 tol: float, max_iter: int) -> np.ndarray:
    """L1-loss linear SVM by cyclic dual coordinate descent.

    Minimizes 0.5*||w||^2 + sum_i c_i * max(0, 1 - y_i w.x_i). Deterministic:
    fixed cyclic update order, no shrinking.
    """
    n = x.shape[0]
    sq = np.einsum("ij,ij->i", x, x)
    alpha = np.zeros(n)
    w = np.zeros(x.shape[1])
    for _ in range(max_iter):
        worst = 0.0
        for i in range(n):
            g = y[i] * (x[i] @ w) - 1.0
            pg = g
            if alpha[i] <= 0.0:
                pg = min(g, 0.0)
            elif alpha[i] >= c[i]:
                pg = max(g, 0.0)
            worst = max(worst, abs(pg))
            if pg != 0.0 and sq[i] > 0.0:
                new = min(max(alpha[i] - g / sq[i], 0.0), c[i])
                if new != alpha[i]:
                    w += (new - alpha[i]) * y[i] * x[i]
                    alpha[i] = new
        if worst < tol:
            break
    return w


def train_identity(gallery: np.ndarray, background: np.ndarray,
                   cfg: FaceIdConfig | None = None) -> IdentityClassifier:
    """Train one identity's classifier: gallery vs background.

    The input feature is augmented with the cosine similarity to the gallery
    mean (the face signature), and the background class carries a high
    weight so confusable regions score negative.
    """
    cfg = cfg or FaceIdConfig()
    gallery = _check_unit_rows(gallery, "gallery")
    background = _check_unit_rows(background, "background")
    if all(any(np.array_equal(g, b) for b in background) for g in gallery):
        raise DegenerateGallery("every gallery feature coincides with a background feature")
    signature = gallery.mean(axis=0)
    signature = signature / max(np.linalg.norm(signature), 1e-12)

    def augment(feats):
        cos = feats @ signature
        ones = np.ones((feats.shape[0], 1))
        return np.hstack([feats, cos[:, None], ones])

    x = np.vstack([augment(gallery), augment(background)])
    y = np.concatenate([np.ones(len(gallery)), -np.ones(len(background))])
    c = np.where(y > 0, cfg.svm_c, cfg.svm_c * cfg.negative_weight)
    w = _dual_cd_svm(x, y, c, cfg.tol, cfg.max_iter)
    return IdentityClassifier(
        weights=w[:-2], cos_weight=float(w[-2]), bias=float(-w[-1]),
        signature=signature)


def nearest_rank_percentile(values: np.ndarray, percentile: float) -> float:
    """Order-statistic percentile: the ceil(p/100 * n)-th smallest value."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    rank = int(np.ceil(percentile / 100.0 * len(v)))
    return float(v[max(rank, 1) - 1])


def score_tracklet(tracklet: Tracklet,
                   classifiers: dict[str, IdentityClassifier],
                   percentile: float = 95.0) -> dict[str, float]:
    """Aggregate per-frame confidences into one score per identity."""
    return {
        h: nearest_rank_percentile(clf.frame_scores(tracklet.features), percentile)
        for h, clf in classifiers.items()
    }


def face_posterior(scores: dict[str, float],
                   calibration: tuple[float, float] | None = None) -> dict[str, float]:
    """Convert identity scores to a posterior over identities.

    With a calibration pair (a, b) each score passes through a logistic
    sigmoid(a*s + b) before normalization; without one the fallback is a
    plain softmax (temperature 1).
    """
    ids = sorted(scores)
    s = np.array([scores[h] for h in ids])
    if calibration is not None:
        a, b = calibration
        p = 1.0 / (1.0 + np.exp(-(a * s + b)))
        p = np.maximum(p, 1e-12)
    else:
        p = np.exp(s - s.max())
    p = p / p.sum()
    return dict(zip(ids, p))


def fit_calibration(scores: np.ndarray, labels: np.ndarray,
                    n_iter: int = 50) -> tuple[float, float]:
    """Fit the logistic score-to-probability map by Newton iterations.

    labels are 1 for a correct identity's score, 0 otherwise.
    """
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(labels, dtype=np.float64)
    a, b = 1.0, 0.0
    for _ in range(n_iter):
        z = a * s + b
        p = 1.0 / (1.0 + np.exp(-z))
        g = np.array([np.sum((p - t) * s), np.sum(p - t)])
        w = np.maximum(p * (1 - p), 1e-9)
        h11 = np.sum(w * s * s)
        h12 = np.sum(w * s)
        h22 = np.sum(w)
        hess = np.array([[h11, h12], [h12, h22]]) + 1e-9 * np.eye(2)
        step = np.linalg.solve(hess, g)
        a, b = a - step[0], b - step[1]
        if np.max(np.abs(step)) < 1e-10:
            break
    return float(a), float(b)


class FaceIdentifier:
    """Per-meeting identity store: enrolled people plus guests spawned online.

    resolve_or_spawn mutates the store; scoring is read-only.
    """

    def __init__(self, background: np.ndarray, cfg: FaceIdConfig | None = None,
                 calibration: tuple[float, float] | None = None):
        self.cfg = cfg or FaceIdConfig()
        self.background = _check_unit_rows(background, "background")
        self.calibration = calibration
        self.classifiers: dict[str, IdentityClassifier] = {}
        self._galleries: dict[str, np.ndarray] = {}
        self._guest_ids: set[str] = set()
        self._next_guest = 1

    @property
    def identities(self) -> list[str]:
        return sorted(self.classifiers)

    def is_guest(self, person_id: str) -> bool:
        return person_id in self._guest_ids

    def enroll(self, person_id: str, gallery: np.ndarray) -> None:
        gallery = _check_unit_rows(gallery, f"gallery for {person_id}")
        self._galleries[person_id] = gallery
        self.classifiers[person_id] = train_identity(gallery, self.background, self.cfg)

    def score_tracklet(self, tracklet: Tracklet) -> dict[str, float]:
        return score_tracklet(tracklet, self.classifiers, self.cfg.percentile)

    def resolve_or_spawn(self, tracklet: Tracklet) -> tuple[str, dict[str, float]]:
        """Assign the tracklet to its best identity, or register a new guest.

        A guest's gallery keeps growing (up to the configured cap) with the
        features of tracklets resolved to it, and its classifier retrains.
        """
        scores = self.score_tracklet(tracklet)
        if scores:
            best = max(sorted(scores), key=lambda h: scores[h])
            if scores[best] >= self.cfg.theta_new:
                if best in self._guest_ids:
                    self._grow_guest(best, tracklet.features)
                return best, scores
        guest = f"Speaker{self._next_guest}"
        self._next_guest += 1
        self._guest_ids.add(guest)
        gallery = tracklet.features[: self.cfg.gallery_cap]
        self._galleries[guest] = gallery
        self.classifiers[guest] = train_identity(gallery, self.background, self.cfg)
        scores = self.score_tracklet(tracklet)
        return guest, scores

    def _grow_guest(self, guest: str, features: np.ndarray) -> None:
        gallery = self._galleries[guest]
        if len(gallery) >= self.cfg.gallery_cap:
            return
        room = self.cfg.gallery_cap - len(gallery)
        self._galleries[guest] = np.vstack([gallery, features[:room]])
        self.classifiers[guest] = train_identity(
            self._galleries[guest], self.background, self.cfg)

    def posterior(self, tracklet: Tracklet) -> dict[str, float]:
        return face_posterior(self.score_tracklet(tracklet), self.calibration)


# ---------------------------------------------------------------------------
# File formats

def write_tracklets_jsonl(path, tracklets: list[Tracklet]) -> None:
    with open(path, "w") as f:
        for t in tracklets:
            rec = {
                "tracklet_id": t.tracklet_id,
                "t_start": round(t.t_start, 6),
                "t_end": round(t.t_end, 6),
                "azimuth": [[round(float(a), 6), round(float(b), 6)]
                            for a, b in t.azimuth_samples],
                "features": [[float(f"{v:.7g}") for v in row] for row in t.features],
            }
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def read_tracklets_jsonl(path) -> list[Tracklet]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out.append(Tracklet(
                tracklet_id=rec["tracklet_id"],
                t_start=rec["t_start"],
                t_end=rec["t_end"],
                azimuth_samples=np.asarray(rec["azimuth"], dtype=np.float64),
                features=np.asarray(rec["features"], dtype=np.float64),
            ))
    return out


def write_gallery_json(path, galleries: dict[str, np.ndarray]) -> None:
    enc = [
        {"person_id": pid,
         "features": [[float(f"{v:.7g}") for v in row] for row in feats]}
        for pid, feats in sorted(galleries.items())
    ]
    with open(path, "w") as f:
        json.dump(enc, f, sort_keys=True, indent=1)


def read_gallery_json(path) -> dict[str, np.ndarray]:
    with open(path) as f:
        data = json.load(f)
    return {rec["person_id"]: np.asarray(rec["features"], dtype=np.float64)
            for rec in data}


def write_background_bin(path, features: np.ndarray) -> None:
    """Binary background set: uint32 count, uint32 dim, float32 row-major data."""
    feats = np.asarray(features, dtype=np.float32)
    with open(path, "wb") as f:
        f.write(struct.pack("<II", feats.shape[0], feats.shape[1]))
        f.write(feats.tobytes())


def read_background_bin(path) -> np.ndarray:
    with open(path, "rb") as f:
        count, dim = struct.unpack("<II", f.read(8))
        data = np.frombuffer(f.read(count * dim * 4), dtype=np.float32)
    return data.reshape(count, dim).astype(np.float64)
