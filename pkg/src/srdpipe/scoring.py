"""Word error rate and speaker-attributed WER scoring.

WER comes from a minimal edit-distance word alignment. SA-WER scores each
reference speaker's words against the hypothesis words attributed to that
speaker (guest labels are first mapped to reference identities by maximal
word-time overlap, one-to-one) and aggregates the errors over the total
reference word count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyReference


@dataclass
class WerCounts:
    substitutions: int = 0
    insertions: int = 0
    deletions: int = 0
    n_ref: int = 0

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def wer(self) -> float:
        return 100.0 * self.errors / self.n_ref if self.n_ref else 0.0

    def __iadd__(self, other: "WerCounts") -> "WerCounts":
        self.substitutions += other.substitutions
        self.insertions += other.insertions
        self.deletions += other.deletions
        self.n_ref += other.n_ref
        return self

    def as_dict(self) -> dict:
        return {"substitutions": self.substitutions, "insertions": self.insertions,
                "deletions": self.deletions, "n_ref": self.n_ref,
                "wer": round(self.wer, 4)}


def align_counts(ref: list[str], hyp: list[str]) -> WerCounts:
    """Minimal edit-distance alignment counts between word sequences.

    Backtrace tie order: match/substitution, then deletion, then insertion.
    """
    n, m = len(ref), len(hyp)
    dist = np.zeros((n + 1, m + 1), dtype=np.int64)
    dist[:, 0] = np.arange(n + 1)
    dist[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        sub = dist[i - 1, :-1] + (np.asarray(hyp) != ref[i - 1])
        row = dist[i]
        prev = dist[i - 1]
        for j in range(1, m + 1):
            row[j] = min(sub[j - 1], prev[j] + 1, row[j - 1] + 1)
    counts = WerCounts(n_ref=n)
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i, j] == dist[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            if ref[i - 1] != hyp[j - 1]:
                counts.substitutions += 1
            i, j = i - 1, j - 1
        elif i > 0 and dist[i, j] == dist[i - 1, j] + 1:
            counts.deletions += 1
            i -= 1
        else:
            counts.insertions += 1
            j -= 1
    return counts


def wer(ref_words: list[str], hyp_words: list[str]) -> WerCounts:
    """WER = (S + I + D) / N_ref in percent, with the alignment counts."""
    if not ref_words:
        raise EmptyReference("reference word list is empty")
    return align_counts(list(ref_words), list(hyp_words))


# ---------------------------------------------------------------------------
# Transcript-level scoring. Records are dicts with at least
# {speaker, text, t_start, t_end}; hypothesis records come from the
# pipeline's merged transcript.

def _ordered_words(records: list[dict]) -> list[str]:
    return [r["text"] for r in sorted(records, key=lambda r: (r["t_start"], r["text"]))]


def map_guest_speakers(ref_records: list[dict], hyp_records: list[dict]) -> dict[str, str]:
    """Map hypothesis speaker labels to reference identities.

    Labels that already name a reference speaker map to themselves; the
    rest (online guest labels) are assigned one-to-one to remaining
    reference speakers by greatest total word-time overlap, greedily, ties
    by id pair.
    """
    ref_ids = sorted({r["speaker"] for r in ref_records})
    hyp_ids = sorted({r["speaker"] for r in hyp_records})
    mapping = {h: h for h in hyp_ids if h in ref_ids}
    free_hyp = [h for h in hyp_ids if h not in mapping]
    free_ref = [r for r in ref_ids if r not in mapping.values()]
    if not free_hyp or not free_ref:
        return mapping
    overlaps = []
    for h in free_hyp:
        h_words = [w for w in hyp_records if w["speaker"] == h]
        for r in free_ref:
            r_words = [w for w in ref_records if w["speaker"] == r]
            total = 0.0
            for hw in h_words:
                for rw in r_words:
                    total += max(0.0, min(hw["t_end"], rw["t_end"]) -
                                 max(hw["t_start"], rw["t_start"]))
            overlaps.append((-total, h, r))
    for _, h, r in sorted(overlaps):
        if h not in mapping and r not in set(mapping.values()):
            mapping[h] = r
    return mapping


def _overlap_regions(ref_records: list[dict]) -> list[tuple[float, float]]:
    """Time regions where at least two reference speakers' words overlap."""
    events = []
    for r in ref_records:
        events.append((r["t_start"], 1, r["speaker"]))
        events.append((r["t_end"], -1, r["speaker"]))
    events.sort()
    active: dict[str, int] = {}
    regions = []
    start = None
    for t, delta, spk in events:
        active[spk] = active.get(spk, 0) + delta
        if active[spk] == 0:
            del active[spk]
        count = len(active)
        if count >= 2 and start is None:
            start = t
        elif count < 2 and start is not None:
            regions.append((start, t))
            start = None
    return regions


def _inside_any(word: dict, regions: list[tuple[float, float]]) -> bool:
    mid = 0.5 * (word["t_start"] + word["t_end"])
    return any(lo <= mid <= hi for lo, hi in regions)


@dataclass
class ScoringReport:
    overall: WerCounts
    speaker_attributed: WerCounts
    per_speaker: dict[str, WerCounts]
    overlap_only: WerCounts | None = None
    no_overlap: WerCounts | None = None
    speaker_map: dict[str, str] = field(default_factory=dict)
    meeting_id: str | None = None

    @property
    def wer(self) -> float:
        return self.overall.wer

    @property
    def sa_wer(self) -> float:
        return self.speaker_attributed.wer

    def as_dict(self) -> dict:
        out = {
            "meeting_id": self.meeting_id,
            "wer": round(self.wer, 4),
            "sa_wer": round(self.sa_wer, 4),
            "overall": self.overall.as_dict(),
            "speaker_attributed": self.speaker_attributed.as_dict(),
            "per_speaker": {k: v.as_dict() for k, v in sorted(self.per_speaker.items())},
            "speaker_map": dict(sorted(self.speaker_map.items())),
        }
        if self.overlap_only is not None:
            out["overlap_only"] = self.overlap_only.as_dict()
        if self.no_overlap is not None:
            out["no_overlap"] = self.no_overlap.as_dict()
        return out

    def summary_table(self) -> str:
        lines = [
            f"WER     {self.wer:7.2f}%  (S={self.overall.substitutions} "
            f"I={self.overall.insertions} D={self.overall.deletions} "
            f"N={self.overall.n_ref})",
            f"SA-WER  {self.sa_wer:7.2f}%",
        ]
        for spk, counts in sorted(self.per_speaker.items()):
            lines.append(f"  {spk:<12} {counts.wer:7.2f}%  (N={counts.n_ref})")
        return "\n".join(lines)


def score_transcript(ref_records: list[dict], hyp_records: list[dict],
                     meeting_id: str | None = None) -> ScoringReport:
    """Full report: WER, SA-WER, per-speaker breakdown, overlap slices."""
    if not ref_records:
        raise EmptyReference("reference transcript is empty")
    overall = wer(_ordered_words(ref_records), _ordered_words(hyp_records))

    mapping = map_guest_speakers(ref_records, hyp_records)
    ref_ids = sorted({r["speaker"] for r in ref_records})
    per_speaker: dict[str, WerCounts] = {}
    sa_total = WerCounts()
    for r in ref_ids:
        r_words = [w for w in ref_records if w["speaker"] == r]
        h_words = [w for w in hyp_records if mapping.get(w["speaker"]) == r]
        counts = align_counts(_ordered_words(r_words), _ordered_words(h_words))
        per_speaker[r] = counts
        sa_total += counts
    unmapped = [w for w in hyp_records if w["speaker"] not in mapping]
    sa_total.insertions += len(unmapped)

    regions = _overlap_regions(ref_records)
    ref_ov = [w for w in ref_records if _inside_any(w, regions)]
    ref_clean = [w for w in ref_records if not _inside_any(w, regions)]
    hyp_ov = [w for w in hyp_records if _inside_any(w, regions)]
    hyp_clean = [w for w in hyp_records if not _inside_any(w, regions)]
    overlap_only = (align_counts(_ordered_words(ref_ov), _ordered_words(hyp_ov))
                    if ref_ov else None)
    no_overlap = (align_counts(_ordered_words(ref_clean), _ordered_words(hyp_clean))
                  if ref_clean else None)

    return ScoringReport(
        overall=overall, speaker_attributed=sa_total, per_speaker=per_speaker,
        overlap_only=overlap_only, no_overlap=no_overlap, speaker_map=mapping,
        meeting_id=meeting_id)


def attribution_accuracy(ref_records: list[dict], hyp_records: list[dict]) -> float:
    """Fraction of reference words whose time/text-matched hypothesis word
    carries the right speaker (after guest mapping)."""
    mapping = map_guest_speakers(ref_records, hyp_records)
    hyp_index = {}
    for w in hyp_records:
        hyp_index.setdefault((round(w["t_start"], 3), w["text"]), []).append(w)
    correct = 0
    total = 0
    for r in ref_records:
        total += 1
        for w in hyp_index.get((round(r["t_start"], 3), r["text"]), []):
            if mapping.get(w["speaker"]) == r["speaker"]:
                correct += 1
                break
    return correct / total if total else 0.0
