"""Overlap statistics for real and simulated corpora.

``overlap_ratio`` is the time covered by two or more distinct speakers
divided by the time covered by any speaker (the speech union).
``total_speech`` sums each speaker's own speaking time, so overlapped time
counts once per speaker there.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable

from ._validation import check_transcripts
from .discretize import consecutive_one, decode_tokens, discretize_time
from .exceptions import ValidationError
from .transcript import Transcript, speech_regions


def sweep(intervals: Iterable[tuple[float, float, str]]) -> dict[int, float]:
    """Time spent with exactly ``n`` distinct labels active, for each ``n >= 1``."""
    events = []
    for b, e, label in intervals:
        events.append((b, 1, label))
        events.append((e, -1, label))
    events.sort(key=lambda ev: (ev[0], ev[1]))
    active: Counter = Counter()
    out: dict[int, float] = {}
    prev_t = None
    for t, step, label in events:
        if prev_t is not None and t > prev_t:
            n = sum(1 for v in active.values() if v > 0)
            if n:
                out[n] = out.get(n, 0.0) + (t - prev_t)
        active[label] += step
        prev_t = t
    return out


@dataclass
class OverlapStats:
    d: float
    n_recordings: int = 0
    total_speech: float = 0.0
    speech_union: float = 0.0
    overlapped_speech: float = 0.0
    token_histogram: list[int] = field(default_factory=lambda: [0, 0, 0, 0])
    run_length_histograms: list[dict[int, int]] = field(default_factory=lambda: [{}, {}])
    silence_gap_histogram: dict[float, int] = field(default_factory=dict)

    @property
    def overlap_ratio(self) -> float:
        return self.overlapped_speech / self.speech_union if self.speech_union > 0 else 0.0

    @property
    def token_count(self) -> int:
        return sum(self.token_histogram)

    def token_distribution(self) -> list[float]:
        n = self.token_count
        return [c / n if n else 0.0 for c in self.token_histogram]

    def to_dict(self) -> dict:
        obj = asdict(self)
        obj["overlap_ratio"] = self.overlap_ratio
        obj["run_length_histograms"] = [
            {str(k): v for k, v in sorted(h.items())} for h in self.run_length_histograms
        ]
        obj["silence_gap_histogram"] = {f"{k:g}": v for k, v in sorted(self.silence_gap_histogram.items())}
        return obj

    @classmethod
    def from_dict(cls, obj: dict) -> "OverlapStats":
        return cls(
            d=float(obj["d"]),
            n_recordings=int(obj.get("n_recordings", 0)),
            total_speech=float(obj["total_speech"]),
            speech_union=float(obj["speech_union"]),
            overlapped_speech=float(obj["overlapped_speech"]),
            token_histogram=[int(c) for c in obj["token_histogram"]],
            run_length_histograms=[
                {int(k): int(v) for k, v in h.items()} for h in obj.get("run_length_histograms", [{}, {}])
            ],
            silence_gap_histogram={
                float(k): int(v) for k, v in obj.get("silence_gap_histogram", {}).items()
            },
        )


def recording_stats(t: Transcript, d: float, gap_bin: float) -> OverlapStats:
    words = [(w.begin, w.end, w.speaker) for w in t.words]
    per_speaker = 0.0
    for spk in sorted({w.speaker for w in t.words}):
        per_speaker += sum(e - b for b, e in speech_regions(w for w in t.words if w.speaker == spk))
    levels = sweep(words)
    regions = speech_regions(t.words)
    gaps: Counter = Counter()
    for (_, e1), (b2, _) in zip(regions, regions[1:]):
        gaps[round(gap_bin * int((b2 - e1) / gap_bin), 9)] += 1
    tokens = discretize_time(t, None, d)
    q = decode_tokens(tokens)
    runs: list[Counter] = [Counter(), Counter()]
    for r in consecutive_one(q):
        runs[r.channel][r.length] += 1
    hist = Counter(tokens.tokens)
    return OverlapStats(
        d=d,
        n_recordings=1,
        total_speech=per_speaker,
        speech_union=sum(levels.values()),
        overlapped_speech=sum(v for n, v in levels.items() if n >= 2),
        token_histogram=[hist[x] for x in range(4)],
        run_length_histograms=[dict(runs[0]), dict(runs[1])],
        silence_gap_histogram=dict(gaps),
    )


def merge(a: OverlapStats, b: OverlapStats) -> OverlapStats:
    if a.d != b.d:
        raise ValidationError(f"cannot merge stats with d={a.d} and d={b.d}")
    runs = [Counter(a.run_length_histograms[c]) + Counter(b.run_length_histograms[c]) for c in (0, 1)]
    return OverlapStats(
        d=a.d,
        n_recordings=a.n_recordings + b.n_recordings,
        total_speech=a.total_speech + b.total_speech,
        speech_union=a.speech_union + b.speech_union,
        overlapped_speech=a.overlapped_speech + b.overlapped_speech,
        token_histogram=[x + y for x, y in zip(a.token_histogram, b.token_histogram)],
        run_length_histograms=[dict(r) for r in runs],
        silence_gap_histogram=dict(Counter(a.silence_gap_histogram) + Counter(b.silence_gap_histogram)),
    )


def compute_stats(annotations: Iterable[Transcript], d: float = 0.25, gap_bin: float = 0.25) -> OverlapStats:
    """Corpus statistics; per-recording results are summed in sorted id order."""
    if not d > 0:
        raise ValueError("d must be positive")
    transcripts = check_transcripts(annotations)
    total = OverlapStats(d=d)
    # fixed reduction order keeps float sums independent of input order
    for t in sorted(transcripts, key=lambda t: (t.recording_id, [(w.begin, w.end, w.speaker, w.text) for w in t.words])):
        total = merge(total, recording_stats(t, d, gap_bin))
    return total


def tv_distance(p: list[float], q: list[float]) -> float:
    return 0.5 * sum(abs(a - b) for a, b in zip(p, q))


def compare_stats(real: OverlapStats, sim: OverlapStats) -> dict:
    """Absolute and relative differences (``sim - real``) plus token-histogram TV distance."""
    if real.d != sim.d:
        raise ValidationError(f"reports use different d: {real.d} vs {sim.d}")
    report = {"d": real.d, "fields": {}}
    for name in ("total_speech", "speech_union", "overlapped_speech", "overlap_ratio"):
        r, s = getattr(real, name), getattr(sim, name)
        report["fields"][name] = {
            "real": r,
            "sim": s,
            "abs_diff": s - r,
            "rel_diff": (s - r) / r if r else (0.0 if s == r else float("inf")),
        }
    p, q = real.token_distribution(), sim.token_distribution()
    report["token_distribution"] = {"real": p, "sim": q}
    report["token_tv_distance"] = tv_distance(p, q)
    return report
