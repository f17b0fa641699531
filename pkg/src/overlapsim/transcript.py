"""Word-level transcripts with speaker labels.

Parsing (JSONL and CTM), silence segmentation and the virtual-channel
toggle used by both discretization and t-SOT serialization.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .exceptions import ParseError, ValidationError


@dataclass(frozen=True)
class TimedWord:
    text: str
    begin: float
    end: float
    speaker: str

    def __post_init__(self):
        if not self.begin >= 0:
            raise ValidationError(f"word {self.text!r}: negative begin time {self.begin}")
        if not self.end > self.begin:
            raise ValidationError(
                f"word {self.text!r}: end {self.end} must be greater than begin {self.begin}"
            )


@dataclass(frozen=True)
class Transcript:
    """A recording's words, kept sorted by end time.

    Ties on end time are broken by begin time, then by input order.
    """

    recording_id: str
    words: tuple[TimedWord, ...]
    duration: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        words = tuple(sort_words(self.words))
        object.__setattr__(self, "words", words)
        last = max((w.end for w in words), default=0.0)
        if self.duration is None:
            object.__setattr__(self, "duration", last)
        elif self.duration < last:
            raise ValidationError(
                f"{self.recording_id}: duration {self.duration} is shorter than last word end {last}"
            )

    def __len__(self):
        return len(self.words)

    @property
    def speakers(self) -> list[str]:
        return [w.speaker for w in self.words]

    def to_dict(self) -> dict:
        return {
            "recording_id": self.recording_id,
            "duration": self.duration,
            "words": [{"w": w.text, "b": w.begin, "e": w.end, "spk": w.speaker} for w in self.words],
        }


def sort_words(words: Iterable[TimedWord]) -> list[TimedWord]:
    # sorted() is stable, so input order is the final tie-breaker
    return sorted(words, key=lambda w: (w.end, w.begin))


def assign_channels(t: Transcript) -> list[int]:
    """Virtual channel per word: start on 0, flip whenever the speaker changes."""
    if not t.words:
        raise ValidationError(f"{t.recording_id}: cannot assign channels of an empty transcript")
    channels = [0]
    c = 0
    for prev, cur in zip(t.words, t.words[1:]):
        if cur.speaker != prev.speaker:
            c = 1 - c
        channels.append(c)
    return channels


def speech_regions(words: Iterable[TimedWord]) -> list[tuple[float, float]]:
    """Union of word intervals as sorted, disjoint ``(begin, end)`` pairs."""
    regions: list[list[float]] = []
    for w in sorted(words, key=lambda w: w.begin):
        if regions and w.begin <= regions[-1][1]:
            regions[-1][1] = max(regions[-1][1], w.end)
        else:
            regions.append([w.begin, w.end])
    return [(b, e) for b, e in regions]


def max_silence_gap(words: Sequence[TimedWord]) -> float:
    regions = speech_regions(words)
    return max((b2 - e1 for (_, e1), (b2, _) in zip(regions, regions[1:])), default=0.0)


def segment_by_silence(t: Transcript, threshold: float = 0.5) -> list[Transcript]:
    """Split a transcript wherever no speaker talks for longer than ``threshold``.

    Segments keep absolute times and are named ``<recording_id>#<k>``.
    """
    if threshold <= 0:
        raise ValueError("silence threshold must be positive")
    if not t.words:
        return []
    regions = speech_regions(t.words)
    # begin times of the regions that follow a long silence
    cut_points = [b2 for (_, e1), (b2, _) in zip(regions, regions[1:]) if b2 - e1 > threshold]
    groups: list[list[TimedWord]] = [[] for _ in range(len(cut_points) + 1)]
    for w in t.words:
        groups[bisect_right(cut_points, w.begin)].append(w)
    return [
        Transcript(f"{t.recording_id}#{k}", tuple(g), duration=max(x.end for x in g))
        for k, g in enumerate(groups)
    ]


def _word_from_json(obj: dict, lineno: int) -> TimedWord:
    try:
        fields = str(obj["w"]), float(obj["b"]), float(obj["e"]), str(obj["spk"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"line {lineno}: bad word entry {obj!r}: {exc}", lineno) from exc
    try:
        return TimedWord(*fields)
    except ValidationError as exc:
        raise ValidationError(f"line {lineno}: {exc}") from exc


def parse_jsonl(data: str | bytes) -> list[Transcript]:
    """Parse one recording per line.

    Lines may use ``sample_id`` instead of ``recording_id`` so simulator
    annotations load with the same reader.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    out = []
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {lineno}: invalid JSON: {exc.msg}", lineno) from exc
        if not isinstance(obj, dict) or "words" not in obj:
            raise ParseError(f"line {lineno}: expected an object with a 'words' list", lineno)
        rec_id = obj.get("recording_id", obj.get("sample_id"))
        if rec_id is None:
            raise ParseError(f"line {lineno}: missing recording_id", lineno)
        words = tuple(_word_from_json(w, lineno) for w in obj["words"])
        duration = obj.get("duration")
        try:
            out.append(Transcript(str(rec_id), words, None if duration is None else float(duration)))
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from exc
    return out


def parse_ctm(data: str | bytes) -> list[Transcript]:
    """Parse CTM lines ``<id> <channel> <begin> <duration> <word> <speaker>``.

    Lines starting with ``;;`` are comments. Recordings keep first-seen order.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    by_rec: dict[str, list[TimedWord]] = {}
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip() or line.startswith(";;"):
            continue
        parts = line.split()
        if len(parts) < 6:
            raise ParseError(f"line {lineno}: expected 6 fields, got {len(parts)}", lineno)
        rec, _chan, begin, dur, word, spk = parts[:6]
        try:
            b, d = float(begin), float(dur)
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad time field: {exc}", lineno) from exc
        try:
            by_rec.setdefault(rec, []).append(TimedWord(word, b, b + d, spk))
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from exc
    return [Transcript(rec, tuple(ws)) for rec, ws in by_rec.items()]


def parse_transcript(data: str | bytes, format: str = "jsonl") -> list[Transcript]:
    if format == "jsonl":
        return parse_jsonl(data)
    if format == "ctm":
        return parse_ctm(data)
    raise ValueError(f"unknown transcript format {format!r}")


def dump_jsonl(transcripts: Iterable[Transcript]) -> str:
    return "".join(json.dumps(t.to_dict()) + "\n" for t in transcripts)
