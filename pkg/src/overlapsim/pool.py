"""Pool of single-talker segments used as mixing material."""

from __future__ import annotations

import json
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .audio import AudioBuffer, read_wav, write_wav
from .exceptions import ParseError, ValidationError

DEFAULT_POOL_SIZE = 10_000
DEFAULT_PADDING = 0.05

Word = tuple[str, float, float]


@dataclass(frozen=True, eq=False)
class Utterance:
    """One single-talker segment.

    ``audio`` is either an :class:`AudioBuffer` or a path to a WAV file,
    loaded on first use. ``words`` holds ``(text, begin, end)`` relative to
    the segment start, or ``None`` when no word timings are known.
    """

    utterance_id: str
    audio: AudioBuffer | str | Path
    duration: float
    words: tuple[Word, ...] | None = None
    speaker_label: str = ""
    text: str | None = None

    def __post_init__(self):
        if not self.duration > 0:
            raise ValidationError(f"{self.utterance_id}: duration must be positive")
        if self.words is not None:
            words = tuple((str(w), float(b), float(e)) for w, b, e in self.words)
            prev_end = 0.0
            for w, b, e in words:
                if not e > b:
                    raise ValidationError(f"{self.utterance_id}: word {w!r} has end <= begin")
                if b < prev_end - 1e-9 or b < 0 or e > self.duration + 1e-9:
                    raise ValidationError(
                        f"{self.utterance_id}: word timings must be sorted and within [0, duration]"
                    )
                prev_end = e
            object.__setattr__(self, "words", words)

    @property
    def word_count(self) -> int | None:
        return None if self.words is None else len(self.words)

    def load_audio(self) -> AudioBuffer:
        if isinstance(self.audio, AudioBuffer):
            return self.audio
        cache = self.__dict__.get("_cached")
        if cache is None:
            cache = read_wav(self.audio)
            object.__setattr__(self, "_cached", cache)
        return cache

    def to_dict(self) -> dict:
        obj = {"utterance_id": self.utterance_id}
        if not isinstance(self.audio, AudioBuffer):
            obj["audio"] = str(self.audio)
        obj["duration"] = self.duration
        if self.words is not None:
            obj["words"] = [list(w) for w in self.words]
        if self.text is not None:
            obj["text"] = self.text
        obj["speaker_label"] = self.speaker_label
        return obj


@dataclass(frozen=True, eq=False)
class UtterancePool:
    utterances: tuple[Utterance, ...]
    duration_index: tuple[int, ...] = field(init=False)
    wordcount_index: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        utts = tuple(self.utterances)
        if not utts:
            raise ValidationError("utterance pool is empty")
        object.__setattr__(self, "utterances", utts)
        by_dur = sorted(range(len(utts)), key=lambda i: (utts[i].duration, utts[i].utterance_id))
        object.__setattr__(self, "duration_index", tuple(by_dur))
        object.__setattr__(self, "_durations", [utts[i].duration for i in by_dur])
        timed = [i for i, u in enumerate(utts) if u.words is not None]
        by_count = sorted(timed, key=lambda i: (len(utts[i].words), utts[i].utterance_id))
        object.__setattr__(self, "wordcount_index", tuple(by_count))
        object.__setattr__(self, "_counts", [len(utts[i].words) for i in by_count])

    def __len__(self):
        return len(self.utterances)

    def __iter__(self):
        return iter(self.utterances)

    @property
    def has_word_timings(self) -> bool:
        return len(self.wordcount_index) == len(self.utterances)

    @property
    def sample_rate(self) -> int:
        return self.utterances[0].load_audio().sample_rate


def _split_points(words: Sequence[Word], threshold: float) -> list[int]:
    """Indices ``k`` such that a silence longer than ``threshold`` precedes word ``k``."""
    points = []
    reach = words[0][2]
    for k in range(1, len(words)):
        if words[k][1] - reach > threshold:
            points.append(k)
        reach = max(reach, words[k][2])
    return points


def split_utterance(u: Utterance, threshold: float = 0.5, padding: float = DEFAULT_PADDING) -> list[Utterance]:
    """Cut ``u`` at internal silences longer than ``threshold``.

    Cuts sit ``padding`` seconds outside the neighbouring words (never past
    the middle of the silence); the outer edges of ``u`` are kept. Audio and
    word times are re-based to each segment. Utterances without word timings
    are returned unchanged.
    """
    if u.words is None or not u.words:
        return [u]
    points = _split_points(u.words, threshold)
    if not points:
        return [u]
    groups = [u.words[a:b] for a, b in zip([0] + points, points + [len(u.words)])]
    bounds = [0.0]
    for prev, nxt in zip(groups, groups[1:]):
        gap_begin = max(w[2] for w in prev)
        gap_end = nxt[0][1]
        pad = min(padding, (gap_end - gap_begin) / 2)
        bounds.extend([gap_begin + pad, gap_end - pad])
    bounds.append(u.duration)
    audio = u.load_audio()
    out = []
    for k, g in enumerate(groups):
        begin, end = bounds[2 * k], bounds[2 * k + 1]
        seg_audio = audio.slice(begin, end)
        out.append(
            Utterance(
                f"{u.utterance_id}_{k}",
                seg_audio,
                seg_audio.duration,
                tuple((w, b - begin, min(e - begin, seg_audio.duration)) for w, b, e in g),
                u.speaker_label,
                " ".join(w for w, _, _ in g),
            )
        )
    return out


def build_pool(
    source: Iterable[Utterance],
    pool_size: int = DEFAULT_POOL_SIZE,
    silence_threshold: float = 0.5,
    seed: int = 0,
    padding: float = DEFAULT_PADDING,
) -> UtterancePool:
    """Split the source at long silences and draw ``pool_size`` segments without replacement."""
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    segments = [seg for u in source for seg in split_utterance(u, silence_threshold, padding)]
    if not segments:
        raise ValidationError("source corpus is empty")
    if len(segments) > pool_size:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(len(segments), size=pool_size, replace=False))
        segments = [segments[i] for i in keep]
    return UtterancePool(tuple(segments))


TIE_TOL = 1e-9


def _closest(keys: list, target: float) -> int:
    """Position in the sorted ``keys`` of the first element closest to ``target``.

    Sorting by (key, utterance_id) makes the first element of the smaller
    key's block the tie-break winner. Distances within ``TIE_TOL`` count as
    equal, so a midpoint like (1.3 + 1.6) / 2 does not break a tie by
    rounding error.
    """
    j = bisect_left(keys, target)
    if j == 0:
        return 0
    if j == len(keys):
        return bisect_left(keys, keys[-1])
    lo = bisect_left(keys, keys[j - 1])
    if (target - keys[j - 1]) - (keys[j] - target) <= TIE_TOL:
        return lo
    return j


def duration_nearest_sample(pool: UtterancePool, d_min: float, d_max: float, rng=None) -> Utterance:
    """Uniform choice among utterances lasting ``[d_min, d_max]``.

    Without one, the utterance closest to the midpoint, preferring the
    shorter duration and then the smaller id.
    """
    if not 0 <= d_min < d_max:
        raise ValueError(f"need 0 <= d_min < d_max, got [{d_min}, {d_max}]")
    durs = pool._durations
    lo = bisect_left(durs, d_min)
    hi = bisect_right(durs, d_max)
    if hi > lo:
        k = lo + int(np.random.default_rng(rng).integers(hi - lo))
    else:
        k = _closest(durs, (d_min + d_max) / 2)
    return pool.utterances[pool.duration_index[k]]


def word_count_nearest_sample(pool: UtterancePool, n_words: int, rng=None) -> Utterance:
    """Uniform choice among utterances with exactly ``n_words`` words, else the closest count."""
    if not pool.has_word_timings:
        raise ValidationError("word-count sampling needs word timings on every pooled utterance")
    if n_words < 1:
        raise ValueError("n_words must be >= 1")
    counts = pool._counts
    lo = bisect_left(counts, n_words)
    hi = bisect_right(counts, n_words)
    if hi > lo:
        k = lo + int(np.random.default_rng(rng).integers(hi - lo))
    else:
        k = _closest(counts, n_words)
    return pool.utterances[pool.wordcount_index[k]]


# -- manifests ---------------------------------------------------------------


def parse_manifest(data: str | bytes, base_dir: str | Path = ".") -> list[Utterance]:
    """Read manifest JSONL; relative audio paths resolve against ``base_dir``."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    base_dir = Path(base_dir)
    out = []
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            audio = Path(obj["audio"])
            words = obj.get("words")
            out.append(
                Utterance(
                    str(obj["utterance_id"]),
                    audio if audio.is_absolute() else base_dir / audio,
                    float(obj["duration"]),
                    None if words is None else tuple(tuple(w) for w in words),
                    str(obj.get("speaker_label", "")),
                    obj.get("text"),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise ValidationError(f"line {lineno}: {exc}") from exc
            raise ParseError(f"line {lineno}: bad manifest entry: {exc}", lineno) from exc
    return out


def load_pool(path: str | Path) -> UtterancePool:
    path = Path(path)
    return UtterancePool(tuple(parse_manifest(path.read_text(), path.parent)))


def save_pool(pool: UtterancePool, out_dir: str | Path, manifest_name: str = "pool.jsonl") -> Path:
    """Write every segment as a WAV under ``out_dir/audio`` plus a manifest."""
    out_dir = Path(out_dir)
    (out_dir / "audio").mkdir(parents=True, exist_ok=True)
    lines = []
    for u in pool:
        rel = Path("audio") / f"{u.utterance_id}.wav"
        write_wav(u.load_audio(), out_dir / rel)
        obj = u.to_dict()
        obj["audio"] = str(rel)
        lines.append(json.dumps(obj))
    manifest = out_dir / manifest_name
    manifest.write_text("\n".join(lines) + "\n")
    return manifest
