"""Overlap-pattern tokens.

A token packs the activity of the two virtual channels into one integer,
``q[0] + 2 * q[1]``: 0 silence, 1 channel 0 only, 2 channel 1 only, 3 both.
Time-based tokens describe fixed ``d``-second windows; word-based tokens
describe one word each and are never 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_transcripts
from .exceptions import ParseError, ValidationError
from .transcript import Transcript, assign_channels, max_silence_gap, segment_by_silence

TOKENS = (0, 1, 2, 3)
KINDS = ("time", "word")
DEFAULT_D = 0.25
DEFAULT_SILENCE_THRESHOLD = 0.5


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[int, ...]
    kind: str
    d: float | None = None
    source_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(x) for x in self.tokens))
        if self.kind not in KINDS:
            raise ValidationError(f"unknown token kind {self.kind!r}")
        if any(x not in TOKENS for x in self.tokens):
            raise ValidationError(f"{self.source_id}: tokens must be in {{0,1,2,3}}")
        if self.kind == "word" and 0 in self.tokens:
            raise ValidationError(f"{self.source_id}: word-based tokens cannot be 0")
        if self.kind == "time":
            if self.d is None or not self.d > 0:
                raise ValidationError(f"{self.source_id}: time-based tokens need a positive d")
        elif self.d is not None:
            raise ValidationError(f"{self.source_id}: word-based tokens carry no d")

    def __len__(self):
        return len(self.tokens)

    def to_dict(self) -> dict:
        obj = {"source_id": self.source_id, "kind": self.kind}
        if self.d is not None:
            obj["d"] = self.d
        obj["tokens"] = list(self.tokens)
        return obj


def dump_token_jsonl(seqs: Iterable[TokenSequence]) -> str:
    return "".join(json.dumps(s.to_dict()) + "\n" for s in seqs)


def parse_token_jsonl(data: str | bytes) -> list[TokenSequence]:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    out = []
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            out.append(TokenSequence(obj["tokens"], obj["kind"], obj.get("d"), obj.get("source_id", "")))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"line {lineno}: bad token record: {exc}", lineno) from exc
    return out


def encode_pair(q: Sequence[int]) -> int:
    return int(q[0]) + 2 * int(q[1])


def decode_token(x: int) -> tuple[int, int]:
    return (x & 1, (x >> 1) & 1)


def decode_tokens(x_seq: TokenSequence | Sequence[int]) -> np.ndarray:
    """Activity matrix of shape ``(len, 2)``; row ``i`` is the pair for token ``i``."""
    tokens = x_seq.tokens if isinstance(x_seq, TokenSequence) else x_seq
    x = np.asarray(tokens, dtype=np.int64).reshape(-1)
    return np.stack([x & 1, (x >> 1) & 1], axis=1).astype(np.int8)


def _check_channels(t: Transcript, channels: Sequence[int] | None) -> Sequence[int]:
    if not t.words:
        raise ValidationError(f"{t.recording_id}: empty transcript")
    if channels is None:
        return assign_channels(t)
    if len(channels) != len(t.words):
        raise ValidationError(
            f"{t.recording_id}: {len(channels)} channel labels for {len(t.words)} words"
        )
    return channels


def discretize_time(
    t: Transcript, channels: Sequence[int] | None = None, d: float = DEFAULT_D
) -> TokenSequence:
    """One token per ``d``-second window, windows ``0 .. floor(last_end / d)``.

    A word is active in window ``[d*k, d*(k+1))`` when the two half-open
    intervals share a point of positive length. When the last end time is an
    exact multiple of ``d`` the final window is empty and yields a 0.
    """
    if not d > 0:
        raise ValueError("d must be positive")
    channels = _check_channels(t, channels)
    n_windows = math.floor(t.words[-1].end / d) + 1
    q = np.zeros((n_windows, 2), dtype=np.int8)
    for w, c in zip(t.words, channels):
        # candidate windows, padded by one so float rounding in the index
        # estimate never drops a window the exact test would accept
        lo = max(0, math.floor(w.begin / d) - 1)
        hi = min(n_windows - 1, math.floor(w.end / d) + 1)
        for k in range(lo, hi + 1):
            if w.begin < d * (k + 1) and w.end > d * k:
                q[k, c] = 1
    tokens = q[:, 0] + 2 * q[:, 1]
    return TokenSequence(tuple(tokens.tolist()), "time", d, t.recording_id)


def discretize_word(
    t: Transcript,
    channels: Sequence[int] | None = None,
    silence_threshold: float | None = DEFAULT_SILENCE_THRESHOLD,
) -> TokenSequence:
    """One token per word: which channels have a word overlapping it.

    The word itself always counts, so no token is 0. ``t`` is expected to be
    a silence-free segment; a gap longer than ``silence_threshold`` raises.
    Pass ``silence_threshold=None`` to skip that check.
    """
    channels = _check_channels(t, channels)
    if silence_threshold is not None:
        gap = max_silence_gap(t.words)
        if gap > silence_threshold:
            raise ValidationError(
                f"{t.recording_id}: silence of {gap:.3f}s exceeds {silence_threshold}s; "
                "segment the transcript first"
            )
    b = np.array([w.begin for w in t.words])
    e = np.array([w.end for w in t.words])
    ch = np.asarray(channels)
    overlap = (b[None, :] < e[:, None]) & (e[None, :] > b[:, None])
    q0 = (overlap & (ch == 0)[None, :]).any(axis=1)
    q1 = (overlap & (ch == 1)[None, :]).any(axis=1)
    tokens = q0.astype(int) + 2 * q1.astype(int)
    return TokenSequence(tuple(tokens.tolist()), "word", None, t.recording_id)


class RunSpan(NamedTuple):
    channel: int
    begin: int
    end: int  # inclusive

    @property
    def length(self) -> int:
        return self.end - self.begin + 1


def consecutive_one(q: np.ndarray) -> list[RunSpan]:
    """Maximal runs of 1 on each channel, ordered by start then channel."""
    q = np.asarray(q)
    runs = []
    for c in (0, 1):
        col = np.concatenate(([0], q[:, c] if len(q) else [], [0])).astype(np.int8)
        edges = np.diff(col)
        starts = np.flatnonzero(edges == 1)
        ends = np.flatnonzero(edges == -1) - 1
        runs.extend(RunSpan(c, int(s), int(e)) for s, e in zip(starts, ends))
    runs.sort(key=lambda r: (r.begin, r.channel))
    return runs


def _run_order(run: RunSpan) -> tuple[int, int]:
    return (run.begin, run.channel)


def position_owners(q: np.ndarray, runs: Sequence[RunSpan] | None = None) -> list[RunSpan | None]:
    """Which run each position's word belongs to.

    Single-channel positions belong to that channel's run. A maximal stretch
    of ``k`` both-active positions is split between the two runs covering
    it: the first ``ceil(k/2)`` go to the run that started earlier, the rest
    to the other. Silent positions belong to no run.
    """
    q = np.asarray(q)
    if runs is None:
        runs = consecutive_one(q)
    covering: list[list[RunSpan | None]] = [[None, None] for _ in range(len(q))]
    for r in runs:
        for i in range(r.begin, r.end + 1):
            covering[i][r.channel] = r
    owners: list[RunSpan | None] = [None] * len(q)
    i = 0
    while i < len(q):
        r0, r1 = covering[i]
        if r0 is not None and r1 is not None:
            j = i
            while j < len(q) and covering[j][0] == r0 and covering[j][1] == r1:
                j += 1
            k = j - i
            first, second = sorted((r0, r1), key=_run_order)
            n_first = (k + 1) // 2
            for p in range(i, j):
                owners[p] = first if p - i < n_first else second
            i = j
        else:
            owners[i] = r0 if r0 is not None else r1
            i += 1
    return owners


def word_indices(run: RunSpan, q: np.ndarray) -> list[int]:
    """Positions of ``q`` whose words are taken from the utterance of ``run``."""
    owners = position_owners(q)
    return [i for i in range(run.begin, run.end + 1) if owners[i] == run]


def discretize(
    transcripts: Iterable[Transcript],
    mode: str = "time",
    d: float = DEFAULT_D,
    silence_threshold: float = DEFAULT_SILENCE_THRESHOLD,
) -> list[TokenSequence]:
    """Tokenize a corpus.

    Time mode yields one sequence per recording. Word mode first splits each
    recording at silences longer than ``silence_threshold`` and yields one
    sequence per segment; channels are assigned within each segment.
    """
    out = []
    for t in transcripts:
        if mode == "time":
            out.append(discretize_time(t, None, d))
        elif mode == "word":
            for seg in segment_by_silence(t, silence_threshold):
                out.append(discretize_word(seg, None, silence_threshold))
        else:
            raise ValueError(f"mode must be 'time' or 'word', got {mode!r}")
    return out


class OverlapDiscretizer(TransformerMixin, BaseEstimator):
    """Transformer from transcripts to overlap-pattern token sequences.

    Parameters
    ----------
    mode : {"time", "word"}
    d : float
        Window length in seconds for time mode.
    silence_threshold : float
        Word mode splits recordings at silences longer than this.
    """

    def __init__(self, mode="time", d=DEFAULT_D, silence_threshold=DEFAULT_SILENCE_THRESHOLD):
        self.mode = mode
        self.d = d
        self.silence_threshold = silence_threshold

    def fit(self, X, y=None):
        if self.mode not in KINDS:
            raise ValueError(f"mode must be 'time' or 'word', got {self.mode!r}")
        if self.mode == "time" and not self.d > 0:
            raise ValueError("d must be positive")
        if not self.silence_threshold > 0:
            raise ValueError("silence_threshold must be positive")
        check_transcripts(X)
        self.n_recordings_ = len(X)
        return self

    def transform(self, X):
        X = check_transcripts(X)
        return discretize(X, self.mode, self.d, self.silence_threshold)
