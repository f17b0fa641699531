"""t-SOT serialization: one chronological word stream with ``<cc>`` markers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .exceptions import ParseError, ValidationError

CC = "<cc>"


@dataclass(frozen=True)
class SerializedTranscript:
    tokens: tuple[str, ...]
    sample_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        t = self.tokens
        if t and (t[0] == CC or t[-1] == CC):
            raise ValidationError(f"{self.sample_id}: {CC} cannot start or end a transcript")
        if any(a == CC and b == CC for a, b in zip(t, t[1:])):
            raise ValidationError(f"{self.sample_id}: consecutive {CC} markers")

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def to_line(self) -> str:
        return f"{self.sample_id}\t{self.text}"


def serialize(annotation: Iterable, sample_id: str = "") -> SerializedTranscript:
    """Sort words by end time and insert ``<cc>`` at every speaker change.

    ``annotation`` holds objects with ``text, begin, end, speaker`` attributes
    or plain ``(text, begin, end, speaker)`` tuples. Ties on end time are
    broken by begin time, then input order, as in the transcript model.
    """
    words = [_as_tuple(w) for w in annotation]
    if not words:
        raise ValidationError("cannot serialize an empty annotation")
    words.sort(key=lambda w: (w[2], w[1]))
    tokens = [words[0][0]]
    for prev, cur in zip(words, words[1:]):
        if cur[3] != prev[3]:
            tokens.append(CC)
        tokens.append(cur[0])
    return SerializedTranscript(tuple(tokens), sample_id)


def _as_tuple(w) -> tuple:
    if hasattr(w, "speaker"):
        return (w.text, w.begin, w.end, w.speaker)
    text, begin, end, speaker = w[:4]
    return (text, begin, end, speaker)


def deserialize(s: SerializedTranscript | Sequence[str]) -> tuple[list[str], list[str]]:
    """Split a serialized stream back into the two virtual-channel word lists."""
    if not isinstance(s, SerializedTranscript):
        s = SerializedTranscript(tuple(s))
    channels: tuple[list[str], list[str]] = ([], [])
    c = 0
    for tok in s.tokens:
        if tok == CC:
            c = 1 - c
        else:
            channels[c].append(tok)
    return channels


def parse_lines(data: str) -> list[SerializedTranscript]:
    out = []
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise ParseError(f"line {lineno}: expected '<sample_id>\\t<tokens>'", lineno)
        sample_id, text = line.split("\t", 1)
        out.append(SerializedTranscript(tuple(text.split()), sample_id))
    return out
