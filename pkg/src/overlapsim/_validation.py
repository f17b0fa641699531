"""Input checks shared by the estimators and the CLI."""

from __future__ import annotations

from .exceptions import ValidationError
from .transcript import Transcript


def check_transcripts(X, allow_empty_words=False) -> list[Transcript]:
    if isinstance(X, Transcript):
        raise TypeError("expected a sequence of Transcript, got a single Transcript")
    X = list(X)
    if not X:
        raise ValidationError("no transcripts given")
    for t in X:
        if not isinstance(t, Transcript):
            raise TypeError(f"expected Transcript, got {type(t).__name__}")
        if not allow_empty_words and not t.words:
            raise ValidationError(f"{t.recording_id}: transcript has no words")
    return X


def check_token_corpus(X) -> list:
    """Return ``X`` as a list of token sequences sharing one kind (and ``d``)."""
    from .discretize import TokenSequence

    if isinstance(X, TokenSequence):
        raise TypeError("expected a sequence of TokenSequence, got a single TokenSequence")
    X = list(X)
    if not X:
        raise ValidationError("empty token corpus")
    for s in X:
        if not isinstance(s, TokenSequence):
            raise TypeError(f"expected TokenSequence, got {type(s).__name__}")
    kinds = {(s.kind, s.d) for s in X}
    if len(kinds) > 1:
        raise ValidationError(f"token corpus mixes kinds: {sorted(kinds, key=str)}")
    return X


def check_seed(seed):
    if seed is None:
        return None
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    return seed
