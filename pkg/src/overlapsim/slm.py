"""Order-N language model over overlap tokens.

Maximum-likelihood counts with longest-suffix backoff. Sequences are padded
with ``N-1`` BOS symbols and closed by one EOS, and every suffix of every
context is counted, so shorter contexts are always available to back off to.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from typing import Iterable

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_token_corpus
from .discretize import TokenSequence
from .exceptions import ModelFormatError, ModelVersionError, ValidationError

BOS = -1
EOS = -2
FORMAT_VERSION = 1
DEFAULT_ORDER = 30
DEFAULT_MAX_TOKENS = {"time": 2400, "word": 600}

Context = tuple[int, ...]


def count_ngrams(corpus: Iterable[Iterable[int]], order: int) -> dict[Context, Counter]:
    counts: dict[Context, Counter] = {}
    pad = (BOS,) * (order - 1)
    for seq in corpus:
        padded = pad + tuple(seq) + (EOS,)
        for j in range(order - 1, len(padded)):
            nxt = padded[j]
            for k in range(order):
                ctx = padded[j - k : j]
                counts.setdefault(ctx, Counter())[nxt] += 1
    return counts


class NGramModel(BaseEstimator):
    """N-gram model of overlap-token sequences.

    Parameters
    ----------
    order : int, default=30
        N, the n-gram length. Contexts hold up to ``order - 1`` tokens.
    max_tokens : int or None
        Default sampling cutoff; ``None`` picks 2400 for time-based and 600
        for word-based models.

    Attributes
    ----------
    counts_ : dict
        Context tuple to ``Counter`` of next symbols (tokens or ``EOS``).
    kind_ : {"time", "word"}
    d_ : float or None
    """

    def __init__(self, order=DEFAULT_ORDER, max_tokens=None):
        self.order = order
        self.max_tokens = max_tokens

    def fit(self, X, y=None):
        if isinstance(self.order, bool) or not isinstance(self.order, int) or self.order < 1:
            raise ValueError(f"order must be an integer >= 1, got {self.order!r}")
        X = check_token_corpus(X)
        self.kind_ = X[0].kind
        self.d_ = X[0].d
        self.counts_ = count_ngrams((s.tokens for s in X), self.order)
        self.n_sequences_ = len(X)
        self._tables = {}
        return self

    # -- probabilities -------------------------------------------------------

    def _context(self, history: tuple[int, ...]) -> Context:
        """Longest stored suffix of the padded history."""
        n = self.order - 1
        padded = ((BOS,) * n + history)[-n:] if n else ()
        for k in range(n, -1, -1):
            ctx = padded[n - k :]
            if ctx in self.counts_:
                return ctx
        raise ModelFormatError("model has no empty context")  # pragma: no cover

    def prob(self, token: int, history=()) -> float:
        """Probability of ``token`` (or ``EOS``) following ``history`` under sampling."""
        check_is_fitted(self, "counts_")
        counter = self.counts_[self._context(tuple(history))]
        return counter[token] / sum(counter.values())

    def conditional(self, context: Context) -> dict[int, float]:
        """Stored next-symbol distribution of exactly ``context``."""
        check_is_fitted(self, "counts_")
        counter = self.counts_[tuple(context)]
        total = sum(counter.values())
        return {tok: n / total for tok, n in sorted(counter.items())}

    def _table(self, ctx: Context):
        table = self._tables.get(ctx)
        if table is None:
            counter = self.counts_[ctx]
            symbols = np.array(sorted(counter), dtype=np.int64)
            cum = np.cumsum([counter[s] for s in symbols], dtype=np.float64)
            table = (symbols, cum / cum[-1])
            self._tables[ctx] = table
        return table

    def draw(self, context_history, rng: np.random.Generator) -> int:
        """Next symbol after a history, using its longest stored context."""
        return self.draw_from(self._context(tuple(context_history)), rng)

    def draw_from(self, ctx: Context, rng: np.random.Generator) -> int:
        """Next symbol from the stored distribution of exactly ``ctx``."""
        symbols, cdf = self._table(tuple(ctx))
        idx = int(np.searchsorted(cdf, rng.random(), side="right"))
        return int(symbols[min(idx, len(symbols) - 1)])

    # -- generation and scoring ----------------------------------------------

    def sample(self, random_state=None, max_tokens=None) -> TokenSequence:
        """Draw one sequence, stopping at EOS or after ``max_tokens`` tokens."""
        check_is_fitted(self, "counts_")
        if max_tokens is None:
            max_tokens = self.max_tokens or DEFAULT_MAX_TOKENS[self.kind_]
        if max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        rng = np.random.default_rng(random_state)
        n = self.order - 1
        history: list[int] = []
        while len(history) < max_tokens:
            tok = self.draw(history[-n:] if n else (), rng)
            if tok == EOS:
                break
            history.append(tok)
        source = f"sample-{random_state}" if isinstance(random_state, int) else "sample"
        return TokenSequence(tuple(history), self.kind_, self.d_, source)

    def log_prob(self, x: TokenSequence | Iterable[int]) -> float:
        """Natural-log probability of ``x`` followed by EOS.

        Each step uses the longest stored context in which the symbol was
        seen; a symbol seen after no context at all gives ``-inf``.
        """
        check_is_fitted(self, "counts_")
        if isinstance(x, TokenSequence):
            if x.kind != self.kind_:
                raise ValidationError(f"sequence kind {x.kind!r} does not match model kind {self.kind_!r}")
            tokens = x.tokens
        else:
            tokens = tuple(x)
        n = self.order - 1
        padded = (BOS,) * n + tuple(tokens) + (EOS,)
        total = 0.0
        for j in range(n, len(padded)):
            nxt = padded[j]
            for k in range(n, -1, -1):
                counter = self.counts_.get(padded[j - k : j])
                if counter is not None and counter[nxt] > 0:
                    total += math.log(counter[nxt] / sum(counter.values()))
                    break
            else:
                return -math.inf
        return total

    def score(self, X, y=None) -> float:
        """Mean log probability per sequence."""
        X = list(X)
        return float(np.mean([self.log_prob(s) for s in X]))

    # -- persistence ---------------------------------------------------------

    def to_dict(self) -> dict:
        check_is_fitted(self, "counts_")
        contexts = [
            {"ctx": list(ctx), "next": {str(tok): n for tok, n in sorted(counter.items())}}
            for ctx, counter in sorted(self.counts_.items(), key=lambda kv: (len(kv[0]), kv[0]))
        ]
        obj = {"version": FORMAT_VERSION, "order": self.order, "kind": self.kind_}
        if self.d_ is not None:
            obj["d"] = self.d_
        obj["contexts"] = contexts
        return obj

    def save(self) -> bytes:
        return json.dumps(self.to_dict(), separators=(",", ":")).encode("utf-8")

    @classmethod
    def load(cls, data: bytes | str) -> "NGramModel":
        try:
            obj = json.loads(data)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ModelFormatError(f"corrupt model payload: {exc}") from exc
        if not isinstance(obj, dict) or "version" not in obj:
            raise ModelFormatError("corrupt model payload: missing version")
        if obj["version"] != FORMAT_VERSION:
            raise ModelVersionError(
                f"model format version {obj['version']!r} is not supported (expected {FORMAT_VERSION})"
            )
        try:
            model = cls(order=int(obj["order"]))
            model.kind_ = obj["kind"]
            model.d_ = obj.get("d")
            model.counts_ = {
                tuple(int(t) for t in entry["ctx"]): Counter({int(k): int(v) for k, v in entry["next"].items()})
                for entry in obj["contexts"]
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"corrupt model payload: {exc}") from exc
        if () not in model.counts_ or model.kind_ not in ("time", "word"):
            raise ModelFormatError("corrupt model payload: missing empty context or bad kind")
        model.n_sequences_ = None
        model._tables = {}
        return model

    def __eq__(self, other):
        if not isinstance(other, NGramModel):
            return NotImplemented
        return (
            self.order == other.order
            and getattr(self, "kind_", None) == getattr(other, "kind_", None)
            and getattr(self, "d_", None) == getattr(other, "d_", None)
            and getattr(self, "counts_", None) == getattr(other, "counts_", None)
        )

    __hash__ = None


def train(corpus, order: int = DEFAULT_ORDER) -> NGramModel:
    return NGramModel(order=order).fit(corpus)
