"""Multi-talker mixture generation.

Three generators share one mixing timeline:

* ``simulate_time_based`` places one pooled utterance per run of a sampled
  time-based token sequence, sized to the run and jittered inside it;
* ``simulate_word_based`` places utterances by word count so their words
  land on the positions of a sampled word-based sequence;
* ``simulate_random`` is the random-delay baseline.

Every placement is additive at an absolute offset. No utterance may start
before the second-latest end already on the timeline, which keeps at most
two utterances active at any instant.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .audio import AudioBuffer, seconds_to_samples, wav_bytes
from .discretize import TokenSequence, consecutive_one, decode_tokens, position_owners
from .exceptions import ValidationError
from .pool import UtterancePool, Utterance, duration_nearest_sample, word_count_nearest_sample
from .slm import NGramModel
from .transcript import TimedWord, Transcript, assign_channels

ALGORITHMS = ("random", "time", "word")


@dataclass(frozen=True)
class MixedWord:
    text: str
    begin: float
    end: float
    speaker: str
    channel: int
    utterance_id: str

    def to_dict(self) -> dict:
        return {
            "w": self.text,
            "b": self.begin,
            "e": self.end,
            "spk": self.speaker,
            "ch": self.channel,
            "utt": self.utterance_id,
        }


@dataclass(eq=False)
class MixedSample:
    sample_id: str
    audio: AudioBuffer
    words: list[MixedWord]
    algorithm: str
    seed: int | None
    tokens: TokenSequence | None = None
    utterance_ids: list[str] = field(default_factory=list)
    # (speaker, begin, end) of every placed utterance
    spans: list[tuple[str, float, float]] = field(default_factory=list)

    def transcript(self) -> Transcript:
        return Transcript(
            self.sample_id,
            tuple(TimedWord(w.text, w.begin, w.end, w.speaker) for w in self.words),
            duration=max(self.audio.duration, max((w.end for w in self.words), default=0.0)),
        )

    def channels(self) -> list[int]:
        """Annotated channel of each word, in the order of ``transcript().words``."""
        order = sorted(range(len(self.words)), key=lambda i: (self.words[i].end, self.words[i].begin))
        return [self.words[i].channel for i in order]

    def max_concurrent(self) -> int:
        """Largest number of placed utterances active at one instant."""
        events = sorted([(b, 1) for _, b, _ in self.spans] + [(e, -1) for _, _, e in self.spans])
        active = peak = 0
        for _, step in events:  # ends sort before starts at equal times
            active += step
            peak = max(peak, active)
        return peak

    def to_dict(self) -> dict:
        obj = {"sample_id": self.sample_id, "algorithm": self.algorithm, "seed": self.seed}
        if self.tokens is not None:
            obj["tokens"] = list(self.tokens.tokens)
        obj["duration"] = self.audio.duration
        obj["utterances"] = list(self.utterance_ids)
        obj["words"] = [w.to_dict() for w in self.words]
        return obj


class _Timeline:
    """Growing float32 mix buffer plus the annotation of what was placed."""

    def __init__(self, sample_rate: int):
        self.rate = sample_rate
        self.buf = np.zeros(0, dtype=np.float32)
        self.length = 0
        self.ends: list[float] = []
        self.words: list[MixedWord] = []
        self.spans: list[tuple[str, float, float]] = []
        self.utterance_ids: list[str] = []

    @property
    def duration(self) -> float:
        return self.length / self.rate

    def end2(self) -> float:
        """Second-latest end time of the placed utterances (0 with fewer than two)."""
        if len(self.ends) < 2:
            return 0.0
        return sorted(self.ends)[-2]

    def _grow(self, n: int):
        if n > len(self.buf):
            new = np.zeros(max(n, 2 * len(self.buf)), dtype=np.float32)
            new[: self.length] = self.buf[: self.length]
            self.buf = new
        self.length = max(self.length, n)

    def pad_to(self, seconds: float):
        self._grow(seconds_to_samples(seconds, self.rate))

    def place(self, u: Utterance, offset: float, channel: int, gain: float = 1.0, below=None) -> float:
        """Mix ``u`` in at ``offset`` seconds and return the offset actually used.

        The offset snaps to the sample grid; when ``offset < below``, snapping
        never lands on or past ``below``.
        """
        audio = u.load_audio()
        if audio.sample_rate != self.rate:
            raise ValidationError(
                f"{u.utterance_id}: sample rate {audio.sample_rate} differs from {self.rate}"
            )
        offset = max(offset, self.end2(), 0.0)
        start = seconds_to_samples(offset, self.rate)
        if below is not None and offset < below <= start / self.rate and start > 0:
            start -= 1
        offset = start / self.rate
        self._grow(start + len(audio))
        self.buf[start : start + len(audio)] += audio.samples * np.float32(gain)
        end = offset + len(audio) / self.rate
        speaker = f"spk{len(self.ends)}"
        self.ends.append(end)
        self.spans.append((speaker, offset, end))
        self.utterance_ids.append(u.utterance_id)
        if u.words is None:
            text = u.text if u.text else u.utterance_id
            self.words.append(MixedWord(text, offset, end, speaker, channel, u.utterance_id))
        else:
            for w, b, e in u.words:
                self.words.append(MixedWord(w, offset + b, offset + e, speaker, channel, u.utterance_id))
        return offset

    def finish(self, sample_id, algorithm, seed, tokens=None) -> MixedSample:
        return MixedSample(
            sample_id,
            AudioBuffer(self.buf[: self.length].copy(), self.rate),
            self.words,
            algorithm,
            seed,
            tokens,
            self.utterance_ids,
            self.spans,
        )


def _gains(seed, gain_jitter):
    """Per-utterance gain factors from a stream separate from the timing draws,
    so switching jitter on leaves the layout of a seeded sample unchanged."""
    if not gain_jitter:
        while True:
            yield 1.0
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    while True:
        yield float(10 ** (rng.uniform(-gain_jitter, gain_jitter) / 20))


def _check_model(model: NGramModel, kind: str):
    if getattr(model, "kind_", None) != kind:
        raise ValidationError(f"expected a {kind}-based model, got {getattr(model, 'kind_', None)!r}")


def simulate_time_based(
    model: NGramModel,
    pool: UtterancePool,
    seed: int | None = None,
    *,
    tokens: TokenSequence | None = None,
    max_tokens: int | None = None,
    gain_jitter: float = 0.0,
    sample_id: str | None = None,
) -> MixedSample:
    """One mixture shaped by a time-based token sequence.

    Each run of activity spanning windows ``b..e`` gets an utterance lasting
    between ``d*(e-b)`` and ``d*(e-b+1)`` (or the nearest available) placed
    at ``d*b`` plus a uniform jitter that keeps it inside the run. An
    utterance longer than the run starts at ``d*b`` without jitter.
    ``tokens`` bypasses sampling from ``model``.
    """
    rng = np.random.default_rng(seed)
    gains = _gains(seed, gain_jitter)
    if tokens is None:
        _check_model(model, "time")
        tokens = model.sample(rng, max_tokens)
    if tokens.kind != "time":
        raise ValidationError("time-based simulation needs time-based tokens")
    d = tokens.d
    q = decode_tokens(tokens)
    line = _Timeline(pool.sample_rate)
    for run in consecutive_one(q):
        d_min = d * (run.end - run.begin)
        d_max = d * (run.end - run.begin + 1)
        u = duration_nearest_sample(pool, d_min, d_max, rng)
        offset = d * run.begin
        if u.duration <= d_max:
            offset += rng.uniform(0.0, d_max - u.duration)
        line.place(u, offset, run.channel, next(gains))
    line.pad_to(len(tokens) * d)
    return line.finish(sample_id or f"time-{seed}", "time", seed, tokens)


def simulate_word_based(
    model: NGramModel,
    pool: UtterancePool,
    seed: int | None = None,
    *,
    tokens: TokenSequence | None = None,
    max_tokens: int | None = None,
    gain_jitter: float = 0.0,
    sample_id: str | None = None,
) -> MixedSample:
    """One mixture shaped by a word-based token sequence.

    ``ends`` maps a token position to the absolute end time of the word
    placed there; unset positions read as 0. An utterance whose first word
    belongs at position ``i0`` starts uniformly between ``ends[i0-2]`` and
    ``ends[i0-1]``. When the chosen utterance has fewer words than its run
    owns, the leftover positions repeat the last written end time.
    """
    rng = np.random.default_rng(seed)
    gains = _gains(seed, gain_jitter)
    if tokens is None:
        _check_model(model, "word")
        tokens = model.sample(rng, max_tokens)
    if tokens.kind != "word":
        raise ValidationError("word-based simulation needs word-based tokens")
    if not pool.has_word_timings:
        raise ValidationError("word-based simulation needs word timings on every pooled utterance")
    q = decode_tokens(tokens)
    runs = consecutive_one(q)
    owners = position_owners(q, runs)
    ends: dict[int, float] = {}
    line = _Timeline(pool.sample_rate)
    for run in runs:
        idx = [i for i in range(run.begin, run.end + 1) if owners[i] == run]
        if not idx:
            # a one-position overlap claimed entirely by the earlier run
            continue
        u = word_count_nearest_sample(pool, len(idx), rng)
        lo, hi = ends.get(idx[0] - 2, 0.0), ends.get(idx[0] - 1, 0.0)
        # numpy's uniform also accepts hi < lo and then draws from (hi - lo, 0]
        offset = line.place(
            u, lo + rng.uniform(0.0, hi - lo), run.channel, next(gains), below=max(lo, hi)
        )
        word_ends = [offset + e for _, _, e in u.words]
        for j, i in enumerate(idx):
            ends[i] = word_ends[j] if j < len(word_ends) else ends[idx[j - 1]]
    return line.finish(sample_id or f"word-{seed}", "word", seed, tokens)


def simulate_random(
    pool: UtterancePool,
    max_speakers: int,
    seed: int | None = None,
    *,
    gain_jitter: float = 0.0,
    sample_id: str | None = None,
) -> MixedSample:
    """Random-delay baseline.

    Draws ``K`` uniformly from ``1..max_speakers`` and ``K`` utterances with
    replacement. Each utterance after the first starts uniformly in
    ``[end2, len)`` of the mixture built so far, where ``end2`` is the
    second-latest utterance end (0 while only one utterance is present).
    Channels follow the speaker-change toggle over end-sorted words.
    """
    if max_speakers < 1:
        raise ValueError("max_speakers must be >= 1")
    rng = np.random.default_rng(seed)
    gains = _gains(seed, gain_jitter)
    k = int(rng.integers(1, max_speakers + 1))
    picks = rng.integers(len(pool), size=k)
    line = _Timeline(pool.sample_rate)
    for n, i in enumerate(picks):
        offset = 0.0 if n == 0 else rng.uniform(line.end2(), line.duration)
        line.place(pool.utterances[int(i)], offset, 0, next(gains))
    sample = line.finish(sample_id or f"random-{seed}", "random", seed)
    order = sorted(range(len(sample.words)), key=lambda i: (sample.words[i].end, sample.words[i].begin))
    toggled = assign_channels(sample.transcript())
    for pos, i in enumerate(order):
        w = sample.words[i]
        sample.words[i] = MixedWord(w.text, w.begin, w.end, w.speaker, toggled[pos], w.utterance_id)
    return sample


# -- batches -----------------------------------------------------------------


@dataclass
class SimulationConfig:
    """What ``generate_batch`` needs.

    ``algorithm`` is one of ``random``, ``time``, ``word`` or ``mix``; with
    ``mix`` each sample's algorithm is drawn from ``ratios``.
    """

    algorithm: str
    pool: UtterancePool
    time_model: NGramModel | None = None
    word_model: NGramModel | None = None
    ratios: Mapping[str, float] | None = None
    max_speakers: int = 2
    max_tokens: int | None = None
    gain_jitter: float = 0.0

    def algorithm_weights(self) -> dict[str, float]:
        if self.algorithm != "mix":
            if self.algorithm not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {self.algorithm!r}")
            return {self.algorithm: 1.0}
        if not self.ratios:
            raise ValueError("algorithm 'mix' needs ratios")
        unknown = set(self.ratios) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms in ratios: {sorted(unknown)}")
        if any(r < 0 for r in self.ratios.values()):
            raise ValueError("ratios must be non-negative")
        total = sum(self.ratios.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"ratios must sum to 1, got {total!r}")
        return {a: float(self.ratios.get(a, 0.0)) for a in ALGORITHMS}

    def validate(self):
        weights = self.algorithm_weights()
        if weights.get("time", 0) > 0 and self.time_model is None:
            raise ValueError("time-based simulation needs a time-based model")
        if weights.get("word", 0) > 0 and self.word_model is None:
            raise ValueError("word-based simulation needs a word-based model")
        if self.time_model is not None:
            _check_model(self.time_model, "time")
        if self.word_model is not None:
            _check_model(self.word_model, "word")
        return weights


def sample_seed(master_seed: int, index: int) -> int:
    """Per-sample seed derived from ``(master_seed, index)``."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1, np.uint32)[0])


def pick_algorithm(weights: Mapping[str, float], master_seed: int, index: int) -> str:
    names = [a for a in ALGORITHMS if weights.get(a, 0) > 0]
    if len(names) == 1:
        return names[0]
    rng = np.random.default_rng(np.random.SeedSequence([master_seed, index, 1]))
    p = np.array([weights[a] for a in names])
    return names[int(rng.choice(len(names), p=p / p.sum()))]


def simulate_one(config: SimulationConfig, algorithm: str, seed: int, sample_id: str) -> MixedSample:
    if algorithm == "random":
        return simulate_random(
            config.pool, config.max_speakers, seed, gain_jitter=config.gain_jitter, sample_id=sample_id
        )
    if algorithm == "time":
        return simulate_time_based(
            config.time_model, config.pool, seed,
            max_tokens=config.max_tokens, gain_jitter=config.gain_jitter, sample_id=sample_id,
        )
    if algorithm == "word":
        return simulate_word_based(
            config.word_model, config.pool, seed,
            max_tokens=config.max_tokens, gain_jitter=config.gain_jitter, sample_id=sample_id,
        )
    raise ValueError(f"unknown algorithm {algorithm!r}")


def generate_batch(config: SimulationConfig, count: int, master_seed: int, start: int = 0) -> Iterator[MixedSample]:
    """Yield ``count`` samples; sample ``i`` depends only on the config and ``(master_seed, i)``."""
    weights = config.validate()
    for i in range(start, start + count):
        algorithm = pick_algorithm(weights, master_seed, i)
        yield simulate_one(config, algorithm, sample_seed(master_seed, i), f"sample{i:06d}")


def write_batch(samples, out_dir: str | Path) -> Path:
    """Write ``<sample_id>.wav`` files, ``annotations.jsonl`` and ``manifest.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    with open(out_dir / "annotations.jsonl", "w") as ann:
        for s in samples:
            data = wav_bytes(s.audio)
            (out_dir / f"{s.sample_id}.wav").write_bytes(data)
            line = json.dumps(s.to_dict())
            ann.write(line + "\n")
            entries.append(
                {
                    "sample_id": s.sample_id,
                    "algorithm": s.algorithm,
                    "seed": s.seed,
                    "audio": f"{s.sample_id}.wav",
                    "duration": s.audio.duration,
                    "audio_sha256": hashlib.sha256(data).hexdigest(),
                    "annotation_sha256": hashlib.sha256(line.encode()).hexdigest(),
                }
            )
    manifest = out_dir / "manifest.json"
    manifest.write_text(json.dumps({"samples": entries}, indent=1) + "\n")
    return manifest
