"""Synthetic corpora for tests, demos and the acceptance suite.

Nothing here models real speech; the point is controlled timing. Audio is
low-amplitude tones so that mixtures of two never clip.
"""

from __future__ import annotations

import numpy as np

from .audio import AudioBuffer
from .pool import Utterance, UtterancePool
from .transcript import TimedWord, Transcript


def tone(duration: float, rate: int, rng, amplitude: float = 0.1) -> AudioBuffer:
    n = int(np.rint(duration * rate))
    freq = rng.uniform(100.0, 400.0)
    return AudioBuffer(amplitude * np.sin(2 * np.pi * freq * np.arange(n) / rate), rate)


def meeting(
    rng,
    recording_id: str = "meeting",
    duration: float = 60.0,
    speakers=("A", "B", "C"),
    overlap_prob: float = 0.35,
    max_overlap: float = 2.0,
    words_per_turn=(2, 14),
    word_duration=(0.15, 0.45),
    gap=(0.05, 1.2),
) -> Transcript:
    """Turn-taking conversation with contiguous words inside each turn.

    With probability ``overlap_prob`` a turn starts up to ``max_overlap``
    seconds before the previous turn ends, but never before any earlier turn
    has ended, so at most two speakers are ever active.
    """
    words = []
    t = float(rng.uniform(0.0, 0.5))
    speaker = None
    floor = 0.0  # latest end among turns before the current one
    while t < duration:
        speaker = str(rng.choice([s for s in speakers if s != speaker]))
        begin = t
        for _ in range(int(rng.integers(words_per_turn[0], words_per_turn[1] + 1))):
            e = t + float(rng.uniform(*word_duration))
            words.append(TimedWord("w", t, e, speaker))
            t = e
        end = t
        earliest = max(floor, begin + 0.1, end - max_overlap)
        if rng.random() < overlap_prob and earliest < end:
            t = float(rng.uniform(earliest, end))
        else:
            t = max(floor, end) + float(rng.uniform(*gap))
        floor = max(floor, end)
    return Transcript(recording_id, tuple(words))


def meetings(n: int, seed: int = 0, **kwargs) -> list[Transcript]:
    rng = np.random.default_rng(seed)
    return [meeting(rng, f"meeting{i:03d}", **kwargs) for i in range(n)]


def handoff_conversation(
    rng,
    recording_id: str = "conv",
    n_turns=(1, 8),
    words_per_turn=(3, 12),
    word_duration: float = 0.3,
    speakers=("A", "B", "C"),
) -> Transcript:
    """Silence-free segment where each new turn's first word starts inside
    the previous turn's last word.

    Words have a fixed length, so the two overlapping words always overlap
    each other and nothing else; this is the overlap structure that
    word-based generation reproduces exactly.
    """
    words = []
    t = 0.0
    speaker = None
    for k in range(int(rng.integers(n_turns[0], n_turns[1] + 1))):
        speaker = str(rng.choice([s for s in speakers if s != speaker]))
        if k:
            t = words[-1].begin + float(rng.uniform(0.05, 0.95)) * word_duration
        for _ in range(int(rng.integers(words_per_turn[0], words_per_turn[1] + 1))):
            words.append(TimedWord("w", t, t + word_duration, speaker))
            t += word_duration
    return Transcript(recording_id, tuple(words))


def utterance(
    utt_id: str,
    n_words: int,
    rate: int,
    rng,
    word_duration: float | tuple[float, float] = 0.3,
    pause: tuple[float, float] = (0.0, 0.0),
    timed: bool = True,
) -> Utterance:
    """Single-talker utterance starting with its first word at time 0."""
    words = []
    t = 0.0
    for k in range(n_words):
        if k and pause[1] > 0:
            t += float(rng.uniform(*pause))
        dur = word_duration if np.isscalar(word_duration) else float(rng.uniform(*word_duration))
        words.append((f"{utt_id}w{k}", t, t + dur))
        t += dur
    audio = tone(t, rate, rng)
    # word ends are re-derived from the sample grid so they never pass the audio
    duration = audio.duration
    words = [(w, b, min(e, duration)) for w, b, e in words]
    return Utterance(utt_id, audio, duration, tuple(words) if timed else None, text=" ".join(w[0] for w in words))


def exact_word_count_pool(max_words: int = 40, rate: int = 8000, word_duration: float = 0.3, seed: int = 0) -> UtterancePool:
    """One utterance for every word count ``1..max_words``, contiguous fixed-length words."""
    rng = np.random.default_rng(seed)
    return UtterancePool(
        tuple(utterance(f"n{n:03d}", n, rate, rng, word_duration) for n in range(1, max_words + 1))
    )


def exact_duration_pool(d: float = 0.25, max_windows: int = 400, rate: int = 1000, seed: int = 0) -> UtterancePool:
    """For every run length ``L``, an utterance lasting ``d * (L - 0.5)`` as one timed word.

    Each such utterance fits strictly inside the interval that time-based
    generation asks for, so runs are reproduced window for window.
    """
    rng = np.random.default_rng(seed)
    utts = []
    for L in range(1, max_windows + 1):
        dur = d * (L - 0.5)
        audio = tone(dur, rate, rng)
        utts.append(Utterance(f"L{L:04d}", audio, audio.duration, (("x", 0.0, audio.duration),)))
    return UtterancePool(tuple(utts))


def single_talker_corpus(
    n: int,
    rate: int = 8000,
    seed: int = 0,
    words=(1, 30),
    word_duration=(0.15, 0.45),
    pause=(0.0, 0.3),
    long_pause_prob: float = 0.1,
    edge_silence: float = 0.3,
) -> list[Utterance]:
    """Source utterances with occasional long internal pauses, for pool building."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        n_words = int(rng.integers(words[0], words[1] + 1))
        utt_words = []
        t = float(rng.uniform(0.0, edge_silence))
        for k in range(n_words):
            if k:
                t += float(rng.uniform(0.6, 1.5)) if rng.random() < long_pause_prob else (float(rng.uniform(*pause)) if pause[1] > 0 else 0.0)
            dur = float(rng.uniform(*word_duration))
            utt_words.append((f"u{i}w{k}", t, t + dur))
            t += dur
        total = t + float(rng.uniform(0.0, edge_silence))
        audio = tone(total, rate, rng)
        utt_words = [(w, b, min(e, audio.duration)) for w, b, e in utt_words]
        out.append(Utterance(f"src{i:05d}", audio, audio.duration, tuple(utt_words), speaker_label=f"src{i:05d}"))
    return out
