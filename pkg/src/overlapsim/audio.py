"""Mono float32 audio buffers, PCM16 WAV I/O and offset mixing."""

from __future__ import annotations

import io
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import AudioFormatError

DEFAULT_SAMPLE_RATE = 16000


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        samples = np.asarray(self.samples, dtype=np.float32).reshape(-1)
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __eq__(self, other):
        if not isinstance(other, AudioBuffer):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(self.samples, other.samples)

    __hash__ = None

    def slice(self, begin: float, end: float) -> "AudioBuffer":
        i = seconds_to_samples(begin, self.sample_rate)
        j = seconds_to_samples(end, self.sample_rate)
        return AudioBuffer(self.samples[i:j], self.sample_rate)


def seconds_to_samples(t: float, rate: int) -> int:
    # numpy rounds half to even, like Python's round()
    return int(np.rint(t * rate))


def silence(duration: float, rate: int = DEFAULT_SAMPLE_RATE) -> AudioBuffer:
    if duration < 0:
        raise ValueError("duration must be non-negative")
    return AudioBuffer(np.zeros(seconds_to_samples(duration, rate), dtype=np.float32), rate)


def mix_at(a: AudioBuffer, u: AudioBuffer, offset: float) -> AudioBuffer:
    """Add ``u`` into ``a`` starting ``offset`` seconds in, growing ``a`` as needed."""
    if a.sample_rate != u.sample_rate:
        raise AudioFormatError(f"sample rate mismatch: {a.sample_rate} vs {u.sample_rate}")
    if offset < 0:
        raise ValueError("offset must be non-negative")
    start = seconds_to_samples(offset, a.sample_rate)
    out = np.zeros(max(len(a), start + len(u)), dtype=np.float32)
    out[: len(a)] = a.samples
    out[start : start + len(u)] += u.samples
    return AudioBuffer(out, a.sample_rate)


def to_pcm16(samples: np.ndarray) -> np.ndarray:
    scaled = np.rint(np.asarray(samples, dtype=np.float64) * 32768.0)
    return np.clip(scaled, -32768, 32767).astype("<i2")


def wav_bytes(buf: AudioBuffer) -> bytes:
    out = io.BytesIO()
    with wave.open(out, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(buf.sample_rate)
        w.writeframes(to_pcm16(buf.samples).tobytes())
    return out.getvalue()


def write_wav(buf: AudioBuffer, path) -> None:
    Path(path).write_bytes(wav_bytes(buf))


def read_wav(path) -> AudioBuffer:
    """Read a mono 16-bit PCM WAV file; samples are scaled to [-1, 1)."""
    try:
        with wave.open(str(path), "rb") as w:
            if w.getnchannels() != 1:
                raise AudioFormatError(f"{path}: expected mono audio, got {w.getnchannels()} channels")
            if w.getsampwidth() != 2:
                raise AudioFormatError(f"{path}: expected 16-bit samples, got {8 * w.getsampwidth()}-bit")
            if w.getcomptype() != "NONE":
                raise AudioFormatError(f"{path}: compressed audio is not supported")
            rate = w.getframerate()
            frames = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise AudioFormatError(f"{path}: {exc}") from exc
    pcm = np.frombuffer(frames, dtype="<i2")
    return AudioBuffer(pcm.astype(np.float32) / 32768.0, rate)
