from __future__ import annotations

import numpy as np
import pytest
from hypothesis import strategies as st

from overlapsim.transcript import TimedWord, Transcript


def random_words(rng, max_words=20, max_speakers=3, grid=None):
    """Random (text, b, e, spk) tuples; ``grid`` snaps times to multiples of it."""
    n = int(rng.integers(1, max_words + 1))
    spk = [f"S{k}" for k in range(int(rng.integers(1, max_speakers + 1)))]
    out = []
    for i in range(n):
        b = float(rng.uniform(0, 6))
        e = b + float(rng.uniform(0.05, 1.5))
        if grid:
            b = round(b / grid) * grid
            e = max(b + grid, round(e / grid) * grid)
        out.append((f"w{i}", b, e, str(rng.choice(spk))))
    return out


def to_transcript(words, rid="r"):
    return Transcript(rid, tuple(TimedWord(*w) for w in words))


@st.composite
def word_lists(draw, max_words=12, max_speakers=3, grid=0.05):
    """Hypothesis strategy for word tuples on a coarse time grid (forces ties and touching ends)."""
    n = draw(st.integers(1, max_words))
    out = []
    for i in range(n):
        b = draw(st.integers(0, 80)) * grid
        length = draw(st.integers(1, 20)) * grid
        spk = draw(st.sampled_from([f"S{k}" for k in range(max_speakers)]))
        out.append((f"w{i}", b, b + length, spk))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def paper_q():
    return np.array([[1, 0], [1, 0], [1, 1], [1, 1], [0, 1]])


# -- shared simulation material ------------------------------------------------

SIM_RATE = 1000


@pytest.fixture(scope="session")
def realistic_pool():
    from overlapsim.pool import build_pool
    from overlapsim.synthetic import single_talker_corpus

    return build_pool(single_talker_corpus(300, rate=SIM_RATE, seed=2), 300, seed=0)


@pytest.fixture(scope="session")
def time_model():
    from overlapsim.discretize import discretize
    from overlapsim.slm import train
    from overlapsim.synthetic import meetings

    return train(discretize(meetings(10, seed=3, duration=30.0), "time", 0.25), order=8)


@pytest.fixture(scope="session")
def word_model():
    from overlapsim.discretize import discretize
    from overlapsim.slm import train
    from overlapsim.synthetic import handoff_conversation

    rng = np.random.default_rng(5)
    convs = [handoff_conversation(rng, f"c{i}") for i in range(100)]
    return train(discretize(convs, "word"), order=30)


@pytest.fixture(scope="session")
def count_pool():
    from overlapsim.synthetic import exact_word_count_pool

    return exact_word_count_pool(40, rate=8000)


# -- acceptance report -----------------------------------------------------------

ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
