import json
import hashlib
from collections import Counter

import numpy as np
import pytest

from overlapsim.audio import AudioBuffer, read_wav, silence
from overlapsim.discretize import TokenSequence, consecutive_one, decode_tokens, discretize_time, discretize_word
from overlapsim.exceptions import ValidationError
from overlapsim.pool import Utterance, UtterancePool
from overlapsim.simulate import (
    SimulationConfig,
    generate_batch,
    pick_algorithm,
    sample_seed,
    simulate_random,
    simulate_time_based,
    simulate_word_based,
    write_batch,
)
from overlapsim.synthetic import exact_duration_pool, tone

import oracles
from conftest import SIM_RATE


def _time_tokens(*x, d=0.25):
    return TokenSequence(tuple(x), "time", d)


def _word_tokens(*x):
    return TokenSequence(tuple(x), "word")


def _rebuild(sample, pool):
    """Re-mix the placed utterances at their annotated offsets."""
    by_id = {u.utterance_id: u for u in pool}
    out = np.zeros(len(sample.audio), dtype=np.float64)
    for uid, (_, b, _) in zip(sample.utterance_ids, sample.spans):
        a = by_id[uid].load_audio().samples
        k = int(round(b * pool.sample_rate))
        out[k : k + len(a)] += a
    return out


class TestTimeBased:
    def test_single_run(self):
        u = Utterance("u", tone(0.4, SIM_RATE, np.random.default_rng(0)), 0.4)
        pool = UtterancePool((u,))
        for seed in range(20):
            s = simulate_time_based(None, pool, seed, tokens=_time_tokens(1, 1))
            (_, b, _), = s.spans
            assert 0.0 <= b <= 0.1 + 1e-9
            assert s.audio.duration >= 0.4

    def test_all_silent(self):
        pool = exact_duration_pool(0.25, 4)
        s = simulate_time_based(None, pool, 0, tokens=_time_tokens(0, 0, 0))
        assert s.words == [] and s.audio.duration == 0.75 and not s.audio.samples.any()

    def test_worked_pattern_overlaps(self):
        pool = exact_duration_pool(0.25, 8)
        s = simulate_time_based(None, pool, 1, tokens=_time_tokens(1, 1, 3, 3, 2))
        (_, b0, e0), (_, b1, e1) = s.spans
        assert len(s.spans) == 2 and b1 < e0 and b0 < b1

    def test_long_utterance_anchored_at_run_start(self):
        pool = UtterancePool((Utterance("u", silence(2.0, SIM_RATE), 2.0),))
        s = simulate_time_based(None, pool, 0, tokens=_time_tokens(0, 0, 1))
        assert s.spans[0][1] == 0.5

    def test_spans_cover_their_runs(self):
        d = 0.25
        pool = exact_duration_pool(d, 50)
        rng = np.random.default_rng(0)
        for seed in range(50):
            x = rng.integers(0, 4, size=30).tolist()
            s = simulate_time_based(None, pool, seed, tokens=_time_tokens(*x))
            runs = consecutive_one(decode_tokens(x))
            assert len(runs) == len(s.spans)
            for run, (_, b, e) in zip(runs, s.spans):
                for k in range(run.begin, run.end + 1):
                    assert b < d * (k + 1) and e > d * k

    def test_model_kind_checked(self, word_model, realistic_pool):
        with pytest.raises(ValidationError):
            simulate_time_based(word_model, realistic_pool, 0)

    def test_deterministic(self, time_model, realistic_pool):
        a = simulate_time_based(time_model, realistic_pool, 42)
        b = simulate_time_based(time_model, realistic_pool, 42)
        assert a.audio == b.audio and a.to_dict() == b.to_dict()

    def test_annotation_within_audio(self, time_model, realistic_pool):
        for seed in range(30):
            s = simulate_time_based(time_model, realistic_pool, seed)
            assert all(0 <= w.begin < w.end <= s.audio.duration + 1e-9 for w in s.words)
            assert s.audio.duration >= len(s.tokens) * 0.25 - 1e-9

    def test_mix_is_sum_of_parts(self, time_model, realistic_pool):
        s = simulate_time_based(time_model, realistic_pool, 3)
        assert np.allclose(s.audio.samples, _rebuild(s, realistic_pool), atol=1e-6)


class TestWordBased:
    def test_worked_example(self, count_pool):
        s = simulate_word_based(None, count_pool, 0, tokens=_word_tokens(1, 1, 3, 3, 2))
        a = [w for w in s.words if w.utterance_id == s.utterance_ids[0]]
        b = [w for w in s.words if w.utterance_id == s.utterance_ids[1]]
        assert len(a) == 3 and len(b) == 2
        assert s.spans[0][1] == 0.0
        assert a[1].end <= b[0].begin < a[2].end  # between D[i0-2] and D[i0-1], i0 = 3
        assert discretize_word(s.transcript(), s.channels()).tokens == (1, 1, 3, 3, 2)

    def test_needs_word_timings(self):
        pool = UtterancePool((Utterance("u", silence(1, SIM_RATE), 1.0),))
        with pytest.raises(ValidationError):
            simulate_word_based(None, pool, 0, tokens=_word_tokens(1))

    def test_zero_owned_run_skipped(self, count_pool):
        s = simulate_word_based(None, count_pool, 0, tokens=_word_tokens(3, 1))
        assert len(s.spans) == 1

    def test_count_mismatch_still_two_talkers(self, realistic_pool, word_model):
        for seed in range(50):
            assert simulate_word_based(word_model, realistic_pool, seed).max_concurrent() <= 2

    def test_deterministic(self, word_model, count_pool):
        a = simulate_word_based(word_model, count_pool, 9)
        b = simulate_word_based(word_model, count_pool, 9)
        assert a.audio == b.audio and a.to_dict() == b.to_dict()

    def test_round_trip(self, word_model, count_pool):
        for seed in range(20):
            s = simulate_word_based(word_model, count_pool, seed)
            assert discretize_word(s.transcript(), s.channels(), None).tokens == s.tokens.tokens


class TestRandom:
    def test_single_utterance_passthrough(self, realistic_pool):
        seed = next(s for s in range(100) if len(simulate_random(realistic_pool, 3, s).spans) == 1)
        s = simulate_random(realistic_pool, 3, seed)
        (uid,) = s.utterance_ids
        u = next(x for x in realistic_pool if x.utterance_id == uid)
        assert s.audio == u.load_audio()

    def test_two_equal_utterances(self):
        u = Utterance("u", tone(1.0, SIM_RATE, np.random.default_rng(0)), 1.0, (("x", 0.0, 1.0),))
        pool = UtterancePool((u,))
        for seed in range(100):
            s = simulate_random(pool, 2, seed)
            if len(s.spans) == 2:
                off = s.spans[1][1]
                assert 0.0 <= off < 1.0
                overlap = min(s.spans[0][2], s.spans[1][2]) - off
                assert overlap == pytest.approx(1.0 - off)

    @pytest.mark.parametrize("k", [2, 5, 8])
    def test_two_talkers(self, realistic_pool, k):
        for seed in range(100):
            s = simulate_random(realistic_pool, k, seed)
            assert s.max_concurrent() <= 2
            assert oracles.max_active([(b, e) for _, b, e in s.spans]) <= 2
            assert 1 <= len(s.spans) <= k

    def test_channels_follow_toggle(self, realistic_pool):
        s = simulate_random(realistic_pool, 5, 4)
        t = s.transcript()
        assert s.channels() == oracles.toggle_channels([w.speaker for w in t.words])

    def test_gain_jitter(self, realistic_pool):
        a = simulate_random(realistic_pool, 3, 1)
        b = simulate_random(realistic_pool, 3, 1, gain_jitter=6.0)
        assert a.spans == b.spans and a.audio != b.audio

    def test_bad_k(self, realistic_pool):
        with pytest.raises(ValueError):
            simulate_random(realistic_pool, 0, 1)


class TestBatch:
    def test_ratio_shares(self):
        weights = {"random": 0.3, "word": 0.3, "time": 0.4}
        picks = Counter(pick_algorithm(weights, 11, i) for i in range(10_000))
        for name, p in weights.items():
            assert abs(picks[name] / 10_000 - p) <= 0.02

    def test_single_algorithm(self, realistic_pool):
        cfg = SimulationConfig("mix", realistic_pool, ratios={"random": 1.0})
        assert {s.algorithm for s in generate_batch(cfg, 20, 0)} == {"random"}

    def test_sample_depends_only_on_index(self, realistic_pool, time_model):
        cfg = SimulationConfig("time", realistic_pool, time_model=time_model)
        full = list(generate_batch(cfg, 5, 3))
        tail = list(generate_batch(cfg, 2, 3, start=3))
        assert [s.to_dict() for s in full[3:]] == [s.to_dict() for s in tail]
        assert full[4].seed == sample_seed(3, 4)

    @pytest.mark.parametrize("kwargs", [
        {"algorithm": "mix", "ratios": {"random": 0.5, "time": 0.6}},
        {"algorithm": "mix", "ratios": {"random": 1.0, "frame": 0.0}},
        {"algorithm": "mix"},
        {"algorithm": "time"},
        {"algorithm": "bogus"},
    ])
    def test_invalid_config(self, realistic_pool, kwargs):
        with pytest.raises(ValueError):
            SimulationConfig(pool=realistic_pool, **kwargs).validate()

    def test_write_batch(self, tmp_path, realistic_pool):
        cfg = SimulationConfig("random", realistic_pool, max_speakers=3)
        samples = list(generate_batch(cfg, 3, 0))
        manifest = json.loads(write_batch(samples, tmp_path).read_text())
        lines = (tmp_path / "annotations.jsonl").read_text().splitlines()
        for entry, line, s in zip(manifest["samples"], lines, samples):
            data = (tmp_path / entry["audio"]).read_bytes()
            assert entry["audio_sha256"] == hashlib.sha256(data).hexdigest()
            assert entry["annotation_sha256"] == hashlib.sha256(line.encode()).hexdigest()
            assert json.loads(line)["sample_id"] == s.sample_id
            assert read_wav(tmp_path / entry["audio"]).sample_rate == SIM_RATE
