import json

import pytest
from hypothesis import given, settings

from overlapsim.exceptions import ParseError, ValidationError
from overlapsim.transcript import (
    TimedWord,
    Transcript,
    assign_channels,
    dump_jsonl,
    max_silence_gap,
    parse_ctm,
    parse_jsonl,
    parse_transcript,
    segment_by_silence,
    speech_regions,
)

from conftest import to_transcript, word_lists
from oracles import end_sorted, toggle_channels


def _t(*spec):
    """Words from (b, e, spk) triples."""
    return to_transcript([(f"w{i}", b, e, s) for i, (b, e, s) in enumerate(spec)])


class TestTimedWord:
    def test_rejects_zero_duration(self):
        with pytest.raises(ValidationError):
            TimedWord("x", 1.0, 1.0, "A")

    def test_rejects_negative_begin(self):
        with pytest.raises(ValidationError):
            TimedWord("x", -0.1, 1.0, "A")


class TestTranscript:
    def test_words_sorted_by_end(self):
        t = _t((0.0, 0.9, "A"), (0.1, 0.5, "B"))
        assert [w.end for w in t.words] == [0.5, 0.9]

    def test_end_ties_broken_by_begin_then_input_order(self):
        t = to_transcript([("a", 0.2, 1.0, "A"), ("b", 0.0, 1.0, "B"), ("c", 0.0, 1.0, "C")])
        assert [w.text for w in t.words] == ["b", "c", "a"]

    def test_duration_defaults_to_last_end(self):
        assert _t((0, 1.5, "A")).duration == 1.5

    def test_duration_shorter_than_words_rejected(self):
        with pytest.raises(ValidationError):
            Transcript("r", (TimedWord("x", 0, 2, "A"),), duration=1.0)


class TestParse:
    def test_single_record(self):
        line = json.dumps({"recording_id": "r1", "words": [{"w": "hi", "b": 0.0, "e": 0.4, "spk": "A"}]})
        (t,) = parse_transcript(line, "jsonl")
        assert t.recording_id == "r1" and len(t) == 1 and t.words[0].text == "hi"

    def test_output_sorted(self):
        line = json.dumps({"recording_id": "r", "words": [
            {"w": "late", "b": 0.0, "e": 0.9, "spk": "A"}, {"w": "early", "b": 0.1, "e": 0.5, "spk": "A"}]})
        (t,) = parse_jsonl(line)
        assert [w.text for w in t.words] == ["early", "late"]

    def test_zero_length_word_is_validation_error(self):
        line = json.dumps({"recording_id": "r", "words": [{"w": "x", "b": 1.0, "e": 1.0, "spk": "A"}]})
        with pytest.raises(ValidationError):
            parse_jsonl(line)

    def test_malformed_line_reports_line_number(self):
        good = json.dumps({"recording_id": "r", "words": [{"w": "x", "b": 0, "e": 1, "spk": "A"}]})
        with pytest.raises(ParseError) as exc:
            parse_jsonl(good + "\n{not json\n")
        assert exc.value.lineno == 2

    def test_missing_field_is_parse_error(self):
        with pytest.raises(ParseError):
            parse_jsonl(json.dumps({"recording_id": "r", "words": [{"w": "x", "b": 0}]}))

    def test_sample_id_alias(self):
        (t,) = parse_jsonl(json.dumps({"sample_id": "s", "words": [{"w": "x", "b": 0, "e": 1, "spk": "A"}]}))
        assert t.recording_id == "s"

    def test_ctm(self):
        data = ";; comment\nr1 1 0.00 0.40 hi A\nr1 1 0.50 0.30 yo B\nr2 1 0.0 1.0 x A\n"
        ts = parse_ctm(data)
        assert [t.recording_id for t in ts] == ["r1", "r2"]
        assert ts[0].words[1].end == pytest.approx(0.8)

    def test_ctm_short_line(self):
        with pytest.raises(ParseError):
            parse_ctm("r1 1 0.0 0.4 hi\n")

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            parse_transcript("", "xml")

    @settings(max_examples=50, deadline=None)
    @given(word_lists())
    def test_jsonl_round_trip(self, words):
        t = to_transcript(words)
        assert parse_jsonl(dump_jsonl([t])) == [t]


class TestAssignChannels:
    @pytest.mark.parametrize("speakers,expected", [
        ("AABA", [0, 0, 1, 0]),
        ("AAA", [0, 0, 0]),
        ("ABAB", [0, 1, 0, 1]),
    ])
    def test_examples(self, speakers, expected):
        t = _t(*[(i, i + 1, s) for i, s in enumerate(speakers)])
        assert assign_channels(t) == expected

    def test_empty_is_error(self):
        with pytest.raises(ValidationError):
            assign_channels(Transcript("r", ()))

    @settings(max_examples=200, deadline=None)
    @given(word_lists())
    def test_toggle_invariant(self, words):
        t = to_transcript(words)
        ch = assign_channels(t)
        assert ch[0] == 0
        for i in range(1, len(ch)):
            assert (ch[i] != ch[i - 1]) == (t.words[i].speaker != t.words[i - 1].speaker)
        assert ch == toggle_channels([w[3] for w in end_sorted(words)])


class TestSegmentation:
    def test_short_gap_one_segment(self):
        assert len(segment_by_silence(_t((0, 0.4, "A"), (0.5, 1.0, "A")), 0.5)) == 1

    def test_long_gap_two_segments(self):
        segs = segment_by_silence(_t((0, 0.4, "A"), (1.0, 1.5, "A")), 0.5)
        assert [len(s) for s in segs] == [1, 1]
        assert segs[1].words[0].begin == 1.0  # absolute times kept

    def test_full_overlap_one_segment(self):
        assert len(segment_by_silence(_t((0, 1, "A"), (0, 1, "B")), 0.5)) == 1

    def test_gap_measured_across_speakers(self):
        # A's words are 1.1 s apart, but B talks in between
        t = _t((0, 0.4, "A"), (0.3, 1.2, "B"), (1.5, 2.0, "A"))
        assert len(segment_by_silence(t, 0.5)) == 1
        assert max_silence_gap(t.words) == pytest.approx(0.3)

    def test_speech_regions(self):
        t = _t((0, 1, "A"), (0.5, 1.5, "B"), (2, 3, "A"))
        assert speech_regions(t.words) == [(0, 1.5), (2, 3)]

    @settings(max_examples=200, deadline=None)
    @given(word_lists())
    def test_partition(self, words):
        t = to_transcript(words)
        segs = segment_by_silence(t, 0.5)
        flat = [w for s in segs for w in s.words]
        assert sorted(flat, key=id) == sorted(t.words, key=id)
        for a, b in zip(segs, segs[1:]):
            assert min(w.begin for w in b.words) - max(w.end for w in a.words) > 0.5
        for s in segs:
            assert max_silence_gap(s.words) <= 0.5
