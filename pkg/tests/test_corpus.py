"""Segmentation pipeline vs brute-force oracles, plus synthetic-corpus checks."""
import collections

import numpy as np
import pytest

from rtnet.corpus import (
    ActSpec,
    FRAME_MS,
    SpeechActivity,
    SynthConfig,
    WordAnnotation,
    activity_from_words,
    extract_ipus,
    extract_turn_pairs,
    extract_turns,
    generate_synthetic_corpus,
    sample_r_start,
    segment_conversation,
)
from rtnet.rng import RngStream


# ---------------------------------------------------------------------------
# brute-force re-implementations (deliberately naive, frame-by-frame)
# ---------------------------------------------------------------------------


def brute_activity(words, speakers, n_frames):
    out = {s: np.zeros(n_frames, dtype=bool) for s in speakers}
    for f in range(n_frames):
        lo, hi = f * FRAME_MS, (f + 1) * FRAME_MS
        for w in words:
            if w.start_ms < hi and w.end_ms > lo:
                out[w.speaker][f] = True
    return out


def brute_ipus(vec):
    groups = []
    current = []
    for f, active in enumerate(vec):
        if not active:
            continue
        if current and f - current[-1] - 1 >= 4:
            groups.append(current)
            current = []
        current.append(f)
    if current:
        groups.append(current)
    return [(g[0], g[-1]) for g in groups]


def brute_turns(activity):
    all_turns = []
    speakers = sorted(activity.frames)
    for s in speakers:
        other = activity.frames[[x for x in speakers if x != s][0]]
        spans = brute_ipus(activity.frames[s])
        i = 0
        while i < len(spans):
            group = [spans[i]]
            while i + 1 < len(spans):
                gap_frames = range(group[-1][1] + 1, spans[i + 1][0])
                if any(other[g] for g in gap_frames):
                    break
                group.append(spans[i + 1])
                i += 1
            all_turns.append((s, group))
            i += 1
    all_turns.sort(key=lambda t: t[1][0][0])
    return all_turns


def brute_pairs(turns, activity):
    pairs = []
    skipped_empty = skipped_tail = 0
    for (s1, g1), (s2, g2) in zip(turns, turns[1:]):
        if s1 == s2:
            continue
        r_start = g1[-1][0]
        r_end = g2[0][0] - 1
        if r_end < r_start:
            skipped_empty += 1
            continue
        sys_act = activity.frames[s2]
        if any(sys_act[f] for f in range(r_start + 1, r_end + 1)):
            skipped_tail += 1
            continue
        user_last = g1[-1][1]
        offset_ms = (g2[0][0] - (user_last + 1)) * FRAME_MS
        pairs.append((s1, r_start, r_end, offset_ms))
    return pairs, skipped_empty, skipped_tail


def random_activity(rng, n_frames=60, p=0.45):
    return SpeechActivity(
        frames={
            "A": rng.uniform(size=n_frames) < p,
            "B": rng.uniform(size=n_frames) < p,
        }
    )


# ---------------------------------------------------------------------------
# activity_from_words
# ---------------------------------------------------------------------------


class TestActivity:
    def test_word_on_grid(self):
        act = activity_from_words([WordAnnotation("hi", 0, 100, "A")])
        np.testing.assert_array_equal(act.speaker("A"), [True, True])

    def test_partial_overlap_counts(self):
        act = activity_from_words([WordAnnotation("uh", 60, 80, "A")], n_frames=3)
        np.testing.assert_array_equal(act.speaker("A"), [False, True, False])

    def test_overlapping_words_rejected(self):
        words = [
            WordAnnotation("a", 0, 120, "A"),
            WordAnnotation("b", 100, 200, "A"),
        ]
        with pytest.raises(ValueError):
            activity_from_words(words)

    def test_different_speakers_may_overlap(self):
        words = [
            WordAnnotation("a", 0, 120, "A"),
            WordAnnotation("b", 100, 200, "B"),
        ]
        act = activity_from_words(words)
        assert act.speaker("A")[0] and act.speaker("B")[3]

    def test_zero_length_word_rejected(self):
        with pytest.raises(ValueError):
            WordAnnotation("x", 100, 100, "A")

    def test_random_words_match_brute_force(self):
        rng = RngStream(11, 1)
        for trial in range(50):
            words = []
            for s in "AB":
                t = 0.0
                for _ in range(int(rng.integers(1, 8))):
                    t += float(rng.integers(0, 300))
                    dur = float(rng.integers(30, 400))
                    words.append(WordAnnotation(f"w{trial}", t, t + dur, s))
                    t += dur
            n_frames = int(np.ceil(max(w.end_ms for w in words) / FRAME_MS))
            act = activity_from_words(words, n_frames=n_frames)
            ref = brute_activity(words, "AB", n_frames)
            for s in "AB":
                np.testing.assert_array_equal(act.speaker(s), ref[s], err_msg=f"trial {trial}")


# ---------------------------------------------------------------------------
# IPU / turn / pair extraction
# ---------------------------------------------------------------------------


class TestIpus:
    def test_sub_threshold_gap_merges(self):
        vec = np.array([1, 1, 1, 0, 0, 0, 1, 1], dtype=bool)
        ipus = extract_ipus(vec, "A")
        assert [(i.start_frame, i.end_frame) for i in ipus] == [(0, 7)]

    def test_threshold_gap_splits(self):
        vec = np.array([1, 1, 1, 0, 0, 0, 0, 1, 1], dtype=bool)
        ipus = extract_ipus(vec, "A")
        assert [(i.start_frame, i.end_frame) for i in ipus] == [(0, 2), (7, 8)]

    def test_empty_activity(self):
        assert extract_ipus(np.zeros(10, dtype=bool), "A") == []

    def test_random_vectors_match_brute_force(self):
        rng = RngStream(12, 2)
        for trial in range(200):
            vec = rng.uniform(size=40) < 0.5
            got = [(i.start_frame, i.end_frame) for i in extract_ipus(vec, "A")]
            assert got == brute_ipus(vec), f"trial {trial}"


class TestTurns:
    @staticmethod
    def _segment(activity):
        ipus = {s: extract_ipus(activity.speaker(s), s) for s in sorted(activity.frames)}
        return extract_turns(ipus["A"], ipus["B"], activity)

    def test_silent_gap_merges_same_speaker(self):
        act = SpeechActivity(
            frames={
                "A": np.array([1, 1, 0, 0, 0, 0, 1, 1], dtype=bool),
                "B": np.zeros(8, dtype=bool),
            }
        )
        turns = self._segment(act)
        assert len(turns) == 1
        assert len(turns[0].ipus) == 2

    def test_other_speech_in_gap_splits(self):
        act = SpeechActivity(
            frames={
                "A": np.array([1, 1, 0, 0, 0, 0, 1, 1], dtype=bool),
                "B": np.array([0, 0, 0, 1, 0, 0, 0, 0], dtype=bool),
            }
        )
        turns = self._segment(act)
        assert [t.speaker for t in turns] == ["A", "B", "A"]

    def test_random_vectors_match_brute_force(self):
        rng = RngStream(13, 3)
        for trial in range(200):
            act = random_activity(rng)
            got = [
                (t.speaker, [(i.start_frame, i.end_frame) for i in t.ipus])
                for t in self._segment(act)
            ]
            assert got == brute_turns(act), f"trial {trial}"


class TestTurnPairs:
    def test_alternating_turns_give_two_pairs(self):
        act = SpeechActivity(
            frames={
                "A": np.array([1, 1, 0, 0, 0, 0, 0, 0, 1, 1, 0, 0], dtype=bool),
                "B": np.array([0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0], dtype=bool),
            }
        )
        seg = segment_conversation(activity=act)
        assert [(p.user_turn.speaker, p.system_turn.speaker) for p in seg.pairs] == [
            ("A", "B"),
            ("B", "A"),
        ]

    def test_labels_single_one_at_r_end(self):
        act = SpeechActivity(
            frames={
                "A": np.array([1, 1, 1, 0, 0, 0, 0, 0], dtype=bool),
                "B": np.array([0, 0, 0, 0, 0, 1, 1, 0], dtype=bool),
            }
        )
        pair = segment_conversation(activity=act).pairs[0]
        assert pair.r_start_bound == 0
        assert pair.r_end == 4
        region = pair.labels[pair.r_start_bound : pair.r_end + 1]
        assert region.sum() == 1 and region[-1] == 1
        # offset: system starts frame 5, user last speech frame 2 -> gap 2 frames
        assert pair.offset_ms == 100

    def test_overlap_gives_negative_offset(self):
        act = SpeechActivity(
            frames={
                "A": np.array([1, 1, 1, 1, 0, 0], dtype=bool),
                "B": np.array([0, 0, 0, 1, 1, 0], dtype=bool),
            }
        )
        pair = segment_conversation(activity=act).pairs[0]
        assert pair.offset_ms == -50
        assert pair.r_end == 2

    def test_empty_r_pair_skipped_and_counted(self):
        # system starts at the same frame the user's final IPU starts
        act = SpeechActivity(
            frames={
                "A": np.array([1, 1, 0, 0, 0, 0], dtype=bool),
                "B": np.array([1, 1, 1, 0, 0, 0], dtype=bool),
            }
        )
        seg = segment_conversation(activity=act)
        assert seg.pairs == []
        assert seg.n_skipped_empty_r == 1

    def test_random_vectors_match_brute_force(self):
        rng = RngStream(14, 4)
        for trial in range(200):
            act = random_activity(rng)
            seg = segment_conversation(activity=act)
            got = [
                (p.user_turn.speaker, p.r_start_bound, p.r_end, p.offset_ms)
                for p in seg.pairs
            ]
            ref, skipped_empty, skipped_tail = brute_pairs(brute_turns(act), act)
            assert got == ref, f"trial {trial}"
            assert seg.n_skipped_empty_r == skipped_empty, f"trial {trial}"
            assert seg.n_skipped_overlap_tail == skipped_tail, f"trial {trial}"

    def test_label_invariant_on_random_vectors(self):
        rng = RngStream(15, 5)
        for _ in range(100):
            act = random_activity(rng)
            for p in segment_conversation(activity=act).pairs:
                region = p.labels[p.r_start_bound : p.r_end + 1]
                assert region.sum() == 1
                assert region[-1] == 1


class TestSampleRStart:
    def _pair(self, r_start, r_end):
        n = r_end + 3
        a = np.zeros(n, dtype=bool)
        a[r_start : r_end + 1] = True  # user speaks through R
        b = np.zeros(n, dtype=bool)
        b[r_end + 1] = True
        return segment_conversation(
            activity=SpeechActivity(frames={"A": a, "B": b})
        ).pairs[0]

    def test_length_one_region(self):
        pair = self._pair(4, 4)
        rng = RngStream(0, 6)
        assert all(sample_r_start(pair, rng) == 4 for _ in range(20))

    def test_uniform_frequencies(self):
        pair = self._pair(10, 19)
        rng = RngStream(1, 7)
        draws = [sample_r_start(pair, rng) for _ in range(100_000)]
        freq = collections.Counter(draws)
        assert set(freq) == set(range(10, 20))
        for f in range(10, 20):
            assert abs(freq[f] / 100_000 - 0.1) < 0.01

    def test_deterministic_sequence(self):
        pair = self._pair(3, 9)
        a = [sample_r_start(pair, RngStream(5, 8)) for _ in range(5)]
        b = [sample_r_start(pair, RngStream(5, 8)) for _ in range(5)]
        # fresh stream each draw -> constant; same key -> same value
        assert a == b


# ---------------------------------------------------------------------------
# synthetic corpus
# ---------------------------------------------------------------------------


def small_cfg(**kw):
    base = dict(
        n_pairs=30,
        acts=(ActSpec("early", -100.0, 150.0), ActSpec("late", 400.0, 150.0)),
        seed=123,
    )
    base.update(kw)
    return SynthConfig(**base)


class TestSyntheticCorpus:
    def test_degenerate_gaussian_exact_offsets(self):
        cfg = small_cfg(acts=(ActSpec("fix", 300.0, 0.0), ActSpec("other", 300.0, 0.0)))
        corpus = generate_synthetic_corpus(cfg)
        for conv in corpus.conversations:
            seg = segment_conversation(words=corpus.all_words(conv))
            for p in seg.pairs:
                assert p.offset_ms == 300

    def test_empirical_act_means(self):
        cfg = small_cfg(n_pairs=2000, seed=7)
        corpus = generate_synthetic_corpus(cfg)
        for act in cfg.acts:
            vals = np.array(corpus.meta["act_offsets_ms"][act.name], dtype=float)
            assert len(vals) > 500
            assert abs(vals.mean() - act.mean_ms) < 30.0, act.name

    def test_same_seed_identical_corpus(self):
        c1 = generate_synthetic_corpus(small_cfg())
        c2 = generate_synthetic_corpus(small_cfg())
        assert len(c1.conversations) == len(c2.conversations)
        for a, b in zip(c1.conversations, c2.conversations):
            assert a.words == b.words
            assert a.pair_acts == b.pair_acts
            for s in "AB":
                np.testing.assert_array_equal(a.acoustic[s], b.acoustic[s])
        assert c1.meta == c2.meta

    def test_different_seed_differs(self):
        c1 = generate_synthetic_corpus(small_cfg(seed=1))
        c2 = generate_synthetic_corpus(small_cfg(seed=2))
        assert c1.conversations[0].words != c2.conversations[0].words

    def test_segmentation_recovers_every_pair(self):
        cfg = small_cfg(n_pairs=60, seed=99)
        corpus = generate_synthetic_corpus(cfg)
        total = 0
        offsets = collections.defaultdict(list)
        for conv in corpus.conversations:
            seg = segment_conversation(words=corpus.all_words(conv))
            assert seg.n_skipped_empty_r == 0
            assert seg.n_skipped_overlap_tail == 0
            assert len(seg.pairs) == len(conv.pair_acts)
            for p, act in zip(seg.pairs, conv.pair_acts):
                offsets[act].append(p.offset_ms)
                assert p.r_length >= 2
            total += len(seg.pairs)
        assert total == cfg.n_pairs
        for act in cfg.acts:
            assert collections.Counter(offsets[act.name]) == collections.Counter(
                corpus.meta["act_offsets_ms"][act.name]
            )

    def test_turn_end_countdown_cue(self):
        cfg = small_cfg(n_pairs=3, seed=5)
        corpus = generate_synthetic_corpus(cfg)
        conv = corpus.conversations[0]
        seg = segment_conversation(words=corpus.all_words(conv))
        for p in seg.pairs:
            user = p.user_turn
            ch1 = conv.acoustic[user.speaker][:, 1]
            assert ch1[user.end_frame] == 1.0
            # walk back through the final IPU: the cue counts down at a
            # fixed per-frame step, so its value alone pins time-to-end
            t = user.end_frame
            while t > 0 and ch1[t] > 0:
                t -= 1
            span = user.end_frame - t
            assert span >= 10
            expect = 1.0 - np.arange(span - 1, -1, -1) / cfg.ramp_frames
            np.testing.assert_allclose(
                ch1[t + 1 : user.end_frame + 1], expect, rtol=1e-6
            )

    def test_act_signature_on_response_frames(self):
        cfg = small_cfg(n_pairs=6, seed=8)
        corpus = generate_synthetic_corpus(cfg)
        conv = corpus.conversations[0]
        seg = segment_conversation(words=corpus.all_words(conv))
        names = [a.name for a in cfg.acts]
        for p, act in zip(seg.pairs, conv.pair_acts):
            sig = (names.index(act) + 1) / len(names)
            sys = p.system_turn
            vals = conv.acoustic[sys.speaker][sys.start_frame : sys.end_frame + 1, 2]
            speech = conv.acoustic[sys.speaker][sys.start_frame : sys.end_frame + 1, 0] > 0
            np.testing.assert_allclose(vals[speech], sig, rtol=1e-6)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            small_cfg(acts=(ActSpec("only", 0.0, 1.0),))
        with pytest.raises(ValueError):
            small_cfg(n_pairs=0)
        with pytest.raises(ValueError):
            small_cfg(acoustic_dim=2)
        with pytest.raises(ValueError):
            ActSpec("bad", 0.0, -1.0)

    def test_offsets_clamped_to_floor(self):
        cfg = small_cfg(
            n_pairs=200,
            acts=(ActSpec("veryearly", -3000.0, 100.0), ActSpec("late", 400.0, 100.0)),
            seed=3,
        )
        corpus = generate_synthetic_corpus(cfg)
        vals = corpus.meta["act_offsets_ms"]["veryearly"]
        assert vals and all(v == -1000 for v in vals)
