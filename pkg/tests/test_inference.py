"""Trigger sampling protocol: draws, censoring, determinism, baseline."""
import numpy as np
import pytest

from rtnet.corpus import SynthConfig, generate_synthetic_corpus
from rtnet.dataset import build_dataset
from rtnet.features import build_vocab
from rtnet.inference import (
    draw_trigger,
    fixed_probability_baseline,
    constant_probability_loss,
    sample_constant_offsets,
    sample_offsets,
    zero_before_start,
)
from rtnet.model import ModelConfig, ResponseTimingModel
from rtnet.rng import RngStream


@pytest.fixture(scope="module")
def data():
    cfg = SynthConfig(
        n_pairs=20, acts=[("a", -100.0, 100.0), ("b", 300.0, 100.0)], seed=31
    )
    corpus = generate_synthetic_corpus(cfg)
    vocab = build_vocab(corpus)
    ds = build_dataset(corpus, vocab)
    model = ResponseTimingModel(
        ModelConfig(
            d_acoustic=4,
            vocab_size=vocab.n_ids,
            embedding_dim=5,
            acoustic_hidden=4,
            linguistic_hidden=4,
            master_hidden=5,
            hz_dim=6,
            inference_hidden=6,
            seed=3,
        )
    )
    return ds, model


class TestDrawTrigger:
    def test_certain_probability_fires_immediately(self):
        frame, censored = draw_trigger(np.ones(50), 7, 50, RngStream(0))
        assert (frame, censored) == (7, False)

    def test_impossible_probability_censors_at_last_frame(self):
        frame, censored = draw_trigger(np.zeros(50), 3, 50, RngStream(1))
        assert (frame, censored) == (49, True)

    def test_never_fires_before_start(self):
        probs = np.ones(30)
        for seed in range(20):
            frame, _ = draw_trigger(probs, 12, 30, RngStream(seed))
            assert frame >= 12

    def test_bad_start_rejected(self):
        with pytest.raises(ValueError):
            draw_trigger(np.ones(10), 10, 10, RngStream(0))
        with pytest.raises(ValueError):
            draw_trigger(np.ones(10), -1, 10, RngStream(0))

    def test_geometric_mean_waiting_time(self):
        # constant p: E[frame - start] = (1 - p) / p
        p = 0.2
        probs = np.full(4000, p)
        waits = [
            draw_trigger(probs, 0, 4000, RngStream(7, i))[0] for i in range(3000)
        ]
        assert np.mean(waits) == pytest.approx((1 - p) / p, rel=0.1)

    def test_deterministic_for_fixed_stream(self):
        probs = np.full(100, 0.05)
        a = draw_trigger(probs, 0, 100, RngStream(42))
        b = draw_trigger(probs, 0, 100, RngStream(42))
        assert a == b


class TestZeroBeforeStart:
    def test_zeroing(self):
        probs = np.full((2, 6), 0.5)
        out = zero_before_start(probs, [2, 4])
        np.testing.assert_array_equal(out[0], [0, 0, 0.5, 0.5, 0.5, 0.5])
        np.testing.assert_array_equal(out[1], [0, 0, 0, 0, 0.5, 0.5])
        assert probs[0, 0] == 0.5  # input untouched


class TestSampleOffsets:
    def test_batch_size_does_not_change_results(self, data):
        ds, model = data
        a = sample_offsets(model, ds.examples, ds.silence_template, seed=5, batch_size=3)
        b = sample_offsets(model, ds.examples, ds.silence_template, seed=5, batch_size=64)
        assert [(s.pair_id, s.offset_ms, s.censored) for s in a] == [
            (s.pair_id, s.offset_ms, s.censored) for s in b
        ]

    def test_runs_differ_but_replay_identically(self, data):
        ds, model = data
        two = sample_offsets(model, ds.examples, ds.silence_template, seed=5, n_runs=2)
        n = len(ds.examples)
        assert [s.offset_ms for s in two[:n]] != [s.offset_ms for s in two[n:]]
        again = sample_offsets(model, ds.examples, ds.silence_template, seed=5, n_runs=2)
        assert [s.offset_ms for s in again] == [s.offset_ms for s in two]

    def test_offsets_are_frame_multiples_with_hard_floor(self, data):
        ds, model = data
        samples = sample_offsets(model, ds.examples, ds.silence_template, seed=6)
        for s, e in zip(samples, ds.examples):
            assert s.offset_ms % 50 == 0
            # trigger can't predate the region start
            assert s.trigger_frame >= e.r_start

    def test_fixed_start_lower_bounds_offsets(self, data):
        ds, model = data
        samples = sample_offsets(
            model, ds.examples, ds.silence_template, seed=6, randomize_start=False
        )
        for s, e in zip(samples, ds.examples):
            assert s.trigger_frame >= e.r_start

    def test_h_z_override_conditioning(self, data):
        ds, model = data
        hz = np.full(model.config.hz_dim, 0.3, dtype=np.float32)
        samples = sample_offsets(
            model, ds.examples[:5], ds.silence_template, seed=7, h_z_override=hz
        )
        assert len(samples) == 5

    def test_censoring_pins_to_padded_end(self, data):
        ds, _ = data
        # probability ~0 via the constant baseline path
        samples = sample_constant_offsets(ds.examples[:4], 1e-12, seed=8, pad_frames=10)
        for s, e in zip(samples, ds.examples[:4]):
            assert s.censored
            assert s.trigger_frame == len(e.x_ling) + 10 - 1


class TestBaseline:
    def test_y_fixed_closed_form(self, data):
        ds, _ = data
        y, loss = fixed_probability_baseline(ds.examples)
        assert y == pytest.approx(np.mean([1.0 / e.r_length for e in ds.examples]), rel=1e-12)
        assert loss > 0

    def test_loss_matches_frame_by_frame_sum(self, data):
        ds, _ = data
        y = 0.04
        per_pair = []
        for e in ds.examples:
            total = 0.0
            for t in range(e.r_start, e.r_end + 1):
                p = y if t == e.r_end else 1.0 - y
                total += -np.log(p)
            per_pair.append(total / e.r_length)
        assert constant_probability_loss(ds.examples, y) == pytest.approx(
            np.mean(per_pair), rel=1e-12
        )

    def test_constant_sampler_is_seed_stable(self, data):
        ds, _ = data
        a = sample_constant_offsets(ds.examples, 0.1, seed=9)
        b = sample_constant_offsets(ds.examples, 0.1, seed=9)
        assert [s.offset_ms for s in a] == [s.offset_ms for s in b]

    def test_probability_bounds(self, data):
        ds, _ = data
        with pytest.raises(ValueError):
            constant_probability_loss(ds.examples, 0.0)
        with pytest.raises(ValueError):
            sample_constant_offsets(ds.examples, 1.0, seed=0)
