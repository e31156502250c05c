"""Compare generated response-offset histograms against the corpus truth.

Trains a small model, samples offsets for the held-out pairs several times,
and prints per-act ASCII histograms next to the true distribution. Negative
offsets are responses that begin in overlap.
"""
import argparse

import numpy as np

from rtnet.config import RunConfig
from rtnet.corpus import generate_synthetic_corpus
from rtnet.dataset import build_dataset, split_dataset
from rtnet.evaluation import distribution_distance, offset_histogram, per_act_offsets
from rtnet.features import build_vocab
from rtnet.inference import sample_offsets
from rtnet.model import ResponseTimingModel
from rtnet.training import train

parser = argparse.ArgumentParser()
parser.add_argument("--iterations", type=int, default=600)
parser.add_argument("--pairs", type=int, default=600)
parser.add_argument("--runs", type=int, default=5, help="sampling sweeps per pair")
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

run = RunConfig(n_pairs=args.pairs, iterations=args.iterations,
                batch_size=16, lr=1.5e-3, seed=args.seed)
corpus = generate_synthetic_corpus(run.synth_config())
vocab = build_vocab(corpus)
dataset = build_dataset(corpus, vocab)
train_set, test_set = split_dataset(dataset, run.test_frac, seed=run.seed)

model = ResponseTimingModel(run.model_config(vocab.n_ids))
print(f"training on {len(train_set)} pairs ...")
train(model, train_set.examples, dataset.silence_template, run.train_config())

gen = sample_offsets(model, test_set.examples, dataset.silence_template,
                     seed=run.seed, n_runs=args.runs)
gen_by_act = per_act_offsets(gen)
true_by_act = {}
for e in dataset.examples:
    true_by_act.setdefault(e.act, []).append(float(e.true_offset_ms))


def bar(frac, width=40):
    return "#" * int(round(frac * width))


for act in sorted(gen_by_act):
    gh = offset_histogram(gen_by_act[act])
    th = offset_histogram(true_by_act[act])
    ks, emd = distribution_distance(gh, th)
    print(f"\n=== act {act!r}:  KS {ks:.3f}  EMD {emd:.0f} ms ===")
    print(f"{'offset':>8}  {'generated':<42} {'true':<42}")
    g, t = gh.normalized, th.normalized
    peak = max(g.max(), t.max())
    keep = np.nonzero((g > 0) | (t > 0))[0]
    for i in range(keep.min(), keep.max() + 1):
        print(f"{gh.centers[i]:>7.0f}   {bar(g[i] / peak):<42} {bar(t[i] / peak):<42}")
    print(f"mean: generated {np.mean(gen_by_act[act]):.0f} ms, "
          f"true {np.mean(true_by_act[act]):.0f} ms")
