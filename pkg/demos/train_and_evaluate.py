"""End-to-end walkthrough: synthesize a corpus, train, and evaluate.

Runs at a deliberately small scale so the whole script finishes in about a
minute on a laptop. Crank `--iterations` (and the corpus size) for results
that look like the shipped desk profile.

    python3 demos/train_and_evaluate.py --iterations 400
"""
import argparse
import time

import numpy as np

from rtnet.config import RunConfig
from rtnet.corpus import generate_synthetic_corpus
from rtnet.dataset import build_dataset, split_dataset
from rtnet.evaluation import evaluate_losses, evaluate_mae
from rtnet.features import build_vocab
from rtnet.inference import fixed_probability_baseline, sample_constant_offsets
from rtnet.model import ResponseTimingModel
from rtnet.training import train

parser = argparse.ArgumentParser()
parser.add_argument("--iterations", type=int, default=300)
parser.add_argument("--pairs", type=int, default=400)
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

# A run profile bundles every knob. The defaults are the desk-scale model;
# we only shrink the corpus and the training budget here.
run = RunConfig(n_pairs=args.pairs, iterations=args.iterations,
                batch_size=16, lr=1.5e-3, seed=args.seed)

print(f"synthesizing {run.n_pairs} turn pairs ...")
corpus = generate_synthetic_corpus(run.synth_config())
vocab = build_vocab(corpus)
dataset = build_dataset(corpus, vocab)
train_set, test_set = split_dataset(dataset, run.test_frac, seed=run.seed)
print(f"  {len(train_set)} train / {len(test_set)} test pairs, "
      f"{vocab.n_ids} vocabulary ids")

model = ResponseTimingModel(run.model_config(vocab.n_ids))
n_params = sum(p.data.size for p in model.parameters())
print(f"model: {n_params} parameters")

t0 = time.time()
train(model, train_set.examples, dataset.silence_template, run.train_config(),
      on_log=lambda h: print(f"  iter {h['iteration']:>5}  bce {h['bce']:.4f}"))
print(f"trained in {time.time() - t0:.0f}s")

# The fixed-probability predictor is the floor any trained model must beat:
# it fires with the same probability at every frame.
bce, _ = evaluate_losses(model, test_set.examples, dataset.silence_template)
y_fixed, bce_fixed = fixed_probability_baseline(test_set.examples)
print(f"\ntest BCE     model {bce:.4f}   fixed baseline {bce_fixed:.4f}")

mae = evaluate_mae(model, test_set.examples, dataset.silence_template,
                   seed=run.seed, n_runs=run.mae_runs)
base = sample_constant_offsets(test_set.examples, y_fixed,
                               seed=run.seed, n_runs=run.mae_runs)
base_mae = np.mean([abs(s.offset_ms - s.true_offset_ms) for s in base])
print(f"test MAE     model {mae['mae_ms']:.0f} ms   fixed baseline {base_mae:.0f} ms")
print(f"censored fraction {mae['censored_frac']:.3f}")
