"""Steer response timing through the latent space of the variational model.

The variational variant squeezes the response encoding through a small latent
bottleneck. After training we can:

  1. fit a per-act Gaussian to the latent means (`fit_latent_spec`),
  2. sample offsets conditioned on one act's latent mean,
  3. interpolate between two acts and watch the mean offset slide.

Small scale; takes a few minutes.
"""
import argparse

import numpy as np

from rtnet.config import RunConfig
from rtnet.corpus import generate_synthetic_corpus
from rtnet.dataset import build_dataset, make_batch, split_dataset
from rtnet.features import build_vocab
from rtnet.inference import sample_offsets
from rtnet.model import ResponseTimingModel
from rtnet.tensor import no_grad
from rtnet.training import train
from rtnet.vae import fit_latent_spec, interpolate_latents

parser = argparse.ArgumentParser()
parser.add_argument("--iterations", type=int, default=800)
parser.add_argument("--pairs", type=int, default=600)
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

run = RunConfig(variant="rtnet-vae", w_kl=1e-4,
                n_pairs=args.pairs, iterations=args.iterations,
                batch_size=16, lr=1.5e-3, seed=args.seed)
corpus = generate_synthetic_corpus(run.synth_config())
vocab = build_vocab(corpus)
dataset = build_dataset(corpus, vocab)
train_set, test_set = split_dataset(dataset, run.test_frac, seed=run.seed)

model = ResponseTimingModel(run.model_config(vocab.n_ids))
print(f"training variational model on {len(train_set)} pairs ...")
train(model, train_set.examples, dataset.silence_template, run.train_config(),
      on_log=lambda h: print(f"  iter {h['iteration']:>5}  bce {h['bce']:.4f}  kl {h['kl']:.4f}"))

# Encode every training pair deterministically (z = mu) and fit the spec.
mus, acts = [], []
with no_grad():
    for lo in range(0, len(train_set), 64):
        chunk = train_set.examples[lo:lo + 64]
        batch = make_batch(chunk, dataset.silence_template, dtype=model.dtype)
        _, stats = model.encode_h_z(batch)
        mus.append(stats["mu"].data.copy())
        acts.extend(e.act for e in chunk)
spec = fit_latent_spec(np.concatenate(mus, axis=0), acts)
for act, (mu, sigma) in sorted(spec.items()):
    print(f"act {act!r}: latent mean {np.round(mu, 3)}")

print("\nmean generated offset while interpolating fast -> slow:")
for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
    mu, sigma = interpolate_latents(spec, "fast", "slow", alpha)
    h_z = model.h_z_from_latent(mu)
    samples = sample_offsets(model, test_set.examples, dataset.silence_template,
                             seed=run.seed + int(alpha * 100), n_runs=2,
                             h_z_override=h_z)
    mean = np.mean([s.offset_ms for s in samples])
    print(f"  alpha {alpha:.2f}: {mean:+7.0f} ms")
