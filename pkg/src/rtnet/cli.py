"""Command line: synth / train / evaluate / sample / fit-latent / interpolate / gradcheck.

Every subcommand takes --seed, every artifact embeds the config and seed
that produced it, and relative data paths resolve against $RTNET_DATA_DIR
when it is set. Exit codes: 0 ok, 1 user error, 2 internal error.
"""
from __future__ import annotations

import argparse
import os
import sys
import traceback

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .corpus import generate_synthetic_corpus
from .dataset import build_dataset, make_batch, split_dataset
from .evaluation import (
    distribution_distance,
    evaluate_losses,
    evaluate_mae,
    histogram_table,
    offset_histogram,
    offset_region_cutoffs,
    per_act_offsets,
    render_report,
    save_histogram_csv,
)
from .features import build_vocab
from .fileio import (
    load_corpus,
    load_latent_spec,
    save_corpus,
    save_latent_spec,
    save_offset_dump,
    save_vocab,
)
from .gradcheck import gradient_check
from .inference import (
    fixed_probability_baseline,
    sample_constant_offsets,
    sample_offsets,
)
from .model import ResponseTimingModel
from .rng import RngStream, fold_ids
from .training import train, training_step
from .vae import fit_latent_spec, interpolate_latents, latent_vector

DATA_DIR_VAR = "RTNET_DATA_DIR"


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage errors; usage errors are
        # user errors under our code scheme
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except BrokenPipeError:
        return 0
    except KeyError as exc:
        print(f"error: missing key {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


# -- plumbing ---------------------------------------------------------------


def _resolve(path: str) -> str:
    base = os.environ.get(DATA_DIR_VAR)
    if base and path and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _load_run_config(args, need_file: bool = True) -> RunConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "config", None):
        return load_config(args.config, overrides)
    if need_file:
        raise ValueError("--config is required for this command")
    return RunConfig(**overrides)


def _load_pipeline(data_base: str, run: RunConfig):
    corpus = load_corpus(_resolve(data_base))
    vocab = build_vocab(corpus)
    dataset = build_dataset(corpus, vocab)
    train_set, test_set = split_dataset(dataset, run.test_frac, seed=run.seed)
    return corpus, vocab, dataset, train_set, test_set


def _load_model(ckpt_path: str):
    model, stored = ResponseTimingModel.load_with_config(_resolve(ckpt_path))
    if "run" not in stored:
        raise ValueError(f"{ckpt_path}: checkpoint has no run profile section")
    run = RunConfig(**{k: _untuple(k, v) for k, v in stored["run"].items()})
    return model, run, stored


def _untuple(key, value):
    if key == "acts":
        return tuple((a[0], float(a[1]), float(a[2])) for a in value)
    if key == "lr_schedule":
        return tuple((int(m), float(f)) for m, f in value)
    return value


def _dump_records(samples):
    return [(s.pair_id, s.act, s.offset_ms, s.censored) for s in samples]


# -- subcommands --------------------------------------------------------------


def _cmd_synth(args) -> int:
    run = _load_run_config(args)
    corpus = generate_synthetic_corpus(run.synth_config())
    out = _resolve(args.out)
    save_corpus(corpus, out)
    n_pairs = sum(len(c.pair_acts or []) for c in corpus.conversations)
    print(f"wrote {n_pairs} pairs across {len(corpus.conversations)} conversations to {out}.*")
    return 0


def _cmd_train(args) -> int:
    run = _load_run_config(args)
    corpus, vocab, dataset, train_set, test_set = _load_pipeline(args.data, run)
    model = ResponseTimingModel(run.model_config(vocab.n_ids))
    log = (lambda h: print(
        f"iter {h['iteration']:>6}  loss {h['loss']:.4f}  bce {h['bce']:.4f}  "
        f"kl {h['kl']:.5f}  lr {h['lr']:.2e}"
    )) if not args.quiet else None
    history = train(model, train_set.examples, dataset.silence_template, run.train_config(), on_log=log)
    extra = {"run": run.to_dict(), "seed": run.seed, "data": str(args.data)}
    out = _resolve(args.out)
    model.save(out, extra=extra)
    save_vocab(vocab, out + ".vocab.tsv")
    if args.loss_log:
        with open(_resolve(args.loss_log), "w") as f:
            f.write(render_report({"config": extra, "history": history}))
    bce, kl = evaluate_losses(model, test_set.examples, dataset.silence_template)
    print(f"saved {out}  (test bce {bce:.4f}, kl {kl:.5f}, {len(train_set)} train / {len(test_set)} test pairs)")
    return 0


def _cmd_evaluate(args) -> int:
    model, run, stored = _load_model(args.ckpt)
    seed = args.seed if args.seed is not None else run.seed
    corpus, vocab, dataset, train_set, test_set = _load_pipeline(args.data, run)
    sil = dataset.silence_template
    bce, kl = evaluate_losses(model, test_set.examples, sil)
    y_fixed, bce_fixed = fixed_probability_baseline(test_set.examples)
    mae = evaluate_mae(
        model, test_set.examples, sil, seed=seed,
        n_runs=run.mae_runs, pad_frames=run.pad_frames,
    )
    base_samples = sample_constant_offsets(
        test_set.examples, y_fixed, seed=seed, n_runs=run.mae_runs, pad_frames=run.pad_frames
    )
    base_mae = float(np.mean([abs(s.offset_ms - s.true_offset_ms) for s in base_samples]))
    gen_samples = sample_offsets(
        model, test_set.examples, sil, seed=seed,
        n_runs=run.mae_runs, pad_frames=run.pad_frames,
    )
    gen_by_act = per_act_offsets(gen_samples)
    true_by_act: dict = {}
    for e in test_set.examples:
        true_by_act.setdefault(e.act, []).append(float(e.true_offset_ms))
    acts_report = {}
    for act in sorted(gen_by_act, key=str):
        gen_hist = offset_histogram(gen_by_act[act])
        true_hist = offset_histogram(true_by_act[act])
        ks, emd = distribution_distance(gen_hist, true_hist)
        cuts = offset_region_cutoffs(gen_by_act[act])
        acts_report[str(act)] = {
            "n_samples": int(gen_hist.n_samples),
            "mean_ms": float(np.mean(gen_by_act[act])),
            "mode_ms": cuts.mode_ms,
            "early_cutoff_ms": cuts.early_cutoff_ms,
            "late_cutoff_ms": cuts.late_cutoff_ms,
            "ks_vs_true": ks,
            "emd_ms_vs_true": emd,
            "histogram": histogram_table(gen_hist),
        }
        if args.hist_dir:
            os.makedirs(args.hist_dir, exist_ok=True)
            save_histogram_csv(os.path.join(args.hist_dir, f"act_{act}.csv"), gen_hist)
    all_gen = np.concatenate([v for v in gen_by_act.values()])
    cuts = offset_region_cutoffs(all_gen)
    if args.hist_dir:
        save_histogram_csv(os.path.join(args.hist_dir, "all.csv"), offset_histogram(all_gen))
    report = {
        "command": "evaluate",
        "version": __version__,
        "ckpt": str(args.ckpt),
        "data": str(args.data),
        "seed": seed,
        "config": run.to_dict(),
        "losses": {"bce": bce, "kl": kl},
        "baseline": {"y_fixed": y_fixed, "bce": bce_fixed, "mae_ms": base_mae},
        "mae": mae,
        "cutoffs": {
            "mode_ms": cuts.mode_ms,
            "early_cutoff_ms": cuts.early_cutoff_ms,
            "late_cutoff_ms": cuts.late_cutoff_ms,
        },
        "acts": acts_report,
    }
    text = render_report(report)
    if args.out:
        with open(_resolve(args.out), "w") as f:
            f.write(text)
        print(f"wrote report to {_resolve(args.out)}")
    else:
        print(text, end="")
    return 0


def _cmd_sample(args) -> int:
    model, run, stored = _load_model(args.ckpt)
    seed = args.seed if args.seed is not None else run.seed
    corpus, vocab, dataset, train_set, test_set = _load_pipeline(args.data, run)
    h_z_override = None
    if args.latent_spec or args.act:
        if not (args.latent_spec and args.act):
            raise ValueError("--latent-spec and --act must be given together")
        spec, _ = load_latent_spec(_resolve(args.latent_spec))
        mode = "sample" if args.draw_latent else "mean"
        z = latent_vector(spec, args.act, rng=RngStream.derive(seed, "latent"), mode=mode)
        h_z_override = model.h_z_from_latent(z)
    samples = sample_offsets(
        model,
        test_set.examples,
        dataset.silence_template,
        seed=seed,
        n_runs=args.runs,
        pad_frames=run.pad_frames,
        vae_sample=args.vae_sample,
        h_z_override=h_z_override,
    )
    config = {
        "command": "sample", "ckpt": str(args.ckpt), "data": str(args.data),
        "seed": seed, "runs": args.runs, "vae_sample": args.vae_sample,
        "latent_spec": args.latent_spec, "act": args.act,
    }
    out = _resolve(args.out)
    save_offset_dump(_dump_records(samples), out, config)
    if args.hist:
        save_histogram_csv(_resolve(args.hist), offset_histogram([s.offset_ms for s in samples]))
    mean = np.mean([s.offset_ms for s in samples])
    cens = np.mean([s.censored for s in samples])
    print(f"wrote {len(samples)} offsets to {out} (mean {mean:.0f} ms, censored {cens:.3f})")
    return 0


def _cmd_fit_latent(args) -> int:
    model, run, stored = _load_model(args.ckpt)
    if model.config.variant != "vae":
        raise ValueError("fit-latent requires an rtnet-vae checkpoint")
    seed = args.seed if args.seed is not None else run.seed
    corpus, vocab, dataset, train_set, test_set = _load_pipeline(args.data, run)
    examples = {"train": train_set.examples, "test": test_set.examples,
                "all": dataset.examples}[args.split]
    mus, acts = [], []
    from .tensor import no_grad

    with no_grad():
        for lo in range(0, len(examples), 64):
            chunk = examples[lo : lo + 64]
            batch = make_batch(chunk, dataset.silence_template, dtype=model.dtype)
            _, stats = model.encode_h_z(batch)
            mus.append(stats["mu"].data.copy())
            acts.extend(e.act for e in chunk)
    spec = fit_latent_spec(np.concatenate(mus, axis=0), acts)
    config = {
        "command": "fit-latent", "ckpt": str(args.ckpt), "data": str(args.data),
        "split": args.split, "seed": seed, "n_examples": len(examples),
    }
    out = _resolve(args.out)
    save_latent_spec(spec, out, config)
    print(f"wrote latent spec for {len(spec)} acts to {out}")
    return 0


def _cmd_interpolate(args) -> int:
    model, run, stored = _load_model(args.ckpt)
    seed = args.seed if args.seed is not None else run.seed
    spec, _ = load_latent_spec(_resolve(args.spec))
    corpus, vocab, dataset, train_set, test_set = _load_pipeline(args.data, run)
    examples = test_set.examples
    alphas = [float(a) for a in args.alphas.split(",") if a.strip()]
    if not alphas:
        raise ValueError("--alphas: need at least one value")
    n_runs = max(1, -(-args.samples // len(examples)))  # ceil
    records = []
    summary = []
    for alpha in alphas:
        mu, sigma = interpolate_latents(spec, args.act_a, args.act_b, alpha)
        if args.draw_latent:
            z = mu + sigma * RngStream.derive(seed, "interp", str(alpha)).normal(size=mu.shape)
        else:
            z = mu
        h_z = model.h_z_from_latent(z)
        samples = sample_offsets(
            model,
            examples,
            dataset.silence_template,
            seed=fold_ids((seed, "interp", str(alpha))),
            n_runs=n_runs,
            pad_frames=run.pad_frames,
            h_z_override=h_z,
        )[: args.samples]
        tag = f"alpha={alpha:g}"
        records.extend((s.pair_id, tag, s.offset_ms, s.censored) for s in samples)
        mean = float(np.mean([s.offset_ms for s in samples]))
        summary.append((alpha, mean, len(samples)))
    config = {
        "command": "interpolate", "ckpt": str(args.ckpt), "spec": str(args.spec),
        "data": str(args.data), "act_a": args.act_a, "act_b": args.act_b,
        "alphas": alphas, "samples": args.samples, "seed": seed,
        "draw_latent": args.draw_latent,
    }
    out = _resolve(args.out)
    save_offset_dump(records, out, config)
    for alpha, mean, n in summary:
        print(f"alpha {alpha:g}: mean offset {mean:.0f} ms over {n} samples")
    print(f"wrote {len(records)} offsets to {out}")
    return 0


def _cmd_gradcheck(args) -> int:
    from .corpus import SynthConfig
    from .model import ModelConfig

    seed = args.seed if args.seed is not None else 0
    corpus = generate_synthetic_corpus(
        SynthConfig(
            n_pairs=4,
            acts=[("a", -100.0, 100.0), ("b", 300.0, 100.0)],
            vocab_size=24,
            seed=seed,
        )
    )
    vocab = build_vocab(corpus)
    dataset = build_dataset(corpus, vocab)
    batch = make_batch(dataset.examples[:2], dataset.silence_template, dtype=np.float64)
    failures = 0
    for variant, encoder_mode in (("plain", "full"), ("vae", "full"), ("plain", "none")):
        cfg = ModelConfig(
            variant=variant,
            d_acoustic=4,
            vocab_size=vocab.n_ids,
            embedding_dim=5,
            acoustic_hidden=4,
            linguistic_hidden=4,
            master_hidden=5,
            reduce_dim=6,
            latent_dim=3,
            hz_dim=6,
            inference_hidden=6,
            encoder_mode=encoder_mode,
            seed=seed,
        )
        model = ResponseTimingModel(cfg, dtype=np.float64)
        eps = (
            model.draw_eps(batch.size, RngStream.derive(seed, "gc-eps"))
            if variant == "vae"
            else None
        )

        def loss_fn():
            loss, _ = training_step(model, batch, batch.r_start, w_kl=0.3, eps=eps)
            return loss

        report = gradient_check(
            loss_fn,
            model.parameters(),
            max_entries=args.entries,
            rng=RngStream.derive(seed, "gc", variant, encoder_mode),
        )
        print(f"[{variant}/{encoder_mode}]")
        print(report)
        if not report.passed:
            failures += 1
    if failures:
        print(f"{failures} block(s) FAILED", file=sys.stderr)
        return 2
    print("all gradient checks passed")
    return 0


# -- parser -------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rtnet",
        description="Response-timing models for spoken dialogue: corpus synthesis, "
        "training, offset sampling, latent-space control, evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"rtnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_seed(p):
        p.add_argument("--seed", type=int, default=None, help="override the profile seed")

    p = sub.add_parser("synth", help="generate a synthetic turn-pair corpus")
    p.add_argument("--config", required=True, help="run profile (.cfg)")
    p.add_argument("--out", required=True, help="output corpus base path (no extension)")
    add_seed(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a model on a corpus")
    p.add_argument("--config", required=True, help="run profile (.cfg)")
    p.add_argument("--data", required=True, help="corpus base path from `synth`")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--loss-log", default=None, help="optional loss history JSON path")
    p.add_argument("--quiet", action="store_true", help="suppress per-iteration logging")
    add_seed(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="losses, MAE, per-act distributions")
    p.add_argument("--ckpt", required=True, help="checkpoint from `train`")
    p.add_argument("--data", required=True, help="corpus base path")
    p.add_argument("--out", default=None, help="report path (default: stdout)")
    p.add_argument("--hist-dir", default=None, help="directory for histogram CSVs")
    add_seed(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sample", help="generate an offset dump from a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="offset dump TSV path")
    p.add_argument("--runs", type=int, default=1, help="sampling sweeps over the test set")
    p.add_argument("--vae-sample", action="store_true", help="draw latent noise per pair")
    p.add_argument("--latent-spec", default=None, help="condition on a fitted latent spec")
    p.add_argument("--act", default=None, help="act name within --latent-spec")
    p.add_argument("--draw-latent", action="store_true", help="sample z from the act Gaussian")
    p.add_argument("--hist", default=None, help="optional histogram CSV path")
    add_seed(p)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("fit-latent", help="fit per-act latent Gaussians (vae model)")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="latent spec TSV path")
    p.add_argument("--split", choices=("train", "test", "all"), default="train")
    add_seed(p)
    p.set_defaults(func=_cmd_fit_latent)

    p = sub.add_parser("interpolate", help="sample offsets along a latent blend")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--spec", required=True, help="latent spec from `fit-latent`")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="offset dump TSV path")
    p.add_argument("--act-a", required=True)
    p.add_argument("--act-b", required=True)
    p.add_argument("--alphas", default="0,0.5,1", help="comma-separated blend weights")
    p.add_argument("--samples", type=int, default=1000, help="offsets per alpha")
    p.add_argument("--draw-latent", action="store_true", help="sample z around the blend")
    add_seed(p)
    p.set_defaults(func=_cmd_interpolate)

    p = sub.add_parser("gradcheck", help="finite-difference verification of all blocks")
    p.add_argument("--entries", type=int, default=40, help="sampled entries per tensor")
    add_seed(p)
    p.set_defaults(func=_cmd_gradcheck)

    return parser


if __name__ == "__main__":
    sys.exit(main())
