"""End-to-end checks of the command line against a tiny corpus."""
import json
import os

import numpy as np
import pytest

from rtnet.cli import main
from rtnet.fileio import load_latent_spec, load_offset_dump

TINY = """
variant = rtnet
n_pairs = 48
vocab_size = 32
embedding_dim = 6
acoustic_hidden = 6
linguistic_hidden = 6
master_hidden = 8
reduce_dim = 8
hz_dim = 10
inference_hidden = 10
iterations = 25
batch_size = 8
test_frac = 0.2
mae_runs = 1
pad_frames = 40
seed = 7
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Tiny corpus + one trained checkpoint of each variant, shared."""
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "tiny.cfg"
    cfg.write_text(TINY)
    vae_cfg = root / "tinyvae.cfg"
    vae_cfg.write_text(TINY.replace("variant = rtnet", "variant = rtnet-vae") + "latent_dim = 3\n")
    assert main(["synth", "--config", str(cfg), "--out", str(root / "corpus")]) == 0
    assert main([
        "train", "--config", str(cfg), "--data", str(root / "corpus"),
        "--out", str(root / "model.ckpt"), "--quiet",
        "--loss-log", str(root / "loss.json"),
    ]) == 0
    assert main([
        "train", "--config", str(vae_cfg), "--data", str(root / "corpus"),
        "--out", str(root / "vae.ckpt"), "--quiet",
    ]) == 0
    return root


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "synth" in capsys.readouterr().out


def test_subcommand_help_exits_zero(capsys):
    for cmd in ("synth", "train", "evaluate", "sample", "fit-latent", "interpolate", "gradcheck"):
        assert main([cmd, "--help"]) == 0
        assert "--seed" in capsys.readouterr().out


def test_usage_errors_exit_one(capsys):
    assert main(["not-a-command"]) == 1
    assert main(["train"]) == 1  # missing required flags
    assert main([]) == 1
    capsys.readouterr()


def test_missing_file_is_user_error(capsys, tmp_path):
    code = main(["evaluate", "--ckpt", str(tmp_path / "nope.ckpt"), "--data", str(tmp_path / "c")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_bad_config_names_field(capsys, tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("vocab_size = many\n")
    assert main(["synth", "--config", str(bad), "--out", str(tmp_path / "c")]) == 1
    err = capsys.readouterr().err
    assert "vocab_size" in err and "bad.cfg" in err


def test_synth_writes_corpus(workdir):
    assert (workdir / "corpus.meta.json").exists() or list(workdir.glob("corpus*"))


def test_train_artifacts(workdir):
    assert (workdir / "model.ckpt").exists()
    assert (workdir / "model.ckpt.vocab.tsv").exists()
    log = json.loads((workdir / "loss.json").read_text())
    assert log["config"]["seed"] == 7
    assert log["config"]["run"]["iterations"] == 25
    assert len(log["history"]) >= 2


def test_checkpoint_embeds_config_and_seed(workdir):
    from rtnet.checkpoint import load_checkpoint

    config, _ = load_checkpoint(str(workdir / "model.ckpt"))
    assert config["seed"] == 7
    assert config["run"]["variant"] == "rtnet"
    assert config["model"]["inference_hidden"] == 10


def test_same_seed_byte_identical_checkpoints(workdir, tmp_path):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(TINY)
    args = ["train", "--config", str(cfg), "--data", str(workdir / "corpus"), "--quiet"]
    assert main(args + ["--out", str(tmp_path / "a.ckpt")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.ckpt")]) == 0
    a = (tmp_path / "a.ckpt").read_bytes()
    b = (tmp_path / "b.ckpt").read_bytes()
    assert a == b


def test_seed_flag_changes_training(workdir, tmp_path):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(TINY)
    args = ["train", "--config", str(cfg), "--data", str(workdir / "corpus"), "--quiet"]
    assert main(args + ["--out", str(tmp_path / "a.ckpt"), "--seed", "7"]) == 0
    assert main(args + ["--out", str(tmp_path / "b.ckpt"), "--seed", "8"]) == 0
    assert (tmp_path / "a.ckpt").read_bytes() != (tmp_path / "b.ckpt").read_bytes()


def test_evaluate_report(workdir, tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main([
        "evaluate", "--ckpt", str(workdir / "model.ckpt"),
        "--data", str(workdir / "corpus"), "--out", str(out),
        "--hist-dir", str(tmp_path / "hists"),
    ]) == 0
    capsys.readouterr()
    report = json.loads(out.read_text())
    assert report["seed"] == 7
    assert report["config"]["variant"] == "rtnet"
    assert report["losses"]["bce"] > 0
    assert report["baseline"]["mae_ms"] > 0
    assert set(report["acts"]) == {"fast", "slow"}
    assert (tmp_path / "hists" / "all.csv").exists()


def test_evaluate_stdout_and_determinism(workdir, capsys):
    args = ["evaluate", "--ckpt", str(workdir / "model.ckpt"), "--data", str(workdir / "corpus")]
    assert main(args) == 0
    first = capsys.readouterr().out
    assert main(args) == 0
    second = capsys.readouterr().out
    assert first == second
    json.loads(first)  # must be valid JSON


def test_sample_dump(workdir, tmp_path, capsys):
    out = tmp_path / "offsets.tsv"
    assert main([
        "sample", "--ckpt", str(workdir / "model.ckpt"),
        "--data", str(workdir / "corpus"), "--out", str(out), "--runs", "2",
    ]) == 0
    capsys.readouterr()
    records, config = load_offset_dump(str(out))
    assert config["seed"] == 7 and config["runs"] == 2
    assert len(records) > 0
    offs = [r[2] for r in records]
    assert all(o % 50 == 0 for o in offs)


def test_fit_latent_requires_vae(workdir, tmp_path, capsys):
    code = main([
        "fit-latent", "--ckpt", str(workdir / "model.ckpt"),
        "--data", str(workdir / "corpus"), "--out", str(tmp_path / "spec.tsv"),
    ])
    assert code == 1
    assert "rtnet-vae" in capsys.readouterr().err


def test_latent_round_trip(workdir, tmp_path, capsys):
    spec_path = tmp_path / "spec.tsv"
    assert main([
        "fit-latent", "--ckpt", str(workdir / "vae.ckpt"),
        "--data", str(workdir / "corpus"), "--out", str(spec_path),
    ]) == 0
    spec, config = load_latent_spec(str(spec_path))
    assert set(spec) == {"fast", "slow"}
    assert config["split"] == "train"
    assert main([
        "sample", "--ckpt", str(workdir / "vae.ckpt"),
        "--data", str(workdir / "corpus"), "--out", str(tmp_path / "off.tsv"),
        "--latent-spec", str(spec_path), "--act", "slow",
    ]) == 0
    assert main([
        "interpolate", "--ckpt", str(workdir / "vae.ckpt"), "--spec", str(spec_path),
        "--data", str(workdir / "corpus"), "--out", str(tmp_path / "interp.tsv"),
        "--act-a", "fast", "--act-b", "slow", "--alphas", "0,1", "--samples", "10",
    ]) == 0
    capsys.readouterr()
    records, config = load_offset_dump(str(tmp_path / "interp.tsv"))
    tags = {r[1] for r in records}
    assert tags == {"alpha=0", "alpha=1"}
    assert config["act_a"] == "fast"


def test_latent_spec_needs_both_flags(workdir, tmp_path, capsys):
    code = main([
        "sample", "--ckpt", str(workdir / "vae.ckpt"),
        "--data", str(workdir / "corpus"), "--out", str(tmp_path / "x.tsv"),
        "--act", "slow",
    ])
    assert code == 1
    assert "--latent-spec" in capsys.readouterr().err


def test_data_dir_env_var(workdir, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("RTNET_DATA_DIR", str(workdir))
    out = tmp_path / "env.tsv"  # absolute --out stays put
    assert main([
        "sample", "--ckpt", "model.ckpt", "--data", "corpus", "--out", str(out),
    ]) == 0
    capsys.readouterr()
    assert out.exists()


def test_sample_seed_changes_draws(workdir, tmp_path, capsys):
    args = [
        "sample", "--ckpt", str(workdir / "model.ckpt"),
        "--data", str(workdir / "corpus"),
    ]
    assert main(args + ["--out", str(tmp_path / "a.tsv"), "--seed", "1"]) == 0
    assert main(args + ["--out", str(tmp_path / "b.tsv"), "--seed", "2"]) == 0
    assert main(args + ["--out", str(tmp_path / "c.tsv"), "--seed", "1"]) == 0
    capsys.readouterr()
    a, _ = load_offset_dump(str(tmp_path / "a.tsv"))
    b, _ = load_offset_dump(str(tmp_path / "b.tsv"))
    c, _ = load_offset_dump(str(tmp_path / "c.tsv"))
    assert a == c
    assert a != b
