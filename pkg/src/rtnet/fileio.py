"""On-disk formats: corpus container, vocabulary, latent specs, offset dumps.

Corpus container is three sibling files sharing a base name:

  <base>.jsonl     one conversation per line: conv_id, per-speaker word
                   lists [token, start_ms, end_ms], optional pair_acts,
                   and per-speaker references {offset, rows, cols} into
                   the sidecar
  <base>.bin       acoustic matrices; at each referenced offset: u32 rows,
                   u32 cols, then rows*cols little-endian float32 values
  <base>.meta.json format version plus the generator's meta block
                   (config echo, seed, ground-truth act offsets)

Text artifacts (vocabulary, latent specs, offset dumps) are tab-separated
with '#'-prefixed header lines; every artifact embeds the config and seed
that produced it.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .corpus import Conversation, Corpus, WordAnnotation
from .features import VocabMap

FORMAT_VERSION = 1


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _paths(base) -> tuple:
    base = Path(base)
    return (
        base.parent / (base.name + ".jsonl"),
        base.parent / (base.name + ".bin"),
        base.parent / (base.name + ".meta.json"),
    )


def save_corpus(corpus: Corpus, base) -> None:
    jsonl_path, bin_path, meta_path = _paths(base)
    with open(bin_path, "wb") as binf, open(jsonl_path, "w", encoding="utf-8") as jf:
        for conv in corpus.conversations:
            refs = {}
            for speaker in sorted(conv.acoustic):
                mat = np.ascontiguousarray(conv.acoustic[speaker], dtype=np.float32)
                offset = binf.tell()
                binf.write(struct.pack("<II", mat.shape[0], mat.shape[1]))
                binf.write(mat.astype("<f4").tobytes())
                refs[speaker] = {"offset": offset, "rows": mat.shape[0], "cols": mat.shape[1]}
            record = {
                "conv_id": conv.conv_id,
                "words": {
                    s: [[w.token, w.start_ms, w.end_ms] for w in ws]
                    for s, ws in conv.words.items()
                },
                "pair_acts": conv.pair_acts,
                "acoustic": refs,
            }
            jf.write(json.dumps(_jsonable(record), sort_keys=True) + "\n")
    meta = {"format_version": FORMAT_VERSION, "meta": _jsonable(corpus.meta)}
    with open(meta_path, "w", encoding="utf-8") as mf:
        json.dump(meta, mf, indent=2, sort_keys=True)
        mf.write("\n")


def load_corpus(base) -> Corpus:
    jsonl_path, bin_path, meta_path = _paths(base)
    with open(meta_path, encoding="utf-8") as mf:
        meta_doc = json.load(mf)
    if meta_doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported corpus format version {meta_doc.get('format_version')}")
    conversations = []
    with open(bin_path, "rb") as binf, open(jsonl_path, encoding="utf-8") as jf:
        for line in jf:
            rec = json.loads(line)
            acoustic = {}
            for speaker, ref in rec["acoustic"].items():
                binf.seek(ref["offset"])
                rows, cols = struct.unpack("<II", binf.read(8))
                if (rows, cols) != (ref["rows"], ref["cols"]):
                    raise ValueError(
                        f"corrupt sidecar: {rec['conv_id']}/{speaker} header "
                        f"({rows},{cols}) != reference ({ref['rows']},{ref['cols']})"
                    )
                data = np.frombuffer(binf.read(rows * cols * 4), dtype="<f4")
                acoustic[speaker] = data.reshape(rows, cols).copy()
            words = {
                s: [WordAnnotation(t, s_ms, e_ms, s) for t, s_ms, e_ms in ws]
                for s, ws in rec["words"].items()
            }
            conversations.append(
                Conversation(
                    conv_id=rec["conv_id"],
                    words=words,
                    acoustic=acoustic,
                    pair_acts=rec.get("pair_acts"),
                )
            )
    return Corpus(conversations=conversations, meta=meta_doc["meta"])


def corpus_equal(a: Corpus, b: Corpus) -> bool:
    if len(a.conversations) != len(b.conversations) or _jsonable(a.meta) != _jsonable(b.meta):
        return False
    for ca, cb in zip(a.conversations, b.conversations):
        if ca.conv_id != cb.conv_id or ca.words != cb.words or ca.pair_acts != cb.pair_acts:
            return False
        if sorted(ca.acoustic) != sorted(cb.acoustic):
            return False
        for s in ca.acoustic:
            if not np.array_equal(
                ca.acoustic[s].astype(np.float32), cb.acoustic[s].astype(np.float32)
            ):
                return False
    return True


# ---------------------------------------------------------------------------
# vocabulary file: token, id, count, merged-into (tab-separated)
# ---------------------------------------------------------------------------


def save_vocab(vocab: VocabMap, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("# token\tid\tcount\tmerged_into\n")
        for token in vocab.tokens():
            merged = vocab.merged_into.get(token, "-")
            count = vocab.counts.get(token, 0)
            f.write(f"{token}\t{vocab.token_to_id[token]}\t{count}\t{merged}\n")


def load_vocab(path) -> VocabMap:
    token_to_id = {}
    counts = {}
    merged_into = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            token, id_str, count_str, merged = line.split("\t")
            token_to_id[token] = int(id_str)
            counts[token] = int(count_str)
            if merged != "-":
                merged_into[token] = merged
    return VocabMap(token_to_id=token_to_id, counts=counts, merged_into=merged_into)


# ---------------------------------------------------------------------------
# latent spec file: act name, mu vector, sigma vector (tab-separated)
# ---------------------------------------------------------------------------


def save_latent_spec(spec, path, config: dict | None = None) -> None:
    """spec: mapping act -> (mu, sigma) vectors; see rtnet.vae.LatentSpec."""
    with open(path, "w", encoding="utf-8") as f:
        if config is not None:
            f.write(f"# config {json.dumps(_jsonable(config), sort_keys=True)}\n")
        f.write("# act\tmu...\tsigma...\n")
        for act in sorted(spec):
            mu, sigma = spec[act]
            mu_s = "\t".join(f"{v:.9g}" for v in np.asarray(mu, dtype=np.float64))
            sg_s = "\t".join(f"{v:.9g}" for v in np.asarray(sigma, dtype=np.float64))
            f.write(f"{act}\t{mu_s}\t{sg_s}\n")


def load_latent_spec(path) -> tuple:
    """Returns (spec dict, config dict or None)."""
    spec = {}
    config = None
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("# config "):
                config = json.loads(line[len("# config ") :])
                continue
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            act = parts[0]
            vals = [float(v) for v in parts[1:]]
            half = len(vals) // 2
            spec[act] = (
                np.array(vals[:half], dtype=np.float64),
                np.array(vals[half:], dtype=np.float64),
            )
    return spec, config


# ---------------------------------------------------------------------------
# offset dump: pair id, act, offset_ms, censored (tab-separated)
# ---------------------------------------------------------------------------


def save_offset_dump(records, path, config: dict | None = None) -> None:
    """records: iterable of (pair_id, act, offset_ms, censored)."""
    with open(path, "w", encoding="utf-8") as f:
        if config is not None:
            f.write(f"# config {json.dumps(_jsonable(config), sort_keys=True)}\n")
        f.write("# pair_id\tact\toffset_ms\tcensored\n")
        for pair_id, act, offset_ms, censored in records:
            f.write(f"{pair_id}\t{act or '-'}\t{int(offset_ms)}\t{int(bool(censored))}\n")


def load_offset_dump(path) -> tuple:
    """Returns (records, config): records are (pair_id, act|None, offset_ms, censored)."""
    records = []
    config = None
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("# config "):
                config = json.loads(line[len("# config ") :])
                continue
            if not line or line.startswith("#"):
                continue
            pair_id, act, offset_ms, censored = line.split("\t")
            records.append(
                (pair_id, None if act == "-" else act, int(offset_ms), bool(int(censored)))
            )
    return records, config
