"""Turn pairs as model-ready examples, and padded batch assembly.

Each example's inference window runs from the user turn's first frame
through the later of r_end (the frame before the system starts) and the
user's last speech frame: the loss only ever scores frames up to r_end,
but sampling walks on — and for overlapped responses the user is still
talking past r_end, so those frames must carry the user's real features
rather than artificial silence. The response side carries the system
turn's acoustic slice and token sequence with response-relative start
frames.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, segment_conversation
from .features import (
    NONE,
    SIL_ID,
    WAIT,
    VocabMap,
    system_token_stream,
    user_linguistic_ids,
)
from .rng import RngStream


@dataclass
class PairExample:
    pair_id: str
    conv_id: str
    act: str | None
    # user/inference side, window-relative indices
    x_ac: np.ndarray  # (T, d_a) float32
    x_ling: np.ndarray  # (T,) int32
    labels: np.ndarray  # (T,) float32
    r_start: int
    r_end: int  # frame before the system starts; == T - 1 unless the user talks past it
    user_last: int  # user's final speech frame (negative offsets reach past it)
    true_offset_ms: int
    # response/encoder side
    resp_ac: np.ndarray  # (Tr, d_a) float32
    tok_ids: np.ndarray  # (I,) int32
    tok_start: np.ndarray  # (I,) int64, response-relative; 0 for WAIT/NONE
    wait_pos: np.ndarray  # (I,) float32 one-hot
    none_pos: np.ndarray  # (I,) float32 one-hot

    @property
    def r_length(self) -> int:
        return self.r_end - self.r_start + 1


@dataclass
class Dataset:
    examples: list
    silence_template: np.ndarray  # (d_a,) mean acoustic frame over silence
    n_skipped_empty_r: int = 0
    n_skipped_overlap_tail: int = 0

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)


def build_dataset(corpus: Corpus, vocab: VocabMap) -> Dataset:
    examples = []
    skipped_empty = skipped_tail = 0
    silent_sum = None
    silent_count = 0
    for conv in corpus.conversations:
        words = corpus.all_words(conv)
        seg = segment_conversation(words=words)
        skipped_empty += seg.n_skipped_empty_r
        skipped_tail += seg.n_skipped_overlap_tail
        n_frames = seg.activity.n_frames
        ling = {
            s: user_linguistic_ids(conv.words[s], n_frames, vocab)
            for s in conv.words
        }
        for s, vec in seg.activity.frames.items():
            ac = conv.acoustic[s][:n_frames]
            silent = ~vec[: len(ac)]
            if silent.any():
                chunk = ac[silent].astype(np.float64)
                silent_sum = chunk.sum(axis=0) if silent_sum is None else silent_sum + chunk.sum(axis=0)
                silent_count += int(silent.sum())
        acts = conv.pair_acts or [None] * len(seg.pairs)
        if conv.pair_acts is not None and len(conv.pair_acts) != len(seg.pairs):
            raise ValueError(
                f"{conv.conv_id}: {len(conv.pair_acts)} act tags but {len(seg.pairs)} pairs"
            )
        for pi, (pair, act) in enumerate(zip(seg.pairs, acts)):
            user = pair.user_turn
            system = pair.system_turn
            w0 = user.start_frame
            window = slice(w0, max(pair.r_end, user.end_frame) + 1)
            sys_words = _turn_words(conv.words[system.speaker], system)
            tokens, starts = system_token_stream(sys_words)
            tok_ids = np.array([vocab.id_of(t) for t in tokens], dtype=np.int32)
            tok_start = np.array(
                [0 if f is None else f - system.start_frame for f in starts], dtype=np.int64
            )
            wait_pos = np.array([1.0 if t == WAIT else 0.0 for t in tokens], dtype=np.float32)
            none_pos = np.array([1.0 if t == NONE else 0.0 for t in tokens], dtype=np.float32)
            examples.append(
                PairExample(
                    pair_id=f"{conv.conv_id}:{pi}",
                    conv_id=conv.conv_id,
                    act=act,
                    x_ac=conv.acoustic[user.speaker][window].astype(np.float32),
                    x_ling=ling[user.speaker][window],
                    labels=_clipped_labels(pair.labels[window], pair.r_end - w0),
                    r_start=pair.r_start_bound - w0,
                    r_end=pair.r_end - w0,
                    user_last=user.end_frame - w0,
                    true_offset_ms=pair.offset_ms,
                    resp_ac=conv.acoustic[system.speaker][
                        system.start_frame : system.end_frame + 1
                    ].astype(np.float32),
                    tok_ids=tok_ids,
                    tok_start=tok_start,
                    wait_pos=wait_pos,
                    none_pos=none_pos,
                )
            )
    d_a = corpus.conversations[0].acoustic["A"].shape[1] if corpus.conversations else 0
    template = (
        (silent_sum / silent_count).astype(np.float32)
        if silent_count
        else np.zeros(d_a, dtype=np.float32)
    )
    return Dataset(
        examples=examples,
        silence_template=template,
        n_skipped_empty_r=skipped_empty,
        n_skipped_overlap_tail=skipped_tail,
    )


def _clipped_labels(window_labels: np.ndarray, r_end: int) -> np.ndarray:
    """Labels as float32 with everything after r_end zeroed.

    The window may run past r_end (user talking through an overlapped
    response); the shifted voice-activity labels there belong to the
    system turn and are never scored, so they are dropped to keep the
    one-trigger-per-example contract.
    """
    out = window_labels.astype(np.float32).copy()
    out[r_end + 1 :] = 0.0
    return out


def _turn_words(words, turn):
    lo_ms = turn.start_frame * 50
    hi_ms = (turn.end_frame + 1) * 50
    return [w for w in words if w.start_ms < hi_ms and w.end_ms > lo_ms]


def split_dataset(dataset: Dataset, test_frac: float, seed: int) -> tuple:
    """Deterministic conversation-level split -> (train, test).

    Splitting by conversation keeps a turn shared between adjacent pairs
    on one side of the split only.
    """
    conv_ids = sorted({e.conv_id for e in dataset.examples})
    order = RngStream.derive(seed, "split").permutation(len(conv_ids))
    n_test = max(1, int(round(len(conv_ids) * test_frac)))
    test_ids = {conv_ids[i] for i in order[:n_test]}
    train = [e for e in dataset.examples if e.conv_id not in test_ids]
    test = [e for e in dataset.examples if e.conv_id in test_ids]
    make = lambda exs: Dataset(
        examples=exs,
        silence_template=dataset.silence_template,
        n_skipped_empty_r=dataset.n_skipped_empty_r,
        n_skipped_overlap_tail=dataset.n_skipped_overlap_tail,
    )
    return make(train), make(test)


@dataclass
class Batch:
    """Padded arrays for a list of examples; masks carry the ragged shape."""

    examples: list
    x_ac: np.ndarray  # (B, T, d_a)
    x_ling: np.ndarray  # (B, T) int32
    frame_mask: np.ndarray  # (B, T) 1.0 on frames the recurrence should see
    labels: np.ndarray  # (B, T)
    r_start: np.ndarray  # (B,)
    r_end: np.ndarray  # (B,)
    user_last: np.ndarray  # (B,)
    seq_len: np.ndarray  # (B,) valid frames incl. sampling padding
    resp_ac: np.ndarray  # (B, Tr, d_a)
    resp_mask: np.ndarray  # (B, Tr)
    tok_ids: np.ndarray  # (B, I) int32
    tok_mask: np.ndarray  # (B, I)
    tok_start: np.ndarray  # (B, I) int64
    wait_pos: np.ndarray  # (B, I)
    none_pos: np.ndarray  # (B, I)
    last_tok: np.ndarray  # (B, 1) int64

    @property
    def size(self) -> int:
        return len(self.examples)

    def loss_mask(self, starts: np.ndarray) -> np.ndarray:
        """(B, T) mask of scored frames [starts_b, r_end_b]."""
        t = np.arange(self.x_ac.shape[1])[None, :]
        return (
            (t >= np.asarray(starts)[:, None]) & (t <= self.r_end[:, None])
        ).astype(self.x_ac.dtype)

    def sample_r_starts(self, rng: RngStream) -> np.ndarray:
        """Per-pair uniform draw from [r_start, r_end]."""
        return rng.integers(self.r_start, self.r_end + 1)


def make_batch(examples, silence_template, pad_frames: int = 0, dtype=np.float32) -> Batch:
    B = len(examples)
    if B == 0:
        raise ValueError("empty batch")
    d_a = examples[0].x_ac.shape[1]
    lens = np.array([len(e.x_ling) + pad_frames for e in examples])
    T = int(lens.max())
    x_ac = np.tile(silence_template.astype(dtype), (B, T, 1))
    x_ling = np.full((B, T), SIL_ID, dtype=np.int32)
    frame_mask = np.zeros((B, T), dtype=dtype)
    labels = np.zeros((B, T), dtype=dtype)
    Tr = max(e.resp_ac.shape[0] for e in examples)
    I = max(len(e.tok_ids) for e in examples)
    resp_ac = np.zeros((B, Tr, d_a), dtype=dtype)
    resp_mask = np.zeros((B, Tr), dtype=dtype)
    tok_ids = np.zeros((B, I), dtype=np.int32)
    tok_mask = np.zeros((B, I), dtype=dtype)
    tok_start = np.zeros((B, I), dtype=np.int64)
    wait_pos = np.zeros((B, I), dtype=dtype)
    none_pos = np.zeros((B, I), dtype=dtype)
    last_tok = np.zeros((B, 1), dtype=np.int64)
    for b, e in enumerate(examples):
        n = len(e.x_ling)
        x_ac[b, :n] = e.x_ac
        x_ling[b, :n] = e.x_ling
        labels[b, :n] = e.labels
        frame_mask[b, : n + pad_frames] = 1.0
        nr = e.resp_ac.shape[0]
        resp_ac[b, :nr] = e.resp_ac
        resp_mask[b, :nr] = 1.0
        ni = len(e.tok_ids)
        tok_ids[b, :ni] = e.tok_ids
        tok_mask[b, :ni] = 1.0
        tok_start[b, :ni] = np.clip(e.tok_start, 0, nr - 1)
        wait_pos[b, :ni] = e.wait_pos
        none_pos[b, :ni] = e.none_pos
        last_tok[b, 0] = ni - 1
    return Batch(
        examples=list(examples),
        x_ac=x_ac,
        x_ling=x_ling,
        frame_mask=frame_mask,
        labels=labels,
        r_start=np.array([e.r_start for e in examples], dtype=np.int64),
        r_end=np.array([e.r_end for e in examples], dtype=np.int64),
        user_last=np.array([e.user_last for e in examples], dtype=np.int64),
        seq_len=lens,
        resp_ac=resp_ac,
        resp_mask=resp_mask,
        tok_ids=tok_ids,
        tok_mask=tok_mask,
        tok_start=tok_start,
        wait_pos=wait_pos,
        none_pos=none_pos,
        last_tok=last_tok,
    )
