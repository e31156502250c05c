"""Response encoder: acoustic, linguistic, and master Bi-LSTMs.

The acoustic Bi-LSTM runs over the response's 50 ms acoustic frames; for
each token the hidden state at the token's start frame is selected (both
directions concatenated). WAIT and NONE carry no acoustic span, so two
trained vectors stand in for their selected states. The linguistic
Bi-LSTM runs over token embeddings. Per token, [selected acoustic ;
linguistic] feeds the master Bi-LSTM, and the response encoding
concatenates the master outputs at the first two and last token
positions: [h_0 ; h_1 ; h_I]. Ablation modes zero one modality's vectors
before the master (acoustic_only / linguistic_only); mode "none" is
handled by the caller (the encoding is simply the zero vector).
"""
from __future__ import annotations

import numpy as np

from .nn import BiLSTM, Embedding, Module
from .rng import RngStream
from .tensor import Parameter, Tensor, concat, gather_frames

ENCODER_MODES = ("full", "acoustic_only", "linguistic_only", "none")


class Encoder(Module):
    def __init__(
        self,
        d_acoustic: int,
        embedding: Embedding,
        acoustic_hidden: int,
        linguistic_hidden: int,
        master_hidden: int,
        rng: RngStream,
        name: str = "enc",
        dtype=np.float32,
    ):
        self.embedding = embedding  # shared with the inference net's user stream
        self.acoustic = BiLSTM(d_acoustic, acoustic_hidden, rng, f"{name}.acoustic", dtype)
        self.linguistic = BiLSTM(embedding.dim, linguistic_hidden, rng, f"{name}.linguistic", dtype)
        sel_dim = 2 * acoustic_hidden
        self.master = BiLSTM(sel_dim + 2 * linguistic_hidden, master_hidden, rng, f"{name}.master", dtype)
        self.wait_state = Parameter(
            rng.uniform(-0.05, 0.05, size=sel_dim).astype(dtype), f"{name}.wait_state"
        )
        self.none_state = Parameter(
            rng.uniform(-0.05, 0.05, size=sel_dim).astype(dtype), f"{name}.none_state"
        )
        self.out_dim = 3 * 2 * master_hidden
        self._dtype = dtype

    def parameters(self):
        # the shared embedding is owned by the model, not double-counted here
        out = []
        for attr in ("acoustic", "linguistic", "master"):
            out.extend(getattr(self, attr).parameters())
        out.extend([self.wait_state, self.none_state])
        return out

    def encode(self, batch, mode: str = "full") -> Tensor:
        """[h_0; h_1; h_I] for a batch — (B, 3 * 2 * master_hidden).

        batch needs: resp_ac (B,Tr,da), resp_mask (B,Tr), tok_ids (B,I),
        tok_mask (B,I), tok_start (B,I), wait_pos/none_pos (B,I) one-hots,
        last_tok (B,1) index of NONE per row.
        """
        if mode not in ENCODER_MODES:
            raise ValueError(f"unknown encoder mode {mode!r}")
        if mode == "none":
            raise ValueError("mode 'none' bypasses encoding; caller supplies zeros")
        B, I = batch.tok_ids.shape
        real = (batch.tok_mask * (1.0 - batch.wait_pos) * (1.0 - batch.none_pos))[:, :, None]

        if mode == "linguistic_only":
            sel = Tensor(np.zeros((B, I, self.wait_state.data.shape[0]), dtype=self._dtype))
        else:
            ac_states = self.acoustic(Tensor(batch.resp_ac), mask=batch.resp_mask)
            picked = gather_frames(ac_states, batch.tok_start)
            wait_row = self.wait_state.reshape(1, 1, -1)
            none_row = self.none_state.reshape(1, 1, -1)
            sel = (
                picked * real
                + wait_row * batch.wait_pos[:, :, None]
                + none_row * batch.none_pos[:, :, None]
            )

        if mode == "acoustic_only":
            ling = Tensor(
                np.zeros((B, I, 2 * self.linguistic.hidden), dtype=self._dtype)
            )
        else:
            emb = self.embedding(batch.tok_ids)
            ling = self.linguistic(emb, mask=batch.tok_mask)

        master_in = concat([sel, ling], axis=-1)
        states = self.master(master_in, mask=batch.tok_mask)
        h0 = _select_token(states, np.zeros((B, 1), dtype=np.int64))
        h1 = _select_token(states, np.ones((B, 1), dtype=np.int64))
        hI = _select_token(states, batch.last_tok)
        return concat([h0, h1, hI], axis=-1)


def _select_token(states: Tensor, idx: np.ndarray) -> Tensor:
    """states (B, I, D) at per-row token index (B, 1) -> (B, D)."""
    picked = gather_frames(states, idx)  # (B, 1, D)
    B, _, D = picked.data.shape
    return picked.reshape(B, D)
