"""Per-frame user linguistic streams, system token sequences, vocabulary.

The user stream simulates an incremental ASR: a word is visible as UNSPEC
from 100 ms after it starts, and resolves to its id 100 ms after it ends;
the id is held until the next word's UNSPEC onset. The system (response)
side is tokenized as WAIT, the words with SIL filling inter-word gaps
longer than one frame, then NONE; each real token records the frame where
it starts so the encoder can pick the matching acoustic state.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import FRAME_MS, Corpus, frame_of_ms

ASR_DELAY_MS = 100

SIL = "<sil>"
WAIT = "<wait>"
NONE = "<none>"
UNSPEC = "<unspec>"
SPECIALS = (SIL, WAIT, NONE, UNSPEC)

SIL_ID, WAIT_ID, NONE_ID, UNSPEC_ID = 0, 1, 2, 3


@dataclass
class VocabMap:
    """token -> embedding id, with counts and merge provenance.

    Ids are dense: specials occupy 0..3, corpus tokens follow. After
    merging, a retired token still maps to its survivor's id and is listed
    in `merged_into`.
    """

    token_to_id: dict
    counts: dict = field(default_factory=dict)  # token -> corpus count
    merged_into: dict = field(default_factory=dict)  # retired token -> surviving token

    @property
    def n_ids(self) -> int:
        return max(self.token_to_id.values()) + 1

    def id_of(self, token: str) -> int:
        return self.token_to_id[token]

    def tokens(self) -> list:
        return sorted(self.token_to_id, key=lambda t: (self.token_to_id[t], t))


def build_vocab(corpus: Corpus) -> VocabMap:
    """Vocabulary over every word token in the corpus, specials first."""
    counts: dict = {}
    for conv in corpus.conversations:
        for ws in conv.words.values():
            for w in ws:
                counts[w.token] = counts.get(w.token, 0) + 1
    token_to_id = {t: i for i, t in enumerate(SPECIALS)}
    for t in sorted(counts):
        token_to_id[t] = len(token_to_id)
    full_counts = {t: counts.get(t, 0) for t in token_to_id}
    return VocabMap(token_to_id=token_to_id, counts=full_counts)


def user_linguistic_events(words):
    """The (ms, priority, value) event timeline behind the user stream.

    priority orders simultaneous events: a word-id emission applies before
    the next word's UNSPEC onset, so back-to-back words show UNSPEC rather
    than a stale id.
    """
    events = []
    for w in words:
        events.append((w.start_ms + ASR_DELAY_MS, 1, UNSPEC))
        events.append((w.end_ms + ASR_DELAY_MS, 0, w.token))
    events.sort(key=lambda e: (e[0], e[1]))
    return events


def user_linguistic_stream(words, n_frames: int) -> list:
    """Per-frame tokens (strings) for the user side; SIL before any event.

    Each event simply overwrites the stream from its frame onward, in
    timeline order — the net effect is "latest event wins", which is what
    a frame-synchronous consumer of an incremental ASR would see.
    """
    stream = [SIL] * n_frames
    for ms, _, value in user_linguistic_events(words):
        f = frame_of_ms(ms)
        if f >= n_frames:
            continue
        for i in range(max(f, 0), n_frames):
            stream[i] = value
    return stream


def user_linguistic_ids(words, n_frames: int, vocab: VocabMap) -> np.ndarray:
    return np.array(
        [vocab.id_of(t) for t in user_linguistic_stream(words, n_frames)], dtype=np.int32
    )


def system_token_stream(words) -> tuple:
    """Response tokens plus per-token start frames.

    Returns (tokens, start_frames): tokens = [WAIT, w1, (SIL,) w2, ..., NONE];
    SIL marks an inter-word gap longer than 50 ms and starts at the first
    silent frame after the preceding word. WAIT and NONE have no start frame.
    """
    words = sorted(words, key=lambda w: w.start_ms)
    if not words:
        raise ValueError("system_token_stream: empty response")
    tokens = [WAIT]
    starts: list = [None]
    prev_end = None
    for w in words:
        if prev_end is not None and w.start_ms - prev_end > FRAME_MS:
            tokens.append(SIL)
            starts.append(int(np.ceil(prev_end / FRAME_MS)))
        tokens.append(w.token)
        starts.append(frame_of_ms(w.start_ms))
        prev_end = w.end_ms
    tokens.append(NONE)
    starts.append(None)
    return tokens, starts


def _cosine_distance_matrix(emb: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    norms = np.where(norms == 0, 1.0, norms)
    unit = emb / norms
    return 1.0 - unit @ unit.T


def merge_vocab(vocab: VocabMap, embeddings: np.ndarray, target_size: int) -> VocabMap:
    """Shrink the vocabulary by greedy nearest-neighbor merging.

    Repeatedly retire the lowest-count non-special token, remapping it to
    the closest surviving non-special token by cosine distance; the
    retiree's count accumulates onto the survivor. Ids are re-densified in
    the returned map (specials keep 0..3). Ties break toward the lower id,
    so the result is deterministic.
    """
    n_specials = len(SPECIALS)
    if target_size < n_specials + 1:
        raise ValueError(f"target_size must be at least {n_specials + 1}")
    if embeddings.shape[0] < vocab.n_ids:
        raise ValueError("embedding table smaller than vocabulary")
    id_to_token = {i: t for t, i in vocab.token_to_id.items() if t not in vocab.merged_into}
    active = sorted(id_to_token)
    counts = {i: vocab.counts.get(id_to_token[i], 0) for i in active}
    dist = _cosine_distance_matrix(embeddings.astype(np.float64))
    merged_to: dict = {}  # retired id -> survivor id
    alive = set(active)
    while len(alive) > target_size:
        candidates = [i for i in alive if i >= n_specials]
        victim = min(candidates, key=lambda i: (counts[i], i))
        others = [j for j in alive if j >= n_specials and j != victim]
        survivor = min(others, key=lambda j: (dist[victim, j], j))
        merged_to[victim] = survivor
        counts[survivor] += counts[victim]
        alive.remove(victim)

    def resolve(i: int) -> int:
        while i in merged_to:
            i = merged_to[i]
        return i

    new_ids = {old: rank for rank, old in enumerate(sorted(alive))}
    token_to_id = {}
    merged_into = dict(vocab.merged_into)
    for t, old in vocab.token_to_id.items():
        final = resolve(old)
        token_to_id[t] = new_ids[final]
        if final != old and t not in merged_into:
            merged_into[t] = id_to_token[final]
    new_counts = dict(vocab.counts)
    return VocabMap(token_to_id=token_to_id, counts=new_counts, merged_into=merged_into)
