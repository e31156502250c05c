"""Word annotations -> frame activity -> IPUs -> turns -> turn pairs.

All timing lives on a 50 ms frame grid. A frame is active when any word of
that speaker overlaps it. IPUs are maximal speech runs merged across pauses
shorter than 200 ms (4 frames); consecutive same-speaker IPUs form a turn
when the other speaker stays silent in between; adjacent different-speaker
turns form (user, system) pairs. The span R of a pair runs from the first
frame of the user's turn-final IPU to the frame just before the system
starts, and the per-frame labels are the system speaker's voice activity
shifted left one frame — a single 1 at the end of R.

Also provides a synthetic conversation generator with known per-act offset
distributions and planted timing cues, used as ground truth throughout the
test suite.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import RngStream

FRAME_MS = 50
MIN_PAUSE_FRAMES = 4  # 200 ms
OFFSET_CLAMP_MS = (-1000.0, 3000.0)


@dataclass(frozen=True)
class WordAnnotation:
    token: str
    start_ms: float
    end_ms: float
    speaker: str

    def __post_init__(self):
        if not self.start_ms < self.end_ms:
            raise ValueError(f"word {self.token!r}: start {self.start_ms} >= end {self.end_ms}")


@dataclass
class SpeechActivity:
    """Per-speaker boolean activity vectors on the shared frame grid."""

    frames: dict  # speaker -> np.ndarray of bool

    @property
    def n_frames(self) -> int:
        return 0 if not self.frames else len(next(iter(self.frames.values())))

    def speaker(self, who: str) -> np.ndarray:
        return self.frames[who]

    def other(self, who: str) -> np.ndarray:
        rest = [v for k, v in self.frames.items() if k != who]
        if len(rest) != 1:
            raise ValueError("expected exactly two speakers")
        return rest[0]


@dataclass(frozen=True)
class Ipu:
    speaker: str
    start_frame: int
    end_frame: int  # inclusive


@dataclass
class Turn:
    speaker: str
    ipus: list

    @property
    def start_frame(self) -> int:
        return self.ipus[0].start_frame

    @property
    def end_frame(self) -> int:
        return self.ipus[-1].end_frame

    @property
    def final_ipu(self) -> Ipu:
        return self.ipus[-1]


@dataclass
class TurnPair:
    """An adjacent user->system turn transition with its scoring span.

    r_start_bound: first frame of the user's turn-final IPU.
    r_end: frame immediately before the system turn starts.
    labels: system voice activity shifted left one frame (full conversation
    length); within [r_start_bound, r_end] it is a single 1 at r_end.
    offset_ms: (system start - (user last speech frame + 1)) * 50, so a
    seamless floor transfer is 0 and overlap is negative.
    """

    user_turn: Turn
    system_turn: Turn
    r_start_bound: int
    r_end: int
    labels: np.ndarray
    offset_ms: int
    da_label: str | None = None

    @property
    def r_length(self) -> int:
        return self.r_end - self.r_start_bound + 1


def frame_of_ms(t_ms: float) -> int:
    """Frame containing millisecond instant t (frame f covers [50f, 50f+50))."""
    return int(np.floor(t_ms / FRAME_MS))


def activity_from_words(words, speakers=("A", "B"), n_frames: int | None = None) -> SpeechActivity:
    """Rasterize word annotations to per-speaker boolean frame vectors.

    A frame is active iff some word of that speaker overlaps any part of it.
    Same-speaker overlapping words are rejected.
    """
    if n_frames is None:
        last_end = max((w.end_ms for w in words), default=0.0)
        n_frames = int(np.ceil(last_end / FRAME_MS))
    frames = {s: np.zeros(n_frames, dtype=bool) for s in speakers}
    by_speaker: dict = {s: [] for s in speakers}
    for w in words:
        if w.speaker not in frames:
            raise ValueError(f"unknown speaker {w.speaker!r}")
        by_speaker[w.speaker].append(w)
    for s, ws in by_speaker.items():
        ws.sort(key=lambda w: (w.start_ms, w.end_ms))
        for prev, nxt in zip(ws, ws[1:]):
            if nxt.start_ms < prev.end_ms:
                raise ValueError(
                    f"overlapping words for speaker {s}: "
                    f"{prev.token!r} ends {prev.end_ms}, {nxt.token!r} starts {nxt.start_ms}"
                )
        for w in ws:
            first = frame_of_ms(w.start_ms)
            last = int(np.ceil(w.end_ms / FRAME_MS)) - 1
            frames[s][first : last + 1] = True
    return SpeechActivity(frames=frames)


def extract_ipus(activity_vec: np.ndarray, speaker: str, min_pause_frames: int = MIN_PAUSE_FRAMES):
    """Maximal speech segments, merged across silences shorter than the threshold."""
    ipus: list[Ipu] = []
    idx = np.flatnonzero(activity_vec)
    if idx.size == 0:
        return ipus
    start = prev = int(idx[0])
    for f in idx[1:]:
        f = int(f)
        if f - prev - 1 >= min_pause_frames:
            ipus.append(Ipu(speaker, start, prev))
            start = f
        prev = f
    ipus.append(Ipu(speaker, start, prev))
    return ipus


def extract_turns(ipus_a, ipus_b, activity: SpeechActivity):
    """Merge same-speaker IPU runs into turns; silence between merged IPUs
    must contain no other-speaker speech. Returned sorted by start frame."""
    turns: list[Turn] = []
    for ipus in (ipus_a, ipus_b):
        if not ipus:
            continue
        speaker = ipus[0].speaker
        other = activity.other(speaker)
        current = [ipus[0]]
        for nxt in ipus[1:]:
            gap = other[current[-1].end_frame + 1 : nxt.start_frame]
            if gap.any():
                turns.append(Turn(speaker, current))
                current = [nxt]
            else:
                current.append(nxt)
        turns.append(Turn(speaker, current))
    turns.sort(key=lambda t: t.start_frame)
    return turns


def _shift_left(vec: np.ndarray) -> np.ndarray:
    out = np.zeros(len(vec), dtype=np.uint8)
    out[:-1] = vec[1:]
    return out


@dataclass
class SegmentedConversation:
    activity: SpeechActivity
    turns: list
    pairs: list
    n_skipped_empty_r: int = 0
    n_skipped_overlap_tail: int = 0


def extract_turn_pairs(turns, activity: SpeechActivity):
    """Adjacent different-speaker turns as (user, system) pairs.

    Pairs are dropped (not errors) when span R is degenerate: the system
    starts at/before the user's final IPU start, or a previous system-turn
    tail is still active inside R. Use :func:`segment_conversation` to get
    the skip counts alongside the pairs.
    """
    pairs, _, _ = _extract_turn_pairs_counted(turns, activity)
    return pairs


def _extract_turn_pairs_counted(turns, activity: SpeechActivity):
    pairs: list[TurnPair] = []
    skipped_empty = 0
    skipped_tail = 0
    for user, system in zip(turns, turns[1:]):
        if user.speaker == system.speaker:
            continue
        r_start = user.final_ipu.start_frame
        r_end = system.start_frame - 1
        if r_end < r_start:
            skipped_empty += 1
            continue
        sys_act = activity.speaker(system.speaker)
        if sys_act[r_start + 1 : r_end + 1].any():
            # an earlier turn of the system speaker bleeds into R
            skipped_tail += 1
            continue
        labels = _shift_left(sys_act.astype(np.uint8))
        offset_ms = (system.start_frame - (user.end_frame + 1)) * FRAME_MS
        pairs.append(
            TurnPair(
                user_turn=user,
                system_turn=system,
                r_start_bound=r_start,
                r_end=r_end,
                labels=labels,
                offset_ms=int(offset_ms),
            )
        )
    return pairs, skipped_empty, skipped_tail


def segment_conversation(words=None, activity: SpeechActivity | None = None) -> SegmentedConversation:
    """Full pipeline from word annotations (or a prebuilt activity grid)."""
    if activity is None:
        activity = activity_from_words(words)
    speakers = sorted(activity.frames)
    ipus = {s: extract_ipus(activity.speaker(s), s) for s in speakers}
    turns = extract_turns(ipus[speakers[0]], ipus[speakers[1]], activity)
    pairs, skipped_empty, skipped_tail = _extract_turn_pairs_counted(turns, activity)
    return SegmentedConversation(
        activity=activity,
        turns=turns,
        pairs=pairs,
        n_skipped_empty_r=skipped_empty,
        n_skipped_overlap_tail=skipped_tail,
    )


def sample_r_start(pair: TurnPair, rng: RngStream) -> int:
    """Uniform draw from [r_start_bound, r_end] (the scored-region start)."""
    if pair.r_end < pair.r_start_bound:
        raise ValueError("span R is empty")
    return int(rng.integers(pair.r_start_bound, pair.r_end + 1))


# ---------------------------------------------------------------------------
# Synthetic corpus with known per-act timing distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ActSpec:
    name: str
    mean_ms: float
    std_ms: float

    def __post_init__(self):
        if self.std_ms < 0:
            raise ValueError(f"act {self.name!r}: std_ms must be >= 0")


@dataclass
class SynthConfig:
    n_pairs: int
    acts: tuple
    acoustic_dim: int = 4
    vocab_size: int = 48
    pairs_per_conversation: int = 3
    ramp_frames: int = 25
    noise_scale: float = 0.05
    seed: int = 0

    def __post_init__(self):
        self.acts = tuple(
            a if isinstance(a, ActSpec) else ActSpec(*a) for a in self.acts
        )
        if len(self.acts) < 2:
            raise ValueError("need at least 2 dialogue acts")
        if self.n_pairs < 1:
            raise ValueError("n_pairs must be >= 1")
        if self.acoustic_dim < 4:
            raise ValueError("acoustic_dim must be >= 4 (speech, ramp, act cue, noise)")
        if self.vocab_size < 2 * len(self.acts):
            raise ValueError("vocab_size too small for disjoint per-act token pools")
        if self.pairs_per_conversation < 1:
            raise ValueError("pairs_per_conversation must be >= 1")


@dataclass
class Conversation:
    conv_id: str
    words: dict  # speaker -> list[WordAnnotation]
    acoustic: dict  # speaker -> np.ndarray (n_frames, acoustic_dim) float32
    pair_acts: list | None = None


@dataclass
class Corpus:
    conversations: list
    meta: dict = field(default_factory=dict)

    def all_words(self, conv: Conversation):
        return [w for ws in conv.words.values() for w in ws]


def act_token_pool(cfg: SynthConfig, act_index: int) -> list:
    """Disjoint token-id ranges per act; remaining ids form the neutral pool."""
    per_act = cfg.vocab_size // (len(cfg.acts) + 1)
    lo = act_index * per_act
    return list(range(lo, lo + per_act))


def neutral_token_pool(cfg: SynthConfig) -> list:
    per_act = cfg.vocab_size // (len(cfg.acts) + 1)
    return list(range(len(cfg.acts) * per_act, cfg.vocab_size))


def _token_name(i: int) -> str:
    return f"w{i:03d}"


class _TurnLayout:
    """Frame layout of one synthetic turn: two IPUs, fixed safety margins."""

    __slots__ = ("start", "ipu1_len", "gap", "ipu2_len")

    def __init__(self, start: int, rng: RngStream):
        self.start = start
        self.ipu1_len = int(rng.integers(12, 19))
        self.gap = int(rng.integers(4, 7))
        # final IPU short enough that the default turn-end countdown cue
        # spans it completely (no cue-less stretch inside the loss window)
        self.ipu2_len = int(rng.integers(16, 25))

    @property
    def final_ipu_start(self) -> int:
        return self.start + self.ipu1_len + self.gap

    @property
    def last_frame(self) -> int:
        return self.final_ipu_start + self.ipu2_len - 1

    def ipu_spans(self):
        return (
            (self.start, self.start + self.ipu1_len - 1),
            (self.final_ipu_start, self.last_frame),
        )


def _fill_ipu_words(span, pool, speaker, rng: RngStream):
    """Tile an IPU span with words 2-6 frames long, intra-gaps <= 3 frames."""
    start, end = span
    words = []
    f = start
    while f <= end:
        remaining = end - f + 1
        length = int(rng.integers(2, min(6, remaining) + 1)) if remaining > 2 else remaining
        tok = _token_name(int(rng.choice(pool)))
        words.append(
            WordAnnotation(tok, f * FRAME_MS, (f + length) * FRAME_MS, speaker)
        )
        f += length
        if f <= end - 5:
            f += int(rng.integers(0, 4))  # short pause, never splits the IPU
    # guarantee the final frame is covered so the IPU ends exactly at `end`
    if words and int(np.ceil(words[-1].end_ms / FRAME_MS)) - 1 < end:
        last_cover = int(np.ceil(words[-1].end_ms / FRAME_MS))
        tok = _token_name(int(rng.choice(pool)))
        words.append(
            WordAnnotation(tok, last_cover * FRAME_MS, (end + 1) * FRAME_MS, speaker)
        )
    return words


def _draw_offset_frames(act: ActSpec, rng: RngStream) -> int:
    raw = rng.normal(act.mean_ms, act.std_ms) if act.std_ms > 0 else act.mean_ms
    lo, hi = OFFSET_CLAMP_MS
    clamped = min(max(float(raw), lo), hi)
    return int(np.rint(clamped / FRAME_MS))


def generate_synthetic_corpus(cfg: SynthConfig) -> Corpus:
    """Conversations with act-controlled response offsets and planted cues.

    Every turn carries: channel 0 = own-speech indicator, channel 1 = a
    turn-end countdown over the whole final IPU (1 - k/`ramp_frames` with k
    frames left until the turn ends, floored at 0, so the cue value maps to
    time-to-end independently of IPU length -- think turn-final pitch
    decline), channel 2 = a per-act signature level on response speech frames,
    channel 3 = noise on own-speech frames (silence stays exactly at the
    resting vector). Response tokens come from disjoint per-act pools, so
    both the acoustic and linguistic routes can identify the act. Offsets
    are drawn from the act's Gaussian, clamped to [-1000, +3000] ms and
    quantized to the frame grid; realized values are recorded in the meta
    block as the ground-truth distribution for evaluation.
    """
    n_convs = -(-cfg.n_pairs // cfg.pairs_per_conversation)
    conversations = []
    act_offsets: dict = {a.name: [] for a in cfg.acts}
    pairs_left = cfg.n_pairs
    for ci in range(n_convs):
        rng = RngStream.derive(cfg.seed, "synth", ci)
        n_pairs_here = min(cfg.pairs_per_conversation, pairs_left)
        pairs_left -= n_pairs_here
        n_turns = n_pairs_here + 1
        words: dict = {"A": [], "B": []}
        layouts = []
        acts = []
        offsets = []
        start = 2
        for ti in range(n_turns):
            layout = _TurnLayout(start, rng)
            layouts.append(layout)
            if ti < n_turns - 1:
                act_idx = int(rng.integers(0, len(cfg.acts)))
                acts.append(act_idx)
                off = _draw_offset_frames(cfg.acts[act_idx], rng)
                offsets.append(off)
                start = layout.last_frame + 1 + off
        for ti, layout in enumerate(layouts):
            speaker = "AB"[ti % 2]
            pool = neutral_token_pool(cfg) if ti == 0 else act_token_pool(cfg, acts[ti - 1])
            for span in layout.ipu_spans():
                words[speaker].extend(_fill_ipu_words(span, pool, speaker, rng))
        n_frames = layouts[-1].last_frame + 2
        acoustic = {
            s: np.zeros((n_frames, cfg.acoustic_dim), dtype=np.float32) for s in "AB"
        }
        for s in "AB":
            acoustic[s][:, 3] = rng.normal(0.0, cfg.noise_scale, size=n_frames).astype(np.float32)
        for ti, layout in enumerate(layouts):
            speaker = "AB"[ti % 2]
            ac = acoustic[speaker]
            for lo, hi in layout.ipu_spans():
                ac[lo : hi + 1, 0] = 1.0
            lo2, hi2 = layout.ipu_spans()[-1]
            left = np.arange(hi2 - lo2, -1, -1, dtype=np.float32)
            ac[lo2 : hi2 + 1, 1] = np.maximum(1.0 - left / cfg.ramp_frames, 0.0)
            if ti > 0:
                sig = (acts[ti - 1] + 1) / len(cfg.acts)
                for lo, hi in layout.ipu_spans():
                    ac[lo : hi + 1, 2] = sig
        for s in "AB":
            # noise rides on speech only; silence is bit-for-bit the resting
            # vector, so appended silence continues the real signal exactly
            acoustic[s][:, 3] *= acoustic[s][:, 0]
        pair_acts = [cfg.acts[a].name for a in acts]
        for a, off in zip(acts, offsets):
            act_offsets[cfg.acts[a].name].append(off * FRAME_MS)
        conversations.append(
            Conversation(
                conv_id=f"synth{ci:05d}",
                words=words,
                acoustic=acoustic,
                pair_acts=pair_acts,
            )
        )
    meta = {
        "kind": "synthetic",
        "seed": cfg.seed,
        "n_pairs": cfg.n_pairs,
        "acoustic_dim": cfg.acoustic_dim,
        "vocab_size": cfg.vocab_size,
        "pairs_per_conversation": cfg.pairs_per_conversation,
        "ramp_frames": cfg.ramp_frames,
        "noise_scale": cfg.noise_scale,
        "acts": [
            {"name": a.name, "mean_ms": a.mean_ms, "std_ms": a.std_ms} for a in cfg.acts
        ],
        "act_offsets_ms": act_offsets,
    }
    return Corpus(conversations=conversations, meta=meta)
