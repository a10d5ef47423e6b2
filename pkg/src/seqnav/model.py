"""Object-and-room informed sequential BERT.

At every navigation step each candidate is encoded as its own token
sequence ``[CLS] x_1..x_L [SEP] o_1..o_N [ORI]``. A batch of episodes is
flattened into one stack of candidate sequences so that the whole step runs
as a single transformer pass; ``seg`` maps each sequence back to its
episode.

The temporal context ``h_{t-1}`` reaches the transformer through the
``[CLS]`` embedding, and ``h_t`` is also appended to every candidate's
action-head input.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .rng import RngStream
from .world import CLS, SEP, Observation

NUM_DIRECTIONS = 4


@dataclass(frozen=True)
class ModelConfig:
    d_h: int = 64
    layers: int = 2
    n_heads: int = 4
    vocab_size: int = 64
    object_feature_dim: int = 64
    max_tokens: int = 64
    room_taxonomy_size: int = 8
    direction_classes: int = NUM_DIRECTIONS
    ffn_mult: int = 4
    temporal: bool = True
    init_std: float = 0.02

    def validate(self):
        if self.d_h % self.n_heads:
            raise ValueError(f"d_h: {self.d_h} not divisible by n_heads {self.n_heads}")
        if self.layers < 1:
            raise ValueError("layers: need at least one transformer layer")
        if self.max_tokens < 3:
            raise ValueError("max_tokens: need room for [CLS], [SEP] and [ORI]")
        if self.direction_classes != NUM_DIRECTIONS:
            raise ValueError("direction_classes: must be 4")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def _trunc_normal(rng: RngStream, shape, std: float) -> np.ndarray:
    x = rng.normal(size=shape)
    bad = np.abs(x) > 2.0
    while bad.any():
        x[bad] = rng.normal(size=int(bad.sum()))
        bad = np.abs(x) > 2.0
    return x * std


def init_params(cfg: ModelConfig, seed: int = 0) -> dict[str, Tensor]:
    cfg.validate()
    rng = RngStream(seed, "init")
    d = cfg.d_h
    shapes: dict[str, tuple] = {}

    def lin(name, din, dout):
        shapes[f"{name}.w"] = (din, dout)
        shapes[f"{name}.b"] = (dout,)

    def norm(name):
        shapes[f"{name}.g"] = (d,)
        shapes[f"{name}.b"] = (d,)

    shapes["emb.tok"] = (cfg.vocab_size, d)
    shapes["emb.pos"] = (cfg.max_tokens, d)
    shapes["emb.type"] = (2, d)
    lin("emb.obj_fea", cfg.object_feature_dim, d)
    lin("emb.obj_pos", 7, d)
    lin("emb.ori", 4, d)
    shapes["emb.hist.w"] = (d, d)
    norm("emb.ln")
    for j in range(cfg.layers):
        for p in "qkvo":
            lin(f"layer{j}.{p}", d, d)
        norm(f"layer{j}.ln1")
        lin(f"layer{j}.ffn1", d, cfg.ffn_mult * d)
        lin(f"layer{j}.ffn2", cfg.ffn_mult * d, d)
        norm(f"layer{j}.ln2")
    lin("enc.w_e", d, d)
    shapes["lstm.wx"] = (d, 4 * d)
    shapes["lstm.wh"] = (d, 4 * d)
    shapes["lstm.b"] = (4 * d,)
    lin("head.dir.l1", d, d)
    lin("head.dir.l2", d, cfg.direction_classes)
    lin("head.act.l1", 2 * d, d)
    lin("head.act.l2", d, 1)
    lin("head.room_next.l1", d, d)
    lin("head.room_next.l2", d, cfg.room_taxonomy_size)
    lin("head.room_goal.l1", d, d)
    lin("head.room_goal.l2", d, cfg.room_taxonomy_size)
    lin("head.prog.l1", d, d)
    lin("head.prog.l2", d, 1)
    lin("head.value", d, 1)

    params = {}
    for name, shape in shapes.items():
        if name.endswith(".g"):
            arr = np.ones(shape)
        elif name.endswith(".b") or name == "lstm.b":
            arr = np.zeros(shape)
        else:
            arr = _trunc_normal(rng, shape, cfg.init_std)
        params[name] = Tensor(arr, requires_grad=True, name=name)
    return params


# ---------------------------------------------------------------- batching


@dataclass
class StepBatch:
    """Numpy-side layout of one navigation step for B episodes."""

    num_episodes: int
    seq_len: int  # C_t
    seg: np.ndarray  # (S,) episode of each candidate sequence
    layout: np.ndarray  # (S*C,) row of the token source used at each slot
    word_tok: np.ndarray  # (nw,) instruction + [SEP] token ids
    word_pos: np.ndarray  # (nw,)
    obj_fea: np.ndarray  # (no, F)
    obj_pos: np.ndarray  # (no, 7)
    ori: np.ndarray  # (S, 4)
    mask: np.ndarray  # (S, C) additive
    pool: np.ndarray  # (B, S) mean-pooling weights
    cand_slot: np.ndarray  # (B, Gmax) index into S (S = padding sentinel)
    cand_mask: np.ndarray  # (B, Gmax) additive
    num_candidates: np.ndarray  # (B,)
    token_counts: np.ndarray  # (S,)
    instr_len: np.ndarray  # (B,)


def make_batch(instructions: list, observations: list[Observation], cfg: ModelConfig) -> StepBatch:
    B = len(observations)
    if B == 0 or len(instructions) != B:
        raise ValueError("make_batch: need one instruction per observation")
    lens, seg, counts = [], [], []
    word_tok, word_pos, wofs = [], [], []
    for b, (x, obs) in enumerate(zip(instructions, observations)):
        x = np.asarray(x, dtype=np.int64)
        if x.size and (x.min() < 0 or x.max() >= cfg.vocab_size):
            raise ValueError(f"make_batch: token id outside vocabulary of size {cfg.vocab_size}")
        if not obs.candidates:
            raise ValueError("make_batch: observation without candidates")
        wofs.append(len(word_tok))
        word_tok.extend(x.tolist() + [SEP])
        word_pos.extend(range(1, len(x) + 2))
        lens.append(len(x))
        for c in obs.candidates:
            n = len(c.obj_category)
            total = len(x) + 2 + n + 1
            if total > cfg.max_tokens:
                raise ValueError(
                    f"make_batch: {len(x)} words + {n} objects + 3 special tokens = {total} > max_tokens {cfg.max_tokens}"
                )
            seg.append(b)
            counts.append(total)
    S = len(seg)
    C = max(counts)
    nw = len(word_tok)
    all_cands = [c for obs in observations for c in obs.candidates]
    n_obj = [len(c.obj_category) for c in all_cands]
    no = int(np.sum(n_obj))
    # token source rows: [cls (B) | words (nw) | objects (no) | ori (S) | zero]
    cls0, w0, o0, d0, z = 0, B, B + nw, B + nw + no, B + nw + no + S
    layout = np.full((S, C), z, dtype=np.int64)
    mask = np.full((S, C), ag.NEG_INF, dtype=ag.get_dtype())
    oofs = o0
    for s, (b, cnt, n) in enumerate(zip(seg, counts, n_obj)):
        L = lens[b]
        layout[s, 0] = cls0 + b
        layout[s, 1 : L + 2] = w0 + wofs[b] + np.arange(L + 1)
        layout[s, L + 2 : L + 2 + n] = oofs + np.arange(n)
        layout[s, L + 2 + n] = d0 + s
        mask[s, :cnt] = 0.0
        oofs += n
    F = cfg.object_feature_dim
    obj_fea = np.concatenate([c.obj_feature.reshape(-1, F) for c in all_cands]) if no else np.zeros((0, F))
    obj_pos = np.concatenate([c.obj_pos.reshape(-1, 7) for c in all_cands]) if no else np.zeros((0, 7))
    ori = np.stack([c.orientation for c in all_cands])
    seg_arr = np.array(seg, dtype=np.int64)
    G = np.bincount(seg_arr, minlength=B)
    pool = np.zeros((B, S))
    pool[seg_arr, np.arange(S)] = 1.0 / G[seg_arr]
    Gmax = int(G.max())
    cand_slot = np.full((B, Gmax), S, dtype=np.int64)
    cand_mask = np.full((B, Gmax), ag.NEG_INF)
    start = 0
    for b in range(B):
        cand_slot[b, : G[b]] = np.arange(start, start + G[b])
        cand_mask[b, : G[b]] = 0.0
        start += G[b]
    dt = ag.get_dtype()
    return StepBatch(
        num_episodes=B,
        seq_len=C,
        seg=seg_arr,
        layout=layout.reshape(-1),
        word_tok=np.array(word_tok, dtype=np.int64),
        word_pos=np.array(word_pos, dtype=np.int64),
        obj_fea=obj_fea.astype(dt),
        obj_pos=obj_pos.astype(dt),
        ori=ori.astype(dt),
        mask=mask,
        pool=pool.astype(dt),
        cand_slot=cand_slot,
        cand_mask=cand_mask.astype(dt),
        num_candidates=G,
        token_counts=np.array(counts, dtype=np.int64),
        instr_len=np.array(lens, dtype=np.int64),
    )


# ---------------------------------------------------------------- forward


@dataclass
class StepOutput:
    E: Tensor  # (S, d)
    I: Tensor  # (B, d)
    h: Tensor  # (B, d)
    c: Tensor  # (B, d)
    direction: Tensor  # (S, 4) logits
    action: Tensor  # (B, Gmax) logits, padded slots hold 0 (use cand_mask)
    room_next: Tensor  # (B, R) logits
    room_goal: Tensor  # (B, R) logits
    progress: Tensor  # (B,) in (0, 1)
    value: Tensor  # (B,)
    batch: StepBatch
    attention: list = field(default_factory=list)  # per layer (S, heads, C, C) arrays


def _lin(P, name, x):
    return ag.linear(x, P[f"{name}.w"], P[f"{name}.b"])


def _ln(P, name, x):
    return ag.layer_norm(x, P[f"{name}.g"], P[f"{name}.b"])


def _mlp(P, name, x):
    return _lin(P, f"{name}.l2", ag.gelu(_lin(P, f"{name}.l1", x)))


def embed_inputs(P: dict[str, Tensor], batch: StepBatch, h_prev: Tensor, cfg: ModelConfig):
    """Initial embedding: returns H_{t,0} (S, C, d) and the additive mask (S, C)."""
    d = cfg.d_h
    B = batch.num_episodes
    tok, pos, typ = P["emb.tok"], P["emb.pos"], P["emb.type"]
    cls = ag.take(tok, np.full(B, CLS)) + ag.take(pos, np.zeros(B, dtype=np.int64)) + typ[0:1]
    cls = cls + ag.matmul(h_prev, P["emb.hist.w"])
    words = ag.take(tok, batch.word_tok) + ag.take(pos, batch.word_pos) + typ[0:1]
    sources = [cls, words]
    if len(batch.obj_fea):
        objs = _lin(P, "emb.obj_fea", Tensor(batch.obj_fea)) + _lin(P, "emb.obj_pos", Tensor(batch.obj_pos)) + typ[1:2]
        sources.append(objs)
    sources.append(_lin(P, "emb.ori", Tensor(batch.ori)))
    sources.append(Tensor(np.zeros((1, d))))
    rows = ag.take(ag.concat(sources, axis=0), batch.layout)
    S, C = len(batch.seg), batch.seq_len
    H0 = _ln(P, "emb.ln", ag.reshape(rows, (S, C, d)))
    return H0, batch.mask


def transformer_layer(P: dict[str, Tensor], j: int, H: Tensor, mask: np.ndarray, cfg: ModelConfig,
                      record: list | None = None) -> Tensor:
    S, C, d = H.shape
    nh = cfg.n_heads
    dk = d // nh

    def heads(x):
        return ag.transpose(ag.reshape(x, (S, C, nh, dk)), (0, 2, 1, 3))

    q = heads(_lin(P, f"layer{j}.q", H))
    k = heads(_lin(P, f"layer{j}.k", H))
    v = heads(_lin(P, f"layer{j}.v", H))
    scores = ag.matmul(q, ag.transpose(k, (0, 1, 3, 2))) * (1.0 / np.sqrt(dk))
    probs = ag.masked_softmax(scores, mask[:, None, None, :])
    if record is not None:
        record.append(probs.data)
    ctx = ag.reshape(ag.transpose(ag.matmul(probs, v), (0, 2, 1, 3)), (S, C, d))
    H1 = _ln(P, f"layer{j}.ln1", H + _lin(P, f"layer{j}.o", ctx))
    ff = _lin(P, f"layer{j}.ffn2", ag.gelu(_lin(P, f"layer{j}.ffn1", H1)))
    return _ln(P, f"layer{j}.ln2", H1 + ff)


def lstm_cell(P: dict[str, Tensor], x: Tensor, h: Tensor, c: Tensor):
    d = h.shape[-1]
    gates = ag.linear(x, P["lstm.wx"], P["lstm.b"]) + ag.matmul(h, P["lstm.wh"])
    i = ag.sigmoid(gates[:, 0:d])
    f = ag.sigmoid(gates[:, d : 2 * d])
    g = ag.tanh(gates[:, 2 * d : 3 * d])
    o = ag.sigmoid(gates[:, 3 * d : 4 * d])
    c_new = f * c + i * g
    return o * ag.tanh(c_new), c_new


def heads(P: dict[str, Tensor], E: Tensor, I: Tensor, h: Tensor, batch: StepBatch):
    """Direction/action logits per candidate; room, progress and value per episode."""
    S = E.shape[0]
    hs = ag.take(h, batch.seg)
    act = ag.reshape(_mlp(P, "head.act", ag.concat([E, hs], axis=1)), (S,))
    act = ag.take(ag.concat([act, Tensor(np.zeros(1))], axis=0), batch.cand_slot)
    B = batch.num_episodes
    return {
        "direction": _mlp(P, "head.dir", E),
        "action": act,
        "room_next": _mlp(P, "head.room_next", I),
        "room_goal": _mlp(P, "head.room_goal", I),
        "progress": ag.sigmoid(ag.reshape(_mlp(P, "head.prog", I), (B,))),
        "value": ag.reshape(_lin(P, "head.value", I), (B,)),
    }


class ORIST:
    def __init__(self, config: ModelConfig, seed: int = 0, params: dict[str, Tensor] | None = None):
        config.validate()
        self.config = config
        self.params = params if params is not None else init_params(config, seed)

    def initial_state(self, batch_size: int) -> tuple[Tensor, Tensor]:
        z = np.zeros((batch_size, self.config.d_h))
        return Tensor(z), Tensor(z)

    def step(self, batch: StepBatch, h_prev: Tensor, c_prev: Tensor, record_attention: bool = False) -> StepOutput:
        """One navigation step for all episodes in ``batch``."""
        P, cfg = self.params, self.config
        if not cfg.temporal:
            h_prev, c_prev = self.initial_state(batch.num_episodes)
        H, mask = embed_inputs(P, batch, h_prev, cfg)
        record = [] if record_attention else None
        for j in range(cfg.layers):
            H = transformer_layer(P, j, H, mask, cfg, record)
        E = ag.tanh(_lin(P, "enc.w_e", H[:, 0]))
        I = ag.matmul(Tensor(batch.pool), E)
        h, c = lstm_cell(P, I, h_prev, c_prev)
        out = heads(P, E, I, h, batch)
        return StepOutput(E=E, I=I, h=h, c=c, batch=batch, attention=record or [], **out)

    def encode_step(self, instruction, observation: Observation, state=None):
        """Single-episode convenience: returns (E_t, I_t, (h_t, c_t), StepOutput)."""
        batch = make_batch([instruction], [observation], self.config)
        h, c = state if state is not None else self.initial_state(1)
        out = self.step(batch, h, c)
        return out.E, out.I[0], (out.h, out.c), out

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))


def conditioning_on_context(model: ORIST, instruction, observation: Observation, state_a, state_b):
    """Run one step from two histories (h, c) on the same input; returns both StepOutputs."""
    batch = make_batch([instruction], [observation], model.config)
    with ag.no_grad():
        return model.step(batch, *state_a), model.step(batch, *state_b)
