"""Decoder-only causal transformer built on the tensor substrate.

Pre-norm blocks, learned absolute positions, weight tying between the token
embedding and the output projection. Forward exposes every layer's block
output (layer 0 = token+position embedding) so sentence embeddings can be
read at any depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as tz
from .errors import ConfigError, EmptyInputError, LayerIndexError, SequenceLengthError
from .tokenizer import EOS_ID, PAD_ID


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 6
    d_ff: int = 256
    max_seq_len: int = 64
    dropout_rate: float = 0.0

    def __post_init__(self):
        if min(self.vocab_size, self.d_model, self.n_heads, self.n_layers,
               self.d_ff, self.max_seq_len) <= 0:
            raise ConfigError("all model dimensions must be positive")
        if self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}"
            )
        if self.dropout_rate != 0.0:
            raise ConfigError("desk-scale config trains without dropout")


@dataclass
class LayerParams:
    ln1_gain: tz.Tensor
    ln1_bias: tz.Tensor
    wq: tz.Tensor
    bq: tz.Tensor
    wk: tz.Tensor
    bk: tz.Tensor
    wv: tz.Tensor
    bv: tz.Tensor
    wo: tz.Tensor
    bo: tz.Tensor
    ln2_gain: tz.Tensor
    ln2_bias: tz.Tensor
    w1: tz.Tensor
    b1: tz.Tensor
    w2: tz.Tensor
    b2: tz.Tensor


@dataclass
class ModelParams:
    config: ModelConfig
    token_embedding: tz.Tensor  # [V, d]; also the (tied) output projection
    positional_embedding: tz.Tensor  # [max_seq_len, d]
    layers: list[LayerParams]
    final_norm_gain: tz.Tensor
    final_norm_bias: tz.Tensor

    def named_parameters(self) -> list[tuple[str, tz.Tensor]]:
        """Fixed, stable ordering; the checkpoint and optimizer key off it."""
        out = [
            ("token_embedding", self.token_embedding),
            ("positional_embedding", self.positional_embedding),
        ]
        for i, lp in enumerate(self.layers):
            for fname in ("ln1_gain", "ln1_bias", "wq", "bq", "wk", "bk", "wv",
                          "bv", "wo", "bo", "ln2_gain", "ln2_bias", "w1", "b1",
                          "w2", "b2"):
                out.append((f"layer{i}.{fname}", getattr(lp, fname)))
        out.append(("final_norm_gain", self.final_norm_gain))
        out.append(("final_norm_bias", self.final_norm_bias))
        return out

    def zero_grads(self) -> None:
        for _, t in self.named_parameters():
            t.zero_grad()


@dataclass
class ForwardTrace:
    logits: tz.Tensor  # [T, V] (or [B, T, V] from forward_batch)
    hidden_states: list[tz.Tensor]  # length n_layers + 1; layer 0 = embeddings
    ids: np.ndarray


def param_count(config: ModelConfig) -> int:
    """Analytic count with the output projection tied (counted once)."""
    d, ff = config.d_model, config.d_ff
    per_layer = 4 * d * d + 2 * d * ff + 9 * d + ff
    return (config.vocab_size * d + config.max_seq_len * d
            + config.n_layers * per_layer + 2 * d)


def init_params(config: ModelConfig, seed: int, dtype=np.float32) -> ModelParams:
    """Weights ~ normal(0, 0.02); norm gains 1; every bias 0. Deterministic."""
    rng = np.random.default_rng(seed)

    def w(*shape):
        return tz.Tensor(rng.normal(0.0, 0.02, shape).astype(dtype),
                         requires_grad=True)

    def ones(n):
        return tz.Tensor(np.ones(n, dtype=dtype), requires_grad=True)

    def zeros(n):
        return tz.Tensor(np.zeros(n, dtype=dtype), requires_grad=True)

    d, ff = config.d_model, config.d_ff
    layers = []
    tok = w(config.vocab_size, d)
    pos = w(config.max_seq_len, d)
    for _ in range(config.n_layers):
        layers.append(LayerParams(
            ln1_gain=ones(d), ln1_bias=zeros(d),
            wq=w(d, d), bq=zeros(d), wk=w(d, d), bk=zeros(d),
            wv=w(d, d), bv=zeros(d), wo=w(d, d), bo=zeros(d),
            ln2_gain=ones(d), ln2_bias=zeros(d),
            w1=w(d, ff), b1=zeros(ff), w2=w(ff, d), b2=zeros(d),
        ))
    return ModelParams(
        config=config,
        token_embedding=tok,
        positional_embedding=pos,
        layers=layers,
        final_norm_gain=ones(d),
        final_norm_bias=zeros(d),
    )


_causal_bias_cache: dict[tuple[int, str], np.ndarray] = {}


def _causal_bias(t: int, dtype) -> np.ndarray:
    key = (t, np.dtype(dtype).name)
    if key not in _causal_bias_cache:
        bias = np.triu(np.full((t, t), tz.NEG_INF_FILL, dtype=dtype), k=1)
        _causal_bias_cache[key] = bias
    return _causal_bias_cache[key]


def forward_batch(params: ModelParams, ids2d) -> ForwardTrace:
    """Batched forward over right-padded rows; logits [B, T, V].

    Causality makes right padding harmless: a PAD column can only influence
    positions after it, and those are masked out of every loss.
    """
    cfg = params.config
    ids2d = np.asarray(ids2d, dtype=np.int64)
    if ids2d.ndim != 2:
        raise ConfigError(f"expected [B, T] ids, got shape {ids2d.shape}")
    b, t = ids2d.shape
    if t == 0:
        raise EmptyInputError("empty token sequence")
    if t > cfg.max_seq_len:
        raise SequenceLengthError(
            f"sequence length {t} exceeds max_seq_len {cfg.max_seq_len}"
        )
    d, nh = cfg.d_model, cfg.n_heads
    dh = d // nh
    dtype = params.token_embedding.dtype

    tok = tz.embedding_lookup(params.token_embedding, ids2d)  # [B,T,d]
    pos = tz.embedding_lookup(params.positional_embedding, np.arange(t))  # [T,d]
    h = tz.add(tok, pos)
    hidden = [h]
    bias = tz.Tensor(_causal_bias(t, dtype))
    scale = 1.0 / math.sqrt(dh)

    for lp in params.layers:
        x = tz.layer_norm(h, lp.ln1_gain, lp.ln1_bias)
        q = tz.add(x.matmul(lp.wq), lp.bq)
        k = tz.add(x.matmul(lp.wk), lp.bk)
        v = tz.add(x.matmul(lp.wv), lp.bv)
        # [B,T,d] -> [B,H,T,dh]
        q = q.reshape((b, t, nh, dh)).transpose(1, 2)
        k = k.reshape((b, t, nh, dh)).transpose(1, 2)
        v = v.reshape((b, t, nh, dh)).transpose(1, 2)
        scores = tz.add(q.matmul(k.transpose(2, 3)) * scale, bias)  # [B,H,T,T]
        att = tz.softmax(scores)
        ctx = att.matmul(v).transpose(1, 2).reshape((b, t, d))
        h = tz.add(h, tz.add(ctx.matmul(lp.wo), lp.bo))

        x2 = tz.layer_norm(h, lp.ln2_gain, lp.ln2_bias)
        inner = tz.gelu(tz.add(x2.matmul(lp.w1), lp.b1))
        h = tz.add(h, tz.add(inner.matmul(lp.w2), lp.b2))
        hidden.append(h)

    hf = tz.layer_norm(h, params.final_norm_gain, params.final_norm_bias)
    logits = hf.matmul(params.token_embedding.transpose(0, 1))  # tied projection
    return ForwardTrace(logits=logits, hidden_states=hidden, ids=ids2d)


def forward(params: ModelParams, ids) -> ForwardTrace:
    """Single-sequence forward; logits [T, V], hidden states [T, d] each."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1:
        raise ConfigError(f"expected 1-D ids, got shape {ids.shape}")
    trace = forward_batch(params, ids[None, :])
    t = ids.shape[0]
    v = params.config.vocab_size
    d = params.config.d_model
    return ForwardTrace(
        logits=trace.logits.reshape((t, v)),
        hidden_states=[hs.reshape((t, d)) for hs in trace.hidden_states],
        ids=ids,
    )


def sentence_embedding(trace: ForwardTrace, layer: int) -> np.ndarray:
    """Hidden state of the last non-PAD position at the given layer."""
    n_layers = len(trace.hidden_states) - 1
    if not 0 <= layer <= n_layers:
        raise LayerIndexError(f"layer {layer} outside [0, {n_layers}]")
    if trace.ids.ndim != 1:
        raise ConfigError("sentence_embedding expects a single-sequence trace")
    non_pad = np.nonzero(trace.ids != PAD_ID)[0]
    if non_pad.size == 0:
        raise EmptyInputError("sequence is all PAD")
    return np.array(trace.hidden_states[layer].data[non_pad[-1]])


def greedy_decode(params: ModelParams, prefix_ids, max_new: int) -> list[int]:
    """Argmax continuation; stops at EOS; ties resolve to the lowest id."""
    prefix = [int(i) for i in prefix_ids]
    if len(prefix) == 0:
        raise EmptyInputError("empty prefix")
    if len(prefix) + max_new > params.config.max_seq_len:
        raise SequenceLengthError(
            f"prefix {len(prefix)} + max_new {max_new} exceeds "
            f"max_seq_len {params.config.max_seq_len}"
        )
    ids = list(prefix)
    with tz.no_grad():
        for _ in range(max_new):
            trace = forward(params, np.asarray(ids))
            nxt = int(np.argmax(trace.logits.data[-1]))
            ids.append(nxt)
            if nxt == EOS_ID:
                break
    return ids


def greedy_decode_batch(params: ModelParams, prefixes: list[list[int]],
                        max_new: int) -> list[list[int]]:
    """Row-parallel greedy decode; identical outputs to greedy_decode per row."""
    if not prefixes:
        return []
    cfg = params.config
    lens = np.array([len(p) for p in prefixes], dtype=np.int64)
    if lens.min() == 0:
        raise EmptyInputError("empty prefix")
    caps = np.minimum(lens + max_new, cfg.max_seq_len)
    if (lens + max_new > cfg.max_seq_len).any():
        raise SequenceLengthError("a prefix leaves no room for max_new tokens")
    b = len(prefixes)
    width = int(caps.max())
    ids = np.full((b, width), PAD_ID, dtype=np.int64)
    for i, p in enumerate(prefixes):
        ids[i, : len(p)] = p
    done = np.zeros(b, dtype=bool)
    with tz.no_grad():
        while True:
            active = ~done & (lens < caps)
            if not active.any():
                break
            t_cur = int(lens.max())
            trace = forward_batch(params, ids[:, :t_cur])
            rows = np.nonzero(active)[0]
            nxt = np.argmax(trace.logits.data[rows, lens[rows] - 1], axis=-1)
            ids[rows, lens[rows]] = nxt
            lens[rows] += 1
            done[rows] |= nxt == EOS_ID
    return [list(ids[i, : lens[i]]) for i in range(b)]
