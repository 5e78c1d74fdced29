"""Optimization loop for every training regime, plus checkpoints and metrics.

A run is fully determined by (TrainConfig, TrainData): example order comes
from string-seeded generators keyed on (seed, epoch), so a checkpoint needs
to store only the seed and the step counter to resume bit-for-bit.
"""

from __future__ import annotations

import enum
import json
import os
import random
import struct
import time
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import MonoRecord, SentencePair
from .errors import (
    CheckpointFormatError,
    ConfigError,
    ContractError,
    DivergenceError,
    NonFiniteLossError,
)
from .model import ModelConfig, ModelParams, init_params, param_count
from .objectives import (
    DEFAULT_CLI_TEMPLATE,
    TrainingExample,
    build_bi_ntp_example,
    build_cl_example,
    build_cli_example,
    build_ntp_example,
    joint_loss,
    make_mix_schedule,
)
from .tokenizer import Vocab


class Variant(enum.Enum):
    """Training regimes: the four main variants and the four data ablations.

    E_SEP splits pair data into unrelated monolingual sentences; E_POST_MT
    holds pairs back for a closing fine-tune phase; E_PRE_MT trains on
    instruction-formatted pairs throughout; E_CROSS is the plain
    source-conditioned objective (same recipe as CL).
    """

    NTP_ONLY = "NTP_ONLY"
    BI_NTP = "BI_NTP"
    CLI = "CLI"
    CL = "CL"
    E_SEP = "E_SEP"
    E_POST_MT = "E_POST_MT"
    E_PRE_MT = "E_PRE_MT"
    E_CROSS = "E_CROSS"


_PAIR_USING = (
    Variant.BI_NTP,
    Variant.CLI,
    Variant.CL,
    Variant.E_SEP,
    Variant.E_POST_MT,
    Variant.E_PRE_MT,
    Variant.E_CROSS,
)

METRICS_HEADER = "step,lr,loss_total,loss_ntp,loss_cl"


@dataclass
class TrainConfig:
    variant: Variant
    steps: int = 3000
    batch_size: int = 16
    lr: float = 1e-4
    warmup_ratio: float = 0.01
    weight_decay: float = 0.01
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    mix_ratio: float = 0.527
    divergence_threshold: float = 20.0
    divergence_patience: int = 100

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.warmup_ratio <= 1.0:
            raise ConfigError(f"warmup_ratio must lie in [0, 1], got {self.warmup_ratio}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        b1, b2 = self.betas
        if not (0.0 <= b1 < 1.0 and 0.0 <= b2 < 1.0):
            raise ConfigError(f"betas must lie in [0, 1), got {self.betas}")
        if self.eps <= 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if not 0.0 < self.mix_ratio < 1.0:
            raise ConfigError(f"mix_ratio must lie strictly inside (0, 1), got {self.mix_ratio}")
        if self.divergence_patience < 1:
            raise ConfigError("divergence_patience must be >= 1")

    @property
    def warmup_steps(self) -> int:
        return max(1, round(self.warmup_ratio * self.steps))


@dataclass
class TrainData:
    vocab: Vocab
    mono: list[MonoRecord]
    pairs: list[SentencePair]


def lr_at(step: int, config: TrainConfig) -> float:
    """Linear warmup to lr, then cosine decay to 0.1*lr at the final step."""
    if not 0 <= step <= config.steps:
        raise ConfigError(f"step {step} outside 0..{config.steps}")
    warmup = config.warmup_steps
    if step <= warmup:
        return config.lr * step / warmup
    progress = (step - warmup) / (config.steps - warmup)
    return float(config.lr * (0.1 + 0.9 * 0.5 * (1.0 + np.cos(np.pi * progress))))


# ---------------------------------------------------------------- optimizer


@dataclass
class AdamWState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0


def init_adamw(params) -> AdamWState:
    m = {name: np.zeros_like(p.data) for name, p in params.named_parameters()}
    v = {name: np.zeros_like(p.data) for name, p in params.named_parameters()}
    return AdamWState(m=m, v=v, t=0)


def adamw_step(params, state: AdamWState, lr_t: float, config: TrainConfig) -> None:
    """One decoupled-weight-decay Adam update, in place.

    Decay applies only to matrix-shaped parameters; layer-norm gains and all
    bias vectors (ndim < 2) are left undecayed.
    """
    b1, b2 = config.betas
    state.t += 1
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for name, p in params.named_parameters():
        g = p.grad
        if g is None:
            raise ContractError(f"adamw_step before backward: no grad for {name}")
        n_bad = int(np.size(g) - np.isfinite(g).sum())
        if n_bad:
            raise NonFiniteLossError(
                f"{n_bad} non-finite gradient entries in {name} at opt step {state.t}"
            )
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + config.eps)
        if p.data.ndim >= 2:
            update = update + config.weight_decay * p.data
        p.data -= lr_t * update


# ---------------------------------------------------------------- data pools


def _flip(pair: SentencePair) -> SentencePair:
    return SentencePair(pair.tgt_lang, pair.src_lang, list(pair.tgt), list(pair.src))


def both_directions(pairs) -> list[SentencePair]:
    """Each stored pair trains both translation directions."""
    return list(pairs) + [_flip(p) for p in pairs]


def build_pools(variant: Variant, data: TrainData, template: str = DEFAULT_CLI_TEMPLATE):
    """Materialize the example pools a variant draws from.

    Returns {"ntp": [...], "pair": [...], "ft": [...]}; "pair" feeds the
    mixed schedule, "ft" only exists for the held-back fine-tune regime.
    """
    if not data.mono:
        raise ConfigError("training needs a nonempty monolingual corpus")
    if variant in _PAIR_USING and not data.pairs:
        raise ConfigError(f"variant {variant.name} needs parallel pairs")

    vocab = data.vocab
    ntp = [
        build_ntp_example(rec.words, vocab, pair_id=f"mono/{rec.lang}/{i}")
        for i, rec in enumerate(data.mono)
    ]
    pair_pool: list[TrainingExample] = []
    ft_pool: list[TrainingExample] = []
    directed = both_directions(data.pairs) if data.pairs else []

    if variant is Variant.NTP_ONLY:
        pass
    elif variant in (Variant.CL, Variant.E_CROSS):
        pair_pool = [
            build_cl_example(p, vocab, pair_id=f"pair/{p.src_lang}-{p.tgt_lang}/{i}")
            for i, p in enumerate(directed)
        ]
    elif variant in (Variant.CLI, Variant.E_PRE_MT):
        pair_pool = [
            build_cli_example(p, vocab, template, pair_id=f"pair/{p.src_lang}-{p.tgt_lang}/{i}")
            for i, p in enumerate(directed)
        ]
    elif variant is Variant.BI_NTP:
        pair_pool = [
            build_bi_ntp_example(p, vocab, pair_id=f"pair/{p.src_lang}-{p.tgt_lang}/{i}")
            for i, p in enumerate(directed)
        ]
    elif variant is Variant.E_SEP:
        # pair data enters as unrelated monolingual sentences: each stored
        # pair contributes its two sides once, never as a linked example
        for i, p in enumerate(data.pairs):
            ntp.append(build_ntp_example(p.src, vocab, pair_id=f"sep/{p.src_lang}/{i}"))
            ntp.append(build_ntp_example(p.tgt, vocab, pair_id=f"sep/{p.tgt_lang}/{i}"))
    elif variant is Variant.E_POST_MT:
        ft_pool = [
            build_cli_example(p, vocab, template, pair_id=f"ft/{p.src_lang}-{p.tgt_lang}/{i}")
            for i, p in enumerate(directed)
        ]
    else:
        raise ConfigError(f"unhandled variant {variant}")
    return {"ntp": ntp, "pair": pair_pool, "ft": ft_pool}


def _single_stream(pool_size: int, seed: int, tag: str):
    """Endless index stream that reshuffles the pool every full pass."""
    epoch = 0
    while True:
        rng = random.Random(f"pool/{tag}/{seed}/{epoch}")
        order = list(range(pool_size))
        rng.shuffle(order)
        yield from order
        epoch += 1


def _mixed_stream(schedule):
    epoch = 0
    while True:
        yield from schedule.epoch_slots(epoch)
        epoch += 1


def phase1_steps(config: TrainConfig) -> int:
    """Steps the held-back regime spends on plain NTP before its fine-tune."""
    return round(0.9 * config.steps)


def _example_feed(config: TrainConfig, pools):
    """Yields (pool_name, example) batches, one list per training step.

    The stream position is a pure function of (seed, step), which is what
    makes checkpoint resume exact.
    """
    n = config.batch_size
    if config.variant is Variant.E_POST_MT:
        mono = _single_stream(len(pools["ntp"]), config.seed, "ntp")
        ft = _single_stream(len(pools["ft"]), config.seed, "ft")
        boundary = phase1_steps(config)
        for step in range(1, config.steps + 1):
            if step <= boundary:
                yield [("ntp", pools["ntp"][next(mono)]) for _ in range(n)]
            else:
                yield [("ft", pools["ft"][next(ft)]) for _ in range(n)]
    elif pools["pair"]:
        schedule = make_mix_schedule(
            len(pools["ntp"]), len(pools["pair"]), ratio=config.mix_ratio, seed=config.seed
        )
        slots = _mixed_stream(schedule)
        for _ in range(config.steps):
            batch = []
            for _ in range(n):
                kind, idx = next(slots)
                pool = "ntp" if kind == "ntp" else "pair"
                batch.append((pool, pools[pool][idx]))
            yield batch
    else:
        mono = _single_stream(len(pools["ntp"]), config.seed, "ntp")
        for _ in range(config.steps):
            yield [("ntp", pools["ntp"][next(mono)]) for _ in range(n)]


# ---------------------------------------------------------------- the loop


@dataclass
class TrainResult:
    params: ModelParams
    opt_state: AdamWState
    config: TrainConfig
    model_config: ModelConfig
    metrics: list
    manifest: dict


def _run_loop(params, opt, feed, config, start_step=0, eval_hook=None, eval_every=0):
    metrics = []
    pool_counts: Counter = Counter()
    task_counts: Counter = Counter()
    above_threshold = 0
    for step, tagged in enumerate(feed, start=1):
        if step <= start_step:
            continue  # resumed run: the feed was already consumed this far
        examples = [ex for _, ex in tagged]
        for pool_name, ex in tagged:
            pool_counts[pool_name] += 1
            task_counts[ex.task.name] += 1
        params.zero_grads()
        total, ntp_part, cl_part = joint_loss(params, examples)
        total.backward()
        lr_t = lr_at(step, config)
        adamw_step(params, opt, lr_t, config)
        loss_val = float(total.data)
        metrics.append(
            {
                "step": step,
                "lr": lr_t,
                "loss_total": loss_val,
                "loss_ntp": ntp_part,
                "loss_cl": cl_part,
            }
        )
        if loss_val > config.divergence_threshold:
            above_threshold += 1
            if above_threshold >= config.divergence_patience:
                raise DivergenceError(
                    f"loss above {config.divergence_threshold} for "
                    f"{config.divergence_patience} consecutive steps "
                    f"(step {step}, loss {loss_val:.4f})"
                )
        else:
            above_threshold = 0
        if eval_hook is not None and eval_every and step % eval_every == 0:
            eval_hook(step, params)
    return metrics, pool_counts, task_counts


def train(
    config: TrainConfig,
    data: TrainData,
    model_config: ModelConfig | None = None,
    out_dir=None,
    eval_hook=None,
    eval_every: int = 0,
    init_state=None,
    template: str = DEFAULT_CLI_TEMPLATE,
) -> TrainResult:
    """Run one regime end to end; deterministic given the config seed.

    init_state resumes from (params, opt_state, start_step) as loaded from a
    checkpoint; everything else (fresh run) initializes from config.seed.
    """
    t0 = time.perf_counter()
    if model_config is None:
        model_config = ModelConfig(vocab_size=data.vocab.size)
    if model_config.vocab_size != data.vocab.size:
        raise ConfigError(
            f"model vocab {model_config.vocab_size} != tokenizer vocab {data.vocab.size}"
        )
    if init_state is None:
        params = init_params(model_config, seed=config.seed)
        opt = init_adamw(params)
        start_step = 0
    else:
        params, opt, start_step = init_state
        if not 0 <= start_step <= config.steps:
            raise ConfigError(f"resume step {start_step} outside 0..{config.steps}")

    pools = build_pools(config.variant, data, template)
    feed = _example_feed(config, pools)
    metrics, pool_counts, task_counts = _run_loop(
        params, opt, feed, config, start_step=start_step,
        eval_hook=eval_hook, eval_every=eval_every,
    )

    manifest = {
        "variant": config.variant.name,
        "seed": config.seed,
        "steps": config.steps,
        "batch_size": config.batch_size,
        "lr": config.lr,
        "warmup_steps": config.warmup_steps,
        "weight_decay": config.weight_decay,
        "mix_ratio": config.mix_ratio,
        "model": {
            "vocab_size": model_config.vocab_size,
            "d_model": model_config.d_model,
            "n_heads": model_config.n_heads,
            "n_layers": model_config.n_layers,
            "d_ff": model_config.d_ff,
            "max_seq_len": model_config.max_seq_len,
            "param_count": param_count(model_config),
        },
        "pools": {name: len(pool) for name, pool in pools.items()},
        "schedule": None,
        "consumed": dict(pool_counts),
        "tasks": dict(task_counts),
        "resumed_from_step": start_step,
        "final_loss": metrics[-1]["loss_total"] if metrics else None,
        "wall_seconds": round(time.perf_counter() - t0, 3),
    }
    if config.variant is Variant.E_POST_MT:
        manifest["phase1_steps"] = phase1_steps(config)
    elif pools["pair"]:
        schedule = make_mix_schedule(
            len(pools["ntp"]), len(pools["pair"]), ratio=config.mix_ratio, seed=config.seed
        )
        manifest["schedule"] = {
            "epoch_size": schedule.epoch_size,
            "n_ntp_per_epoch": schedule.n_ntp_per_epoch,
        }

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_metrics_csv(os.path.join(out_dir, "metrics.csv"), metrics)
        with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")
        save_checkpoint(
            os.path.join(out_dir, "checkpoint.bin"), params, opt,
            step=config.steps, seed=config.seed,
        )
    return TrainResult(params, opt, config, model_config, metrics, manifest)


def mt_finetune(
    params: ModelParams,
    pairs,
    vocab: Vocab,
    steps: int = 300,
    batch_size: int = 16,
    lr: float = 1e-4,
    seed: int = 0,
    weight_decay: float = 0.01,
) -> list:
    """Translation fine-tune on pair data alone, in the evaluation layout.

    Mutates params in place with a fresh optimizer. Every regime gets this
    same pass before translation scoring, so regimes that never saw the
    source-then-target format are not penalized for the format itself.
    """
    if not pairs:
        raise ConfigError("mt_finetune needs at least one pair")
    config = TrainConfig(
        variant=Variant.CL, steps=steps, batch_size=batch_size,
        lr=lr, seed=seed, weight_decay=weight_decay,
    )
    directed = both_directions(pairs)
    pool = [
        build_cl_example(p, vocab, pair_id=f"ft/{p.src_lang}-{p.tgt_lang}/{i}")
        for i, p in enumerate(directed)
    ]
    stream = _single_stream(len(pool), seed, "mtft")
    feed = (
        [("ft", pool[next(stream)]) for _ in range(batch_size)]
        for _ in range(steps)
    )
    opt = init_adamw(params)
    metrics, _, _ = _run_loop(params, opt, feed, config)
    return metrics


def write_metrics_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(METRICS_HEADER + "\n")
        for r in rows:
            f.write(
                f"{r['step']},{r['lr']:.10g},{r['loss_total']:.10g},"
                f"{r['loss_ntp']:.10g},{r['loss_cl']:.10g}\n"
            )


# ---------------------------------------------------------------- checkpoints

_MAGIC = b"XLNG"
_VERSION = 1
_TAG_F32 = 0
_TAG_U64 = 1
_TAG_F64 = 2


@dataclass
class LoadedCheckpoint:
    params: ModelParams
    opt_state: AdamWState | None
    step: int
    seed: int


# entry wire layout: u32 name length, UTF-8 name, u32 rank, u64 dims...,
# u8 dtype tag, raw payload. Tags beyond 0 (f32) are extensions: 1 carries
# u64 run metadata (step, seed, optimizer t), 2 carries f64 arrays.


def _pack_array(name: str, arr: np.ndarray) -> bytes:
    tag = _TAG_F64 if arr.dtype == np.float64 else _TAG_F32
    wire = arr.astype("<f8" if tag == _TAG_F64 else "<f4", copy=False)
    name_b = name.encode("utf-8")
    head = struct.pack("<I", len(name_b)) + name_b + struct.pack("<I", arr.ndim)
    dims = b"".join(struct.pack("<Q", d) for d in arr.shape)
    return head + dims + struct.pack("<B", tag) + wire.tobytes(order="C")


def _pack_scalar(name: str, value: int) -> bytes:
    name_b = name.encode("utf-8")
    return (
        struct.pack("<I", len(name_b))
        + name_b
        + struct.pack("<IB", 0, _TAG_U64)
        + struct.pack("<Q", value)
    )


def save_checkpoint(path, params: ModelParams, opt_state: AdamWState | None = None,
                    step: int = 0, seed: int = 0) -> None:
    """Atomic single-file snapshot: config, weights, moments, step, seed.

    The example stream is keyed on (seed, step), so those two integers are
    the complete resumption state; no separate rng blob exists.
    """
    cfg = params.config
    entries = [_pack_array(name, p.data) for name, p in params.named_parameters()]
    if opt_state is not None:
        entries += [_pack_array(f"opt.m.{n}", a) for n, a in opt_state.m.items()]
        entries += [_pack_array(f"opt.v.{n}", a) for n, a in opt_state.v.items()]
        entries.append(_pack_scalar("meta.opt_t", opt_state.t))
    entries.append(_pack_scalar("meta.step", step))
    entries.append(_pack_scalar("meta.seed", seed))

    header = _MAGIC + struct.pack(
        "<8I",
        _VERSION,
        cfg.vocab_size,
        cfg.d_model,
        cfg.n_heads,
        cfg.n_layers,
        cfg.d_ff,
        cfg.max_seq_len,
        round(cfg.dropout_rate * 1_000_000),
    )
    blob = header + struct.pack("<I", len(entries)) + b"".join(entries)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(blob)
    os.replace(tmp, path)


class _Cursor:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.off = 0

    def take(self, n: int, what: str) -> bytes:
        if self.off + n > len(self.blob):
            raise CheckpointFormatError(self.off, f"truncated while reading {what}")
        out = self.blob[self.off : self.off + n]
        self.off += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def load_checkpoint(path) -> LoadedCheckpoint:
    with open(path, "rb") as f:
        blob = f.read()
    cur = _Cursor(blob)
    magic = cur.take(4, "magic")
    if magic != _MAGIC:
        raise CheckpointFormatError(0, f"bad magic {magic!r}, expected {_MAGIC!r}")
    fields = cur.unpack("<8I", "header")
    version = fields[0]
    if version != _VERSION:
        raise CheckpointFormatError(4, f"unsupported version {version}")
    config = ModelConfig(
        vocab_size=fields[1],
        d_model=fields[2],
        n_heads=fields[3],
        n_layers=fields[4],
        d_ff=fields[5],
        max_seq_len=fields[6],
        dropout_rate=fields[7] / 1_000_000,
    )
    (n_entries,) = cur.unpack("<I", "entry count")

    arrays: dict[str, np.ndarray] = {}
    scalars: dict[str, int] = {}
    for _ in range(n_entries):
        (name_len,) = cur.unpack("<I", "name length")
        name = cur.take(name_len, "name").decode("utf-8")
        (ndim,) = cur.unpack("<I", f"rank of {name}")
        dims = [cur.unpack("<Q", f"dim of {name}")[0] for _ in range(ndim)]
        (tag,) = cur.unpack("<B", f"tag of {name}")
        if tag == _TAG_U64:
            if dims:
                raise CheckpointFormatError(cur.off, f"{name}: u64 entries are rank 0")
            (scalars[name],) = cur.unpack("<Q", f"value of {name}")
        elif tag in (_TAG_F32, _TAG_F64):
            itemsize = 8 if tag == _TAG_F64 else 4
            count = int(np.prod(dims, dtype=np.int64)) if dims else 1
            raw = cur.take(itemsize * count, f"data of {name}")
            dt = "<f8" if tag == _TAG_F64 else "<f4"
            arrays[name] = np.frombuffer(raw, dtype=dt).copy().reshape(dims)
        else:
            raise CheckpointFormatError(cur.off - 1, f"unknown tag {tag} for {name}")
    if cur.off != len(blob):
        raise CheckpointFormatError(cur.off, f"{len(blob) - cur.off} trailing bytes")

    for key in ("meta.step", "meta.seed"):
        if key not in scalars:
            raise CheckpointFormatError(cur.off, f"missing {key}")

    dtype = arrays.get("token_embedding", np.zeros(0, np.float32)).dtype
    params = init_params(config, seed=0, dtype=dtype)
    expected = [name for name, _ in params.named_parameters()]
    for name, p in params.named_parameters():
        if name not in arrays:
            raise CheckpointFormatError(cur.off, f"missing parameter {name}")
        if arrays[name].shape != p.data.shape:
            raise CheckpointFormatError(
                cur.off, f"{name} has shape {arrays[name].shape}, expected {p.data.shape}"
            )
        p.data = arrays[name]
        p.grad = None

    opt_state = None
    if "meta.opt_t" in scalars or any(n.startswith("opt.") for n in arrays):
        m = {}
        v = {}
        for name in expected:
            for table, store in (("opt.m.", m), ("opt.v.", v)):
                key = table + name
                if key not in arrays:
                    raise CheckpointFormatError(cur.off, f"incomplete optimizer state: {key}")
                if arrays[key].shape != arrays[name].shape:
                    raise CheckpointFormatError(cur.off, f"{key} shape mismatch")
                store[name] = arrays[key]
        if "meta.opt_t" not in scalars:
            raise CheckpointFormatError(cur.off, "optimizer tensors without meta.opt_t")
        opt_state = AdamWState(m=m, v=v, t=int(scalars["meta.opt_t"]))

    return LoadedCheckpoint(
        params=params,
        opt_state=opt_state,
        step=int(scalars["meta.step"]),
        seed=int(scalars["meta.seed"]),
    )
