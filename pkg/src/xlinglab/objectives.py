"""Training example builders and the masked NTP / cross-lingual losses.

Sequence layouts (B=BOS, S=SEP, E=EOS; mask printed under the ids):

    NTP      B w1 .. wn E          0 1 .. 1 1
    BI_NTP   B src S tgt E         0 1 .. 1 1      (everything after BOS)
    CL       B src S tgt E         0 0..0 1..1 1   (target span and EOS only)
    CLI      B prompt src S tgt E  prompt unsupervised, otherwise like CL

A position's mask bit says whether the token AT that position is predicted.
The model's logits at position t-1 score position t, so the loss helpers
shift internally; callers never deal with the off-by-one.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass

import numpy as np

from .corpus import LANG_NAMES, SentencePair
from .errors import ConfigError, ContractError, EmptyInputError
from .model import ModelParams, forward_batch
from .tensor import Tensor, add, reshape, softmax_cross_entropy
from .tokenizer import BOS_ID, EOS_ID, PAD_ID, SEP_ID, Segment, TokenSequence, Vocab

DEFAULT_CLI_TEMPLATE = "translate the following {src} to {tgt} :"


class Task(enum.Enum):
    NTP = "NTP"
    CL = "CL"
    BI_NTP = "BI_NTP"
    CLI = "CLI"


_NTP_TASKS = (Task.NTP, Task.BI_NTP)
_CL_TASKS = (Task.CL, Task.CLI)


@dataclass
class TrainingExample:
    seq: TokenSequence
    task: Task
    pair_id: str | None = None


def template_surfaces(template: str = DEFAULT_CLI_TEMPLATE, lang_names=LANG_NAMES):
    """Every surface the instruction prompt can produce over the language names.

    The vocabulary is closed, so these words must be registered at build time
    for the CLI variant to encode at all.
    """
    out = set()
    for src in lang_names:
        for tgt in lang_names:
            if src != tgt:
                out.update(template.format(src=src, tgt=tgt).split())
    return sorted(out)


def build_ntp_example(text, vocab: Vocab, pair_id: str | None = None) -> TrainingExample:
    """BOS tokens EOS, supervising every token and the EOS."""
    tokens = vocab.encode(text)
    if not tokens:
        raise EmptyInputError("ntp example needs at least one token")
    ids = [BOS_ID, *tokens, EOS_ID]
    mask = [0, *[1] * len(tokens), 1]
    seg = [Segment.SPECIAL, *[Segment.MONO] * len(tokens), Segment.SPECIAL]
    return TrainingExample(TokenSequence(ids, mask, seg), Task.NTP, pair_id)


def _encode_pair(pair: SentencePair, vocab: Vocab):
    src = vocab.encode(pair.src)
    tgt = vocab.encode(pair.tgt)
    if not src:
        raise EmptyInputError("pair example needs a nonempty source")
    if not tgt:
        raise EmptyInputError("pair example needs a nonempty target")
    return src, tgt


def build_cl_example(pair: SentencePair, vocab: Vocab, pair_id: str | None = None) -> TrainingExample:
    """BOS src SEP tgt EOS with loss restricted to the target span and EOS.

    The source tokens condition the prediction but are never predicted
    themselves; no instruction text appears anywhere in the sequence.
    """
    src, tgt = _encode_pair(pair, vocab)
    ids = [BOS_ID, *src, SEP_ID, *tgt, EOS_ID]
    mask = [0, *[0] * len(src), 0, *[1] * len(tgt), 1]
    seg = [
        Segment.SPECIAL,
        *[Segment.SRC] * len(src),
        Segment.SPECIAL,
        *[Segment.TGT] * len(tgt),
        Segment.SPECIAL,
    ]
    return TrainingExample(TokenSequence(ids, mask, seg), Task.CL, pair_id)


def build_bi_ntp_example(pair: SentencePair, vocab: Vocab, pair_id: str | None = None) -> TrainingExample:
    """Same concatenation as the cross-lingual layout but trained as plain NTP:
    source, separator, target, and EOS are all supervised."""
    src, tgt = _encode_pair(pair, vocab)
    ids = [BOS_ID, *src, SEP_ID, *tgt, EOS_ID]
    mask = [0, *[1] * (len(src) + 1 + len(tgt) + 1)]
    seg = [
        Segment.SPECIAL,
        *[Segment.SRC] * len(src),
        Segment.SPECIAL,
        *[Segment.TGT] * len(tgt),
        Segment.SPECIAL,
    ]
    return TrainingExample(TokenSequence(ids, mask, seg), Task.BI_NTP, pair_id)


def build_cli_example(
    pair: SentencePair,
    vocab: Vocab,
    template: str = DEFAULT_CLI_TEMPLATE,
    pair_id: str | None = None,
) -> TrainingExample:
    """Instruction-prompted variant: BOS prompt src SEP tgt EOS.

    Prompt and source are context only; the supervised set is identical to
    the plain cross-lingual layout (target span plus EOS).
    """
    prompt_text = template.format(src=pair.src_lang, tgt=pair.tgt_lang)
    prompt = vocab.encode(prompt_text)
    src, tgt = _encode_pair(pair, vocab)
    ids = [BOS_ID, *prompt, *src, SEP_ID, *tgt, EOS_ID]
    mask = [0, *[0] * (len(prompt) + len(src) + 1), *[1] * (len(tgt) + 1)]
    seg = [
        Segment.SPECIAL,
        *[Segment.PROMPT] * len(prompt),
        *[Segment.SRC] * len(src),
        Segment.SPECIAL,
        *[Segment.TGT] * len(tgt),
        Segment.SPECIAL,
    ]
    return TrainingExample(TokenSequence(ids, mask, seg), Task.CLI, pair_id)


@dataclass
class Batch:
    """Right-padded id matrix with the prediction-aligned labels and mask.

    labels[b, t] holds the token that the logits AT position t must predict,
    i.e. ids[b, t+1]; the final column is a dummy with mask 0. pred_mask is
    therefore the example loss_mask shifted left by one.
    """

    ids: np.ndarray
    labels: np.ndarray
    pred_mask: np.ndarray
    n_supervised: int


def collate(examples) -> Batch:
    examples = list(examples)
    if not examples:
        raise EmptyInputError("cannot collate an empty batch")
    n = len(examples)
    width = max(len(ex.seq) for ex in examples)
    ids = np.full((n, width), PAD_ID, dtype=np.int64)
    labels = np.zeros((n, width), dtype=np.int64)
    pred = np.zeros((n, width), dtype=np.float64)
    for b, ex in enumerate(examples):
        k = len(ex.seq)
        ids[b, :k] = ex.seq.ids
        labels[b, : k - 1] = ex.seq.ids[1:]
        pred[b, : k - 1] = ex.seq.loss_mask[1:]
    return Batch(ids, labels, pred, int(pred.sum()))


def masked_sequence_nll(params: ModelParams, ids, labels, pred_mask) -> Tensor:
    """Mean NLL over the masked predictions of a padded id batch.

    Exposes labels/pred_mask directly so callers can verify that edits to
    masked labels cannot move the loss.
    """
    trace = forward_batch(params, ids)
    b, t, v = trace.logits.shape
    flat = reshape(trace.logits, (b * t, v))
    return softmax_cross_entropy(
        flat,
        np.asarray(labels).reshape(-1),
        np.asarray(pred_mask).reshape(-1),
    )


def _batch_loss(params: ModelParams, examples, allowed, label: str) -> Tensor:
    examples = list(examples)
    if not examples:
        raise EmptyInputError(f"{label} needs a nonempty batch")
    for ex in examples:
        if ex.task not in allowed:
            raise ContractError(f"{label} got a {ex.task.value} example")
    batch = collate(examples)
    return masked_sequence_nll(params, batch.ids, batch.labels, batch.pred_mask)


def ntp_loss(params: ModelParams, examples) -> Tensor:
    """Mean next-token NLL over the supervised positions of the batch."""
    return _batch_loss(params, examples, _NTP_TASKS, "ntp_loss")


def cl_loss(params: ModelParams, examples) -> Tensor:
    """Mean target-span NLL for source-conditioned pair examples."""
    return _batch_loss(params, examples, _CL_TASKS, "cl_loss")


def joint_loss(params: ModelParams, examples):
    """(total, ntp_part, cl_part) for a batch mixing both objective kinds.

    total is the unweighted sum of the two per-task means; a task with no
    examples contributes exactly zero. The floats mirror total's dtype, so
    total.data == ntp_part + cl_part holds bitwise in that dtype.
    """
    examples = list(examples)
    if not examples:
        raise EmptyInputError("joint_loss needs a nonempty batch")
    ntp_examples = [ex for ex in examples if ex.task in _NTP_TASKS]
    cl_examples = [ex for ex in examples if ex.task in _CL_TASKS]
    total = None
    ntp_part = 0.0
    cl_part = 0.0
    if ntp_examples:
        term = ntp_loss(params, ntp_examples)
        ntp_part = float(term.data)
        total = term
    if cl_examples:
        term = cl_loss(params, cl_examples)
        cl_part = float(term.data)
        total = term if total is None else add(total, term)
    return total, ntp_part, cl_part


@dataclass(frozen=True)
class MixSchedule:
    """Deterministic per-epoch interleave of two example pools.

    One epoch has n_ntp_pool + n_cl_pool slots; n_ntp_per_epoch of them draw
    from the NTP-side pool and the rest from the CL-side pool. Counts never
    change across epochs, only the order and the pool indices do.
    """

    ratio_ntp: float
    n_ntp_pool: int
    n_cl_pool: int
    seed: int

    @property
    def epoch_size(self) -> int:
        return self.n_ntp_pool + self.n_cl_pool

    @property
    def n_ntp_per_epoch(self) -> int:
        return round(self.ratio_ntp * self.epoch_size)

    def epoch_slots(self, epoch_index: int):
        """Slot list for one epoch: ("ntp"|"cl", pool_index) tuples.

        Pool indices cycle through whole shuffled passes, so within an epoch
        no pool item is drawn twice before every item was drawn once.
        """
        rng = random.Random(f"mix/{self.seed}/{epoch_index}")
        n_ntp = self.n_ntp_per_epoch
        kinds = ["ntp"] * n_ntp + ["cl"] * (self.epoch_size - n_ntp)
        rng.shuffle(kinds)
        ntp_order = _cycled_order(self.n_ntp_pool, n_ntp, rng)
        cl_order = _cycled_order(self.n_cl_pool, self.epoch_size - n_ntp, rng)
        ntp_iter = iter(ntp_order)
        cl_iter = iter(cl_order)
        return [
            (kind, next(ntp_iter) if kind == "ntp" else next(cl_iter))
            for kind in kinds
        ]


def _cycled_order(pool_size: int, need: int, rng: random.Random):
    order: list[int] = []
    while len(order) < need:
        chunk = list(range(pool_size))
        rng.shuffle(chunk)
        order.extend(chunk)
    return order[:need]


def make_mix_schedule(n_ntp_pool: int, n_cl_pool: int, ratio: float = 0.527, seed: int = 0) -> MixSchedule:
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"mix ratio must lie strictly inside (0, 1), got {ratio}")
    if n_ntp_pool < 1 or n_cl_pool < 1:
        raise ConfigError(
            f"both pools must be nonempty, got {n_ntp_pool}/{n_cl_pool}"
        )
    return MixSchedule(ratio_ntp=ratio, n_ntp_pool=n_ntp_pool, n_cl_pool=n_cl_pool, seed=seed)
