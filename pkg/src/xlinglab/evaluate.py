"""Measurements: perplexity, layer-wise alignment (LAC), toy translation
scoring, and a ground-truth lexicon-induction probe.

Alignment math runs in float64 regardless of model dtype, and a sentence
embedding is the hidden state of the last real token with the sentence
encoded as BOS followed by its words (no EOS, so the final position is a
content word rather than a shared terminator).
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    ConfigError,
    ContractError,
    DegenerateEmbeddingError,
    EmptyInputError,
    LayerIndexError,
)
from .model import ModelParams, forward_batch, greedy_decode_batch
from .objectives import build_ntp_example, collate, masked_sequence_nll
from .tensor import no_grad
from .tokenizer import BOS_ID, EOS_ID, PAD_ID, SEP_ID, Vocab

DEFAULT_LAYER_SUBSET = (1, 2, 3, 4, 5)

LAC_HEADER = "model,pair,layer_policy,mean_cos,std_cos,lac,degenerate,pair_count"
MT_HEADER = "model,pair,bleu,exact_match,n"
PPL_HEADER = "model,lang,ppl,n_tokens"

_PRECISION_FLOOR = 1e-9


class Aggregation(enum.Enum):
    # pool per-layer cosines over the whole pair set, then one ratio
    MEAN_THEN_LAC = "mean_then_lac"
    # one ratio per pair, averaged afterwards; kept for comparison
    PER_PAIR_THEN_MEAN = "per_pair_then_mean"


@dataclass(frozen=True)
class LacConfig:
    layers: tuple = DEFAULT_LAYER_SUBSET
    aggregation: Aggregation = Aggregation.MEAN_THEN_LAC

    def __post_init__(self):
        if len(self.layers) < 2:
            raise ConfigError("alignment needs at least 2 layers to measure dispersion")
        if len(set(self.layers)) != len(self.layers):
            raise ConfigError(f"duplicate layer indices: {self.layers}")
        if any(l < 0 for l in self.layers):
            raise ConfigError(f"negative layer index in {self.layers}")


@dataclass
class LacReport:
    per_layer_cos: tuple
    mean_cos: float
    std_cos: float
    lac: float
    degenerate: bool
    pair_count: int = 0
    policy: str = Aggregation.MEAN_THEN_LAC.value
    layers: tuple = ()


@dataclass
class PplResult:
    ppl: float
    n_tokens: int
    nll: float


@dataclass
class MtResult:
    bleu: float
    exact_match: float
    n: int
    n_no_eos: int


# ---------------------------------------------------------------- embeddings


def cosine(u, v) -> float:
    """float64 cosine; bytewise-equal vectors short-circuit to exactly 1.0,
    so duplicated inputs produce exactly zero dispersion downstream."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise DegenerateEmbeddingError("zero-norm embedding in cosine")
    if np.array_equal(u, v):
        return 1.0
    return float(np.dot(u, v) / (nu * nv))


def _encode_rows(sentences, vocab: Vocab):
    rows = []
    for words in sentences:
        ids = vocab.encode(words)
        if not ids:
            raise EmptyInputError("cannot embed an empty sentence")
        rows.append([BOS_ID, *ids])
    return rows


def _embed_rows(params: ModelParams, rows, layers, batch_size: int = 128):
    """Last-real-token hidden states: {layer: [n_rows, d_model] float64}."""
    n_layers = params.config.n_layers
    for layer in layers:
        if not 0 <= layer <= n_layers:
            raise LayerIndexError(f"layer {layer} outside 0..{n_layers}")
    out = {layer: [] for layer in layers}
    with no_grad():
        for start in range(0, len(rows), batch_size):
            chunk = rows[start : start + batch_size]
            lens = np.array([len(r) for r in chunk], dtype=np.int64)
            width = int(lens.max())
            ids = np.full((len(chunk), width), PAD_ID, dtype=np.int64)
            for b, row in enumerate(chunk):
                ids[b, : len(row)] = row
            trace = forward_batch(params, ids)
            take = np.arange(len(chunk))
            for layer in layers:
                states = trace.hidden_states[layer].data
                out[layer].append(states[take, lens - 1, :].astype(np.float64))
    return {layer: np.concatenate(parts, axis=0) for layer, parts in out.items()}


def pairwise_layer_cosines(params: ModelParams, pairs, vocab: Vocab, layers) -> np.ndarray:
    """[n_pairs, n_layers] float64 matrix of per-pair per-layer cosines."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyInputError("alignment needs at least one pair")
    src_rows = _encode_rows((p.src for p in pairs), vocab)
    tgt_rows = _encode_rows((p.tgt for p in pairs), vocab)
    src_emb = _embed_rows(params, src_rows, layers)
    tgt_emb = _embed_rows(params, tgt_rows, layers)
    matrix = np.empty((len(pairs), len(layers)), dtype=np.float64)
    for j, layer in enumerate(layers):
        for i in range(len(pairs)):
            try:
                matrix[i, j] = cosine(src_emb[layer][i], tgt_emb[layer][i])
            except DegenerateEmbeddingError:
                raise DegenerateEmbeddingError(
                    f"zero-norm embedding at layer {layer} for pair {i} "
                    f"({' '.join(pairs[i].src)!r})"
                ) from None
    return matrix


def layer_cosines(params: ModelParams, pairs, vocab: Vocab, layers=DEFAULT_LAYER_SUBSET):
    """Mean-over-pairs cosine for each requested layer."""
    matrix = pairwise_layer_cosines(params, pairs, vocab, layers)
    return matrix.mean(axis=0)


# ---------------------------------------------------------------- LAC


def compute_lac(per_layer_cos) -> LacReport:
    """Mean over the layer subset divided by the population std of the same
    values. Zero dispersion is reported as degenerate with an infinite
    sentinel instead of an epsilon-inflated rank."""
    values = np.asarray(list(per_layer_cos), dtype=np.float64)
    if values.size < 2:
        raise ConfigError(f"need at least 2 per-layer values, got {values.size}")
    mean = float(values.mean())
    std = float(values.std())
    degenerate = std == 0.0
    lac = math.inf if degenerate else mean / std
    return LacReport(
        per_layer_cos=tuple(float(v) for v in values),
        mean_cos=mean,
        std_cos=std,
        lac=lac,
        degenerate=degenerate,
    )


def lac_report(params: ModelParams, pairs, vocab: Vocab, config: LacConfig = LacConfig()) -> LacReport:
    pairs = list(pairs)
    matrix = pairwise_layer_cosines(params, pairs, vocab, config.layers)
    if config.aggregation is Aggregation.MEAN_THEN_LAC:
        report = compute_lac(matrix.mean(axis=0))
    else:
        per_pair = [compute_lac(row) for row in matrix]
        degenerate = any(r.degenerate for r in per_pair)
        report = LacReport(
            per_layer_cos=tuple(float(v) for v in matrix.mean(axis=0)),
            mean_cos=float(matrix.mean()),
            std_cos=float(np.mean([r.std_cos for r in per_pair])),
            lac=math.inf if degenerate else float(np.mean([r.lac for r in per_pair])),
            degenerate=degenerate,
        )
    return replace(
        report,
        pair_count=len(pairs),
        policy=config.aggregation.value,
        layers=tuple(config.layers),
    )


# ---------------------------------------------------------------- perplexity


def perplexity(params: ModelParams, records, vocab: Vocab, lang: str | None = None,
               batch_size: int = 128) -> PplResult:
    """exp of the mean per-token NLL over NTP-layout sequences.

    records are monolingual; pass lang to restrict a mixed corpus.
    """
    texts = [r.words for r in records if lang is None or r.lang == lang]
    if not texts:
        raise EmptyInputError(f"no sentences to score (lang={lang})")
    examples = [build_ntp_example(t, vocab) for t in texts]
    total_nll = 0.0
    total_tokens = 0
    with no_grad():
        for start in range(0, len(examples), batch_size):
            batch = collate(examples[start : start + batch_size])
            loss = masked_sequence_nll(params, batch.ids, batch.labels, batch.pred_mask)
            total_nll += float(loss.data) * batch.n_supervised
            total_tokens += batch.n_supervised
    nll = total_nll / total_tokens
    return PplResult(ppl=math.exp(nll), n_tokens=total_tokens, nll=nll)


# ---------------------------------------------------------------- BLEU


def _as_words(sentence):
    return sentence.split() if isinstance(sentence, str) else list(sentence)


def _ngrams(words, n):
    return [tuple(words[i : i + n]) for i in range(len(words) - n + 1)]


def bleu(hypotheses, references) -> float:
    """Corpus BLEU-4 on a 0..1 scale: geometric mean of clipped 1..4-gram
    precisions times the brevity penalty, zero precisions floored at 1e-9."""
    hypotheses = [_as_words(h) for h in hypotheses]
    references = [_as_words(r) for r in references]
    if len(hypotheses) != len(references):
        raise ContractError(
            f"{len(hypotheses)} hypotheses vs {len(references)} references"
        )
    if not hypotheses:
        raise EmptyInputError("bleu needs at least one sentence pair")
    clipped = [0] * 4
    totals = [0] * 4
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, 5):
            counts = Counter(_ngrams(hyp, n))
            ref_counts = Counter(_ngrams(ref, n))
            totals[n - 1] += sum(counts.values())
            clipped[n - 1] += sum(min(c, ref_counts[g]) for g, c in counts.items())
    if hyp_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(4):
        p = clipped[n] / totals[n] if totals[n] else 0.0
        log_sum += 0.25 * math.log(max(p, _PRECISION_FLOOR))
    brevity = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return brevity * math.exp(log_sum)


# ---------------------------------------------------------------- translation


def translate_and_score(params: ModelParams, pairs, vocab: Vocab,
                        max_new: int | None = None, batch_size: int = 64) -> MtResult:
    """Greedy-decode each source from BOS src SEP and score against the target.

    A decode that never emits EOS within the budget counts as wrong for
    exact match (its words still enter BLEU) and is tallied in n_no_eos.
    """
    pairs = list(pairs)
    if not pairs:
        raise EmptyInputError("nothing to translate")
    prefixes = [[BOS_ID, *vocab.encode(p.src), SEP_ID] for p in pairs]
    longest_tgt = max(len(p.tgt) for p in pairs)
    cap = params.config.max_seq_len - max(len(p) for p in prefixes)
    budget = min(longest_tgt + 5, cap) if max_new is None else max_new

    hyps = []
    exact = 0
    no_eos = 0
    for start in range(0, len(pairs), batch_size):
        chunk_pairs = pairs[start : start + batch_size]
        chunk_prefix = prefixes[start : start + batch_size]
        outs = greedy_decode_batch(params, chunk_prefix, max_new=budget)
        for pair, prefix, out in zip(chunk_pairs, chunk_prefix, outs):
            emitted = list(out[len(prefix) :])
            ended = bool(emitted) and emitted[-1] == EOS_ID
            if ended:
                emitted = emitted[:-1]
            else:
                no_eos += 1
            words = [vocab.surface_of[i] for i in emitted]
            hyps.append(words)
            exact += int(ended and words == list(pair.tgt))
    score = bleu(hyps, [p.tgt for p in pairs])
    return MtResult(
        bleu=score, exact_match=exact / len(pairs), n=len(pairs), n_no_eos=no_eos
    )


# ---------------------------------------------------------------- lexicon


def lexicon_induction(params: ModelParams, spec_a, spec_b, vocab: Vocab,
                      layer: int = 3) -> float:
    """Nearest-cosine word translation accuracy against the generating map.

    Each word is embedded as the one-word sentence BOS w; for every word of
    language A the closest language-B embedding is proposed and checked
    against the ground-truth lexicon correspondence.
    """
    a_words = spec_a.words()
    b_words = spec_b.words()
    emb_a = _embed_rows(params, _encode_rows([[w] for w in a_words], vocab), [layer])[layer]
    emb_b = _embed_rows(params, _encode_rows([[w] for w in b_words], vocab), [layer])[layer]

    def normalize(mat, words):
        norms = np.linalg.norm(mat, axis=1, keepdims=True)
        bad = np.nonzero(norms[:, 0] == 0.0)[0]
        if bad.size:
            raise DegenerateEmbeddingError(f"zero-norm embedding for {words[bad[0]]!r}")
        return mat / norms

    sims = normalize(emb_a, a_words) @ normalize(emb_b, b_words).T
    predicted = np.argmax(sims, axis=1)
    inverse_a = spec_a.inverse_map()
    correct = 0
    for k, word in enumerate(a_words):
        alpha_word = inverse_a[word]
        correct += int(b_words[int(predicted[k])] == spec_b.lexicon_map[alpha_word])
    return correct / len(a_words)


# ---------------------------------------------------------------- CSV output


def _fmt(value: float) -> str:
    return f"{value:.10g}"


def write_lac_csv(path, rows) -> None:
    """rows: (model, pair, LacReport). lac prints as inf when degenerate."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(LAC_HEADER + "\n")
        for model, pair, rep in rows:
            f.write(
                f"{model},{pair},{rep.policy}:{'+'.join(str(l) for l in rep.layers)},"
                f"{_fmt(rep.mean_cos)},{_fmt(rep.std_cos)},{_fmt(rep.lac)},"
                f"{'true' if rep.degenerate else 'false'},{rep.pair_count}\n"
            )


def write_mt_csv(path, rows) -> None:
    """rows: (model, pair, MtResult). BLEU is scaled to 0..100 in the file;
    exact_match stays a 0..1 rate."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(MT_HEADER + "\n")
        for model, pair, res in rows:
            f.write(
                f"{model},{pair},{_fmt(res.bleu * 100.0)},"
                f"{_fmt(res.exact_match)},{res.n}\n"
            )


def write_ppl_csv(path, rows) -> None:
    """rows: (model, lang, PplResult)."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(PPL_HEADER + "\n")
        for model, lang, res in rows:
            f.write(f"{model},{lang},{_fmt(res.ppl)},{res.n_tokens}\n")
