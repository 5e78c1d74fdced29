#!/usr/bin/env python3
"""Per-layer alignment profile of one trained run.

Prints the mean cross-lingual cosine at every layer plus the aggregate
score, which is the quickest way to see WHERE two models differ: a
mapping-trained model is flat across depth, a next-word-only model
usually climbs from a poorly aligned bottom to an aligned top.
"""

import argparse
import pathlib

from xlinglab.corpus import read_corpus
from xlinglab.evaluate import compute_lac, layer_cosines
from xlinglab.tokenizer import load_vocab
from xlinglab.trainer import load_checkpoint


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("run", help="run directory containing checkpoint.bin")
    ap.add_argument("data", help="corpus directory from `xlinglab gen`")
    ap.add_argument("--pairs", default="pairs_alpha_beta_eval.tsv",
                    help="pair file inside the corpus directory")
    args = ap.parse_args()

    run = pathlib.Path(args.run)
    data = pathlib.Path(args.data)
    params = load_checkpoint(run / "checkpoint.bin").params
    vocab = load_vocab(data / "vocab.tsv")
    pairs = read_corpus(data / args.pairs)

    n_layers = params.config.n_layers
    cos = layer_cosines(params, pairs, vocab, tuple(range(1, n_layers + 1)))

    print(f"{run}  ({len(pairs)} pairs, {n_layers} layers)")
    for i, c in enumerate(cos, start=1):
        bar = "#" * round(40 * max(0.0, c))
        print(f"  layer {i}: {c:+.3f}  {bar}")

    subset = tuple(range(1, min(n_layers, 5) + 1))
    report = compute_lac(cos[: len(subset)])
    score = "inf (zero dispersion)" if report.degenerate else f"{report.lac:.2f}"
    print(f"  score over layers {list(subset)}: {score} "
          f"(mean {report.mean_cos:.3f}, std {report.std_cos:.3f})")


if __name__ == "__main__":
    main()
