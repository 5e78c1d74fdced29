#!/usr/bin/env python3
"""Two training regimes on a synthetic language pair, side by side.

Trains the same tiny transformer twice on identical data: once with
next-word prediction alone, once with the translation-mapping objective
mixed in. Then compares held-out perplexity, the layer-alignment score,
and the per-layer cosine profiles the score summarizes. Single seed,
about three minutes on one core; demos/regime_comparison.sh runs the
multi-seed version with translation scoring through the CLI.
"""

import time

from xlinglab.corpus import gen_mono_corpus, gen_parallel_corpus, make_languages
from xlinglab.evaluate import compute_lac, layer_cosines, perplexity
from xlinglab.objectives import template_surfaces
from xlinglab.tokenizer import build_vocab
from xlinglab.model import ModelConfig
from xlinglab.trainer import TrainConfig, TrainData, Variant, train

STEPS = 3000
LAYERS = (1, 2, 3, 4, 5)


def main() -> None:
    family = make_languages(seed=11, size=40)
    alpha, beta, gamma = (family.specs[n] for n in ("Alpha", "Beta", "Gamma"))

    # same streams the CLI's `gen --seed 11` writes, inlined
    mono = (
        gen_mono_corpus(alpha, 2000, seed=12)
        + gen_mono_corpus(beta, 600, seed=13)
        + gen_mono_corpus(gamma, 200, seed=14)
    )
    pairs = (
        gen_parallel_corpus(alpha, beta, 2000, seed=15)
        + gen_parallel_corpus(alpha, gamma, 600, seed=16)
    )
    eval_alpha = gen_mono_corpus(alpha, 300, seed=10012)
    eval_pairs = gen_parallel_corpus(alpha, beta, 300, seed=10015)

    all_words = [spec.words() for spec in family.specs.values()]
    vocab = build_vocab(all_words + [template_surfaces()])
    data = TrainData(vocab=vocab, mono=mono, pairs=pairs)
    model_cfg = ModelConfig(vocab_size=vocab.size, d_model=32, n_heads=2,
                            n_layers=6, d_ff=64, max_seq_len=32)

    print(f"vocab {vocab.size} words, {len(mono)} mono + {len(pairs)} pair sentences")
    print(f"sample pair: {' '.join(eval_pairs[0].src)}  ->  {' '.join(eval_pairs[0].tgt)}")
    print()

    results = {}
    for variant in (Variant.NTP_ONLY, Variant.CL):
        cfg = TrainConfig(variant=variant, steps=STEPS, batch_size=32,
                          lr=1e-3, seed=1)
        t0 = time.perf_counter()
        run = train(cfg, data, model_config=model_cfg)
        wall = time.perf_counter() - t0

        ppl = perplexity(run.params, eval_alpha, vocab).ppl
        cos = layer_cosines(run.params, eval_pairs, vocab, LAYERS)
        lac = compute_lac(cos)
        results[variant.name] = (ppl, cos, lac)
        print(f"{variant.name:<9} trained {STEPS} steps in {wall:.0f}s, "
              f"final loss {run.metrics[-1]['loss_total']:.3f}")

    print()
    print(f"{'':<9} {'ppl(Alpha)':>10} {'align score':>12}   cosine by layer 1..5")
    for name, (ppl, cos, lac) in results.items():
        profile = " ".join(f"{c:.2f}" for c in cos)
        score = "inf" if lac.degenerate else f"{lac.lac:.2f}"
        print(f"{name:<9} {ppl:>10.2f} {score:>12}   [{profile}]")

    print()
    print("The mapping objective aligns every layer, the first included; the")
    print("score (mean over spread of the per-layer cosines) rewards that flat")
    print("profile. Next-word training alone leaves the first layer holding")
    print("language-specific token identity while its upper layers drift into")
    print("a narrow cone where any two sentences look alike, so its profile")
    print("splits and the score stays low.")


if __name__ == "__main__":
    main()
