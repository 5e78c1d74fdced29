"""Command-line surface: gen / train / eval / compare.

Every run is reproducible from its flags alone; the merged flag+file
configuration lands in the run manifest. Exit codes: 0 success, 2 usage,
3 data or format error, 4 training divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

from .corpus import (
    gen_mono_corpus,
    gen_parallel_corpus,
    load_languages,
    make_languages,
    read_corpus,
    read_mono_corpus,
    save_languages,
    write_corpus,
    write_mono_corpus,
)
from .errors import (
    ConfigError,
    ContractError,
    DivergenceError,
    XlingError,
)
from .evaluate import (
    DEFAULT_LAYER_SUBSET,
    LacConfig,
    lac_report,
    perplexity,
    translate_and_score,
    write_lac_csv,
    write_mt_csv,
    write_ppl_csv,
)
from .model import ModelConfig
from .objectives import template_surfaces
from .tokenizer import build_vocab, load_vocab, save_vocab
from .trainer import (
    TrainConfig,
    TrainData,
    Variant,
    load_checkpoint,
    mt_finetune,
    save_checkpoint,
    train,
)

_LANG_SLUGS = {"Alpha": "alpha", "Beta": "beta", "Gamma": "gamma"}

# corpus-directory layout shared by gen (writer) and train/eval (readers)
_VOCAB_FILE = "vocab.tsv"
_LANGUAGES_FILE = "languages.json"
_FT_PAIRS_FILE = "pairs_ft.tsv"


def _mono_file(lang: str, split: str) -> str:
    suffix = "" if split == "train" else "_eval"
    return f"mono_{_LANG_SLUGS[lang]}{suffix}.tsv"


def _pairs_file(a: str, b: str, split: str) -> str:
    suffix = "" if split == "train" else "_eval"
    return f"pairs_{_LANG_SLUGS[a]}_{_LANG_SLUGS[b]}{suffix}.tsv"


class _UsageError(Exception):
    pass


# ---------------------------------------------------------------- config file


def _load_config_file(path, allowed: set) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise _UsageError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise _UsageError(
            f"unknown config keys in {path}: {', '.join(unknown)} "
            f"(allowed: {', '.join(sorted(allowed))})"
        )
    return cfg


def _pick(args, cfg: dict, key: str, default):
    """Flag beats config file beats default; flags parse with default None
    so an unset flag is distinguishable from an explicit value."""
    flag = getattr(args, key)
    if flag is not None:
        return flag
    if key in cfg:
        return cfg[key]
    return default


def _parse_seeds(args, cfg: dict) -> list:
    if args.seeds is not None and args.seed is not None:
        raise _UsageError("give either --seed or --seeds, not both")
    if args.seeds is not None:
        raw = args.seeds
    elif args.seed is not None:
        return [args.seed]
    elif "seeds" in cfg:
        raw = cfg["seeds"]
    elif "seed" in cfg:
        return [int(cfg["seed"])]
    else:
        return [0]
    if isinstance(raw, str):
        parts = [p for p in raw.split(",") if p.strip()]
    else:
        parts = list(raw)
    try:
        seeds = [int(p) for p in parts]
    except ValueError as exc:
        raise _UsageError(f"bad seed list {raw!r}: {exc}") from None
    if not seeds:
        raise _UsageError("empty seed list")
    return seeds


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


# ---------------------------------------------------------------- gen

_GEN_KEYS = {
    "seed", "size", "mono_alpha", "mono_beta", "mono_gamma", "eval_n",
    "pairs", "pairs_gamma", "eval_pairs", "ft_pairs",
}


def cmd_gen(args) -> int:
    cfg = _load_config_file(args.config, _GEN_KEYS) if args.config else {}
    seed = int(_pick(args, cfg, "seed", 0))
    size = int(_pick(args, cfg, "size", 170))
    counts = {
        "mono_alpha": int(_pick(args, cfg, "mono_alpha", 2000)),
        "mono_beta": int(_pick(args, cfg, "mono_beta", 600)),
        "mono_gamma": int(_pick(args, cfg, "mono_gamma", 200)),
        "eval_n": int(_pick(args, cfg, "eval_n", 300)),
        "pairs": int(_pick(args, cfg, "pairs", 2000)),
        "pairs_gamma": int(_pick(args, cfg, "pairs_gamma", 600)),
        "eval_pairs": int(_pick(args, cfg, "eval_pairs", 300)),
        "ft_pairs": int(_pick(args, cfg, "ft_pairs", 1000)),
    }

    out = args.out
    if os.path.isdir(out) and os.listdir(out) and not args.force:
        raise FileExistsError(
            f"output dir {out} is not empty; pass --force to overwrite"
        )
    os.makedirs(out, exist_ok=True)

    family = make_languages(seed=seed, size=size)
    alpha, beta, gamma = (family.specs[n] for n in ("Alpha", "Beta", "Gamma"))
    vocab = build_vocab(
        [[spec.words() for spec in family.specs.values()], [template_surfaces()]]
    )

    save_languages(os.path.join(out, _LANGUAGES_FILE), family)
    save_vocab(os.path.join(out, _VOCAB_FILE), vocab)

    # each file draws from its own offset so corpora are independent streams
    mono_specs = {"Alpha": alpha, "Beta": beta, "Gamma": gamma}
    for k, (lang, n_key) in enumerate(
        [("Alpha", "mono_alpha"), ("Beta", "mono_beta"), ("Gamma", "mono_gamma")]
    ):
        spec = mono_specs[lang]
        write_mono_corpus(
            os.path.join(out, _mono_file(lang, "train")),
            gen_mono_corpus(spec, n=counts[n_key], seed=seed + 1 + k),
        )
        write_mono_corpus(
            os.path.join(out, _mono_file(lang, "eval")),
            gen_mono_corpus(spec, n=counts["eval_n"], seed=seed + 10001 + k),
        )
    write_corpus(
        os.path.join(out, _pairs_file("Alpha", "Beta", "train")),
        gen_parallel_corpus(alpha, beta, n=counts["pairs"], seed=seed + 4),
    )
    write_corpus(
        os.path.join(out, _pairs_file("Alpha", "Gamma", "train")),
        gen_parallel_corpus(alpha, gamma, n=counts["pairs_gamma"], seed=seed + 5),
    )
    write_corpus(
        os.path.join(out, _pairs_file("Alpha", "Beta", "eval")),
        gen_parallel_corpus(alpha, beta, n=counts["eval_pairs"], seed=seed + 10004),
    )
    write_corpus(
        os.path.join(out, _pairs_file("Alpha", "Gamma", "eval")),
        gen_parallel_corpus(alpha, gamma, n=counts["eval_pairs"], seed=seed + 10005),
    )
    write_corpus(
        os.path.join(out, _FT_PAIRS_FILE),
        gen_parallel_corpus(alpha, beta, n=counts["ft_pairs"], seed=seed + 20000),
    )

    files = {}
    for name in sorted(os.listdir(out)):
        if name == "manifest.json":
            continue
        path = os.path.join(out, name)
        files[name] = {"bytes": os.path.getsize(path), "sha256": _sha256(path)}
    _write_json(
        os.path.join(out, "manifest.json"),
        {
            "command": "gen",
            "effective_config": {"seed": seed, "size": size, **counts},
            "files": files,
            "vocab_size": vocab.size,
        },
    )
    print(f"wrote {len(files)} corpus files to {out}")
    return 0


# ---------------------------------------------------------------- train

_TRAIN_KEYS = {
    "variant", "seed", "seeds", "steps", "batch_size", "lr", "mix_ratio",
    "weight_decay", "warmup_ratio", "d_model", "n_heads", "n_layers",
    "d_ff", "max_seq_len", "divergence_threshold", "divergence_patience",
}


def _resolve_variant(name: str) -> Variant:
    canon = name.strip().lower()
    aliases = {"ntp": "ntp_only"}
    canon = aliases.get(canon, canon)
    for variant in Variant:
        if variant.value.lower() == canon:
            return variant
    valid = ", ".join(["ntp"] + [v.value.lower() for v in Variant])
    raise _UsageError(f"unknown variant {name!r}; valid names: {valid}")


def _load_train_data(data_dir) -> TrainData:
    vocab = load_vocab(os.path.join(data_dir, _VOCAB_FILE))
    mono = []
    for lang in _LANG_SLUGS:
        path = os.path.join(data_dir, _mono_file(lang, "train"))
        if os.path.exists(path):
            mono.extend(read_mono_corpus(path))
    pairs = []
    for a, b in (("Alpha", "Beta"), ("Alpha", "Gamma")):
        path = os.path.join(data_dir, _pairs_file(a, b, "train"))
        if os.path.exists(path):
            pairs.extend(read_corpus(path))
    return TrainData(vocab=vocab, mono=mono, pairs=pairs)


def cmd_train(args) -> int:
    cfg = _load_config_file(args.config, _TRAIN_KEYS) if args.config else {}
    variant_name = _pick(args, cfg, "variant", None)
    if variant_name is None:
        raise _UsageError("--variant is required (or 'variant' in --config)")
    variant = _resolve_variant(str(variant_name))
    seeds = _parse_seeds(args, cfg)

    data = _load_train_data(args.data)
    model_config = ModelConfig(
        vocab_size=data.vocab.size,
        d_model=int(_pick(args, cfg, "d_model", 64)),
        n_heads=int(_pick(args, cfg, "n_heads", 4)),
        n_layers=int(_pick(args, cfg, "n_layers", 6)),
        d_ff=int(_pick(args, cfg, "d_ff", 256)),
        max_seq_len=int(_pick(args, cfg, "max_seq_len", 64)),
    )
    base = dict(
        variant=variant,
        steps=int(_pick(args, cfg, "steps", 3000)),
        batch_size=int(_pick(args, cfg, "batch_size", 16)),
        lr=float(_pick(args, cfg, "lr", 1e-4)),
        mix_ratio=float(_pick(args, cfg, "mix_ratio", 0.527)),
        weight_decay=float(_pick(args, cfg, "weight_decay", 0.01)),
        warmup_ratio=float(_pick(args, cfg, "warmup_ratio", 0.01)),
        divergence_threshold=float(_pick(args, cfg, "divergence_threshold", 20.0)),
        divergence_patience=int(_pick(args, cfg, "divergence_patience", 100)),
    )

    for seed in seeds:
        run_dir = os.path.join(args.out, variant.value.lower(), f"seed{seed}")
        os.makedirs(run_dir, exist_ok=True)
        result = train(
            TrainConfig(seed=seed, **base), data,
            model_config=model_config, out_dir=run_dir,
        )
        manifest_path = os.path.join(run_dir, "manifest.json")
        with open(manifest_path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
        manifest["effective_config"] = {
            "data": args.data,
            "variant": variant.value,
            "seed": seed,
            "d_model": model_config.d_model,
            "n_heads": model_config.n_heads,
            "n_layers": model_config.n_layers,
            "d_ff": model_config.d_ff,
            "max_seq_len": model_config.max_seq_len,
            **{k: v for k, v in base.items() if k != "variant"},
        }
        _write_json(manifest_path, manifest)
        print(
            f"{variant.value.lower()} seed {seed}: final loss "
            f"{manifest['final_loss']:.4f} -> {run_dir}"
        )
    return 0


# ---------------------------------------------------------------- eval

_EVAL_KEYS = {"seed", "seeds", "layers", "mt_ft_steps", "mt_ft_lr"}


def _seed_dirs(run) -> list:
    if os.path.exists(os.path.join(run, "checkpoint.bin")):
        return [run]
    if not os.path.isdir(run):
        raise FileNotFoundError(f"run dir {run} does not exist")
    dirs = sorted(
        os.path.join(run, d)
        for d in os.listdir(run)
        if d.startswith("seed")
        and os.path.exists(os.path.join(run, d, "checkpoint.bin"))
    )
    if not dirs:
        raise FileNotFoundError(f"no checkpoints under {run}")
    return dirs


def _run_identity(seed_dir) -> tuple:
    path = os.path.join(seed_dir, "manifest.json")
    if os.path.exists(path):
        with open(path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
        return str(manifest["variant"]), int(manifest["seed"])
    return os.path.basename(os.path.dirname(seed_dir.rstrip("/"))), -1


def _auto_layers(n_layers: int):
    if n_layers >= max(DEFAULT_LAYER_SUBSET):
        return DEFAULT_LAYER_SUBSET
    return tuple(range(1, n_layers + 1))


def cmd_eval(args) -> int:
    cfg = _load_config_file(args.config, _EVAL_KEYS) if args.config else {}
    vocab = load_vocab(os.path.join(args.data, _VOCAB_FILE))
    seed_filter = None
    if args.seeds is not None or args.seed is not None or {"seed", "seeds"} & set(cfg):
        seed_filter = set(_parse_seeds(args, cfg))

    if args.pairs:
        pair_files = [p for p in args.pairs.split(",") if p]
    else:
        pair_files = [
            os.path.join(args.data, _pairs_file(a, b, "eval"))
            for a, b in (("Alpha", "Beta"), ("Alpha", "Gamma"))
            if os.path.exists(os.path.join(args.data, _pairs_file(a, b, "eval")))
        ]
    pair_sets = []
    for path in pair_files:
        pairs = read_corpus(path)
        pair_sets.append((f"{pairs[0].src_lang}-{pairs[0].tgt_lang}", pairs))

    mono_sets = []
    for lang in _LANG_SLUGS:
        path = os.path.join(args.data, _mono_file(lang, "eval"))
        if os.path.exists(path):
            mono_sets.append((lang, read_mono_corpus(path)))

    ft_path = os.path.join(args.data, _FT_PAIRS_FILE)
    mt_ft_steps = int(_pick(args, cfg, "mt_ft_steps", 300))
    mt_ft_lr = float(_pick(args, cfg, "mt_ft_lr", 1e-4))

    for seed_dir in _seed_dirs(args.run):
        variant, seed = _run_identity(seed_dir)
        if seed_filter is not None and seed not in seed_filter:
            continue
        name = f"{variant}-s{seed}"
        loaded = load_checkpoint(os.path.join(seed_dir, "checkpoint.bin"))
        if loaded.params.config.vocab_size != vocab.size:
            raise ContractError(
                f"checkpoint vocab size {loaded.params.config.vocab_size} "
                f"does not match data vocab size {vocab.size}"
            )
        layers_flag = _pick(args, cfg, "layers", "auto")
        if layers_flag == "auto":
            layers = _auto_layers(loaded.params.config.n_layers)
        else:
            layers = tuple(int(p) for p in str(layers_flag).split(",") if p)
        lac_cfg = LacConfig(layers=layers)

        write_ppl_csv(
            os.path.join(seed_dir, "ppl.csv"),
            [
                (name, lang, perplexity(loaded.params, records, vocab))
                for lang, records in mono_sets
            ],
        )
        write_lac_csv(
            os.path.join(seed_dir, "lac.csv"),
            [
                (name, label, lac_report(loaded.params, pairs, vocab, lac_cfg))
                for label, pairs in pair_sets
            ],
        )

        # translation is scored after a uniform pair fine-tune so regimes
        # that never saw the decode layout are not penalized for format
        mtft_path = os.path.join(seed_dir, "checkpoint_mtft.bin")
        if args.skip_mt_ft:
            mt_params = loaded.params
        elif os.path.exists(mtft_path):
            mt_params = load_checkpoint(mtft_path).params
        else:
            if not os.path.exists(ft_path):
                raise FileNotFoundError(
                    f"fine-tune pair file {ft_path} missing; "
                    "regenerate data or pass --skip-mt-ft"
                )
            mt_params = load_checkpoint(os.path.join(seed_dir, "checkpoint.bin")).params
            mt_finetune(
                mt_params, read_corpus(ft_path), vocab,
                steps=mt_ft_steps, lr=mt_ft_lr, seed=max(seed, 0),
            )
            save_checkpoint(mtft_path, mt_params, step=mt_ft_steps, seed=max(seed, 0))
        write_mt_csv(
            os.path.join(seed_dir, "mt.csv"),
            [
                (name, label, translate_and_score(mt_params, pairs, vocab))
                for label, pairs in pair_sets
            ],
        )
        print(f"evaluated {name}: ppl.csv lac.csv mt.csv in {seed_dir}")
    return 0


# ---------------------------------------------------------------- compare


def _read_csv_rows(path) -> list:
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    header = lines[0].split(",")
    return [dict(zip(header, ln.split(","))) for ln in lines[1:]]


def _focal_row(rows: list, pair: str = "Alpha-Beta") -> dict:
    for row in rows:
        if row.get("pair") == pair:
            return row
    return rows[0]


def _collect_run(run_dir) -> dict:
    """{seed: {"ppl":..., "lac":..., "bleu":...}} plus the variant name."""
    by_seed = {}
    variant = None
    for seed_dir in _seed_dirs(run_dir):
        missing = [
            n for n in ("ppl.csv", "lac.csv", "mt.csv")
            if not os.path.exists(os.path.join(seed_dir, n))
        ]
        if missing:
            raise FileNotFoundError(
                f"{seed_dir} lacks {', '.join(missing)}; run eval first"
            )
        variant, seed = _run_identity(seed_dir)
        ppl_rows = _read_csv_rows(os.path.join(seed_dir, "ppl.csv"))
        lac_row = _focal_row(_read_csv_rows(os.path.join(seed_dir, "lac.csv")))
        mt_row = _focal_row(_read_csv_rows(os.path.join(seed_dir, "mt.csv")))
        by_seed[seed] = {
            "ppl": sum(float(r["ppl"]) for r in ppl_rows) / len(ppl_rows),
            "lac": float(lac_row["lac"]),
            "degenerate": lac_row["degenerate"] == "true",
            "bleu": float(mt_row["bleu"]),
        }
    return {"variant": variant, "seeds": by_seed}


def _fmt_cell(value: float) -> str:
    return f"{value:.4f}"


def cmd_compare(args) -> int:
    if len(args.runs) < 2:
        raise _UsageError("compare needs at least 2 run directories")
    runs = sorted((_collect_run(r) for r in args.runs), key=lambda r: r["variant"])

    seed_sets = [set(r["seeds"]) for r in runs]
    common = set.intersection(*seed_sets)
    if any(s != seed_sets[0] for s in seed_sets):
        print(
            "warning: seed sets differ across runs; comparing intersection "
            f"{sorted(common)}",
            file=sys.stderr,
        )
    if not common:
        raise ContractError("no common seeds across runs")
    seeds = sorted(common)

    detail = []
    for run in runs:
        for seed in seeds:
            m = run["seeds"][seed]
            detail.append((run["variant"], seed, m["ppl"], m["lac"], m["bleu"]))

    summary = []
    for run in runs:
        picked = [run["seeds"][s] for s in seeds]
        lacs = [p["lac"] for p in picked]
        summary.append(
            (
                run["variant"],
                len(seeds),
                sum(p["ppl"] for p in picked) / len(picked),
                sum(lacs) / len(lacs),
                sum(p["bleu"] for p in picked) / len(picked),
                any(p["degenerate"] for p in picked),
            )
        )

    finite = [s for s in summary if not s[5]]
    best_ppl = min(s[2] for s in summary)
    best_lac = max((s[3] for s in finite), default=None)
    best_bleu = max(s[4] for s in summary)

    def mark(value, best):
        if best is None:
            return _fmt_cell(value)
        return _fmt_cell(value) + ("*" if value == best else "")

    out_lines = ["variant,seed,ppl,lac,bleu"]
    print(f"{'variant':<12}{'seed':>6}{'ppl':>12}{'lac':>12}{'bleu':>12}")
    for variant, seed, ppl, lac, bleu_v in detail:
        print(
            f"{variant:<12}{seed:>6}{ppl:>12.4f}{lac:>12.4f}{bleu_v:>12.4f}"
        )
        out_lines.append(f"{variant},{seed},{ppl:.6g},{lac:.6g},{bleu_v:.6g}")
    print()
    print(f"{'variant':<12}{'n':>6}{'ppl':>12}{'lac':>12}{'bleu':>12}")
    out_lines.append("variant,n,ppl_mean,lac_mean,bleu_mean")
    for variant, n, ppl, lac, bleu_v, degenerate in summary:
        lac_cell = "degenerate" if degenerate else mark(lac, best_lac)
        print(
            f"{variant:<12}{n:>6}{mark(ppl, best_ppl):>12}"
            f"{lac_cell:>12}{mark(bleu_v, best_bleu):>12}"
        )
        # CSV cells stay machine-readable: no best markers.
        csv_lac = "degenerate" if degenerate else _fmt_cell(lac)
        out_lines.append(
            f"{variant},{n},{_fmt_cell(ppl)},{csv_lac},{_fmt_cell(bleu_v)}"
        )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write("\n".join(out_lines) + "\n")
    return 0


# ---------------------------------------------------------------- parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xlinglab",
        description="Synthetic-language lab: corpus generation, dual-objective "
        "training, alignment and translation evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a corpus directory")
    gen.add_argument("--out", required=True)
    gen.add_argument("--config")
    gen.add_argument("--force", action="store_true")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--size", type=int)
    for flag in ("mono-alpha", "mono-beta", "mono-gamma", "eval-n",
                 "pairs", "pairs-gamma", "eval-pairs", "ft-pairs"):
        gen.add_argument(f"--{flag}", type=int)
    gen.set_defaults(func=cmd_gen)

    tr = sub.add_parser("train", help="train one variant over one or more seeds")
    tr.add_argument("--data", required=True)
    tr.add_argument("--out", required=True)
    tr.add_argument("--config")
    tr.add_argument("--variant")
    tr.add_argument("--seed", type=int)
    tr.add_argument("--seeds")
    tr.add_argument("--steps", type=int)
    tr.add_argument("--batch-size", type=int)
    tr.add_argument("--lr", type=float)
    tr.add_argument("--mix-ratio", type=float)
    tr.add_argument("--weight-decay", type=float)
    tr.add_argument("--warmup-ratio", type=float)
    tr.add_argument("--d-model", type=int)
    tr.add_argument("--n-heads", type=int)
    tr.add_argument("--n-layers", type=int)
    tr.add_argument("--d-ff", type=int)
    tr.add_argument("--max-seq-len", type=int)
    tr.add_argument("--divergence-threshold", type=float)
    tr.add_argument("--divergence-patience", type=int)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="score checkpoints into report CSVs")
    ev.add_argument("--data", required=True)
    ev.add_argument("--run", required=True,
                    help="variant dir containing seed*/ or one seed dir")
    ev.add_argument("--config")
    ev.add_argument("--seed", type=int)
    ev.add_argument("--seeds")
    ev.add_argument("--layers", help="comma list, default auto")
    ev.add_argument("--pairs", help="comma list of pair files overriding defaults")
    ev.add_argument("--mt-ft-steps", type=int)
    ev.add_argument("--mt-ft-lr", type=float)
    ev.add_argument("--skip-mt-ft", action="store_true")
    ev.set_defaults(func=cmd_eval)

    cp = sub.add_parser("compare", help="join evaluated runs into one table")
    cp.add_argument("runs", nargs="*")
    cp.add_argument("--out", help="also write the table as CSV")
    cp.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 4
    except (XlingError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
