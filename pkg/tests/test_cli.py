"""End-to-end command tests: exit codes, file contracts, manifests, and the
comparison table, all through main() with a desk-sized corpus."""

import json
import shutil

import pytest

from xlinglab.cli import main
from xlinglab.corpus import SentencePair, read_corpus, write_corpus
from xlinglab.evaluate import LAC_HEADER, MT_HEADER, PPL_HEADER
from xlinglab.trainer import METRICS_HEADER

_GEN_FLAGS = [
    "--seed", "7", "--mono-alpha", "120", "--mono-beta", "60",
    "--mono-gamma", "40", "--eval-n", "40", "--pairs", "80",
    "--pairs-gamma", "30", "--eval-pairs", "30", "--ft-pairs", "50",
]
_MODEL_FLAGS = [
    "--steps", "40", "--batch-size", "8", "--d-model", "16",
    "--n-heads", "2", "--n-layers", "2", "--d-ff", "24",
    "--max-seq-len", "32",
]


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    root = tmp_path_factory.mktemp("cliws")
    data = str(root / "data")
    runs = str(root / "runs")
    assert main(["gen", "--out", data, *_GEN_FLAGS]) == 0
    common = ["--data", data, "--out", runs, *_MODEL_FLAGS]
    assert main(["train", *common, "--variant", "cl", "--seeds", "1,2"]) == 0
    assert main(["train", *common, "--variant", "ntp", "--seeds", "1,2"]) == 0
    for variant in ("cl", "ntp_only"):
        assert main(
            ["eval", "--data", data, "--run", f"{runs}/{variant}",
             "--mt-ft-steps", "30"]
        ) == 0
    return root


def _manifest(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


# ---------------------------------------------------------------- gen


def test_gen_manifest_lists_every_file(ws):
    manifest = _manifest(ws / "data" / "manifest.json")
    assert len(manifest["files"]) == 13
    for name, entry in manifest["files"].items():
        path = ws / "data" / name
        assert path.exists()
        assert entry["bytes"] == path.stat().st_size
        assert len(entry["sha256"]) == 64


def test_gen_deterministic_hashes(ws, tmp_path):
    other = str(tmp_path / "data2")
    assert main(["gen", "--out", other, *_GEN_FLAGS]) == 0
    first = _manifest(ws / "data" / "manifest.json")["files"]
    second = _manifest(tmp_path / "data2" / "manifest.json")["files"]
    assert {k: v["sha256"] for k, v in first.items()} == {
        k: v["sha256"] for k, v in second.items()
    }


def test_gen_refuses_nonempty_without_force(ws):
    data = str(ws / "data")
    before = _manifest(ws / "data" / "manifest.json")["files"]["vocab.tsv"]["sha256"]
    assert main(["gen", "--out", data, *_GEN_FLAGS]) == 3
    assert main(["gen", "--out", data, "--force", *_GEN_FLAGS]) == 0
    after = _manifest(ws / "data" / "manifest.json")["files"]["vocab.tsv"]["sha256"]
    assert before == after


def test_gen_missing_out_is_usage_error(capsys):
    assert main(["gen"]) == 2
    capsys.readouterr()


def test_no_command_is_usage_error(capsys):
    assert main([]) == 2
    capsys.readouterr()


# ---------------------------------------------------------------- train


def test_train_writes_metrics_and_checkpoint(ws):
    seed_dir = ws / "runs" / "cl" / "seed1"
    lines = (seed_dir / "metrics.csv").read_text().splitlines()
    assert lines[0] == METRICS_HEADER
    assert len(lines) == 41  # header + one row per step
    assert (seed_dir / "checkpoint.bin").stat().st_size > 0
    manifest = _manifest(seed_dir / "manifest.json")
    assert manifest["effective_config"]["steps"] == 40
    assert manifest["effective_config"]["variant"] == "CL"


def test_train_unknown_variant_lists_names(ws, capsys):
    rc = main(
        ["train", "--data", str(ws / "data"), "--out", str(ws / "runs"),
         "--variant", "bogus"]
    )
    err = capsys.readouterr().err
    assert rc == 2
    assert "bogus" in err
    for name in ("ntp_only", "bi_ntp", "cli", "cl", "e_sep", "e_post_mt",
                 "e_pre_mt", "e_cross"):
        assert name in err


def test_train_mixture_counts_in_manifest(ws):
    manifest = _manifest(ws / "runs" / "cl" / "seed1" / "manifest.json")
    schedule = manifest["schedule"]
    assert schedule["n_ntp_per_epoch"] == round(0.527 * schedule["epoch_size"])
    share = schedule["n_ntp_per_epoch"] / schedule["epoch_size"]
    assert abs(share - 0.527) <= 0.5 / schedule["epoch_size"]


def test_train_ntp_consumes_no_pair_examples(ws):
    manifest = _manifest(ws / "runs" / "ntp_only" / "seed1" / "manifest.json")
    assert manifest["variant"] == "NTP_ONLY"
    assert "CL" not in manifest["tasks"]
    assert manifest["pools"]["pair"] == 0
    assert manifest["consumed"].get("pair", 0) == 0


def test_train_divergence_exit_code(ws, tmp_path):
    rc = main(
        ["train", "--data", str(ws / "data"), "--out", str(tmp_path / "runs"),
         "--variant", "cl", "--seed", "1", *_MODEL_FLAGS,
         "--divergence-threshold", "0.1", "--divergence-patience", "3"]
    )
    assert rc == 4


def test_train_config_file_merge(ws, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"variant": "cl", "steps": 25, "lr": 0.0002}))
    out = str(tmp_path / "runs")
    rc = main(
        ["train", "--data", str(ws / "data"), "--out", out,
         "--config", str(cfg), "--steps", "30", "--batch-size", "8",
         "--d-model", "16", "--n-heads", "2", "--n-layers", "2",
         "--d-ff", "24", "--max-seq-len", "32"]
    )
    assert rc == 0
    eff = _manifest(tmp_path / "runs" / "cl" / "seed0" / "manifest.json")[
        "effective_config"
    ]
    assert eff["steps"] == 30  # flag beats file
    assert eff["lr"] == 0.0002  # file beats default


def test_train_config_unknown_key(ws, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"variant": "cl", "stepz": 5}))
    rc = main(
        ["train", "--data", str(ws / "data"), "--out", str(tmp_path / "runs"),
         "--config", str(cfg)]
    )
    assert rc == 2
    assert "stepz" in capsys.readouterr().err


# ---------------------------------------------------------------- eval


def test_eval_csv_headers(ws):
    seed_dir = ws / "runs" / "cl" / "seed1"
    assert (seed_dir / "ppl.csv").read_text().splitlines()[0] == PPL_HEADER
    assert (seed_dir / "lac.csv").read_text().splitlines()[0] == LAC_HEADER
    assert (seed_dir / "mt.csv").read_text().splitlines()[0] == MT_HEADER


def test_eval_idempotent(ws):
    seed_dir = ws / "runs" / "cl" / "seed2"
    before = {n: (seed_dir / n).read_bytes() for n in ("ppl.csv", "lac.csv", "mt.csv")}
    assert main(
        ["eval", "--data", str(ws / "data"), "--run", str(seed_dir),
         "--mt-ft-steps", "30"]
    ) == 0
    after = {n: (seed_dir / n).read_bytes() for n in ("ppl.csv", "lac.csv", "mt.csv")}
    assert before == after


def test_eval_identical_pair_file_flags_degenerate(ws, tmp_path):
    copy = tmp_path / "seedcopy"
    shutil.copytree(ws / "runs" / "cl" / "seed1", copy)
    pairs = read_corpus(str(ws / "data" / "pairs_alpha_beta_eval.tsv"))
    same = [SentencePair("Alpha", "Beta", p.src, list(p.src)) for p in pairs[:10]]
    pair_file = tmp_path / "same.tsv"
    write_corpus(str(pair_file), same)
    assert main(
        ["eval", "--data", str(ws / "data"), "--run", str(copy),
         "--pairs", str(pair_file), "--mt-ft-steps", "30"]
    ) == 0
    row = (copy / "lac.csv").read_text().splitlines()[1].split(",")
    assert row[5] == "inf"
    assert row[6] == "true"


def test_eval_vocab_mismatch_is_format_error(ws, tmp_path, capsys):
    other = str(tmp_path / "biggerdata")
    assert main(["gen", "--out", other, "--seed", "7", "--size", "45"]) == 0
    rc = main(
        ["eval", "--data", other, "--run", str(ws / "runs" / "cl" / "seed1")]
    )
    assert rc == 3
    assert "vocab" in capsys.readouterr().err


def test_eval_missing_run_is_data_error(ws, capsys):
    rc = main(
        ["eval", "--data", str(ws / "data"), "--run", str(ws / "runs" / "nope")]
    )
    assert rc == 3
    capsys.readouterr()


# ---------------------------------------------------------------- compare


def test_compare_table_and_markers(ws, capsys, tmp_path):
    out_csv = tmp_path / "compare.csv"
    rc = main(
        ["compare", str(ws / "runs" / "cl"), str(ws / "runs" / "ntp_only"),
         "--out", str(out_csv)]
    )
    captured = capsys.readouterr()
    assert rc == 0
    lines = [ln for ln in captured.out.splitlines() if ln.strip()]
    detail = [ln for ln in lines if ln.startswith(("CL ", "NTP_ONLY "))]
    # 2 variants x 2 seeds detail + 2 summary rows
    assert len(detail) == 6
    assert captured.out.count("*") >= 2
    # deterministic ordering: CL section before NTP_ONLY
    assert captured.out.index("CL") < captured.out.index("NTP_ONLY")
    body = out_csv.read_text()
    assert body.startswith("variant,seed,ppl,lac,bleu")
    assert "variant,n,ppl_mean,lac_mean,bleu_mean" in body
    # best markers decorate the terminal table only; CSV cells stay parseable
    assert "*" not in body


def test_compare_needs_two_runs(ws, capsys):
    assert main(["compare", str(ws / "runs" / "cl")]) == 2
    capsys.readouterr()


def test_compare_seed_mismatch_warns_and_intersects(ws, tmp_path, capsys):
    a = tmp_path / "cl"
    b = tmp_path / "ntp_only"
    shutil.copytree(ws / "runs" / "cl", a)
    shutil.copytree(ws / "runs" / "ntp_only", b)
    shutil.rmtree(b / "seed2")
    rc = main(["compare", str(a), str(b)])
    captured = capsys.readouterr()
    assert rc == 0
    assert "intersection" in captured.err
    detail = [
        ln for ln in captured.out.splitlines()
        if ln.startswith(("CL ", "NTP_ONLY "))
    ]
    # only seed 1 survives: 2 detail + 2 summary rows
    assert len(detail) == 4


def test_compare_unevaluated_run_is_data_error(ws, tmp_path, capsys):
    bare = tmp_path / "bare"
    shutil.copytree(ws / "runs" / "cl", bare)
    (bare / "seed1" / "ppl.csv").unlink()
    rc = main(["compare", str(bare), str(ws / "runs" / "ntp_only")])
    assert rc == 3
    assert "eval" in capsys.readouterr().err
