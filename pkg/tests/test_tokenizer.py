import random

import pytest

from xlinglab import corpus as cx
from xlinglab import tokenizer as tk
from xlinglab.errors import CorpusParseError, OovError, VocabIndexError


def test_ordering_rule():
    vocab = tk.build_vocab([["b a"]])
    assert vocab.id_of == {"a": 4, "b": 5}
    assert vocab.decode([0, 1, 2, 3]) == "⟨bos⟩ ⟨eos⟩ ⟨sep⟩ ⟨pad⟩"


def test_rebuild_identical_and_size():
    corpora = [["c a", "b b"], [["d"]]]
    v1 = tk.build_vocab(corpora)
    v2 = tk.build_vocab(corpora)
    assert v1.id_of == v2.id_of
    assert v1.size == 4 + 4


def test_round_trip_generated_sentences():
    family = cx.make_languages(seed=3, size=80)
    rng = random.Random(0)
    sentences = [
        " ".join(cx.gen_sentence(family.specs[name], rng))
        for name in cx.LANG_NAMES
        for _ in range(334)
    ]
    vocab = tk.build_vocab([sentences])
    for s in sentences[:1000]:
        assert vocab.decode(vocab.encode(s)) == s


def test_oov_hard_error():
    vocab = tk.build_vocab([["a b"]])
    with pytest.raises(OovError) as exc:
        vocab.encode("a zzz")
    assert "zzz" in str(exc.value)


def test_decode_with_specials():
    vocab = tk.build_vocab([["a"]])
    assert vocab.decode([0, 4, 1]) == "⟨bos⟩ a ⟨eos⟩"
    with pytest.raises(VocabIndexError):
        vocab.decode([99])


def test_vocab_file_round_trip(tmp_path):
    vocab = tk.build_vocab([["foo bar baz"]])
    path = tmp_path / "vocab.tsv"
    tk.save_vocab(path, vocab)
    loaded = tk.load_vocab(path)
    assert loaded.id_of == vocab.id_of
    # byte-for-byte stable across a save/load/save cycle
    path2 = tmp_path / "vocab2.tsv"
    tk.save_vocab(path2, loaded)
    assert path.read_bytes() == path2.read_bytes()


def test_vocab_file_malformed_line(tmp_path):
    path = tmp_path / "vocab.tsv"
    path.write_text("0\t⟨bos⟩\n1\t⟨eos⟩\n2\t⟨sep⟩\n3\t⟨pad⟩\nnot-a-pair\n")
    with pytest.raises(CorpusParseError) as exc:
        tk.load_vocab(path)
    assert exc.value.line_no == 5


def test_token_sequence_validation():
    seg = [tk.Segment.SPECIAL, tk.Segment.MONO]
    tk.TokenSequence(ids=[0, 5], loss_mask=[0, 1], segment=seg)
    with pytest.raises(Exception):
        tk.TokenSequence(ids=[0, 5], loss_mask=[0], segment=seg)
    with pytest.raises(Exception):
        tk.TokenSequence(ids=[0, 5], loss_mask=[0, 2], segment=seg)
