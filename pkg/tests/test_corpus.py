import json
import random

import pytest

from xlinglab import corpus as cx
from xlinglab.errors import ConfigError, CorpusParseError


@pytest.fixture(scope="module")
def family():
    return cx.make_languages(seed=7, size=200)


def test_gen_lexicon_deterministic():
    a = cx.gen_lexicon(seed=7, size=200)
    b = cx.gen_lexicon(seed=7, size=200)
    assert a == b
    c = cx.gen_lexicon(seed=8, size=200)
    assert a.words != c.words


def test_gen_lexicon_tag_classes():
    lex = cx.gen_lexicon(seed=7, size=200)
    assert len(lex.words) == 200
    assert len(set(lex.words)) == 200
    by = lex.by_tag()
    for tag in cx.TAGS:
        assert len(by[tag]) >= 8
        assert len(by[tag]) >= 200 // 25


def test_gen_lexicon_size_floor():
    with pytest.raises(ConfigError):
        cx.gen_lexicon(seed=1, size=39)
    lex = cx.gen_lexicon(seed=1, size=40)
    assert all(len(v) == 8 for v in lex.by_tag().values())


def test_family_structure(family):
    assert set(family.specs) == {"Alpha", "Beta", "Gamma"}
    alpha = family.specs["Alpha"]
    assert alpha.word_order == "SVO"
    assert all(k == v for k, v in alpha.lexicon_map.items())  # identity map
    assert family.specs["Beta"].word_order == "SOV"
    assert family.specs["Gamma"].word_order == "SVO"
    # bijections, and surface sets disjoint across the three languages
    all_surfaces = []
    for spec in family.specs.values():
        vals = list(spec.lexicon_map.values())
        assert len(set(vals)) == len(vals)
        all_surfaces.extend(vals)
    assert len(set(all_surfaces)) == len(all_surfaces)


def test_alpha_sentence_shape(family):
    rng = random.Random(0)
    tag_of = family.lexicon.tag_of()
    for _ in range(300):
        words = cx.gen_sentence(family.specs["Alpha"], rng)
        assert 5 <= len(words) <= 7
        tags = [tag_of[w] for w in words]
        assert tags.count("VERB") == 1
        assert tags.index("VERB") in (2, 3)


def test_beta_sentence_ends_with_verb(family):
    rng = random.Random(1)
    beta = family.specs["Beta"]
    inv = beta.inverse_map()
    tag_of = family.lexicon.tag_of()
    for _ in range(300):
        words = cx.gen_sentence(beta, rng)
        assert tag_of[inv[words[-1]]] == "VERB"


def test_translation_round_trip(family):
    rng = random.Random(2)
    alpha, beta, gamma = (family.specs[n] for n in ("Alpha", "Beta", "Gamma"))
    for _ in range(300):
        s = cx.gen_sentence(alpha, rng)
        assert cx.translate(cx.translate(s, alpha, beta), beta, alpha) == s
        assert cx.translate(cx.translate(s, alpha, gamma), gamma, alpha) == s
        # composition through a third language also closes
        via = cx.translate(cx.translate(s, alpha, beta), beta, gamma)
        assert via == cx.translate(s, alpha, gamma)


def test_gen_parallel_corpus_invariant(family):
    pairs = cx.gen_parallel_corpus(family.specs["Alpha"], family.specs["Beta"],
                                   n=1000, seed=1)
    assert len(pairs) == 1000
    assert all(p.src_lang == "Alpha" and p.tgt_lang == "Beta" for p in pairs)
    assert all(cx.verify_pair(p, family) for p in pairs)


def test_parallel_corpus_same_language_rejected(family):
    with pytest.raises(ConfigError):
        cx.gen_parallel_corpus(family.specs["Alpha"], family.specs["Alpha"], 5, 0)


def test_seed_partition_disjoint(family):
    train = cx.gen_parallel_corpus(family.specs["Alpha"], family.specs["Beta"],
                                   n=1000, seed=1)
    evalp = cx.gen_parallel_corpus(family.specs["Alpha"], family.specs["Beta"],
                                   n=1000, seed=2)
    train_srcs = {" ".join(p.src) for p in train}
    eval_srcs = {" ".join(p.src) for p in evalp}
    assert not train_srcs & eval_srcs


def test_corpus_files_deterministic(tmp_path, family):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for path in (a, b):
        pairs = cx.gen_parallel_corpus(family.specs["Alpha"], family.specs["Gamma"],
                                       n=50, seed=3)
        cx.write_corpus(path, pairs)
    assert a.read_bytes() == b.read_bytes()


def test_corpus_round_trip(tmp_path, family):
    path = tmp_path / "pairs.jsonl"
    pairs = cx.gen_parallel_corpus(family.specs["Alpha"], family.specs["Beta"],
                                   n=40, seed=4)
    cx.write_corpus(path, pairs)
    assert cx.read_corpus(path) == pairs


def test_read_corpus_missing_field(tmp_path):
    path = tmp_path / "bad.jsonl"
    good = {"src_lang": "Alpha", "tgt_lang": "Beta", "src": "a b", "tgt": "c d"}
    bad = {"src_lang": "Alpha", "tgt_lang": "Beta", "src": "a b"}
    path.write_text(json.dumps(good) + "\n" + json.dumps(bad) + "\n")
    with pytest.raises(CorpusParseError) as exc:
        cx.read_corpus(path)
    assert exc.value.line_no == 2
    assert "tgt" in str(exc.value)


def test_read_corpus_invalid_json(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"src_lang": "Alpha"\n')
    with pytest.raises(CorpusParseError) as exc:
        cx.read_corpus(path)
    assert exc.value.line_no == 1


def test_read_corpus_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert cx.read_corpus(path) == []


def test_mono_round_trip(tmp_path, family):
    path = tmp_path / "mono.jsonl"
    records = cx.gen_mono_corpus(family.specs["Gamma"], n=30, seed=5)
    assert all(r.lang == "Gamma" for r in records)
    cx.write_mono_corpus(path, records)
    assert cx.read_mono_corpus(path) == records


def test_language_family_round_trip(tmp_path, family):
    path = tmp_path / "languages.json"
    cx.save_languages(path, family)
    loaded = cx.load_languages(path)
    assert loaded.lexicon == family.lexicon
    assert loaded.size == family.size
    for name in cx.LANG_NAMES:
        assert loaded.specs[name].lexicon_map == family.specs[name].lexicon_map
        assert loaded.specs[name].word_order == family.specs[name].word_order
