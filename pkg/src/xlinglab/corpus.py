"""Synthetic parallel languages with known ground-truth word alignment.

Three languages share one grammar skeleton. Alpha is the canonical form;
Beta applies a word bijection plus SOV reordering; Gamma applies a
bijection only. Because every pair is generated through the bijections,
token-level alignment is exactly recoverable, which is what makes the
alignment metrics testable.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .errors import ConfigError, CorpusParseError, XlingError

TAGS = ("DET", "ADJ", "NOUN", "VERB", "ADV")
LANG_NAMES = ("Alpha", "Beta", "Gamma")

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"

# tag allocation: 8 words guaranteed per class, remainder split 1:3:6:4:2
_TAG_WEIGHTS = {"DET": 1, "ADJ": 3, "NOUN": 6, "VERB": 4, "ADV": 2}


class GrammarError(XlingError, ValueError):
    """A sentence does not fit the generator grammar."""


@dataclass(frozen=True)
class Lexicon:
    words: tuple[str, ...]
    pos_tags: tuple[str, ...]
    seed: int

    def by_tag(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {t: [] for t in TAGS}
        for w, t in zip(self.words, self.pos_tags):
            out[t].append(w)
        return out

    def tag_of(self) -> dict[str, str]:
        return dict(zip(self.words, self.pos_tags))


@dataclass
class LanguageSpec:
    name: str
    lexicon_map: dict[str, str]  # Alpha surface -> this language's surface
    word_order: str  # "SVO" or "SOV"
    alpha_lexicon: Lexicon

    def inverse_map(self) -> dict[str, str]:
        return {v: k for k, v in self.lexicon_map.items()}

    def words(self) -> list[str]:
        return [self.lexicon_map[w] for w in self.alpha_lexicon.words]


@dataclass
class SentencePair:
    src_lang: str
    tgt_lang: str
    src: list[str]
    tgt: list[str]


@dataclass
class MonoRecord:
    lang: str
    words: list[str]


@dataclass
class LanguageFamily:
    lexicon: Lexicon  # Alpha's lexicon
    specs: dict[str, LanguageSpec] = field(default_factory=dict)
    size: int = 0
    seed: int = 0


def _tag_counts(size: int) -> dict[str, int]:
    counts = {t: 8 for t in TAGS}
    rem = size - 8 * len(TAGS)
    total_w = sum(_TAG_WEIGHTS.values())
    used = 0
    for t in TAGS:
        extra = rem * _TAG_WEIGHTS[t] // total_w
        counts[t] += extra
        used += extra
    counts["NOUN"] += rem - used  # largest class absorbs rounding
    return counts


def _gen_surfaces(rng: random.Random, count: int, taken: set[str]) -> list[str]:
    """Unique pronounceable CV-syllable words, 2-3 syllables each."""
    out = []
    while len(out) < count:
        n_syl = 2 if rng.random() < 0.6 else 3
        word = "".join(
            rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(n_syl)
        )
        if word in taken:
            continue
        taken.add(word)
        out.append(word)
    return out


def _tags_for(size: int) -> tuple[str, ...]:
    counts = _tag_counts(size)
    tags: list[str] = []
    for t in TAGS:
        tags.extend([t] * counts[t])
    return tuple(tags)


def gen_lexicon(seed: int, size: int) -> Lexicon:
    """Deterministic lexicon of `size` unique surfaces with tag classes filled."""
    if size < 40:
        raise ConfigError(f"lexicon size must be >= 40, got {size}")
    rng = random.Random(f"lexicon/{seed}")
    words = _gen_surfaces(rng, size, set())
    return Lexicon(words=tuple(words), pos_tags=_tags_for(size), seed=seed)


def make_languages(seed: int, size: int) -> LanguageFamily:
    """Build the Alpha/Beta/Gamma family over disjoint surface sets.

    Words are aligned by index, so the k-th Alpha word of a tag class maps to
    the k-th Beta word of the same class; that index alignment IS the ground
    truth the induction eval is scored against.
    """
    if size < 40:
        raise ConfigError(f"lexicon size must be >= 40, got {size}")
    rng = random.Random(f"family/{seed}")
    taken: set[str] = set()
    surfaces = {name: _gen_surfaces(rng, size, taken) for name in LANG_NAMES}
    tags = _tags_for(size)
    alpha = Lexicon(words=tuple(surfaces["Alpha"]), pos_tags=tags, seed=seed)

    orders = {"Alpha": "SVO", "Beta": "SOV", "Gamma": "SVO"}
    specs = {}
    for name in LANG_NAMES:
        mapping = dict(zip(surfaces["Alpha"], surfaces[name]))
        specs[name] = LanguageSpec(
            name=name,
            lexicon_map=mapping,
            word_order=orders[name],
            alpha_lexicon=alpha,
        )
    return LanguageFamily(lexicon=alpha, specs=specs, size=size, seed=seed)


# ---------------------------------------------------------------------------
# sentence grammar: DET ADJ? NOUN VERB (ADV)? DET NOUN, 5-7 words in Alpha order


def _gen_alpha_parts(lexicon: Lexicon, rng: random.Random):
    by = lexicon.by_tag()
    subj = [rng.choice(by["DET"])]
    if rng.random() < 0.5:
        subj.append(rng.choice(by["ADJ"]))
    subj.append(rng.choice(by["NOUN"]))
    verb = [rng.choice(by["VERB"])]
    adv = [rng.choice(by["ADV"])] if rng.random() < 0.5 else []
    obj = [rng.choice(by["DET"]), rng.choice(by["NOUN"])]
    return subj, verb, adv, obj


def _arrange(parts, word_order: str) -> list[str]:
    subj, verb, adv, obj = parts
    if word_order == "SVO":
        return subj + verb + adv + obj
    if word_order == "SOV":
        return subj + obj + adv + verb  # verb strictly final
    raise ConfigError(f"unknown word order {word_order!r}")


def _parse_parts(alpha_words: list[str], lexicon: Lexicon, word_order: str):
    """Recover (subj, verb, adv, obj) constituents from a grammar sentence."""
    tag_of = lexicon.tag_of()
    try:
        tags = [tag_of[w] for w in alpha_words]
    except KeyError as e:
        raise GrammarError(f"word not in Alpha lexicon: {e.args[0]!r}") from None
    if not 5 <= len(alpha_words) <= 7 or tags.count("VERB") != 1:
        raise GrammarError(f"not a grammar sentence: {' '.join(alpha_words)}")
    if word_order == "SVO":
        vi = tags.index("VERB")
        subj = alpha_words[:vi]
        rest = alpha_words[vi + 1 :]
        adv = [rest[0]] if rest and tag_of[rest[0]] == "ADV" else []
        obj = rest[len(adv) :]
    elif word_order == "SOV":
        if tags[-1] != "VERB":
            raise GrammarError("SOV sentence must end with its verb")
        adv = [alpha_words[-2]] if tags[-2] == "ADV" else []
        head = alpha_words[: -1 - len(adv)]
        subj, obj = head[:-2], head[-2:]
    else:
        raise ConfigError(f"unknown word order {word_order!r}")
    if len(subj) not in (2, 3) or len(obj) != 2:
        raise GrammarError(f"not a grammar sentence: {' '.join(alpha_words)}")
    verb = [w for w, t in zip(alpha_words, tags) if t == "VERB"]
    return subj, verb, adv, obj


def gen_sentence(spec: LanguageSpec, rng: random.Random) -> list[str]:
    """One sentence in spec's language (grammar applied in Alpha order first)."""
    parts = _gen_alpha_parts(spec.alpha_lexicon, rng)
    return [spec.lexicon_map[w] for w in _arrange(parts, spec.word_order)]


def translate(words: list[str], src: LanguageSpec, tgt: LanguageSpec) -> list[str]:
    """Ground-truth translation via the shared Alpha interlingua."""
    inv = src.inverse_map()
    try:
        alpha = [inv[w] for w in words]
    except KeyError as e:
        raise GrammarError(f"word not in {src.name} lexicon: {e.args[0]!r}") from None
    parts = _parse_parts(alpha, src.alpha_lexicon, src.word_order)
    return [tgt.lexicon_map[w] for w in _arrange(parts, tgt.word_order)]


def gen_parallel_corpus(
    src: LanguageSpec, tgt: LanguageSpec, n: int, seed: int
) -> list[SentencePair]:
    """n aligned pairs; generation is pure per (seed, index)."""
    if src.name == tgt.name:
        raise ConfigError("src and tgt language must differ")
    if n < 1:
        raise ConfigError(f"pair count must be >= 1, got {n}")
    pairs = []
    for i in range(n):
        rng = random.Random(f"pair/{src.name}-{tgt.name}/{seed}/{i}")
        parts = _gen_alpha_parts(src.alpha_lexicon, rng)
        src_words = [src.lexicon_map[w] for w in _arrange(parts, src.word_order)]
        tgt_words = [tgt.lexicon_map[w] for w in _arrange(parts, tgt.word_order)]
        pairs.append(
            SentencePair(src_lang=src.name, tgt_lang=tgt.name, src=src_words, tgt=tgt_words)
        )
    return pairs


def gen_mono_corpus(spec: LanguageSpec, n: int, seed: int) -> list[MonoRecord]:
    if n < 1:
        raise ConfigError(f"sentence count must be >= 1, got {n}")
    out = []
    for i in range(n):
        rng = random.Random(f"mono/{spec.name}/{seed}/{i}")
        out.append(MonoRecord(lang=spec.name, words=gen_sentence(spec, rng)))
    return out


def verify_pair(pair: SentencePair, family: LanguageFamily) -> bool:
    src = family.specs[pair.src_lang]
    tgt = family.specs[pair.tgt_lang]
    return translate(pair.src, src, tgt) == pair.tgt


# ---------------------------------------------------------------------------
# file formats: UTF-8 JSONL, one record per line, space-separated tokens


def write_corpus(path, pairs: list[SentencePair]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            rec = {
                "src_lang": p.src_lang,
                "tgt_lang": p.tgt_lang,
                "src": " ".join(p.src),
                "tgt": " ".join(p.tgt),
            }
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")


def _parse_line(path, line_no: int, line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise CorpusParseError(path, line_no, f"invalid JSON: {e.msg}") from None
    if not isinstance(obj, dict):
        raise CorpusParseError(path, line_no, "record is not an object")
    return obj


def read_corpus(path) -> list[SentencePair]:
    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            obj = _parse_line(path, line_no, line)
            for key in ("src_lang", "tgt_lang", "src", "tgt"):
                if key not in obj or not isinstance(obj[key], str):
                    raise CorpusParseError(path, line_no, f"missing field {key!r}")
            pairs.append(
                SentencePair(
                    src_lang=obj["src_lang"],
                    tgt_lang=obj["tgt_lang"],
                    src=obj["src"].split(),
                    tgt=obj["tgt"].split(),
                )
            )
    return pairs


def write_mono_corpus(path, records: list[MonoRecord]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps({"lang": r.lang, "text": " ".join(r.words)},
                               ensure_ascii=False) + "\n")


def read_mono_corpus(path) -> list[MonoRecord]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            obj = _parse_line(path, line_no, line)
            for key in ("lang", "text"):
                if key not in obj or not isinstance(obj[key], str):
                    raise CorpusParseError(path, line_no, f"missing field {key!r}")
            out.append(MonoRecord(lang=obj["lang"], words=obj["text"].split()))
    return out


def save_languages(path, family: LanguageFamily) -> None:
    doc = {
        "seed": family.seed,
        "size": family.size,
        "alpha_words": list(family.lexicon.words),
        "pos_tags": list(family.lexicon.pos_tags),
        "languages": {
            name: {
                "word_order": spec.word_order,
                "surfaces": [spec.lexicon_map[w] for w in family.lexicon.words],
            }
            for name, spec in family.specs.items()
        },
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, ensure_ascii=False, indent=1, sort_keys=True)


def load_languages(path) -> LanguageFamily:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    alpha = Lexicon(
        words=tuple(doc["alpha_words"]),
        pos_tags=tuple(doc["pos_tags"]),
        seed=doc["seed"],
    )
    specs = {}
    for name, entry in doc["languages"].items():
        mapping = dict(zip(doc["alpha_words"], entry["surfaces"]))
        specs[name] = LanguageSpec(
            name=name,
            lexicon_map=mapping,
            word_order=entry["word_order"],
            alpha_lexicon=alpha,
        )
    return LanguageFamily(lexicon=alpha, specs=specs, size=doc["size"], seed=doc["seed"])
