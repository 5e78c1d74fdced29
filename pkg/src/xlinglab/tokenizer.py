"""Word-level closed vocabulary shared across all synthetic languages.

No subwords and no UNK: the languages are closed-vocabulary by construction,
so an out-of-vocabulary surface is always a pipeline bug and raises.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import ConfigError, CorpusParseError, OovError, VocabIndexError

BOS_ID = 0
EOS_ID = 1
SEP_ID = 2
PAD_ID = 3

SPECIAL_SURFACES = {BOS_ID: "⟨bos⟩", EOS_ID: "⟨eos⟩", SEP_ID: "⟨sep⟩", PAD_ID: "⟨pad⟩"}
N_SPECIALS = 4


class Segment(enum.Enum):
    SRC = "SRC"
    TGT = "TGT"
    MONO = "MONO"
    PROMPT = "PROMPT"
    SPECIAL = "SPECIAL"


@dataclass
class TokenSequence:
    """Token ids with the per-position loss mask and a segment tag per token."""

    ids: list[int]
    loss_mask: list[int]
    segment: list[Segment]

    def __post_init__(self):
        if not (len(self.ids) == len(self.loss_mask) == len(self.segment)):
            raise ConfigError(
                f"ids/loss_mask/segment length mismatch: "
                f"{len(self.ids)}/{len(self.loss_mask)}/{len(self.segment)}"
            )
        if any(m not in (0, 1) for m in self.loss_mask):
            raise ConfigError("loss_mask entries must be 0 or 1")

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class Vocab:
    id_of: dict[str, int]
    surface_of: dict[int, str] = field(init=False)

    def __post_init__(self):
        self.surface_of = {i: s for s, i in self.id_of.items()}
        self.surface_of.update(SPECIAL_SURFACES)

    @property
    def size(self) -> int:
        return N_SPECIALS + len(self.id_of)

    def encode(self, text) -> list[int]:
        """Word ids for a sentence (string or word list); specials not added."""
        words = text.split() if isinstance(text, str) else list(text)
        ids = []
        for w in words:
            if w not in self.id_of:
                raise OovError(w)
            ids.append(self.id_of[w])
        return ids

    def decode(self, ids) -> str:
        parts = []
        for i in ids:
            i = int(i)
            if i not in self.surface_of:
                raise VocabIndexError(f"token id {i} outside vocab of size {self.size}")
            parts.append(self.surface_of[i])
        return " ".join(parts)


def build_vocab(corpora) -> Vocab:
    """Specials at 0..3, then every distinct surface in lexicographic order.

    `corpora` is an iterable of corpora; each corpus an iterable of sentences;
    each sentence a whitespace-separated string or a word list.
    """
    surfaces: set[str] = set()
    for corpus in corpora:
        for sentence in corpus:
            words = sentence.split() if isinstance(sentence, str) else sentence
            surfaces.update(words)
    id_of = {w: N_SPECIALS + k for k, w in enumerate(sorted(surfaces))}
    return Vocab(id_of=id_of)


def save_vocab(path, vocab: Vocab) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for i in range(vocab.size):
            f.write(f"{i}\t{vocab.surface_of[i]}\n")


def load_vocab(path) -> Vocab:
    entries: dict[int, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            if len(cells) != 2:
                raise CorpusParseError(path, line_no, "expected 'id<TAB>surface'")
            try:
                idx = int(cells[0])
            except ValueError:
                raise CorpusParseError(path, line_no, f"bad id {cells[0]!r}") from None
            entries[idx] = cells[1]
    for sid, surface in SPECIAL_SURFACES.items():
        if entries.get(sid) != surface:
            raise CorpusParseError(path, sid + 1, f"special {surface} missing or misplaced")
    id_of = {s: i for i, s in entries.items() if i >= N_SPECIALS}
    return Vocab(id_of=id_of)
