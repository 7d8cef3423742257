"""Character tokenization for protein and compound sequences.

Vocabularies are rebuilt from the working corpus; symbol ids start at 4
after the fixed specials PAD=0, BOS=1, EOS=2, UNK=3.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ("<PAD>", "<BOS>", "<EOS>", "<UNK>")
UNK_CHAR = "?"  # decode-side sentinel; not a member of either alphabet

VOCAB_KINDS = ("protein", "compound")


@dataclass(frozen=True)
class Vocab:
    symbols: tuple[str, ...]
    kind: str
    _to_id: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in VOCAB_KINDS:
            raise ValueError(f"unknown vocab kind {self.kind!r}")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("duplicate symbols in vocab")
        mapping = {sym: i + len(SPECIALS) for i, sym in enumerate(self.symbols)}
        object.__setattr__(self, "_to_id", mapping)

    @property
    def size(self) -> int:
        return len(SPECIALS) + len(self.symbols)

    def symbol_id(self, ch: str) -> int:
        return self._to_id.get(ch, UNK)

    def id_symbol(self, i: int) -> str:
        if i < len(SPECIALS):
            return SPECIALS[i]
        return self.symbols[i - len(SPECIALS)]


@dataclass
class TokenSeq:
    ids: np.ndarray          # int64, fixed length T
    pad_mask: np.ndarray     # bool, True = real (non-PAD) token
    raw_len: int


def build_vocab(corpus: list[str], kind: str) -> Vocab:
    """Sorted distinct characters of the corpus, for determinism."""
    if not corpus:
        raise ValueError("empty corpus")
    symbols = tuple(sorted(set("".join(corpus))))
    return Vocab(symbols=symbols, kind=kind)


def encode(s: str, vocab: Vocab, length: int, truncate: bool = False) -> TokenSeq:
    """BOS + symbol ids + EOS, padded with PAD to the fixed length.

    Characters outside the vocabulary map to UNK. Strings longer than
    length-2 are rejected unless truncate is set; silent truncation can turn
    a valid SMILES into garbage, so dataset prep filters lengths instead.
    """
    if length < 3:
        raise ValueError(f"length {length} < 3 cannot hold BOS+token+EOS")
    if len(s) > length - 2:
        if not truncate:
            raise ValueError(f"string of length {len(s)} exceeds {length - 2}")
        s = s[:length - 2]
    ids = np.full(length, PAD, dtype=np.int64)
    ids[0] = BOS
    for i, ch in enumerate(s):
        ids[i + 1] = vocab.symbol_id(ch)
    ids[len(s) + 1] = EOS
    return TokenSeq(ids=ids, pad_mask=ids != PAD, raw_len=len(s))


def decode(ids, vocab: Vocab) -> str:
    """Symbols between BOS and the first EOS; specials dropped, UNK -> '?'."""
    out = []
    for i in np.asarray(ids).ravel():
        i = int(i)
        if i == EOS:
            break
        if i in (PAD, BOS):
            continue
        out.append(UNK_CHAR if i == UNK else vocab.id_symbol(i))
    return "".join(out)


def save_vocab(vocab: Vocab, path: str | Path) -> None:
    """One symbol per line after the four special-token lines."""
    lines = list(SPECIALS) + list(vocab.symbols)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_vocab(path: str | Path, kind: str) -> Vocab:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if tuple(lines[:4]) != SPECIALS:
        raise ValueError(f"{path}: missing special-token header")
    return Vocab(symbols=tuple(lines[4:]), kind=kind)
