"""Interaction-table ingestion, degree filtering, leakage-free splits, and
synthetic dataset generation.

The single on-disk interchange format is UTF-8 TSV with header
``protein_id\tcompound_id\tprotein_seq\tcompound_smiles`` and no quoting.
Binding-affinity values never appear: the presence of a row is the edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

HEADER = ("protein_id", "compound_id", "protein_seq", "compound_smiles")

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"


class DataFormatError(ValueError):
    """Malformed input table; carries the 1-based offending line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class InteractionRecord:
    protein_id: str
    compound_id: str
    protein_seq: str
    compound_smiles: str


@dataclass
class DatasetConfig:
    min_degree: int = 10
    max_degree: int = 100
    max_protein_len: int = 64
    max_compound_len: int = 48
    split_ratio: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.min_degree <= self.max_degree):
            raise ValueError(f"bad degree bounds [{self.min_degree}, {self.max_degree}]")
        if not (0.0 < self.split_ratio < 1.0):
            raise ValueError(f"split_ratio {self.split_ratio} outside (0, 1)")


class LoadResult(NamedTuple):
    records: list[InteractionRecord]
    duplicates: int
    dropped: int


def load_records(path: str | Path, fmt: str = "tsv") -> LoadResult:
    """Read an interaction TSV; collapse duplicate id pairs, drop rows with
    empty fields, and count both."""
    if fmt != "tsv":
        raise ValueError(f"unsupported format {fmt!r}")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DataFormatError(f"{path}: empty file", line=1)
    if tuple(lines[0].split("\t")) != HEADER:
        raise DataFormatError(f"{path}: bad header {lines[0]!r}", line=1)
    records: list[InteractionRecord] = []
    seen: set[tuple[str, str]] = set()
    duplicates = dropped = 0
    for lineno, raw in enumerate(lines[1:], start=2):
        if raw == "":
            continue
        cols = raw.split("\t")
        if len(cols) != len(HEADER):
            raise DataFormatError(
                f"{path}:{lineno}: expected {len(HEADER)} columns, got {len(cols)}",
                line=lineno)
        if any(c == "" for c in cols):
            dropped += 1
            continue
        key = (cols[0], cols[1])
        if key in seen:
            duplicates += 1
            continue
        seen.add(key)
        records.append(InteractionRecord(*cols))
    return LoadResult(records, duplicates, dropped)


def write_records(records: list[InteractionRecord], path: str | Path) -> None:
    rows = ["\t".join(HEADER)]
    for r in records:
        rows.append(f"{r.protein_id}\t{r.compound_id}\t{r.protein_seq}\t{r.compound_smiles}")
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def filter_by_length(records: list[InteractionRecord], cfg: DatasetConfig) -> list[InteractionRecord]:
    """Drop records whose sequences cannot fit in the fixed token lengths
    (BOS and EOS take two slots); truncation would corrupt SMILES."""
    return [r for r in records
            if len(r.protein_seq) <= cfg.max_protein_len - 2
            and len(r.compound_smiles) <= cfg.max_compound_len - 2]


def filter_by_degree(records: list[InteractionRecord], cfg: DatasetConfig) -> list[InteractionRecord]:
    """Keep records of compounds interacting with min_degree..max_degree
    distinct proteins. Degrees are computed once on the input, single pass."""
    partners: dict[str, set[str]] = {}
    for r in records:
        partners.setdefault(r.compound_id, set()).add(r.protein_id)
    keep = {c for c, ps in partners.items()
            if cfg.min_degree <= len(ps) <= cfg.max_degree}
    return [r for r in records if r.compound_id in keep]


def split_no_protein_overlap(
    records: list[InteractionRecord], cfg: DatasetConfig,
) -> tuple[list[InteractionRecord], list[InteractionRecord]]:
    """Partition protein ids by seeded shuffle; each record follows its
    protein, so no compound sees the same protein on both sides."""
    if not records:
        raise ValueError("no records to split")
    proteins = sorted({r.protein_id for r in records})
    if len(proteins) < 2:
        raise ValueError(f"need at least 2 distinct proteins, got {len(proteins)}")
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(proteins))
    n_train = int(round(cfg.split_ratio * len(proteins)))
    n_train = max(1, min(len(proteins) - 1, n_train))
    train_ids = {proteins[i] for i in perm[:n_train]}
    train = [r for r in records if r.protein_id in train_ids]
    test = [r for r in records if r.protein_id not in train_ids]
    return train, test


# --- synthetic data ---------------------------------------------------------

_ELEMENT_CHOICES = ["C", "C", "C", "C", "C", "C", "N", "N", "O", "O", "S", "P"]
_LEAF_HALOGENS = ["F", "Cl", "Br", "I"]
_BUILD_VALENCE = {"C": 4, "N": 3, "O": 2, "S": 2, "P": 3,
                  "F": 1, "Cl": 1, "Br": 1, "I": 1}


def _random_molecule(rng: np.random.Generator) -> str:
    """Grow a random acyclic skeleton under valence bookkeeping, optionally
    close one ring and attach one benzene ring, then write SMILES by DFS.
    Valid by construction for the chem module's grammar and valence rules."""
    n_heavy = int(rng.integers(4, 13))
    symbols: list[str] = ["C"]
    aromatic: list[bool] = [False]
    remaining: list[float] = [float(_BUILD_VALENCE["C"])]
    children: dict[int, list[tuple[int, float]]] = {0: []}
    parents: dict[int, int] = {}

    def attach(parent: int, symbol: str, arom: bool, order: float) -> int:
        idx = len(symbols)
        symbols.append(symbol)
        aromatic.append(arom)
        remaining.append(_BUILD_VALENCE[symbol] - order)
        remaining[parent] -= order
        children[parent].append((idx, order))
        children[idx] = []
        parents[idx] = parent
        return idx

    while len(symbols) < n_heavy:
        open_atoms = [i for i, rem in enumerate(remaining)
                      if rem >= 1 and not aromatic[i]]
        if not open_atoms:
            break
        parent = int(rng.choice(open_atoms))
        if rng.random() < 0.10:
            attach(parent, str(rng.choice(_LEAF_HALOGENS)), False, 1.0)
            continue
        symbol = str(rng.choice(_ELEMENT_CHOICES))
        max_order = min(remaining[parent], _BUILD_VALENCE[symbol] - 1)
        order = 1.0
        if max_order >= 2 and rng.random() < 0.15:
            order = 2.0
        if max_order >= 3 and symbol == "C" and rng.random() < 0.08:
            order = 3.0
        attach(parent, symbol, False, order)

    ring_bonds: list[tuple[int, int]] = []

    def depth(i: int) -> int:
        d = 0
        while i in parents:
            i = parents[i]
            d += 1
        return d

    if rng.random() < 0.5:
        capable = [i for i, rem in enumerate(remaining)
                   if rem >= 1 and not aromatic[i]]
        pairs = [(a, b) for ai, a in enumerate(capable) for b in capable[ai + 1:]
                 if abs(depth(a) - depth(b)) >= 2 or (depth(a) == depth(b) and depth(a) >= 2)]
        if pairs:
            a, b = pairs[int(rng.integers(len(pairs)))]
            remaining[a] -= 1
            remaining[b] -= 1
            ring_bonds.append((a, b))

    if rng.random() < 0.30:
        anchors = [i for i, rem in enumerate(remaining)
                   if rem >= 1 and not aromatic[i]]
        if anchors:
            parent = int(rng.choice(anchors))
            first = attach(parent, "C", True, 1.0)
            prev = first
            for _ in range(5):
                nxt = attach(prev, "C", True, 1.5)
                prev = nxt
            ring_bonds.append((first, prev))

    digit_map: dict[int, list[int]] = {}
    for digit, (a, b) in enumerate(ring_bonds, start=1):
        digit_map.setdefault(a, []).append(digit)
        digit_map.setdefault(b, []).append(digit)

    def bond_char(order: float, a: int, b: int) -> str:
        if order == 2.0:
            return "="
        if order == 3.0:
            return "#"
        if order == 1.0 and aromatic[a] and aromatic[b]:
            return "-"  # explicit single between two aromatic atoms
        return ""

    def emit(v: int) -> str:
        token = symbols[v].lower() if aromatic[v] else symbols[v]
        token += "".join(str(d) for d in digit_map.get(v, []))
        kids = children[v]
        parts = [token]
        for k, (child, order) in enumerate(kids):
            sub = bond_char(order, v, child) + emit(child)
            parts.append(sub if k == len(kids) - 1 else f"({sub})")
        return "".join(parts)

    return emit(0)


def random_smiles(rng: np.random.Generator, min_len: int = 10, max_len: int = 40) -> str:
    """Random SMILES within the length bounds, valid by construction."""
    for _ in range(200):
        s = _random_molecule(rng)
        if min_len <= len(s) <= max_len:
            return s
    raise RuntimeError("failed to generate a SMILES in the length bounds")


def random_protein(rng: np.random.Generator, min_len: int = 20, max_len: int = 60) -> str:
    n = int(rng.integers(min_len, max_len + 1))
    return "".join(AMINO_ACIDS[i] for i in rng.integers(0, len(AMINO_ACIDS), size=n))


def generate_synthetic(
    n_proteins: int, n_compounds: int, density: float, seed: int,
) -> list[InteractionRecord]:
    """Random bipartite interaction table; each edge is present independently
    with probability ``density``. Deterministic for a fixed seed."""
    if n_proteins < 1 or n_compounds < 1:
        raise ValueError("need at least one protein and one compound")
    if not (0.0 < density <= 1.0):
        raise ValueError(f"density {density} outside (0, 1]")
    rng = np.random.default_rng(seed)
    proteins = [(f"P{i:04d}", random_protein(rng)) for i in range(n_proteins)]
    compounds = [(f"C{j:04d}", random_smiles(rng)) for j in range(n_compounds)]
    records = []
    for pid, seq in proteins:
        for cid, smi in compounds:
            if rng.random() < density:
                records.append(InteractionRecord(pid, cid, seq, smi))
    return records
