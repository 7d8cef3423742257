"""Bipartite protein-compound interaction graph and 3-hop triple mining.

A training triple pairs a target protein with one of its anchor compounds
and a positive compound reachable in three hops: target -> anchor ->
shared protein -> positive. The shared (via) protein is kept for
provenance; when it equals the target the positive is a direct binder and
the triple carries a same_protein flag so training can drop it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataio import InteractionRecord

TRIPLES_HEADER = ("protein_id", "anchor_id", "positive_id", "via_id")


@dataclass
class InteractionGraph:
    proteins: list[str]
    compounds: list[str]
    p2c: dict[str, set[str]]
    c2p: dict[str, set[str]]

    @property
    def n_proteins(self) -> int:
        return len(self.proteins)

    @property
    def n_compounds(self) -> int:
        return len(self.compounds)

    @property
    def n_edges(self) -> int:
        return sum(len(v) for v in self.p2c.values())

    def has_edge(self, protein_id: str, compound_id: str) -> bool:
        return compound_id in self.p2c.get(protein_id, ())


@dataclass(frozen=True)
class TripleSample:
    protein: str
    anchor: str
    positive: str
    via_protein: str

    @property
    def same_protein(self) -> bool:
        return self.via_protein == self.protein


def build_graph(records: list[InteractionRecord]) -> InteractionGraph:
    """Adjacency maps in both directions; node lists sorted for determinism."""
    p2c: dict[str, set[str]] = {}
    c2p: dict[str, set[str]] = {}
    for r in records:
        p2c.setdefault(r.protein_id, set()).add(r.compound_id)
        c2p.setdefault(r.compound_id, set()).add(r.protein_id)
    return InteractionGraph(
        proteins=sorted(p2c), compounds=sorted(c2p), p2c=p2c, c2p=c2p)


def mine_triples(
    g: InteractionGraph,
    max_per_pair: int | None = 8,
    seed: int = 0,
    include_same_protein: bool = True,
) -> list[TripleSample]:
    """Enumerate (protein, anchor, positive, via) triples.

    For each (protein, anchor) edge, candidate positives are the other
    compounds of the anchor's proteins. When several via proteins connect
    the same positive, the first in sorted order is kept. If a pair has
    more than max_per_pair candidates, that many are sampled uniformly
    without replacement; enumeration order is deterministic for a fixed
    (graph, max_per_pair, seed).
    """
    rng = np.random.default_rng(seed)
    triples: list[TripleSample] = []
    for protein in g.proteins:
        for anchor in sorted(g.p2c[protein]):
            first_via: dict[str, str] = {}
            order: list[str] = []
            for via in sorted(g.c2p[anchor]):
                if not include_same_protein and via == protein:
                    continue
                for cand in sorted(g.p2c[via]):
                    if cand != anchor and cand not in first_via:
                        first_via[cand] = via
                        order.append(cand)
            if not order:
                continue
            if max_per_pair is not None and len(order) > max_per_pair:
                picks = rng.choice(len(order), size=max_per_pair, replace=False)
                order = [order[i] for i in sorted(picks)]
            for cand in order:
                triples.append(TripleSample(protein, anchor, cand, first_via[cand]))
    return triples


@dataclass
class TripleStats:
    total: int = 0
    per_protein: dict[str, int] = field(default_factory=dict)
    per_anchor: dict[str, int] = field(default_factory=dict)
    same_protein: int = 0


def triple_stats(triples: list[TripleSample]) -> TripleStats:
    stats = TripleStats()
    for t in triples:
        stats.total += 1
        stats.per_protein[t.protein] = stats.per_protein.get(t.protein, 0) + 1
        stats.per_anchor[t.anchor] = stats.per_anchor.get(t.anchor, 0) + 1
        if t.same_protein:
            stats.same_protein += 1
    return stats


def write_triples(triples: list[TripleSample], path: str | Path) -> None:
    rows = ["\t".join(TRIPLES_HEADER)]
    for t in triples:
        rows.append(f"{t.protein}\t{t.anchor}\t{t.positive}\t{t.via_protein}")
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def load_triples(path: str | Path) -> list[TripleSample]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or tuple(lines[0].split("\t")) != TRIPLES_HEADER:
        raise ValueError(f"{path}: bad triples header")
    out = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if raw == "":
            continue
        cols = raw.split("\t")
        if len(cols) != 4:
            raise ValueError(f"{path}:{lineno}: expected 4 columns")
        out.append(TripleSample(*cols))
    return out
