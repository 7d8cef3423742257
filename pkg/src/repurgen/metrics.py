"""Generative and diversity metrics.

N-gram metrics treat SMILES strings as character-token sequences, matching
the model's tokenization. Each generated sample is scored against its
anchor compound and against its mined positives (max over positives), then
averaged across samples; UNK-flagged samples are excluded from every pool.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import chem

NEG_INF = float("-inf")


def _ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _clipped_matches(cand: Counter, ref: Counter) -> int:
    return sum(min(c, ref[g]) for g, c in cand.items())


def bleu_n(candidate, reference, n: int) -> float:
    """Brevity penalty times the geometric mean of clipped i-gram
    precisions for i = 1..n, single reference."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    candidate, reference = list(candidate), list(reference)
    if not candidate:
        return 0.0
    log_sum = 0.0
    for i in range(1, n + 1):
        cand = _ngrams(candidate, i)
        total = sum(cand.values())
        if total == 0:
            return 0.0
        matched = _clipped_matches(cand, _ngrams(reference, i))
        if matched == 0:
            return 0.0
        log_sum += math.log(matched / total)
    c, r = len(candidate), len(reference)
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum / n)


def gleu_n(candidate, reference, n: int) -> float:
    """min(precision, recall) over the pooled 1..n-gram multisets."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    candidate, reference = list(candidate), list(reference)
    matched = cand_total = ref_total = 0
    for i in range(1, n + 1):
        cand = _ngrams(candidate, i)
        ref = _ngrams(reference, i)
        matched += _clipped_matches(cand, ref)
        cand_total += sum(cand.values())
        ref_total += sum(ref.values())
    if cand_total == 0 or ref_total == 0:
        return 0.0
    return min(matched / cand_total, matched / ref_total)


def rouge_n_f1(candidate, reference, n: int) -> float:
    """F1 of the clipped n-gram overlap at order n exactly."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cand = _ngrams(list(candidate), n)
    ref = _ngrams(list(reference), n)
    cand_total, ref_total = sum(cand.values()), sum(ref.values())
    if cand_total == 0 or ref_total == 0:
        return 0.0
    overlap = _clipped_matches(cand, ref)
    if overlap == 0:
        return 0.0
    precision = overlap / cand_total
    recall = overlap / ref_total
    return 2.0 * precision * recall / (precision + recall)


def validity_rate(smiles: list[str]) -> float:
    if not smiles:
        raise ValueError("validity of an empty list is undefined")
    return sum(chem.check_validity(s)[0] for s in smiles) / len(smiles)


def uniqueness_rate(smiles: list[str]) -> float:
    if not smiles:
        raise ValueError("uniqueness of an empty list is undefined")
    return len(set(smiles)) / len(smiles)


def internal_diversity(smiles: list[str], metric: str = "levenshtein_log10") -> float:
    """log10 of the mean pairwise edit distance over unordered pairs."""
    if metric != "levenshtein_log10":
        raise ValueError(f"unknown diversity metric {metric!r}")
    if len(smiles) < 2:
        raise ValueError("internal diversity needs at least 2 items")
    total = pairs = 0
    for i in range(len(smiles)):
        for j in range(i + 1, len(smiles)):
            total += chem.levenshtein(smiles[i], smiles[j])
            pairs += 1
    mean = total / pairs
    return math.log10(mean) if mean > 0 else NEG_INF


@dataclass
class TanimotoDistribution:
    distances: np.ndarray
    bin_counts: np.ndarray    # 20 equal bins over [0, 1]
    bin_edges: np.ndarray


def tanimoto_distribution(set_a: list[str], set_b: list[str]) -> TanimotoDistribution:
    """All cross-pair fingerprint distances; inputs must be pre-filtered to
    valid SMILES."""
    fps_a = [chem.fingerprint(chem.parse_smiles(s)) for s in set_a]
    fps_b = [chem.fingerprint(chem.parse_smiles(s)) for s in set_b]
    distances = np.array([chem.tanimoto_distance(a, b)
                          for a in fps_a for b in fps_b])
    counts, edges = np.histogram(distances, bins=20, range=(0.0, 1.0))
    return TanimotoDistribution(distances=distances, bin_counts=counts,
                                bin_edges=edges)


@dataclass
class MetricReport:
    grouping: str                 # vs_anchor | vs_positive
    n: int
    values: dict[str, float] = field(default_factory=dict)


@dataclass
class EvalResult:
    reports: list[MetricReport]
    validity: float | None
    uniqueness: float | None
    diversity_log10: float | None
    mw_mean: float | None         # None renders as N/A (empty valid pool)
    n_samples: int
    n_excluded_unk: int
    tanimoto: dict[str, TanimotoDistribution]
    alpha_note: str = ""

    def lines(self) -> list[str]:
        out = [f"samples evaluated: {self.n_samples} "
               f"(excluded for UNK: {self.n_excluded_unk})"]
        for rep in self.reports:
            for name, value in rep.values.items():
                out.append(f"{name}-{rep.n} {rep.grouping}: {value:.4f}")
        fmt = lambda v: "N/A" if v is None else f"{v:.4f}"
        out.append(f"validity: {fmt(self.validity)}")
        out.append(f"uniqueness: {fmt(self.uniqueness)}")
        div = self.diversity_log10
        out.append("internal diversity (log10 mean edit distance): "
                   + ("N/A" if div is None else ("-inf" if div == NEG_INF else f"{div:.4f}")))
        out.append(f"mean molecular weight: {fmt(self.mw_mean)}")
        return out


def evaluate_run(
    generated: list[tuple[str, str, str, str]],
    triples: list,
    id_to_smiles: dict[str, str],
    ngram_orders: tuple[int, ...] = (1, 2),
) -> EvalResult:
    """Score generated samples against anchors and positives.

    generated rows are (protein_id, anchor_id, smiles, flags); triples are
    TripleSample-like with .protein/.anchor/.positive. Samples whose flags
    mention unk are excluded everywhere. Positives are aggregated by max
    per sample before averaging.
    """
    positives: dict[tuple[str, str], list[str]] = {}
    for t in triples:
        positives.setdefault((t.protein, t.anchor), []).append(
            id_to_smiles[t.positive])
    rows = [(pid, cid, smi, flags) for pid, cid, smi, flags in generated
            if (pid, cid) in positives]
    if not rows:
        raise ValueError("no overlap between generated pairs and triples")
    n_unk = sum("unk" in flags for _, _, _, flags in rows)
    kept = [(pid, cid, smi) for pid, cid, smi, flags in rows if "unk" not in flags]

    scorers = {"bleu": bleu_n, "gleu": gleu_n, "rouge_f1": rouge_n_f1}
    reports = []
    for grouping in ("vs_anchor", "vs_positive"):
        for n in ngram_orders:
            values = {}
            for name, fn in scorers.items():
                scores = []
                for pid, cid, smi in kept:
                    if grouping == "vs_anchor":
                        scores.append(fn(smi, id_to_smiles[cid], n))
                    else:
                        scores.append(max(fn(smi, pos, n)
                                          for pos in positives[(pid, cid)]))
                values[name] = float(np.mean(scores)) if scores else 0.0
            reports.append(MetricReport(grouping=grouping, n=n, values=values))

    gen_smiles = [smi for _, _, smi in kept]
    validity = validity_rate(gen_smiles) if gen_smiles else None
    uniqueness = uniqueness_rate(gen_smiles) if gen_smiles else None
    valid_pool = [s for s in gen_smiles if chem.check_validity(s)[0]]
    diversity = (internal_diversity(valid_pool)
                 if len(valid_pool) >= 2 else None)
    mw_mean = (float(np.mean([chem.molecular_weight(chem.parse_smiles(s))
                              for s in valid_pool]))
               if valid_pool else None)

    anchor_pool = sorted({id_to_smiles[cid] for _, cid, _ in kept
                          if chem.check_validity(id_to_smiles[cid])[0]})
    positive_pool = sorted({smi for (pid, cid, _) in kept
                            for smi in positives[(pid, cid)]
                            if chem.check_validity(smi)[0]})
    tanimoto = {}
    if valid_pool and anchor_pool:
        tanimoto["generated_vs_anchor"] = tanimoto_distribution(valid_pool, anchor_pool)
    if positive_pool and anchor_pool:
        tanimoto["positive_vs_anchor"] = tanimoto_distribution(positive_pool, anchor_pool)

    return EvalResult(reports=reports, validity=validity, uniqueness=uniqueness,
                      diversity_log10=diversity, mw_mean=mw_mean,
                      n_samples=len(kept), n_excluded_unk=n_unk,
                      tanimoto=tanimoto)
