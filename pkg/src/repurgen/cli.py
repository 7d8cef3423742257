"""Command-line pipeline: prep, pretrain, train, generate, eval, demo.

Every command records a manifest (full flag set plus outputs) so a run can
be reproduced from its artifacts alone. Exit codes: 0 ok, 2 usage, 3
missing file, 4 malformed data, 5 inconsistent configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import metrics as met
from . import model as tmodel
from . import pcgraph, pipeline
from .chem import SmilesError
from .dataio import (DataFormatError, DatasetConfig, filter_by_degree,
                     filter_by_length, generate_synthetic, load_records,
                     split_no_protein_overlap, write_records)
from .seqrep import build_vocab, load_vocab, save_vocab

log = logging.getLogger("repurgen")

EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_BAD_DATA = 4
EXIT_BAD_CONFIG = 5

GENERATED_HEADER = ("protein_id", "anchor_id", "generated_smiles", "flags")


def _write_manifest(out_dir: Path, command: str, args: argparse.Namespace,
                    outputs: list[str]) -> None:
    payload = {
        "command": command,
        "args": {k: v for k, v in vars(args).items() if k != "func"},
        "outputs": outputs,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _arch_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--layers", type=int, default=4)
    parser.add_argument("--dim", type=int, default=256)
    parser.add_argument("--heads", type=int, default=4)
    parser.add_argument("--head-dim", type=int, default=64)
    parser.add_argument("--ff-dim", type=int, default=None)
    parser.add_argument("--dropout", type=float, default=0.1)


def _arch_dict(ns: argparse.Namespace) -> dict:
    return {"n_layers": ns.layers, "d_model": ns.dim, "n_heads": ns.heads,
            "d_head": ns.head_dim, "d_ff": ns.ff_dim, "dropout": ns.dropout}


# --- prep -----------------------------------------------------------------------

def cmd_prep(ns: argparse.Namespace) -> int:
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = DatasetConfig(min_degree=ns.min_degree, max_degree=ns.max_degree,
                        max_protein_len=ns.max_protein_len,
                        max_compound_len=ns.max_compound_len,
                        split_ratio=ns.split, seed=ns.seed)
    if ns.synthetic:
        n_p, n_c, density = int(ns.synthetic[0]), int(ns.synthetic[1]), float(ns.synthetic[2])
        records = generate_synthetic(n_p, n_c, density, ns.seed)
        log.info("synthetic dataset: %d records", len(records))
    else:
        result = load_records(ns.input)
        records = result.records
        log.info("loaded %d records (%d duplicates, %d dropped)",
                 len(records), result.duplicates, result.dropped)
    records = filter_by_length(records, cfg)
    records = filter_by_degree(records, cfg)
    if not records:
        raise ValueError("no records survive length and degree filtering")

    vocab_p = build_vocab(sorted({r.protein_seq for r in records}), "protein")
    vocab_c = build_vocab(sorted({r.compound_smiles for r in records}), "compound")
    train, test = split_no_protein_overlap(records, cfg)

    graph = pcgraph.build_graph(train)
    triples = pcgraph.mine_triples(graph, max_per_pair=ns.max_per_pair, seed=ns.seed)
    test_graph = pcgraph.build_graph(test)
    test_triples = pcgraph.mine_triples(test_graph, max_per_pair=ns.max_per_pair,
                                        seed=ns.seed)
    stats = pcgraph.triple_stats(triples)

    write_records(records, out / "records.tsv")
    write_records(train, out / "train.tsv")
    write_records(test, out / "test.tsv")
    pcgraph.write_triples(triples, out / "triples.tsv")
    pcgraph.write_triples(test_triples, out / "triples_test.tsv")
    save_vocab(vocab_p, out / "vocab_protein.txt")
    save_vocab(vocab_c, out / "vocab_compound.txt")
    dataset_info = {
        "t_p": cfg.max_protein_len, "t_c": cfg.max_compound_len,
        "records": len(records), "train_records": len(train),
        "test_records": len(test),
        "graph": {"proteins": graph.n_proteins, "compounds": graph.n_compounds,
                  "edges": graph.n_edges},
        "triples": stats.total, "same_protein_triples": stats.same_protein,
        "test_triples": len(test_triples),
        "vocab_sizes": {"protein": vocab_p.size, "compound": vocab_c.size},
    }
    (out / "dataset.json").write_text(json.dumps(dataset_info, indent=2,
                                                 sort_keys=True) + "\n")
    _write_manifest(out, "prep", ns,
                    ["records.tsv", "train.tsv", "test.tsv", "triples.tsv",
                     "triples_test.tsv", "vocab_protein.txt",
                     "vocab_compound.txt", "dataset.json"])
    log.info("prep done: %d train / %d test records, %d triples",
             len(train), len(test), stats.total)
    return 0


def _load_data_dir(data: str | Path):
    data = Path(data)
    for required in ("records.tsv", "train.tsv", "vocab_protein.txt",
                     "vocab_compound.txt", "dataset.json"):
        if not (data / required).exists():
            raise FileNotFoundError(f"{data / required} missing; run prep first")
    info = json.loads((data / "dataset.json").read_text())
    vocab_p = load_vocab(data / "vocab_protein.txt", "protein")
    vocab_c = load_vocab(data / "vocab_compound.txt", "compound")
    all_records = load_records(data / "records.tsv").records
    train = load_records(data / "train.tsv").records
    store = pipeline.SequenceStore.from_records(
        all_records, t_p=info["t_p"], t_c=info["t_c"],
        vocab_p=vocab_p, vocab_c=vocab_c)
    return info, train, store


# --- training stages --------------------------------------------------------------

def cmd_pretrain(ns: argparse.Namespace) -> int:
    _, train, store = _load_data_dir(ns.data)
    cfg = pipeline.TrainConfig(epochs=ns.epochs, batch_size=ns.batch, lr=ns.lr,
                               seed=ns.seed)
    bundle = pipeline.pretrain_direction(train, ns.direction, cfg, store,
                                         arch=_arch_dict(ns))
    out = Path(ns.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmodel.save_bundle(bundle, out)
    _write_manifest(out.parent, f"pretrain-{ns.direction}", ns, [out.name])
    log.info("pretrained %s: final loss %.4f -> %s",
             ns.direction, bundle.meta["epoch_losses"][-1], out)
    return 0


def cmd_train(ns: argparse.Namespace) -> int:
    _, _, store = _load_data_dir(ns.data)
    triples = pcgraph.load_triples(Path(ns.data) / "triples.tsv")
    enc_p = tmodel.load_bundle(ns.enc_p)
    enc_c = tmodel.load_bundle(ns.enc_c)
    if enc_p.meta.get("direction") == "c2p" or enc_c.meta.get("direction") == "p2c":
        raise ValueError("encoder checkpoints swapped: --enc-p wants the p2c "
                         "model, --enc-c the c2p model")
    cfg = pipeline.TrainConfig(epochs=ns.epochs, batch_size=ns.batch, lr=ns.lr,
                               alpha=ns.alpha, lpf_mode=ns.lpf_mode,
                               variant=ns.variant, seed=ns.seed)
    decoder = pipeline.train_repurformer(triples, enc_p, enc_c, cfg, store,
                                         arch=_arch_dict(ns))
    out = Path(ns.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmodel.save_bundle(decoder, out)
    _write_manifest(out.parent, "train", ns, [out.name])
    log.info("decoder trained (%s): final loss %.4f -> %s",
             cfg.variant, decoder.meta["epoch_losses"][-1], out)
    return 0


# --- generation and evaluation ------------------------------------------------------

def _unique_pairs(triples) -> list[tuple[str, str]]:
    seen = set()
    pairs = []
    for t in triples:
        key = (t.protein, t.anchor)
        if key not in seen:
            seen.add(key)
            pairs.append(key)
    return pairs


def cmd_generate(ns: argparse.Namespace) -> int:
    _, _, store = _load_data_dir(ns.data)
    triples = pcgraph.load_triples(ns.triples)
    decoder = tmodel.load_bundle(ns.decoder)
    enc_p = tmodel.load_bundle(ns.enc_p)
    enc_c = tmodel.load_bundle(ns.enc_c)
    pairs = _unique_pairs(triples)
    results = pipeline.generate_for_pairs(
        decoder, enc_p, enc_c, pairs, store,
        strategy=ns.strategy, temperature=ns.temperature, seed=ns.seed)
    out = Path(ns.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = ["\t".join(GENERATED_HEADER)]
    for pid, cid, res in results:
        rows.append(f"{pid}\t{cid}\t{res.smiles}\t{res.flags_str()}")
    out.write_text("\n".join(rows) + "\n", encoding="utf-8")
    _write_manifest(out.parent, "generate", ns, [out.name])
    log.info("generated %d samples -> %s", len(results), out)
    return 0


def load_generated(path: str | Path) -> list[tuple[str, str, str, str]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or tuple(lines[0].split("\t")) != GENERATED_HEADER:
        raise DataFormatError(f"{path}: bad generated header", line=1)
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if raw == "":
            continue
        cols = raw.split("\t")
        if len(cols) != 4:
            raise DataFormatError(f"{path}:{lineno}: expected 4 columns",
                                  line=lineno)
        rows.append(tuple(cols))
    return rows


def _eval_outputs(result: met.EvalResult, out: Path) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    report = "\n".join(result.lines()) + "\n"
    (out / "report.txt").write_text(report, encoding="utf-8")
    tsv = ["metric\tgrouping\tngram\tvalue"]
    for rep in result.reports:
        for name, value in rep.values.items():
            tsv.append(f"{name}\t{rep.grouping}\t{rep.n}\t{value:.6f}")
    for name, value in (("validity", result.validity),
                        ("uniqueness", result.uniqueness),
                        ("diversity_log10", result.diversity_log10),
                        ("mw_mean", result.mw_mean)):
        tsv.append(f"{name}\t-\t-\t" + ("N/A" if value is None else f"{value:.6f}"))
    (out / "metrics.tsv").write_text("\n".join(tsv) + "\n", encoding="utf-8")
    written = ["report.txt", "metrics.tsv"]
    for name, dist in result.tanimoto.items():
        csv_lines = ["bin_low,bin_high,count"]
        for i, count in enumerate(dist.bin_counts):
            csv_lines.append(f"{dist.bin_edges[i]:.2f},{dist.bin_edges[i + 1]:.2f},{count}")
        (out / f"tanimoto_{name}.csv").write_text("\n".join(csv_lines) + "\n")
        written.append(f"tanimoto_{name}.csv")
    return written


def cmd_eval(ns: argparse.Namespace) -> int:
    generated = load_generated(ns.generated)
    triples = pcgraph.load_triples(ns.triples)
    records_path = Path(ns.records) if ns.records else Path(ns.triples).parent / "records.tsv"
    records = load_records(records_path).records
    id_to_smiles = {r.compound_id: r.compound_smiles for r in records}
    orders = tuple(int(x) for x in ns.ngram.split(","))
    result = met.evaluate_run(generated, triples, id_to_smiles, ngram_orders=orders)
    out = Path(ns.out)
    written = _eval_outputs(result, out)
    _write_manifest(out, "eval", ns, written)
    print("\n".join(result.lines()))
    return 0


# --- demo ------------------------------------------------------------------------

DEMO_ARCH = {"n_layers": 2, "d_model": 32, "n_heads": 2, "d_head": 16,
             "d_ff": 64, "dropout": 0.1}


def cmd_demo(ns: argparse.Namespace) -> int:
    """End-to-end loop on a synthetic dataset; small model, one variant."""
    started = time.time()
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    records = generate_synthetic(12, 16, 0.5, ns.seed)
    cfg = DatasetConfig(min_degree=3, max_degree=16, max_protein_len=64,
                        max_compound_len=48, split_ratio=0.8, seed=ns.seed)
    records = filter_by_degree(filter_by_length(records, cfg), cfg)
    train, test = split_no_protein_overlap(records, cfg)
    store = pipeline.SequenceStore.from_records(records, t_p=64, t_c=48)
    graph = pcgraph.build_graph(train)
    triples = pcgraph.mine_triples(graph, max_per_pair=3, seed=ns.seed)
    log.info("demo data: %d train records, %d triples", len(train), len(triples))

    tc_common = dict(batch_size=16, lr=1.5e-3, seed=ns.seed)
    pre_cfg = pipeline.TrainConfig(epochs=10, **tc_common)
    enc_p = pipeline.pretrain_direction(train, "p2c", pre_cfg, store, arch=DEMO_ARCH)
    enc_c = pipeline.pretrain_direction(train, "c2p", pre_cfg, store, arch=DEMO_ARCH)
    enc_p.freeze()
    enc_c.freeze()

    train_cfg = pipeline.TrainConfig(epochs=25, alpha=ns.alpha, variant=ns.variant,
                                     lpf_mode=ns.lpf_mode, **tc_common)
    decoder = pipeline.train_repurformer(triples, enc_p, enc_c, train_cfg, store,
                                         arch=DEMO_ARCH)

    # greedy would collapse on heavily filtered memories; seeded sampling
    # keeps the run reproducible and the uniqueness number meaningful
    pairs = _unique_pairs(triples)
    results = pipeline.generate_for_pairs(decoder, enc_p, enc_c, pairs, store,
                                          strategy="sample", temperature=1.0,
                                          seed=ns.seed)
    gen_rows = [(pid, cid, res.smiles, res.flags_str())
                for pid, cid, res in results]
    rows = ["\t".join(GENERATED_HEADER)]
    rows += [f"{p}\t{c}\t{s}\t{f}" for p, c, s, f in gen_rows]
    (out / "generated.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")

    id_to_smiles = {r.compound_id: r.compound_smiles for r in records}
    result = met.evaluate_run(gen_rows, triples, id_to_smiles)
    written = _eval_outputs(result, out / "eval")
    _write_manifest(out, "demo", ns, ["generated.tsv"] + [f"eval/{w}" for w in written])
    print("\n".join(result.lines()))
    log.info("demo finished in %.1f s", time.time() - started)
    return 0


# --- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repurgen",
        description="Repurposing-aware molecule generation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prep", help="filter, split, and mine a dataset")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="interaction TSV")
    src.add_argument("--synthetic", nargs=3, metavar=("N_P", "N_C", "DENSITY"),
                     help="generate a synthetic dataset instead")
    p.add_argument("--min-degree", type=int, default=10)
    p.add_argument("--max-degree", type=int, default=100)
    p.add_argument("--max-protein-len", type=int, default=64)
    p.add_argument("--max-compound-len", type=int, default=48)
    p.add_argument("--max-per-pair", type=int, default=8)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("pretrain", help="pretrain one direction")
    p.add_argument("--direction", choices=("p2c", "c2p"), required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=5e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _arch_flags(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="train the stage-3 decoder")
    p.add_argument("--data", required=True)
    p.add_argument("--enc-p", required=True)
    p.add_argument("--enc-c", required=True)
    p.add_argument("--variant", choices=pipeline.VARIANTS, default="fft_lpf")
    p.add_argument("--alpha", type=int, default=4)
    p.add_argument("--lpf-mode", choices=("both_axes", "seq_only"),
                   default="both_axes")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=5e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _arch_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="decode compounds for triple pairs")
    p.add_argument("--decoder", required=True)
    p.add_argument("--enc-p", required=True)
    p.add_argument("--enc-c", required=True)
    p.add_argument("--triples", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--strategy", choices=("greedy", "sample"), default="greedy")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="score a generation run")
    p.add_argument("--generated", required=True)
    p.add_argument("--triples", required=True)
    p.add_argument("--records", default=None,
                   help="records TSV (default: records.tsv next to triples)")
    p.add_argument("--ngram", default="1,2")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("demo", help="end-to-end synthetic run")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variant", choices=pipeline.VARIANTS, default="fft_lpf")
    p.add_argument("--alpha", type=int, default=4)
    p.add_argument("--lpf-mode", choices=("both_axes", "seq_only"),
                   default="both_axes")
    p.add_argument("--out", default="demo_run")
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns)
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return EXIT_MISSING_FILE
    except (DataFormatError, SmilesError) as exc:
        log.error("%s", exc)
        return EXIT_BAD_DATA
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
