"""Training stages and generation.

Stage 1 and 2 pretrain two sequence-to-sequence models in opposite
directions (protein-to-compound and compound-to-protein); their encoders
become frozen feature extractors. Stage 3 sums the two encodings per
(protein, anchor) pair, optionally low-pass filters the sum in the Fourier
domain, and trains a fresh decoder to emit the positive compound by teacher
forcing. Generation decodes autoregressively from the same fused memory.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import model as tmodel
from . import spectral
from . import tensorcore as tc
from .dataio import InteractionRecord
from .pcgraph import TripleSample
from .seqrep import BOS, EOS, PAD, UNK, Vocab, build_vocab, decode, encode

log = logging.getLogger(__name__)

VARIANTS = ("sum_only", "fft_lpf")


def worker_count() -> int:
    """Generation fan-out width; REPUR_THREADS caps it, default 1."""
    raw = os.environ.get("REPUR_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 64
    lr: float = 5e-5
    alpha: int = 4
    lpf_mode: str = "both_axes"
    variant: str = "fft_lpf"
    seed: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0 or self.lr <= 0:
            raise ValueError("epochs, batch_size, and lr must be positive")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.lpf_mode not in spectral.LPF_MODES:
            raise ValueError(f"unknown lpf_mode {self.lpf_mode!r}")


@dataclass
class FusedLatent:
    h: np.ndarray                    # (T, d_model)
    t: int
    source_lengths: tuple[int, int]  # (T_p, T_c)


def fuse_latents(z_p: np.ndarray, z_c: np.ndarray) -> FusedLatent:
    """Zero-pad the shorter latent along the sequence axis and sum."""
    z_p = np.asarray(z_p)
    z_c = np.asarray(z_c)
    if z_p.ndim != 2 or z_c.ndim != 2:
        raise ValueError("latents must be rank 2 (T, d)")
    if z_p.shape[1] != z_c.shape[1]:
        raise ValueError(
            f"feature dims disagree: {z_p.shape[1]} vs {z_c.shape[1]}")
    t = max(z_p.shape[0], z_c.shape[0])
    h = np.zeros((t, z_p.shape[1]))
    h[:z_p.shape[0]] += z_p
    h[:z_c.shape[0]] += z_c
    return FusedLatent(h=h, t=t, source_lengths=(z_p.shape[0], z_c.shape[0]))


def fuse_masks(mask_p: np.ndarray, mask_c: np.ndarray) -> np.ndarray:
    """Fused-position attendability: real in either source sequence."""
    t = max(len(mask_p), len(mask_c))
    out = np.zeros(t, dtype=bool)
    out[:len(mask_p)] |= np.asarray(mask_p, dtype=bool)
    out[:len(mask_c)] |= np.asarray(mask_c, dtype=bool)
    return out


@dataclass
class SequenceStore:
    """Id-to-sequence lookup plus tokenization context for one dataset."""

    protein_seqs: dict[str, str]
    compound_smiles: dict[str, str]
    vocab_p: Vocab
    vocab_c: Vocab
    t_p: int
    t_c: int
    _cache: dict[tuple[str, str], np.ndarray] = field(default_factory=dict, repr=False)

    @classmethod
    def from_records(cls, records: list[InteractionRecord], t_p: int, t_c: int,
                     vocab_p: Vocab | None = None, vocab_c: Vocab | None = None,
                     ) -> "SequenceStore":
        proteins = {r.protein_id: r.protein_seq for r in records}
        compounds = {r.compound_id: r.compound_smiles for r in records}
        if vocab_p is None:
            vocab_p = build_vocab(sorted(proteins.values()), "protein")
        if vocab_c is None:
            vocab_c = build_vocab(sorted(compounds.values()), "compound")
        return cls(proteins, compounds, vocab_p, vocab_c, t_p, t_c)

    def protein_tokens(self, protein_id: str) -> np.ndarray:
        key = ("p", protein_id)
        if key not in self._cache:
            seq = encode(self.protein_seqs[protein_id], self.vocab_p, self.t_p)
            self._cache[key] = seq.ids
        return self._cache[key]

    def compound_tokens(self, compound_id: str) -> np.ndarray:
        key = ("c", compound_id)
        if key not in self._cache:
            seq = encode(self.compound_smiles[compound_id], self.vocab_c, self.t_c)
            self._cache[key] = seq.ids
        return self._cache[key]


def _encode_all(bundle: tmodel.ModelBundle, rows: np.ndarray,
                chunk: int = 32) -> np.ndarray:
    """Eval-mode encoder over a (N, T) id matrix, no tape."""
    outs = [tmodel.encode(bundle, rows[i:i + chunk]).data
            for i in range(0, len(rows), chunk)]
    return np.concatenate(outs, axis=0)


def _train_loop(bundle: tmodel.ModelBundle, batches, cfg: TrainConfig,
                rng: np.random.Generator, loss_fn) -> list[float]:
    """Shared epoch loop; batches is a callable yielding index batches."""
    epoch_losses: list[float] = []
    trainable = bundle.trainable()
    for epoch in range(cfg.epochs):
        total, count = 0.0, 0
        for idx in batches(rng):
            with tc.GradTape() as tape:
                loss = loss_fn(idx, rng)
                tc.backward(loss, tape)
            grads = {k: p.grad for k, p in trainable.items() if p.grad is not None}
            tc.adam_step(trainable, grads, bundle.opt_state, cfg.lr)
            for p in trainable.values():
                p.zero_grad()
            total += float(loss.data) * len(idx)
            count += len(idx)
        epoch_losses.append(total / max(count, 1))
        log.info("epoch %d/%d mean loss %.4f", epoch + 1, cfg.epochs, epoch_losses[-1])
    return epoch_losses


def _index_batches(n: int, batch_size: int):
    def gen(rng: np.random.Generator):
        perm = rng.permutation(n)
        for i in range(0, n, batch_size):
            yield perm[i:i + batch_size]
    return gen


def pretrain_direction(
    records: list[InteractionRecord],
    direction: str,
    cfg: TrainConfig,
    store: SequenceStore,
    arch: dict | None = None,
) -> tmodel.ModelBundle:
    """Train a fresh encoder-decoder on (protein, compound) pairs in the
    requested direction; p2c reads proteins and emits compounds, c2p the
    reverse. Deterministic per cfg.seed; checkpoint written when
    cfg.checkpoint_dir is set."""
    if not records:
        raise ValueError("empty dataset")
    if direction not in ("p2c", "c2p"):
        raise ValueError(f"unknown direction {direction!r}")
    prot = np.stack([store.protein_tokens(r.protein_id) for r in records])
    comp = np.stack([store.compound_tokens(r.compound_id) for r in records])
    if direction == "p2c":
        src, tgt = prot, comp
        src_vocab, tgt_vocab = store.vocab_p.size, store.vocab_c.size
        t_src, t_tgt = store.t_p, store.t_c
    else:
        src, tgt = comp, prot
        src_vocab, tgt_vocab = store.vocab_c.size, store.vocab_p.size
        t_src, t_tgt = store.t_c, store.t_p
    mc = tmodel.ModelConfig(src_vocab=src_vocab, tgt_vocab=tgt_vocab,
                            t_src=t_src, t_tgt=t_tgt, **(arch or {}))
    bundle = tmodel.init_bundle(mc, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed + 1)

    def loss_fn(idx, step_rng):
        return tmodel.seq2seq_loss(bundle, src[idx], tgt[idx], train=True, rng=step_rng)

    losses = _train_loop(bundle, _index_batches(len(records), cfg.batch_size),
                         cfg, rng, loss_fn)
    bundle.meta = {"direction": direction, "epoch_losses": losses}
    if cfg.checkpoint_dir:
        path = Path(cfg.checkpoint_dir) / f"pretrain_{direction}.ckpt"
        path.parent.mkdir(parents=True, exist_ok=True)
        tmodel.save_bundle(bundle, path)
        log.info("wrote %s", path)
    return bundle


def build_memory(
    z_p: np.ndarray, z_c: np.ndarray,
    mask_p: np.ndarray, mask_c: np.ndarray,
    variant: str, alpha: int, lpf_mode: str,
) -> tuple[np.ndarray, np.ndarray]:
    """Fused (and optionally low-pass filtered) decoder memory plus its
    attendability mask."""
    fused = fuse_latents(z_p, z_c)
    mask = fuse_masks(mask_p, mask_c)
    if variant == "sum_only":
        return fused.h, mask
    lpf = spectral.make_lpf_mask(fused.h.shape[0], fused.h.shape[1], alpha, lpf_mode)
    filtered, residue = spectral.lowpass_pipeline(fused.h, lpf)
    log.debug("ifft imaginary residue %.3e", residue)
    return filtered, mask


def _frozen_check(bundle: tmodel.ModelBundle, name: str) -> None:
    hot = [k for k, p in bundle.params.items() if p.requires_grad]
    if hot:
        raise ValueError(f"{name} encoder must be frozen; trainable: {hot[:3]}")


def _triple_memories(
    triples: list[TripleSample],
    enc_p: tmodel.ModelBundle,
    enc_c: tmodel.ModelBundle,
    store: SequenceStore,
    cfg: TrainConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Memories and masks for each triple; encoders run once per unique
    protein/anchor since they are frozen."""
    proteins = sorted({t.protein for t in triples})
    anchors = sorted({t.anchor for t in triples})
    prot_rows = np.stack([store.protein_tokens(p) for p in proteins])
    anch_rows = np.stack([store.compound_tokens(c) for c in anchors])
    z_p = dict(zip(proteins, _encode_all(enc_p, prot_rows)))
    z_c = dict(zip(anchors, _encode_all(enc_c, anch_rows)))
    memories, masks = [], []
    pair_cache: dict[tuple[str, str], tuple[np.ndarray, np.ndarray]] = {}
    for t in triples:
        key = (t.protein, t.anchor)
        if key not in pair_cache:
            pair_cache[key] = build_memory(
                z_p[t.protein], z_c[t.anchor],
                store.protein_tokens(t.protein) != PAD,
                store.compound_tokens(t.anchor) != PAD,
                cfg.variant, cfg.alpha, cfg.lpf_mode)
        mem, mask = pair_cache[key]
        memories.append(mem)
        masks.append(mask)
    return np.stack(memories), np.stack(masks)


def train_repurformer(
    triples: list[TripleSample],
    enc_p: tmodel.ModelBundle,
    enc_c: tmodel.ModelBundle,
    cfg: TrainConfig,
    store: SequenceStore,
    arch: dict | None = None,
) -> tmodel.ModelBundle:
    """Stage 3: train a fresh decoder on positive compounds against fused
    (optionally filtered) frozen-encoder memories."""
    if not triples:
        raise ValueError("no triples to train on")
    _frozen_check(enc_p, "protein")
    _frozen_check(enc_c, "compound")
    if enc_p.config.d_model != enc_c.config.d_model:
        raise ValueError("encoder model dims disagree")
    memories, masks = _triple_memories(triples, enc_p, enc_c, store, cfg)
    targets = np.stack([store.compound_tokens(t.positive) for t in triples])

    dec_cfg = tmodel.ModelConfig(
        src_vocab=store.vocab_p.size, tgt_vocab=store.vocab_c.size,
        t_src=memories.shape[1], t_tgt=store.t_c,
        **{**(arch or {}), "d_model": enc_p.config.d_model,
           "n_heads": enc_p.config.n_heads, "d_head": enc_p.config.d_head})
    decoder = tmodel.init_bundle(dec_cfg, seed=cfg.seed, decoder_only=True)
    rng = np.random.default_rng(cfg.seed + 2)

    def loss_fn(idx, step_rng):
        return tmodel.decoder_loss(decoder, tc.Tensor(memories[idx]), masks[idx],
                                   targets[idx], train=True, rng=step_rng)

    losses = _train_loop(decoder, _index_batches(len(triples), cfg.batch_size),
                         cfg, rng, loss_fn)
    decoder.meta = {"variant": cfg.variant, "alpha": cfg.alpha,
                    "lpf_mode": cfg.lpf_mode, "epoch_losses": losses}
    if cfg.checkpoint_dir:
        path = Path(cfg.checkpoint_dir) / "decoder.ckpt"
        path.parent.mkdir(parents=True, exist_ok=True)
        tmodel.save_bundle(decoder, path)
        log.info("wrote %s", path)
    return decoder


def token_accuracy(decoder: tmodel.ModelBundle, memories: np.ndarray,
                   masks: np.ndarray, targets: np.ndarray) -> float:
    """Teacher-forced next-token accuracy over non-PAD targets."""
    logits = tmodel.decode_step(decoder, targets[:, :-1], tc.Tensor(memories), masks)
    pred = logits.data.argmax(axis=-1)
    ref = targets[:, 1:]
    keep = ref != PAD
    return float((pred[keep] == ref[keep]).mean())


@dataclass
class GenResult:
    smiles: str
    unk_present: bool
    truncated: bool

    def flags_str(self) -> str:
        flags = [name for name, on in
                 (("unk", self.unk_present), ("truncated", self.truncated)) if on]
        return ",".join(flags) if flags else "-"


def _decode_ids(decoder: tmodel.ModelBundle, memory: np.ndarray, mask: np.ndarray,
                strategy: str, temperature: float, max_len: int,
                rng: np.random.Generator) -> tuple[list[int], bool]:
    prefix = [BOS]
    memory_t = tc.Tensor(memory[None])
    mask_b = mask[None]
    for _ in range(max_len):
        logits = tmodel.decode_step(decoder, np.array([prefix]), memory_t, mask_b)
        row = logits.data[0, -1].copy()
        row[PAD] = row[BOS] = -np.inf
        if strategy == "greedy":
            nxt = int(row.argmax())
        else:
            z = row / max(temperature, 1e-6)
            z -= z.max()
            p = np.exp(z)
            p /= p.sum()
            nxt = int(rng.choice(len(p), p=p))
        if nxt == EOS:
            return prefix[1:], False
        prefix.append(nxt)
    return prefix[1:], True


def generate(
    decoder: tmodel.ModelBundle,
    enc_p: tmodel.ModelBundle,
    enc_c: tmodel.ModelBundle,
    protein_seq: str,
    anchor_smiles: str,
    store: SequenceStore,
    strategy: str = "greedy",
    temperature: float = 1.0,
    max_len: int | None = None,
    seed: int = 0,
) -> GenResult:
    """Autoregressive decode from BOS until EOS or max_len; greedy decoding
    is deterministic, sampling is deterministic per seed."""
    p_ids = encode(protein_seq, store.vocab_p, store.t_p).ids
    c_ids = encode(anchor_smiles, store.vocab_c, store.t_c).ids
    return _generate_from_ids(decoder, enc_p, enc_c, p_ids, c_ids, store,
                              strategy, temperature, max_len, seed)


def _generate_from_ids(decoder, enc_p, enc_c, p_ids, c_ids, store,
                       strategy, temperature, max_len, seed) -> GenResult:
    if strategy not in ("greedy", "sample"):
        raise ValueError(f"unknown strategy {strategy!r}")
    z_p = tmodel.encode(enc_p, p_ids[None]).data[0]
    z_c = tmodel.encode(enc_c, c_ids[None]).data[0]
    meta = decoder.meta
    memory, mask = build_memory(z_p, z_c, p_ids != PAD, c_ids != PAD,
                                meta.get("variant", "sum_only"),
                                int(meta.get("alpha", 0)),
                                meta.get("lpf_mode", "both_axes"))
    budget = max_len if max_len is not None else store.t_c - 2
    rng = np.random.default_rng(seed)
    ids, truncated = _decode_ids(decoder, memory, mask, strategy, temperature,
                                 budget, rng)
    smiles = decode(np.array(ids + [EOS]), store.vocab_c)
    return GenResult(smiles=smiles, unk_present=UNK in ids, truncated=truncated)


def generate_for_pairs(
    decoder: tmodel.ModelBundle,
    enc_p: tmodel.ModelBundle,
    enc_c: tmodel.ModelBundle,
    pairs: list[tuple[str, str]],
    store: SequenceStore,
    strategy: str = "greedy",
    temperature: float = 1.0,
    max_len: int | None = None,
    seed: int = 0,
) -> list[tuple[str, str, GenResult]]:
    """One decode per (protein_id, anchor_id) pair with per-task seeds;
    fan-out across threads is capped by REPUR_THREADS and results keep the
    input order either way."""

    def task(i: int) -> GenResult:
        pid, cid = pairs[i]
        return _generate_from_ids(
            decoder, enc_p, enc_c,
            store.protein_tokens(pid), store.compound_tokens(cid),
            store, strategy, temperature, max_len, seed + i)

    n = worker_count()
    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(task, range(len(pairs))))
    else:
        results = [task(i) for i in range(len(pairs))]
    return [(pid, cid, res) for (pid, cid), res in zip(pairs, results)]
