"""Encoder-decoder transformer built on the tensorcore ops.

The same architecture serves both pretraining directions and, in
decoder-only form, the stage-3 compound decoder that cross-attends over an
externally supplied memory. Multi-head attention splits the model dimension
into contiguous per-head column blocks so every intermediate stays rank 3.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import tensorcore as tc
from .seqrep import PAD

MASK_BIAS = -1e30  # additive attention bias; exp() underflows to exactly 0


@dataclass
class ModelConfig:
    src_vocab: int
    tgt_vocab: int
    t_src: int
    t_tgt: int
    n_layers: int = 4
    d_model: int = 256
    n_heads: int = 4
    d_head: int = 64
    d_ff: int | None = None
    dropout: float = 0.1

    def __post_init__(self):
        if self.d_ff is None:
            self.d_ff = 4 * self.d_model
        if self.n_heads * self.d_head != self.d_model:
            raise ValueError(
                f"n_heads*d_head = {self.n_heads * self.d_head} != d_model {self.d_model}")
        for name in ("src_vocab", "tgt_vocab", "t_src", "t_tgt",
                     "n_layers", "d_model", "n_heads", "d_head", "d_ff"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class ModelBundle:
    config: ModelConfig
    params: dict[str, tc.Tensor]
    opt_state: tc.AdamState = field(default_factory=tc.AdamState)
    meta: dict = field(default_factory=dict)

    def trainable(self) -> dict[str, tc.Tensor]:
        return {k: v for k, v in self.params.items() if v.requires_grad}

    def freeze(self) -> None:
        for p in self.params.values():
            p.requires_grad = False
            p.grad = None

    def param_bytes(self) -> bytes:
        return b"".join(p.data.astype("<f8").tobytes() for p in self.params.values())


def sinusoidal_encoding(length: int, d_model: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    dim = np.arange(d_model)[None, :]
    angle = pos / np.power(10000.0, (2 * (dim // 2)) / d_model)
    enc = np.where(dim % 2 == 0, np.sin(angle), np.cos(angle))
    return enc.astype(np.float64)


def _init_matrix(rng: np.random.Generator, shape: tuple[int, ...], d_model: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(d_model)
    return rng.uniform(-bound, bound, size=shape)


def init_bundle(cfg: ModelConfig, seed: int, decoder_only: bool = False) -> ModelBundle:
    """Fresh parameters, deterministic per seed; matrices uniform in
    +-1/sqrt(d_model), biases zero, layer-norm gains one."""
    rng = np.random.default_rng(seed)
    d, f = cfg.d_model, cfg.d_ff
    params: dict[str, tc.Tensor] = {}

    def mat(name: str, shape: tuple[int, ...]) -> None:
        params[name] = tc.Tensor(_init_matrix(rng, shape, d), requires_grad=True)

    def zeros(name: str, shape: tuple[int, ...]) -> None:
        params[name] = tc.Tensor(np.zeros(shape), requires_grad=True)

    def ones(name: str, shape: tuple[int, ...]) -> None:
        params[name] = tc.Tensor(np.ones(shape), requires_grad=True)

    def attention_block(prefix: str) -> None:
        for part in ("wq", "wk", "wv", "wo"):
            mat(f"{prefix}.{part}", (d, d))
        for part in ("bq", "bk", "bv", "bo"):
            zeros(f"{prefix}.{part}", (d,))

    def ff_block(prefix: str) -> None:
        mat(f"{prefix}.w1", (d, f))
        zeros(f"{prefix}.b1", (f,))
        mat(f"{prefix}.w2", (f, d))
        zeros(f"{prefix}.b2", (d,))

    def ln_block(prefix: str) -> None:
        ones(f"{prefix}.g", (d,))
        zeros(f"{prefix}.b", (d,))

    if not decoder_only:
        mat("src_emb", (cfg.src_vocab, d))
        for i in range(cfg.n_layers):
            attention_block(f"enc{i}.attn")
            ln_block(f"enc{i}.ln1")
            ff_block(f"enc{i}.ff")
            ln_block(f"enc{i}.ln2")
    mat("tgt_emb", (cfg.tgt_vocab, d))
    for i in range(cfg.n_layers):
        attention_block(f"dec{i}.self")
        ln_block(f"dec{i}.ln1")
        attention_block(f"dec{i}.cross")
        ln_block(f"dec{i}.ln2")
        ff_block(f"dec{i}.ff")
        ln_block(f"dec{i}.ln3")
    # smaller bound on the vocabulary projection keeps initial logits near
    # zero, so the untrained loss sits at ln(vocab) as the trainer expects
    params["out_w"] = tc.Tensor(rng.uniform(-1.0 / d, 1.0 / d, size=(d, cfg.tgt_vocab)),
                                requires_grad=True)
    zeros("out_b", (cfg.tgt_vocab,))
    return ModelBundle(config=cfg, params=params)


# --- functional forward pieces -------------------------------------------------

def _linear(x: tc.Tensor, w: tc.Tensor, b: tc.Tensor) -> tc.Tensor:
    return tc.add(tc.matmul(x, w), b)


def _dropout(x: tc.Tensor, p: float, train: bool, rng: np.random.Generator | None) -> tc.Tensor:
    if not train or p <= 0.0:
        return x
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return tc.mul(x, tc.Tensor(keep))


def _layer_norm_affine(params, prefix: str, x: tc.Tensor) -> tc.Tensor:
    normed = tc.layer_norm(x, axis=-1)
    return tc.add(tc.mul(normed, params[f"{prefix}.g"]), params[f"{prefix}.b"])


def _mha(params, prefix: str, q_in: tc.Tensor, kv_in: tc.Tensor,
         bias: np.ndarray | None, cfg: ModelConfig,
         capture: list | None = None) -> tc.Tensor:
    q = _linear(q_in, params[f"{prefix}.wq"], params[f"{prefix}.bq"])
    k = _linear(kv_in, params[f"{prefix}.wk"], params[f"{prefix}.bk"])
    v = _linear(kv_in, params[f"{prefix}.wv"], params[f"{prefix}.bv"])
    bias_t = tc.Tensor(bias) if bias is not None else None
    heads = []
    for h in range(cfg.n_heads):
        cols = (slice(None), slice(None), slice(h * cfg.d_head, (h + 1) * cfg.d_head))
        qh, kh, vh = tc.slice_(q, cols), tc.slice_(k, cols), tc.slice_(v, cols)
        scores = tc.scale(tc.matmul(qh, tc.transpose(kh, (0, 2, 1))),
                          1.0 / math.sqrt(cfg.d_head))
        if bias_t is not None:
            scores = tc.add(scores, bias_t)
        attn = tc.softmax(scores, axis=-1)
        if capture is not None:
            capture.append(attn.data)
        heads.append(tc.matmul(attn, vh))
    merged = tc.concat(heads, axis=2)
    return _linear(merged, params[f"{prefix}.wo"], params[f"{prefix}.bo"])


def _ff(params, prefix: str, x: tc.Tensor) -> tc.Tensor:
    hidden = tc.relu(_linear(x, params[f"{prefix}.w1"], params[f"{prefix}.b1"]))
    return _linear(hidden, params[f"{prefix}.w2"], params[f"{prefix}.b2"])


def _embed(params, table: str, ids: np.ndarray, cfg: ModelConfig,
           train: bool, rng) -> tc.Tensor:
    emb = tc.scale(tc.embedding_lookup(params[table], ids), math.sqrt(cfg.d_model))
    pe = tc.Tensor(sinusoidal_encoding(ids.shape[1], cfg.d_model))
    return _dropout(tc.add(emb, pe), cfg.dropout, train, rng)


def encode(bundle: ModelBundle, src_ids: np.ndarray,
           pad_mask: np.ndarray | None = None,
           train: bool = False, rng: np.random.Generator | None = None) -> tc.Tensor:
    """Padding-masked encoder stack; (B, T_src) ids to (B, T_src, d_model).

    pad_mask (True = real token) defaults to ids != PAD; passing the stored
    token-sequence mask keeps masking independent of the id values.
    """
    cfg = bundle.config
    src_ids = np.asarray(src_ids)
    if src_ids.ndim != 2:
        raise ValueError(f"expected (batch, T) ids, got {src_ids.shape}")
    if src_ids.max(initial=0) >= cfg.src_vocab:
        raise ValueError(f"source id {src_ids.max()} outside vocab {cfg.src_vocab}")
    p = bundle.params
    x = _embed(p, "src_emb", src_ids, cfg, train, rng)
    if pad_mask is None:
        pad_mask = src_ids != PAD
    bias = np.where(np.asarray(pad_mask)[:, None, :], 0.0, MASK_BIAS)
    for i in range(cfg.n_layers):
        a = _mha(p, f"enc{i}.attn", x, x, bias, cfg)
        x = _layer_norm_affine(p, f"enc{i}.ln1", tc.add(x, _dropout(a, cfg.dropout, train, rng)))
        ff = _ff(p, f"enc{i}.ff", x)
        x = _layer_norm_affine(p, f"enc{i}.ln2", tc.add(x, _dropout(ff, cfg.dropout, train, rng)))
    return x


def _causal_bias(t: int) -> np.ndarray:
    return np.triu(np.full((1, t, t), MASK_BIAS), k=1)


def decode_step(bundle: ModelBundle, tgt_prefix: np.ndarray, memory: tc.Tensor,
                memory_mask: np.ndarray, tgt_pad_mask: np.ndarray | None = None,
                train: bool = False, rng: np.random.Generator | None = None,
                capture: list | None = None) -> tc.Tensor:
    """Causal decoder over the prefix with cross-attention into memory.

    tgt_prefix: (B, t) ids; memory: (B, T_mem, d_model); memory_mask: (B,
    T_mem) boolean, True = attendable. Returns (B, t, tgt_vocab) logits.
    """
    cfg = bundle.config
    tgt_prefix = np.asarray(tgt_prefix)
    if tgt_prefix.ndim != 2 or tgt_prefix.shape[1] < 1:
        raise ValueError(f"bad prefix shape {tgt_prefix.shape}")
    if tgt_prefix.max(initial=0) >= cfg.tgt_vocab:
        raise ValueError(f"target id {tgt_prefix.max()} outside vocab {cfg.tgt_vocab}")
    p = bundle.params
    t = tgt_prefix.shape[1]
    x = _embed(p, "tgt_emb", tgt_prefix, cfg, train, rng)
    if tgt_pad_mask is None:
        tgt_pad_mask = tgt_prefix != PAD
    pad_bias = np.where(np.asarray(tgt_pad_mask)[:, None, :], 0.0, MASK_BIAS)
    self_bias = _causal_bias(t) + pad_bias
    cross_bias = np.where(np.asarray(memory_mask)[:, None, :], 0.0, MASK_BIAS)
    for i in range(cfg.n_layers):
        a = _mha(p, f"dec{i}.self", x, x, self_bias, cfg)
        x = _layer_norm_affine(p, f"dec{i}.ln1", tc.add(x, _dropout(a, cfg.dropout, train, rng)))
        c = _mha(p, f"dec{i}.cross", x, memory, cross_bias, cfg, capture=capture)
        x = _layer_norm_affine(p, f"dec{i}.ln2", tc.add(x, _dropout(c, cfg.dropout, train, rng)))
        ff = _ff(p, f"dec{i}.ff", x)
        x = _layer_norm_affine(p, f"dec{i}.ln3", tc.add(x, _dropout(ff, cfg.dropout, train, rng)))
    return _linear(x, p["out_w"], p["out_b"])


def seq2seq_loss(bundle: ModelBundle, src_ids: np.ndarray, tgt_ids: np.ndarray,
                 train: bool = False, rng: np.random.Generator | None = None) -> tc.Tensor:
    """Teacher-forced mean NLL of tgt[1:] given tgt[:-1]; PAD ignored."""
    src_ids = np.asarray(src_ids)
    tgt_ids = np.asarray(tgt_ids)
    if src_ids.shape[0] != tgt_ids.shape[0]:
        raise ValueError(f"batch mismatch {src_ids.shape} vs {tgt_ids.shape}")
    memory = encode(bundle, src_ids, train=train, rng=rng)
    logits = decode_step(bundle, tgt_ids[:, :-1], memory, src_ids != PAD,
                         train=train, rng=rng)
    return tc.cross_entropy(logits, tgt_ids[:, 1:], ignore_index=PAD)


def decoder_loss(bundle: ModelBundle, memory: tc.Tensor, memory_mask: np.ndarray,
                 tgt_ids: np.ndarray, train: bool = False,
                 rng: np.random.Generator | None = None) -> tc.Tensor:
    """Teacher-forced loss against an externally built memory."""
    tgt_ids = np.asarray(tgt_ids)
    logits = decode_step(bundle, tgt_ids[:, :-1], memory, memory_mask,
                         train=train, rng=rng)
    return tc.cross_entropy(logits, tgt_ids[:, 1:], ignore_index=PAD)


def export_cross_attention(bundle: ModelBundle, src_ids: np.ndarray,
                           tgt_ids: np.ndarray) -> np.ndarray:
    """Eval-mode cross-attention weights, shape (layers, heads, T_tgt, T_src)
    for a single (src, tgt) pair."""
    src = np.atleast_2d(np.asarray(src_ids))
    tgt = np.atleast_2d(np.asarray(tgt_ids))
    memory = encode(bundle, src)
    capture: list[np.ndarray] = []
    decode_step(bundle, tgt, memory, src != PAD, capture=capture)
    cfg = bundle.config
    stacked = np.stack(capture)  # (layers*heads, B=1, T_tgt, T_src)
    return stacked[:, 0].reshape(cfg.n_layers, cfg.n_heads, tgt.shape[1], src.shape[1])


# --- persistence ----------------------------------------------------------------

def save_bundle(bundle: ModelBundle, path: str | Path) -> None:
    meta = {"config": asdict(bundle.config),
            "decoder_only": "src_emb" not in bundle.params,
            **bundle.meta}
    tc.save_checkpoint(path, bundle.params, meta=meta)


def load_bundle(path: str | Path, trainable: bool = False) -> ModelBundle:
    arrays, meta = tc.load_checkpoint(path)
    cfg = ModelConfig(**meta.pop("config"))
    meta.pop("decoder_only", None)
    params = {name: tc.Tensor(arr, requires_grad=trainable) for name, arr in arrays.items()}
    return ModelBundle(config=cfg, params=params, meta=meta)
