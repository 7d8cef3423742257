import math

import numpy as np
import pytest

from repurgen import model as tmodel
from repurgen import tensorcore as tc
from repurgen.seqrep import BOS, EOS, PAD

from test_tensorcore import fd_check

SMALL = dict(n_layers=2, d_model=32, n_heads=2, d_head=16, d_ff=64, dropout=0.0)


def small_bundle(src_vocab=12, tgt_vocab=10, t_src=9, t_tgt=7, seed=0, **over):
    cfg = tmodel.ModelConfig(src_vocab=src_vocab, tgt_vocab=tgt_vocab,
                             t_src=t_src, t_tgt=t_tgt, **{**SMALL, **over})
    return tmodel.init_bundle(cfg, seed=seed)


def batch_ids(rng, batch, t, vocab, lengths=None):
    """Random token rows shaped like encode() output: BOS body EOS PAD..."""
    ids = np.full((batch, t), PAD, dtype=np.int64)
    ids[:, 0] = BOS
    for b in range(batch):
        n = int(lengths[b]) if lengths is not None else int(rng.integers(1, t - 1))
        ids[b, 1:n + 1] = rng.integers(4, vocab, size=n)
        ids[b, n + 1] = EOS
    return ids


class TestConfig:
    def test_head_dim_consistency(self):
        with pytest.raises(ValueError):
            tmodel.ModelConfig(src_vocab=5, tgt_vocab=5, t_src=4, t_tgt=4,
                               n_heads=3, d_head=64, d_model=256)

    def test_default_ff(self):
        cfg = tmodel.ModelConfig(src_vocab=5, tgt_vocab=5, t_src=4, t_tgt=4)
        assert cfg.d_ff == 4 * 256

    def test_paper_scale_defaults(self):
        cfg = tmodel.ModelConfig(src_vocab=5, tgt_vocab=5, t_src=4, t_tgt=4)
        assert (cfg.n_layers, cfg.d_model, cfg.n_heads, cfg.d_head) == (4, 256, 4, 64)

    def test_paper_scale_encoder_output_dim(self):
        cfg = tmodel.ModelConfig(src_vocab=12, tgt_vocab=12, t_src=10, t_tgt=8)
        bundle = tmodel.init_bundle(cfg, seed=0)
        src = batch_ids(np.random.default_rng(0), 2, 10, 12)
        assert tmodel.encode(bundle, src).shape == (2, 10, 256)


class TestEncode:
    def test_output_shape(self):
        bundle = small_bundle()
        rng = np.random.default_rng(0)
        src = batch_ids(rng, 3, 9, bundle.config.src_vocab)
        out = tmodel.encode(bundle, src)
        assert out.shape == (3, 9, bundle.config.d_model)

    def test_batch_permutation(self):
        bundle = small_bundle()
        rng = np.random.default_rng(1)
        src = batch_ids(rng, 4, 9, bundle.config.src_vocab)
        perm = np.array([2, 0, 3, 1])
        out = tmodel.encode(bundle, src).data
        out_perm = tmodel.encode(bundle, src[perm]).data
        assert np.allclose(out[perm], out_perm, atol=1e-12)

    def test_pad_positions_do_not_leak(self):
        # the stored pad mask stays fixed while a PAD slot's id is altered
        bundle = small_bundle()
        rng = np.random.default_rng(2)
        src = batch_ids(rng, 2, 9, bundle.config.src_vocab, lengths=[3, 4])
        pad_mask = src != PAD
        altered = src.copy()
        altered[0, 7] = 5  # PAD slot gets a random real id
        base = tmodel.encode(bundle, src, pad_mask).data
        changed = tmodel.encode(bundle, altered, pad_mask).data
        real = pad_mask[0]
        assert np.abs(base[0][real] - changed[0][real]).max() < 1e-9
        assert np.allclose(base[1], changed[1], atol=1e-12)

    def test_id_out_of_range(self):
        bundle = small_bundle(src_vocab=8)
        bad = np.full((1, 9), 8, dtype=np.int64)
        with pytest.raises(ValueError):
            tmodel.encode(bundle, bad)

    def test_eval_deterministic(self):
        bundle = small_bundle()
        rng = np.random.default_rng(3)
        src = batch_ids(rng, 2, 9, bundle.config.src_vocab)
        a = tmodel.encode(bundle, src).data
        b = tmodel.encode(bundle, src).data
        assert np.array_equal(a, b)

    def test_dropout_changes_training_forward(self):
        bundle = small_bundle(dropout=0.2)
        rng = np.random.default_rng(4)
        src = batch_ids(rng, 2, 9, bundle.config.src_vocab)
        out_train = tmodel.encode(bundle, src, train=True,
                                  rng=np.random.default_rng(0)).data
        out_eval = tmodel.encode(bundle, src).data
        assert not np.allclose(out_train, out_eval)


class TestDecode:
    def _setup(self, seed=0):
        bundle = small_bundle(seed=seed)
        rng = np.random.default_rng(seed + 10)
        src = batch_ids(rng, 2, 9, bundle.config.src_vocab)
        tgt = batch_ids(rng, 2, 7, bundle.config.tgt_vocab)
        memory = tmodel.encode(bundle, src)
        return bundle, src, tgt, memory

    def test_logits_shape(self):
        bundle, src, tgt, memory = self._setup()
        logits = tmodel.decode_step(bundle, tgt[:, :5], memory, src != PAD)
        assert logits.shape == (2, 5, bundle.config.tgt_vocab)

    def test_causality(self):
        bundle, src, tgt, memory = self._setup()
        base = tmodel.decode_step(bundle, tgt, memory, src != PAD).data
        for t in range(1, tgt.shape[1]):
            altered = tgt.copy()
            altered[:, t:] = (altered[:, t:] % 5) + 4
            moved = tmodel.decode_step(bundle, altered, memory, src != PAD).data
            assert np.abs(base[:, :t] - moved[:, :t]).max() < 1e-9

    def test_masked_memory_gets_zero_weight(self):
        bundle, src, tgt, memory = self._setup()
        mask = src != PAD
        mask[:, 5:] = False
        capture = []
        tmodel.decode_step(bundle, tgt, memory, mask, capture=capture)
        for attn in capture:
            assert np.abs(attn[:, :, 5:]).max() == 0.0
            assert np.abs(attn.sum(axis=-1) - 1.0).max() < 1e-9


class TestLoss:
    def test_initial_loss_near_log_vocab(self):
        for seed, vocab in ((0, 10), (1, 30), (2, 50)):
            bundle = small_bundle(tgt_vocab=vocab, seed=seed)
            rng = np.random.default_rng(seed)
            src = batch_ids(rng, 8, 9, bundle.config.src_vocab)
            tgt = batch_ids(rng, 8, 7, vocab)
            loss = float(tmodel.seq2seq_loss(bundle, src, tgt).data)
            assert abs(loss - math.log(vocab)) < 0.2

    def test_loss_nonnegative(self):
        bundle = small_bundle()
        rng = np.random.default_rng(5)
        src = batch_ids(rng, 3, 9, bundle.config.src_vocab)
        tgt = batch_ids(rng, 3, 7, bundle.config.tgt_vocab)
        assert float(tmodel.seq2seq_loss(bundle, src, tgt).data) >= 0.0

    def test_copy_task_overfit(self):
        # two fixed sequences, same vocab both sides; memorization drives the
        # teacher-forced loss under 0.05
        bundle = small_bundle(src_vocab=10, tgt_vocab=10, t_src=7, t_tgt=7, seed=3)
        rng = np.random.default_rng(6)
        src = batch_ids(rng, 2, 7, 10, lengths=[4, 5])
        trainable = bundle.trainable()
        for _ in range(250):
            with tc.GradTape() as tape:
                loss = tmodel.seq2seq_loss(bundle, src, src)
                tc.backward(loss, tape)
            grads = {k: p.grad for k, p in trainable.items() if p.grad is not None}
            tc.adam_step(trainable, grads, bundle.opt_state, lr=3e-3)
            for p in trainable.values():
                p.zero_grad()
        assert float(tmodel.seq2seq_loss(bundle, src, src).data) < 0.05

    def test_gradient_matches_finite_differences_miniature(self):
        cfg_over = dict(n_layers=2, d_model=8, n_heads=2, d_head=4, d_ff=16,
                        dropout=0.0)
        bundle = small_bundle(src_vocab=7, tgt_vocab=7, t_src=5, t_tgt=5,
                              seed=1, **cfg_over)
        rng = np.random.default_rng(7)
        src = batch_ids(rng, 2, 5, 7)
        tgt = batch_ids(rng, 2, 5, 7)
        leaves = list(bundle.params.values())
        fd_check(lambda: tmodel.seq2seq_loss(bundle, src, tgt), leaves,
                 max_coords=3, seed=11)


class TestCrossAttentionExport:
    def test_shape_and_rows(self):
        bundle = small_bundle()
        rng = np.random.default_rng(8)
        src = batch_ids(rng, 1, 9, bundle.config.src_vocab)[0]
        tgt = batch_ids(rng, 1, 7, bundle.config.tgt_vocab)[0]
        attn = tmodel.export_cross_attention(bundle, src, tgt)
        cfg = bundle.config
        assert attn.shape == (cfg.n_layers, cfg.n_heads, 7, 9)
        assert np.abs(attn.sum(axis=-1) - 1.0).max() < 1e-9

    def test_pad_columns_zero(self):
        bundle = small_bundle()
        rng = np.random.default_rng(9)
        src = batch_ids(rng, 1, 9, bundle.config.src_vocab, lengths=[4])[0]
        tgt = batch_ids(rng, 1, 7, bundle.config.tgt_vocab)[0]
        attn = tmodel.export_cross_attention(bundle, src, tgt)
        pad_cols = src == PAD
        assert np.abs(attn[..., pad_cols]).max() == 0.0


class TestBundleIO:
    def test_save_load_roundtrip(self, tmp_path):
        bundle = small_bundle(seed=4)
        bundle.meta = {"direction": "p2c", "epoch_losses": [1.5, 0.9]}
        path = tmp_path / "bundle.ckpt"
        tmodel.save_bundle(bundle, path)
        loaded = tmodel.load_bundle(path)
        assert loaded.config == bundle.config
        assert loaded.meta["direction"] == "p2c"
        for name, p in bundle.params.items():
            assert np.array_equal(loaded.params[name].data, p.data)
            assert not loaded.params[name].requires_grad

    def test_decoder_only_has_no_encoder_params(self):
        cfg = tmodel.ModelConfig(src_vocab=5, tgt_vocab=9, t_src=6, t_tgt=6, **SMALL)
        dec = tmodel.init_bundle(cfg, seed=0, decoder_only=True)
        assert not any(k.startswith(("enc", "src_emb")) for k in dec.params)
        assert "tgt_emb" in dec.params

    def test_init_deterministic(self):
        a = small_bundle(seed=11)
        b = small_bundle(seed=11)
        assert a.param_bytes() == b.param_bytes()
        assert a.param_bytes() != small_bundle(seed=12).param_bytes()
