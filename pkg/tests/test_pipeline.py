import hashlib

import numpy as np
import pytest

from repurgen import dataio, model as tmodel, pcgraph, pipeline, spectral
from repurgen.seqrep import PAD

from conftest import TINY_ARCH


class TestFuseLatents:
    def test_equal_lengths_plain_sum(self):
        rng = np.random.default_rng(0)
        z_p, z_c = rng.normal(size=(5, 4)), rng.normal(size=(5, 4))
        fused = pipeline.fuse_latents(z_p, z_c)
        assert fused.t == 5
        assert np.array_equal(fused.h, z_p + z_c)

    def test_zero_latent_is_identity(self):
        z_p = np.random.default_rng(1).normal(size=(6, 4))
        fused = pipeline.fuse_latents(z_p, np.zeros((4, 4)))
        assert np.array_equal(fused.h[:4], z_p[:4])
        assert np.array_equal(fused.h, np.vstack([z_p[:4], z_p[4:]]))

    def test_padding_rows_come_from_longer_side(self):
        rng = np.random.default_rng(2)
        z_p, z_c = rng.normal(size=(6, 3)), rng.normal(size=(4, 3))
        fused = pipeline.fuse_latents(z_p, z_c)
        assert fused.t == 6
        assert fused.source_lengths == (6, 4)
        assert np.array_equal(fused.h[4:], z_p[4:])

    def test_feature_mismatch(self):
        with pytest.raises(ValueError):
            pipeline.fuse_latents(np.zeros((3, 4)), np.zeros((3, 5)))

    def test_fuse_masks_is_union(self):
        out = pipeline.fuse_masks(np.array([True, True, False, False]),
                                  np.array([True, False, True]))
        assert out.tolist() == [True, True, True, False]


class TestTrainConfig:
    def test_paper_defaults(self):
        cfg = pipeline.TrainConfig()
        assert (cfg.epochs, cfg.batch_size, cfg.lr) == (20, 64, 5e-5)

    def test_validation(self):
        with pytest.raises(ValueError):
            pipeline.TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            pipeline.TrainConfig(alpha=-1)
        with pytest.raises(ValueError):
            pipeline.TrainConfig(variant="fft_only")
        with pytest.raises(ValueError):
            pipeline.TrainConfig(lpf_mode="corner")


class TestPretrain:
    def test_empty_dataset(self, tiny_dataset):
        _, store, _ = tiny_dataset
        with pytest.raises(ValueError):
            pipeline.pretrain_direction([], "p2c",
                                        pipeline.TrainConfig(), store)

    def test_bad_direction(self, tiny_dataset):
        records, store, _ = tiny_dataset
        with pytest.raises(ValueError):
            pipeline.pretrain_direction(records, "c2c",
                                        pipeline.TrainConfig(), store)

    def test_same_seed_identical_checkpoints(self, tiny_dataset, tmp_path):
        records, store, _ = tiny_dataset
        blobs = []
        for run in range(2):
            cfg = pipeline.TrainConfig(epochs=2, batch_size=8, lr=1e-3, seed=7,
                                       checkpoint_dir=str(tmp_path / f"run{run}"))
            pipeline.pretrain_direction(records[:10], "p2c", cfg, store,
                                        arch=TINY_ARCH)
            blobs.append((tmp_path / f"run{run}" / "pretrain_p2c.ckpt").read_bytes())
        assert blobs[0] == blobs[1]

    def test_initial_loss_near_log_vocab(self, tiny_dataset):
        records, store, _ = tiny_dataset
        cfg = pipeline.TrainConfig(epochs=1, batch_size=8, lr=1e-9, seed=3)
        bundle = pipeline.pretrain_direction(records, "c2p", cfg, store,
                                             arch=TINY_ARCH)
        assert bundle.meta["epoch_losses"][0] == pytest.approx(
            np.log(store.vocab_p.size), abs=0.2)

    def test_overfits_toy_set_monotonically(self):
        # 8 pairs, full-batch, 300 steps: epoch losses fall monotonically
        # until they cross 0.1
        records = dataio.generate_synthetic(4, 4, 0.6, seed=5)[:8]
        assert len(records) == 8
        store = pipeline.SequenceStore.from_records(records, t_p=64, t_c=48)
        cfg = pipeline.TrainConfig(epochs=300, batch_size=8, lr=2e-3, seed=0)
        bundle = pipeline.pretrain_direction(records, "p2c", cfg, store,
                                             arch=TINY_ARCH)
        losses = bundle.meta["epoch_losses"]
        crossing = next((i for i, x in enumerate(losses) if x < 0.1), None)
        assert crossing is not None, f"never reached 0.1: final {losses[-1]:.3f}"
        for i in range(crossing):
            assert losses[i + 1] <= losses[i] + 1e-9


class TestTrainRepurformer:
    def test_requires_frozen_encoders(self, tiny_dataset, tiny_arch):
        records, store, triples = tiny_dataset
        cfg = pipeline.TrainConfig(epochs=1, batch_size=8, lr=1e-3, seed=1)
        hot = pipeline.pretrain_direction(records, "p2c", cfg, store, arch=tiny_arch)
        cold = pipeline.pretrain_direction(records, "c2p", cfg, store, arch=tiny_arch)
        cold.freeze()
        with pytest.raises(ValueError):
            pipeline.train_repurformer(triples[:4], hot, cold, cfg, store,
                                       arch=tiny_arch)

    def test_encoders_bit_identical_after_training(self, tiny_dataset,
                                                   frozen_encoders, tiny_arch):
        _, store, triples = tiny_dataset
        enc_p, enc_c = frozen_encoders
        before = (hashlib.sha256(enc_p.param_bytes()).hexdigest(),
                  hashlib.sha256(enc_c.param_bytes()).hexdigest())
        cfg = pipeline.TrainConfig(epochs=3, batch_size=8, lr=1e-3,
                                   variant="fft_lpf", alpha=4, seed=2)
        pipeline.train_repurformer(triples[:8], enc_p, enc_c, cfg, store,
                                   arch=tiny_arch)
        after = (hashlib.sha256(enc_p.param_bytes()).hexdigest(),
                 hashlib.sha256(enc_c.param_bytes()).hexdigest())
        assert before == after

    def test_sum_only_bypasses_spectral(self, tiny_dataset, frozen_encoders):
        # memory equals a hand-composed encode/fuse forward, no filtering
        _, store, triples = tiny_dataset
        enc_p, enc_c = frozen_encoders
        cfg = pipeline.TrainConfig(variant="sum_only", seed=0)
        memories, masks = pipeline._triple_memories(
            triples[:5], enc_p, enc_c, store, cfg)
        for i, t in enumerate(triples[:5]):
            p_ids = store.protein_tokens(t.protein)
            c_ids = store.compound_tokens(t.anchor)
            z_p = tmodel.encode(enc_p, p_ids[None]).data[0]
            z_c = tmodel.encode(enc_c, c_ids[None]).data[0]
            t_max = max(z_p.shape[0], z_c.shape[0])
            by_hand = np.zeros((t_max, z_p.shape[1]))
            by_hand[:z_p.shape[0]] += z_p
            by_hand[:z_c.shape[0]] += z_c
            assert np.array_equal(memories[i], by_hand)
            assert masks[i].tolist() == pipeline.fuse_masks(
                p_ids != PAD, c_ids != PAD).tolist()

    def test_allpass_seq_only_filter_on_even_latent_matches_sum(self):
        # a latent even in both axes has a purely real 2D spectrum, so with
        # an all-pass sequence-axis mask the filter chain is the identity
        rng = np.random.default_rng(3)
        t, d = 12, 8
        g = rng.normal(size=(t, d))
        even = g + g[(-np.arange(t)) % t] + g[:, (-np.arange(d)) % d] \
            + g[(-np.arange(t)) % t][:, (-np.arange(d)) % d]
        mask_p = np.ones(t, dtype=bool)
        mask_c = np.ones(t, dtype=bool)
        plain, _ = pipeline.build_memory(even, np.zeros((t, d)), mask_p, mask_c,
                                         "sum_only", 0, "both_axes")
        filtered, _ = pipeline.build_memory(even, np.zeros((t, d)), mask_p,
                                            mask_c, "fft_lpf", t - 1, "seq_only")
        assert np.abs(filtered - plain).max() < 1e-6

    def test_fft_variant_changes_memory(self, tiny_dataset, frozen_encoders):
        _, store, triples = tiny_dataset
        enc_p, enc_c = frozen_encoders
        sum_cfg = pipeline.TrainConfig(variant="sum_only", seed=0)
        lpf_cfg = pipeline.TrainConfig(variant="fft_lpf", alpha=2, seed=0)
        m_sum, _ = pipeline._triple_memories(triples[:2], enc_p, enc_c, store, sum_cfg)
        m_lpf, _ = pipeline._triple_memories(triples[:2], enc_p, enc_c, store, lpf_cfg)
        assert not np.allclose(m_sum, m_lpf)

    def test_empty_triples(self, tiny_dataset, frozen_encoders, tiny_arch):
        _, store, _ = tiny_dataset
        enc_p, enc_c = frozen_encoders
        with pytest.raises(ValueError):
            pipeline.train_repurformer([], enc_p, enc_c,
                                       pipeline.TrainConfig(), store, arch=tiny_arch)

    def test_stage3_deterministic(self, tiny_dataset, frozen_encoders, tiny_arch):
        _, store, triples = tiny_dataset
        runs = []
        for _ in range(2):
            cfg = pipeline.TrainConfig(epochs=3, batch_size=8, lr=1e-3,
                                       variant="fft_lpf", alpha=4, seed=6)
            dec = pipeline.train_repurformer(triples[:8], *frozen_encoders,
                                             cfg, store, arch=tiny_arch)
            runs.append((dec.meta["epoch_losses"], dec.param_bytes()))
        assert runs[0] == runs[1]


@pytest.fixture(scope="module")
def overfit_single(tiny_dataset, frozen_encoders):
    """Decoder memorizing one triple; used by the generation probes."""
    _, store, triples = tiny_dataset
    enc_p, enc_c = frozen_encoders
    cfg = pipeline.TrainConfig(epochs=250, batch_size=1, lr=3e-3,
                               variant="sum_only", seed=4)
    decoder = pipeline.train_repurformer(triples[:1], enc_p, enc_c, cfg, store,
                                         arch=TINY_ARCH)
    return decoder, triples[0]


class TestGenerate:
    def test_greedy_deterministic(self, tiny_dataset, frozen_encoders,
                                  overfit_single):
        records, store, _ = tiny_dataset
        enc_p, enc_c = frozen_encoders
        decoder, _ = overfit_single
        r = records[0]
        a = pipeline.generate(decoder, enc_p, enc_c, r.protein_seq,
                              r.compound_smiles, store, strategy="greedy")
        b = pipeline.generate(decoder, enc_p, enc_c, r.protein_seq,
                              r.compound_smiles, store, strategy="greedy")
        assert a == b

    def test_sampling_deterministic_per_seed(self, tiny_dataset,
                                             frozen_encoders, overfit_single):
        records, store, _ = tiny_dataset
        enc_p, enc_c = frozen_encoders
        decoder, _ = overfit_single
        r = records[0]
        a = pipeline.generate(decoder, enc_p, enc_c, r.protein_seq,
                              r.compound_smiles, store, strategy="sample",
                              temperature=1.0, seed=9)
        b = pipeline.generate(decoder, enc_p, enc_c, r.protein_seq,
                              r.compound_smiles, store, strategy="sample",
                              temperature=1.0, seed=9)
        assert a == b

    def test_memorization_probe(self, tiny_dataset, frozen_encoders,
                                overfit_single):
        _, store, _ = tiny_dataset
        enc_p, enc_c = frozen_encoders
        decoder, triple = overfit_single
        out = pipeline.generate(decoder, enc_p, enc_c,
                                store.protein_seqs[triple.protein],
                                store.compound_smiles[triple.anchor],
                                store, strategy="greedy")
        assert out.smiles == store.compound_smiles[triple.positive]
        assert not out.truncated

    def test_truncation_flag(self, tiny_dataset, frozen_encoders, overfit_single):
        _, store, _ = tiny_dataset
        enc_p, enc_c = frozen_encoders
        decoder, triple = overfit_single
        out = pipeline.generate(decoder, enc_p, enc_c,
                                store.protein_seqs[triple.protein],
                                store.compound_smiles[triple.anchor],
                                store, strategy="greedy", max_len=3)
        assert out.truncated
        assert len(out.smiles) == 3

    def test_bad_strategy(self, tiny_dataset, frozen_encoders, overfit_single):
        records, store, _ = tiny_dataset
        enc_p, enc_c = frozen_encoders
        decoder, _ = overfit_single
        with pytest.raises(ValueError):
            pipeline.generate(decoder, enc_p, enc_c, records[0].protein_seq,
                              records[0].compound_smiles, store,
                              strategy="beam")

    def test_thread_fanout_matches_serial(self, tiny_dataset, frozen_encoders,
                                          overfit_single, monkeypatch):
        records, store, triples = tiny_dataset
        enc_p, enc_c = frozen_encoders
        decoder, _ = overfit_single
        pairs = [(t.protein, t.anchor) for t in triples[:4]]
        serial = pipeline.generate_for_pairs(decoder, enc_p, enc_c, pairs,
                                             store, strategy="sample", seed=3)
        monkeypatch.setenv("REPUR_THREADS", "3")
        threaded = pipeline.generate_for_pairs(decoder, enc_p, enc_c, pairs,
                                               store, strategy="sample", seed=3)
        assert serial == threaded


def test_worker_count(monkeypatch):
    monkeypatch.delenv("REPUR_THREADS", raising=False)
    assert pipeline.worker_count() == 1
    monkeypatch.setenv("REPUR_THREADS", "4")
    assert pipeline.worker_count() == 4
    monkeypatch.setenv("REPUR_THREADS", "junk")
    assert pipeline.worker_count() == 1
