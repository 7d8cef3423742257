import numpy as np
import pytest

from repurgen import dataio, pcgraph, pipeline

TINY_ARCH = {"n_layers": 2, "d_model": 32, "n_heads": 2, "d_head": 16,
             "d_ff": 64, "dropout": 0.0}


@pytest.fixture(scope="session")
def tiny_arch():
    return dict(TINY_ARCH)


@pytest.fixture(scope="session")
def tiny_dataset():
    """Small synthetic interaction set shared by pipeline-level tests."""
    records = dataio.generate_synthetic(6, 8, 0.7, seed=3)
    store = pipeline.SequenceStore.from_records(records, t_p=64, t_c=48)
    graph = pcgraph.build_graph(records)
    triples = pcgraph.mine_triples(graph, max_per_pair=2, seed=0)
    return records, store, triples


@pytest.fixture(scope="session")
def frozen_encoders(tiny_dataset):
    """Briefly pretrained encoder pair, frozen, for stage-3 tests."""
    records, store, _ = tiny_dataset
    cfg = pipeline.TrainConfig(epochs=2, batch_size=8, lr=1e-3, seed=1)
    enc_p = pipeline.pretrain_direction(records, "p2c", cfg, store, arch=TINY_ARCH)
    enc_c = pipeline.pretrain_direction(records, "c2p", cfg, store, arch=TINY_ARCH)
    enc_p.freeze()
    enc_c.freeze()
    return enc_p, enc_c


def rng(seed=0) -> np.random.Generator:
    return np.random.default_rng(seed)
