"""Repurposing-aware target-specific molecule generation.

Library layout:

- dataio: interaction tables, degree filtering, splits, synthetic data
- pcgraph: bipartite graph and 3-hop anchor/positive triple mining
- seqrep: character vocabularies and fixed-length token sequences
- chem: SMILES parsing, validity, molecular weight, fingerprints
- tensorcore: float64 tensors with reverse-mode autodiff and Adam
- spectral: 1D/2D Fourier transforms and low-pass filtering
- model: encoder-decoder transformer on tensorcore
- pipeline: pretraining, fused-latent filtering, decoder training, decoding
- metrics: BLEU/GLEU/ROUGE, validity, uniqueness, diversity, Tanimoto
- cli: prep / pretrain / train / generate / eval / demo commands
"""

__version__ = "0.1.0"
