"""Cell-free massive MIMO ISAC beamforming laboratory.

Submodules (import them directly, e.g. ``from cfisac import metrics``):

- ``system``      scenario config, channel sampling, steering vectors
- ``data``        binary dataset format
- ``metrics``     SINR / rate / sensing SNR / joint objective
- ``baselines``   WMMSE and conjugate beamforming baselines
- ``autodiff``    tape-based reverse-mode differentiation on numpy arrays
- ``gnn``         heterogeneous edge-GNN beamformer
- ``training``    unsupervised training loop (Adam + cosine annealing)
- ``experiments`` trade-off sweep, AP scaling, baseline comparison
- ``cli``         command-line entry point
"""

__version__ = "0.1.0"
