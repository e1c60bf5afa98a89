"""DNN-free coreset selection: DE-SNE embedding, grid sampling, DDR energy model."""

__version__ = "0.1.0"

from .dataio import (CoresetSelection, DataError, DatasetMatrix, load_dataset, normalize,
                     read_selection, write_selection)
from .de import DEConfig, DEResult, de_optimize, de_optimize_batch
from .distance import DistanceMatrix, InvariantError, pairwise_sq_dist, pairwise_sq_dist_naive
from .embedding import Embedding, LossTrace, TsneConfig, kl_divergence, kl_gradient, run_tsne
from .energy import EnergyCoefficients, TransferScenario, compare, preset, scenario_energy
from .grid import GridSpec, allocate_quotas, grid_partition, grid_sample, sample_cells
from .kernels import MathBackend, get_backend, kexp, klog2, krecip
from .perplexity import AffinityMatrix, SigmaVector, joint_affinities, solve_sigmas

__all__ = [
    "AffinityMatrix", "CoresetSelection", "DEConfig", "DEResult", "DataError", "DatasetMatrix",
    "DistanceMatrix", "Embedding", "EnergyCoefficients", "GridSpec", "InvariantError",
    "LossTrace", "MathBackend", "SigmaVector", "TransferScenario", "TsneConfig",
    "allocate_quotas", "compare", "de_optimize", "de_optimize_batch", "get_backend",
    "grid_partition", "grid_sample", "joint_affinities", "kexp", "kl_divergence",
    "kl_gradient", "klog2", "krecip", "load_dataset", "normalize", "pairwise_sq_dist",
    "pairwise_sq_dist_naive", "preset", "read_selection", "run_tsne", "sample_cells",
    "scenario_energy", "solve_sigmas", "write_selection",
]
