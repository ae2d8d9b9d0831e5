"""Sparse coding and dictionary learning for SPD matrices with
Jeffrey and Stein divergence kernels."""

__version__ = "0.1.0"

from .coding import SolverConfig, SparseCode, classify, kfss, oracle_solve, residual_errors
from .data import Dataset, Dictionary, load_dataset, load_dictionary, save_dataset, save_dictionary
from .descriptors import block_descriptors, cov_descriptor, joint_covariance, texture_features
from .divergences import (
    airm_dist,
    exp_map,
    geo_mean_airm,
    geo_mean_j,
    grad_j,
    grad_s,
    j_div,
    karcher_mean,
    log_map,
    riccati_solve,
    s_div,
)
from .kernels import KernelKind, KernelSpec, cpd_form, cross_gram, gram, validate_beta
from .learning import LearnConfig, LearnTrace, kmeans_init, learn, update_atom_j, update_atom_s
from .spd import SpdMatrix, nearest_spd
from .synth import SynthSpec, gen_synth

__all__ = [
    "Dataset", "Dictionary", "KernelKind", "KernelSpec", "LearnConfig", "LearnTrace",
    "SolverConfig", "SparseCode", "SpdMatrix", "SynthSpec",
    "airm_dist", "block_descriptors", "classify", "cov_descriptor", "cpd_form", "cross_gram",
    "exp_map", "gen_synth", "geo_mean_airm", "geo_mean_j", "grad_j", "grad_s", "gram",
    "j_div", "joint_covariance", "karcher_mean", "kfss", "kmeans_init", "learn",
    "load_dataset", "load_dictionary", "log_map", "nearest_spd", "oracle_solve",
    "residual_errors", "riccati_solve", "s_div", "save_dataset", "save_dictionary",
    "texture_features", "update_atom_j", "update_atom_s", "validate_beta",
]
