"""Collective non-negative factorizations for community detection in multiplex networks."""

__version__ = "0.1.0"

from .core import (
    LayerMatrix,
    MultiplexNetwork,
    SolverConfig,
    init_factor,
    natural_gradient,
    pos_neg_split,
    validate_layer,
)
from .evaluation import (
    AnnotationSet,
    adjusted_rand_index,
    average_redundancy,
    nmi,
    purity,
    rand_index,
    redundancy,
)
from .factorize import FactorizeMethod, factorize, objective_single
from .fuse import (
    ClusterAssignment,
    FusionResult,
    collective_objective,
    hard_clustering,
    merged_baseline,
    nf_cce,
    projection_distance_sq,
    run_method,
)
from .synth import PlantedSpec, generate_layer, generate_synth_c, generate_synth_n

__all__ = [
    "LayerMatrix",
    "MultiplexNetwork",
    "SolverConfig",
    "init_factor",
    "natural_gradient",
    "pos_neg_split",
    "validate_layer",
    "AnnotationSet",
    "adjusted_rand_index",
    "average_redundancy",
    "nmi",
    "purity",
    "rand_index",
    "redundancy",
    "ClusterAssignment",
    "FusionResult",
    "collective_objective",
    "hard_clustering",
    "merged_baseline",
    "nf_cce",
    "projection_distance_sq",
    "run_method",
    "FactorizeMethod",
    "factorize",
    "objective_single",
    "PlantedSpec",
    "generate_layer",
    "generate_synth_c",
    "generate_synth_n",
]
