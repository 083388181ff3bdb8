"""fklab: a Monte Carlo and analytic laboratory for the critical q=4
random-cluster model, its loop and height-function representation, and
the Gaussian free field predictions for its correlation observables."""

__version__ = "0.1.0"

from .analysis import (
    ExponentFit,
    ScalingExponents,
    ScalingSeries,
    fit_exponent,
    quasi_mult_audit,
    scaling_relations,
)
from .gffpredict import (
    GffPrediction,
    gff_characteristic,
    log_kernel,
    predict_four_ball,
    predict_two_ball,
)
from .heightfield import HeightField, OrientedLoops, height, orient, test_integral
from .lattice import BoundarySpec, Domain, EdgeId, MedialGraph, dual_edge
from .loops import Loop, LoopSet, extract_loops, loop_tail_event, surround_count
from .observables import (
    ArmSpec,
    EstimatorResult,
    TestFunction,
    estimate_AF,
    estimate_cdelta,
    estimate_delta,
    estimate_pi1,
    estimate_pi2k,
    estimate_tilde_pi1,
    estimate_tilde_pi2_and_delta,
    estimate_two_point,
    potts_correlation,
)
from .sampler import (
    CRITICAL,
    BruteForceTable,
    ChainStats,
    FkConfig,
    Graph,
    ModelParams,
    PottsConfig,
    brute_force_distribution,
    es_update,
    potts_from_fk,
    sample_chain,
    sample_chain_pool,
)

__all__ = [
    "__version__",
    "ArmSpec",
    "BoundarySpec",
    "BruteForceTable",
    "CRITICAL",
    "ChainStats",
    "Domain",
    "EdgeId",
    "EstimatorResult",
    "ExponentFit",
    "FkConfig",
    "GffPrediction",
    "Graph",
    "HeightField",
    "Loop",
    "LoopSet",
    "MedialGraph",
    "ModelParams",
    "OrientedLoops",
    "PottsConfig",
    "ScalingExponents",
    "ScalingSeries",
    "TestFunction",
    "brute_force_distribution",
    "dual_edge",
    "es_update",
    "estimate_AF",
    "estimate_cdelta",
    "estimate_delta",
    "estimate_pi1",
    "estimate_pi2k",
    "estimate_tilde_pi1",
    "estimate_tilde_pi2_and_delta",
    "estimate_two_point",
    "extract_loops",
    "fit_exponent",
    "gff_characteristic",
    "height",
    "log_kernel",
    "loop_tail_event",
    "orient",
    "potts_correlation",
    "potts_from_fk",
    "predict_four_ball",
    "predict_two_ball",
    "quasi_mult_audit",
    "sample_chain",
    "sample_chain_pool",
    "scaling_relations",
    "surround_count",
    "test_integral",
]
