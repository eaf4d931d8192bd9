"""Alignment of two databases whose matched rows are jointly Gaussian."""

from .align import (
    AlignmentReport,
    ScoreMatrix,
    bht_align,
    brute_force_align,
    map_align,
    score_alignment,
    score_matrix,
    select_threshold,
)
from .errors import ValidationError
from .measures import (
    CorrelationSummary,
    log_likelihood_ratio,
    mutual_information,
    mutual_information_general,
    sigma,
    sigma_general,
    summarize,
)
from .model import (
    CanonicalModel,
    CorrelationModel,
    DatabasePair,
    FeatureTransform,
    Matching,
    apply_transform,
    canonicalize,
    validate_covariance,
)
from .synth import PlantedInstance, TrialSeed, derive_trial_seed, sample_instance, sample_matching
from .theory import (
    CycleType,
    RegimeVerdict,
    bhattacharyya_r,
    bht_converse_bound,
    bht_threshold_window,
    cycle_type,
    map_achievability_margin,
    map_converse_predicate,
    shifted_laplacian_det,
)

__version__ = "0.1.0"
