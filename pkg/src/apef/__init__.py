"""Time-series similarity scoring driven by pairwise preferences.

Core pieces: a segment-aware base similarity metric with tunable weights,
synthetic dataset generation, preference-driven weight optimization with a
pluggable language-model adapter, an executable evaluation-policy engine, a
training orchestrator, and an HTTP annotation service.
"""

from .datagen import (
    AugmentationSpec,
    Dataset,
    DatasetSplit,
    PRESETS,
    PairedSample,
    TargetRanking,
    augment,
    build_target_ranking,
    default_observations,
    generate_dataset,
    label_pairs,
    load_dataset,
    sample_pairs,
    save_dataset,
    score_series,
)
from .errors import ApefError
from .llm import HttpAdapter, LlmRequest, LlmResponse, ScriptedAdapter, TranscriptWriter
from .metrics import (
    MetricWeights,
    ScoreBreakdown,
    base_metric,
    ilamb_scores,
    mae,
    nse,
    r2,
    rmse,
    similarity,
    two_variable_score,
)
from .optimizer import (
    ConstraintSet,
    HistoryEntry,
    TrainingContext,
    deterministic_optimize,
    llm_step,
    training_correlation,
    validate_weights,
)
from .policy import (
    Policy,
    PolicyVerdict,
    apply_policy,
    eval_formula,
    extract_policy,
    parse_formula,
    parse_policy,
    screen_new_metric,
    serialize_policy,
    validate_policy,
)
from .series import (
    PeakSet,
    Segmentation,
    TimeSeries,
    detect_peaks,
    fleiss_kappa,
    segment,
    spearman,
)
from .trainer import RunConfig, RunReport, majority_vote, prp_rank, run_training

__version__ = "0.1.0"

__all__ = [
    "ApefError",
    "AugmentationSpec",
    "ConstraintSet",
    "Dataset",
    "DatasetSplit",
    "HistoryEntry",
    "HttpAdapter",
    "LlmRequest",
    "LlmResponse",
    "MetricWeights",
    "PRESETS",
    "PairedSample",
    "PeakSet",
    "Policy",
    "PolicyVerdict",
    "RunConfig",
    "RunReport",
    "ScoreBreakdown",
    "ScriptedAdapter",
    "Segmentation",
    "TargetRanking",
    "TimeSeries",
    "TrainingContext",
    "TranscriptWriter",
    "apply_policy",
    "augment",
    "base_metric",
    "build_target_ranking",
    "default_observations",
    "detect_peaks",
    "deterministic_optimize",
    "eval_formula",
    "extract_policy",
    "fleiss_kappa",
    "generate_dataset",
    "ilamb_scores",
    "label_pairs",
    "llm_step",
    "load_dataset",
    "mae",
    "majority_vote",
    "nse",
    "parse_formula",
    "parse_policy",
    "prp_rank",
    "r2",
    "rmse",
    "run_training",
    "sample_pairs",
    "save_dataset",
    "score_series",
    "screen_new_metric",
    "segment",
    "serialize_policy",
    "similarity",
    "spearman",
    "training_correlation",
    "two_variable_score",
    "validate_policy",
    "validate_weights",
]
