"""Evaluation toolkit for spoofing countermeasures (CM) and spoofing-robust
speaker verification (SASV).

Track 1 (CM): minDCF, actDCF, C_llr and EER. Track 2 (SASV): min a-DCF,
ASV-constrained min t-DCF and the concurrent tandem EER. Plus calibration,
file IO with validation, and pooled / per-condition reports.
"""

from ._version import __version__
from .calibration import CalibrationMap, apply, fit_affine, fit_monotone
from .detection import (
    ErrorRateCurve,
    Track1Metrics,
    compute_act_dcf,
    compute_cllr,
    compute_dcf,
    compute_eer,
    compute_min_dcf,
    error_rate_curve,
    evaluate_track1,
    sweep_error_rates,
)
from .errors import (
    ConstantCalibrationWarning,
    DegenerateError,
    DomainError,
    EmptyClassError,
    FormatError,
    JoinError,
    NoCrossingError,
    ParseError,
    SeparableWarning,
    SpecError,
    SpoofScoreError,
    VocabularyError,
)
from .fileio import ValidationReport, read_keys, read_scores, validate_submission, write_keys, write_scores
from .model import (
    DEFAULT_CM_COST,
    DEFAULT_SASV_COST,
    CmCostModel,
    SasvCostModel,
    ScorePartition,
    ScoreSet,
    Track,
    TrialClass,
    TrialRecord,
    Vocabulary,
    derive_cm_cost_model,
    derive_sasv_cost_model,
    join_labels,
    partition_scores,
)
from .report import ConditionResult, EvaluationReport, build_report, read_report, write_report
from .sasv import (
    AsvOperatingPoint,
    TandemThresholdPair,
    Track2Metrics,
    compute_a_dcf,
    compute_asv_constrained_min_tdcf,
    compute_asv_operating_point,
    compute_concurrent_teer,
    compute_min_a_dcf,
    evaluate_track2,
)

__all__ = [
    "__version__",
    "AsvOperatingPoint",
    "CalibrationMap",
    "CmCostModel",
    "ConditionResult",
    "ConstantCalibrationWarning",
    "DEFAULT_CM_COST",
    "DEFAULT_SASV_COST",
    "DegenerateError",
    "DomainError",
    "EmptyClassError",
    "ErrorRateCurve",
    "EvaluationReport",
    "FormatError",
    "JoinError",
    "NoCrossingError",
    "ParseError",
    "SasvCostModel",
    "ScorePartition",
    "ScoreSet",
    "SeparableWarning",
    "SpecError",
    "SpoofScoreError",
    "TandemThresholdPair",
    "Track",
    "Track1Metrics",
    "Track2Metrics",
    "TrialClass",
    "TrialRecord",
    "ValidationReport",
    "Vocabulary",
    "VocabularyError",
    "apply",
    "build_report",
    "compute_a_dcf",
    "compute_act_dcf",
    "compute_asv_constrained_min_tdcf",
    "compute_asv_operating_point",
    "compute_cllr",
    "compute_concurrent_teer",
    "compute_dcf",
    "compute_eer",
    "compute_min_a_dcf",
    "compute_min_dcf",
    "derive_cm_cost_model",
    "derive_sasv_cost_model",
    "error_rate_curve",
    "evaluate_track1",
    "evaluate_track2",
    "fit_affine",
    "fit_monotone",
    "join_labels",
    "partition_scores",
    "read_keys",
    "read_report",
    "read_scores",
    "sweep_error_rates",
    "validate_submission",
    "write_keys",
    "write_report",
    "write_scores",
]
