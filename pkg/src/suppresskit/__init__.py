"""suppresskit: measure how much image classifiers rely on shape, texture,
and color by suppressing each cue, validating the suppression with image
metrics, and normalizing the accuracy drop against chance."""

__version__ = "0.1.0"

from .image import DecodeError, ImageBuffer, decode, encode, load_image, resize, save_image, to_grayscale
from .manifest import ManifestEntry, ManifestError, load_manifest, scan_directory
from .metrics import (
    MetricParams,
    MetricReport,
    corpus_metrics,
    edge_ssim,
    gradient_correlation,
    high_frequency_energy_ratio,
    local_variance_ratio,
    report,
)
from .predictor import (
    PredictionRecord,
    PredictorError,
    PredictorHandle,
    load_predictions,
    run_subprocess_predictor,
    softmax,
)
from .reliance import (
    CategoryMapping,
    ChanceEstimate,
    DomainSummary,
    EvalConfig,
    EvaluationError,
    RelianceCurve,
    SweepStep,
    accuracy,
    aggregate_domain,
    chance_accuracy,
    chance_map_multilabel,
    entry_level_decide,
    overlay_comparison,
    per_class_curves,
    relative_accuracy,
    sweep,
)
from .stats import (
    DegenerateSampleError,
    PairedSample,
    cohens_d_paired,
    mean_ci95,
    paired_t_test,
    student_t_cdf,
)
from .transforms import (
    TransformSpec,
    TransformSpecError,
    apply,
    bilateral,
    box_blur,
    channel_shuffle,
    gaussian_blur,
    grid_overlay,
    median_filter,
    nlmeans,
    patch_rotation,
    patch_shuffle,
)
