"""Day-to-night domain adaptation toolkit.

Building blocks for adapting detectors from daytime to nighttime imagery
without target labels: night-prior image enhancement, teacher/proxy
pseudo-label fusion, adaptive confidence thresholding, EMA phase
schedules, a synthetic closed-loop simulator, and a reference mAP
evaluator.
"""

from .boxes import (
    BBox,
    Detection,
    DetectionSet,
    SOURCE_TAGS,
    iou,
    match_by_class_and_iou,
)
from .enhance import (
    EnhanceConfig,
    brightness_transform,
    contrast_transform,
    enhance_pipeline,
    gamma_transform,
    gaussian_blur,
    gaussian_noise,
    local_transform,
    random_keep,
    stage_rngs,
)
from .errors import ValidationError
from .evaluation import (
    EvalConfig,
    EvalReport,
    PLQuality,
    average_precision,
    evaluate,
    mean_ap_over_range,
)
from .fusion import (
    FusionConfig,
    PROVENANCE_EXTENDED,
    PROVENANCE_INITIAL,
    PseudoLabelSet,
    filter_initial,
    fuse_pseudo_labels,
    merge_pseudo_labels,
    mine_consistent,
)
from .images import (
    ChannelStats,
    ImagePlanes,
    NightPrior,
    compute_stats,
    night_prior_from_images,
)
from .schedule import PhaseFlags, PhasePlan, ema_update, phase_at
from .simulate import (
    DetectorModel,
    LoopReport,
    Scene,
    SceneConfig,
    detect,
    generate_scenes,
    run_adaptation_loop,
)
from .thresholding import (
    ThresholdState,
    ThresholdUpdate,
    matched_confidence_stats,
    update_threshold,
)

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "ChannelStats",
    "Detection",
    "DetectionSet",
    "DetectorModel",
    "EnhanceConfig",
    "EvalConfig",
    "EvalReport",
    "FusionConfig",
    "ImagePlanes",
    "LoopReport",
    "NightPrior",
    "PLQuality",
    "PROVENANCE_EXTENDED",
    "PROVENANCE_INITIAL",
    "PhaseFlags",
    "PhasePlan",
    "PseudoLabelSet",
    "SOURCE_TAGS",
    "Scene",
    "SceneConfig",
    "ThresholdState",
    "ThresholdUpdate",
    "ValidationError",
    "average_precision",
    "brightness_transform",
    "compute_stats",
    "contrast_transform",
    "detect",
    "ema_update",
    "enhance_pipeline",
    "evaluate",
    "filter_initial",
    "fuse_pseudo_labels",
    "gamma_transform",
    "gaussian_blur",
    "gaussian_noise",
    "generate_scenes",
    "iou",
    "local_transform",
    "match_by_class_and_iou",
    "matched_confidence_stats",
    "mean_ap_over_range",
    "merge_pseudo_labels",
    "mine_consistent",
    "night_prior_from_images",
    "phase_at",
    "random_keep",
    "run_adaptation_loop",
    "stage_rngs",
    "update_threshold",
]
