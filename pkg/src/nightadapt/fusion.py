"""Teacher/proxy pseudo-label fusion.

High-confidence teacher detections pass a static classification threshold
and become the initial pseudo-labels.  Teacher detections in the uncertain
band below that threshold are kept only when a proxy network predicts the
same class at sufficient overlap; those become the extended labels.  The
fused set always carries the teacher's boxes, classes, and confidences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .boxes import Detection, DetectionSet, match_by_class_and_iou
from .errors import ValidationError

PROVENANCE_INITIAL = "initial"
PROVENANCE_EXTENDED = "extended"


@dataclass(slots=True)
class FusionConfig:
    """Thresholds for pseudo-label fusion.

    ``tau_cls`` gates the initial labels, ``tau_loc`` is the minimum IoU for
    teacher/proxy agreement, and ``tau_lb`` bounds the uncertain band from
    below (strictly: candidates need confidence > ``tau_lb``).
    """

    tau_cls: float = 0.8
    tau_loc: float = 0.8
    tau_lb: float = 0.25

    def __post_init__(self) -> None:
        if not (0.0 <= self.tau_lb <= self.tau_cls <= 1.0):
            raise ValidationError(
                f"need 0 <= tau_lb <= tau_cls <= 1, got tau_lb={self.tau_lb}, tau_cls={self.tau_cls}"
            )
        if not (0.0 < self.tau_loc <= 1.0):
            raise ValidationError(f"tau_loc must be in (0, 1], got {self.tau_loc}")


@dataclass(slots=True)
class PseudoLabelSet:
    """Pseudo-labels for one image with per-label provenance."""

    image_id: str
    labels: list[Detection] = field(default_factory=list)
    provenance: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.provenance):
            raise ValidationError("labels and provenance must have equal length")
        for p in self.provenance:
            if p not in (PROVENANCE_INITIAL, PROVENANCE_EXTENDED):
                raise ValidationError(f"unknown provenance {p!r}")

    def __len__(self) -> int:
        return len(self.labels)


def filter_initial(teacher: DetectionSet, cfg: FusionConfig) -> PseudoLabelSet:
    """Keep teacher detections with confidence >= tau_cls, order preserved."""
    kept = [d for d in teacher.detections if d.confidence >= cfg.tau_cls]
    return PseudoLabelSet(
        image_id=teacher.image_id,
        labels=kept,
        provenance=[PROVENANCE_INITIAL] * len(kept),
    )


def mine_consistent(
    teacher: DetectionSet, proxy: DetectionSet, cfg: FusionConfig
) -> PseudoLabelSet:
    """Recover overlooked teacher detections validated by the proxy.

    Candidates are teacher detections with confidence in the open band
    (tau_lb, tau_cls).  A candidate survives when one-to-one matching
    (descending candidate confidence) pairs it with an unused proxy
    detection of identical class at IoU >= tau_loc.  Survivors keep the
    teacher's box and confidence.
    """
    band = [d for d in teacher.detections if cfg.tau_lb < d.confidence < cfg.tau_cls]
    if not band or not proxy.detections:
        return PseudoLabelSet(image_id=teacher.image_id)
    band_set = DetectionSet(teacher.image_id, band, teacher.source_tag)
    matches = match_by_class_and_iou(band_set, proxy, cfg.tau_loc)
    kept = [band[i] for i, _, _ in matches]
    return PseudoLabelSet(
        image_id=teacher.image_id,
        labels=kept,
        provenance=[PROVENANCE_EXTENDED] * len(kept),
    )


def merge_pseudo_labels(initial: PseudoLabelSet, extended: PseudoLabelSet) -> PseudoLabelSet:
    """Concatenate initial then extended labels for the same image."""
    if initial.image_id != extended.image_id:
        raise ValidationError(
            f"image_id mismatch: {initial.image_id!r} vs {extended.image_id!r}"
        )
    return PseudoLabelSet(
        image_id=initial.image_id,
        labels=initial.labels + extended.labels,
        provenance=initial.provenance + extended.provenance,
    )


def fuse_pseudo_labels(
    teacher: DetectionSet, proxy: DetectionSet, cfg: FusionConfig
) -> PseudoLabelSet:
    """Full fusion: initial filtering plus proxy-validated band mining."""
    return merge_pseudo_labels(
        filter_initial(teacher, cfg), mine_consistent(teacher, proxy, cfg)
    )
