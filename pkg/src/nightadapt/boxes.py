"""Detection data types and exact axis-aligned box geometry.

Boxes are corner-encoded ``(x1, y1, x2, y2)`` in continuous pixel
coordinates with strictly positive width and height; degenerate boxes are
rejected at construction rather than silently repaired.  All operations
here are pure functions on effectively immutable inputs and are safe to
call from parallel workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ValidationError

SOURCE_TAGS = ("teacher", "proxy", "student", "ground_truth")


@dataclass(frozen=True, slots=True)
class BBox:
    """Axis-aligned box with corners (x1, y1) and (x2, y2), x1 < x2, y1 < y2."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not math.isfinite(v):
                raise ValidationError(f"box coordinates must be finite, got {self}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValidationError(
                f"box must have positive width and height, got {self}"
            )

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


def iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union of two boxes.

    Symmetric, exactly 1.0 for identical boxes, 0.0 for disjoint ones.
    """
    ix1 = a.x1 if a.x1 > b.x1 else b.x1
    iy1 = a.y1 if a.y1 > b.y1 else b.y1
    ix2 = a.x2 if a.x2 < b.x2 else b.x2
    iy2 = a.y2 if a.y2 < b.y2 else b.y2
    iw = ix2 - ix1
    ih = iy2 - iy1
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return inter / union


@dataclass(slots=True)
class Detection:
    """One scored, classified box.

    ``confidence`` is the maximum class score.  When ``score_vector`` is
    supplied it must be consistent: ``confidence == max(score_vector)`` and
    ``class_id`` is its argmax (ties broken by lowest index).
    """

    box: BBox
    class_id: int
    confidence: float
    score_vector: list[float] | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.class_id, int) or self.class_id < 0:
            raise ValidationError(f"class_id must be a non-negative int, got {self.class_id!r}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValidationError(f"confidence must be in [0, 1], got {self.confidence}")
        if self.score_vector is not None:
            sv = self.score_vector
            if not sv:
                raise ValidationError("score_vector must be non-empty when present")
            if sum(sv) > 1.0 + 1e-9:
                raise ValidationError(f"score_vector must sum to <= 1, got sum {sum(sv)}")
            top = max(sv)
            if self.confidence != top:
                raise ValidationError(
                    f"confidence {self.confidence} != max(score_vector) {top}"
                )
            if self.class_id != sv.index(top):
                raise ValidationError(
                    f"class_id {self.class_id} is not the argmax of score_vector"
                )

    @classmethod
    def from_scores(cls, box: BBox, score_vector: list[float]) -> "Detection":
        """Build a detection from a per-class score vector."""
        top = max(score_vector)
        return cls(box, score_vector.index(top), top, list(score_vector))


@dataclass(slots=True)
class DetectionSet:
    """Ordered detections from one network for one image.

    Insertion order is preserved so downstream filtering is deterministic.
    """

    image_id: str
    detections: list[Detection] = field(default_factory=list)
    source_tag: str = "teacher"

    def __post_init__(self) -> None:
        if self.source_tag not in SOURCE_TAGS:
            raise ValidationError(
                f"source_tag must be one of {SOURCE_TAGS}, got {self.source_tag!r}"
            )

    def __len__(self) -> int:
        return len(self.detections)


def match_by_class_and_iou(
    src: DetectionSet, ref: DetectionSet, min_iou: float
) -> list[tuple[int, int, float]]:
    """One-to-one greedy matching of ``src`` detections onto ``ref``.

    Source detections are processed in descending confidence (equal
    confidence: lower index first).  Each source detection takes the
    same-class, not-yet-used reference detection with the largest IoU that
    is >= ``min_iou``; IoU ties go to the lower reference index.  Returns
    ``(src_index, ref_index, iou)`` triples sorted by source index.
    """
    if not (0.0 < min_iou <= 1.0):
        raise ValidationError(f"min_iou must be in (0, 1], got {min_iou}")
    src_dets = src.detections
    ref_dets = ref.detections
    if not src_dets or not ref_dets:
        return []
    order = sorted(range(len(src_dets)), key=lambda i: (-src_dets[i].confidence, i))
    used = [False] * len(ref_dets)
    matches: list[tuple[int, int, float]] = []
    for i in order:
        det = src_dets[i]
        best_j = -1
        best_iou = 0.0
        for j, r in enumerate(ref_dets):
            if used[j] or r.class_id != det.class_id:
                continue
            v = iou(det.box, r.box)
            if v >= min_iou and v > best_iou:
                best_j = j
                best_iou = v
        if best_j >= 0:
            used[best_j] = True
            matches.append((i, best_j, best_iou))
    matches.sort()
    return matches
