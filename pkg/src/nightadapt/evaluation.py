"""Reference detection evaluation: per-class AP, mAP, size strata, label quality.

AP uses all-point interpolation (area under the precision envelope over
recall) at a single IoU threshold, 0.5 by default.  Detections are ranked
by descending confidence with ties broken by insertion order, and each
detection greedily takes the highest-IoU unmatched ground-truth box.
Classes absent from the ground truth are excluded from the mAP mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .boxes import Detection, DetectionSet, iou, match_by_class_and_iou
from .errors import ValidationError


@dataclass(frozen=True, slots=True)
class EvalConfig:
    iou_thresh: float = 0.5
    # Size strata by ground-truth box area, standard 32^2 / 96^2 boundaries.
    small_max_area: float = 32.0**2
    medium_max_area: float = 96.0**2

    def __post_init__(self) -> None:
        if not (0.0 < self.iou_thresh <= 1.0):
            raise ValidationError(f"iou_thresh must be in (0, 1], got {self.iou_thresh}")
        if not (0.0 < self.small_max_area < self.medium_max_area):
            raise ValidationError("size boundaries must be ordered and positive")


@dataclass(frozen=True, slots=True)
class PLQuality:
    """Pseudo-label quality from class-aware one-to-one matching at IoU 0.5."""

    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float


@dataclass(slots=True)
class EvalReport:
    per_class_ap: dict[int, float]
    map: float
    ap_small: float | None
    ap_medium: float | None
    ap_large: float | None
    pl_quality: PLQuality

    def to_dict(self) -> dict:
        return {
            "per_class_ap": {str(k): v for k, v in self.per_class_ap.items()},
            "map": self.map,
            "ap_small": self.ap_small,
            "ap_medium": self.ap_medium,
            "ap_large": self.ap_large,
            "pl_quality": {
                "tp": self.pl_quality.tp,
                "fp": self.pl_quality.fp,
                "fn": self.pl_quality.fn,
                "precision": self.pl_quality.precision,
                "recall": self.pl_quality.recall,
                "f1": self.pl_quality.f1,
            },
        }

    def text_table(self) -> str:
        """Plain-text summary: one column per class plus the mAP column."""
        classes = sorted(self.per_class_ap)
        header = ["class"] + [str(c) for c in classes] + ["mAP"]
        values = ["AP"] + [f"{self.per_class_ap[c]:.3f}" for c in classes]
        values.append(f"{self.map:.3f}")
        widths = [max(len(h), len(v)) for h, v in zip(header, values)]
        lines = [
            "  ".join(h.rjust(w) for h, w in zip(header, widths)),
            "  ".join(v.rjust(w) for v, w in zip(values, widths)),
        ]

        def fmt(x: float | None) -> str:
            return "n/a" if x is None else f"{x:.3f}"

        lines.append(
            f"AP_small {fmt(self.ap_small)}  AP_medium {fmt(self.ap_medium)}  "
            f"AP_large {fmt(self.ap_large)}"
        )
        q = self.pl_quality
        lines.append(
            f"labels: tp={q.tp} fp={q.fp} fn={q.fn} "
            f"precision={q.precision:.3f} recall={q.recall:.3f} f1={q.f1:.3f}"
        )
        return "\n".join(lines)


def _match_flags(
    dets: Sequence[Detection],
    gts: Sequence[Detection],
    iou_thresh: float,
    gt_ignore: Sequence[bool] | None = None,
    det_keep: Sequence[bool] | None = None,
) -> list[tuple[float, bool] | None]:
    """Per-detection (confidence, is_tp) in input order, or None when ignored.

    Detections are processed by descending confidence (ties: input order)
    and greedily take the highest-IoU unmatched ground truth at or above
    the threshold.  A detection whose best available match is an ignored
    ground truth is itself ignored; an unmatched detection is a false
    positive only when ``det_keep`` holds for it.
    """
    if gt_ignore is None:
        gt_ignore = [False] * len(gts)
    if det_keep is None:
        det_keep = [True] * len(dets)
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, i))
    taken = [False] * len(gts)
    out: list[tuple[float, bool] | None] = [None] * len(dets)
    for i in order:
        d = dets[i]
        best_j = -1
        best_v = 0.0
        best_ign_j = -1
        best_ign_v = 0.0
        for j, g in enumerate(gts):
            if taken[j]:
                continue
            v = iou(d.box, g.box)
            if v < iou_thresh:
                continue
            if gt_ignore[j]:
                if v > best_ign_v:
                    best_ign_j, best_ign_v = j, v
            elif v > best_v:
                best_j, best_v = j, v
        if best_j >= 0:
            taken[best_j] = True
            out[i] = (d.confidence, True)
        elif best_ign_j >= 0:
            taken[best_ign_j] = True
            out[i] = None
        elif det_keep[i]:
            out[i] = (d.confidence, False)
    return out


def _ap_all_point(tp_flags: Sequence[bool], n_gt: int) -> float:
    """AP from rank-ordered TP flags via the precision envelope."""
    if n_gt <= 0:
        return 0.0
    n = len(tp_flags)
    if n == 0:
        return 0.0
    precisions = []
    recalls = []
    tp = 0
    for k, flag in enumerate(tp_flags):
        if flag:
            tp += 1
        precisions.append(tp / (k + 1))
        recalls.append(tp / n_gt)
    envelope = precisions[:]
    for k in range(n - 2, -1, -1):
        if envelope[k + 1] > envelope[k]:
            envelope[k] = envelope[k + 1]
    ap = 0.0
    prev_recall = 0.0
    for k in range(n):
        if recalls[k] > prev_recall:
            ap += (recalls[k] - prev_recall) * envelope[k]
            prev_recall = recalls[k]
    return ap


def average_precision(
    dets: Sequence[Detection], gt: Sequence[Detection], iou_thresh: float
) -> float | None:
    """Single-class AP; ``None`` when both inputs are empty (class excluded)."""
    if not gt:
        return None if not dets else 0.0
    flags = _match_flags(dets, gt, iou_thresh)
    scored = [f for f in flags if f is not None]
    scored.sort(key=lambda cf: -cf[0])
    return _ap_all_point([tp for _, tp in scored], len(gt))


def _pooled_class_ap(
    per_image: list[tuple[Sequence[Detection], Sequence[Detection]]],
    iou_thresh: float,
    gt_band: tuple[float, float] | None = None,
) -> float | None:
    """AP for one class pooled over images, optionally restricted to a size band.

    With a band, ground truth outside it is ignore-listed and detections
    whose own area falls outside the band cannot count as false positives.
    Returns None when no ground truth (in band) exists.
    """
    pooled: list[tuple[float, int, bool]] = []
    counter = 0
    n_gt = 0
    for dets, gts in per_image:
        if gt_band is None:
            gt_ignore = None
            det_keep = None
            n_gt += len(gts)
        else:
            lo, hi = gt_band
            gt_ignore = [not (lo <= g.box.area < hi) for g in gts]
            det_keep = [lo <= d.box.area < hi for d in dets]
            n_gt += sum(1 for ign in gt_ignore if not ign)
        for f in _match_flags(dets, gts, iou_thresh, gt_ignore, det_keep):
            if f is not None:
                pooled.append((f[0], counter, f[1]))
            counter += 1
    if n_gt == 0:
        return None
    pooled.sort(key=lambda row: (-row[0], row[1]))
    return _ap_all_point([tp for _, _, tp in pooled], n_gt)


def _by_class(dets: Sequence[Detection]) -> dict[int, list[Detection]]:
    out: dict[int, list[Detection]] = {}
    for d in dets:
        out.setdefault(d.class_id, []).append(d)
    return out


def evaluate(
    dets_by_image: Mapping[str, DetectionSet],
    gt_by_image: Mapping[str, DetectionSet],
    cfg: EvalConfig = EvalConfig(),
) -> EvalReport:
    """Evaluate detections against ground truth pooled over all images."""
    unknown = set(dets_by_image) - set(gt_by_image)
    if unknown:
        raise ValidationError(f"detections reference unknown image_ids: {sorted(unknown)}")
    image_ids = sorted(gt_by_image)
    classes: set[int] = set()
    for img_id in image_ids:
        classes.update(g.class_id for g in gt_by_image[img_id].detections)

    grouped: dict[int, list[tuple[list[Detection], list[Detection]]]] = {
        c: [] for c in sorted(classes)
    }
    for img_id in image_ids:
        det_groups = _by_class(
            dets_by_image[img_id].detections if img_id in dets_by_image else []
        )
        gt_groups = _by_class(gt_by_image[img_id].detections)
        for c in grouped:
            grouped[c].append((det_groups.get(c, []), gt_groups.get(c, [])))

    per_class_ap: dict[int, float] = {}
    for c, per_image in grouped.items():
        ap = _pooled_class_ap(per_image, cfg.iou_thresh)
        if ap is not None:
            per_class_ap[c] = ap
    mean_ap = (
        sum(per_class_ap.values()) / len(per_class_ap) if per_class_ap else 0.0
    )

    bands = {
        "small": (0.0, cfg.small_max_area),
        "medium": (cfg.small_max_area, cfg.medium_max_area),
        "large": (cfg.medium_max_area, float("inf")),
    }
    strata: dict[str, float | None] = {}
    for name, band in bands.items():
        vals = []
        for c, per_image in grouped.items():
            ap = _pooled_class_ap(per_image, cfg.iou_thresh, gt_band=band)
            if ap is not None:
                vals.append(ap)
        strata[name] = sum(vals) / len(vals) if vals else None

    tp = fp = fn = 0
    for img_id in image_ids:
        gts = gt_by_image[img_id]
        dets = dets_by_image.get(img_id)
        if dets is None:
            fn += len(gts)
            continue
        matches = match_by_class_and_iou(dets, gts, cfg.iou_thresh)
        tp += len(matches)
        fp += len(dets) - len(matches)
        fn += len(gts) - len(matches)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0

    return EvalReport(
        per_class_ap=per_class_ap,
        map=mean_ap,
        ap_small=strata["small"],
        ap_medium=strata["medium"],
        ap_large=strata["large"],
        pl_quality=PLQuality(tp, fp, fn, precision, recall, f1),
    )


def mean_ap_over_range(
    dets_by_image: Mapping[str, DetectionSet],
    gt_by_image: Mapping[str, DetectionSet],
    thresholds: Sequence[float] = tuple(0.5 + 0.05 * k for k in range(10)),
    cfg: EvalConfig = EvalConfig(),
) -> float:
    """Mean of mAPs over an IoU-threshold range (0.50:0.05:0.95 by default)."""
    maps = []
    for t in thresholds:
        report = evaluate(
            dets_by_image,
            gt_by_image,
            EvalConfig(iou_thresh=t, small_max_area=cfg.small_max_area,
                       medium_max_area=cfg.medium_max_area),
        )
        maps.append(report.map)
    return sum(maps) / len(maps)
