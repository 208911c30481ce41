"""File formats: detection JSON, night-prior JSON, images, CSV traces.

Detection files are COCO-style record arrays with ``bbox`` as
``[x, y, width, height]``; coordinates and scores are written with six
fractional digits, which round-trips corner boxes to within 1e-6.  All
writes go through a write-temp-then-rename path so interrupted runs never
leave truncated artifacts.
"""

from __future__ import annotations

import io
import json
import os
import tempfile
from typing import Iterable, Mapping, Sequence

import numpy as np
from PIL import Image

from .boxes import BBox, Detection, DetectionSet
from .errors import ValidationError
from .fusion import PseudoLabelSet
from .images import ImagePlanes, NightPrior, night_prior_from_arrays

_KNOWN_RECORD_KEYS = {"image_id", "category_id", "bbox", "score", "provenance"}


def atomic_write_bytes(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def save_json(obj, path: str) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2) + "\n")


def save_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _parse_record(rec, index: int, source_tag: str) -> tuple[str, Detection, str | None]:
    where = f"record {index}"
    if not isinstance(rec, dict):
        raise ValidationError(f"{where}: expected an object, got {type(rec).__name__}")
    for key in ("image_id", "category_id", "bbox", "score"):
        if key not in rec:
            raise ValidationError(f"{where}: missing key {key!r}")
    image_id = rec["image_id"]
    if not isinstance(image_id, str):
        raise ValidationError(f"{where}: image_id must be a string")
    category = rec["category_id"]
    if not isinstance(category, int) or isinstance(category, bool) or category < 0:
        raise ValidationError(f"{where}: category_id must be a non-negative integer")
    bbox = rec["bbox"]
    if (
        not isinstance(bbox, (list, tuple))
        or len(bbox) != 4
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in bbox)
    ):
        raise ValidationError(f"{where}: bbox must be [x, y, width, height]")
    x, y, w, h = (float(v) for v in bbox)
    if w <= 0 or h <= 0:
        raise ValidationError(f"{where}: bbox width and height must be positive")
    score = rec["score"]
    if not isinstance(score, (int, float)) or isinstance(score, bool) or not (0.0 <= score <= 1.0):
        raise ValidationError(f"{where}: score must be in [0, 1]")
    provenance = rec.get("provenance")
    if provenance is not None and provenance not in ("initial", "extended"):
        raise ValidationError(f"{where}: provenance must be 'initial' or 'extended'")
    try:
        det = Detection(BBox(x, y, x + w, y + h), category, float(score))
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from None
    return image_id, det, provenance


def load_detections(path: str, source_tag: str = "teacher") -> dict[str, DetectionSet]:
    """Load a COCO-style detection file grouped by image_id, order preserved."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON ({exc})") from None
    if not isinstance(data, list):
        raise ValidationError(f"{path}: expected a top-level array of records")
    grouped: dict[str, DetectionSet] = {}
    for index, rec in enumerate(data):
        image_id, det, _ = _parse_record(rec, index, source_tag)
        if image_id not in grouped:
            grouped[image_id] = DetectionSet(image_id, [], source_tag)
        grouped[image_id].detections.append(det)
    return grouped


def _det_record(image_id: str, det: Detection, provenance: str | None) -> dict:
    rec = {
        "image_id": image_id,
        "category_id": det.class_id,
        "bbox": [
            round(det.box.x1, 6),
            round(det.box.y1, 6),
            round(det.box.width, 6),
            round(det.box.height, 6),
        ],
        "score": round(det.confidence, 6),
    }
    if provenance is not None:
        rec["provenance"] = provenance
    return rec


def save_detections(sets: Mapping[str, DetectionSet], path: str) -> None:
    records = []
    for image_id in sorted(sets):
        for det in sets[image_id].detections:
            records.append(_det_record(image_id, det, None))
    save_json(records, path)


def save_pseudo_labels(labels: Mapping[str, PseudoLabelSet], path: str) -> None:
    records = []
    for image_id in sorted(labels):
        pls = labels[image_id]
        for det, prov in zip(pls.labels, pls.provenance):
            records.append(_det_record(image_id, det, prov))
    save_json(records, path)


def save_night_prior(prior: NightPrior, path: str) -> None:
    save_json(
        {
            "mean": [float(v) for v in prior.stats.mean],
            "std": [float(v) for v in prior.stats.std],
            "sample_count": prior.sample_count,
        },
        path,
    )


def load_night_prior(path: str) -> NightPrior:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: expected an object")
    unknown = set(data) - {"mean", "std", "sample_count"}
    if unknown:
        raise ValidationError(f"{path}: unknown key(s) {sorted(unknown)}")
    for key in ("mean", "std", "sample_count"):
        if key not in data:
            raise ValidationError(f"{path}: missing key {key!r}")
    try:
        return night_prior_from_arrays(data["mean"], data["std"], int(data["sample_count"]))
    except (ValidationError, TypeError) as exc:
        raise ValidationError(f"{path}: {exc}") from None


def read_image(path: str) -> ImagePlanes:
    """Read an 8-bit grayscale or RGB image (PNG or binary PPM)."""
    try:
        with Image.open(path) as im:
            if im.format not in ("PNG", "PPM"):
                raise ValidationError(f"{path}: unsupported format {im.format!r}")
            if im.mode not in ("L", "RGB"):
                raise ValidationError(
                    f"{path}: unsupported mode {im.mode!r} (need 8-bit L or RGB)"
                )
            arr = np.asarray(im, dtype=np.float64) / 255.0
    except FileNotFoundError:
        raise ValidationError(f"{path}: no such file") from None
    except Image.UnidentifiedImageError:
        raise ValidationError(f"{path}: not a recognized image") from None
    if arr.ndim == 2:
        arr = arr[None, :, :]
    else:
        arr = np.moveaxis(arr, 2, 0)
    return ImagePlanes(arr)


def write_image(img: ImagePlanes, path: str) -> None:
    """Write as PNG or binary PPM by extension; values scale by 255, round half up."""
    suffix = os.path.splitext(path)[1].lower()
    if suffix not in (".png", ".ppm"):
        raise ValidationError(f"{path}: extension must be .png or .ppm")
    if suffix == ".ppm" and img.channel_count != 3:
        raise ValidationError("PPM output requires a 3-channel image; use .png for grayscale")
    quantized = np.floor(img.planes * 255.0 + 0.5).astype(np.uint8)
    if img.channel_count == 1:
        pil = Image.fromarray(quantized[0], mode="L")
    else:
        pil = Image.fromarray(np.moveaxis(quantized, 0, 2), mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG" if suffix == ".png" else "PPM")
    atomic_write_bytes(path, buf.getvalue())
