"""Planar float images in [0, 1] and channel statistics.

Images are stored as ``(channels, height, width)`` float64 arrays.  Every
constructor validates the [0, 1] range, so each enhancement stage clamps
before building its output.  File encoding and decoding live in
:mod:`nightadapt.fileio`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class ImagePlanes:
    """A 1- or 3-channel floating-point image with samples in [0, 1]."""

    planes: np.ndarray

    def __post_init__(self) -> None:
        p = self.planes
        if not isinstance(p, np.ndarray) or p.ndim != 3:
            raise ValidationError("planes must be a (channels, height, width) array")
        if p.shape[0] not in (1, 3):
            raise ValidationError(f"channel_count must be 1 or 3, got {p.shape[0]}")
        if p.shape[1] < 1 or p.shape[2] < 1:
            raise ValidationError(f"image must be at least 1x1, got shape {p.shape}")
        if p.dtype != np.float64:
            object.__setattr__(self, "planes", p.astype(np.float64))
            p = self.planes
        if not np.all(np.isfinite(p)):
            raise ValidationError("image samples must be finite")
        if p.min() < 0.0 or p.max() > 1.0:
            raise ValidationError("image samples must lie in [0, 1]")

    @property
    def channel_count(self) -> int:
        return self.planes.shape[0]

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    @classmethod
    def from_clamped(cls, arr: np.ndarray) -> "ImagePlanes":
        """Construct from an arbitrary float array, clipping into [0, 1]."""
        return cls(np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0))


@dataclass(frozen=True, eq=False)
class ChannelStats:
    """Per-channel mean and population standard deviation."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.mean, dtype=np.float64)
        s = np.asarray(self.std, dtype=np.float64)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "std", s)
        if m.ndim != 1 or s.shape != m.shape:
            raise ValidationError("mean and std must be 1-D arrays of equal length")
        if np.any(~np.isfinite(m)) or np.any(~np.isfinite(s)):
            raise ValidationError("channel stats must be finite")
        if m.min() < 0.0 or m.max() > 1.0 or s.min() < 0.0:
            raise ValidationError("mean must be in [0, 1] and std >= 0")


@dataclass(frozen=True, eq=False)
class NightPrior:
    """Channel statistics aggregated over a nighttime reference corpus.

    Per-image stats are averaged uniformly over the corpus, so enhancement
    needs no paired nighttime image at transform time.
    """

    stats: ChannelStats
    sample_count: int

    def __post_init__(self) -> None:
        if self.sample_count < 1:
            raise ValidationError("a night prior needs at least one sample image")


def compute_stats(img: ImagePlanes) -> ChannelStats:
    """Exact per-channel sample mean and population standard deviation."""
    flat = img.planes.reshape(img.channel_count, -1)
    return ChannelStats(mean=flat.mean(axis=1), std=flat.std(axis=1))


def night_prior_from_images(images: Iterable[ImagePlanes]) -> NightPrior:
    """Aggregate a night prior by uniformly averaging per-image stats."""
    means: list[np.ndarray] = []
    stds: list[np.ndarray] = []
    for img in images:
        st = compute_stats(img)
        means.append(st.mean)
        stds.append(st.std)
    if not means:
        raise ValidationError("cannot build a night prior from zero images")
    if any(m.shape != means[0].shape for m in means):
        raise ValidationError("all prior images must share a channel count")
    return NightPrior(
        stats=ChannelStats(
            mean=np.mean(np.stack(means), axis=0),
            std=np.mean(np.stack(stds), axis=0),
        ),
        sample_count=len(means),
    )


def night_prior_from_arrays(mean: Sequence[float], std: Sequence[float], sample_count: int) -> NightPrior:
    return NightPrior(stats=ChannelStats(np.asarray(mean), np.asarray(std)), sample_count=sample_count)
