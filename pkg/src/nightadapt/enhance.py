"""Parameter-free night-prior enhancement for daytime images.

Seven transforms of four kinds: additive noise, visibility correction
(brightness, contrast, gamma), quality degradation (Gaussian blur), and
contrastive features (random keep-back of a region, box-level low-light
masks).  The brightness and contrast stages pull the target channel
statistics from a :class:`~nightadapt.images.NightPrior`; everything else
is stochastic with explicitly seeded generators, so per-image parallelism
with derived seeds is the supported pattern.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boxes import BBox
from .errors import ValidationError
from .images import ImagePlanes, NightPrior, compute_stats

BLUR_KERNEL_SIZE = 11

# Fixed stage order of the pipeline; each stage draws from its own
# substream so disabling one stage never shifts another's randomness.
STAGE_ORDER = ("blur", "gamma", "keep", "brightness", "contrast", "noise", "local")

_FACTOR_LO = 0.2
_FACTOR_HI = 1.0


def _check_range(name: str, rng_pair: tuple[float, float]) -> None:
    lo, hi = rng_pair
    if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
        raise ValidationError(f"{name} range must be ordered and finite, got {rng_pair}")


def _check_prob(name: str, p: float) -> None:
    if not (0.0 <= p <= 1.0):
        raise ValidationError(f"{name} probability must be in [0, 1], got {p}")


@dataclass(slots=True)
class EnhanceConfig:
    """Application probabilities and parameter ranges for the pipeline."""

    blur_p: float = 0.5
    blur_sigma: tuple[float, float] = (0.1, 2.0)
    gamma_p: float = 0.4
    gamma_range: tuple[float, float] = (1.25, 5.0)
    keep_p: float = 1.0
    keep_area: tuple[float, float] = (0.1, 0.3)
    keep_aspect: tuple[float, float] = (0.5, 2.0)
    brightness_p: float = 0.55
    brightness_beta: tuple[float, float] = (0.2, 0.8)
    # When True the brightness factor uses the signed luminance offset, which
    # pins the factor at its 0.2 lower bound whenever the prior is darker
    # than the image.  The default scales by the offset magnitude instead.
    brightness_literal_sign: bool = False
    contrast_p: float = 0.55
    contrast_beta: tuple[float, float] = (0.2, 0.8)
    noise_p: float = 0.5
    noise_std: float = 0.1
    local_p: float = 1.0
    local_gamma_range: tuple[float, float] = (1.5, 5.0)
    rng_seed: int = 0

    def __post_init__(self) -> None:
        for name in ("blur", "gamma", "keep", "brightness", "contrast", "noise", "local"):
            _check_prob(name, getattr(self, name + "_p"))
        _check_range("blur_sigma", self.blur_sigma)
        _check_range("gamma", self.gamma_range)
        _check_range("keep_area", self.keep_area)
        _check_range("keep_aspect", self.keep_aspect)
        _check_range("brightness_beta", self.brightness_beta)
        _check_range("contrast_beta", self.contrast_beta)
        _check_range("local_gamma", self.local_gamma_range)
        if self.noise_std < 0:
            raise ValidationError(f"noise_std must be >= 0, got {self.noise_std}")


def brightness_transform(
    img: ImagePlanes, prior: NightPrior, beta: float, literal_sign: bool = False
) -> ImagePlanes:
    """Scale each channel toward the prior's luminance.

    The per-channel factor is ``clamp(beta * |mu_night - mu_day|, 0.2, 1.0)``
    where ``mu_day`` is the channel mean of ``img`` itself.  With
    ``literal_sign`` the signed offset is used instead of its magnitude.
    """
    day = compute_stats(img)
    if prior.stats.mean.shape[0] != img.channel_count:
        raise ValidationError("prior channel count does not match image")
    offset = prior.stats.mean - day.mean
    v = beta * (offset if literal_sign else np.abs(offset))
    factor = np.clip(v, _FACTOR_LO, _FACTOR_HI)
    out = img.planes * factor[:, None, None]
    return ImagePlanes.from_clamped(out)


def contrast_transform(img: ImagePlanes, prior: NightPrior, beta: float) -> ImagePlanes:
    """Rescale spread about each channel's own mean by the night/day std ratio.

    Channels with zero daytime std are passed through unchanged.
    """
    day = compute_stats(img)
    if prior.stats.std.shape[0] != img.channel_count:
        raise ValidationError("prior channel count does not match image")
    out = img.planes.copy()
    for c in range(img.channel_count):
        sd = day.std[c]
        if sd == 0.0:
            continue
        k = float(np.clip(beta * prior.stats.std[c] / sd, _FACTOR_LO, _FACTOR_HI))
        out[c] = (img.planes[c] - day.mean[c]) * k + day.mean[c]
    return ImagePlanes.from_clamped(out)


def gamma_transform(img: ImagePlanes, gamma: float) -> ImagePlanes:
    """Apply ``x ** gamma`` per sample; gamma > 1 darkens a [0, 1] image."""
    if not (gamma > 0 and np.isfinite(gamma)):
        raise ValidationError(f"gamma must be positive and finite, got {gamma}")
    return ImagePlanes.from_clamped(np.power(img.planes, gamma))


def gaussian_noise(img: ImagePlanes, rng, std: float = 0.1) -> ImagePlanes:
    """Add i.i.d. zero-mean Gaussian noise, clamping back into [0, 1]."""
    noise = rng.normal(0.0, std, size=img.planes.shape)
    return ImagePlanes.from_clamped(img.planes + noise)


def _gaussian_kernel(sigma: float, size: int = BLUR_KERNEL_SIZE) -> np.ndarray:
    half = size // 2
    x = np.arange(size, dtype=np.float64) - half
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _convolve1d_replicate(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    half = len(kernel) // 2
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (half, half)
    padded = np.pad(arr, pad, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, len(kernel), axis=axis)
    return windows @ kernel


def gaussian_blur(img: ImagePlanes, sigma: float) -> ImagePlanes:
    """Separable 11-tap Gaussian blur with border replication.

    The kernel is normalized to sum 1, so constant images pass unchanged.
    """
    if not (sigma > 0 and np.isfinite(sigma)):
        raise ValidationError(f"sigma must be positive and finite, got {sigma}")
    kernel = _gaussian_kernel(sigma)
    out = _convolve1d_replicate(img.planes, kernel, axis=2)
    out = _convolve1d_replicate(out, kernel, axis=1)
    return ImagePlanes.from_clamped(out)


def _keep_rect(
    width: int, height: int, rng, area: tuple[float, float], aspect: tuple[float, float]
) -> tuple[int, int, int, int]:
    """Sample an integer rectangle whose area fraction stays inside ``area``."""
    total = width * height
    frac = rng.uniform(*area)
    ratio = rng.uniform(*aspect)
    target = frac * total
    w = int(round(np.sqrt(target * ratio)))
    w = min(max(w, 1), width)
    h = int(round(target / w))
    h = min(max(h, 1), height)
    lo = int(np.ceil(area[0] * total))
    hi = int(np.floor(area[1] * total))
    if lo <= hi:  # feasible band for integer areas
        for _ in range(width + height):
            if w * h < lo:
                if h < height:
                    h += 1
                elif w < width:
                    w += 1
                else:
                    break
            elif w * h > hi:
                if h > 1 and (w * (h - 1)) >= lo:
                    h -= 1
                elif w > 1:
                    w -= 1
                else:
                    break
            else:
                break
    x0 = int(rng.integers(0, width - w + 1))
    y0 = int(rng.integers(0, height - h + 1))
    return x0, y0, w, h


def random_keep(
    enhanced: ImagePlanes,
    previous: ImagePlanes,
    rng,
    area: tuple[float, float] = (0.1, 0.3),
    aspect: tuple[float, float] = (0.5, 2.0),
) -> ImagePlanes:
    """Overwrite a random rectangle of ``enhanced`` with ``previous`` pixels."""
    if enhanced.planes.shape != previous.planes.shape:
        raise ValidationError("random_keep inputs must share dimensions")
    x0, y0, w, h = _keep_rect(enhanced.width, enhanced.height, rng, area, aspect)
    out = enhanced.planes.copy()
    out[:, y0 : y0 + h, x0 : x0 + w] = previous.planes[:, y0 : y0 + h, x0 : x0 + w]
    return ImagePlanes(out)


def local_transform(
    img: ImagePlanes,
    boxes: list[BBox],
    rng,
    gamma_range: tuple[float, float] = (1.5, 5.0),
) -> ImagePlanes:
    """Darken a random strip inside each box to mimic uneven night lighting.

    Per box: a uniform interior point becomes the strip center; a coin flip
    orients the strip, which spans the full box along the chosen axis and
    half the box along the other, clipped to the box; a gamma exponent
    drawn from ``gamma_range`` is applied to the strip's pixels only.
    """
    if not boxes:
        return img
    out = img.planes.copy()
    h_img, w_img = img.height, img.width
    for box in boxes:
        bx1 = max(0.0, min(box.x1, w_img - 1.0))
        by1 = max(0.0, min(box.y1, h_img - 1.0))
        bx2 = max(bx1 + 1.0, min(box.x2, float(w_img)))
        by2 = max(by1 + 1.0, min(box.y2, float(h_img)))
        cx = rng.uniform(bx1, bx2)
        cy = rng.uniform(by1, by2)
        horizontal = rng.random() < 0.5
        if horizontal:
            x_lo, x_hi = bx1, bx2
            half = (by2 - by1) / 4.0
            y_lo, y_hi = max(by1, cy - half), min(by2, cy + half)
        else:
            y_lo, y_hi = by1, by2
            half = (bx2 - bx1) / 4.0
            x_lo, x_hi = max(bx1, cx - half), min(bx2, cx + half)
        g = rng.uniform(*gamma_range)
        r0, r1 = int(np.floor(y_lo)), int(np.ceil(y_hi))
        c0, c1 = int(np.floor(x_lo)), int(np.ceil(x_hi))
        r1 = max(r1, r0 + 1)
        c1 = max(c1, c0 + 1)
        region = out[:, r0:r1, c0:c1]
        out[:, r0:r1, c0:c1] = np.power(region, g)
    return ImagePlanes.from_clamped(out)


def stage_rngs(seed: int) -> dict[str, np.random.Generator]:
    """Independent per-stage generators derived from one image-level seed.

    This derivation is part of the pipeline contract: composing the stage
    functions by hand with these generators reproduces the pipeline output.
    """
    entropy = int(seed) & (2**63 - 1)
    return {
        name: np.random.default_rng(np.random.SeedSequence(entropy=entropy, spawn_key=(k,)))
        for k, name in enumerate(STAGE_ORDER)
    }


def enhance_pipeline(
    img: ImagePlanes,
    boxes: list[BBox],
    prior: NightPrior,
    cfg: EnhanceConfig,
    rng,
) -> ImagePlanes:
    """Run the full night-prior pipeline on one image.

    Stage order is fixed: blur, gamma, keep-back, brightness, contrast,
    noise, local strips.  Each stage fires on its own Bernoulli gate and
    draws its parameters from its own substream (see :func:`stage_rngs`),
    seeded by one integer taken from ``rng``, so a fixed seed gives
    bit-identical output.
    """
    image_seed = int(rng.integers(0, 2**63))
    rngs = stage_rngs(image_seed)
    prev = img  # image state before the most recent applied stage
    cur = img

    r = rngs["blur"]
    if r.random() < cfg.blur_p:
        prev, cur = cur, gaussian_blur(cur, r.uniform(*cfg.blur_sigma))

    r = rngs["gamma"]
    if r.random() < cfg.gamma_p:
        prev, cur = cur, gamma_transform(cur, r.uniform(*cfg.gamma_range))

    r = rngs["keep"]
    if r.random() < cfg.keep_p:
        prev, cur = cur, random_keep(cur, prev, r, cfg.keep_area, cfg.keep_aspect)

    r = rngs["brightness"]
    if r.random() < cfg.brightness_p:
        beta = r.uniform(*cfg.brightness_beta)
        prev, cur = cur, brightness_transform(cur, prior, beta, cfg.brightness_literal_sign)

    r = rngs["contrast"]
    if r.random() < cfg.contrast_p:
        prev, cur = cur, contrast_transform(cur, prior, r.uniform(*cfg.contrast_beta))

    r = rngs["noise"]
    if r.random() < cfg.noise_p:
        prev, cur = cur, gaussian_noise(cur, r, cfg.noise_std)

    r = rngs["local"]
    if r.random() < cfg.local_p:
        prev, cur = cur, local_transform(cur, boxes, r, cfg.local_gamma_range)

    return cur
