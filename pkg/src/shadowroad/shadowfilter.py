"""Shadow detection and compensation.

Shadows are found by thresholding a saturation/intensity normalized
difference index (NDI) with Otsu's method, split into connected components,
and each component is re-lit by matching its per-channel mean and standard
deviation to the ring of non-shadow pixels around it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import morphpost
from .imagecore import StructuringElement, check_mask, check_rgb, rgb_to_hsv

log = logging.getLogger(__name__)

N_BINS = 256
SIGMA_FLOOR = 1e-6
MIN_BUFFER_PIXELS = 4
DEFAULT_MIN_AREA = 20
# a component counts as shadow only if darker than this fraction of its ring
DEFAULT_MAX_RELATIVE_BRIGHTNESS = 0.85


def compute_ndi(hsv) -> np.ndarray:
    """``(S - V) / (S + V)`` per pixel, 0 where both vanish."""
    hsv = np.asarray(hsv, dtype=np.float64)
    s, v = hsv[..., 1], hsv[..., 2]
    total = s + v
    with np.errstate(invalid="ignore", divide="ignore"):
        ndi = np.where(total > 0, (s - v) / total, 0.0)
    return np.clip(ndi, -1.0, 1.0)


@dataclass(frozen=True)
class ShadowThreshold:
    T: float
    level: int
    histogram_bins: np.ndarray


def histogram_levels(values, lo: float, hi: float) -> np.ndarray:
    """Linear 256-level binning of ``values`` over ``[lo, hi]``."""
    if hi <= lo:
        return np.zeros(np.shape(values), dtype=np.int64)
    idx = np.floor((np.asarray(values, dtype=np.float64) - lo) * (N_BINS / (hi - lo)))
    return np.clip(idx, 0, N_BINS - 1).astype(np.int64)


def otsu_threshold(values) -> ShadowThreshold:
    """Otsu threshold of a gray map over 256 linear bins.

    Bin ``t`` is chosen to maximise ``w0 * w1 * (mu0 - mu1)**2`` with class 0
    = bins ``0..t``; ties go to the lowest ``t``. The criterion is compared
    as exact rationals so the choice does not depend on rounding. ``T`` is
    the upper edge of bin ``t`` in the map's own units. A constant map
    yields ``T`` equal to that constant.
    """
    flat = np.asarray(values, dtype=np.float64).ravel()
    if flat.size == 0:
        raise ValueError("otsu_threshold needs at least one value")
    lo, hi = float(flat.min()), float(flat.max())
    hist = np.bincount(histogram_levels(flat, lo, hi), minlength=N_BINS)
    if hi <= lo:
        return ShadowThreshold(T=lo, level=0, histogram_bins=hist)

    counts = [int(c) for c in hist]
    total_n = sum(counts)
    total_s = sum(i * c for i, c in enumerate(counts))
    best_t, best_num, best_den = 0, -1, 1
    n0 = s0 = 0
    for t in range(N_BINS - 1):
        n0 += counts[t]
        s0 += t * counts[t]
        n1 = total_n - n0
        if n0 == 0 or n1 == 0:
            continue
        # proportional to between-class variance: (s0*N - S*n0)^2 / (n0*n1)
        num = (s0 * total_n - total_s * n0) ** 2
        den = n0 * n1
        if best_num < 0 or num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    width = (hi - lo) / N_BINS
    return ShadowThreshold(T=lo + (best_t + 1) * width, level=best_t, histogram_bins=hist)


def binarize(values, T: float) -> np.ndarray:
    return np.asarray(values, dtype=np.float64) >= T


def connected_components(mask, se: StructuringElement = morphpost.SQUARE3) -> list[np.ndarray]:
    """Disjoint connected components of ``mask``, earliest seed first."""
    return morphpost.connected_components(mask, se)


def buffer_area(component, shadow_all, se: StructuringElement = morphpost.SQUARE3) -> np.ndarray:
    """Non-shadow ring obtained by dilating ``component`` and removing shadow."""
    component = check_mask(component)
    return morphpost.dilate(component, se) & ~component & ~check_mask(shadow_all)


@dataclass(frozen=True)
class ShadowComponent:
    component_mask: np.ndarray
    buffer_mask: np.ndarray
    shadow_mean: np.ndarray
    shadow_std: np.ndarray
    buffer_mean: np.ndarray
    buffer_std: np.ndarray

    @property
    def area(self) -> int:
        return int(self.component_mask.sum())


def shadow_component(img, component, buffer) -> ShadowComponent:
    """Measure per-channel mean and (population) std of a shadow and its ring."""
    img = np.asarray(img, dtype=np.float64)
    component, buffer = check_mask(component), check_mask(buffer)
    if not component.any():
        raise ValueError("shadow component is empty")
    if (component & buffer).any():
        raise ValueError("buffer overlaps the shadow component")
    inside = img[component]
    if buffer.any():
        ring = img[buffer]
        b_mean, b_std = ring.mean(axis=0), ring.std(axis=0)
    else:
        b_mean = b_std = np.full(3, np.nan)
    return ShadowComponent(component, buffer, inside.mean(axis=0), inside.std(axis=0), b_mean, b_std)


def compensate(img, comp: ShadowComponent, clip: bool = True) -> np.ndarray:
    """Map shadow pixels so their channel moments match the buffer's.

    ``out = mu_buf + (in - mu_shadow) * sigma_buf / sigma_shadow`` per
    channel; a flat channel (sigma below 1e-6) is set to the buffer mean.
    Components with fewer than four buffer pixels are returned unchanged.
    """
    img = np.asarray(img, dtype=np.float64)
    out = img.copy()
    if comp.buffer_mask.sum() < MIN_BUFFER_PIXELS:
        log.info("shadow component of %d px has no usable buffer; left as is", comp.area)
        return out
    inside = img[comp.component_mask]
    flat = comp.shadow_std < SIGMA_FLOOR
    gain = np.where(flat, 0.0, comp.buffer_std / np.where(flat, 1.0, comp.shadow_std))
    mapped = comp.buffer_mean + (inside - comp.shadow_mean) * gain
    mapped = np.where(flat, comp.buffer_mean, mapped)
    out[comp.component_mask] = np.clip(mapped, 0.0, 1.0) if clip else mapped
    return out


@dataclass
class ShadowReport:
    """Intermediate products of :func:`detect_and_remove`."""

    ndi: np.ndarray
    threshold: ShadowThreshold
    raw_mask: np.ndarray
    shadow_mask: np.ndarray
    image: np.ndarray
    components: list[ShadowComponent]


def detect_and_remove(
    img,
    se: StructuringElement = morphpost.SQUARE3,
    min_area: int = DEFAULT_MIN_AREA,
    max_relative_brightness: float = DEFAULT_MAX_RELATIVE_BRIGHTNESS,
    buffer_se: StructuringElement | None = None,
) -> ShadowReport:
    """Full shadow stage, keeping every intermediate result.

    Components smaller than ``min_area`` are dropped, as are components
    whose mean intensity is not below ``max_relative_brightness`` times the
    intensity of their buffer ring (bright regions with a high index are
    saturated surfaces, not shadows). The rest are compensated one by one,
    largest first, on the progressively updated image.
    """
    img = check_rgb(img)
    buffer_se = buffer_se or morphpost.SQUARE3
    ndi = compute_ndi(rgb_to_hsv(img))
    thr = otsu_threshold(ndi)
    raw = binarize(ndi, thr.T)
    labels, sizes, _ = morphpost.label_components(raw, se)
    order = sorted(
        (k for k, n in enumerate(sizes, start=1) if n >= min_area),
        key=lambda k: (-sizes[k - 1], k),
    )
    out = img.copy()
    accepted = np.zeros(raw.shape, dtype=bool)
    components = []
    for k in order:
        mask = labels == k
        ring = buffer_area(mask, raw, buffer_se)
        if ring.sum() < MIN_BUFFER_PIXELS:
            log.info("shadow component %d (%d px) has an empty buffer; skipped", k, sizes[k - 1])
            continue
        comp = shadow_component(out, mask, ring)
        if comp.shadow_mean.mean() >= max_relative_brightness * comp.buffer_mean.mean():
            continue
        out = compensate(out, comp)
        accepted |= mask
        components.append(comp)
    return ShadowReport(ndi, thr, raw, accepted, out, components)


def remove_shadows(
    img,
    se: StructuringElement = morphpost.SQUARE3,
    min_area: int = DEFAULT_MIN_AREA,
    max_relative_brightness: float = DEFAULT_MAX_RELATIVE_BRIGHTNESS,
) -> tuple[np.ndarray, np.ndarray]:
    """Return the shadow-compensated image and the mask of shadows treated."""
    rep = detect_and_remove(img, se, min_area, max_relative_brightness)
    return rep.image, rep.shadow_mask
