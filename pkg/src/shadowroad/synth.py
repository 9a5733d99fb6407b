"""Synthetic road frames with exact ground truth.

A frame is a road trapezoid over a uniform background, darkened inside
rectangular shadow bands and perturbed by seeded uniform noise. Ground
truth comes from the geometry, never from the rendered pixels.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .colorfeat import polygon_mask

ROAD_COLOR = (0.38, 0.40, 0.50)
BACKGROUND_COLOR = (0.60, 0.55, 0.45)
DEFAULT_NOISE = 0.005


class DegenerateGeometry(ValueError):
    pass


@dataclass(frozen=True)
class ShadowBand:
    """Rectangle ``[x0, x1) x [y0, y1)`` scaled by ``attenuation``."""

    x0: int
    y0: int
    x1: int
    y1: int
    attenuation: float


@dataclass(frozen=True)
class SyntheticScene:
    width: int = 320
    height: int = 240
    # road trapezoid: (x, y) vertices, bottom edge first
    road: tuple[tuple[float, float], ...] = ((16.0, 240.0), (304.0, 240.0), (176.0, 72.0), (144.0, 72.0))
    road_color: tuple[float, float, float] = ROAD_COLOR
    background_color: tuple[float, float, float] = BACKGROUND_COLOR
    shadows: tuple[ShadowBand, ...] = field(default_factory=tuple)
    noise: float = DEFAULT_NOISE
    seed: int = 0


def _check(spec: SyntheticScene) -> None:
    if spec.width < 1 or spec.height < 1:
        raise DegenerateGeometry("frame must be at least 1x1")
    if len(spec.road) < 3:
        raise DegenerateGeometry("road polygon needs at least three vertices")
    for band in spec.shadows:
        if not 0.0 < band.attenuation < 1.0:
            raise DegenerateGeometry(f"attenuation {band.attenuation} not in (0, 1)")
        if band.x1 <= band.x0 or band.y1 <= band.y0:
            raise DegenerateGeometry(f"empty shadow band {band}")
        if band.x1 <= 0 or band.y1 <= 0 or band.x0 >= spec.width or band.y0 >= spec.height:
            raise DegenerateGeometry(f"shadow band {band} misses the frame")
    if spec.noise < 0:
        raise DegenerateGeometry("noise amplitude must be non-negative")


def generate_scene(spec: SyntheticScene) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Render ``spec``; returns ``(image, road_truth, shadow_truth)``."""
    _check(spec)
    shape = (spec.height, spec.width)
    truth = polygon_mask(shape, spec.road)
    if not truth.any():
        raise DegenerateGeometry("road polygon covers no pixel")
    img = np.where(truth[..., None], np.asarray(spec.road_color), np.asarray(spec.background_color))
    gain = np.ones(shape)
    for band in spec.shadows:
        gain[max(band.y0, 0):band.y1, max(band.x0, 0):band.x1] *= band.attenuation
    img = img * gain[..., None]
    if spec.noise > 0:
        rng = np.random.default_rng(spec.seed)
        img = img + rng.uniform(-spec.noise, spec.noise, size=img.shape)
    return np.clip(img, 0.0, 1.0), truth, gain < 1.0


def benchmark_scenes(n_scenes: int = 10, seeds_per_scene: int = 10, width: int = 320,
                     height: int = 240, attenuation: tuple[float, float] = (0.4, 0.6),
                     master_seed: int = 2024, shadows: bool = True) -> list[SyntheticScene]:
    """Scenes with a full-width shadow band across the road, each rendered
    with ``seeds_per_scene`` noise seeds (frames of one scene are adjacent).

    Road geometry, band position and attenuation vary per scene. Bands stay
    between 30% and 78% of the height, so the bottom fifth of every frame
    is unshadowed road.
    """
    rng = np.random.default_rng(master_seed)
    out = []
    for s in range(n_scenes):
        horizon = height * rng.uniform(0.25, 0.35)
        top_c = width * rng.uniform(0.4, 0.6)
        top_w = width * rng.uniform(0.06, 0.14)
        bot_c = width * rng.uniform(0.45, 0.55)
        bot_w = width * rng.uniform(0.85, 1.0)
        road = (
            (bot_c - bot_w / 2, float(height)),
            (bot_c + bot_w / 2, float(height)),
            (top_c + top_w / 2, horizon),
            (top_c - top_w / 2, horizon),
        )
        bands: tuple[ShadowBand, ...] = ()
        if shadows:
            thick = int(height * rng.uniform(0.08, 0.18))
            y0 = int(rng.uniform(0.30 * height, 0.78 * height - thick))
            bands = (ShadowBand(0, y0, width, y0 + thick, float(rng.uniform(*attenuation))),)
        base = SyntheticScene(width=width, height=height, road=road, shadows=bands)
        out.extend(replace(base, seed=1000 * s + k) for k in range(seeds_per_scene))
    return out
