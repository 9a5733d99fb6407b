"""Binary morphology over boolean masks.

Border convention: dilation is clipped to the frame, erosion treats
out-of-frame pixels as background. Closing is the exception, see
:func:`closing`. Connected components and region filling
both use the same geodesic iteration, ``N_k = (N_{k-1} (+) B) & allowed``,
run until it stops changing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .imagecore import StructuringElement, check_mask

log = logging.getLogger(__name__)

SQUARE3 = StructuringElement.square(3)
CROSS3 = StructuringElement.cross(3)


class InvalidSeedError(ValueError):
    """Region-filling seed lies on the boundary set or outside the frame."""


def _shifted(mask: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """``out[y, x] = mask[y + dy, x + dx]``, False where that is off-frame."""
    h, w = mask.shape
    out = np.zeros_like(mask)
    if abs(dy) >= h or abs(dx) >= w:
        return out
    ys, yd = (slice(dy, h), slice(0, h - dy)) if dy >= 0 else (slice(0, h + dy), slice(-dy, h))
    xs, xd = (slice(dx, w), slice(0, w - dx)) if dx >= 0 else (slice(0, w + dx), slice(-dx, w))
    out[yd, xd] = mask[ys, xs]
    return out


def dilate(m, se: StructuringElement = SQUARE3) -> np.ndarray:
    """Union of the translates of ``m`` by every offset of ``se``."""
    m = check_mask(m)
    out = np.zeros_like(m)
    for dy, dx in se.offsets:
        out |= _shifted(m, -dy, -dx)
    return out


def erode(m, se: StructuringElement = SQUARE3) -> np.ndarray:
    """Pixels ``p`` with ``p + b`` in ``m`` for every offset ``b``."""
    m = check_mask(m)
    out = np.ones_like(m)
    for dy, dx in se.offsets:
        out &= _shifted(m, dy, dx)
    return out


def opening(m, se: StructuringElement = SQUARE3) -> np.ndarray:
    return dilate(erode(m, se), se)


def closing(m, se: StructuringElement = SQUARE3) -> np.ndarray:
    """Dilation then erosion, evaluated on a canvas padded with background.

    Without the padding the clipped dilation followed by the erosion would
    strip foreground along the frame edge, and closing would stop being
    extensive.
    """
    m = check_mask(m)
    r = se.radius
    if r == 0:
        return m.copy()
    padded = np.pad(m, r, constant_values=False)
    return erode(dilate(padded, se), se)[r:-r, r:-r]


def boundary(m, se: StructuringElement = SQUARE3) -> np.ndarray:
    """``m`` minus its erosion."""
    m = check_mask(m)
    return m & ~erode(m, se)


def _grow(region: np.ndarray, allowed: np.ndarray, se: StructuringElement, box):
    """Iterate dilate-and-intersect in place.

    ``box`` is the inclusive (y0, y1, x0, x1) bounding box of the starting
    region. Returns the step count and the final bounding box.
    """
    h, w = region.shape
    r = se.radius
    y0, y1, x0, x1 = box
    steps = 1
    while True:
        wy0, wy1 = max(y0 - r, 0), min(y1 + r, h - 1)
        wx0, wx1 = max(x0 - r, 0), min(x1 + r, w - 1)
        win = (slice(wy0, wy1 + 1), slice(wx0, wx1 + 1))
        cur = region[win]
        grown = dilate(cur, se) & allowed[win]
        if np.array_equal(grown, cur):
            return steps, (y0, y1, x0, x1)
        steps += 1
        region[win] = grown
        gy, gx = np.nonzero(grown)
        y0, y1 = wy0 + gy.min(), wy0 + gy.max()
        x0, x1 = wx0 + gx.min(), wx0 + gx.max()


def reconstruct(seed, allowed, se: StructuringElement) -> tuple[np.ndarray, int]:
    """Grow ``seed`` by repeated dilation restricted to ``allowed``.

    Returns the fixed point and the number of dilate-and-intersect steps
    taken, the last (non-changing) step included. Each step only touches
    the bounding box of the current region padded by the element radius.
    """
    allowed = check_mask(allowed)
    region = check_mask(seed) & allowed
    ys, xs = np.nonzero(region)
    if ys.size == 0:
        return region, 1
    steps, _ = _grow(region, allowed, se, (ys.min(), ys.max(), xs.min(), xs.max()))
    return region, steps


def label_components(mask, se: StructuringElement = SQUARE3):
    """Label the connected components of ``mask`` under ``se`` connectivity.

    Seeds are taken in row-major order, so label 1 holds the earliest pixel.
    Returns ``(labels, sizes, steps)``: an int32 label image (0 =
    background) and per-component pixel counts and iteration counts.
    """
    mask = check_mask(mask)
    labels = np.zeros(mask.shape, dtype=np.int32)
    sizes: list[int] = []
    steps: list[int] = []
    flat = labels.ravel()
    w = mask.shape[1]
    remaining = mask.copy()
    region = np.zeros_like(mask)
    for idx in np.flatnonzero(mask):
        if flat[idx]:
            continue
        y, x = divmod(int(idx), w)
        region[y, x] = True
        n, (y0, y1, x0, x1) = _grow(region, remaining, se, (y, y, x, x))
        steps.append(n)
        win = (slice(y0, y1 + 1), slice(x0, x1 + 1))
        comp = region[win]
        sizes.append(int(comp.sum()))
        labels[win][comp] = len(sizes)
        remaining[win] &= ~comp
        region[win] = False
    return labels, sizes, steps


def connected_components(mask, se: StructuringElement = SQUARE3) -> list[np.ndarray]:
    labels, sizes, _ = label_components(mask, se)
    return [labels == k for k in range(1, len(sizes) + 1)]


def keep_largest(m, se: StructuringElement = SQUARE3) -> np.ndarray:
    """The biggest connected component; ties go to the earliest row-major one."""
    labels, sizes, _ = label_components(m, se)
    if not sizes:
        return np.zeros_like(labels, dtype=bool)
    return labels == int(np.argmax(sizes)) + 1


def fill_region(boundary_mask, seed: tuple[int, int], se: StructuringElement = CROSS3) -> np.ndarray:
    """Fill the region around ``seed`` enclosed by ``boundary_mask``.

    Returns the filled pixels together with the boundary itself. A seed in
    the exterior floods the whole exterior.
    """
    bnd = check_mask(boundary_mask)
    y, x = seed
    if not (0 <= y < bnd.shape[0] and 0 <= x < bnd.shape[1]):
        raise InvalidSeedError(f"invalid seed {seed}: outside the frame")
    if bnd[y, x]:
        raise InvalidSeedError(f"invalid seed {seed}: lies on the boundary")
    start = np.zeros_like(bnd)
    start[y, x] = True
    filled, _ = reconstruct(start, ~bnd, se)
    return filled | bnd


def fill_holes(m, se: StructuringElement = CROSS3) -> np.ndarray:
    """Add every background pixel that cannot reach the frame edge.

    The exterior is found with the same iteration as :func:`fill_region`,
    seeded at all background pixels on the frame border.
    """
    m = check_mask(m)
    edge = np.zeros_like(m)
    edge[0, :] = edge[-1, :] = True
    edge[:, 0] = edge[:, -1] = True
    exterior, _ = reconstruct(edge & ~m, ~m, se)
    return ~exterior


@dataclass(frozen=True)
class MorphConfig:
    se: StructuringElement = field(default=SQUARE3)
    open_first: bool = True
    fill_holes: bool = True
    keep_largest: bool = True
    fill_se: StructuringElement = field(default=CROSS3)


def refine_stages(m, cfg: MorphConfig = MorphConfig()) -> dict[str, np.ndarray]:
    """Run the refinement chain, keeping each intermediate mask.

    Steps, in order: opening (if ``open_first``), closing, largest component
    (if ``keep_largest``), hole filling (if ``fill_holes``). The result is
    under ``"final"``.
    """
    stages = {}
    out = check_mask(m)
    if cfg.open_first:
        out = stages["open"] = opening(out, cfg.se)
    out = stages["close"] = closing(out, cfg.se)
    if cfg.keep_largest:
        out = stages["largest"] = keep_largest(out, cfg.se)
    if cfg.fill_holes and out.any():
        out = stages["fill"] = fill_holes(out, cfg.fill_se)
    stages["final"] = out
    return stages


def refine(m, cfg: MorphConfig = MorphConfig()) -> np.ndarray:
    return refine_stages(m, cfg)["final"]
