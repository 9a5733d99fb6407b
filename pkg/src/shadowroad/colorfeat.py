"""Road-candidate extraction by color similarity.

A Gaussian model (mean and covariance of known road pixels) is fitted once,
and every pixel whose Mahalanobis distance to the mean is within ``d_max``
becomes a road candidate.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imagecore import check_rgb

MIN_TRAINING_PIXELS = 16
COVARIANCE_EPS = 1e-6
# sqrt of the 95% chi-square quantile with 3 degrees of freedom
DEFAULT_D_MAX = 2.796


class InsufficientTrainingData(ValueError):
    pass


@dataclass(frozen=True)
class RoadColorModel:
    mean: np.ndarray
    covariance: np.ndarray
    covariance_inverse: np.ndarray

    @classmethod
    def from_moments(cls, mean, covariance) -> "RoadColorModel":
        mean = np.asarray(mean, dtype=np.float64).reshape(3)
        cov = np.asarray(covariance, dtype=np.float64).reshape(3, 3)
        cov = 0.5 * (cov + cov.T)
        return cls(mean, cov, np.linalg.inv(cov))

    def save(self, path) -> None:
        """Write ``key = value`` lines: the mean and the row-major covariance."""
        lines = [
            "mean = " + " ".join(repr(float(v)) for v in self.mean),
            "covariance = " + " ".join(repr(float(v)) for v in self.covariance.ravel()),
        ]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "RoadColorModel":
        fields = {}
        for line in Path(path).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"malformed model line: {line!r}")
            fields[key.strip()] = [float(v) for v in value.split()]
        try:
            return cls.from_moments(fields["mean"], fields["covariance"])
        except KeyError as exc:
            raise ValueError(f"model file {path} lacks {exc.args[0]!r}") from None


def fit_road_model(pixels, eps: float = COVARIANCE_EPS) -> RoadColorModel:
    """Fit mean and regularized sample covariance to an ``(n, 3)`` array."""
    x = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
    if x.shape[0] < MIN_TRAINING_PIXELS:
        raise InsufficientTrainingData(
            f"insufficient training data: {x.shape[0]} pixels, need {MIN_TRAINING_PIXELS}"
        )
    cov = np.cov(x, rowvar=False) + eps * np.eye(3)
    return RoadColorModel.from_moments(x.mean(axis=0), cov)


def mahalanobis(model: RoadColorModel, x) -> np.ndarray:
    """Distance of color(s) ``x`` (shape ``(..., 3)``) from the model mean."""
    diff = model.mean - np.asarray(x, dtype=np.float64)
    q = np.einsum("...i,ij,...j->...", diff, model.covariance_inverse, diff)
    return np.sqrt(np.maximum(q, 0.0))


def extract_candidates(img, model: RoadColorModel, d_max: float = DEFAULT_D_MAX) -> np.ndarray:
    if d_max < 0:
        raise ValueError("d_max must be non-negative")
    return mahalanobis(model, check_rgb(img)) <= d_max


def polygon_mask(shape: tuple[int, int], vertices) -> np.ndarray:
    """Pixels whose centers fall inside the polygon given as (x, y) vertices.

    Uses the even-odd rule evaluated row by row.
    """
    h, w = shape
    verts = np.asarray(vertices, dtype=np.float64)
    xs = np.arange(w) + 0.5
    out = np.zeros(shape, dtype=bool)
    nxt = np.roll(verts, -1, axis=0)
    for row in range(h):
        yc = row + 0.5
        crossings = []
        for (x0, y0), (x1, y1) in zip(verts, nxt):
            if (y0 <= yc) != (y1 <= yc):
                crossings.append(x0 + (yc - y0) * (x1 - x0) / (y1 - y0))
        crossings.sort()
        for a, b in zip(crossings[0::2], crossings[1::2]):
            out[row] |= (xs >= a) & (xs < b)
    return out


def default_training_polygon(shape: tuple[int, int]) -> list[tuple[float, float]]:
    """Bottom-center trapezoid: middle half of the width at the bottom edge,
    narrowing to the middle 30% at 80% of the height."""
    h, w = shape
    top = 0.8 * h
    return [(0.25 * w, float(h)), (0.75 * w, float(h)), (0.65 * w, top), (0.35 * w, top)]


def training_pixels(img, region=None) -> np.ndarray:
    """Colors inside ``region`` (polygon vertices or a boolean mask)."""
    img = check_rgb(img)
    shape = img.shape[:2]
    if region is None:
        region = default_training_polygon(shape)
    if isinstance(region, np.ndarray) and region.dtype == bool:
        if region.shape != shape:
            raise ValueError("training mask does not match the frame")
        mask = region
    else:
        verts = np.asarray(region, dtype=np.float64)
        if (verts[:, 0].min() < 0 or verts[:, 1].min() < 0
                or verts[:, 0].max() > shape[1] or verts[:, 1].max() > shape[0]):
            raise ValueError("training region extends outside the frame")
        mask = polygon_mask(shape, verts)
    if mask.sum() < MIN_TRAINING_PIXELS:
        raise InsufficientTrainingData(
            f"insufficient training data: region covers {int(mask.sum())} pixels"
        )
    return img[mask]
