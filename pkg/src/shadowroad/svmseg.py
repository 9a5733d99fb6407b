"""Linear soft-margin SVM trained by sequential minimal optimization.

The dual

    maximize   sum(l) - 1/2 sum_ij l_i l_j y_i y_j <x_i, x_j>
    subject to sum(l_i y_i) = 0,  0 <= l_i <= C

is solved two multipliers at a time, always picking the maximal violating
pair. With a linear kernel the weight vector is kept explicitly, so each
step costs O(n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imagecore import check_mask, check_rgb

DEFAULT_C = 10.0
DEFAULT_TOL = 1e-3
DEFAULT_MAX_PASSES = 10_000
DEFAULT_SAMPLES_PER_CLASS = 500


class DegenerateLabels(ValueError):
    """Training data lacks one of the two classes."""


class TrainingNotConverged(RuntimeError):
    """The iteration cap was hit; ``model`` holds the last iterate."""

    def __init__(self, message: str, model: "SvmModel"):
        super().__init__(message)
        self.model = model


@dataclass(frozen=True)
class SvmModel:
    w: np.ndarray
    b: float
    lambdas: np.ndarray
    support_vectors: np.ndarray
    support_labels: np.ndarray
    support_lambdas: np.ndarray
    C: float
    converged: bool = True
    iterations: int = 0

    @property
    def degenerate(self) -> bool:
        """True when the hyperplane normal vanished (zero margin)."""
        return not np.any(np.abs(self.w) > 1e-12)

    def save(self, path) -> None:
        def fmt(values):
            return " ".join(repr(float(v)) for v in np.ravel(values))

        lines = [
            f"w = {fmt(self.w)}",
            f"b = {self.b!r}",
            f"C = {self.C!r}",
            f"n_support = {len(self.support_labels)}",
            f"support_labels = {fmt(self.support_labels)}",
            f"support_lambdas = {fmt(self.support_lambdas)}",
            f"support_vectors = {fmt(self.support_vectors)}",
        ]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "SvmModel":
        kv = {}
        for line in Path(path).read_text().splitlines():
            key, sep, value = line.partition("=")
            if sep:
                kv[key.strip()] = value.split()
        lam = np.array(kv["support_lambdas"], dtype=float)
        return cls(
            w=np.array(kv["w"], dtype=float),
            b=float(kv["b"][0]),
            lambdas=lam,
            support_vectors=np.array(kv["support_vectors"], dtype=float).reshape(-1, 3),
            support_labels=np.array(kv["support_labels"], dtype=float),
            support_lambdas=lam,
            C=float(kv["C"][0]),
        )


def _as_training_data(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.ndim != 2 or x.shape[0] != y.size:
        raise ValueError("features must be (n, d) with one label per row")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if y.size < 2 or np.all(y == y[0]):
        raise DegenerateLabels("degenerate labels: both classes are required")
    return x, y


def _bias(x, y, lam, w, C, m, M) -> float:
    free = (lam > 0) & (lam < C)
    if free.any():
        return float(np.mean(y[free] - x[free] @ w))
    return 0.5 * (m + M)


def train(x, y, C: float = DEFAULT_C, tol: float = DEFAULT_TOL,
          max_passes: int = DEFAULT_MAX_PASSES) -> SvmModel:
    """Fit a linear SVM on rows of ``x`` with labels ``y`` in {-1, +1}.

    Stops once the maximal KKT violation ``m - M`` is at most ``tol``, which
    bounds every per-sample KKT residual by ``tol``. ``C`` may be ``inf``
    for a hard margin. Raises :class:`TrainingNotConverged` after
    ``max_passes * n`` pair updates.
    """
    x, y = _as_training_data(x, y)
    if not C > 0:
        raise ValueError("C must be positive")
    if not tol > 0:
        raise ValueError("tol must be positive")
    n = y.size
    lam = np.zeros(n)
    w = np.zeros(x.shape[1])
    grad = -np.ones(n)  # y_i <w, x_i> - 1
    pos = y > 0
    max_iter = max_passes * n
    it = 0
    m = M = 0.0
    converged = False
    while it < max_iter:
        score = -y * grad
        at_upper = lam >= C
        at_zero = lam <= 0
        up = (pos & ~at_upper) | (~pos & ~at_zero)
        low = (pos & ~at_zero) | (~pos & ~at_upper)
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        m, M = score[i], score[j]
        if m - M <= tol:
            converged = True
            break
        diff = x[i] - x[j]
        eta = float(diff @ diff)
        step = (m - M) / eta if eta > 0 else math.inf
        step = min(step,
                   C - lam[i] if pos[i] else lam[i],
                   lam[j] if pos[j] else C - lam[j])
        if not math.isfinite(step):
            raise TrainingNotConverged(
                "training did not converge: unbounded dual (identical points, infinite C)",
                _model(x, y, lam, w, C, m, M, False, it),
            )
        lam[i] += y[i] * step
        lam[j] -= y[j] * step
        for k in (i, j):
            if lam[k] < 1e-15 * max(1.0, step):
                lam[k] = 0.0
            elif lam[k] > C - 1e-12 * C:
                lam[k] = C
        w = w + step * diff
        grad = y * (x @ w) - 1.0
        it += 1
    model = _model(x, y, lam, w, C, m, M, converged, it)
    if not converged:
        raise TrainingNotConverged(
            f"training did not converge after {it} pair updates (violation {m - M:.3g})", model
        )
    return model


def _model(x, y, lam, w, C, m, M, converged, it) -> SvmModel:
    # recompute w from the multipliers to shed accumulated update drift
    w = (lam * y) @ x
    sv = lam > 0
    return SvmModel(
        w=w,
        b=_bias(x, y, lam, w, C, m, M),
        lambdas=lam.copy(),
        support_vectors=x[sv].copy(),
        support_labels=y[sv].copy(),
        support_lambdas=lam[sv].copy(),
        C=C,
        converged=converged,
        iterations=it,
    )


def dual_objective(x, y, lam) -> float:
    """``sum(l) - 1/2 ||sum l_i y_i x_i||^2`` for a linear kernel."""
    v = (np.asarray(lam) * np.asarray(y)) @ np.asarray(x, dtype=np.float64)
    return float(np.sum(lam) - 0.5 * v @ v)


def decision(model: SvmModel, x) -> np.ndarray:
    """``w . x + b``; positive (or zero) means road."""
    return np.asarray(x, dtype=np.float64) @ model.w + model.b


def decision_expansion(model: SvmModel, x) -> np.ndarray:
    """Support-vector form of :func:`decision`."""
    x = np.asarray(x, dtype=np.float64)
    coef = model.support_labels * model.support_lambdas
    return (x @ model.support_vectors.T) @ coef + model.b


def classify(model: SvmModel, x) -> np.ndarray:
    return np.where(decision(model, x) >= 0, 1, -1)


def build_training_set(img, candidates, n_per_class: int = DEFAULT_SAMPLES_PER_CLASS,
                       seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Sample road (+1) pixels from the candidate mask and non-road (-1) ones
    from its complement, without replacement.

    Returns ``(features, labels)`` with positives first.
    """
    img = check_rgb(img)
    cand = check_mask(candidates)
    if cand.shape != img.shape[:2]:
        raise ValueError("candidate mask does not match the image")
    flat = img.reshape(-1, 3)
    pos_idx = np.flatnonzero(cand.ravel())
    neg_idx = np.flatnonzero(~cand.ravel())
    if pos_idx.size == 0 or neg_idx.size == 0:
        raise DegenerateLabels("degenerate labels: candidate mask must contain both classes")
    rng = np.random.default_rng(seed)
    picks = []
    for idx in (pos_idx, neg_idx):
        k = min(n_per_class, idx.size)
        picks.append(np.sort(rng.choice(idx, size=k, replace=False)))
    feats = np.concatenate([flat[picks[0]], flat[picks[1]]])
    labels = np.concatenate([np.ones(picks[0].size), -np.ones(picks[1].size)])
    return feats, labels


def segment(img, model: SvmModel) -> np.ndarray:
    return decision(model, check_rgb(img)) >= 0
