"""Frame and stream orchestration of the four recognition phases."""

from __future__ import annotations

import dataclasses
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from . import colorfeat, metrics, morphpost, shadowfilter, svmseg
from .imagecore import (
    DimensionMismatchError,
    StructuringElement,
    check_rgb,
    save_gray,
    save_image,
    save_mask,
)

log = logging.getLogger(__name__)

THREADS_ENV = "SHADOWROAD_THREADS"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    # "default" or "x,y;x,y;..." polygon in pixel coordinates
    training_region: str = "default"
    d_max: float = colorfeat.DEFAULT_D_MAX
    filtering_enabled: bool = True
    min_shadow_area: int = shadowfilter.DEFAULT_MIN_AREA
    max_shadow_brightness: float = shadowfilter.DEFAULT_MAX_RELATIVE_BRIGHTNESS
    se_detect: str = "square:3"
    se_post: str = "square:3"
    se_fill: str = "cross:3"
    svm_c: float = svmseg.DEFAULT_C
    svm_tol: float = svmseg.DEFAULT_TOL
    samples_per_class: int = svmseg.DEFAULT_SAMPLES_PER_CLASS
    seed: int = 0
    open_first: bool = True
    fill_holes: bool = True
    keep_largest: bool = True
    group_size: int = 10
    output_dir: Optional[str] = None
    dump_stages: bool = False

    def __post_init__(self):
        for name in ("d_max", "min_shadow_area", "max_shadow_brightness", "svm_c", "svm_tol",
                     "samples_per_class", "group_size"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"config: {name} must be positive")
        if self.seed < 0:
            raise ConfigError("config: seed must be non-negative")
        for name in ("se_detect", "se_post", "se_fill"):
            try:
                StructuringElement.parse(getattr(self, name))
            except ValueError as exc:
                raise ConfigError(f"config: {name}: {exc}") from None
        self.training_polygon((10**6, 10**6))

    def training_polygon(self, shape):
        if self.training_region.strip() == "default":
            return colorfeat.default_training_polygon(shape)
        try:
            pts = [tuple(float(v) for v in p.split(",")) for p in self.training_region.split(";")]
        except ValueError:
            raise ConfigError(f"config: bad training_region {self.training_region!r}") from None
        if len(pts) < 3 or any(len(p) != 2 for p in pts):
            raise ConfigError("config: training_region needs at least three x,y points")
        return pts

    @property
    def morph(self) -> morphpost.MorphConfig:
        return morphpost.MorphConfig(
            se=StructuringElement.parse(self.se_post),
            open_first=self.open_first,
            fill_holes=self.fill_holes,
            keep_largest=self.keep_largest,
            fill_se=StructuringElement.parse(self.se_fill),
        )

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


def _coerce(name: str, typ, text: str):
    text = text.strip()
    if typ in (bool, "bool"):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config: {name} expects a boolean, got {text!r}")
    if typ in (int, "int"):
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"config: {name} expects an integer, got {text!r}") from None
    if typ in (float, "float"):
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"config: {name} expects a number, got {text!r}") from None
    return text


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    """Parse ``key = value`` lines (``#`` starts a comment) into a config."""
    base = base or PipelineConfig()
    types = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}
    changes = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"config line {lineno}: expected key = value")
        if key not in types:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        typ = types[key]
        if typ == "Optional[str]":
            typ = str
        changes[key] = _coerce(key, typ, value)
    return dataclasses.replace(base, **changes)


def load_config(path, base: PipelineConfig | None = None) -> PipelineConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, base)


@dataclass
class ModelState:
    """Models fitted on the first frame and reused for the rest."""

    road_model: colorfeat.RoadColorModel | None = None
    svm: svmseg.SvmModel | None = None


@dataclass
class FrameResult:
    frame_id: str
    candidates_raw: np.ndarray
    shadow_mask: np.ndarray
    compensated: np.ndarray
    candidates: np.ndarray
    svm_mask: np.ndarray
    road_mask: np.ndarray
    counts: metrics.ConfusionCounts | None = None
    ndi: np.ndarray | None = None
    refine_stages: dict = field(default_factory=dict)

    @property
    def report(self) -> metrics.RateReport | None:
        return metrics.rates(self.counts) if self.counts is not None else None


def fit_models(img, cfg: PipelineConfig, state: ModelState | None = None) -> ModelState:
    """Fill in whatever ``state`` lacks using this frame."""
    state = ModelState() if state is None else dataclasses.replace(state)
    img = check_rgb(img)
    if state.road_model is None:
        poly = cfg.training_polygon(img.shape[:2])
        state.road_model = colorfeat.fit_road_model(colorfeat.training_pixels(img, poly))
    if state.svm is None:
        compensated = _filtered(img, cfg)[0]
        cand = colorfeat.extract_candidates(compensated, state.road_model, cfg.d_max)
        feats, labels = svmseg.build_training_set(compensated, cand, cfg.samples_per_class, cfg.seed)
        try:
            state.svm = svmseg.train(feats, labels, C=cfg.svm_c, tol=cfg.svm_tol)
        except svmseg.TrainingNotConverged as exc:
            log.warning("%s; using the last iterate", exc)
            state.svm = exc.model
    return state


def _filtered(img, cfg: PipelineConfig):
    if not cfg.filtering_enabled:
        return img, np.zeros(img.shape[:2], dtype=bool), None
    rep = shadowfilter.detect_and_remove(
        img,
        StructuringElement.parse(cfg.se_detect),
        cfg.min_shadow_area,
        cfg.max_shadow_brightness,
    )
    return rep.image, rep.shadow_mask, rep.ndi


def run_frame(img, cfg: PipelineConfig, state: ModelState | None = None,
              truth=None, frame_id: str = "0") -> tuple[FrameResult, ModelState]:
    """Run all four phases on one frame.

    Missing models in ``state`` are fitted on this frame first. Returns the
    frame result and the (possibly completed) model state.
    """
    img = check_rgb(img)
    if state is None or state.road_model is None or state.svm is None:
        state = fit_models(img, cfg, state)
    cand_raw = colorfeat.extract_candidates(img, state.road_model, cfg.d_max)
    compensated, shadow, ndi = _filtered(img, cfg)
    cand = colorfeat.extract_candidates(compensated, state.road_model, cfg.d_max)
    svm_mask = svmseg.segment(compensated, state.svm)
    stages = morphpost.refine_stages(svm_mask, cfg.morph)
    road = stages["final"]
    counts = None
    if truth is not None:
        truth = np.asarray(truth, dtype=bool)
        if truth.shape != road.shape:
            raise DimensionMismatchError(f"dimension mismatch: frame {frame_id}")
        counts = metrics.confusion(road, truth)
    result = FrameResult(
        frame_id=str(frame_id),
        candidates_raw=cand_raw,
        shadow_mask=shadow,
        compensated=compensated,
        candidates=cand,
        svm_mask=svm_mask,
        road_mask=road,
        counts=counts,
        ndi=ndi,
        refine_stages=stages,
    )
    return result, state


@dataclass
class Frame:
    frame_id: str
    image: np.ndarray
    truth: np.ndarray | None = None


@dataclass
class StreamResult:
    results: list[FrameResult]
    failures: list[tuple[str, str]]
    state: ModelState | None

    @property
    def counts(self) -> list[tuple[str, metrics.ConfusionCounts]]:
        return [(r.frame_id, r.counts) for r in self.results if r.counts is not None]

    def csv(self, group_size: int = 10, extra: dict | None = None) -> str | None:
        counts = self.counts
        if not counts:
            return None
        return metrics.metrics_csv(counts, group_size, extra)

    def groups(self, group_size: int = 10) -> list[metrics.GroupSummary]:
        return metrics.summarize(self.counts, group_size)


def worker_count() -> int:
    cap = os.environ.get(THREADS_ENV)
    default = min(4, os.cpu_count() or 1)
    if not cap:
        return default
    try:
        return max(1, int(cap))
    except ValueError:
        log.warning("ignoring non-integer %s=%r", THREADS_ENV, cap)
        return default


def run_stream(frames: Iterable[Frame], cfg: PipelineConfig,
               state: ModelState | None = None) -> StreamResult:
    """Run a stream: models come from the first frame that processes cleanly,
    then the remaining frames run (possibly concurrently) with them frozen.

    Failing frames are logged and skipped. Results keep input order.
    """
    frames = list(frames)
    if not frames:
        raise ValueError("empty stream")
    results: dict[int, FrameResult] = {}
    failures: list[tuple[int, str, str]] = []
    pending = list(range(len(frames)))
    while pending and (state is None or state.svm is None or state.road_model is None):
        k = pending.pop(0)
        f = frames[k]
        try:
            results[k], state = run_frame(f.image, cfg, state, f.truth, f.frame_id)
        except Exception as exc:  # noqa: BLE001 - one bad frame must not stop the stream
            log.error("frame %s failed: %s", f.frame_id, exc)
            failures.append((k, f.frame_id, str(exc)))

    def work(k):
        f = frames[k]
        try:
            return k, run_frame(f.image, cfg, state, f.truth, f.frame_id)[0], None
        except Exception as exc:  # noqa: BLE001
            log.error("frame %s failed: %s", f.frame_id, exc)
            return k, None, str(exc)

    n_workers = min(worker_count(), max(1, len(pending)))
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            outcomes = list(pool.map(work, pending))
    else:
        outcomes = [work(k) for k in pending]
    for k, res, err in outcomes:
        if res is not None:
            results[k] = res
        else:
            failures.append((k, frames[k].frame_id, err))
    failures.sort()
    ordered = [results[k] for k in sorted(results)]
    out = StreamResult(ordered, [(fid, msg) for _, fid, msg in failures], state)
    if cfg.output_dir:
        write_outputs(out, cfg)
    return out


def write_outputs(stream: StreamResult, cfg: PipelineConfig) -> None:
    """Write road masks, optional stage dumps and ``metrics.csv``."""
    root = Path(cfg.output_dir)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    for r in stream.results:
        save_mask(r.road_mask, root / "masks" / f"{r.frame_id}.pgm")
        if cfg.dump_stages:
            stage_dir = root / "stages" / r.frame_id
            stage_dir.mkdir(parents=True, exist_ok=True)
            save_mask(r.candidates_raw, stage_dir / "1_candidates_raw.pgm")
            save_mask(r.shadow_mask, stage_dir / "2_shadow.pgm")
            if r.ndi is not None:
                save_gray(r.ndi, stage_dir / "2_ndi.pgm", -1.0, 1.0)
            save_image(r.compensated, stage_dir / "2_compensated.png")
            save_mask(r.candidates, stage_dir / "2_candidates.pgm")
            save_mask(r.svm_mask, stage_dir / "3_svm.pgm")
            for name, m in r.refine_stages.items():
                save_mask(m, stage_dir / f"4_{name}.pgm")
    text = stream.csv(cfg.group_size)
    if text is not None:
        (root / "metrics.csv").write_text(text)


def compare(frames: list[Frame], cfg: PipelineConfig) -> dict[str, StreamResult]:
    """Run the stream with and without shadow filtering."""
    out = {}
    for label, enabled in (("with_filter", True), ("without_filter", False)):
        out[label] = run_stream(frames, cfg.replace(filtering_enabled=enabled, output_dir=None))
    return out


def comparison_csv(runs: dict[str, StreamResult], group_size: int = 10) -> str:
    """Per-group pooled rates, one row per (group, variant) pair."""
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["group", "variant", "first", "last", "tp", "tn", "fp", "fn",
                     *metrics.RATE_NAMES])
    summaries = {k: v.groups(group_size) for k, v in runs.items()}
    n = max(len(s) for s in summaries.values())
    for g in range(n):
        for variant, groups in summaries.items():
            if g >= len(groups):
                continue
            s = groups[g]
            c = s.counts
            writer.writerow([g + 1, variant, s.first, s.last, c.tp, c.tn, c.fp, c.fn,
                             *(metrics.format_rate(getattr(s.micro, k)) for k in metrics.RATE_NAMES)])
    return buf.getvalue()
