"""Pixel confusion counts, the six classification rates, and CSV output."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .imagecore import DimensionMismatchError, check_mask

RATE_NAMES = ("acc", "err", "tpr", "fnr", "tnr", "fpr")
CSV_FIELDS = ("frame_id", "tp", "tn", "fp", "fn") + RATE_NAMES
NA = "NA"


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def n(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class RateReport:
    """The six rates; ``None`` marks a rate whose denominator is zero."""

    acc: float | None
    err: float | None
    tpr: float | None
    fnr: float | None
    tnr: float | None
    fpr: float | None

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in RATE_NAMES}


def confusion(pred, truth) -> ConfusionCounts:
    pred, truth = check_mask(pred), check_mask(truth)
    if pred.shape != truth.shape:
        raise DimensionMismatchError(f"dimension mismatch: {pred.shape} vs {truth.shape}")
    return ConfusionCounts(
        tp=int(np.count_nonzero(pred & truth)),
        tn=int(np.count_nonzero(~pred & ~truth)),
        fp=int(np.count_nonzero(pred & ~truth)),
        fn=int(np.count_nonzero(~pred & truth)),
    )


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def rates(c: ConfusionCounts) -> RateReport:
    if c.n == 0:
        raise ValueError("rates of an empty frame are undefined")
    pos, neg = c.tp + c.fn, c.tn + c.fp
    return RateReport(
        acc=_ratio(c.tp + c.tn, c.n),
        err=_ratio(c.fn + c.fp, c.n),
        tpr=_ratio(c.tp, pos),
        fnr=_ratio(c.fn, pos),
        tnr=_ratio(c.tn, neg),
        fpr=_ratio(c.fp, neg),
    )


@dataclass(frozen=True)
class GroupSummary:
    """One aggregation group: summed counts, pooled rates, mean per-frame rates."""

    first: str
    last: str
    counts: ConfusionCounts
    micro: RateReport
    macro: RateReport

    @property
    def label(self) -> str:
        return f"{self.first}..{self.last}"


def _macro(reports: list[RateReport]) -> RateReport:
    out = {}
    for name in RATE_NAMES:
        vals = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        out[name] = math.fsum(vals) / len(vals) if vals else None
    return RateReport(**out)


def summarize(frames: list[tuple[str, ConfusionCounts]], group_size: int = 10) -> list[GroupSummary]:
    """Group consecutive frames and pool their counts (micro-average).

    The mean of per-frame rates (macro-average, ignoring undefined rates)
    is carried alongside.
    """
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    if not frames:
        raise ValueError("no frames to aggregate")
    groups = []
    for start in range(0, len(frames), group_size):
        chunk = frames[start:start + group_size]
        total = ConfusionCounts(0, 0, 0, 0)
        for _, c in chunk:
            total = total + c
        groups.append(GroupSummary(
            first=str(chunk[0][0]),
            last=str(chunk[-1][0]),
            counts=total,
            micro=rates(total),
            macro=_macro([rates(c) for _, c in chunk]),
        ))
    return groups


def aggregate(frames: list[tuple[str, ConfusionCounts]], group_size: int = 10) -> list[RateReport]:
    """Pooled rates for each run of ``group_size`` consecutive frames."""
    return [g.micro for g in summarize(frames, group_size)]


def format_rate(value: float | None) -> str:
    return NA if value is None else f"{value:.6f}"


def _row(frame_id, counts: ConfusionCounts | None, report: RateReport) -> list[str]:
    head = [str(frame_id)]
    head += [str(v) for v in (counts.tp, counts.tn, counts.fp, counts.fn)] if counts else [""] * 4
    return head + [format_rate(getattr(report, k)) for k in RATE_NAMES]


def metrics_csv(frames: list[tuple[str, ConfusionCounts]], group_size: int = 10,
                extra: dict | None = None) -> str:
    """CSV text: one row per frame, then per group a pooled and a macro row.

    Group rows use ``group:<first>..<last>`` (pooled counts) and
    ``group-macro:<first>..<last>`` (mean of frame rates, counts left
    blank) as frame id. ``extra`` adds constant leading columns.
    """
    extra = extra or {}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(extra) + list(CSV_FIELDS))
    lead = [str(v) for v in extra.values()]
    for fid, c in frames:
        writer.writerow(lead + _row(fid, c, rates(c)))
    for g in summarize(frames, group_size):
        writer.writerow(lead + _row(f"group:{g.label}", g.counts, g.micro))
        writer.writerow(lead + _row(f"group-macro:{g.label}", None, g.macro))
    return buf.getvalue()
