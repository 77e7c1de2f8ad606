"""Soft TP/FP/FN accounting, soft AP / mAP, mF1 and miss rates."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .matcher import (
    Aggregator,
    AggKind,
    FpAssignment,
    HoiClass,
    HoiGroundTruth,
    HoiPrediction,
    MatchRecord,
    box_match,
    group_by_image,
)

EPS = 1e-8


class MetricsError(ValueError):
    pass


class FnAccounting(str, enum.Enum):
    # matched-GT shortfall (1 - sigma) booked as FP; FN only for unmatched GT
    SHORTFALL_FP = "shortfall-fp"
    # matched-GT shortfall booked as FN
    SHORTFALL_FN = "shortfall-fn"


@dataclass
class SoftCounts:
    tp: float = 0.0
    fp: float = 0.0
    fn: float = 0.0

    def __iadd__(self, other: "SoftCounts") -> "SoftCounts":
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        return self


@dataclass
class ClassAccumulator:
    """Ranked (confidence, soft label) entries for one class.

    Matched GTs add (conf, sigma), unmatched GTs add (0.0, 0.0) and charged
    leftover predictions add (conf, 0.0).
    """

    cls: HoiClass
    n_gt: int = 0
    entries: list[tuple[Optional[float], float]] = field(default_factory=list)

    def merge(self, other: "ClassAccumulator") -> None:
        self.n_gt += other.n_gt
        self.entries.extend(other.entries)


@dataclass(frozen=True)
class PrCurve:
    recall: tuple[float, ...]
    precision: tuple[float, ...]


def soft_counts(
    records: Iterable[MatchRecord],
    fps: Iterable[FpAssignment] = (),
    fn_accounting: FnAccounting = FnAccounting.SHORTFALL_FP,
) -> SoftCounts:
    """TP/FP/FN for the match records and FP charges of one class.

    A confidence threshold is not applied here: low-confidence predictions
    have to be removed before matching, since they would otherwise occupy
    a match slot (see ``evaluation.evaluate``).
    """
    fn_accounting = FnAccounting(fn_accounting)
    c = SoftCounts()
    for r in records:
        if r.matched:
            c.tp += r.similarity
            if fn_accounting is FnAccounting.SHORTFALL_FP:
                c.fp += 1.0 - r.similarity
            else:
                c.fn += 1.0 - r.similarity
        else:
            c.fn += 1.0
    for _ in fps:
        c.fp += 1.0
    return c


def precision_recall(tp: float, fp: float, fn: float) -> tuple[float, float]:
    return tp / (tp + fp + EPS), tp / (tp + fn + EPS)


def f1(precision: float, recall: float) -> float:
    return 2.0 * precision * recall / (precision + recall + EPS)


def mean_f1(values: Iterable[float]) -> float:
    vals = list(values)
    if not vals:
        raise MetricsError("mF1 over an empty class set")
    return sum(vals) / len(vals)


def pr_curve(acc: ClassAccumulator) -> PrCurve:
    if any(conf is None for conf, _ in acc.entries):
        raise MetricsError(f"class {acc.cls}: ranked AP needs a confidence on every prediction")
    order = sorted(range(len(acc.entries)), key=lambda i: -acc.entries[i][0])  # stable
    tp = 0.0
    rec, prec = [], []
    for n, i in enumerate(order, 1):
        tp += acc.entries[i][1]
        fp = n - tp
        prec.append(tp / (tp + fp + EPS))
        rec.append(tp / (acc.n_gt + EPS))
    return PrCurve(tuple(rec), tuple(prec))


def soft_ap(acc: ClassAccumulator) -> float:
    curve = pr_curve(acc)
    ap, prev = 0.0, 0.0
    for r, p in zip(curve.recall, curve.precision):
        ap += (r - prev) * p
        prev = r
    return ap


def soft_map(aps: Mapping[HoiClass, float] | Sequence[float]) -> float:
    vals = list(aps.values()) if isinstance(aps, Mapping) else list(aps)
    if not vals:
        raise MetricsError("mAP over an empty class set")
    return sum(vals) / len(vals)


def accumulate(
    records: Iterable[MatchRecord], fps: Iterable[FpAssignment]
) -> dict[HoiClass, ClassAccumulator]:
    accs: dict[HoiClass, ClassAccumulator] = {}
    for r in records:
        acc = accs.setdefault(r.cls, ClassAccumulator(r.cls))
        acc.n_gt += 1
        acc.entries.append((r.confidence, r.similarity) if r.matched else (0.0, 0.0))
    for f in fps:
        accs.setdefault(f.cls, ClassAccumulator(f.cls)).entries.append((f.confidence, 0.0))
    return accs


def standard_map(
    gts: Sequence[HoiGroundTruth],
    preds: Sequence[HoiPrediction],
    theta: float = 0.5,
    classes: "Sequence[HoiClass] | None" = None,
) -> tuple[float, dict[HoiClass, float]]:
    """Exact-label mAP: a prediction counts only with the GT's exact verb and
    object synsets.  Uses the same image-level greedy order and image-scoped
    FP charging as the soft path, but no similarity tables."""
    accs: dict[HoiClass, ClassAccumulator] = {}
    for _, ig, ip in group_by_image(gts, preds):
        taken = [False] * len(ip)
        for g in ig:
            acc = accs.setdefault(g.class_id, ClassAccumulator(g.class_id))
            acc.n_gt += 1
            cands = [
                i for i, p in enumerate(ip)
                if not taken[i] and p.verb == g.verb and p.object == g.object and box_match(p, g, theta)
            ]
            if cands:
                i = min(cands, key=lambda i: (-_conf(ip[i]), i))
                taken[i] = True
                acc.entries.append((ip[i].confidence, 1.0))
            else:
                acc.entries.append((0.0, 0.0))
        present = {g.class_id for g in ig}
        for i, p in enumerate(ip):
            if not taken[i] and isinstance(p.verb, str) and isinstance(p.object, str):
                c = HoiClass(p.verb, p.object)
                if c in present:
                    accs[c].entries.append((p.confidence, 0.0))
    keep = list(classes) if classes is not None else sorted(accs)
    aps = {c: soft_ap(accs[c]) for c in keep}
    return soft_map(aps), aps


def _conf(p: HoiPrediction) -> float:
    return p.confidence if p.confidence is not None else -math.inf


EXACT_AGGREGATOR = Aggregator(AggKind.MINIMUM)
EXACT_DELTA = 1.0


@dataclass(frozen=True)
class MissRates:
    gt_miss_pct: Optional[float]
    pred_miss_pct: Optional[float]
    gt_total: int
    gt_unmatched: int
    pred_total: int
    pred_unmatched: int


def miss_rates(records: Iterable[MatchRecord], n_predictions: int) -> MissRates:
    """Whole-instance counts: GTs left without a match, and predictions that
    never became a GT's match."""
    recs = list(records)
    gt_unmatched = sum(1 for r in recs if not r.matched)
    pred_matched = sum(1 for r in recs if r.matched)
    gt_total = len(recs)
    return MissRates(
        gt_miss_pct=100.0 * gt_unmatched / gt_total if gt_total else None,
        pred_miss_pct=100.0 * (n_predictions - pred_matched) / n_predictions if n_predictions else None,
        gt_total=gt_total,
        gt_unmatched=gt_unmatched,
        pred_total=n_predictions,
        pred_unmatched=n_predictions - pred_matched,
    )
