"""Spatial gating and semantic matching of HOI predictions to ground truth."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .simtable import SimilarityTable
from .wordnet import SynsetId, sense_number

__all__ = [
    "BBox",
    "HoiClass",
    "HoiGroundTruth",
    "HoiPrediction",
    "Aggregator",
    "MatchRecord",
    "FpAssignment",
    "iou",
    "box_match",
    "component_similarity",
    "instance_similarity",
    "match_image",
    "disambiguate",
    "group_by_image",
]

# a prediction label is a resolved synset key or a candidate pool of keys
Label = Union[str, tuple[str, ...]]


class MatchError(ValueError):
    pass


@dataclass(frozen=True)
class BBox:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        vals = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(v) for v in vals):
            raise MatchError(f"non-finite box coordinates {vals}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise MatchError(f"degenerate box {vals}: need x1<x2 and y1<y2")

    @classmethod
    def of(cls, seq: Sequence[float]) -> "BBox":
        if len(seq) != 4:
            raise MatchError(f"box needs 4 coordinates, got {len(seq)}")
        return cls(*(float(v) for v in seq))

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True, order=True)
class HoiClass:
    verb: str
    object: str

    def __str__(self) -> str:
        return f"{self.verb} {self.object}"


@dataclass(frozen=True)
class HoiGroundTruth:
    image_id: str
    human_box: BBox
    object_box: BBox
    verb: str
    object: str

    def __post_init__(self) -> None:
        if ".v." not in self.verb:
            raise MatchError(f"ground-truth verb {self.verb!r} is not a verb synset")
        if ".n." not in self.object:
            raise MatchError(f"ground-truth object {self.object!r} is not a noun synset")

    @property
    def class_id(self) -> HoiClass:
        return HoiClass(self.verb, self.object)


@dataclass(frozen=True)
class HoiPrediction:
    image_id: str
    human_box: BBox
    object_box: BBox
    verb: Label
    object: Label
    confidence: Optional[float] = None

    def __post_init__(self) -> None:
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise MatchError(f"confidence {self.confidence} outside [0, 1]")


class AggKind(str, enum.Enum):
    ARITHMETIC = "arithmetic"
    GEOMETRIC = "geometric"
    MINIMUM = "minimum"


@dataclass(frozen=True)
class Aggregator:
    kind: AggKind = AggKind.ARITHMETIC
    weight: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", AggKind(self.kind))
        if not 0.0 <= self.weight <= 1.0:
            raise MatchError(f"aggregator weight {self.weight} outside [0, 1]")

    def __call__(self, v: float, o: float) -> float:
        if self.kind is AggKind.ARITHMETIC:
            return self.weight * v + (1.0 - self.weight) * o
        if self.kind is AggKind.GEOMETRIC:
            return math.sqrt(v * o)
        return min(v, o)

    def describe(self) -> dict:
        d = {"kind": self.kind.value}
        if self.kind is AggKind.ARITHMETIC:
            d["weight"] = self.weight
        return d


@dataclass(frozen=True)
class MatchRecord:
    gt_index: int
    cls: HoiClass
    pred_index: Optional[int]
    similarity: float
    confidence: Optional[float]

    @property
    def matched(self) -> bool:
        return self.pred_index is not None


@dataclass(frozen=True)
class FpAssignment:
    pred_index: int
    cls: HoiClass
    similarity: float
    confidence: Optional[float]


def box_match(p: HoiPrediction, g: HoiGroundTruth, theta: float = 0.5) -> bool:
    return iou(p.human_box, g.human_box) >= theta and iou(p.object_box, g.object_box) >= theta


def disambiguate(pool: Sequence["str | SynsetId"], gt: "str | SynsetId", table: SimilarityTable) -> str:
    """Pool member most similar to ``gt``; ties go to the lower sense number,
    then key order."""
    if not pool:
        raise MatchError("cannot disambiguate an empty candidate pool")
    keys = [c.key if isinstance(c, SynsetId) else str(c) for c in pool]
    return min(keys, key=lambda k: (-table.lookup(k, gt), sense_number(k), k))


def component_similarity(table: SimilarityTable, pred: Label, gt: str) -> float:
    if isinstance(pred, tuple):
        if not pred:
            return 0.0  # unresolvable open-vocabulary label
        return table.lookup(disambiguate(pred, gt, table), gt)
    return table.lookup(pred, gt)


def instance_similarity(
    p: HoiPrediction,
    g: "HoiGroundTruth | HoiClass",
    verb_table: SimilarityTable,
    object_table: SimilarityTable,
    agg: Aggregator = Aggregator(),
) -> float:
    v = component_similarity(verb_table, p.verb, g.verb)
    o = component_similarity(object_table, p.object, g.object)
    return agg(v, o)


def match_image(
    gts: Sequence[HoiGroundTruth],
    preds: Sequence[HoiPrediction],
    verb_table: SimilarityTable,
    object_table: SimilarityTable,
    theta: float = 0.5,
    delta: float = 0.0,
    agg: Aggregator = Aggregator(),
    fp_classes: "Sequence[HoiClass] | None" = None,
) -> tuple[list[MatchRecord], list[FpAssignment]]:
    """Greedy one-to-one matching for one image, GTs in annotation order.

    A GT takes the unmatched box-matching prediction of highest positive
    instance similarity (ties: higher confidence, then lower index).  Every
    prediction left over is charged to its most similar class, drawn from
    the image's GT classes unless ``fp_classes`` supplies a global set, when
    that similarity is at least ``delta``.
    """
    ids = {g.image_id for g in gts} | {p.image_id for p in preds}
    if len(ids) > 1:
        raise MatchError(f"match_image got records from several images: {sorted(ids)}")

    matched = [False] * len(preds)
    records: list[MatchRecord] = []
    for j, g in enumerate(gts):
        best = None
        best_key = None
        for i, p in enumerate(preds):
            if matched[i] or not box_match(p, g, theta):
                continue
            s = instance_similarity(p, g, verb_table, object_table, agg)
            if s <= 0.0:
                continue
            conf = p.confidence if p.confidence is not None else -math.inf
            key = (-s, -conf, i)
            if best_key is None or key < best_key:
                best, best_key = i, key
        if best is None:
            records.append(MatchRecord(j, g.class_id, None, 0.0, None))
        else:
            matched[best] = True
            records.append(MatchRecord(j, g.class_id, best, -best_key[0], preds[best].confidence))

    classes = list(fp_classes) if fp_classes is not None else list(dict.fromkeys(g.class_id for g in gts))
    fps: list[FpAssignment] = []
    if classes:
        for i, p in enumerate(preds):
            if matched[i]:
                continue
            sigma, cls = max(
                ((instance_similarity(p, c, verb_table, object_table, agg), c) for c in classes),
                key=lambda t: t[0],
            )
            if sigma >= delta:
                fps.append(FpAssignment(i, cls, sigma, p.confidence))
    return records, fps


def group_by_image(
    gts: Sequence[HoiGroundTruth], preds: Sequence[HoiPrediction]
) -> list[tuple[str, list[HoiGroundTruth], list[HoiPrediction]]]:
    """Per-image record lists; images ordered by first appearance in the GT
    list, then prediction-only images by first appearance."""
    order: dict[str, tuple[list, list]] = {}
    for g in gts:
        order.setdefault(g.image_id, ([], []))[0].append(g)
    for p in preds:
        order.setdefault(p.image_id, ([], []))[1].append(p)
    return [(img, g, p) for img, (g, p) in order.items()]
