"""End-to-end evaluation: per-image matching, per-class accumulation and
the report object the CLI serializes."""

from __future__ import annotations

import csv
import enum
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from .matcher import (
    Aggregator,
    FpAssignment,
    HoiClass,
    HoiGroundTruth,
    HoiPrediction,
    MatchRecord,
    group_by_image,
    match_image,
)
from .metrics import (
    EXACT_AGGREGATOR,
    EXACT_DELTA,
    ClassAccumulator,
    FnAccounting,
    MetricsError,
    MissRates,
    PrCurve,
    accumulate,
    f1,
    mean_f1,
    miss_rates,
    pr_curve,
    precision_recall,
    soft_ap,
    soft_counts,
    soft_map,
    standard_map,
)
from .simtable import SimilarityTable
from .wordnet import Pos


class Mode(str, enum.Enum):
    RANKED = "ranked"
    FREE = "free"


@dataclass
class EvalConfig:
    theta: float = 0.5
    delta: float = 0.0
    tau: float = 0.5
    agg: str = "arithmetic"
    weight: float = 0.5
    mode: str = "ranked"
    fn_accounting: str = "shortfall-fp"
    fp_scope: str = "image"
    exact: bool = False
    workers: int = 1
    seed: int = 0
    strict: bool = True

    def __post_init__(self) -> None:
        for name in ("theta", "delta", "tau", "weight"):
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
            setattr(self, name, v)
        Mode(self.mode)
        FnAccounting(self.fn_accounting)
        Aggregator(self.agg, self.weight)
        if self.fp_scope not in ("image", "global"):
            raise ValueError(f"fp_scope must be 'image' or 'global', not {self.fp_scope!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def aggregator(self) -> Aggregator:
        return EXACT_AGGREGATOR if self.exact else Aggregator(self.agg, self.weight)

    @property
    def effective_delta(self) -> float:
        return EXACT_DELTA if self.exact else self.delta

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("workers")  # output must not depend on it
        return d


@dataclass
class ClassResult:
    cls: HoiClass
    n_gt: int
    tp: float
    fp: float
    fn: float
    precision: float
    recall: float
    f1: float
    ap: Optional[float] = None


@dataclass
class EvalReport:
    mode: Mode
    config: dict
    classes: list[ClassResult]
    mf1: float
    soft_map: Optional[float]
    standard_map: Optional[float]
    miss: MissRates
    curves: dict[HoiClass, PrCurve] = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    exclusions: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        def r6(x):
            return None if x is None else round(float(x), 6)

        def r2(x):
            return None if x is None else round(float(x), 2)

        return {
            "mode": self.mode.value,
            "config": self.config,
            "summary": {
                "soft_map": r6(self.soft_map),
                "standard_map": r6(self.standard_map),
                "mf1": r6(self.mf1),
                "gt_miss_rate": r2(self.miss.gt_miss_pct),
                "pred_miss_rate": r2(self.miss.pred_miss_pct),
                "n_classes": len(self.classes),
                "n_gt": self.miss.gt_total,
                "n_pred_scored": self.miss.pred_total,
            },
            "classes": [
                {
                    "verb": c.cls.verb,
                    "object": c.cls.object,
                    "n_gt": c.n_gt,
                    "tp": r6(c.tp),
                    "fp": r6(c.fp),
                    "fn": r6(c.fn),
                    "precision": r6(c.precision),
                    "recall": r6(c.recall),
                    "f1": r6(c.f1),
                    "ap": r6(c.ap),
                }
                for c in self.classes
            ],
            "tables": self.tables,
            "exclusions": self.exclusions,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def per_class_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "N_GT", "TP", "FP", "FN", "precision", "recall", "F1", "AP"])
        for c in self.classes:
            w.writerow([
                str(c.cls), c.n_gt, f"{c.tp:.6f}", f"{c.fp:.6f}", f"{c.fn:.6f}",
                f"{c.precision:.6f}", f"{c.recall:.6f}", f"{c.f1:.6f}",
                "" if c.ap is None else f"{c.ap:.6f}",
            ])
        return buf.getvalue()

    def table_text(self) -> str:
        width = max([len(str(c.cls)) for c in self.classes] + [5])
        lines = [f"{'class':<{width}}  {'N_GT':>4}  {'TP':>8}  {'FP':>8}  {'FN':>8}  {'F1':>8}  {'AP':>8}"]
        for c in self.classes:
            ap = "-" if c.ap is None else f"{c.ap:.4f}"
            lines.append(
                f"{str(c.cls):<{width}}  {c.n_gt:>4}  {c.tp:>8.4f}  {c.fp:>8.4f}  {c.fn:>8.4f}  {c.f1:>8.4f}  {ap:>8}"
            )
        lines.append("")
        if self.soft_map is not None:
            lines.append(f"Soft-mAP      {self.soft_map:.6f}")
            lines.append(f"standard mAP  {self.standard_map:.6f}")
        lines.append(f"mF1           {self.mf1:.6f}")
        gm = "n/a" if self.miss.gt_miss_pct is None else f"{self.miss.gt_miss_pct:.2f}%"
        pm = "n/a" if self.miss.pred_miss_pct is None else f"{self.miss.pred_miss_pct:.2f}%"
        lines.append(f"GT miss rate  {gm}")
        lines.append(f"pred miss     {pm}")
        return "\n".join(lines) + "\n"


@dataclass
class MatchPass:
    per_image: list[tuple[list[MatchRecord], list[FpAssignment]]]
    n_predictions: int

    @property
    def records(self) -> list[MatchRecord]:
        return [r for recs, _ in self.per_image for r in recs]

    @property
    def fps(self) -> list[FpAssignment]:
        return [f for _, fs in self.per_image for f in fs]

    def accumulators(self) -> dict[HoiClass, ClassAccumulator]:
        """Per-class ranking input in image order, each image's GT entries
        before its FP charges; equal confidences keep this order."""
        accs: dict[HoiClass, ClassAccumulator] = {}
        for recs, fps in self.per_image:
            for cls, acc in accumulate(recs, fps).items():
                accs.setdefault(cls, ClassAccumulator(cls)).merge(acc)
        return accs


def run_matching(
    gts: Sequence[HoiGroundTruth],
    preds: Sequence[HoiPrediction],
    verb_table: SimilarityTable,
    object_table: SimilarityTable,
    config: EvalConfig,
    classes: Sequence[HoiClass],
) -> MatchPass:
    """Match every image; images run concurrently and results are merged in
    image order, so the output never depends on ``config.workers``."""
    agg = config.aggregator
    delta = config.effective_delta
    fp_classes = list(classes) if config.fp_scope == "global" else None
    groups = group_by_image(gts, preds)

    def one(group):
        _, ig, ip = group
        return match_image(ig, ip, verb_table, object_table, config.theta, delta, agg, fp_classes)

    if config.workers > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(one, groups))
    else:
        results = [one(g) for g in groups]
    return MatchPass(results, len(preds))


def evaluate(
    gts: Sequence[HoiGroundTruth],
    preds: Sequence[HoiPrediction],
    verb_table: SimilarityTable,
    object_table: SimilarityTable,
    config: "EvalConfig | None" = None,
    class_subset: "Sequence[HoiClass] | None" = None,
    exclusions: "list[dict] | None" = None,
) -> EvalReport:
    config = config or EvalConfig()
    mode = Mode(config.mode)
    if not gts:
        raise MetricsError("no ground-truth annotations")
    if verb_table.pos is not Pos.VERB or object_table.pos is not Pos.NOUN:
        raise MetricsError("verb table must be a verb table and object table a noun table")
    if config.exact:
        verb_table, object_table = SimilarityTable.identity(Pos.VERB), SimilarityTable.identity(Pos.NOUN)

    all_classes = sorted({g.class_id for g in gts})
    if class_subset is not None:
        wanted = set(class_subset)
        reported = [c for c in all_classes if c in wanted]
        if not reported:
            raise MetricsError("class subset selects none of the ground-truth classes")
    else:
        reported = all_classes

    aps: dict[HoiClass, float] = {}
    curves: dict[HoiClass, PrCurve] = {}
    std = None
    if mode is Mode.RANKED:
        missing = [i for i, p in enumerate(preds) if p.confidence is None]
        if missing:
            raise MetricsError(f"ranked mode needs confidences; prediction #{missing[0]} has none")
        ranked = run_matching(gts, preds, verb_table, object_table, config, all_classes)
        accs = ranked.accumulators()
        for c in reported:
            acc = accs.get(c, ClassAccumulator(c))
            curves[c] = pr_curve(acc)
            aps[c] = soft_ap(acc)
        std, _ = standard_map(gts, preds, config.theta, reported)
        scored = [p for p in preds if p.confidence >= config.tau]
        f1_pass = ranked if len(scored) == len(preds) else run_matching(
            gts, scored, verb_table, object_table, config, all_classes)
    else:
        f1_pass = run_matching(gts, preds, verb_table, object_table, config, all_classes)

    by_cls_rec: dict[HoiClass, list[MatchRecord]] = {}
    by_cls_fp: dict[HoiClass, list[FpAssignment]] = {}
    for r in f1_pass.records:
        by_cls_rec.setdefault(r.cls, []).append(r)
    for f in f1_pass.fps:
        by_cls_fp.setdefault(f.cls, []).append(f)

    results = []
    for c in reported:
        recs = by_cls_rec.get(c, [])
        counts = soft_counts(recs, by_cls_fp.get(c, []), config.fn_accounting)
        p, r = precision_recall(counts.tp, counts.fp, counts.fn)
        results.append(ClassResult(c, len(recs), counts.tp, counts.fp, counts.fn, p, r, f1(p, r), aps.get(c)))

    return EvalReport(
        mode=mode,
        config=config.echo(),
        classes=results,
        mf1=mean_f1(c.f1 for c in results),
        soft_map=soft_map(aps) if mode is Mode.RANKED else None,
        standard_map=std,
        miss=miss_rates(f1_pass.records, f1_pass.n_predictions),
        curves=curves,
        tables={"verb": verb_table.manifest, "object": object_table.manifest},
        exclusions=list(exclusions or []),
    )
