"""Readers for annotation, prediction, rating and tuning files.

Schema problems raise ``SchemaError`` carrying every diagnostic found
(file, line or record path, message); unresolvable synset keys in strict
mode raise ``ResolutionError``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

from .agreement import RatingRecord, TuningSample
from .matcher import BBox, HoiClass, HoiGroundTruth, HoiPrediction, Label, MatchError
from .wordnet import Pos, WordnetGraph, is_synset_key


class SchemaError(Exception):
    def __init__(self, diagnostics: list[str]) -> None:
        self.diagnostics = diagnostics
        super().__init__("\n".join(diagnostics))


class ResolutionError(Exception):
    def __init__(self, diagnostics: list[str]) -> None:
        self.diagnostics = diagnostics
        super().__init__("\n".join(diagnostics))


@dataclass
class Resolver:
    """Maps label strings to synset keys or candidate pools."""

    graph: Optional[WordnetGraph] = None
    strict: bool = True
    exclusions: list[dict] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    _pools: dict[tuple[str, Pos], tuple[str, ...]] = field(default_factory=dict)

    def _note(self, where: str, fld: str, value: str, reason: str) -> None:
        self.exclusions.append({"where": where, "field": fld, "value": value, "reason": reason})

    def gt_label(self, value: str, pos: Pos, where: str, fld: str) -> str:
        if self.graph is not None and value not in self.graph:
            if self.strict:
                self.errors.append(f"{where}: {fld} {value!r} not found in WordNet")
            else:
                self._note(where, fld, value, "synset not in WordNet; kept as given")
        return value

    def pred_label(self, value: str, pos: Pos, where: str, fld: str) -> Label:
        if is_synset_key(value) and f".{pos.value}." in value:
            if self.graph is not None and value not in self.graph:
                if self.strict:
                    self.errors.append(f"{where}: {fld} {value!r} not found in WordNet")
                else:
                    self._note(where, fld, value, "synset not in WordNet; kept as given")
            return value
        if self.graph is None:
            if self.strict:
                self.errors.append(f"{where}: free-text {fld} {value!r} needs --wordnet to resolve")
                return ()
            self._note(where, fld, value, "free text without WordNet; scored 0")
            return ()
        key = (value, pos)
        if key not in self._pools:
            self._pools[key] = tuple(s.key for s in self.graph.candidate_pool(value, pos))
        pool = self._pools[key]
        if not pool:
            self._note(where, fld, value, "empty candidate pool; scored 0")
        return pool

    def raise_if_failed(self) -> None:
        if self.errors:
            raise ResolutionError(self.errors)


def _box(value, where: str, fld: str, errs: list[str]) -> Optional[BBox]:
    if not isinstance(value, list) or len(value) != 4 or not all(isinstance(v, (int, float)) for v in value):
        errs.append(f"{where}: {fld} must be [x1, y1, x2, y2]")
        return None
    try:
        return BBox.of(value)
    except MatchError as exc:
        errs.append(f"{where}: {fld}: {exc}")
        return None


def _str(d: dict, key: str, where: str, errs: list[str]) -> Optional[str]:
    v = d.get(key)
    if not isinstance(v, str) or not v.strip():
        errs.append(f"{where}: missing or empty string field {key!r}")
        return None
    return v.strip()


def _jsonl(path: Path) -> Iterator[tuple[int, object, Optional[str]]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line), None
            except json.JSONDecodeError as exc:
                yield lineno, None, f"invalid JSON ({exc.msg})"


def read_ground_truth(path: "str | Path", resolver: "Resolver | None" = None) -> list[HoiGroundTruth]:
    """JSON list of ``{image_id, annotations: [...]}`` (or ``{"images": [...]}``);
    a ``.jsonl`` file holds one image object per line."""
    path = Path(path)
    resolver = resolver or Resolver()
    errs: list[str] = []
    images: list[tuple[str, object]] = []
    if path.suffix == ".jsonl":
        for lineno, obj, bad in _jsonl(path):
            if bad:
                errs.append(f"{path.name}:{lineno}: {bad}")
            else:
                images.append((f"{path.name}:{lineno}", obj))
    else:
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaError([f"{path.name}:{exc.lineno}: invalid JSON ({exc.msg})"]) from None
        if isinstance(doc, dict):
            doc = doc.get("images")
        if not isinstance(doc, list):
            raise SchemaError([f"{path.name}: expected a list of images"])
        images = [(f"{path.name}:images[{i}]", img) for i, img in enumerate(doc)]

    out: list[HoiGroundTruth] = []
    for where, img in images:
        if not isinstance(img, dict):
            errs.append(f"{where}: image record must be an object")
            continue
        image_id = img.get("image_id")
        if not isinstance(image_id, (str, int)):
            errs.append(f"{where}: missing image_id")
            continue
        anns = img.get("annotations")
        if not isinstance(anns, list):
            errs.append(f"{where}: missing annotations list")
            continue
        for j, a in enumerate(anns):
            aw = f"{where}.annotations[{j}]"
            if not isinstance(a, dict):
                errs.append(f"{aw}: annotation must be an object")
                continue
            hb = _box(a.get("human_box"), aw, "human_box", errs)
            ob = _box(a.get("object_box"), aw, "object_box", errs)
            verb = _str(a, "verb", aw, errs)
            obj = _str(a, "object", aw, errs)
            for fld, value, pos in (("verb", verb, Pos.VERB), ("object", obj, Pos.NOUN)):
                if value is not None and not (is_synset_key(value) and f".{pos.value}." in value):
                    errs.append(f"{aw}: {fld} {value!r} is not a {pos.label} synset key (lemma.{pos.value}.NN)")
            if None in (hb, ob, verb, obj) or errs:
                continue
            verb = resolver.gt_label(verb, Pos.VERB, aw, "verb")
            obj = resolver.gt_label(obj, Pos.NOUN, aw, "object")
            out.append(HoiGroundTruth(str(image_id), hb, ob, verb, obj))
    if errs:
        raise SchemaError(errs)
    return out


def read_predictions(path: "str | Path", resolver: "Resolver | None" = None) -> list[HoiPrediction]:
    path = Path(path)
    resolver = resolver or Resolver()
    errs: list[str] = []
    out: list[HoiPrediction] = []
    for lineno, obj, bad in _jsonl(path):
        where = f"{path.name}:{lineno}"
        if bad:
            errs.append(f"{where}: {bad}")
            continue
        if not isinstance(obj, dict):
            errs.append(f"{where}: prediction must be an object")
            continue
        image_id = obj.get("image_id")
        if not isinstance(image_id, (str, int)):
            errs.append(f"{where}: missing image_id")
            continue
        hb = _box(obj.get("human_box"), where, "human_box", errs)
        ob = _box(obj.get("object_box"), where, "object_box", errs)
        verb = _str(obj, "verb", where, errs)
        noun = _str(obj, "object", where, errs)
        conf = obj.get("confidence")
        if conf is not None and (not isinstance(conf, (int, float)) or not 0.0 <= conf <= 1.0):
            errs.append(f"{where}: confidence must be a number in [0, 1]")
            continue
        if None in (hb, ob, verb, noun):
            continue
        out.append(HoiPrediction(
            str(image_id), hb, ob,
            resolver.pred_label(verb, Pos.VERB, where, "verb"),
            resolver.pred_label(noun, Pos.NOUN, where, "object"),
            None if conf is None else float(conf),
        ))
    if errs:
        raise SchemaError(errs)
    return out


def read_class_subset(path: "str | Path") -> list[HoiClass]:
    """One class per line: ``verb_key object_key`` (whitespace or comma)."""
    out = []
    errs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2 or not is_synset_key(parts[0]) or not is_synset_key(parts[1]):
                errs.append(f"{Path(path).name}:{lineno}: expected 'verb_key object_key'")
                continue
            out.append(HoiClass(parts[0], parts[1]))
    if errs:
        raise SchemaError(errs)
    return out


def read_synset_list(path: "str | Path") -> list[str]:
    keys, errs = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if not is_synset_key(line):
                errs.append(f"{Path(path).name}:{lineno}: {line!r} is not a synset key")
                continue
            keys.append(line)
    if errs:
        raise SchemaError(errs)
    return list(dict.fromkeys(keys))


def _rows(path: Path, required: tuple[str, ...]) -> Iterator[tuple[str, dict]]:
    """Yield (location, row) from CSV (with header) or JSONL."""
    if path.suffix in (".jsonl", ".json"):
        errs = []
        rows = []
        for lineno, obj, bad in _jsonl(path):
            where = f"{path.name}:{lineno}"
            if bad or not isinstance(obj, dict):
                errs.append(f"{where}: {bad or 'expected an object'}")
                continue
            missing = [k for k in required if k not in obj]
            if missing:
                errs.append(f"{where}: missing field(s) {', '.join(missing)}")
                continue
            rows.append((where, obj))
        if errs:
            raise SchemaError(errs)
        yield from rows
        return
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [k for k in required if k not in header]
        if missing:
            raise SchemaError([f"{path.name}:1: header lacks column(s) {', '.join(missing)}"])
        for row in reader:
            yield f"{path.name}:{reader.line_num}", row


def read_ratings(path: "str | Path") -> list[RatingRecord]:
    path = Path(path)
    out, errs = [], []
    for where, row in _rows(path, ("item_id", "annotator", "rating")):
        raw = row["rating"]
        if isinstance(raw, str) and raw.strip().isdigit():
            raw = int(raw)
        if isinstance(raw, bool) or not isinstance(raw, int) or not 0 <= raw <= 4:
            errs.append(f"{where}: rating {row.get('rating')!r} is not an integer in 0..4")
            continue
        out.append(RatingRecord(str(row["item_id"]), str(row["annotator"]), raw))
    if errs:
        raise SchemaError(errs)
    seen = set()
    for r in out:
        if (r.item_id, r.annotator) in seen:
            raise SchemaError([f"{path.name}: duplicate rating for item {r.item_id} by {r.annotator}"])
        seen.add((r.item_id, r.annotator))
    return out


def read_metric_scores(path: "str | Path") -> dict[str, float]:
    path = Path(path)
    out, errs = {}, []
    for where, row in _rows(path, ("item_id", "score")):
        try:
            v = float(row["score"])
            if not 0.0 <= v <= 1.0:
                raise ValueError
            out[str(row["item_id"])] = v
        except (TypeError, ValueError):
            errs.append(f"{where}: score must be a number in [0, 1]")
    if errs:
        raise SchemaError(errs)
    return out


def read_tuning_samples(path: "str | Path") -> list[TuningSample]:
    path = Path(path)
    out, errs = [], []
    for where, row in _rows(path, ("item_id", "category", "v", "o", "y")):
        try:
            out.append(TuningSample(
                str(row["item_id"]), int(row["category"]),
                float(row["v"]), float(row["o"]), float(row["y"]),
            ))
        except (TypeError, ValueError) as exc:
            errs.append(f"{where}: {exc}")
    if errs:
        raise SchemaError(errs)
    return out
