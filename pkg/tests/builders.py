"""Random and hand-built evaluation inputs shared by the test modules."""

from __future__ import annotations

import random

from shoe.matcher import BBox, HoiGroundTruth, HoiPrediction
from shoe.simtable import SimilarityTable
from shoe.wordnet import Pos


def box(x1, y1, x2, y2) -> BBox:
    return BBox(float(x1), float(y1), float(x2), float(y2))


def gt(img, h, o, verb, obj) -> HoiGroundTruth:
    return HoiGroundTruth(img, box(*h), box(*o), verb, obj)


def pred(img, h, o, verb, obj, conf=None) -> HoiPrediction:
    return HoiPrediction(img, box(*h), box(*o), verb, obj, conf)


def _random_box(rng: random.Random) -> BBox:
    x, y = rng.uniform(0, 80), rng.uniform(0, 80)
    return BBox(x, y, x + rng.uniform(5, 40), y + rng.uniform(5, 40))


def _jitter(rng: random.Random, b: BBox, scale: float) -> BBox:
    w, h = b.x2 - b.x1, b.y2 - b.y1
    dx, dy = rng.uniform(-scale, scale) * w, rng.uniform(-scale, scale) * h
    return BBox(b.x1 + dx, b.y1 + dy, b.x2 + dx, b.y2 + dy)


def random_dataset(rng: random.Random, max_images=10, max_classes=8, max_preds=30, n_verbs=4, n_nouns=4,
                   tied_conf=False):
    """Desk-scale dataset: GT boxes, predictions that mostly sit near a GT
    (jittered, sometimes beyond the IoU gate) with labels drawn from the
    class vocabulary, plus a few strays."""
    verbs = [f"verb{i}.v.01" for i in range(n_verbs)]
    nouns = [f"noun{i}.n.01" for i in range(n_nouns)]
    universe = [(v, o) for v in verbs for o in nouns]
    classes = rng.sample(universe, rng.randint(1, min(max_classes, len(universe))))
    gts = []
    images = [f"img{i}" for i in range(rng.randint(1, max_images))]
    for img in images:
        for _ in range(rng.randint(0, 4)):
            v, o = rng.choice(classes)
            gts.append(HoiGroundTruth(img, _random_box(rng), _random_box(rng), v, o))
    if not gts:
        v, o = classes[0]
        gts.append(HoiGroundTruth(images[0], _random_box(rng), _random_box(rng), v, o))
    preds = []
    conf_pool = [round(rng.random(), 1) for _ in range(5)]
    for _ in range(rng.randint(0, max_preds)):
        if rng.random() < 0.8:
            g = rng.choice(gts)
            img, hb, ob = g.image_id, _jitter(rng, g.human_box, 0.3), _jitter(rng, g.object_box, 0.3)
            if rng.random() < 0.5:
                v, o = g.verb, g.object
            else:
                v, o = rng.choice(verbs), rng.choice(nouns)
        else:
            img, hb, ob = rng.choice(images), _random_box(rng), _random_box(rng)
            v, o = rng.choice(verbs), rng.choice(nouns)
        conf = rng.choice(conf_pool) if tied_conf else rng.random()
        preds.append(HoiPrediction(img, hb, ob, v, o, conf))
    return gts, preds, verbs, nouns


def random_table(rng: random.Random, pos: Pos, keys, density=0.5) -> SimilarityTable:
    t = SimilarityTable(pos)
    for i, a in enumerate(keys):
        for b in keys[i + 1:]:
            if rng.random() < density:
                t = t.with_entry(a, b, rng.choice([0.25, 0.5, 0.75, 1.0, rng.random()]))
    return t


def dump_dataset(directory, gts, preds):
    """Write GT (JSON) and predictions (JSONL) in the CLI input format."""
    import json
    from pathlib import Path

    directory = Path(directory)
    images: dict[str, list] = {}
    for g in gts:
        images.setdefault(g.image_id, []).append({
            "human_box": g.human_box.as_list(), "object_box": g.object_box.as_list(),
            "verb": g.verb, "object": g.object,
        })
    gt_path = directory / "gt.json"
    gt_path.write_text(json.dumps([{"image_id": k, "annotations": v} for k, v in images.items()], indent=1))
    pred_path = directory / "pred.jsonl"
    with open(pred_path, "w") as fh:
        for p in preds:
            rec = {"image_id": p.image_id, "human_box": p.human_box.as_list(), "object_box": p.object_box.as_list(),
                   "verb": p.verb, "object": p.object}
            if p.confidence is not None:
                rec["confidence"] = p.confidence
            fh.write(json.dumps(rec) + "\n")
    return gt_path, pred_path
