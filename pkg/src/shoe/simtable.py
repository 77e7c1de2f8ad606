"""Sparse verb-verb / object-object similarity tables built from an LLM
rater ensemble.

Build flow: ``screen_pairs`` (one rater, exhaustive) -> ``rate_pairs``
(refinement raters, nonzero pairs only) -> ``ensemble_average``.  Every
rating is appended to a JSONL journal so an interrupted build resumes
without re-asking for finished (pair, rater) combinations.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .raters import RaterGateway
from .wordnet import Pos, Synset, SynsetId

logger = logging.getLogger(__name__)

SCALE = (
    "0 = completely dissimilar, 1 = slightly similar, 2 = moderately similar, "
    "3 = very similar, 4 = synonymous"
)

DEFAULT_TEMPLATE = """Rate how similar the meanings of two {pos} senses are.

Sense A: "{lemma_a}" - {gloss_a}
Sense B: "{lemma_b}" - {gloss_b}

Use the glosses as reference and answer with a single integer on this scale:
{scale}

Rating:"""

REQUIRED_FIELDS = frozenset({"lemma_a", "gloss_a", "lemma_b", "gloss_b", "scale"})
OPTIONAL_FIELDS = frozenset({"pos"})

Pair = tuple[str, str]


class TableError(Exception):
    pass


class PromptTemplateError(TableError):
    pass


def _k(x: "str | SynsetId") -> str:
    return x.key if isinstance(x, SynsetId) else str(x)


def canonical_pair(a: "str | SynsetId", b: "str | SynsetId") -> Pair:
    a, b = _k(a), _k(b)
    return (a, b) if a <= b else (b, a)


def template_hash(template: str) -> str:
    return hashlib.sha256(template.encode("utf-8")).hexdigest()[:16]


def build_prompt(pair: tuple[Synset, Synset], template: str = DEFAULT_TEMPLATE) -> str:
    sa, sb = pair
    if sa.pos is not sb.pos:
        raise TableError(f"{sa.key} and {sb.key} have different parts of speech")
    fields = {name for _, name, _, _ in string.Formatter().parse(template) if name is not None}
    missing = REQUIRED_FIELDS - fields
    if missing:
        raise PromptTemplateError(f"template lacks placeholder(s): {', '.join(sorted(missing))}")
    unknown = fields - REQUIRED_FIELDS - OPTIONAL_FIELDS
    if unknown:
        raise PromptTemplateError(f"unresolved placeholder(s): {', '.join(sorted(unknown))}")
    return template.format(
        pos=sa.pos.label,
        lemma_a=sa.lemmas[0].replace("_", " "),
        gloss_a=sa.gloss,
        lemma_b=sb.lemmas[0].replace("_", " "),
        gloss_b=sb.gloss,
        scale=SCALE,
    )


@dataclass(frozen=True)
class RawRating:
    """One rater's 0-4 judgement of one pair; ``rating=None`` marks a
    combination that could not be rated."""

    a: str
    b: str
    rater: str
    rating: "int | None"

    def __post_init__(self) -> None:
        a, b = canonical_pair(self.a, self.b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if self.rating is not None and (not isinstance(self.rating, int) or not 0 <= self.rating <= 4):
            raise TableError(f"rating must be an integer in 0..4, got {self.rating!r}")

    @property
    def pair(self) -> Pair:
        return (self.a, self.b)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "rater": self.rater, "rating": self.rating}


@dataclass
class SimilarityTable:
    pos: Pos
    entries: dict[Pair, float] = field(default_factory=dict)
    ratings: dict[Pair, list[tuple[str, int]]] = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)

    @classmethod
    def identity(cls, pos: "Pos | str") -> "SimilarityTable":
        """Exact-match table: 1 for identical synsets, 0 otherwise."""
        return cls(Pos.parse(pos), manifest={"raters": [], "screener": None, "identity": True})

    def lookup(self, a: "str | SynsetId", b: "str | SynsetId") -> float:
        a, b = _k(a), _k(b)
        for key in (a, b):
            if f".{self.pos.value}." not in key:
                raise TableError(f"{key} is not a {self.pos.label} synset")
        if a == b:
            return 1.0
        return self.entries.get(canonical_pair(a, b), 0.0)

    __call__ = lookup

    def __len__(self) -> int:
        return len(self.entries)

    def with_entry(self, a: str, b: str, score: float) -> "SimilarityTable":
        if not 0.0 <= score <= 1.0:
            raise TableError("score outside [0, 1]")
        entries = dict(self.entries)
        entries[canonical_pair(a, b)] = float(score)
        ratings = dict(self.ratings)
        ratings.pop(canonical_pair(a, b), None)
        return SimilarityTable(self.pos, entries, ratings, dict(self.manifest))

    def to_json(self) -> str:
        entries = []
        for pair in sorted(self.entries):
            e = {"a": pair[0], "b": pair[1], "score": round(self.entries[pair], 6)}
            e["ratings"] = [{"rater": r, "rating": v} for r, v in self.ratings.get(pair, [])]
            entries.append(e)
        doc = {"pos": self.pos.label, "manifest": self.manifest, "entries": entries}
        text = json.dumps(doc, indent=1, sort_keys=False)
        # fixed six-decimal rendering for scores
        return _six_decimals(text) + "\n"

    def save(self, path: "str | Path") -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SimilarityTable":
        try:
            pos = Pos.parse(doc["pos"])
            manifest = dict(doc.get("manifest", {}))
            entries: dict[Pair, float] = {}
            ratings: dict[Pair, list[tuple[str, int]]] = {}
            for i, e in enumerate(doc["entries"]):
                pair = canonical_pair(e["a"], e["b"])
                if pair[0] == pair[1]:
                    raise TableError(f"entry {i}: identity pair stored explicitly")
                score = float(e["score"])
                if not 0.0 <= score <= 1.0:
                    raise TableError(f"entry {i}: score {score} outside [0, 1]")
                rs = [(str(r["rater"]), int(r["rating"])) for r in e.get("ratings", [])]
                if rs:
                    exact = sum(v for _, v in rs) / (4.0 * len(rs))
                    if abs(exact - score) > 5e-7:
                        raise TableError(f"entry {i}: score {score} != mean rating / 4 = {exact:.6f}")
                    score = exact
                    ratings[pair] = rs
                entries[pair] = score
        except (KeyError, TypeError, ValueError) as exc:
            raise TableError(f"malformed similarity table: {exc}") from exc
        return cls(pos, entries, ratings, manifest)

    @classmethod
    def load(cls, path: "str | Path") -> "SimilarityTable":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _six_decimals(text: str) -> str:
    out = []
    for line in text.splitlines():
        stripped = line.lstrip()
        if stripped.startswith('"score": '):
            indent = line[: len(line) - len(stripped)]
            tail = "," if stripped.endswith(",") else ""
            value = float(stripped[len('"score": '):].rstrip(","))
            line = f'{indent}"score": {value:.6f}{tail}'
        out.append(line)
    return "\n".join(out)


# -- journal ---------------------------------------------------------------

class Journal:
    """Append-only JSONL log of RawRating records; the last record for a
    (pair, rater) combination wins on reload."""

    def __init__(self, path: "str | Path | None") -> None:
        self.path = Path(path) if path else None

    def load(self) -> dict[tuple[str, str, str], RawRating]:
        done: dict[tuple[str, str, str], RawRating] = {}
        if self.path is None or not self.path.exists():
            return done
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    d = json.loads(line)
                    r = RawRating(d["a"], d["b"], d["rater"], d["rating"])
                except (ValueError, KeyError, TableError) as exc:
                    raise TableError(f"{self.path}:{lineno}: bad journal record: {exc}") from exc
                done[(r.a, r.b, r.rater)] = r
        return done

    def append(self, records: Iterable[RawRating]) -> None:
        if self.path is None:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            for r in records:
                fh.write(json.dumps(r.to_dict()) + "\n")


# -- rating engine ---------------------------------------------------------

@dataclass
class PairRater:
    """Turns (pair, rater) jobs into RawRatings with bounded parallelism."""

    describe: Callable[[str], Synset]
    template: str = DEFAULT_TEMPLATE
    workers: int = 8
    journal: Journal = field(default_factory=lambda: Journal(None))
    chunk: int = 256

    def prompt(self, pair: Pair) -> str:
        return build_prompt((self.describe(pair[0]), self.describe(pair[1])), self.template)

    def run(self, jobs: Sequence[tuple[Pair, RaterGateway]]) -> list[RawRating]:
        out: list[RawRating] = []

        def one(job: tuple[Pair, RaterGateway]) -> RawRating:
            pair, gw = job
            return RawRating(pair[0], pair[1], gw.name, gw.rate(self.prompt(pair)))

        with ThreadPoolExecutor(max_workers=max(1, self.workers)) as pool:
            for start in range(0, len(jobs), self.chunk):
                # map keeps submission order, so the journal is deterministic
                batch = list(pool.map(one, jobs[start:start + self.chunk]))
                self.journal.append(batch)
                out.extend(batch)
        return out


@dataclass
class ScreenResult:
    nonzero: set[Pair]
    screened_out: set[Pair]
    unrated: set[Pair]
    ratings: list[RawRating]
    calls: int = 0


def _pairs(candidates: Iterable[tuple]) -> list[Pair]:
    seen: dict[Pair, None] = {}
    for a, b in candidates:
        p = canonical_pair(a, b)
        if p[0] == p[1]:
            continue  # identity pairs are fixed at 1.0, never sent
        pos_a, pos_b = p[0].rsplit(".", 2)[1], p[1].rsplit(".", 2)[1]
        if pos_a != pos_b:
            raise TableError(f"cross-POS candidate pair {p}")
        seen.setdefault(p, None)
    return list(seen)


def screen_pairs(
    candidates: Iterable[tuple],
    screener: RaterGateway,
    engine: PairRater,
    done: "Mapping[tuple[str, str, str], RawRating] | None" = None,
) -> ScreenResult:
    """Rate every candidate once with the screener; zero-rated pairs are
    screened out, failures are left unrated for a later resume."""
    pairs = _pairs(candidates)
    done = done or {}
    have = {p: done[(p[0], p[1], screener.name)] for p in pairs
            if (p[0], p[1], screener.name) in done and done[(p[0], p[1], screener.name)].rating is not None}
    todo = [(p, screener) for p in pairs if p not in have]
    fresh = engine.run(todo)
    by_pair = dict(have)
    by_pair.update({r.pair: r for r in fresh})
    ratings = [by_pair[p] for p in pairs]
    nonzero = {r.pair for r in ratings if r.rating is not None and r.rating > 0}
    zero = {r.pair for r in ratings if r.rating == 0}
    unrated = {r.pair for r in ratings if r.rating is None}
    logger.info("screened %d pairs: %d nonzero, %d zero, %d unrated", len(pairs), len(nonzero), len(zero), len(unrated))
    return ScreenResult(nonzero, zero, unrated, ratings, calls=len(todo))


def rate_pairs(
    pairs: Iterable[tuple],
    raters: Sequence[RaterGateway],
    engine: PairRater,
    done: "Mapping[tuple[str, str, str], RawRating] | None" = None,
) -> list[RawRating]:
    """One RawRating (or unrated marker) per (pair, rater); combinations
    already rated in ``done`` are reused instead of re-requested."""
    plist = sorted(_pairs(pairs))
    done = done or {}
    out: dict[tuple[str, str, str], RawRating] = {}
    todo = []
    for p in plist:
        for gw in raters:
            prev = done.get((p[0], p[1], gw.name))
            if prev is not None and prev.rating is not None:
                out[(p[0], p[1], gw.name)] = prev
            else:
                todo.append((p, gw))
    for r in engine.run(todo):
        out[(r.a, r.b, r.rater)] = r
    return [out[(p[0], p[1], gw.name)] for p in plist for gw in raters]


def ensemble_average(
    ratings: Iterable[RawRating],
    raters: Iterable[str],
    pos: "Pos | str",
    manifest: "dict | None" = None,
) -> SimilarityTable:
    subset = list(dict.fromkeys(raters))
    if not subset:
        raise TableError("empty rater subset")
    keep = set(subset)
    pos = Pos.parse(pos)
    by_pair: dict[Pair, dict[str, int]] = {}
    for r in ratings:
        if r.rater not in keep or r.rating is None or r.a == r.b:
            continue
        by_pair.setdefault(r.pair, {})[r.rater] = r.rating
    entries: dict[Pair, float] = {}
    breakdown: dict[Pair, list[tuple[str, int]]] = {}
    for pair in sorted(by_pair):
        rs = [(name, by_pair[pair][name]) for name in subset if name in by_pair[pair]]
        entries[pair] = sum(v for _, v in rs) / (4.0 * len(rs))
        breakdown[pair] = rs
    man = dict(manifest or {})
    man["raters"] = subset
    return SimilarityTable(pos, entries, breakdown, man)


def pearson_between_raters(ratings: Iterable[RawRating]) -> dict[str, dict[str, "float | None"]]:
    """Pairwise sample Pearson r over the pairs both raters scored; ``None``
    where fewer than two shared pairs exist or a rater is constant."""
    per: dict[str, dict[Pair, int]] = {}
    for r in ratings:
        if r.rating is not None:
            per.setdefault(r.rater, {})[r.pair] = r.rating
    names = sorted(per)
    out: dict[str, dict[str, "float | None"]] = {n: {} for n in names}
    for i, a in enumerate(names):
        out[a][a] = 1.0
        for b in names[i + 1:]:
            shared = sorted(set(per[a]) & set(per[b]))
            r = None
            if len(shared) >= 2:
                x = np.array([per[a][p] for p in shared], dtype=float)
                y = np.array([per[b][p] for p in shared], dtype=float)
                dx, dy = x - x.mean(), y - y.mean()
                den = np.sqrt((dx * dx).sum() * (dy * dy).sum())
                if den > 0:
                    r = float(np.clip((dx * dy).sum() / den, -1.0, 1.0))
            out[a][b] = out[b][a] = r
    return out


def audit_screening(
    screened_out: Iterable[Pair],
    sample_size: int,
    raters: Sequence[RaterGateway],
    seed: int,
    engine: PairRater,
) -> dict[str, float]:
    """Re-rate a seeded sample of screened-out pairs; percentage of rated
    sample pairs each rater scores above zero."""
    pool = sorted(canonical_pair(a, b) for a, b in screened_out)
    if not pool:
        raise TableError("no screened-out pairs to audit")
    if sample_size > len(pool) or sample_size < 1:
        raise TableError(f"sample size {sample_size} not in 1..{len(pool)}")
    sample = random.Random(seed).sample(pool, sample_size)
    result = engine.run([(p, gw) for p in sample for gw in raters])
    out: dict[str, float] = {}
    for gw in raters:
        mine = [r.rating for r in result if r.rater == gw.name and r.rating is not None]
        out[gw.name] = 100.0 * sum(1 for v in mine if v > 0) / len(mine) if mine else float("nan")
    return out
