"""Writes small databases in the WordNet 3.0 plain-text format.

Byte offsets are real (the offset field of each data line is its byte
position in the file), so the output is indistinguishable from the
distribution files to a strict reader.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

LICENSE = [
    "  1 This is a test fixture in WordNet 3.0 database format.",
    "  2 It is not part of the Princeton WordNet distribution.",
]


@dataclass(frozen=True)
class Entry:
    ref: str                   # fixture-local handle, e.g. "dog"
    lemmas: tuple[str, ...]
    gloss: str
    parents: tuple[str, ...] = ()
    instance: bool = False     # @i / ~i instead of @ / ~


def _data_lines(entries: list[Entry], pos: str) -> tuple[list[str], dict[str, int]]:
    by_ref = {e.ref: e for e in entries}
    children: dict[str, list[str]] = {e.ref: [] for e in entries}
    for e in entries:
        for p in e.parents:
            children[p].append(e.ref)

    def render(e: Entry, offsets: dict[str, int]) -> str:
        words = " ".join(f"{w} 0" for w in e.lemmas)
        ptrs = []
        for p in e.parents:
            ptrs.append(f"{'@i' if e.instance else '@'} {offsets[p]:08d} {pos} 0000")
        for c in children[e.ref]:
            ptrs.append(f"{'~i' if by_ref[c].instance else '~'} {offsets[c]:08d} {pos} 0000")
        frames = " 01 + 02 00" if pos == "v" else ""
        lex = "29" if pos == "v" else "05"
        body = f"{lex} {pos} {len(e.lemmas):02x} {words} {len(ptrs):03d}"
        if ptrs:
            body += " " + " ".join(ptrs)
        return f"{body}{frames} | {e.gloss}  "

    # every offset field is 8 digits, so line lengths do not depend on values
    placeholder = {e.ref: 0 for e in entries}
    header = sum(len(l) + 1 for l in LICENSE)
    offsets, pos_ = {}, header
    for e in entries:
        offsets[e.ref] = pos_
        pos_ += len(f"{0:08d} " + render(e, placeholder)) + 1
    lines = [f"{offsets[e.ref]:08d} " + render(e, offsets) for e in entries]
    return lines, offsets


def write_wordnet(
    root: "str | Path",
    nouns: list[Entry],
    verbs: list[Entry],
    noun_exc: "dict[str, list[str]] | None" = None,
    verb_exc: "dict[str, list[str]] | None" = None,
) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for label, pos, entries, exc in (("noun", "n", nouns, noun_exc), ("verb", "v", verbs, verb_exc)):
        lines, offsets = _data_lines(entries, pos)
        (root / f"data.{label}").write_text("\n".join(LICENSE + lines) + "\n", encoding="utf-8")
        senses: dict[str, list[int]] = {}
        for e in entries:
            for w in e.lemmas:
                senses.setdefault(w.lower(), []).append(offsets[e.ref])
        index = []
        for lemma in sorted(senses):
            offs = senses[lemma]
            index.append(f"{lemma} {pos} {len(offs)} 1 @ {len(offs)} 0 " + " ".join(f"{o:08d}" for o in offs) + "  ")
        (root / f"index.{label}").write_text("\n".join(LICENSE + index) + "\n", encoding="utf-8")
        (root / f"{label}.exc").write_text(
            "".join(f"{k} {' '.join(v)}\n" for k, v in sorted((exc or {}).items())), encoding="utf-8"
        )
    return root


# The hand-designed test taxonomy.  Nouns: one root, dog has two parents.
#
#   entity ── object ── animal ── dog ── (also under pet)
#                │         ├──── cat
#                │         └──── horse ── pony
#                └────── vehicle ── bicycle (bicycle, bike)
#   entity ── pet
#
# Verbs: three separate roots (move, consume, rid).
FIXTURE_NOUNS = [
    Entry("entity", ("entity",), "that which is perceived or known to exist"),
    Entry("object", ("object", "physical_object"), "a tangible and visible entity", ("entity",)),
    Entry("pet", ("pet",), "a domesticated animal kept for companionship", ("entity",)),
    Entry("animal", ("animal", "beast"), "a living organism that can move voluntarily", ("object",)),
    Entry("vehicle", ("vehicle",), "a conveyance that transports people or objects", ("object",)),
    Entry("dog", ("dog", "domestic_dog"), "a domesticated carnivorous mammal", ("animal", "pet")),
    Entry("cat", ("cat",), "a small domesticated feline", ("animal",)),
    Entry("horse", ("horse",), "a solid-hoofed herbivorous quadruped", ("animal",)),
    Entry("pony", ("pony",), "a small horse", ("horse",)),
    Entry("bicycle", ("bicycle", "bike"), "a wheeled vehicle that has two wheels and pedals", ("vehicle",)),
]
FIXTURE_VERBS = [
    Entry("move", ("move",), "change location"),
    Entry("travel", ("travel", "go"), "change location; move, travel, or proceed", ("move",)),
    Entry("ride1", ("ride",), "sit and travel on the back of an animal", ("travel",)),
    Entry("ride2", ("ride",), "be carried or travel on or in a vehicle", ("travel",)),
    Entry("consume", ("consume", "ingest"), "take in as food", ()),
    Entry("eat", ("eat",), "take in solid food", ("consume",)),
    Entry("drink", ("drink", "imbibe"), "take in liquids", ("consume",)),
    Entry("rid", ("rid",), "relieve from", ()),
]
FIXTURE_NOUN_EXC = {"feet": ["foot"], "beastes": ["beast"]}
FIXTURE_VERB_EXC = {"rode": ["ride"], "ate": ["eat"], "drank": ["drink"]}


def write_fixture(root: "str | Path") -> Path:
    return write_wordnet(root, FIXTURE_NOUNS, FIXTURE_VERBS, FIXTURE_NOUN_EXC, FIXTURE_VERB_EXC)
