"""In-memory reader for the Princeton WordNet 3.x plain-text database.

Only nouns and verbs are loaded.  Hypernym edges are the ``@`` and ``@i``
pointers; hyponym lists are the reverse of those edges, so the two
directions always agree.  Explicit ``~`` pointers are validated for target
existence but otherwise ignored (WordNet 3.0 carries a stray
``restrain.v.01 ~ inhibit.v.04`` that would close a cycle).
"""

from __future__ import annotations

import enum
import math
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

__all__ = [
    "Pos",
    "SynsetId",
    "Synset",
    "WordnetGraph",
    "WordnetError",
    "load_wordnet",
    "sense_number",
]


class WordnetError(Exception):
    """Raised for missing files, malformed records and taxonomy cycles."""


class Pos(str, enum.Enum):
    NOUN = "n"
    VERB = "v"

    @classmethod
    def parse(cls, value: "str | Pos") -> "Pos":
        if isinstance(value, Pos):
            return value
        v = str(value).strip().lower()
        if v in ("n", "noun"):
            return cls.NOUN
        if v in ("v", "verb"):
            return cls.VERB
        raise ValueError(f"unsupported part of speech: {value!r} (only noun/verb)")

    @property
    def label(self) -> str:
        return "noun" if self is Pos.NOUN else "verb"


_KEY_RE = re.compile(r"^(?P<lemma>.+)\.(?P<pos>[nv])\.(?P<sense>\d{2,})$")


@dataclass(frozen=True, order=True)
class SynsetId:
    """Canonical ``lemma.pos.NN`` key; the byte offset rides along but is not
    part of identity."""

    key: str
    offset: int = field(default=-1, compare=False)

    def __post_init__(self) -> None:
        if not _KEY_RE.match(self.key):
            raise ValueError(f"malformed synset key {self.key!r}")

    @property
    def pos(self) -> Pos:
        return Pos(_KEY_RE.match(self.key).group("pos"))

    def __str__(self) -> str:
        return self.key


def sense_number(key: str) -> int:
    m = _KEY_RE.match(key)
    if m is None:
        raise ValueError(f"malformed synset key {key!r}")
    return int(m.group("sense"))


def is_synset_key(text: str) -> bool:
    return bool(_KEY_RE.match(text))


@dataclass(frozen=True)
class Synset:
    id: SynsetId
    lemmas: tuple[str, ...]
    gloss: str
    hypernyms: tuple[SynsetId, ...] = ()
    hyponyms: tuple[SynsetId, ...] = ()

    @property
    def key(self) -> str:
        return self.id.key

    @property
    def pos(self) -> Pos:
        return self.id.pos


# morphy detachment rules, in the order WordNet applies them
_DETACHMENT = {
    Pos.NOUN: [
        ("s", ""), ("ses", "s"), ("ves", "f"), ("xes", "x"), ("zes", "z"),
        ("ches", "ch"), ("shes", "sh"), ("men", "man"), ("ies", "y"),
    ],
    Pos.VERB: [
        ("s", ""), ("ies", "y"), ("es", "e"), ("es", ""),
        ("ed", "e"), ("ed", ""), ("ing", "e"), ("ing", ""),
    ],
}

_FILES = ("index.noun", "index.verb", "data.noun", "data.verb", "noun.exc", "verb.exc")


class WordnetGraph:
    """Immutable noun/verb taxonomy with a lemma index and exception lists."""

    def __init__(
        self,
        synsets: dict[str, Synset],
        lemma_index: dict[tuple[str, Pos], tuple[SynsetId, ...]],
        exceptions: dict[Pos, dict[str, tuple[str, ...]]],
    ) -> None:
        self._synsets = synsets
        self._lemma_index = lemma_index
        self._exceptions = exceptions
        self._check_acyclic()
        self._longest_up: dict[str, int] = {}
        self.max_depth: dict[Pos, int] = {}
        for pos in Pos:
            keys = [k for k, s in synsets.items() if s.pos is pos]
            # nodes on the longest hypernym path to a real root
            self.max_depth[pos] = max((self._longest_to_root(k) + 1 for k in keys), default=0)

    # -- basic access -------------------------------------------------
    def __len__(self) -> int:
        return len(self._synsets)

    def __contains__(self, item: "str | SynsetId") -> bool:
        return _key(item) in self._synsets

    def synset(self, item: "str | SynsetId") -> Synset:
        try:
            return self._synsets[_key(item)]
        except KeyError:
            raise KeyError(f"unknown synset {_key(item)!r}") from None

    def synsets(self, pos: "Pos | None" = None) -> list[Synset]:
        out = [s for s in self._synsets.values() if pos is None or s.pos is pos]
        out.sort(key=lambda s: s.key)
        return out

    def count(self, pos: Pos) -> int:
        return sum(1 for s in self._synsets.values() if s.pos is pos)

    def has_lemma(self, lemma: str, pos: Pos) -> bool:
        return (lemma, pos) in self._lemma_index

    # -- lexical lookup -----------------------------------------------
    def synsets_of(self, lemma: str, pos: "Pos | str") -> list[SynsetId]:
        pos = Pos.parse(pos)
        return list(self._lemma_index.get((lemma.lower().replace(" ", "_"), pos), ()))

    def lemmatize(self, word: str, pos: "Pos | str") -> list[str]:
        """Base forms of ``word`` that are known lemmas.

        Exception-list forms come first, then the word itself, then the
        result of the first detachment rule that yields a known lemma.
        Detachment is skipped for words found in the exception list.
        """
        pos = Pos.parse(pos)
        w = word.strip().lower().replace(" ", "_")
        if not w:
            return []
        out: list[str] = []

        def add(form: str) -> None:
            if form not in out and self.has_lemma(form, pos):
                out.append(form)

        exc = self._exceptions[pos].get(w)
        if exc:
            for form in exc:
                add(form)
            add(w)
            return out
        add(w)
        for suffix, repl in _DETACHMENT[pos]:
            if w.endswith(suffix) and len(w) > len(suffix):
                base = w[: len(w) - len(suffix)] + repl
                if self.has_lemma(base, pos):
                    add(base)
                    break
        return out

    def candidate_pool(self, phrase: str, pos: "Pos | str") -> list[SynsetId]:
        pos = Pos.parse(pos)
        whole = "_".join(phrase.strip().lower().replace("-", " ").replace("_", " ").split())
        if not whole:
            return []
        pool: list[SynsetId] = []
        for base in [whole] + self.lemmatize(whole, pos):
            for sid in self.synsets_of(base, pos):
                if sid not in pool:
                    pool.append(sid)
        if pool:
            return pool
        for part in whole.split("_"):
            for base in self.lemmatize(part, pos):
                for sid in self.synsets_of(base, pos):
                    if sid not in pool:
                        pool.append(sid)
        return pool

    # -- taxonomy -----------------------------------------------------
    def hypernyms(self, item: "str | SynsetId") -> tuple[SynsetId, ...]:
        return self.synset(item).hypernyms

    def hyponyms(self, item: "str | SynsetId") -> tuple[SynsetId, ...]:
        return self.synset(item).hyponyms

    def expand_neighborhood(self, item: "str | SynsetId", depth: int = 2) -> list[SynsetId]:
        if depth < 0:
            raise ValueError("depth must be non-negative")
        start = self.synset(item).key
        hops = {start: 0}
        queue = deque([start])
        while queue:
            cur = queue.popleft()
            if hops[cur] == depth:
                continue
            s = self._synsets[cur]
            for nb in s.hypernyms + s.hyponyms:
                if nb.key not in hops:
                    hops[nb.key] = hops[cur] + 1
                    queue.append(nb.key)
        found = sorted((h, k) for k, h in hops.items() if k != start)
        return [self._synsets[k].id for _, k in found]

    def _up_distances(self, key: str) -> dict[str, int]:
        """Shortest upward distance to every ancestor (including itself)."""
        dist = {key: 0}
        queue = deque([key])
        while queue:
            cur = queue.popleft()
            for h in self._synsets[cur].hypernyms:
                if h.key not in dist:
                    dist[h.key] = dist[cur] + 1
                    queue.append(h.key)
        return dist

    def _root_distance(self, dist: dict[str, int]) -> int:
        return min(d for k, d in dist.items() if not self._synsets[k].hypernyms)

    def _same_pos(self, a: "str | SynsetId", b: "str | SynsetId") -> tuple[Synset, Synset]:
        sa, sb = self.synset(a), self.synset(b)
        if sa.pos is not sb.pos:
            raise ValueError(f"cannot compare {sa.key} with {sb.key}: different parts of speech")
        return sa, sb

    def shortest_path_length(self, a: "str | SynsetId", b: "str | SynsetId") -> int:
        """Edges on the shortest path through a common hypernym; the virtual
        root above all real roots makes every same-POS pair connected."""
        sa, sb = self._same_pos(a, b)
        da, db = self._up_distances(sa.key), self._up_distances(sb.key)
        best = self._root_distance(da) + self._root_distance(db) + 2
        for k, d in da.items():
            if k in db:
                best = min(best, d + db[k])
        return best

    def path_similarity(self, a: "str | SynsetId", b: "str | SynsetId") -> float:
        return 1.0 / (1.0 + self.shortest_path_length(a, b))

    def lch_similarity(self, a: "str | SynsetId", b: "str | SynsetId") -> float:
        sa, _ = self._same_pos(a, b)
        nodes = self.shortest_path_length(a, b) + 1
        return -math.log(nodes / (2.0 * self.max_depth[sa.pos]))

    def depth(self, item: "str | SynsetId") -> int:
        """Nodes on the longest path up to the virtual root (virtual root = 1)."""
        return self._longest_to_root(self.synset(item).key) + 2

    def wup_similarity(self, a: "str | SynsetId", b: "str | SynsetId") -> float:
        sa, sb = self._same_pos(a, b)
        common = set(self._up_distances(sa.key)) & set(self._up_distances(sb.key))
        lcs_depth = max((self.depth(k) for k in common), default=1)
        return 2.0 * lcs_depth / (self.depth(sa.key) + self.depth(sb.key))

    def lowest_common_hypernym(self, a: "str | SynsetId", b: "str | SynsetId") -> "SynsetId | None":
        """Deepest shared ancestor, ties by key; ``None`` means only the
        virtual root is shared."""
        sa, sb = self._same_pos(a, b)
        common = set(self._up_distances(sa.key)) & set(self._up_distances(sb.key))
        if not common:
            return None
        best = min(common, key=lambda k: (-self.depth(k), k))
        return self._synsets[best].id

    def _longest_to_root(self, key: str) -> int:
        if key in self._longest_up:
            return self._longest_up[key]
        # iterative post-order so deep verb/noun chains never hit recursion limits
        stack = [(key, False)]
        while stack:
            cur, ready = stack.pop()
            if cur in self._longest_up:
                continue
            hyps = self._synsets[cur].hypernyms
            if ready:
                self._longest_up[cur] = max((self._longest_up[h.key] + 1 for h in hyps), default=0)
                continue
            stack.append((cur, True))
            stack.extend((h.key, False) for h in hyps if h.key not in self._longest_up)
        return self._longest_up[key]

    def _check_acyclic(self) -> None:
        state: dict[str, int] = {}
        for start in self._synsets:
            if start in state:
                continue
            stack = [(start, iter(self._synsets[start].hypernyms))]
            state[start] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    state[node] = 2
                    stack.pop()
                    continue
                mark = state.get(nxt.key)
                if mark == 1:
                    raise WordnetError(f"hypernym cycle detected through {nxt.key}")
                if mark is None:
                    state[nxt.key] = 1
                    stack.append((nxt.key, iter(self._synsets[nxt.key].hypernyms)))


def _key(item: "str | SynsetId") -> str:
    return item.key if isinstance(item, SynsetId) else str(item)


@dataclass
class _RawSynset:
    offset: int
    pos: Pos
    lemmas: list[str]
    gloss: str
    up: list[tuple[int, Pos]]
    down: list[tuple[int, Pos]]


def _fail(path: Path, lineno: int, what: str) -> WordnetError:
    return WordnetError(f"{path.name}:{lineno}: malformed record: {what}")


def _parse_data(path: Path, pos: Pos) -> dict[int, _RawSynset]:
    out: dict[int, _RawSynset] = {}
    with open(path, "r", encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.startswith("  "):
                continue  # license header
            line = line.rstrip("\n")
            if not line.strip():
                raise _fail(path, lineno, "empty line")
            head, sep, gloss = line.partition(" | ")
            if not sep:
                if line.rstrip().endswith("|"):
                    head, gloss = line.rstrip()[:-1], ""
                else:
                    raise _fail(path, lineno, "missing gloss separator '|'")
            f = head.split()
            try:
                if len(f[0]) != 8 or not f[0].isdigit():
                    raise _fail(path, lineno, f"synset_offset {f[0]!r}")
                offset = int(f[0])
                if len(f[1]) != 2 or not f[1].isdigit():
                    raise _fail(path, lineno, f"lex_filenum {f[1]!r}")
                ss_type = f[2]
                if ss_type != pos.value:
                    raise _fail(path, lineno, f"ss_type {ss_type!r} in {pos.label} file")
                w_cnt = int(f[3], 16)
                if w_cnt < 1:
                    raise _fail(path, lineno, "w_cnt must be positive")
                i = 4
                lemmas = []
                for _ in range(w_cnt):
                    word, lex_id = f[i], f[i + 1]
                    int(lex_id, 16)
                    lemmas.append(word.lower())
                    i += 2
                p_cnt_field = f[i]
                if len(p_cnt_field) != 3 or not p_cnt_field.isdigit():
                    raise _fail(path, lineno, f"p_cnt {p_cnt_field!r}")
                p_cnt = int(p_cnt_field)
                i += 1
                up, down = [], []
                for _ in range(p_cnt):
                    sym, tgt, tpos, src = f[i], f[i + 1], f[i + 2], f[i + 3]
                    if len(tgt) != 8 or not tgt.isdigit():
                        raise _fail(path, lineno, f"pointer offset {tgt!r}")
                    if tpos not in ("n", "v", "a", "s", "r") or len(src) != 4:
                        raise _fail(path, lineno, f"pointer field {tpos!r} {src!r}")
                    int(src, 16)
                    if tpos == pos.value:
                        if sym in ("@", "@i"):
                            up.append((int(tgt), pos))
                        elif sym in ("~", "~i"):
                            down.append((int(tgt), pos))
                    i += 4
                if pos is Pos.VERB and i < len(f):
                    f_cnt = int(f[i])
                    i += 1
                    for _ in range(f_cnt):
                        if f[i] != "+":
                            raise _fail(path, lineno, f"frame marker {f[i]!r}")
                        int(f[i + 1]), int(f[i + 2], 16)
                        i += 3
                if i != len(f):
                    raise _fail(path, lineno, f"trailing fields {f[i:]!r}")
            except IndexError:
                raise _fail(path, lineno, "record truncated") from None
            except ValueError as exc:
                raise _fail(path, lineno, str(exc)) from None
            if offset in out:
                raise _fail(path, lineno, f"duplicate offset {f[0]}")
            out[offset] = _RawSynset(offset, pos, lemmas, gloss.strip(), up, down)
    return out


def _parse_index(path: Path, pos: Pos, known: dict[int, _RawSynset]) -> dict[str, list[int]]:
    out: dict[str, list[int]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.startswith("  "):
                continue
            f = line.split()
            if not f:
                raise _fail(path, lineno, "empty line")
            try:
                lemma, p = f[0], f[1]
                if p != pos.value:
                    raise _fail(path, lineno, f"pos {p!r} in {pos.label} index")
                synset_cnt = int(f[2])
                p_cnt = int(f[3])
                i = 4 + p_cnt
                int(f[i]), int(f[i + 1])  # sense_cnt, tagsense_cnt
                offsets = f[i + 2:]
                if len(offsets) != synset_cnt:
                    raise _fail(path, lineno, f"expected {synset_cnt} offsets, found {len(offsets)}")
                vals = []
                for o in offsets:
                    if len(o) != 8 or not o.isdigit():
                        raise _fail(path, lineno, f"synset_offset {o!r}")
                    if int(o) not in known:
                        raise _fail(path, lineno, f"offset {o} not in data.{pos.label}")
                    vals.append(int(o))
            except IndexError:
                raise _fail(path, lineno, "record truncated") from None
            except ValueError as exc:
                raise _fail(path, lineno, str(exc)) from None
            out[lemma.lower()] = vals
    return out


def _parse_exc(path: Path) -> dict[str, tuple[str, ...]]:
    out: dict[str, tuple[str, ...]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            f = line.split()
            if not f:
                continue
            if len(f) < 2:
                raise _fail(path, lineno, "exception entry without base form")
            out[f[0].lower()] = out.get(f[0].lower(), ()) + tuple(x.lower() for x in f[1:])
    return out


def load_wordnet(data_dir: "str | Path") -> WordnetGraph:
    """Strictly parse the noun and verb files of a WordNet 3.x database."""
    root = Path(data_dir)
    for name in _FILES:
        if not (root / name).is_file():
            raise WordnetError(f"missing file: {root / name}")

    synsets: dict[str, Synset] = {}
    lemma_index: dict[tuple[str, Pos], tuple[SynsetId, ...]] = {}
    exceptions: dict[Pos, dict[str, tuple[str, ...]]] = {}

    for pos in Pos:
        raw = _parse_data(root / f"data.{pos.label}", pos)
        index = _parse_index(root / f"index.{pos.label}", pos, raw)
        exceptions[pos] = _parse_exc(root / f"{pos.label}.exc")

        ids: dict[int, SynsetId] = {}
        for off, rs in raw.items():
            first = rs.lemmas[0]
            offsets = index.get(first)
            if offsets is None or off not in offsets:
                raise WordnetError(
                    f"data.{pos.label}: synset {off:08d} lemma {first!r} missing from index.{pos.label}"
                )
            ids[off] = SynsetId(f"{first}.{pos.value}.{offsets.index(off) + 1:02d}", off)

        parents: dict[int, list[int]] = {off: [] for off in raw}
        children: dict[int, list[int]] = {off: [] for off in raw}
        for off, rs in raw.items():
            for tgt, _ in rs.up:
                if tgt not in raw:
                    raise WordnetError(f"data.{pos.label}: synset {off:08d} points to unknown {tgt:08d}")
                if tgt not in parents[off]:
                    parents[off].append(tgt)
                    children[tgt].append(off)
            for tgt, _ in rs.down:
                if tgt not in raw:
                    raise WordnetError(f"data.{pos.label}: synset {off:08d} points to unknown {tgt:08d}")

        for off, rs in raw.items():
            sid = ids[off]
            synsets[sid.key] = Synset(
                id=sid,
                lemmas=tuple(rs.lemmas),
                gloss=rs.gloss,
                hypernyms=tuple(sorted((ids[o] for o in parents[off]), key=lambda s: s.key)),
                hyponyms=tuple(sorted((ids[o] for o in children[off]), key=lambda s: s.key)),
            )
        for lemma, offs in index.items():
            lemma_index[(lemma, pos)] = tuple(ids[o] for o in offs)
        for rs in raw.values():
            for lemma in rs.lemmas:
                if (lemma, pos) not in lemma_index:
                    raise WordnetError(f"index.{pos.label}: lemma {lemma!r} of {ids[rs.offset].key} not indexed")

    return WordnetGraph(synsets, lemma_index, exceptions)
