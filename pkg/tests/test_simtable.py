import json
from itertools import combinations

import pytest

from shoe.raters import MockRater, RaterGateway
from shoe.simtable import (
    DEFAULT_TEMPLATE,
    Journal,
    PairRater,
    PromptTemplateError,
    RawRating,
    SimilarityTable,
    TableError,
    audit_screening,
    build_prompt,
    canonical_pair,
    ensemble_average,
    pearson_between_raters,
    rate_pairs,
    screen_pairs,
    template_hash,
)
from shoe.wordnet import Pos, Synset, SynsetId

N_VERBS = 46  # 46 choose 2 = 1035 candidate pairs
KEYS = [f"act{i:02d}.v.01" for i in range(N_VERBS)]
SYNSETS = {k: Synset(SynsetId(k), (k.split(".")[0],), f"gloss of {k}") for k in KEYS}
PAIRS = list(combinations(KEYS, 2))


def gw(name, seed=0, zero=0.5):
    return RaterGateway(MockRater(name, seed, zero), retries=0, backoff=0)


def engine(journal=None, workers=4):
    return PairRater(SYNSETS.__getitem__, workers=workers, journal=Journal(journal))


def build(raters=("s", "r1", "r2", "r3"), journal=None, subset=None, workers=4):
    gws = [gw(n, i, 0.6 if i == 0 else 0.2) for i, n in enumerate(raters)]
    eng = engine(journal, workers)
    done = eng.journal.load()
    screen = screen_pairs(PAIRS, gws[0], eng, done)
    rated = rate_pairs(sorted(screen.nonzero), gws[1:], eng, done)
    table = ensemble_average(screen.ratings + rated, subset or list(raters), Pos.VERB, {"screener": raters[0]})
    return table, screen, rated, gws


@pytest.fixture(scope="module")
def built():
    return build()


# -- prompt -----------------------------------------------------------------------

def test_prompt_contains_lemmas_glosses_and_scale(wn):
    p = build_prompt((wn.synset("ride.v.01"), wn.synset("ride.v.02")))
    assert '"ride" - sit and travel on the back of an animal' in p
    assert "be carried or travel on or in a vehicle" in p
    assert "4 = synonymous" in p and "verb senses" in p


def test_prompt_template_validation(wn):
    pair = (wn.synset("dog.n.01"), wn.synset("cat.n.01"))
    with pytest.raises(PromptTemplateError, match="gloss_b"):
        build_prompt(pair, "{lemma_a} {gloss_a} {lemma_b} {scale}")
    with pytest.raises(PromptTemplateError, match="unresolved"):
        build_prompt(pair, DEFAULT_TEMPLATE + "{extra}")
    with pytest.raises(TableError):
        build_prompt((wn.synset("dog.n.01"), wn.synset("eat.v.01")))
    assert template_hash(DEFAULT_TEMPLATE) == template_hash(DEFAULT_TEMPLATE)
    assert template_hash(DEFAULT_TEMPLATE) != template_hash(DEFAULT_TEMPLATE + " ")


# -- table object --------------------------------------------------------------------

def test_lookup_laws():
    t = SimilarityTable(Pos.VERB).with_entry("b.v.01", "a.v.01", 0.25)
    assert t("a.v.01", "b.v.01") == t("b.v.01", "a.v.01") == 0.25
    assert t("a.v.01", "a.v.01") == 1.0
    assert t("a.v.01", "zz.v.01") == 0.0
    assert list(t.entries) == [("a.v.01", "b.v.01")]
    with pytest.raises(TableError):
        t("a.n.01", "b.v.01")
    with pytest.raises(TableError):
        t.with_entry("a.v.01", "c.v.01", 1.5)


def test_identity_table():
    t = SimilarityTable.identity("noun")
    assert t("dog.n.01", "dog.n.01") == 1.0 and t("dog.n.01", "cat.n.01") == 0.0


def test_raw_rating_validation():
    assert RawRating("b.v.01", "a.v.01", "x", 3).pair == ("a.v.01", "b.v.01")
    for bad in (5, -1, 2.5, "3"):
        with pytest.raises(TableError):
            RawRating("a.v.01", "b.v.01", "x", bad)


def test_load_rejects_inconsistent_scores(tmp_path):
    doc = {"pos": "verb", "manifest": {}, "entries": [
        {"a": "a.v.01", "b": "b.v.01", "score": 0.5, "ratings": [{"rater": "x", "rating": 3}]}]}
    with pytest.raises(TableError, match="mean rating"):
        SimilarityTable.from_dict(doc)
    doc["entries"][0]["b"] = "a.v.01"
    with pytest.raises(TableError, match="identity"):
        SimilarityTable.from_dict(doc)
    with pytest.raises(TableError, match="malformed"):
        SimilarityTable.from_dict({"pos": "verb"})


# -- the mock-built 1000+ pair table ---------------------------------------------------

def test_score_is_mean_over_four(built):
    table, _, rated, _ = built
    assert len(PAIRS) >= 1000
    for pair, score in table.entries.items():
        rs = [v for _, v in table.ratings[pair]]
        assert score == sum(rs) / len(rs) / 4.0


def test_screening_soundness(built):
    table, screen, rated, _ = built
    assert screen.screened_out and screen.nonzero
    assert screen.screened_out.isdisjoint(screen.nonzero)
    assert len(screen.nonzero) + len(screen.screened_out) + len(screen.unrated) == len(PAIRS)
    for pair in screen.screened_out:
        assert table(*pair) == 0.0
        assert table.ratings[pair] == [("s", 0)]  # the zero is retained
    # refinement raters only ever saw screened-in pairs
    assert {r.pair for r in rated} == screen.nonzero


def test_screening_call_count(built):
    _, screen, rated, gws = built
    assert screen.calls == len(PAIRS) == gws[0].backend.calls
    assert all(g.backend.calls == len(screen.nonzero) for g in gws[1:])


def test_serialization_round_trip_is_byte_stable(built, tmp_path):
    table, *_ = built
    text = table.to_json()
    again = SimilarityTable.from_dict(json.loads(text))
    assert again.to_json() == text
    assert again.entries == table.entries
    table.save(tmp_path / "t.json")
    assert SimilarityTable.load(tmp_path / "t.json").to_json() == text
    assert '"score": 0.000000' in text


def test_single_rater_subset_reproduces_its_ratings(built):
    _, screen, rated, _ = built
    single = ensemble_average(screen.ratings + rated, ["r2"], Pos.VERB)
    mine = {r.pair: r.rating for r in rated if r.rater == "r2"}
    assert set(single.entries) == set(mine)
    for pair, v in mine.items():
        assert single(*pair) == v / 4.0
    # screened-out pairs are omitted (implicit 0) without the screener
    assert set(single.entries).isdisjoint(screen.screened_out)
    assert single.manifest["raters"] == ["r2"]


def test_empty_subset_rejected(built):
    with pytest.raises(TableError):
        ensemble_average([], [], Pos.VERB)


def test_all_zero_screener():
    s = gw("s", zero=1.0)
    res = screen_pairs(PAIRS[:50], s, engine())
    assert res.nonzero == set() and len(res.screened_out) == 50


def test_identity_and_cross_pos_candidates():
    res = screen_pairs([(KEYS[0], KEYS[0]), (KEYS[1], KEYS[0])], gw("s"), engine())
    assert res.calls == 1
    with pytest.raises(TableError, match="cross-POS"):
        screen_pairs([("a.v.01", "b.n.01")], gw("s"), engine())


# -- journal and resume ------------------------------------------------------------------

def test_resume_reuses_journal(tmp_path):
    j = tmp_path / "build.jsonl"
    first, screen1, _, gws1 = build(journal=j)
    n_lines = len(j.read_text().splitlines())
    second, screen2, _, gws2 = build(journal=j)
    assert all(g.backend.calls == 0 for g in gws2)
    assert len(j.read_text().splitlines()) == n_lines
    assert second.to_json() == first.to_json()


def test_interrupted_build_resumes(tmp_path):
    j = tmp_path / "build.jsonl"
    full, *_ = build(journal=tmp_path / "ref.jsonl")
    build(journal=j)
    lines = j.read_text().splitlines()
    j.write_text("\n".join(lines[: len(lines) // 3]) + "\n")  # crash after a third
    resumed, screen, _, gws = build(journal=j)
    assert resumed.to_json() == full.to_json()
    assert 0 < gws[0].backend.calls < len(PAIRS)


def test_unparseable_replies_are_unrated_and_retried_on_resume(tmp_path):
    j = tmp_path / "j.jsonl"
    flaky = RaterGateway(MockRater("s", 0, 0.0, overrides={"act03": "I cannot say"}), retries=0, backoff=0)
    res = screen_pairs(PAIRS, flaky, engine(j))
    assert res.unrated and all("act03.v.01" in p for p in res.unrated)
    fixed = RaterGateway(MockRater("s", 0, 0.0), retries=0, backoff=0)
    res2 = screen_pairs(PAIRS, fixed, engine(j), Journal(j).load())
    assert res2.calls == len(res.unrated) and not res2.unrated


def test_bad_journal_line(tmp_path):
    j = tmp_path / "j.jsonl"
    j.write_text('{"a": "a.v.01", "b": "b.v.01", "rater": "x", "rating": 9}\n')
    with pytest.raises(TableError, match=":1:"):
        Journal(j).load()


def test_journal_order_is_independent_of_workers(tmp_path):
    build(journal=tmp_path / "w1.jsonl", workers=1)
    build(journal=tmp_path / "w16.jsonl", workers=16)
    assert (tmp_path / "w1.jsonl").read_bytes() == (tmp_path / "w16.jsonl").read_bytes()


# -- statistics and audit ------------------------------------------------------------------

def test_pearson_between_raters():
    rs = [RawRating(f"a{i}.v.01", "z.v.01", "x", v) for i, v in enumerate([0, 1, 2, 3])]
    rs += [RawRating(f"a{i}.v.01", "z.v.01", "y", v) for i, v in enumerate([1, 2, 3, 4])]
    rs += [RawRating(f"a{i}.v.01", "z.v.01", "c", 2) for i in range(4)]
    m = pearson_between_raters(rs)
    assert m["x"]["y"] == pytest.approx(1.0) and m["y"]["x"] == m["x"]["y"]
    assert m["x"]["c"] is None


def test_audit_is_seeded_and_bounded(built):
    _, screen, _, gws = built
    e = engine()
    a = audit_screening(screen.screened_out, 30, gws[1:], 7, e)
    b = audit_screening(screen.screened_out, 30, gws[1:], 7, e)
    assert a == b and set(a) == {"r1", "r2", "r3"}
    assert all(0.0 <= v <= 100.0 for v in a.values())
    with pytest.raises(TableError):
        audit_screening(screen.screened_out, len(screen.screened_out) + 1, gws[1:], 0, e)
    with pytest.raises(TableError):
        audit_screening(set(), 1, gws[1:], 0, e)


def test_audit_percentages_literal():
    zero = RaterGateway(MockRater("z", 0, 1.0), retries=0)
    pos = RaterGateway(MockRater("p", 0, 0.0), retries=0)
    out = audit_screening(PAIRS[:20], 10, [zero, pos], 0, engine())
    assert out == {"z": 0.0, "p": 100.0}


def test_canonical_pair():
    assert canonical_pair("b.v.01", SynsetId("a.v.01")) == ("a.v.01", "b.v.01")


def test_journal_creates_missing_parent_directory(tmp_path):
    j = Journal(tmp_path / "a" / "b" / "j.jsonl")
    j.append([RawRating("a.v.01", "b.v.01", "r", 2)])
    assert (tmp_path / "a" / "b" / "j.jsonl").is_file()
