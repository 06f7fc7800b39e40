import datetime as dt
import json
import random

import pytest

from citebias.corpus import (
    CitationEdge,
    DuplicateRecordError,
    LookupFailure,
    SchemaError,
    assign_country,
    assign_gender_category,
    build_network,
    compute_prominence_and_coauthors,
    filter_citations,
    load_authors,
    load_citations,
    load_papers,
    parse_pub_date,
    shift_years,
    violated_rules,
    write_papers,
)
from conftest import author, paper


def _paper_line(pid, **kw):
    d = {
        "paper_id": pid,
        "title": f"t{pid}",
        "pub_date": "2010-05-01",
        "year": 2010,
        "venue_id": "v",
        "venue_type": "journal",
        "venue_rank": "Q1",
        "country": "US",
        "topic_id": "T1",
        "subfield_id": "S1",
        "author_ids": ["a1"],
        "gender_category": "MM",
    }
    d.update(kw)
    return json.dumps(d)


class TestLoading:
    def test_empty_file(self, tmp_path):
        p = tmp_path / "papers.jsonl"
        p.write_text("")
        assert load_papers(p) == []

    def test_round_trip(self, tmp_path):
        p = tmp_path / "papers.jsonl"
        p.write_text("\n".join(_paper_line(f"p{i}") for i in range(3)) + "\n")
        records = load_papers(p)
        assert [r.paper_id for r in records] == ["p0", "p1", "p2"]
        out = tmp_path / "again.jsonl"
        write_papers(out, records)
        assert [json.loads(x) for x in out.read_text().splitlines()] == [
            json.loads(x) for x in p.read_text().splitlines()
        ]

    def test_duplicate_names_both_lines(self, tmp_path):
        p = tmp_path / "papers.jsonl"
        lines = [_paper_line(x) for x in ("a", "dup", "b", "c", "dup")]
        p.write_text("\n".join(lines) + "\n")
        with pytest.raises(DuplicateRecordError) as err:
            load_papers(p)
        assert err.value.lines == [2, 5] or tuple(err.value.lines) == (2, 5)
        assert "2" in str(err.value) and "5" in str(err.value)

    def test_malformed_line_reports_line_number(self, tmp_path):
        p = tmp_path / "papers.jsonl"
        p.write_text(_paper_line("a") + "\n{not json\n")
        with pytest.raises(SchemaError) as err:
            load_papers(p)
        assert err.value.line == 2

    def test_missing_field(self, tmp_path):
        p = tmp_path / "papers.jsonl"
        d = json.loads(_paper_line("a"))
        del d["venue_id"]
        p.write_text(json.dumps(d) + "\n")
        with pytest.raises(SchemaError):
            load_papers(p)

    def test_citations_collapse_duplicates(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("a,b\na,b\nb,c\n")
        assert load_citations(p) == [CitationEdge("a", "b"), CitationEdge("b", "c")]

    def test_citations_bad_row(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("a,b,c\n")
        with pytest.raises(SchemaError):
            load_citations(p)

    def test_authors_ignore_derived_fields(self, tmp_path):
        p = tmp_path / "a.jsonl"
        p.write_text(json.dumps({"author_id": "x", "full_name": "X Y", "first_pub_year": 2000, "prominence": 99}) + "\n")
        (a,) = load_authors(p)
        assert a.prominence == 0 and a.coauthors == frozenset()


def test_partial_dates():
    assert parse_pub_date("2011") == dt.date(2011, 1, 1)
    assert parse_pub_date("2011-07") == dt.date(2011, 7, 1)
    assert parse_pub_date(None, 2003) == dt.date(2003, 1, 1)


def test_shift_years_leap_day():
    assert shift_years(dt.date(2012, 2, 29), -10) == dt.date(2002, 2, 28)


class TestCountry:
    def test_majority(self):
        assert assign_country(None, ["US", "US", "JP"]) == "US"

    def test_empty(self):
        assert assign_country(None, []) is None

    def test_tie(self):
        assert assign_country(None, ["US", "JP"]) is None


class TestGenderCategory:
    def test_sole_male(self):
        p = paper("p", 2010, ["m"], cat=None)
        assert assign_gender_category(p, {"m": author("m", "male")}) == "MM"

    def test_sole_female(self):
        p = paper("p", 2010, ["w"], cat=None)
        assert assign_gender_category(p, {"w": author("w", "female")}) == "WW"

    def test_woman_first_man_last(self):
        p = paper("p", 2010, ["w", "x", "m"], cat=None)
        auth = {"w": author("w", "female"), "x": author("x", None, None), "m": author("m", "male")}
        assert assign_gender_category(p, auth) == "WM"

    def test_country_mismatch(self):
        p = paper("p", 2010, ["w", "m"], cat=None)
        auth = {"w": author("w", "female", "US"), "m": author("m", "male", "JP")}
        assert assign_gender_category(p, auth) is None

    def test_missing_gender(self):
        p = paper("p", 2010, ["w", "m"], cat=None)
        auth = {"w": author("w", None), "m": author("m", "male")}
        assert assign_gender_category(p, auth) is None

    def test_unknown_author(self):
        with pytest.raises(LookupFailure):
            assign_gender_category(paper("p", 2010, ["ghost"]), {})


class TestProminence:
    def setup_method(self):
        self.papers = [
            paper("p1", 2010, ["a", "b"]),
            paper("p2", 2011, ["a"]),
            paper("q", 2015, ["c"]),
        ]
        cites = [("x1", "p1"), ("x2", "p1"), ("x3", "p1"), ("x1", "p2"), ("x2", "p2"), ("x3", "p2"), ("x4", "p2")]
        self.papers += [paper(s, 2019, ["z"]) for s in ("x1", "x2", "x3", "x4")]
        self.edges = [CitationEdge(s, d) for s, d in cites]
        self.authors = [author(x) for x in "abcz"]

    def test_sum_over_papers(self):
        out = compute_prominence_and_coauthors(self.papers, self.edges, self.authors)
        assert out["a"].prominence == 7
        assert out["b"].prominence == 3
        assert out["c"].prominence == 0

    def test_coauthor_symmetry(self):
        out = compute_prominence_and_coauthors(self.papers, self.edges, self.authors)
        assert "b" in out["a"].coauthors and "a" in out["b"].coauthors
        assert "a" not in out["a"].coauthors


class TestFilter:
    def _authors(self, papers, extra=()):
        auth = {a.author_id: a for a in (author(x) for x in sorted({y for p in papers for y in p.author_ids}))}
        return compute_prominence_and_coauthors(papers, [], list(auth.values()) + list(extra))

    def test_eleven_years_older_removed(self):
        ps = [paper("old", dt.date(2000, 6, 1), ["a"]), paper("new", dt.date(2011, 6, 1), ["b"])]
        net = filter_citations(ps, [CitationEdge("new", "old")], self._authors(ps), keep_isolated=True)
        assert net.M == 0

    def test_exactly_ten_years_kept(self):
        ps = [paper("old", dt.date(2001, 6, 1), ["a"]), paper("new", dt.date(2011, 6, 1), ["b"])]
        net = filter_citations(ps, [CitationEdge("new", "old")], self._authors(ps))
        assert net.M == 1

    def test_self_citation_removed(self):
        ps = [paper("p", 2005, ["a"]), paper("q", 2010, ["a", "b"])]
        net = filter_citations(ps, [CitationEdge("q", "p")], self._authors(ps), keep_isolated=True)
        assert net.M == 0
        kept = filter_citations(ps, [CitationEdge("q", "p")], self._authors(ps), include_self_citations=True)
        assert kept.M == 1

    def test_toy_corpus_one_violation_per_rule(self):
        # c1 and c2 are an earlier collaboration linking author f to author g
        ps = [
            paper("u", 2010, ["f", "m", "l"]),
            paper("ok1", 2005, ["o1"]),
            paper("ok2", 2006, ["o2"]),
            paper("ok3", 2008, ["o3"]),
            paper("old", 1998, ["o4"]),
            paper("shared", 2007, ["m"]),
            paper("collab", 2004, ["g"]),
            paper("early", 1989, ["e"]),
        ]
        linking = paper("link", 2003, ["f", "g"])
        edges = [
            ("u", "ok1"),
            ("u", "ok2"),
            ("u", "ok3"),
            ("ok3", "ok1"),
            ("u", "old"),  # (i) window
            ("u", "shared"),  # (ii) shared author
            ("u", "collab"),  # (iii) coauthor of the first author
            ("early", "old"),  # (iv) citing year before 1990
        ]
        edges = [CitationEdge(*e) for e in edges]
        auth = compute_prominence_and_coauthors(
            ps + [linking], edges, [author(x) for x in sorted({y for p in ps + [linking] for y in p.author_ids})]
        )
        net = filter_citations(ps, edges, auth)
        assert net.M == 4
        assert {(e.src, e.dst) for e in net.edges} == {("u", "ok1"), ("u", "ok2"), ("u", "ok3"), ("ok3", "ok1")}
        broken = [violated_rules(ps[0], {p.paper_id: p for p in ps}[d], auth) for d in ("old", "shared", "collab")]
        # a shared author is necessarily also a coauthor of u's first author
        assert broken == [{"window"}, {"self", "coauthor"}, {"coauthor"}]
        assert violated_rules(ps[7], ps[4], auth) == {"early"}

    def test_idempotent_and_no_isolated(self):
        rng = random.Random(4)
        ps = [paper(f"p{i}", dt.date(1985 + i, 3, 1), [f"a{rng.randrange(12)}", f"a{rng.randrange(12)}"]) for i in range(30)]
        ps = [p if p.author_ids[0] != p.author_ids[1] else paper(p.paper_id, p.pub_date, p.author_ids[:1]) for p in ps]
        edges = [CitationEdge(f"p{rng.randrange(30)}", f"p{rng.randrange(30)}") for _ in range(150)]
        auth = compute_prominence_and_coauthors(ps, edges, [author(f"a{i}") for i in range(12)])
        net = filter_citations(ps, edges, auth)
        again = filter_citations(net.papers.values(), net.edges, auth)
        assert set(again.edges) == set(net.edges) and set(again.papers) == set(net.papers)
        assert all(net.in_degree[p] + net.out_degree[p] >= 1 for p in net.papers)
        for e in net.edges:
            assert not violated_rules(net.papers[e.src], net.papers[e.dst], auth)

    def test_requires_attributes(self):
        ps = [paper("a", 2005, ["x"]), paper("b", 2010, ["y"], rank=None), paper("c", 2010, ["z"])]
        net = filter_citations(ps, [CitationEdge("b", "a"), CitationEdge("c", "a")], self._authors(ps))
        assert set(net.papers) == {"a", "c"}


def test_build_recomputes_category_and_is_order_invariant():
    ps = [
        paper("p1", 2005, ["w1"], cat="MM", country=None),
        paper("p2", 2008, ["m1", "w1"], cat=None, country=None),
        paper("p3", 2010, ["m2"], cat=None, country=None),
    ]
    auth = [author("w1", "female"), author("m1", "male"), author("m2", "male")]
    edges = [CitationEdge("p3", "p1"), CitationEdge("p3", "p2"), CitationEdge("p2", "p1")]
    net, report = build_network(ps, edges, auth)
    assert net.papers["p1"].gender_category == "WW"
    assert net.papers["p2"].gender_category == "MW"
    assert report.category_counts == {"MM": 1, "MW": 1, "WM": 0, "WW": 1}
    net2, report2 = build_network(ps[::-1], edges[::-1], auth[::-1])
    assert report2.category_counts == report.category_counts
