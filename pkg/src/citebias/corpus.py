"""Loading, enrichment and filtering of the paper/citation corpus.

The end product is a :class:`CitationNetwork`, an immutable view over the
papers that carry a country, a gender category and a venue rank, and the
citations among them that survive the four exclusion rules.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

logger = logging.getLogger(__name__)

VENUE_TYPES = ("conference", "journal")
VENUE_RANKS = ("A*", "A", "B", "C", "Q1", "Q2", "Q3", "Q4")
GENDER_CATEGORIES = ("MM", "MW", "WM", "WW")
GENDERS = ("female", "male")

CITATION_WINDOW_YEARS = 10
MIN_CITING_YEAR = 1990


class CorpusError(Exception):
    """Base class for ingestion problems."""


class SchemaError(CorpusError):
    """A record does not match the expected schema."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        self.path = str(path) if path is not None else None
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


class DuplicateRecordError(CorpusError):
    def __init__(self, key: str, lines: Sequence[int], path: str | Path | None = None):
        self.key = key
        self.lines = list(lines)
        self.path = str(path) if path is not None else None
        super().__init__(
            f"duplicate id {key!r} on lines {', '.join(str(n) for n in self.lines)}"
            + (f" of {path}" if path is not None else "")
        )


class LookupFailure(CorpusError, KeyError):
    """An author or paper id could not be resolved."""

    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return str(self.args[0]) if self.args else ""


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PaperRecord:
    paper_id: str
    title: str
    pub_date: dt.date
    year: int
    venue_id: str
    venue_type: str
    topic_id: str
    subfield_id: str
    author_ids: tuple[str, ...]
    venue_rank: str | None = None
    country: str | None = None
    gender_category: str | None = None

    def __post_init__(self) -> None:
        if not self.author_ids:
            raise ValueError(f"paper {self.paper_id!r} has no authors")
        if self.year != self.pub_date.year:
            raise ValueError(
                f"paper {self.paper_id!r}: year {self.year} does not match pub_date {self.pub_date}"
            )
        if self.venue_type not in VENUE_TYPES:
            raise ValueError(f"paper {self.paper_id!r}: bad venue_type {self.venue_type!r}")
        if self.venue_rank is not None and self.venue_rank not in VENUE_RANKS:
            raise ValueError(f"paper {self.paper_id!r}: bad venue_rank {self.venue_rank!r}")
        if self.gender_category is not None and self.gender_category not in GENDER_CATEGORIES:
            raise ValueError(
                f"paper {self.paper_id!r}: bad gender_category {self.gender_category!r}"
            )

    @property
    def first_author(self) -> str:
        return self.author_ids[0]

    @property
    def last_author(self) -> str:
        return self.author_ids[-1]

    def to_dict(self) -> dict:
        return {
            "paper_id": self.paper_id,
            "title": self.title,
            "pub_date": self.pub_date.isoformat(),
            "year": self.year,
            "venue_id": self.venue_id,
            "venue_type": self.venue_type,
            "venue_rank": self.venue_rank,
            "country": self.country,
            "topic_id": self.topic_id,
            "subfield_id": self.subfield_id,
            "author_ids": list(self.author_ids),
            "gender_category": self.gender_category,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PaperRecord":
        pub_date = parse_pub_date(d.get("pub_date"), d.get("year"))
        year = d.get("year", pub_date.year)
        return cls(
            paper_id=str(d["paper_id"]),
            title=str(d.get("title", "")),
            pub_date=pub_date,
            year=int(year),
            venue_id=str(d["venue_id"]),
            venue_type=str(d["venue_type"]),
            venue_rank=d.get("venue_rank"),
            country=d.get("country"),
            topic_id=str(d["topic_id"]),
            subfield_id=str(d["subfield_id"]),
            author_ids=tuple(str(a) for a in d["author_ids"]),
            gender_category=d.get("gender_category"),
        )


@dataclass(frozen=True)
class AuthorRecord:
    author_id: str
    full_name: str
    first_pub_year: int
    country: str | None = None
    gender: str | None = None
    prominence: int = 0
    coauthors: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.author_id in self.coauthors:
            raise ValueError(f"author {self.author_id!r} listed as own coauthor")
        if self.gender is not None and self.gender not in GENDERS:
            raise ValueError(f"author {self.author_id!r}: bad gender {self.gender!r}")
        if self.prominence < 0:
            raise ValueError("prominence must be nonnegative")

    def to_dict(self) -> dict:
        # coauthors and prominence are derived, never written for re-ingestion
        return {
            "author_id": self.author_id,
            "full_name": self.full_name,
            "country": self.country,
            "gender": self.gender,
            "first_pub_year": self.first_pub_year,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AuthorRecord":
        return cls(
            author_id=str(d["author_id"]),
            full_name=str(d.get("full_name", "")),
            country=d.get("country"),
            gender=d.get("gender"),
            first_pub_year=int(d["first_pub_year"]),
        )


@dataclass(frozen=True)
class CitationEdge:
    src: str
    dst: str


@dataclass(frozen=True, eq=False)
class CitationNetwork:
    """Filtered citation graph. Treat as read-only; mappings are proxies."""

    papers: Mapping[str, PaperRecord]
    edges: tuple[CitationEdge, ...]
    authors: Mapping[str, AuthorRecord] = field(default_factory=dict)
    include_self_citations: bool = False
    out_degree: Mapping[str, int] = field(init=False)
    in_degree: Mapping[str, int] = field(init=False)

    def __post_init__(self) -> None:
        out_deg = dict.fromkeys(self.papers, 0)
        in_deg = dict.fromkeys(self.papers, 0)
        for e in self.edges:
            if e.src == e.dst:
                raise ValueError(f"self-loop on {e.src!r}")
            if e.src not in out_deg or e.dst not in in_deg:
                raise ValueError(f"edge {e.src!r}->{e.dst!r} leaves the paper set")
            out_deg[e.src] += 1
            in_deg[e.dst] += 1
        object.__setattr__(self, "papers", MappingProxyType(dict(self.papers)))
        object.__setattr__(self, "authors", MappingProxyType(dict(self.authors)))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "out_degree", MappingProxyType(out_deg))
        object.__setattr__(self, "in_degree", MappingProxyType(in_deg))

    @property
    def N(self) -> int:
        return len(self.papers)

    @property
    def M(self) -> int:
        return len(self.edges)

    def paper(self, paper_id: str) -> PaperRecord:
        try:
            return self.papers[paper_id]
        except KeyError:
            raise LookupFailure(f"unknown paper id {paper_id!r}") from None


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def parse_pub_date(value, year=None) -> dt.date:
    """Parse ``YYYY-MM-DD``; partial dates fall back to the 1st of the month / January 1."""
    if value is None or value == "":
        if year is None:
            raise ValueError("neither pub_date nor year given")
        return dt.date(int(year), 1, 1)
    s = str(value).strip()
    parts = s.split("-")
    if len(parts) == 1:
        return dt.date(int(parts[0]), 1, 1)
    if len(parts) == 2:
        return dt.date(int(parts[0]), int(parts[1]), 1)
    if len(parts) == 3:
        return dt.date.fromisoformat(s)
    raise ValueError(f"unparseable date {value!r}")


def shift_years(d: dt.date, years: int) -> dt.date:
    """Calendar shift keeping month/day; Feb 29 maps to Feb 28 in non-leap years."""
    try:
        return d.replace(year=d.year + years)
    except ValueError:
        return d.replace(year=d.year + years, day=28)


def _read_jsonl(path: str | Path, factory, key_field: str) -> list:
    path = Path(path)
    records = []
    seen: dict[str, list[int]] = defaultdict(list)
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
                if not isinstance(obj, dict):
                    raise ValueError("expected a JSON object")
                rec = factory(obj)
            except (ValueError, KeyError, TypeError) as exc:
                raise SchemaError(f"{type(exc).__name__}: {exc}", path, lineno) from exc
            seen[getattr(rec, key_field)].append(lineno)
            records.append(rec)
    dups = {k: v for k, v in seen.items() if len(v) > 1}
    if dups:
        key, lines = min(dups.items(), key=lambda kv: kv[1][0])
        raise DuplicateRecordError(key, lines, path)
    return records


def load_papers(path: str | Path) -> list[PaperRecord]:
    """Read a JSON Lines papers file. Duplicate ``paper_id`` values are rejected."""
    return _read_jsonl(path, PaperRecord.from_dict, "paper_id")


def load_authors(path: str | Path) -> list[AuthorRecord]:
    return _read_jsonl(path, AuthorRecord.from_dict, "author_id")


def load_citations(path: str | Path) -> list[CitationEdge]:
    """Read a headerless ``src,dst`` CSV. Exact duplicate rows are collapsed."""
    path = Path(path)
    edges: list[CitationEdge] = []
    seen: set[tuple[str, str]] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if row[0].startswith("#"):
                continue
            if len(row) != 2:
                raise SchemaError(f"expected 2 columns, got {len(row)}", path, lineno)
            pair = (row[0].strip(), row[1].strip())
            if pair in seen:
                continue
            seen.add(pair)
            edges.append(CitationEdge(*pair))
    return edges


def write_papers(path: str | Path, papers: Iterable[PaperRecord]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for p in papers:
            fh.write(json.dumps(p.to_dict(), ensure_ascii=False) + "\n")


def write_authors(path: str | Path, authors: Iterable[AuthorRecord]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for a in authors:
            fh.write(json.dumps(a.to_dict(), ensure_ascii=False) + "\n")


def write_citations(path: str | Path, edges: Iterable[CitationEdge]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for e in edges:
            w.writerow((e.src, e.dst))


# ---------------------------------------------------------------------------
# Enrichment
# ---------------------------------------------------------------------------


def assign_country(author: AuthorRecord | None, affiliation_countries: Iterable[str]) -> str | None:
    """Return the strictly most frequent affiliation country, or None on a tie."""
    counts = Counter(c for c in affiliation_countries if c)
    if not counts:
        return None
    (best, n_best), *rest = counts.most_common(2)
    if rest and rest[0][1] == n_best:
        return None
    return best


def assign_gender_category(paper: PaperRecord, authors: Mapping[str, AuthorRecord]) -> str | None:
    def get(aid: str) -> AuthorRecord:
        try:
            return authors[aid]
        except KeyError:
            raise LookupFailure(f"paper {paper.paper_id!r}: unknown author {aid!r}") from None

    for aid in paper.author_ids:
        get(aid)
    first, last = get(paper.first_author), get(paper.last_author)
    letter = {"male": "M", "female": "W"}
    if len(paper.author_ids) == 1:
        if first.gender is None or first.country is None:
            return None
        return letter[first.gender] * 2
    if first.gender is None or last.gender is None:
        return None
    if first.country is None or first.country != last.country:
        return None
    return letter[first.gender] + letter[last.gender]


def paper_country(paper: PaperRecord, authors: Mapping[str, AuthorRecord]) -> str | None:
    """Country shared by the first and last authors (or the sole author)."""
    first = authors[paper.first_author]
    last = authors[paper.last_author]
    if first.country is not None and first.country == last.country:
        return first.country
    return None


def compute_prominence_and_coauthors(
    papers: Sequence[PaperRecord],
    edges: Iterable[CitationEdge],
    authors: Mapping[str, AuthorRecord] | Iterable[AuthorRecord],
) -> dict[str, AuthorRecord]:
    """Recompute prominence and coauthor sets over the full (unfiltered) corpus.

    Edges whose endpoints are not in ``papers`` are ignored.
    """
    if not isinstance(authors, Mapping):
        authors = {a.author_id: a for a in authors}
    known = {p.paper_id for p in papers}
    in_deg: Counter[str] = Counter()
    for e in edges:
        if e.src in known and e.dst in known and e.src != e.dst:
            in_deg[e.dst] += 1
    prominence: Counter[str] = Counter()
    coauthors: dict[str, set[str]] = defaultdict(set)
    for p in papers:
        unique = set(p.author_ids)
        for a in unique:
            prominence[a] += in_deg[p.paper_id]
            coauthors[a].update(unique)
    out = {}
    for aid, a in authors.items():
        out[aid] = replace(
            a,
            prominence=prominence.get(aid, 0),
            coauthors=frozenset(coauthors.get(aid, set()) - {aid}),
        )
    return out


def enrich_papers(
    papers: Iterable[PaperRecord], authors: Mapping[str, AuthorRecord]
) -> list[PaperRecord]:
    """Derive gender category and country from authors; ingested values are discarded."""
    out = []
    for p in papers:
        cat = assign_gender_category(p, authors)
        country = paper_country(p, authors) if cat is not None else None
        out.append(replace(p, gender_category=cat, country=country))
    return out


# ---------------------------------------------------------------------------
# Filtering
# ---------------------------------------------------------------------------


def conflict_authors(paper: PaperRecord, authors: Mapping[str, AuthorRecord]) -> frozenset[str]:
    """Authors whose presence on a cited paper makes the citation ineligible.

    That is the paper's own authors plus the coauthors of its first and last author.
    """
    out = set(paper.author_ids)
    for aid in (paper.first_author, paper.last_author):
        a = authors.get(aid)
        if a is not None:
            out |= a.coauthors
    return frozenset(out)


def violated_rules(
    u: PaperRecord,
    v: PaperRecord,
    authors: Mapping[str, AuthorRecord],
    include_self_citations: bool = False,
) -> set[str]:
    """Names of the exclusion rules the citation u -> v breaks (empty if it is kept)."""
    broken = set()
    if v.pub_date < shift_years(u.pub_date, -CITATION_WINDOW_YEARS):
        broken.add("window")
    if not include_self_citations:
        v_authors = set(v.author_ids)
        if v_authors & set(u.author_ids):
            broken.add("self")
        coauth = set()
        for aid in (u.first_author, u.last_author):
            a = authors.get(aid)
            if a is not None:
                coauth |= a.coauthors
        if coauth & v_authors:
            broken.add("coauthor")
    if u.year < MIN_CITING_YEAR:
        broken.add("early")
    return broken


def filter_citations(
    papers: Iterable[PaperRecord],
    edges: Iterable[CitationEdge],
    authors: Mapping[str, AuthorRecord],
    *,
    keep_isolated: bool = False,
    include_self_citations: bool = False,
) -> CitationNetwork:
    """Build the analysis network.

    Only papers with a country, gender category and venue rank are kept,
    and only citations among them. A citation u -> v is then dropped if v is
    more than ten years older than u, if the two share an author, if v has
    an author among the coauthors of u's first or last author, or if u was
    published before 1990. Papers left without citations are dropped unless
    ``keep_isolated`` is set.
    """
    kept = {
        p.paper_id: p
        for p in papers
        if p.country is not None and p.gender_category is not None and p.venue_rank is not None
    }
    surviving = []
    seen = set()
    for e in edges:
        if e.src == e.dst or (e.src, e.dst) in seen:
            continue
        u = kept.get(e.src)
        v = kept.get(e.dst)
        if u is None or v is None:
            continue
        if violated_rules(u, v, authors, include_self_citations):
            continue
        seen.add((e.src, e.dst))
        surviving.append(e)
    if not keep_isolated:
        touched = {e.src for e in surviving} | {e.dst for e in surviving}
        kept = {pid: p for pid, p in kept.items() if pid in touched}
    used_authors = {aid for p in kept.values() for aid in p.author_ids}
    # coauthors of first/last authors may sit outside the kept set; keep them for conflict checks
    for p in kept.values():
        for aid in (p.first_author, p.last_author):
            a = authors.get(aid)
            if a is not None:
                used_authors |= a.coauthors
    net_authors = {aid: authors[aid] for aid in sorted(used_authors) if aid in authors}
    return CitationNetwork(
        papers=dict(sorted(kept.items())),
        edges=tuple(surviving),
        authors=net_authors,
        include_self_citations=include_self_citations,
    )


@dataclass
class BuildReport:
    n_input_papers: int
    n_input_edges: int
    n_categorized: int
    n_papers: int
    n_edges: int
    category_counts: dict[str, int]

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def build_network(
    papers: Sequence[PaperRecord],
    edges: Sequence[CitationEdge],
    authors: Sequence[AuthorRecord] | Mapping[str, AuthorRecord],
    *,
    keep_isolated: bool = False,
    include_self_citations: bool = False,
) -> tuple[CitationNetwork, BuildReport]:
    """Full pipeline: static author attributes, paper categories, then filtering."""
    enriched_authors = compute_prominence_and_coauthors(papers, edges, authors)
    enriched = enrich_papers(papers, enriched_authors)
    net = filter_citations(
        enriched,
        edges,
        enriched_authors,
        keep_isolated=keep_isolated,
        include_self_citations=include_self_citations,
    )
    cats = Counter(p.gender_category for p in net.papers.values())
    report = BuildReport(
        n_input_papers=len(papers),
        n_input_edges=len(edges),
        n_categorized=sum(p.gender_category is not None for p in enriched),
        n_papers=net.N,
        n_edges=net.M,
        category_counts={g: cats.get(g, 0) for g in GENDER_CATEGORIES},
    )
    return net, report


def load_network(
    papers_path: str | Path,
    citations_path: str | Path,
    authors_path: str | Path,
    **kwargs,
) -> tuple[CitationNetwork, BuildReport]:
    return build_network(
        load_papers(papers_path), load_citations(citations_path), load_authors(authors_path), **kwargs
    )
