import datetime as dt

import pytest

from citebias.corpus import AuthorRecord, CitationEdge, CitationNetwork, PaperRecord, compute_prominence_and_coauthors


def paper(pid, date, authors, *, country="US", topic="T0", rank="A", cat="MM", venue_type="conference", subfield="S0"):
    if isinstance(date, int):
        date = dt.date(date, 1, 1)
    return PaperRecord(
        paper_id=pid,
        title=f"title {pid}",
        pub_date=date,
        year=date.year,
        venue_id=f"V-{rank}",
        venue_type=venue_type,
        topic_id=topic,
        subfield_id=subfield,
        author_ids=tuple(authors),
        venue_rank=rank,
        country=country,
        gender_category=cat,
    )


def author(aid, gender="male", country="US", year=2000):
    return AuthorRecord(author_id=aid, full_name=f"Name {aid}", first_pub_year=year, country=country, gender=gender)


def network(papers, edges, authors=None, include_self_citations=False):
    """Hand-built network (no filtering); coauthor sets are computed from the papers."""
    if authors is None:
        ids = sorted({a for p in papers for a in p.author_ids})
        authors = [author(a) for a in ids]
    edges = [e if isinstance(e, CitationEdge) else CitationEdge(*e) for e in edges]
    enriched = compute_prominence_and_coauthors(papers, edges, authors)
    return CitationNetwork(
        papers={p.paper_id: p for p in papers},
        edges=tuple(edges),
        authors=enriched,
        include_self_citations=include_self_citations,
    )


@pytest.fixture
def make_paper():
    return paper


@pytest.fixture
def make_author():
    return author


@pytest.fixture
def make_network():
    return network
