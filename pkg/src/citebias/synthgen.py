"""Synthetic corpora with known gender composition, homophily, preferential
attachment and planted citation bias.

Papers are created in date order. Each paper draws its number of
citations and then samples distinct older targets (at most ten years older,
no shared author) with weight

    (1 + homophily_strength * [same country/topic/rank])
        * (in_degree + 1) ** pa_exponent
        * planted_bias[target category]
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping

import numpy as np

from .corpus import (
    GENDER_CATEGORIES,
    MIN_CITING_YEAR,
    VENUE_RANKS,
    AuthorRecord,
    CitationEdge,
    PaperRecord,
    shift_years,
    write_authors,
    write_citations,
    write_papers,
)

CONFERENCE_RANKS = ("A*", "A", "B", "C")


class SynthConfigError(ValueError):
    pass


@dataclass
class SynthConfig:
    n_papers: int = 2000
    year_start: int = 2000
    year_end: int = 2019
    gender_category_probs: tuple[float, float, float, float] = (0.75, 0.08, 0.11, 0.06)
    n_countries: int = 5
    country_skew: float = 1.0
    n_topics: int = 10
    topic_skew: float = 1.0
    n_subfields: int = 4
    rank_probs: tuple[float, ...] = (0.125,) * 8
    venues_per_rank: int = 3
    citations_dist: str = "poisson"  # "poisson" or "fixed"
    citations_mean: float = 5.0
    authors_per_paper: float = 2.5
    author_pool_ratio: float = 0.6
    female_author_share: float = 0.2
    homophily_strength: float = 0.0
    pa_exponent: float = 0.0
    planted_bias: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    def validate(self) -> "SynthConfig":
        if self.n_papers < 2:
            raise SynthConfigError("n_papers must be at least 2")
        if self.year_end < self.year_start:
            raise SynthConfigError("empty year range")
        for name in ("n_countries", "n_topics", "n_subfields", "venues_per_rank"):
            if getattr(self, name) < 1:
                raise SynthConfigError(f"{name} must be positive")
        for name, vec, size in (
            ("gender_category_probs", self.gender_category_probs, 4),
            ("rank_probs", self.rank_probs, len(VENUE_RANKS)),
        ):
            if len(vec) != size or any(p < 0 for p in vec) or abs(sum(vec) - 1.0) > 1e-6:
                raise SynthConfigError(f"{name} must be {size} nonnegative numbers summing to 1")
        if self.citations_dist not in ("poisson", "fixed"):
            raise SynthConfigError(f"unknown citations_dist {self.citations_dist!r}")
        if self.citations_mean < 0:
            raise SynthConfigError("citations_mean must be nonnegative")
        if self.citations_mean > self.n_papers - 1:
            raise SynthConfigError(
                f"{self.citations_mean} citations per paper cannot be placed among {self.n_papers} papers"
            )
        if self.homophily_strength < 0 or self.pa_exponent < 0:
            raise SynthConfigError("homophily_strength and pa_exponent must be nonnegative")
        for cat, w in self.planted_bias.items():
            if cat not in GENDER_CATEGORIES or w < 0:
                raise SynthConfigError(f"bad planted_bias entry {cat}={w}")
        if not 0 <= self.female_author_share <= 1:
            raise SynthConfigError("female_author_share must be in [0, 1]")
        return self

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "SynthConfig":
        """Build from string-valued settings (config files, CLI)."""
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise SynthConfigError(f"unknown synth setting {key!r}")
            default = getattr(cls(), key)
            if not isinstance(raw, str):
                kwargs[key] = raw
            elif key == "planted_bias":
                kwargs[key] = {
                    k.strip(): float(v) for k, v in (kv.split(":") for kv in raw.split(",") if kv.strip())
                }
            elif isinstance(default, tuple):
                kwargs[key] = tuple(float(x) for x in raw.split(","))
            elif isinstance(default, bool):
                kwargs[key] = raw.lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                kwargs[key] = int(raw)
            elif isinstance(default, float):
                kwargs[key] = float(raw)
            else:
                kwargs[key] = raw
        return cls(**kwargs)


@dataclass
class SynthCorpus:
    papers: list[PaperRecord]
    citations: list[CitationEdge]
    authors: list[AuthorRecord]
    capped_papers: int = 0

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "papers": out / "papers.jsonl",
            "citations": out / "citations.csv",
            "authors": out / "authors.jsonl",
        }
        write_papers(paths["papers"], self.papers)
        write_citations(paths["citations"], self.citations)
        write_authors(paths["authors"], self.authors)
        return paths


def _zipf(n: int, skew: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** skew
    return w / w.sum()


def generate(config: SynthConfig) -> SynthCorpus:
    cfg = config.validate()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_papers

    start = dt.date(cfg.year_start, 1, 1).toordinal()
    stop = dt.date(cfg.year_end, 12, 31).toordinal()
    ords = np.sort(rng.integers(start, stop + 1, size=n))
    dates = [dt.date.fromordinal(int(o)) for o in ords]

    country = rng.choice(cfg.n_countries, size=n, p=_zipf(cfg.n_countries, cfg.country_skew))
    topic = rng.choice(cfg.n_topics, size=n, p=_zipf(cfg.n_topics, cfg.topic_skew))
    rank = rng.choice(len(VENUE_RANKS), size=n, p=np.asarray(cfg.rank_probs) / sum(cfg.rank_probs))
    venue = rng.integers(0, cfg.venues_per_rank, size=n)
    cat = rng.choice(4, size=n, p=np.asarray(cfg.gender_category_probs) / sum(cfg.gender_category_probs))

    # author pools per (country, gender)
    country_share = np.bincount(country, minlength=cfg.n_countries) / n
    pools: dict[tuple[int, str], list[str]] = {}
    author_country: dict[str, int] = {}
    author_gender: dict[str, str] = {}
    total_authors = max(4, int(round(n * cfg.author_pool_ratio)))
    next_id = 0
    for c in range(cfg.n_countries):
        for gender, share in (("female", cfg.female_author_share), ("male", 1 - cfg.female_author_share)):
            size = max(3, int(round(total_authors * country_share[c] * share)))
            ids = [f"A{next_id + k:07d}" for k in range(size)]
            next_id += size
            pools[(c, gender)] = ids
            for a in ids:
                author_country[a] = c
                author_gender[a] = gender

    def pick(c: int, gender: str, taken: set[str]) -> str:
        nonlocal next_id
        pool = pools[(c, gender)]
        for _ in range(100):
            a = pool[int(rng.integers(len(pool)))]
            if a not in taken:
                return a
        free = [a for a in pool if a not in taken]
        if free:
            return free[int(rng.integers(len(free)))]
        # tiny pool and a long author list: grow the pool
        a = f"A{next_id:07d}"
        next_id += 1
        pool.append(a)
        author_country[a] = c
        author_gender[a] = gender
        return a

    letter_gender = {"M": "male", "W": "female"}
    paper_authors: list[tuple[str, ...]] = []
    for i in range(n):
        g = GENDER_CATEGORIES[cat[i]]
        k = 1 + int(rng.poisson(max(cfg.authors_per_paper - 1, 0)))
        if k == 1 and g[0] != g[1]:
            k = 2
        taken: set[str] = set()
        first = pick(country[i], letter_gender[g[0]], taken)
        taken.add(first)
        if k == 1:
            paper_authors.append((first,))
            continue
        middle = []
        for _ in range(k - 2):
            mg = "female" if rng.random() < cfg.female_author_share else "male"
            a = pick(country[i], mg, taken)
            taken.add(a)
            middle.append(a)
        last = pick(country[i], letter_gender[g[1]], taken)
        paper_authors.append((first, *middle, last))

    papers = []
    for i in range(n):
        r = VENUE_RANKS[rank[i]]
        papers.append(
            PaperRecord(
                paper_id=f"P{i:07d}",
                title=f"Synthetic paper {i}",
                pub_date=dates[i],
                year=dates[i].year,
                venue_id=f"{r}-{venue[i]}",
                venue_type="conference" if r in CONFERENCE_RANKS else "journal",
                venue_rank=r,
                country=f"C{country[i]}",
                topic_id=f"T{topic[i]}",
                subfield_id=f"S{topic[i] % cfg.n_subfields}",
                author_ids=paper_authors[i],
                gender_category=GENDER_CATEGORIES[cat[i]],
            )
        )

    # citations
    key = (country * cfg.n_topics + topic) * len(VENUE_RANKS) + rank
    bias = np.array([cfg.planted_bias.get(g, 1.0) for g in GENDER_CATEGORIES])[cat]
    oldest = np.array([shift_years(d, -10).toordinal() for d in dates])
    lo = np.searchsorted(ords, oldest, side="left")
    in_deg = np.zeros(n, dtype=np.int64)
    papers_of: dict[str, list[int]] = {}
    citations: list[CitationEdge] = []
    capped = 0
    for i in range(n):
        if cfg.citations_dist == "poisson":
            m = int(rng.poisson(cfg.citations_mean))
        else:
            m = int(round(cfg.citations_mean))
        if m and dates[i].year >= MIN_CITING_YEAR and i > lo[i]:
            cand = np.arange(lo[i], i)
            w = bias[lo[i] : i].astype(float)
            if cfg.homophily_strength:
                w = w * (1.0 + cfg.homophily_strength * (key[lo[i] : i] == key[i]))
            if cfg.pa_exponent:
                w = w * (in_deg[lo[i] : i] + 1.0) ** cfg.pa_exponent
            for a in paper_authors[i]:
                for j in papers_of.get(a, ()):
                    if j >= lo[i]:
                        w[j - lo[i]] = 0.0
            available = int(np.count_nonzero(w))
            if available < m:
                capped += 1
                m = available
            if m:
                targets = np.sort(rng.choice(cand, size=m, replace=False, p=w / w.sum()))
                in_deg[targets] += 1
                citations.extend(CitationEdge(papers[i].paper_id, papers[j].paper_id) for j in targets)
        for a in paper_authors[i]:
            papers_of.setdefault(a, []).append(i)

    first_year: dict[str, int] = {}
    for i, auths in enumerate(paper_authors):
        for a in auths:
            first_year.setdefault(a, dates[i].year)
    authors = [
        AuthorRecord(
            author_id=a,
            full_name=f"Given{a[1:]} Family{a[1:]}",
            first_pub_year=first_year[a],
            country=f"C{author_country[a]}",
            gender=author_gender[a],
        )
        for a in sorted(first_year)
    ]
    return SynthCorpus(papers=papers, citations=citations, authors=authors, capped_papers=capped)
