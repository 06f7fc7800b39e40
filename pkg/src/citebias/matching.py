"""Matched-pair comparison of the citing behaviour of two paper populations."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .corpus import GENDER_CATEGORIES, AuthorRecord, CitationNetwork, PaperRecord
from .groups import Tabulator
from .nullmodels import CandidateIndex, ReplicateSummary, run_replicates
from .stats import ALPHA, t_sf_two_sided

SPLITS = ("gender_MM_vs_WW", "venue_type", "prominence", "ma_or_halves", "random_halves")
INSUFFICIENT = "insufficient_data"


@dataclass(frozen=True, order=True)
class MatchKey:
    year: int
    country: str
    subfield_id: str
    out_citations: int


def match_key(paper: PaperRecord, out_citations: int) -> MatchKey:
    return MatchKey(paper.year, paper.country or "", paper.subfield_id, out_citations)


# ---------------------------------------------------------------------------
# Paper characteristics
# ---------------------------------------------------------------------------


def male_fraction(authors: Iterable[AuthorRecord]) -> float:
    genders = [a.gender for a in authors if a.gender is not None]
    if not genders:
        raise ValueError("no gender-assigned authors")
    return sum(g == "male" for g in genders) / len(genders)


def ma_or(paper: PaperRecord, authors: Mapping[str, AuthorRecord], overall_male_fraction: float) -> float | None:
    """Male share among the gendered coauthors of the first and last author, minus the corpus share.

    The first and last authors themselves are left out of the pool. Returns
    None when the pool has no gender-assigned member.
    """
    ends = {paper.first_author, paper.last_author}
    pool: set[str] = set()
    for aid in ends:
        a = authors.get(aid)
        if a is not None:
            pool |= a.coauthors
    pool -= ends
    genders = [authors[a].gender for a in pool if a in authors and authors[a].gender is not None]
    if not genders:
        return None
    return sum(g == "male" for g in genders) / len(genders) - overall_male_fraction


def prominence_cutoffs(authors: Iterable[AuthorRecord], percentile: float = 0.01) -> dict[str, int]:
    """Per gender, the smallest prominence still inside the top ``percentile``."""
    by_gender: dict[str, list[int]] = defaultdict(list)
    for a in authors:
        if a.gender is not None:
            by_gender[a.gender].append(a.prominence)
    out = {}
    for g, values in by_gender.items():
        values.sort(reverse=True)
        k = max(1, math.ceil(percentile * len(values)))
        out[g] = values[k - 1]
    return out


def prominent_flag(
    paper: PaperRecord,
    authors: Mapping[str, AuthorRecord],
    percentile: float = 0.01,
    cutoffs: Mapping[str, int] | None = None,
) -> bool:
    if cutoffs is None:
        cutoffs = prominence_cutoffs(authors.values(), percentile)
    for aid in (paper.first_author, paper.last_author):
        a = authors.get(aid)
        if a is not None and a.gender in cutoffs and a.prominence >= cutoffs[a.gender]:
            return True
    return False


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------


@dataclass
class MatchedPairReplicates:
    m_set: list[str]
    replicate_pairs: list[list[tuple[str, str]]]
    skipped: list[int]
    unmatchable: list[str] = field(default_factory=list)
    deltas_m: dict[str, float | None] = field(default_factory=dict)
    deltas_prime: dict[str, list[float | None]] = field(default_factory=dict)

    @property
    def replicate_sets(self) -> list[list[str]]:
        return [[v for _, v in pairs] for pairs in self.replicate_pairs]

    @property
    def n_pairs(self) -> list[int]:
        return [len(p) for p in self.replicate_pairs]


def build_matched_pairs(
    M: Iterable[str],
    M_prime: Iterable[str],
    net: CitationNetwork,
    n_replicates: int = 100,
    seed: int = 0,
    *,
    key: Callable[[PaperRecord, int], object] = match_key,
) -> MatchedPairReplicates:
    """Pair each paper of ``M`` with a distinct key-identical paper of ``M_prime``, per replicate.

    Papers making no citations are excluded from both sides. Within a
    replicate the papers of ``M`` are visited in random order and each takes
    a uniformly random unused partner; a paper left without one is skipped
    for that replicate. Replicate ``r`` draws from Philox keyed
    ``(seed + r, 2)``, a stream disjoint from the randomization streams.
    """
    M = sorted(set(M))
    M_prime = sorted(set(M_prime))
    if set(M) & set(M_prime):
        raise ValueError("M and M_prime must be disjoint")

    def keyed(ids):
        groups: dict[object, list[str]] = defaultdict(list)
        for pid in ids:
            out = net.out_degree[pid]
            if out >= 1:
                groups[key(net.papers[pid], out)].append(pid)
        return groups

    g_m, g_p = keyed(M), keyed(M_prime)
    unmatchable = sorted(pid for k, ids in g_m.items() if k not in g_p for pid in ids)
    shared = sorted((k for k in g_m if k in g_p), key=repr)
    m_set = sorted(pid for k in shared for pid in g_m[k])

    pairs_per_rep: list[list[tuple[str, str]]] = []
    skipped: list[int] = []
    for r in range(n_replicates):
        rng = np.random.Generator(np.random.Philox(key=[seed + r, 2]))
        pairs: list[tuple[str, str]] = []
        skip = 0
        for k in shared:
            us, vs = g_m[k], g_p[k]
            take = min(len(us), len(vs))
            order = rng.permutation(len(us))
            partners = rng.choice(len(vs), size=take, replace=False)
            pairs.extend((us[order[t]], vs[partners[t]]) for t in range(take))
            skip += len(us) - take
        pairs.sort()
        pairs_per_rep.append(pairs)
        skipped.append(skip + len(unmatchable))
    return MatchedPairReplicates(m_set, pairs_per_rep, skipped, unmatchable)


def t_statistic(delta_m: float, deltas_prime: Sequence[float]) -> tuple[float, float]:
    """Two-sided t test of the matched reference mean against ``delta_m`` (sample std, n-1 dof)."""
    d = np.asarray(deltas_prime, dtype=float)
    n = d.size
    if n < 2:
        raise ValueError("need at least two replicate values")
    mean = float(d.mean())
    s = float(d.std(ddof=1))
    diff = mean - delta_m
    scale = max(1.0, abs(mean), abs(delta_m))
    if s <= 1e-15 * scale:
        if abs(diff) <= 1e-12 * scale:
            return 0.0, 1.0
        return math.copysign(math.inf, diff), 0.0
    t = diff / (s / math.sqrt(n))
    return t, t_sf_two_sided(t, n - 1)


# ---------------------------------------------------------------------------
# Population comparisons
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    split: str
    population: str
    category: str
    delta: float | None
    delta_ref: float | None
    delta_ref_std: float | None
    t: float | None
    p: float | None
    reject: bool
    n_pairs: float
    status: str = "ok"


@dataclass
class CitationProfile:
    """Observed and expected (model mean) citations made per paper to each category."""

    paper_ids: tuple[str, ...]
    observed: np.ndarray
    expected: np.ndarray

    def __post_init__(self) -> None:
        self._pos = {pid: k for k, pid in enumerate(self.paper_ids)}

    def delta(self, ids: Sequence[str]) -> list[float | None]:
        rows = [self._pos[pid] for pid in ids]
        obs = self.observed[rows].sum(axis=0)
        exp = self.expected[rows].sum(axis=0)
        return [None if e == 0 else float((o - e) / e) for o, e in zip(obs, exp)]

    @classmethod
    def from_summaries(cls, net: CitationNetwork, summaries: Sequence[ReplicateSummary]) -> "CitationProfile":
        idx = CandidateIndex.for_network(net)
        tab = Tabulator(net, idx.paper_ids, [])
        observed = tab.per_source(idx.src, idx.dst, idx.n_papers).astype(float)
        mats = [s.per_source for s in summaries]
        if any(m is None for m in mats):
            raise ValueError("summaries were produced without per_source tabulation")
        expected = np.mean(np.stack(mats), axis=0)
        return cls(idx.paper_ids, observed, expected)


def split_populations(
    net: CitationNetwork, split: str, percentile: float = 0.01, seed: int = 0
) -> list[tuple[str, list[str], list[str]]]:
    """(population label, M, M') triples for a split.

    ``random_halves`` is an A/A control: all papers are shuffled with
    ``seed`` and cut in two.
    """
    papers = net.papers
    if split == "random_halves":
        ids = sorted(papers)
        perm = np.random.Generator(np.random.Philox(key=[int(seed), 1])).permutation(len(ids))
        half = len(ids) // 2
        return [("A_vs_B", [ids[k] for k in perm[:half]], [ids[k] for k in perm[half:]])]
    by_cat: dict[str, list[str]] = defaultdict(list)
    for pid, p in papers.items():
        by_cat[p.gender_category].append(pid)
    if split == "gender_MM_vs_WW":
        return [("WW_vs_MM", by_cat["WW"], by_cat["MM"])]
    out = []
    if split == "venue_type":
        for g in ("MM", "WW"):
            ids = by_cat[g]
            out.append(
                (
                    g,
                    [pid for pid in ids if papers[pid].venue_type == "conference"],
                    [pid for pid in ids if papers[pid].venue_type == "journal"],
                )
            )
        return out
    paper_authors = {aid for p in papers.values() for aid in p.author_ids}
    population = [net.authors[a] for a in paper_authors if a in net.authors]
    if split == "prominence":
        cutoffs = prominence_cutoffs(population, percentile)
        for g in ("MM", "WW"):
            ids = by_cat[g]
            flags = {pid: prominent_flag(papers[pid], net.authors, cutoffs=cutoffs) for pid in ids}
            out.append((g, [p for p in ids if flags[p]], [p for p in ids if not flags[p]]))
        return out
    if split == "ma_or_halves":
        overall = male_fraction(population)
        for g in ("MM", "WW"):
            values = {pid: ma_or(papers[pid], net.authors, overall) for pid in by_cat[g]}
            defined = {pid: v for pid, v in values.items() if v is not None}
            if not defined:
                out.append((g, [], []))
                continue
            median = float(np.median(list(defined.values())))
            out.append(
                (
                    g,
                    [pid for pid, v in defined.items() if v > median],
                    [pid for pid, v in defined.items() if v <= median],
                )
            )
        return out
    raise ValueError(f"unknown split {split!r}; expected one of {SPLITS}")


def compare_pair(
    split: str,
    population: str,
    M: Sequence[str],
    M_prime: Sequence[str],
    net: CitationNetwork,
    profile: CitationProfile,
    n_replicates: int = 100,
    seed: int = 0,
) -> tuple[list[ComparisonRow], MatchedPairReplicates]:
    mp = build_matched_pairs(M, M_prime, net, n_replicates, seed)
    n_pairs = float(np.mean(mp.n_pairs)) if mp.n_pairs else 0.0
    rows = []
    if len(mp.m_set) < 2 or min(mp.n_pairs, default=0) < 2:
        for cat in GENDER_CATEGORIES:
            rows.append(ComparisonRow(split, population, cat, None, None, None, None, None, False, n_pairs, INSUFFICIENT))
        return rows, mp
    dm = profile.delta(mp.m_set)
    dprime = [profile.delta(s) for s in mp.replicate_sets]
    for k, cat in enumerate(GENDER_CATEGORIES):
        mp.deltas_m[cat] = dm[k]
        mp.deltas_prime[cat] = [d[k] for d in dprime]
        ref = mp.deltas_prime[cat]
        if dm[k] is None or any(v is None for v in ref):
            rows.append(ComparisonRow(split, population, cat, dm[k], None, None, None, None, False, n_pairs, "undefined"))
            continue
        t, p = t_statistic(dm[k], ref)
        arr = np.asarray(ref, dtype=float)
        rows.append(
            ComparisonRow(
                split,
                population,
                cat,
                dm[k],
                float(arr.mean()),
                float(arr.std(ddof=1)),
                t,
                p,
                p < ALPHA,
                n_pairs,
            )
        )
    return rows, mp


def compare_populations(
    net: CitationNetwork,
    model: str = "PD",
    split: str = "gender_MM_vs_WW",
    base_seed: int = 0,
    *,
    n_replicates: int = 100,
    n_match_replicates: int = 100,
    summaries: Sequence[ReplicateSummary] | None = None,
    workers: int = 1,
    percentile: float = 0.01,
) -> list[ComparisonRow]:
    """Over/under-citation of each population against its matched counterparts.

    The expectation comes from ``n_replicates`` randomized networks under
    ``model``; matching uses ``n_match_replicates`` independent pairings.
    """
    if summaries is None:
        summaries = run_replicates(net, model, n_replicates, base_seed, specs=[], workers=workers, per_source=True)
    profile = CitationProfile.from_summaries(net, summaries)
    rows = []
    for label, M, M_prime in split_populations(net, split, percentile, base_seed):
        r, _ = compare_pair(split, label, M, M_prime, net, profile, n_match_replicates, base_seed)
        rows.extend(r)
    return rows


COMPARISON_COLUMNS = ("split", "population", "category", "delta_pct", "delta_ref_pct", "delta_ref_std", "t", "p", "reject")


def _pct(x: float | None, status: str) -> str:
    if x is None:
        return status if status != "ok" else "undefined"
    return format(100 * x, ".4f")


def format_comparison(rows: Iterable[ComparisonRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARISON_COLUMNS)
    for r in rows:
        marker = r.status if r.status != "ok" else "undefined"
        w.writerow(
            (
                r.split,
                r.population,
                r.category,
                _pct(r.delta, r.status),
                _pct(r.delta_ref, r.status),
                _pct(r.delta_ref_std, r.status),
                marker if r.t is None else format(r.t, ".4f"),
                marker if r.p is None else format(r.p, ".6g"),
                "true" if r.reject else "false",
            )
        )
    return buf.getvalue()
