"""Array-backed candidate index and the set-valued eligibility views."""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..corpus import CITATION_WINDOW_YEARS, CitationNetwork, LookupFailure, shift_years


@dataclass(frozen=True, order=True)
class AttributeKey:
    country: str
    topic_id: str
    venue_rank: str

    @classmethod
    def of(cls, paper) -> "AttributeKey":
        if paper.country is None or paper.venue_rank is None:
            raise ValueError(f"paper {paper.paper_id!r} lacks homophily attributes")
        return cls(paper.country, paper.topic_id, paper.venue_rank)


def log_bin(c: int) -> int:
    """floor(ln(c + 1))."""
    if c < 0:
        raise ValueError("count must be nonnegative")
    b = int(math.floor(math.log(c + 1)))
    # guard the float log against landing a hair below an integer boundary
    while math.exp(b + 1) <= c + 1:
        b += 1
    return b


def log_bin_table(max_count: int) -> np.ndarray:
    return np.array([log_bin(c) for c in range(max_count + 1)], dtype=np.int64)


_INDEX_CACHE: "weakref.WeakKeyDictionary[CitationNetwork, CandidateIndex]" = weakref.WeakKeyDictionary()


@dataclass(frozen=True, eq=False)
class CandidateIndex:
    """Integer views of a network for fast candidate lookup.

    Papers are numbered by ascending (pub_date, paper_id); that order is the
    processing order of the preferential model and makes every date window a
    contiguous index range. Attribute buckets list member indices in the same
    order, so a window inside a bucket is also contiguous.
    """

    paper_ids: tuple[str, ...]
    idx_of: Mapping[str, int]
    date_ord: np.ndarray
    window_lo: np.ndarray
    window_hi: np.ndarray
    bucket: np.ndarray
    bucket_keys: tuple[AttributeKey, ...]
    bucket_members: np.ndarray
    bucket_ptr: np.ndarray
    pos_in_bucket: np.ndarray
    conf_ptr: np.ndarray
    conf_idx: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    _by_attribute: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, net: CitationNetwork) -> "CandidateIndex":
        papers = net.papers
        order = sorted(papers, key=lambda pid: (papers[pid].pub_date, pid))
        idx_of = {pid: i for i, pid in enumerate(order)}
        n = len(order)
        date_ord = np.array([papers[pid].pub_date.toordinal() for pid in order], dtype=np.int64)
        oldest = np.array(
            [shift_years(papers[pid].pub_date, -CITATION_WINDOW_YEARS).toordinal() for pid in order],
            dtype=np.int64,
        )
        window_lo = np.searchsorted(date_ord, oldest, side="left").astype(np.int64)
        window_hi = np.searchsorted(date_ord, date_ord, side="right").astype(np.int64)

        keys = [AttributeKey.of(papers[pid]) for pid in order]
        bucket_keys = tuple(sorted(set(keys)))
        key_id = {k: b for b, k in enumerate(bucket_keys)}
        bucket = np.array([key_id[k] for k in keys], dtype=np.int64)
        bucket_members = np.lexsort((np.arange(n), bucket)).astype(np.int64)
        bucket_ptr = np.zeros(len(bucket_keys) + 1, dtype=np.int64)
        np.cumsum(np.bincount(bucket, minlength=len(bucket_keys)), out=bucket_ptr[1:])
        pos_in_bucket = np.empty(n, dtype=np.int64)
        pos_in_bucket[bucket_members] = np.arange(n, dtype=np.int64)

        conf_ptr, conf_idx = _conflicts(net, order, idx_of)
        src = np.array([idx_of[e.src] for e in net.edges], dtype=np.int64)
        dst = np.array([idx_of[e.dst] for e in net.edges], dtype=np.int64)
        return cls(
            paper_ids=tuple(order),
            idx_of=idx_of,
            date_ord=date_ord,
            window_lo=window_lo,
            window_hi=window_hi,
            bucket=bucket,
            bucket_keys=bucket_keys,
            bucket_members=bucket_members,
            bucket_ptr=bucket_ptr,
            pos_in_bucket=pos_in_bucket,
            conf_ptr=conf_ptr,
            conf_idx=conf_idx,
            src=src,
            dst=dst,
        )

    @classmethod
    def for_network(cls, net: CitationNetwork) -> "CandidateIndex":
        idx = _INDEX_CACHE.get(net)
        if idx is None:
            idx = cls.build(net)
            _INDEX_CACHE[net] = idx
        return idx

    @property
    def n_papers(self) -> int:
        return len(self.paper_ids)

    def index(self, paper_id: str) -> int:
        try:
            return self.idx_of[paper_id]
        except KeyError:
            raise LookupFailure(f"unknown paper id {paper_id!r}") from None

    @property
    def by_attribute(self) -> dict[AttributeKey, list[str]]:
        if not self._by_attribute:
            for b, key in enumerate(self.bucket_keys):
                lo, hi = self.bucket_ptr[b], self.bucket_ptr[b + 1]
                self._by_attribute[key] = [self.paper_ids[i] for i in self.bucket_members[lo:hi]]
        return self._by_attribute

    def conflicts(self, i: int) -> np.ndarray:
        return self.conf_idx[self.conf_ptr[i] : self.conf_ptr[i + 1]]

    def by_author_conflict(self, paper_id: str) -> frozenset[str]:
        return frozenset(self.paper_ids[c] for c in self.conflicts(self.index(paper_id)))

    def bucket_segments(self) -> tuple[np.ndarray, np.ndarray]:
        """Per edge, the slice of ``bucket_members`` inside the target's bucket and the source's window."""
        n = self.n_papers
        member_key = self.bucket[self.bucket_members] * n + self.bucket_members
        b = self.bucket[self.dst]
        lo = np.searchsorted(member_key, b * n + self.window_lo[self.src], side="left")
        hi = np.searchsorted(member_key, b * n + self.window_hi[self.src], side="left")
        return lo.astype(np.int64), hi.astype(np.int64)


def _conflicts(net: CitationNetwork, order, idx_of) -> tuple[np.ndarray, np.ndarray]:
    """Per paper, sorted indices of papers it may not cite (always including itself)."""
    papers_of: dict[str, list[int]] = {}
    for pid in order:
        for aid in set(net.papers[pid].author_ids):
            papers_of.setdefault(aid, []).append(idx_of[pid])
    ptr = [0]
    flat: list[np.ndarray] = []
    for i, pid in enumerate(order):
        if net.include_self_citations:
            block = np.array([i], dtype=np.int64)
        else:
            p = net.papers[pid]
            blocked = set(p.author_ids)
            for aid in (p.first_author, p.last_author):
                a = net.authors.get(aid)
                if a is not None:
                    blocked |= a.coauthors
            hits = {i}
            for aid in blocked:
                hits.update(papers_of.get(aid, ()))
            block = np.fromiter(sorted(hits), dtype=np.int64, count=len(hits))
        flat.append(block)
        ptr.append(ptr[-1] + block.size)
    conf_idx = np.concatenate(flat) if flat else np.zeros(0, dtype=np.int64)
    return np.array(ptr, dtype=np.int64), conf_idx


# ---------------------------------------------------------------------------
# Set-valued views, used for inspection and as test oracles for the kernels
# ---------------------------------------------------------------------------


@dataclass
class PdState:
    """Citation counts accrued by the preferential process before step ``step``.

    ``step`` is 1-based over papers in processing order.
    """

    pd_counts: dict[str, int] = field(default_factory=dict)
    step: int = 1

    def count(self, paper_id: str) -> int:
        return self.pd_counts.get(paper_id, 0)

    def advance(self, placed_targets) -> None:
        for t in placed_targets:
            self.pd_counts[t] = self.pd_counts.get(t, 0) + 1
        self.step += 1


def _rd_indices(idx: CandidateIndex, i: int) -> list[int]:
    blocked = set(idx.conflicts(i).tolist())
    return [c for c in range(idx.window_lo[i], idx.window_hi[i]) if c not in blocked]


def eligible_targets_rd(net: CitationNetwork, i: str) -> set[str]:
    """Papers that ``i`` could cite: at most ten years older, not newer, no author conflict."""
    idx = CandidateIndex.for_network(net)
    ii = idx.index(i)
    return {idx.paper_ids[c] for c in _rd_indices(idx, ii)}


def eligible_targets_hd(net: CitationNetwork, i: str, j: str) -> set[str]:
    idx = CandidateIndex.for_network(net)
    ii, jj = idx.index(i), idx.index(j)
    bj = idx.bucket[jj]
    out = {idx.paper_ids[c] for c in _rd_indices(idx, ii) if idx.bucket[c] == bj}
    out.add(j)
    return out


def eligible_targets_pd(net: CitationNetwork, state: PdState, l: int, j: str) -> set[str]:
    idx = CandidateIndex.for_network(net)
    if state.step != l:
        raise ValueError(f"state is at step {state.step}, asked for step {l}")
    if not 1 <= l <= idx.n_papers:
        raise LookupFailure(f"step {l} out of range")
    source = idx.paper_ids[l - 1]
    target_bin = log_bin(state.count(j))
    return {c for c in eligible_targets_hd(net, source, j) if log_bin(state.count(c)) == target_bin}
