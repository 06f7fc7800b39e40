"""Randomized networks and replicate summaries for the three reference models."""

from __future__ import annotations

import csv
import logging
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..corpus import CitationEdge, CitationNetwork
from ..groups import DEFAULT_SPECS, GroupSpec, Tabulator
from . import _kernels
from .index import CandidateIndex, log_bin_table

logger = logging.getLogger(__name__)

MODELS = ("RD", "HD", "PD")
RNG_DESCRIPTION = "numpy.random.Philox(key=seed); one float64 uniform per edge, in edge-index order"
PD_TIE_BREAK = "papers with equal pub_date are processed in lexicographic paper_id order"


def normalize_model(model: str) -> str:
    m = str(model).upper()
    if m not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    return m


def edge_uniforms(seed: int, n_edges: int) -> np.ndarray:
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1))).random(n_edges)


@dataclass
class DrawTrace:
    src: np.ndarray
    orig_dst: np.ndarray
    new_dst: np.ndarray
    bin_orig: np.ndarray | None = None
    bin_new: np.ndarray | None = None


@dataclass
class RandomizedNetwork:
    """Randomized citations in index space; ``paper_ids`` maps indices back to ids."""

    paper_ids: tuple[str, ...]
    src: np.ndarray
    dst: np.ndarray
    model: str
    seed: int
    fallback_count: int = 0
    trace: DrawTrace | None = None

    @property
    def edges(self) -> list[CitationEdge]:
        ids = self.paper_ids
        return [CitationEdge(ids[s], ids[d]) for s, d in zip(self.src.tolist(), self.dst.tolist())]

    def in_degrees(self) -> np.ndarray:
        return np.bincount(self.dst, minlength=len(self.paper_ids))

    def out_degrees(self) -> np.ndarray:
        return np.bincount(self.src, minlength=len(self.paper_ids))


@dataclass
class _Prepared:
    members: np.ndarray
    pos_of: np.ndarray
    bucket: np.ndarray
    seg_lo: np.ndarray
    seg_hi: np.ndarray
    edge_order: np.ndarray | None = None
    src_ptr: np.ndarray | None = None
    bin_table: np.ndarray | None = None


_PREP_CACHE: "weakref.WeakKeyDictionary[CandidateIndex, dict[str, _Prepared]]" = weakref.WeakKeyDictionary()


def _prepare(idx: CandidateIndex, model: str) -> _Prepared:
    per_model = _PREP_CACHE.setdefault(idx, {})
    if model in per_model:
        return per_model[model]
    n = idx.n_papers
    if model == "RD":
        prep = _Prepared(
            members=np.arange(n, dtype=np.int64),
            pos_of=np.arange(n, dtype=np.int64),
            bucket=np.zeros(n, dtype=np.int64),
            seg_lo=idx.window_lo[idx.src],
            seg_hi=idx.window_hi[idx.src],
        )
    else:
        lo, hi = idx.bucket_segments()
        prep = _Prepared(
            members=idx.bucket_members,
            pos_of=idx.pos_in_bucket,
            bucket=idx.bucket,
            seg_lo=lo,
            seg_hi=hi,
        )
        if model == "PD":
            order = np.lexsort((np.arange(idx.src.size), idx.src)).astype(np.int64)
            counts = np.bincount(idx.src, minlength=n)
            ptr = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(counts, out=ptr[1:])
            prep.edge_order = order
            prep.src_ptr = ptr
            prep.bin_table = log_bin_table(idx.src.size + 1)
    per_model[model] = prep
    return prep


def randomize(
    net: CitationNetwork,
    model: str,
    seed: int,
    *,
    index: CandidateIndex | None = None,
    trace: bool = False,
) -> RandomizedNetwork:
    """Rewire every citation of ``net`` once under ``model``.

    The result is a multigraph with the same source sequence as the
    original. An edge whose candidate set is empty keeps its original
    target and is counted in ``fallback_count``.
    """
    model = normalize_model(model)
    idx = index or CandidateIndex.for_network(net)
    u = edge_uniforms(seed, idx.src.size)
    prep = _prepare(idx, model)
    bin_orig = bin_new = None
    if idx.src.size == 0:
        new_dst, fallback = idx.dst.copy(), 0
    elif model == "PD":
        new_dst, bin_orig, bin_new = _kernels.draw_preferential(
            prep.members,
            prep.pos_of,
            prep.seg_lo,
            prep.seg_hi,
            idx.src,
            idx.dst,
            prep.edge_order,
            prep.src_ptr,
            idx.conf_ptr,
            idx.conf_idx,
            u,
            prep.bin_table,
            idx.n_papers,
        )
        fallback = 0
    else:
        new_dst, fallback = _kernels.draw_static(
            prep.members,
            prep.pos_of,
            prep.bucket,
            prep.seg_lo,
            prep.seg_hi,
            idx.src,
            idx.dst,
            idx.conf_ptr,
            idx.conf_idx,
            u,
            model == "HD",
        )
    if fallback:
        logger.debug("%s seed=%d: %d edges kept their original target", model, seed, fallback)
    return RandomizedNetwork(
        paper_ids=idx.paper_ids,
        src=idx.src,
        dst=new_dst,
        model=model,
        seed=int(seed),
        fallback_count=int(fallback),
        trace=DrawTrace(idx.src, idx.dst, new_dst, bin_orig, bin_new) if trace else None,
    )


@dataclass
class ReplicateSummary:
    replicate: int
    seed: int
    model: str
    n_edges: int
    fallback_count: int
    counts: dict[tuple[str, str], int]
    per_source: np.ndarray | None = field(default=None, repr=False)
    in_degrees: np.ndarray | None = field(default=None, repr=False)
    trace: DrawTrace | None = field(default=None, repr=False)


def run_replicates(
    net: CitationNetwork,
    model: str,
    n_replicates: int = 100,
    base_seed: int = 0,
    *,
    specs: Sequence[GroupSpec] = DEFAULT_SPECS,
    workers: int = 1,
    per_source: bool = False,
    keep_in_degrees: bool = False,
    keep_trace: bool = False,
) -> list[ReplicateSummary]:
    """Run ``n_replicates`` randomizations; replicate ``r`` uses seed ``base_seed + r``.

    Only tabulated counts are kept per replicate. Workers are threads (the
    kernels release the GIL); results never depend on the worker count.
    """
    if n_replicates < 1:
        raise ValueError("n_replicates must be at least 1")
    model = normalize_model(model)
    idx = CandidateIndex.for_network(net)
    tab = Tabulator(net, idx.paper_ids, specs)
    _prepare(idx, model)

    def one(r: int) -> ReplicateSummary:
        rn = randomize(net, model, base_seed + r, index=idx, trace=keep_trace)
        return ReplicateSummary(
            replicate=r,
            seed=base_seed + r,
            model=model,
            n_edges=int(rn.dst.size),
            fallback_count=rn.fallback_count,
            counts=tab.tabulate(rn.src, rn.dst),
            per_source=tab.per_source(rn.src, rn.dst, idx.n_papers) if per_source else None,
            in_degrees=rn.in_degrees() if keep_in_degrees else None,
            trace=rn.trace,
        )

    if workers <= 1 or n_replicates == 1:
        return [one(r) for r in range(n_replicates)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(n_replicates)))


def write_replicate_summaries(path: str | Path, summaries: Sequence[ReplicateSummary], header: str = "") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(header)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("replicate", "from_group", "to_category", "count"))
        for s in summaries:
            for (group, cat), n in sorted(s.counts.items()):
                w.writerow((s.replicate, group, cat, n))


def write_trace(path: str | Path, summaries: Sequence[ReplicateSummary], paper_ids: Sequence[str], header: str = "") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(header)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("replicate", "src", "orig_dst", "new_dst", "bin_orig", "bin_new"))
        for s in summaries:
            t = s.trace
            if t is None:
                continue
            for e in range(t.src.size):
                w.writerow(
                    (
                        s.replicate,
                        paper_ids[t.src[e]],
                        paper_ids[t.orig_dst[e]],
                        paper_ids[t.new_dst[e]],
                        "" if t.bin_orig is None else int(t.bin_orig[e]),
                        "" if t.bin_new is None else int(t.bin_new[e]),
                    )
                )
