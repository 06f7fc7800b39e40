"""Compiled inner loops for the three randomizers.

All kernels consume exactly one uniform variate per edge (``u[e]``) and
pick the ``floor(u * size)``-th element of the candidate set, where the set
is enumerated in member-array order with the original target appended last
when it is not already inside the segment.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def draw_static(members, pos_of, bucket, seg_lo, seg_hi, src, dst, conf_ptr, conf_idx, u, include_target):
    """Random-draws / homophilic-draws: every edge is independent."""
    m = src.shape[0]
    out = np.empty(m, dtype=np.int64)
    fallback = 0
    max_conf = 0
    for s in range(conf_ptr.shape[0] - 1):
        if conf_ptr[s + 1] - conf_ptr[s] > max_conf:
            max_conf = conf_ptr[s + 1] - conf_ptr[s]
    scratch = np.empty(max(max_conf, 1), dtype=np.int64)
    for e in range(m):
        s = src[e]
        j = dst[e]
        a = seg_lo[e]
        b = seg_hi[e]
        bj = bucket[j]
        nconf = 0
        j_conflicted = False
        for t in range(conf_ptr[s], conf_ptr[s + 1]):
            c = conf_idx[t]
            if c == j:
                j_conflicted = True
            if bucket[c] != bj:
                continue
            p = pos_of[c]
            if a <= p < b:
                scratch[nconf] = p
                nconf += 1
        n = (b - a) - nconf
        pj = pos_of[j]
        j_inside = a <= pj < b and not j_conflicted
        extra = 1 if (include_target and not j_inside) else 0
        total = n + extra
        if total == 0:
            out[e] = j
            fallback += 1
            continue
        k = int(u[e] * total)
        if k >= total:
            k = total - 1
        if k == n:
            out[e] = j
            continue
        pos = a + k
        for t in range(nconf):
            if scratch[t] <= pos:
                pos += 1
            else:
                break
        out[e] = members[pos]
    return out, fallback


@njit(cache=True, nogil=True)
def draw_preferential(
    members, pos_of, seg_lo, seg_hi, src, dst, edge_order, src_ptr, conf_ptr, conf_idx, u, bin_table, n_papers
):
    """Preferential-draws: sources in date order, bins from counts accrued so far.

    ``edge_order`` lists edge indices grouped by source (``src_ptr`` delimits
    the groups in processing order). Counts are updated only after all the
    citations of a source are placed, so every draw of one source sees the
    counts produced by strictly older sources.
    """
    m = src.shape[0]
    out = np.empty(m, dtype=np.int64)
    bin_orig = np.empty(m, dtype=np.int64)
    bin_new = np.empty(m, dtype=np.int64)
    counts = np.zeros(n_papers, dtype=np.int64)
    pbin = np.zeros(n_papers, dtype=np.int64)
    mark = np.zeros(n_papers, dtype=np.bool_)
    for g in range(src_ptr.shape[0] - 1):
        lo_e = src_ptr[g]
        hi_e = src_ptr[g + 1]
        if lo_e == hi_e:
            continue
        s = src[edge_order[lo_e]]
        for t in range(conf_ptr[s], conf_ptr[s + 1]):
            mark[conf_idx[t]] = True
        for q in range(lo_e, hi_e):
            e = edge_order[q]
            j = dst[e]
            a = seg_lo[e]
            b = seg_hi[e]
            bj = pbin[j]
            n = 0
            for p in range(a, b):
                c = members[p]
                if not mark[c] and pbin[c] == bj:
                    n += 1
            pj = pos_of[j]
            j_inside = a <= pj < b and not mark[j]
            total = n + (0 if j_inside else 1)
            k = int(u[e] * total)
            if k >= total:
                k = total - 1
            chosen = j
            if k < n:
                seen = 0
                for p in range(a, b):
                    c = members[p]
                    if not mark[c] and pbin[c] == bj:
                        if seen == k:
                            chosen = c
                            break
                        seen += 1
            out[e] = chosen
            bin_orig[e] = bj
            bin_new[e] = pbin[chosen]
        for t in range(conf_ptr[s], conf_ptr[s + 1]):
            mark[conf_idx[t]] = False
        for q in range(lo_e, hi_e):
            c = out[edge_order[q]]
            counts[c] += 1
            pbin[c] = bin_table[counts[c]]
    return out, bin_orig, bin_new
