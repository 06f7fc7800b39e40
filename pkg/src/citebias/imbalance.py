"""Observed versus expected citation counts per gender category."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import GENDER_CATEGORIES, CitationNetwork
from .groups import DEFAULT_SPECS, GroupSpec, Tabulator
from .nullmodels import CandidateIndex, ReplicateSummary, run_replicates
from .stats import SIGNIFICANCE_Z, normal_sf, spearman  # noqa: F401  (re-exported)

UNDEFINED = "undefined"


@dataclass(frozen=True)
class ImbalanceStat:
    group: str
    category: str
    n_obs: int
    mu: float
    sigma: float
    over_under: float | None
    z: float | None
    p: float | None
    significant: bool

    @property
    def direction(self) -> str:
        if not self.significant or self.z is None:
            return ""
        return "over" if self.z > 0 else "under"


def over_under(n_obs: float, mu: float) -> float | None:
    """(observed - expected) / expected; None when the expectation is zero."""
    if mu < 0:
        raise ValueError("expected count cannot be negative")
    if mu == 0:
        return None
    return (n_obs - mu) / mu


def z_and_p(
    n_obs: float, mu: float, sigma: float, *, two_sided: bool = False
) -> tuple[float | None, float | None, bool]:
    """Z score, its normal tail probability and whether ``|z| > 3.09``.

    With ``sigma == 0`` the score is 0 if observed equals expected and
    undefined (None) otherwise.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        if n_obs == mu:
            z = 0.0
        else:
            return None, None, False
    else:
        z = (n_obs - mu) / sigma
    tail = normal_sf(abs(z))
    p = min(1.0, 2 * tail) if two_sided else tail
    return z, p, abs(z) > SIGNIFICANCE_Z


def observed_counts(
    net: CitationNetwork, spec: GroupSpec | Sequence[GroupSpec] = DEFAULT_SPECS
) -> dict[tuple[str, str], int]:
    specs = [spec] if isinstance(spec, GroupSpec) else list(spec)
    idx = CandidateIndex.for_network(net)
    return Tabulator(net, idx.paper_ids, specs).tabulate(idx.src, idx.dst)


def imbalance_table(
    net: CitationNetwork,
    specs: Sequence[GroupSpec],
    summaries: Sequence[ReplicateSummary],
    *,
    two_sided: bool = False,
) -> list[ImbalanceStat]:
    """Join observed counts with replicate tabulations (population std over replicates)."""
    if not summaries:
        raise ValueError("no replicate summaries")
    idx = CandidateIndex.for_network(net)
    tab = Tabulator(net, idx.paper_ids, specs)
    observed = tab.tabulate(idx.src, idx.dst)
    summaries = sorted(summaries, key=lambda s: s.replicate)
    seen_groups = {g for g, _ in observed}
    for s in summaries:
        seen_groups.update(g for g, _ in s.counts)
    rows = []
    for group in tab.groups:
        if group not in seen_groups:
            continue
        for cat in GENDER_CATEGORIES:
            draws = np.array([s.counts.get((group, cat), 0) for s in summaries], dtype=float)
            mu = float(draws.mean())
            sigma = float(draws.std(ddof=0))
            n_obs = observed.get((group, cat), 0)
            z, p, sig = z_and_p(n_obs, mu, sigma, two_sided=two_sided)
            rows.append(ImbalanceStat(group, cat, n_obs, mu, sigma, over_under(n_obs, mu), z, p, sig))
    return rows


def analyze(
    net: CitationNetwork,
    model: str,
    specs: Sequence[GroupSpec] = DEFAULT_SPECS,
    n_replicates: int = 100,
    base_seed: int = 0,
    *,
    workers: int = 1,
    two_sided: bool = False,
) -> list[ImbalanceStat]:
    summaries = run_replicates(net, model, n_replicates, base_seed, specs=specs, workers=workers)
    return imbalance_table(net, specs, summaries, two_sided=two_sided)


def _fmt(x: float | None, spec: str) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return UNDEFINED
    return format(x, spec)


REPORT_COLUMNS = ("group", "category", "n_obs", "mu", "sigma", "over_under_pct", "z", "p", "significant")


def format_report(rows: Iterable[ImbalanceStat]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in rows:
        w.writerow(
            (
                r.group,
                r.category,
                r.n_obs,
                _fmt(r.mu, ".4f"),
                _fmt(r.sigma, ".4f"),
                _fmt(None if r.over_under is None else 100 * r.over_under, ".4f"),
                _fmt(r.z, ".4f"),
                _fmt(r.p, ".6g"),
                "true" if r.significant else "false",
            )
        )
    return buf.getvalue()
