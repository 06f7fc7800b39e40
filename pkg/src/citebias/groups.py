"""Paper subsets (citing and cited sides) and fast per-group citation tabulation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import GENDER_CATEGORIES, CitationNetwork, PaperRecord

FILTER_FIELDS = (
    "paper_id",
    "venue_id",
    "venue_type",
    "venue_rank",
    "country",
    "topic_id",
    "subfield_id",
    "year",
    "gender_category",
)

# partition name -> (paper field, side whose value defines the cell)
PARTITIONS = {
    "none": (None, None),
    "by_subfield": ("subfield_id", "dst"),
    "by_topic": ("topic_id", "dst"),
    "by_venue_rank": ("venue_rank", "dst"),
    "by_venue_type": ("venue_type", "dst"),
    "by_venue": ("venue_id", "dst"),
    "by_year": ("year", "src"),
}


@dataclass(frozen=True)
class Predicate:
    """Conjunction of ``field=value1|value2`` clauses; ``all`` matches everything."""

    clauses: tuple[tuple[str, frozenset[str]], ...] = ()

    @classmethod
    def parse(cls, text: str) -> "Predicate":
        text = text.strip()
        if text in ("", "all", "*"):
            return cls()
        clauses = []
        for part in text.split(","):
            name, sep, values = part.partition("=")
            name = name.strip()
            if not sep or name not in FILTER_FIELDS:
                raise ValueError(f"bad filter clause {part!r}")
            clauses.append((name, frozenset(v.strip() for v in values.split("|"))))
        return cls(tuple(clauses))

    def __call__(self, paper: PaperRecord) -> bool:
        for name, values in self.clauses:
            v = getattr(paper, name)
            if v is None or str(v) not in values:
                return False
        return True

    def __str__(self) -> str:
        if not self.clauses:
            return "all"
        return ",".join(f"{n}={'|'.join(sorted(vs))}" for n, vs in self.clauses)


@dataclass(frozen=True)
class GroupSpec:
    label: str
    from_filter: str = "all"
    to_filter: str = "all"
    partition: str = "none"

    def __post_init__(self) -> None:
        Predicate.parse(self.from_filter)
        Predicate.parse(self.to_filter)
        if self.partition not in PARTITIONS:
            raise ValueError(f"unknown partition {self.partition!r}")


def table_specs(partition: str = "none", to_filter: str = "all") -> list[GroupSpec]:
    """The four gender categories plus everything, as citing groups."""
    specs = [GroupSpec(g, f"gender_category={g}", to_filter, partition) for g in GENDER_CATEGORIES]
    specs.append(GroupSpec("All", "all", to_filter, partition))
    return specs


DEFAULT_SPECS = tuple(table_specs())


class Tabulator:
    """Counts citations per (group, target gender category) for edge arrays in index space."""

    def __init__(self, net: CitationNetwork, paper_ids: Sequence[str], specs: Sequence[GroupSpec]):
        self.specs = list(specs)
        papers = [net.papers[pid] for pid in paper_ids]
        cat_index = {g: k for k, g in enumerate(GENDER_CATEGORIES)}
        self.category = np.array([cat_index.get(p.gender_category, -1) for p in papers], dtype=np.int64)
        self._plans = []
        for spec in self.specs:
            from_ok = np.array([Predicate.parse(spec.from_filter)(p) for p in papers], dtype=bool)
            to_pred = Predicate.parse(spec.to_filter)
            to_ok = np.array([to_pred(p) for p in papers], dtype=bool) & (self.category >= 0)
            field, side = PARTITIONS[spec.partition]
            if field is None:
                cells = [spec.label]
                cell_of = np.zeros(len(papers), dtype=np.int64)
            else:
                values = [getattr(p, field) for p in papers]
                uniq = sorted({v for v in values if v is not None}, key=lambda v: (str(type(v)), v))
                pos = {v: k for k, v in enumerate(uniq)}
                cells = [f"{spec.label}|{v}" for v in uniq]
                cell_of = np.array([pos.get(v, -1) for v in values], dtype=np.int64)
            self._plans.append((from_ok, to_ok, cells, cell_of, side))

    @property
    def groups(self) -> list[str]:
        return [c for plan in self._plans for c in plan[2]]

    def tabulate(self, src: np.ndarray, dst: np.ndarray) -> dict[tuple[str, str], int]:
        out: dict[tuple[str, str], int] = {}
        n_cat = len(GENDER_CATEGORIES)
        for from_ok, to_ok, cells, cell_of, side in self._plans:
            cell = cell_of[dst] if side in (None, "dst") else cell_of[src]
            keep = from_ok[src] & to_ok[dst] & (cell >= 0)
            key = cell[keep] * n_cat + self.category[dst[keep]]
            counts = np.bincount(key, minlength=len(cells) * n_cat)
            for c, name in enumerate(cells):
                for g, cat in enumerate(GENDER_CATEGORIES):
                    n = int(counts[c * n_cat + g])
                    if n:
                        out[(name, cat)] = out.get((name, cat), 0) + n
        return out

    def per_source(self, src: np.ndarray, dst: np.ndarray, n_papers: int) -> np.ndarray:
        """Matrix of citations made by each paper to each gender category."""
        n_cat = len(GENDER_CATEGORIES)
        keep = self.category[dst] >= 0
        key = src[keep] * n_cat + self.category[dst[keep]]
        return np.bincount(key, minlength=n_papers * n_cat).reshape(n_papers, n_cat)
