"""Statistical kernels shared by the imbalance and matching analyses."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special
from scipy import stats as _sps

SIGNIFICANCE_Z = 3.09
ALPHA = 0.001


@dataclass(frozen=True)
class ContingencyTable2x2:
    o: tuple[tuple[int, int], tuple[int, int]]

    def __post_init__(self) -> None:
        flat = [x for row in self.o for x in row]
        if len(self.o) != 2 or any(len(r) != 2 for r in self.o):
            raise ValueError("table must be 2x2")
        if any(x < 0 for x in flat):
            raise ValueError("counts must be nonnegative")

    @property
    def n(self) -> int:
        return sum(x for row in self.o for x in row)

    @classmethod
    def of(cls, rows) -> "ContingencyTable2x2":
        return cls(tuple(tuple(int(x) for x in r) for r in rows))


def chi2_sf(x: float, dof: int = 1) -> float:
    """Upper tail of the chi-squared distribution via the regularized incomplete gamma."""
    if x <= 0:
        return 1.0
    return float(special.gammaincc(dof / 2.0, x / 2.0))


def yates_chi2(table: ContingencyTable2x2 | Sequence[Sequence[int]]) -> tuple[float, float]:
    """Continuity-corrected chi-squared statistic and its 1-dof p-value."""
    if not isinstance(table, ContingencyTable2x2):
        table = ContingencyTable2x2.of(table)
    o = np.asarray(table.o, dtype=float)
    n = o.sum()
    rows, cols = o.sum(axis=1), o.sum(axis=0)
    if (rows == 0).any() or (cols == 0).any():
        raise ValueError("all marginal sums must be positive")
    expected = np.outer(rows, cols) / n
    chi2 = float((((np.abs(o - expected) - 0.5) ** 2) / expected).sum())
    return chi2, chi2_sf(chi2, 1)


def normal_sf(z: float) -> float:
    """Standard normal upper tail."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def mean_std(xs: Sequence[float]) -> tuple[float, float, float]:
    """Return (mean, population std, sample std); sample std is nan for a single value."""
    a = np.asarray(xs, dtype=float)
    if a.size == 0:
        raise ValueError("mean_std of an empty sequence")
    mean = float(a.mean())
    pop = float(a.std(ddof=0))
    sample = float(a.std(ddof=1)) if a.size > 1 else float("nan")
    return mean, pop, sample


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Spearman's rho with average ranks for ties; None when either input is constant."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("spearman needs two 1-d sequences of equal length")
    if x.size < 2:
        raise ValueError("spearman needs at least two observations")
    rx = _sps.rankdata(x)
    ry = _sps.rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float((rx * rx).sum() * (ry * ry).sum()))
    if denom == 0:
        return None
    return float(np.clip((rx * ry).sum() / denom, -1.0, 1.0))


def t_sf_two_sided(t: float, dof: int) -> float:
    if math.isinf(t):
        return 0.0
    return float(2.0 * _sps.t.sf(abs(t), dof))
