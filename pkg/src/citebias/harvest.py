"""Record linkage between two bibliographic sources and name-based gender assignment."""

from __future__ import annotations

import csv
import json
import unicodedata
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from .corpus import SchemaError

TITLE_THRESHOLD = 0.25
CJK_COUNTRIES = frozenset({"CN", "JP", "KR"})
LABELS = ("female", "male", "unknown")


@dataclass(frozen=True)
class RawRecord:
    source: str
    record_id: str
    title: str
    year: int
    author_full_names: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.author_full_names:
            raise ValueError(f"record {self.record_id!r} has no authors")

    @classmethod
    def from_dict(cls, d: Mapping, source: str | None = None) -> "RawRecord":
        return cls(
            source=str(d.get("source", source or "")),
            record_id=str(d["record_id"]),
            title=str(d["title"]),
            year=int(d["year"]),
            author_full_names=tuple(str(n) for n in d["author_full_names"]),
        )


@dataclass(frozen=True)
class GenderLookupResult:
    label: str
    accuracy: float
    samples: int

    def __post_init__(self) -> None:
        if self.label not in LABELS:
            raise ValueError(f"bad label {self.label!r}")
        if not 0 <= self.accuracy <= 100:
            raise ValueError(f"accuracy {self.accuracy} out of range")
        if self.samples < 0:
            raise ValueError("samples must be nonnegative")


UNKNOWN = GenderLookupResult("unknown", 0.0, 0)


class GenderLookupError(RuntimeError):
    def __init__(self, candidate: str, cause: BaseException | None = None):
        self.candidate = candidate
        super().__init__(f"gender lookup failed for {candidate!r}" + (f": {cause}" if cause else ""))


# ---------------------------------------------------------------------------
# Strings
# ---------------------------------------------------------------------------


def normalize_text(s: str) -> str:
    return unicodedata.normalize("NFC", s).casefold()


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def normalized_levenshtein(a: str, b: str) -> float:
    """Edit distance divided by the longer length (0 for two empty strings).

    Callers that want case/encoding-insensitive comparison should pass the
    strings through :func:`normalize_text` first; :func:`records_match` does.
    """
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return levenshtein(a, b) / longest


def last_name(full_name: str) -> str:
    tokens = full_name.split()
    if not tokens:
        raise ValueError("empty author name")
    return tokens[-1]


def _last_names(rec: RawRecord) -> tuple[str, ...]:
    return tuple(normalize_text(last_name(n)) for n in rec.author_full_names)


def records_match(a: RawRecord, b: RawRecord) -> bool:
    if a.year != b.year:
        return False
    if _last_names(a) != _last_names(b):
        return False
    return (
        normalized_levenshtein(normalize_text(a.title), normalize_text(b.title)) <= TITLE_THRESHOLD
    )


@dataclass
class LinkReport:
    matched: dict[str, str] = field(default_factory=dict)
    ambiguous: dict[str, list[str]] = field(default_factory=dict)
    unmatched: list[str] = field(default_factory=list)

    @property
    def n_ambiguous(self) -> int:
        return len(self.ambiguous)

    def rows(self) -> list[tuple[str, str, str]]:
        out = [(a, b, "matched") for a, b in self.matched.items()]
        for a, bs in self.ambiguous.items():
            out.extend((a, b, "ambiguous") for b in bs)
        out.extend((a, "", "unmatched") for a in self.unmatched)
        return out


def link_corpora(list_a: Sequence[RawRecord], list_b: Sequence[RawRecord]) -> LinkReport:
    """Pair every A-record with its unique matching B-record.

    Candidates are blocked on (year, last-name sequence), which are exact
    match criteria, so the title comparison only runs inside a block. A
    records with zero or several matches are reported, not linked. When two
    or more A records each match only the same B record, all of them are
    reported as ambiguous so the resulting map stays injective.
    """
    blocks: dict[tuple, list[RawRecord]] = defaultdict(list)
    for b in list_b:
        blocks[(b.year, _last_names(b))].append(b)
    norm_b = {id(b): normalize_text(b.title) for b in list_b}

    report = LinkReport()
    claims: dict[str, list[str]] = defaultdict(list)
    for a in list_a:
        title_a = normalize_text(a.title)
        hits = [
            b.record_id
            for b in blocks.get((a.year, _last_names(a)), ())
            if normalized_levenshtein(title_a, norm_b[id(b)]) <= TITLE_THRESHOLD
        ]
        if len(hits) == 1:
            claims[hits[0]].append(a.record_id)
        elif hits:
            report.ambiguous[a.record_id] = hits
        else:
            report.unmatched.append(a.record_id)
    for b_id, a_ids in claims.items():
        if len(a_ids) == 1:
            report.matched[a_ids[0]] = b_id
        else:
            for a_id in a_ids:
                report.ambiguous[a_id] = [b_id]
    report.matched = dict(sorted(report.matched.items()))
    report.ambiguous = dict(sorted(report.ambiguous.items()))
    report.unmatched.sort()
    return report


def load_raw_records(path: str | Path, source: str | None = None) -> list[RawRecord]:
    path = Path(path)
    out = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(RawRecord.from_dict(json.loads(line), source))
            except (ValueError, KeyError, TypeError) as exc:
                raise SchemaError(f"{type(exc).__name__}: {exc}", path, lineno) from exc
    return out


def write_link_report(path: str | Path, report: LinkReport) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("a_id", "b_id", "status"))
        w.writerows(report.rows())


# ---------------------------------------------------------------------------
# Gender
# ---------------------------------------------------------------------------


def first_name_candidates(full_name: str, country: str | None) -> list[str]:
    tokens = full_name.split()
    if country in CJK_COUNTRIES:
        return [" ".join(tokens[:k]) for k in range(1, len(tokens))]
    return tokens[:1]


class GenderProvider(Protocol):
    serial: bool

    def lookup(self, queries: Sequence[tuple[str, str | None]]) -> list[GenderLookupResult]: ...


class DictionaryGenderProvider:
    """Offline provider backed by a ``first_name,country,label,accuracy,samples`` table.

    Names are matched case-insensitively. A row with an empty country acts
    as a fallback for any country without its own row.
    """

    serial = False

    def __init__(self, rows: Iterable[tuple[str, str | None, GenderLookupResult]] = ()):
        self._table: dict[tuple[str, str | None], GenderLookupResult] = {}
        for name, country, result in rows:
            self._table[(normalize_text(name), country or None)] = result

    @classmethod
    def from_csv(cls, path: str | Path) -> "DictionaryGenderProvider":
        path = Path(path)
        rows = []
        with path.open(newline="", encoding="utf-8") as fh:
            for lineno, rec in enumerate(csv.DictReader(fh), start=2):
                try:
                    rows.append(
                        (
                            rec["first_name"],
                            rec.get("country") or None,
                            GenderLookupResult(
                                rec["label"].strip().lower(),
                                float(rec["accuracy"]),
                                int(rec["samples"]),
                            ),
                        )
                    )
                except (KeyError, ValueError, AttributeError) as exc:
                    raise SchemaError(f"{type(exc).__name__}: {exc}", path, lineno) from exc
        return cls(rows)

    def lookup(self, queries):
        out = []
        for name, country in queries:
            key = normalize_text(name)
            out.append(self._table.get((key, country), self._table.get((key, None), UNKNOWN)))
        return out


@dataclass(frozen=True)
class ThresholdRule:
    countries: frozenset[str] | None  # None matches any country
    year_from: int | None
    year_to: int | None
    min_accuracy: float
    min_samples: int

    def applies(self, country: str | None, year: int | None) -> bool:
        if self.countries is not None and country not in self.countries:
            return False
        if year is not None:
            if self.year_from is not None and year < self.year_from:
                return False
            if self.year_to is not None and year > self.year_to:
                return False
        return True


class ThresholdTable:
    """Ordered rules keyed by country group and first-publication year; first match wins."""

    def __init__(self, rules: Sequence[ThresholdRule]):
        if not rules:
            raise ValueError("threshold table needs at least one rule")
        self.rules = list(rules)

    @classmethod
    def default(cls) -> "ThresholdTable":
        return cls([ThresholdRule(None, None, None, 90.0, 10)])

    @classmethod
    def from_csv(cls, path: str | Path) -> "ThresholdTable":
        """Columns ``countries,year_from,year_to,min_accuracy,min_samples``.

        ``countries`` is ``*`` or a ``|``-separated list; empty years are open bounds.
        """
        rules = []
        with Path(path).open(newline="", encoding="utf-8") as fh:
            for rec in csv.DictReader(fh):
                cs = rec["countries"].strip()
                rules.append(
                    ThresholdRule(
                        None if cs in ("", "*") else frozenset(cs.split("|")),
                        int(rec["year_from"]) if rec.get("year_from") else None,
                        int(rec["year_to"]) if rec.get("year_to") else None,
                        float(rec["min_accuracy"]),
                        int(rec["min_samples"]),
                    )
                )
        return cls(rules)

    def lookup(self, country: str | None, year: int | None) -> ThresholdRule:
        for rule in self.rules:
            if rule.applies(country, year):
                return rule
        raise KeyError(f"no threshold rule for country={country!r}, year={year!r}")


def assign_gender(
    candidates: Sequence[str],
    country: str | None,
    first_pub_year: int | None,
    provider: GenderProvider,
    thresholds: ThresholdTable | None = None,
) -> str | None:
    """Pick female/male by comparing the best confident score of each label."""
    if not candidates:
        return None
    rule = (thresholds or ThresholdTable.default()).lookup(country, first_pub_year)
    try:
        results = provider.lookup([(c, country) for c in candidates])
    except Exception as exc:
        raise GenderLookupError(candidates[0], exc) from exc
    if len(results) != len(candidates):
        raise GenderLookupError(candidates[min(len(results), len(candidates) - 1)])
    best = {"female": None, "male": None}
    for res in results:
        if res.label not in best:
            continue
        if res.accuracy < rule.min_accuracy or res.samples < rule.min_samples:
            continue
        if best[res.label] is None or res.accuracy > best[res.label]:
            best[res.label] = res.accuracy
    f, m = best["female"], best["male"]
    if f is None and m is None:
        return None
    if m is None or (f is not None and f > m):
        return "female"
    if f is None or m > f:
        return "male"
    return None


def load_affiliations(path: str | Path) -> dict[str, list[str]]:
    """Headerless ``author_id,country`` rows, one per affiliation occurrence."""
    out: dict[str, list[str]] = defaultdict(list)
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != 2:
                raise SchemaError(f"expected 2 columns, got {len(row)}", path, lineno)
            out[row[0].strip()].append(row[1].strip())
    return dict(out)


def enrich_authors(
    authors,
    affiliations: Mapping[str, Sequence[str]] | None = None,
    provider: GenderProvider | None = None,
    thresholds: ThresholdTable | None = None,
):
    """Fill in author country (from affiliations) and gender (from the provider).

    Countries are recomputed for every author listed in ``affiliations``.
    Genders already present are kept; only missing ones are inferred.
    """
    from dataclasses import replace

    from .corpus import assign_country

    out = []
    for a in authors:
        if affiliations is not None and a.author_id in affiliations:
            a = replace(a, country=assign_country(a, affiliations[a.author_id]))
        if provider is not None and a.gender is None and a.country is not None and a.full_name.strip():
            g = assign_gender(
                first_name_candidates(a.full_name, a.country), a.country, a.first_pub_year, provider, thresholds
            )
            a = replace(a, gender=g)
        out.append(a)
    return out
