"""Command-line front end: link, build, randomize, analyze, matchpairs, synth, report.

Exit codes
  0  success
  1  unexpected internal error
  2  I/O error (missing or unreadable input, unwritable output)
  3  schema error (malformed or duplicate input records)
  4  invalid usage or configuration
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Iterator, Sequence

from . import __version__
from .corpus import CorpusError, SchemaError, build_network, load_authors, load_citations, load_papers
from .corpus import write_authors, write_citations, write_papers
from .groups import PARTITIONS, GroupSpec, table_specs
from .harvest import (
    DictionaryGenderProvider,
    ThresholdTable,
    enrich_authors,
    link_corpora,
    load_affiliations,
    load_raw_records,
    write_link_report,
)
from .imbalance import format_report, imbalance_table
from .matching import SPLITS, compare_populations, format_comparison
from .nullmodels import MODELS, PD_TIE_BREAK, RNG_DESCRIPTION, run_replicates, write_replicate_summaries, write_trace
from .synthgen import SynthConfig, SynthConfigError, generate

logger = logging.getLogger("citebias")

EXIT_OK, EXIT_ERROR, EXIT_IO, EXIT_SCHEMA, EXIT_USAGE = 0, 1, 2, 3, 4

DEFAULTS: dict[str, object] = {
    "seed": 0,
    "model": "pd",
    "replicates": 100,
    "match_replicates": 100,
    "workers": os.cpu_count() or 1,
    "keep_isolated": False,
    "include_self_citations": False,
    "two_sided": False,
    "partition": "none",
    "to_filter": "all",
    "split": "gender_MM_vs_WW",
    "percentile": 0.01,
    "trace": False,
}
# Settings that cannot change any output byte; kept out of the config hash.
NON_SEMANTIC = {"workers", "out", "config", "command", "verbose"}
BOOL_KEYS = {"keep_isolated", "include_self_citations", "two_sided", "trace"}
INT_KEYS = {"seed", "replicates", "match_replicates", "workers"}
FLOAT_KEYS = {"percentile"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default, which we reserve for I/O
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def read_config_file(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment; dashes in keys become underscores."""
    out: dict[str, str] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _coerce(key: str, value):
    if not isinstance(value, str):
        return value
    try:
        if key in BOOL_KEYS:
            low = value.lower()
            if low not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(value)
            return low in ("1", "true", "yes")
        if key in INT_KEYS:
            return int(value)
        if key in FLOAT_KEYS:
            return float(value)
    except ValueError:
        raise UsageError(f"bad value for {key}: {value!r}") from None
    return value


def resolve(args: argparse.Namespace) -> dict[str, object]:
    """Merge settings with precedence CLI flag > config file > default."""
    file_values = read_config_file(args.config) if getattr(args, "config", None) else {}
    cfg: dict[str, object] = {}
    for key, value in vars(args).items():
        if key == "func":
            continue
        if value is None:
            value = file_values.get(key, DEFAULTS.get(key))
        cfg[key] = _coerce(key, value)
    # synth settings and anything else only present in the file
    for key, value in file_values.items():
        if key not in cfg:
            cfg[key] = value
    if "model" in cfg and cfg["model"] is not None:
        m = str(cfg["model"]).upper()
        if m not in MODELS:
            raise UsageError(f"unknown model {cfg['model']!r}")
        cfg["model"] = m
    for key in ("replicates", "match_replicates", "workers"):
        if key in cfg and cfg[key] is not None and int(cfg[key]) < 1:
            raise UsageError(f"{key} must be at least 1")
    return cfg


def config_hash(cfg: dict[str, object]) -> str:
    semantic = {k: (str(v) if isinstance(v, Path) else v) for k, v in cfg.items() if k not in NON_SEMANTIC}
    blob = json.dumps(semantic, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def header_line(cfg: dict[str, object]) -> str:
    return (
        f"# citebias {__version__} command={cfg['command']} model={cfg.get('model') or '-'} "
        f"seed={cfg.get('seed')} config_sha256={config_hash(cfg)}\n"
    )


# ---------------------------------------------------------------------------
# Output handling
# ---------------------------------------------------------------------------


class Outputs:
    """Collects files written through temporary names and publishes them together."""

    def __init__(self, out_dir: str | Path):
        self.dir = Path(out_dir)
        self._pending: list[tuple[Path, Path]] = []

    def path(self, name: str) -> Path:
        final = self.dir / name
        tmp = self.dir / f".{name}.partial"
        self._pending.append((tmp, final))
        return tmp

    def text(self, name: str, content: str) -> None:
        self.path(name).write_text(content, encoding="utf-8")

    def commit(self) -> list[Path]:
        done = []
        for tmp, final in self._pending:
            os.replace(tmp, final)
            done.append(final)
        self._pending.clear()
        return done

    def discard(self) -> None:
        for tmp, _ in self._pending:
            tmp.unlink(missing_ok=True)
        self._pending.clear()


@contextmanager
def outputs(out_dir: str | Path) -> Iterator[Outputs]:
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    o = Outputs(out_dir)
    try:
        yield o
    except BaseException:
        o.discard()
        raise
    for p in o.commit():
        logger.info("wrote %s", p)


def _with_header(path: Path, header: str, writer: Callable[[Path], None]) -> None:
    writer(path)
    body = path.read_text(encoding="utf-8")
    path.write_text(header + body, encoding="utf-8")


def _metadata(cfg: dict[str, object], **extra) -> str:
    meta = {
        "software": "citebias",
        "version": __version__,
        "command": cfg["command"],
        "config_sha256": config_hash(cfg),
        "config": {k: v for k, v in cfg.items() if k not in NON_SEMANTIC},
        "rng": RNG_DESCRIPTION,
        "pd_tie_break": PD_TIE_BREAK,
    }
    meta.update(extra)
    return json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n"


# ---------------------------------------------------------------------------
# Corpus loading shared by build/randomize/analyze/matchpairs
# ---------------------------------------------------------------------------


def _need(cfg: dict[str, object], *keys: str) -> None:
    missing = [k for k in keys if not cfg.get(k)]
    if missing:
        raise UsageError("missing required setting(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _load_network(cfg: dict[str, object]):
    _need(cfg, "papers", "citations", "authors")
    for key in ("papers", "citations", "authors", "gender_dict", "thresholds", "affiliations"):
        if cfg.get(key) and not Path(str(cfg[key])).is_file():
            raise FileNotFoundError(f"{key} file not found: {cfg[key]}")
    papers = load_papers(cfg["papers"])
    edges = load_citations(cfg["citations"])
    authors = load_authors(cfg["authors"])
    provider = DictionaryGenderProvider.from_csv(cfg["gender_dict"]) if cfg.get("gender_dict") else None
    thresholds = ThresholdTable.from_csv(cfg["thresholds"]) if cfg.get("thresholds") else None
    affiliations = load_affiliations(cfg["affiliations"]) if cfg.get("affiliations") else None
    if provider is not None or affiliations is not None:
        authors = enrich_authors(authors, affiliations, provider, thresholds)
    return build_network(
        papers,
        edges,
        authors,
        keep_isolated=bool(cfg.get("keep_isolated")),
        include_self_citations=bool(cfg.get("include_self_citations")),
    )


def _specs(cfg: dict[str, object]) -> list[GroupSpec]:
    return table_specs(str(cfg.get("partition") or "none"), str(cfg.get("to_filter") or "all"))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_link(cfg: dict[str, object]) -> int:
    _need(cfg, "a", "b", "out")
    a = load_raw_records(cfg["a"], "a")
    b = load_raw_records(cfg["b"], "b")
    report = link_corpora(a, b)
    with outputs(cfg["out"]) as o:
        _with_header(o.path("link_report.csv"), header_line(cfg), lambda p: write_link_report(p, report))
    logger.info("%d matched, %d ambiguous, %d unmatched", len(report.matched), report.n_ambiguous, len(report.unmatched))
    return EXIT_OK


def cmd_build(cfg: dict[str, object]) -> int:
    _need(cfg, "out")
    net, report = _load_network(cfg)
    with outputs(cfg["out"]) as o:
        write_papers(o.path("papers.jsonl"), net.papers.values())
        write_citations(o.path("citations.csv"), net.edges)
        write_authors(o.path("authors.jsonl"), net.authors.values())
        o.text("build_report.json", _metadata(cfg, report=report.to_dict()))
    return EXIT_OK


def cmd_randomize(cfg: dict[str, object]) -> int:
    _need(cfg, "out")
    net, _ = _load_network(cfg)
    summaries = run_replicates(
        net,
        cfg["model"],
        cfg["replicates"],
        cfg["seed"],
        specs=_specs(cfg),
        workers=cfg["workers"],
        keep_trace=bool(cfg.get("trace")),
    )
    header = header_line(cfg)
    with outputs(cfg["out"]) as o:
        write_replicate_summaries(o.path("replicates.csv"), summaries, header)
        if cfg.get("trace"):
            from .nullmodels import CandidateIndex

            write_trace(o.path("trace.csv"), summaries, CandidateIndex.for_network(net).paper_ids, header)
        o.text("replicates.meta.json", _replicate_meta(cfg, summaries))
    return EXIT_OK


def _replicate_meta(cfg, summaries) -> str:
    return _metadata(
        cfg,
        model=cfg["model"],
        seeds=[s.seed for s in summaries],
        fallback_counts=[s.fallback_count for s in summaries],
        n_edges=summaries[0].n_edges if summaries else 0,
    )


def cmd_analyze(cfg: dict[str, object]) -> int:
    _need(cfg, "out")
    net, report = _load_network(cfg)
    specs = _specs(cfg)
    summaries = run_replicates(net, cfg["model"], cfg["replicates"], cfg["seed"], specs=specs, workers=cfg["workers"])
    rows = imbalance_table(net, specs, summaries, two_sided=bool(cfg.get("two_sided")))
    with outputs(cfg["out"]) as o:
        o.text("imbalance.csv", header_line(cfg) + format_report(rows))
        o.text("imbalance.meta.json", _replicate_meta(cfg, summaries))
    return EXIT_OK


def cmd_matchpairs(cfg: dict[str, object]) -> int:
    _need(cfg, "out")
    if cfg["split"] not in SPLITS:
        raise UsageError(f"unknown split {cfg['split']!r}; expected one of {', '.join(SPLITS)}")
    net, _ = _load_network(cfg)
    summaries = run_replicates(
        net, cfg["model"], cfg["replicates"], cfg["seed"], specs=[], workers=cfg["workers"], per_source=True
    )
    rows = compare_populations(
        net,
        cfg["model"],
        cfg["split"],
        cfg["seed"],
        n_replicates=cfg["replicates"],
        n_match_replicates=cfg["match_replicates"],
        summaries=summaries,
        percentile=cfg["percentile"],
    )
    with outputs(cfg["out"]) as o:
        o.text("matchpairs.csv", header_line(cfg) + format_comparison(rows))
        o.text("matchpairs.meta.json", _replicate_meta(cfg, summaries))
    return EXIT_OK


def cmd_synth(cfg: dict[str, object]) -> int:
    _need(cfg, "out")
    settings: dict[str, object] = {}
    synth_fields = set(SynthConfig.__dataclass_fields__)
    for key, value in cfg.items():
        if key in synth_fields and key != "seed" and value is not None:
            settings[key] = value
    for item in cfg.get("set") or ():
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        settings[k.strip()] = v.strip()
    settings["seed"] = cfg["seed"]
    corpus = generate(SynthConfig.from_mapping(settings))
    with outputs(cfg["out"]) as o:
        write_papers(o.path("papers.jsonl"), corpus.papers)
        write_citations(o.path("citations.csv"), corpus.citations)
        write_authors(o.path("authors.jsonl"), corpus.authors)
        o.text(
            "synth.meta.json",
            _metadata(cfg, synth={k: str(v) for k, v in sorted(settings.items())}, capped_papers=corpus.capped_papers),
        )
    return EXIT_OK


def cmd_report(cfg: dict[str, object]) -> int:
    out = sys.stdout
    for name in cfg["files"]:
        with open(name, encoding="utf-8", newline="") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
        rows = list(csv.reader(lines))
        if not rows:
            continue
        header, body = rows[0], rows[1:]
        if cfg.get("significant_only"):
            for col in ("significant", "reject"):
                if col in header:
                    k = header.index(col)
                    body = [r for r in body if r[k] == "true"]
        widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
        if len(cfg["files"]) > 1:
            out.write(f"== {name}\n")
        for r in [header, *body]:
            out.write("  ".join(v.rjust(w) if _numeric(v) else v.ljust(w) for v, w in zip(r, widths)).rstrip() + "\n")
    return EXIT_OK


def _numeric(v: str) -> bool:
    try:
        float(v)
    except ValueError:
        return False
    return True


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, *, model: bool = True) -> None:
    p.add_argument("--config", help="flat key = value settings file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", help="base seed (default 0)")
    if model:
        p.add_argument("--model", type=str.lower, choices=[m.lower() for m in MODELS])
        p.add_argument("--replicates", help="number of randomized networks (default 100)")
        p.add_argument("--workers", help="parallel replicates (default: available cores)")


def _add_corpus(p: argparse.ArgumentParser) -> None:
    p.add_argument("--papers")
    p.add_argument("--citations")
    p.add_argument("--authors")
    p.add_argument("--gender-dict", dest="gender_dict", help="first_name,country,label,accuracy,samples CSV")
    p.add_argument("--thresholds", help="countries,year_from,year_to,min_accuracy,min_samples CSV")
    p.add_argument("--affiliations", help="headerless author_id,country CSV")
    p.add_argument("--keep-isolated", dest="keep_isolated", action="store_const", const=True)
    p.add_argument("--include-self-citations", dest="include_self_citations", action="store_const", const=True)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="citebias", description="Gendered citation imbalance against randomized reference networks.")
    parser.add_argument("--version", action="version", version=f"citebias {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("link", help="link records between two bibliographic sources")
    p.add_argument("a", help="JSON Lines records of the primary source")
    p.add_argument("b", help="JSON Lines records of the secondary source")
    _add_common(p, model=False)
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("build", help="enrich and filter a corpus into a citation network")
    _add_corpus(p)
    _add_common(p, model=False)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("randomize", help="write per-replicate tabulations of randomized networks")
    _add_corpus(p)
    _add_common(p)
    p.add_argument("--partition", choices=sorted(PARTITIONS))
    p.add_argument("--to-filter", dest="to_filter")
    p.add_argument("--trace", action="store_const", const=True, help="also write every rewired edge")
    p.set_defaults(func=cmd_randomize)

    p = sub.add_parser("analyze", help="observed vs expected citations per gender category")
    _add_corpus(p)
    _add_common(p)
    p.add_argument("--partition", choices=sorted(PARTITIONS))
    p.add_argument("--to-filter", dest="to_filter")
    p.add_argument("--two-sided", dest="two_sided", action="store_const", const=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("matchpairs", help="matched-pair comparison of two paper populations")
    _add_corpus(p)
    _add_common(p)
    p.add_argument("--split", choices=SPLITS)
    p.add_argument("--match-replicates", dest="match_replicates")
    p.add_argument("--percentile", help="prominence cutoff fraction (default 0.01)")
    p.set_defaults(func=cmd_matchpairs)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    _add_common(p, model=False)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="generator setting; repeatable")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="print report CSVs as aligned tables")
    p.add_argument("files", nargs="+")
    p.add_argument("--significant-only", dest="significant_only", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        cfg = resolve(args)
        return args.func(cfg)
    except UsageError as exc:
        print(f"citebias: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SynthConfigError as exc:
        print(f"citebias: invalid synth config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SchemaError, CorpusError) as exc:
        print(f"citebias: schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"citebias: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001
        logger.debug("unhandled", exc_info=True)
        print(f"citebias: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
