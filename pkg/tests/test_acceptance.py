"""Acceptance suite: one PASS/FAIL line per primary criterion, printed to the terminal."""

import datetime as dt
import random
import time

import numpy as np
import pytest
from scipy.stats import ks_2samp

from citebias import cli
from citebias.corpus import build_network
from citebias.groups import table_specs
from citebias.harvest import link_corpora
from citebias.imbalance import analyze, over_under, z_and_p
from citebias.matching import compare_populations
from citebias.nullmodels import CandidateIndex, randomize, run_replicates
from citebias.stats import yates_chi2
from citebias.synthgen import SynthConfig, generate
from conftest import network, paper
from linkage_fixture import adversarial_fixture, reference_link
from test_stats import brute_yates


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        return ok

    return emit


def synth_net(**kw):
    corpus = generate(SynthConfig(**kw))
    net, _ = build_network(corpus.papers, corpus.citations, corpus.authors)
    return net


def test_out_degree_conservation(report):
    net = synth_net(n_papers=10_000, citations_mean=5.0, seed=0)
    idx = CandidateIndex.for_network(net)
    expected = np.bincount(idx.src, minlength=idx.n_papers)
    randomize(synth_net(n_papers=200, seed=1), "PD", 0)  # compile outside the timed loop
    details, ok = [], 45_000 <= net.M <= 55_000
    for model in ("RD", "HD", "PD"):
        start = time.perf_counter()
        preserved = True
        for seed in range(100):
            rn = randomize(net, model, seed, index=idx)
            preserved &= np.array_equal(rn.out_degrees(), expected) and rn.dst.size == net.M
        elapsed = time.perf_counter() - start
        ok &= preserved and elapsed < 60
        details.append(f"{model} exact={preserved} {elapsed:.1f}s")
    assert report("out-degree conservation", ok, f"N={net.N} M={net.M}; " + ", ".join(details))


def test_homophily_conservation(report):
    net = synth_net(n_papers=4000, homophily_strength=5.0, n_countries=3, n_topics=4, seed=2)
    idx = CandidateIndex.for_network(net)

    def crosstab(dst):
        return np.bincount(idx.src * len(idx.bucket_keys) + idx.bucket[dst], minlength=idx.n_papers * len(idx.bucket_keys))

    original = crosstab(idx.dst)
    exact = {m: all(np.array_equal(crosstab(randomize(net, m, s).dst), original) for s in range(20)) for m in ("HD", "PD")}
    rd = randomize(net, "RD", 0).dst
    same_orig = int((idx.bucket[idx.dst] == idx.bucket[idx.src]).sum())
    same_rd = int((idx.bucket[rd] == idx.bucket[idx.src]).sum())
    chi2, p = yates_chi2([[same_orig, net.M - same_orig], [same_rd, net.M - same_rd]])
    ok = exact["HD"] and exact["PD"] and p < 0.001
    assert report(
        "homophily conservation",
        ok,
        f"HD exact={exact['HD']} PD exact={exact['PD']}; same-key citations {same_orig} vs RD {same_rd}, "
        f"Yates chi2={chi2:.1f} p={p:.3g}",
    )


def test_in_degree_ordering(report):
    wins = 0
    for seed in range(20):
        net = synth_net(n_papers=3000, pa_exponent=1.0, homophily_strength=5.0, n_countries=3, n_topics=4, seed=seed)
        idx = CandidateIndex.for_network(net)
        orig = np.bincount(idx.dst, minlength=idx.n_papers)
        ks = {
            m: np.mean([ks_2samp(orig, randomize(net, m, r, index=idx).in_degrees()).statistic for r in range(10)])
            for m in ("RD", "HD", "PD")
        }
        wins += ks["PD"] < ks["HD"] < ks["RD"]
    assert report("in-degree heterogeneity ordering", wins >= 18, f"PD < HD < RD in {wins}/20 seeds")


def _enumeration_fixture():
    cats = ["MM", "WW", "MW", "WM"]
    ps = [
        paper(f"p{k}", dt.date(2001 + k // 2, 1 + k % 12, 1 + k), [f"a{k}"], cat=cats[k % 4], country="US" if k % 3 else "JP")
        for k in range(16)
    ]
    edges = [(f"p{i}", f"p{j}") for i in range(1, 16) for j in range(i)]
    return network(ps, edges)


def _enumerated_mu(net, model):
    """Exact expected (group, category) counts: per-edge candidate sets from the rules, linearity over edges."""
    papers = net.papers
    mu = {}
    for e in net.edges:
        u = papers[e.src]
        cands = [
            v.paper_id
            for v in papers.values()
            if v.paper_id != u.paper_id
            and u.pub_date.replace(year=u.pub_date.year - 10) <= v.pub_date <= u.pub_date
            and not set(u.author_ids) & set(v.author_ids)
        ]
        if model == "HD":
            key = lambda p: (p.country, p.topic_id, p.venue_rank)  # noqa: E731
            cands = [c for c in cands if key(papers[c]) == key(papers[e.dst])]
            if e.dst not in cands:
                cands.append(e.dst)
        for c in cands:
            cat = papers[c].gender_category
            for group in (u.gender_category, "All"):
                mu[(group, cat)] = mu.get((group, cat), 0.0) + 1.0 / len(cands)
    return mu


def test_exact_expectation_oracle(report):
    net = _enumeration_fixture()
    worst = {}
    for model in ("RD", "HD"):
        exact = _enumerated_mu(net, model)
        summaries = run_replicates(net, model, 10_000, 0, specs=table_specs())
        for cell, value in exact.items():
            mc = np.mean([s.counts.get(cell, 0) for s in summaries])
            worst[model] = max(worst.get(model, 0.0), abs(mc - value) / value)
        extra = {c for s in summaries for c in s.counts} - set(exact)
        worst[model] = worst[model] if not extra else float("inf")
    ok = all(v <= 0.02 for v in worst.values())
    assert report(
        "exact-expectation oracle",
        ok,
        f"{net.N} papers, {net.M} edges, 10000 replicates; max relative error RD={worst['RD']:.4f} HD={worst['HD']:.4f}",
    )


def test_null_calibration(report):
    flagged = {m: 0 for m in ("RD", "HD", "PD")}
    cells = {m: 0 for m in flagged}
    for seed in range(100):
        net = synth_net(n_papers=1000, seed=10_000 + seed)
        for model in flagged:
            rows = analyze(net, model, n_replicates=100, base_seed=seed)
            cells[model] += len(rows)
            flagged[model] += sum(r.z is None or abs(r.z) > 3.09 for r in rows)
    rates = {m: flagged[m] / cells[m] for m in flagged}
    ok = all(r <= 0.05 for r in rates.values())
    assert report(
        "null calibration",
        ok,
        "100 neutral corpora; |z|>3.09 fraction " + ", ".join(f"{m}={r:.4f}" for m, r in rates.items()),
    )


def test_planted_bias_recovery(report):
    net = synth_net(n_papers=20_000, citations_mean=15.0, planted_bias={"WW": 0.8}, seed=0)
    start = time.perf_counter()
    rows = analyze(net, "PD", n_replicates=100)
    elapsed = time.perf_counter() - start
    (row,) = [r for r in rows if r.group == "All" and r.category == "WW"]
    pct = 100 * row.over_under
    ok = abs(pct + 20) <= 5 and row.z < -3.09 and elapsed < 300
    assert report(
        "planted-bias recovery",
        ok,
        f"All->WW {pct:.2f}% z={row.z:.2f} (PD, {net.M} edges, 100 replicates in {elapsed:.1f}s)",
    )


def test_formula_spot_checks(report):
    pct = 100 * over_under(454733, 438991.5)
    z, _, sig = z_and_p(454733, 438991.5, 304.9)
    ok = abs(pct - 3.6) <= 0.05 and abs(z - 51.63) <= 0.01 and sig
    assert report("formula spot checks", ok, f"MM->MM over/under={pct:.3f}% z={z:.3f}")


def test_matched_pair_aa(report):
    # Known to fail: see README ("Known limitations"). The statistic scales the
    # difference by the replicate spread of the matched set only, so a random
    # split of one population is rejected far more often than the nominal rate.
    clean = 0
    for seed in range(100):
        net = synth_net(n_papers=1000, seed=20_000 + seed)
        rows = compare_populations(net, "PD", "random_halves", seed, n_replicates=100, n_match_replicates=100)
        clean += not any(r.reject for r in rows)
    ok = clean >= 95
    report("matched-pair A/A", ok, f"{clean}/100 seeds without any rejection at p<0.001")
    assert ok


test_matched_pair_aa = pytest.mark.xfail(
    reason="faithful test statistic is anti-conservative under the null; analysis in the decisions ledger",
    strict=True,
)(test_matched_pair_aa)


def test_yates(report):
    rng = random.Random(7)
    worst = 0.0
    for _ in range(1000):
        o = [[rng.randint(1, 1000) for _ in range(2)] for _ in range(2)]
        chi2, _ = yates_chi2(o)
        ref, _ = brute_yates(o)
        worst = max(worst, abs(chi2 - ref) / ref)
    a = yates_chi2([[10, 10], [10, 10]])[0]
    b = yates_chi2([[20, 10], [10, 20]])[0]
    ok = worst <= 1e-9 and abs(a - 0.1) <= 1e-12 and abs(b - 5.4) <= 1e-12
    assert report("Yates chi-squared", ok, f"max relative error {worst:.2e}; examples {a!r}, {b!r}")


def test_record_linkage(report):
    A, B = adversarial_fixture(0)
    links, _ = reference_link(A, B)
    got = link_corpora(A, B).matched
    ok = got == links and len(A) + len(B) == 200
    assert report("record linkage", ok, f"{len(A) + len(B)} records, {len(got)} links, reference agrees={got == links}")


def test_determinism(report, tmp_path):
    corpus = tmp_path / "corpus"
    assert cli.main(["synth", "--set", "n_papers=800", "--seed", "5", "--out", str(corpus)]) == 0

    def run(tag, workers):
        out = tmp_path / tag
        assert cli.main(["synth", "--set", "n_papers=800", "--seed", "5", "--out", str(out / "corpus")]) == 0
        common = ["--papers", str(corpus / "papers.jsonl"), "--citations", str(corpus / "citations.csv"),
                  "--authors", str(corpus / "authors.jsonl"), "--seed", "3"]
        assert cli.main(["build", *common, "--out", str(out / "build")]) == 0
        for model in ("rd", "hd", "pd"):
            args = [*common, "--model", model, "--replicates", "20", "--workers", str(workers)]
            assert cli.main(["randomize", *args, "--trace", "--out", str(out / f"rand_{model}")]) == 0
            assert cli.main(["analyze", *args, "--out", str(out / f"analyze_{model}")]) == 0
        assert cli.main(["matchpairs", *common, "--replicates", "20", "--match-replicates", "20",
                         "--workers", str(workers), "--out", str(out / "match")]) == 0
        return out

    first, second, threaded = run("a", 1), run("b", 1), run("c", 4)
    files = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())

    same = all((first / f).read_bytes() == (second / f).read_bytes() == (threaded / f).read_bytes() for f in files)
    assert report("determinism", same and len(files) >= 15, f"{len(files)} output files byte-identical across 2 runs and 1 vs 4 workers")
