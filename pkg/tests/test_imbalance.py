import itertools
from collections import Counter

import pytest

from citebias.groups import GroupSpec, Predicate, table_specs
from citebias.imbalance import analyze, format_report, imbalance_table, observed_counts, over_under, spearman, z_and_p
from citebias.nullmodels import run_replicates
from conftest import network, paper
from reference_models import small_network


def four_edge_net():
    ps = [
        paper("a", 2001, ["x1"], cat="MM"),
        paper("b", 2002, ["x2"], cat="WM", topic="T1"),
        paper("c", 2004, ["x3"], cat="MW", subfield="S1"),
        paper("d", 2006, ["x4"], cat="MM", topic="T1"),
    ]
    return network(ps, [("b", "a"), ("c", "a"), ("d", "b"), ("d", "c")])


class TestTabulation:
    def test_all_to_all_conserves(self):
        counts = observed_counts(four_edge_net(), GroupSpec("All"))
        assert sum(counts.values()) == 4

    def test_missing_group_is_empty(self):
        assert observed_counts(four_edge_net(), GroupSpec("WW", "gender_category=WW")) == {}

    def test_manual_tally(self):
        net = four_edge_net()
        got = observed_counts(net, table_specs())
        expected = Counter()
        for e in net.edges:
            s, d = net.papers[e.src], net.papers[e.dst]
            expected[(s.gender_category, d.gender_category)] += 1
            expected[("All", d.gender_category)] += 1
        assert got == dict(expected)

    def test_partition_by_target_subfield(self):
        got = observed_counts(four_edge_net(), table_specs("by_subfield"))
        assert got[("All|S1", "MW")] == 1 and got[("All|S0", "MM")] == 2

    def test_partition_by_source_year(self):
        got = observed_counts(four_edge_net(), table_specs("by_year"))
        assert got[("All|2006", "WM")] == 1 and got[("MM|2006", "MW")] == 1

    def test_predicate_parse(self):
        p = Predicate.parse("country=US|JP,venue_type=journal")
        assert str(p) == "country=JP|US,venue_type=journal"
        with pytest.raises(ValueError):
            Predicate.parse("colour=red")


class TestFormulas:
    @pytest.mark.parametrize("n, mu, expected", [(100, 100, 0.0), (90, 100, -0.10)])
    def test_over_under(self, n, mu, expected):
        assert over_under(n, mu) == pytest.approx(expected)

    def test_over_under_published_row(self):
        assert 100 * over_under(35887, 38291.9) == pytest.approx(-6.3, abs=0.05)

    def test_over_under_zero_mu(self):
        assert over_under(3, 0) is None

    def test_z_zero(self):
        z, p, sig = z_and_p(100, 100, 5)
        assert z == 0 and not sig and p == 0.5

    def test_z_published_row(self):
        z, _, sig = z_and_p(454733, 438991.5, 304.9)
        assert z == pytest.approx(51.63, abs=0.01) and sig
        assert 100 * over_under(454733, 438991.5) == pytest.approx(3.6, abs=0.05)

    def test_z_boundary(self):
        z, _, sig = z_and_p(97, 100, 1)
        assert z == pytest.approx(-3.0) and not sig

    def test_two_sided(self):
        _, p1, _ = z_and_p(97, 100, 1)
        _, p2, _ = z_and_p(97, 100, 1, two_sided=True)
        assert p2 == pytest.approx(2 * p1)

    def test_zero_sigma(self):
        assert z_and_p(4, 4, 0)[0] == 0.0
        assert z_and_p(5, 4, 0) == (None, None, False)


class TestTable:
    def test_deterministic_draws_give_zero_z(self):
        # every source has exactly one candidate in every model
        ps = [paper("a", 2001, ["x"], cat="WW"), paper("b", 2002, ["y"], cat="MW"), paper("c", 2003, ["z"], cat="MM")]
        net = network(ps, [("b", "a")])
        for model in ("RD", "HD", "PD"):
            rows = analyze(net, model, n_replicates=20)
            for r in rows:
                assert r.mu == r.n_obs
                assert r.z == 0.0 and not r.significant

    def test_rows_cover_every_category(self):
        net = small_network(seed=3, n=400)
        specs = table_specs()
        summaries = run_replicates(net, "HD", 10, specs=specs)
        rows = imbalance_table(net, specs, summaries)
        assert len(rows) == 5 * 4
        assert {(r.group, r.category) for r in rows} == set(
            itertools.product(["MM", "MW", "WM", "WW", "All"], ["MM", "MW", "WM", "WW"])
        )
        assert sum(r.n_obs for r in rows if r.group == "All") == net.M
        assert sum(r.mu for r in rows if r.group == "All") == pytest.approx(net.M)

    def test_report_format(self):
        net = small_network(seed=3, n=400)
        text = format_report(analyze(net, "RD", n_replicates=5))
        lines = text.splitlines()
        assert lines[0] == "group,category,n_obs,mu,sigma,over_under_pct,z,p,significant"
        assert len(lines) == 21

    def test_empty_summaries(self):
        with pytest.raises(ValueError):
            imbalance_table(four_edge_net(), table_specs(), [])


def test_spearman_reexport():
    assert spearman([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5)
