"""Simulator tests: timing arithmetic, full-stack runs, fault injection."""

import dataclasses

import pytest

from relayrace.cli import template_text
from relayrace.netsim import (
    FaultSpec,
    LinkSpec,
    compare_paths,
    load_scenario_text,
    run,
    transfer_time,
)
from relayrace.netsim.scenario import SPEED_OF_LIGHT_M_S

NS = 1_000_000_000


def load_template(name, seed=None):
    scenario, diags = load_scenario_text(template_text(name))
    assert not diags, diags
    if seed is not None:
        scenario.seed = seed
    return scenario


def load_text(text):
    scenario, diags = load_scenario_text(text)
    assert not diags, diags
    return scenario


class TestTransferTime:
    def test_zero_byte_ping_is_pure_propagation(self):
        link = LinkSpec(("a", "b"), "control_plane", bandwidth=10**6, propagation_ns=12345)
        assert transfer_time(0, link) == 12345

    def test_megabyte_over_megabyte_per_second(self):
        link = LinkSpec(("a", "b"), "isp_backhaul", bandwidth=10**6, propagation_ns=1_000_000)
        assert transfer_time(10**6, link) == 1_001_000_000  # 1.001 s

    def test_edge_propagation_is_distance_over_c(self):
        expected = round(1000 / SPEED_OF_LIGHT_M_S * NS)
        link = LinkSpec(("a", "b"), "edge_wireless", bandwidth=10**9, propagation_ns=expected)
        assert transfer_time(0, link) == expected == 3336


class TestComparePaths:
    def test_three_hop_kilometer_path_vs_fixed_isp(self):
        sc = load_template("isp_vs_edge")
        result = compare_paths(sc, "a", "b", ("a", "b"), ("a", "e1", "e2", "b"), 0)
        closed_form = 3 * (1000 / SPEED_OF_LIGHT_M_S * NS + 100_000)
        assert abs(result["edge_latency"] - closed_form) < 1_000  # within 1 us
        assert result["isp_latency"] == 20_000_000
        assert result["edge_latency"] < result["isp_latency"]

    def test_shared_direct_link_is_symmetric(self):
        sc = load_text(
            """
            [scenario]
            name = "direct"
            [[nodes]]
            id = "a"
            role = "sender"
            [[nodes]]
            id = "b"
            role = "receiver"
            [[links]]
            a = "a"
            b = "b"
            kind = "isp_backhaul"
            bandwidth = 1000000
            propagation_delay = 0.001
            """
        )
        result = compare_paths(sc, "a", "b", ("a", "b"), ("a", "b"), 500)
        assert result["isp_latency"] == result["edge_latency"]

    def test_message_size_adds_only_bandwidth_terms(self):
        sc = load_template("isp_vs_edge")
        small = compare_paths(sc, "a", "b", ("a", "b"), ("a", "e1", "e2", "b"), 1000)
        large = compare_paths(sc, "a", "b", ("a", "b"), ("a", "e1", "e2", "b"), 2000)
        assert large["isp_latency"] - small["isp_latency"] == 1000 * NS // 10**9
        assert large["edge_latency"] - small["edge_latency"] == 3 * (1000 * NS // 10**9)


def test_empty_scenario_yields_empty_report():
    report = run(load_text('[scenario]\nname = "empty"\n'))
    assert report.events_processed == 0
    assert report.claim_log == [] and report.trace == [] and report.latency_rows == []
    assert report.quiescent


def test_honest_line_matches_ledger_exactly():
    report = run(load_template("double_incentive_line3"))
    assert report.claimants_by_chain() == {"c0": {0: "f1", 1: "f2", 2: "f3"}}
    assert all(row.result == "accepted" for row in report.claim_log)
    assert report.workload_outcomes["w0"]["delivered"] is True
    balances = {r.node_id: r for r in report.balances}
    for f in ("f1", "f2", "f3"):
        assert balances[f].rewards_confirmed == 100
        assert balances[f].net == 90  # one message forwarded at cost 10
    assert balances["x"].rewards_confirmed == 0
    total = sum(r.rewards_confirmed for r in report.balances)
    assert total == 300  # conservation against the chain's total value


def test_withholding_defection_exact_claimant_sets():
    report = run(load_template("double_incentive_withholding"))
    claims = report.claimants_by_chain()["c0"]
    assert claims == {0: "x", 1: "x", 2: "x"}
    cracker_times = [r.claim_time for r in report.accepted_claims()]
    # serial cracking at exactly iterations/hash_rate spacing
    assert cracker_times == [100 * NS, 200 * NS, 300 * NS]
    rejected = {(r.claimant, r.reason) for r in report.claim_log if r.result == "rejected"}
    assert rejected == {("f2", "out_of_order"), ("f3", "out_of_order")}


def test_corrupted_chunk_rejects_downstream_claims_only():
    sc = load_template("double_incentive_line3")
    sc.workloads[0].faults = (FaultSpec("corrupt", ("f1", "f2"), 2, 1.0),)
    report = run(sc)
    accepted = report.claimants_by_chain()["c0"]
    assert accepted[0] == "f1"  # upstream of the corruption: intact hash
    assert accepted[1] == "x" and accepted[2] == "x"  # cracker sweeps the rest
    bad = {(r.claimant, r.reason) for r in report.claim_log if r.result == "rejected"}
    assert ("f2", "bad_key") in bad and ("f3", "bad_key") in bad
    # the cracker's block-1 clock starts at f1's claim instant, not at w/r
    times = {r.block_index: r.claim_time for r in report.accepted_claims()}
    w_over_r = 10_000 * NS // 100
    assert times[1] == times[0] + w_over_r
    assert times[2] == times[0] + 2 * w_over_r


class TestCrackerTiming:
    SCENARIO = """
    [scenario]
    name = "cracker_law"
    seed = 3
    horizon = 60.0
    [ledger]
    publication_delay = 0.25
    [[nodes]]
    id = "x"
    role = "cracker"
    hash_rate = 100000
    [[chains]]
    id = "c0"
    iterations = 100000
    values = [10, 10, 10]
    """

    def test_lone_cracker_claims_at_exact_serial_times(self):
        report = run(load_text(self.SCENARIO))
        visible = 250_000_000
        times = [r.claim_time for r in report.accepted_claims()]
        assert times == [visible + (i + 1) * NS for i in range(3)]

    def test_forwarder_claim_restarts_the_cracker_clock(self):
        sc = load_template("cracker_race_sweep")
        report = run(sc)
        claims = report.accepted_claims()
        assert [r.claimant for r in claims] == ["f"]
        # the forwarder's claim time is the closed-form path latency
        control = 5_000_000
        hop = 1668 + 4096 * NS // 10**8 + 100_000
        expected = 3 * control + 2 * hop
        assert claims[0].claim_time == expected


def test_race_boundary_flip_is_single_and_sharp():
    control = 5_000_000
    hop = 1668 + 4096 * NS // 10**8 + 100_000
    claim_path_latency = 3 * control + 2 * hop
    rate = 1_000_000
    boundary = claim_path_latency * rate // NS  # last iteration count the cracker wins
    winners = []
    for iterations in (boundary - 1, boundary, boundary + 1, boundary + 2):
        sc = load_template("cracker_race_sweep")
        sc.chains[0] = dataclasses.replace(sc.chains[0], iterations=iterations)
        report = run(sc)
        winners.append(report.accepted_claims()[0].claimant)
    assert winners == ["x", "x", "f", "f"]


class TestAllOrNothing:
    def test_intact_run_pays_every_forwarder(self):
        sc = load_template("all_or_nothing_broadcast", seed=0)  # seed 0 draws no drop
        report = run(sc)
        claims = report.claimants_by_chain()["c0"]
        assert claims == {0: "a", 1: "b", 2: "c"}
        assert report.workload_outcomes["w0"]["delivered"] is True

    def test_dropped_chunk_pays_no_forwarder(self):
        sc = load_template("all_or_nothing_broadcast", seed=2)  # seed 2 draws the drop
        report = run(sc)
        forwarder_claims = {r.claimant for r in report.accepted_claims()} - {"x"}
        assert forwarder_claims == set()
        assert report.workload_outcomes["w0"]["delivered"] is False
        # the cracker still sweeps the abandoned chain, serially
        assert report.claimants_by_chain()["c0"] == {0: "x", 1: "x", 2: "x"}

    def test_direct_radio_with_no_forwarders_needs_no_chain(self):
        sc = load_text(
            """
            [scenario]
            name = "direct_radio"
            seed = 1
            horizon = 10.0
            [[nodes]]
            id = "s"
            role = "sender"
            position = [0.0, 0.0]
            [[nodes]]
            id = "r"
            role = "receiver"
            position = [100.0, 0.0]
            [[links]]
            a = "s"
            b = "r"
            kind = "edge_wireless"
            bandwidth = 1000000
            [[workloads]]
            id = "w0"
            model = "all_or_nothing"
            path = ["s", "r"]
            message_length = 2000
            chunk_size = 500
            """
        )
        report = run(sc)
        assert report.workload_outcomes["w0"]["delivered"] is True
        assert report.claim_log == []


class TestCompeting:
    def test_credits_conserve_generation_size_and_decode(self):
        report = run(load_template("competing_multicast"))
        outcome = report.workload_outcomes["w0"]
        assert outcome["decoded_ok"] is True
        assert sum(outcome["credits"].values()) == outcome["generation_size"] == 8
        rewards = {r.node_id: r.rewards_confirmed for r in report.balances}
        for hop, credit in outcome["credits"].items():
            assert rewards[hop] == credit * 50  # pool split follows credits

    def test_plain_forwarding_without_recoding_also_decodes(self):
        sc = load_template("competing_multicast")
        sc.workloads[0].recode = False
        report = run(sc)
        outcome = report.workload_outcomes["w0"]
        assert outcome["decoded_ok"] is True
        assert sum(outcome["credits"].values()) == 8

    def test_zero_latency_monopoly_takes_all_credit(self):
        sc = load_template("competing_multicast")
        links = []
        for link in sc.links:
            if set(link.endpoints) & {"b1"}:
                # make the b-side path hopeless: +10 ms per hop
                links.append(dataclasses.replace(link, propagation_ns=10_000_000))
            else:
                links.append(dataclasses.replace(link, propagation_ns=0))
        sc.links = links
        report = run(sc)
        credits = report.workload_outcomes["w0"]["credits"]
        assert credits == {"a1": 8}


class TestCacheDemo:
    def test_second_request_is_strictly_faster(self):
        report = run(load_template("cache_repeat"))
        rows = {r.label: r.latency_ns for r in report.latency_rows}
        assert rows["request_1"] < rows["request_0"]
        deliveries = report.workload_outcomes["w0"]["deliveries"]
        assert [d["winner"] for d in deliveries] == ["o", "k1"]

    def test_disabling_the_cache_removes_the_improvement(self):
        sc = load_template("cache_repeat")
        sc.nodes["k1"] = dataclasses.replace(sc.nodes["k1"], cache_capacity=0)
        report = run(sc)
        rows = {r.label: r.latency_ns for r in report.latency_rows}
        assert rows["request_1"] == rows["request_0"]
        deliveries = report.workload_outcomes["w0"]["deliveries"]
        assert [d["winner"] for d in deliveries] == ["o", "o"]

    def test_content_larger_than_capacity_is_never_cached(self):
        sc = load_template("cache_repeat")
        sc.nodes["k1"] = dataclasses.replace(sc.nodes["k1"], cache_capacity=50_000)
        report = run(sc)
        deliveries = report.workload_outcomes["w0"]["deliveries"]
        assert [d["winner"] for d in deliveries] == ["o", "o"]

    def test_cache_never_slows_repeat_delivery(self):
        base = run(load_template("cache_repeat"))
        sc = load_template("cache_repeat")
        sc.nodes["k1"] = dataclasses.replace(sc.nodes["k1"], cache_capacity=0)
        disabled = run(sc)
        cached = {r.label: r.latency_ns for r in base.latency_rows}
        plain = {r.label: r.latency_ns for r in disabled.latency_rows}
        assert cached["request_1"] <= plain["request_1"]

    TWO_CACHES = """
    [scenario]
    name = "two_caches"
    seed = 5
    horizon = 120.0
    control_latency = 0.010
    [[nodes]]
    id = "o"
    role = "sender"
    position = [0.0, 0.0]
    price = 90
    [[nodes]]
    id = "k1"
    role = "cache"
    position = [4000.0, 0.0]
    cache_capacity = 500000
    price = 50
    [[nodes]]
    id = "k2"
    role = "cache"
    position = [4500.0, 0.0]
    cache_capacity = 500000
    price = 40
    [[nodes]]
    id = "r"
    role = "receiver"
    position = [5000.0, 0.0]
    [[links]]
    a = "o"
    b = "k1"
    kind = "edge_wireless"
    bandwidth = 2000000
    [[links]]
    a = "k1"
    b = "k2"
    kind = "edge_wireless"
    bandwidth = 10000000
    [[links]]
    a = "k2"
    b = "r"
    kind = "edge_wireless"
    bandwidth = 10000000
    [[links]]
    a = "k1"
    b = "r"
    kind = "edge_wireless"
    bandwidth = 10000000
    [[workloads]]
    id = "w0"
    model = "cache_demo"
    content_id = "clip"
    origin = "o"
    requester = "r"
    path = ["o", "k1", "k2", "r"]
    message_length = 50000
    chunk_size = 10000
    request_times = [0.0, 30.0]
    """

    def test_two_caches_bid_and_the_cheaper_wins(self):
        # both caches store the content during the first delivery; the
        # second request takes the cheaper bid (k2 at 40 vs k1 at 50)
        report = run(load_text(self.TWO_CACHES))
        deliveries = report.workload_outcomes["w0"]["deliveries"]
        assert [d["winner"] for d in deliveries] == ["o", "k2"]
        assert deliveries[1]["price"] == 40


def test_contract_pull_delivers_and_records_tree():
    report = run(load_template("contract_pull"))
    outcome = report.workload_outcomes["w0"]
    assert outcome["declined"] is None
    assert outcome["delivered"] is True
    tree = outcome["contract_tree"]
    assert tree["principal"] == "r" and tree["contractor"] == "s"
    # the incentivized delivery segment paid its forwarder
    assert report.claimants_by_chain()["c0"] == {0: "c1"}


def test_same_seed_reproduces_reports_byte_for_byte(tmp_path):
    for i, out in enumerate(("one", "two")):
        report = run(load_template("double_incentive_line3"))
        report.write_outputs(tmp_path / out, figures=False)
    for name in ("claims.csv", "events.csv", "balances.csv", "latency.csv", "summary.json"):
        a = (tmp_path / "one" / name).read_bytes()
        b = (tmp_path / "two" / name).read_bytes()
        assert a == b, f"{name} differs between identical runs"


def test_different_seed_changes_the_event_trace(tmp_path):
    run(load_template("double_incentive_line3", seed=1)).write_outputs(
        tmp_path / "s1", figures=False
    )
    run(load_template("double_incentive_line3", seed=2)).write_outputs(
        tmp_path / "s2", figures=False
    )
    assert (tmp_path / "s1" / "events.csv").read_bytes() != (
        tmp_path / "s2" / "events.csv"
    ).read_bytes()


class TestValidation:
    def test_unknown_link_endpoint_named(self):
        _, diags = load_scenario_text(
            """
            [scenario]
            name = "broken"
            [[nodes]]
            id = "a"
            role = "sender"
            [[links]]
            a = "a"
            b = "ghost"
            kind = "isp_backhaul"
            bandwidth = 1000
            propagation_delay = 0.001
            """
        )
        assert any("ghost" in d and "links[0]" in d for d in diags)

    def test_chain_forwarder_mismatch_cites_the_rule(self):
        text = template_text("double_incentive_line3").replace(
            "values = [100, 100, 100]", "values = [100, 100]"
        )
        _, diags = load_scenario_text(text)
        assert any("one reward block per forwarder" in d for d in diags)

    def test_all_violations_reported_not_just_first(self):
        _, diags = load_scenario_text(
            """
            [scenario]
            name = "broken"
            [[nodes]]
            id = "a"
            role = "astronaut"
            [[nodes]]
            id = "a"
            role = "sender"
            [[links]]
            a = "a"
            b = "ghost"
            kind = "warp"
            bandwidth = 0
            propagation_delay = 0.001
            """
        )
        assert len(diags) >= 4  # bad role, duplicate id, bad endpoint, bad kind/bandwidth

    def test_cracker_requires_hash_rate(self):
        _, diags = load_scenario_text(
            """
            [scenario]
            name = "broken"
            [[nodes]]
            id = "x"
            role = "cracker"
            """
        )
        assert any("hash_rate" in d for d in diags)

    def test_every_bundled_template_is_clean(self):
        from relayrace.cli import TEMPLATES

        for name in TEMPLATES:
            _, diags = load_scenario_text(template_text(name))
            assert diags == [], (name, diags)
