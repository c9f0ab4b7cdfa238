import dataclasses

import numpy as np
import pytest

from chainex.errors import BuildError, ExportError
from chainex.fixtures import splitting, three_cycle, three_cycle_with_spare
from chainex.instance import GeneratorParams, admissible, admissible_links, generate_random, make_instance
from chainex.netform import (
    LINKING,
    PARTICIPANT_R,
    PARTICIPANT_S,
    RECV_ASSET,
    SEND_ASSET,
    THROUGHPUT,
    build_network,
    compute_size,
    degree_law_violations,
    dump_arcs,
    export_dimacs,
    prune_sets,
)

FIXTURE_DIMACS = """\
p min 12 12
a 1 4 0 1 0
a 2 5 0 1 0
a 3 6 0 1 0
a 4 7 0 1 0
a 5 8 0 1 0
a 6 9 0 1 0
a 10 1 0 1 0
a 11 2 0 1 0
a 12 3 0 1 0
a 7 12 0 3 -1
a 8 10 0 3 -1
a 9 11 0 3 -1
"""


def random_instances(count, max_nodes=30, base=0):
    for seed in range(base, base + count):
        n = 1 + seed % max_nodes
        yield generate_random(GeneratorParams(n, 2 + seed % 6, 0.1 + (seed % 10) / 11, seed=seed))


def test_fixture_counts():
    net = build_network(three_cycle())
    assert (len(net.nodes), len(net.arcs)) == (12, 12)
    assert compute_size(three_cycle()) == (12, 12)


def test_index_assignment():
    net = build_network(three_cycle())
    for i in (1, 2, 3):
        assert net.node_id(PARTICIPANT_R, i) == i
        assert net.node_id(PARTICIPANT_S, i) == i + 3
    assert sorted(v.index for v in net.nodes) == list(range(1, 13))
    assert all(v.index > 6 for v in net.nodes if v.kind in (SEND_ASSET, RECV_ASSET))


def test_arc_order_and_bounds():
    net = build_network(three_cycle(cap=4))
    kinds = [a.kind for a in net.arcs]
    assert kinds == ["throughput"] * 3 + ["send"] * 3 + ["receive"] * 3 + ["linking"] * 3
    for a in net.linking_arcs():
        assert (a.lower, a.upper, a.cost) == (0, None, 0.0)
        assert net.nodes[a.tail - 1].asset == net.nodes[a.head - 1].asset == a.asset
    assert all(a.upper == 4 for a in net.arcs if a.kind != LINKING)


def test_two_node_cross_pairs():
    inst = make_instance(2, [(1, 2)], send={(1, "A"): 1, (1, "B"): 1, (2, "C"): 1, (2, "D"): 1},
                         recv={(1, "C"): 1, (1, "D"): 1, (2, "A"): 1, (2, "B"): 1})
    net = build_network(inst)
    assert compute_size(inst) == (len(net.nodes), len(net.arcs)) == (12, 14)


def test_empty_sides():
    inst = make_instance(3, [(1, 2)], send={}, recv={})
    assert compute_size(inst) == (6, 3)
    net = build_network(inst)
    assert (len(net.nodes), len(net.arcs)) == (6, 3)


def test_single_node():
    inst = make_instance(1, [], send={(1, "X"): 2}, recv={(1, "Y"): 2})
    net = build_network(inst)
    assert (len(net.nodes), len(net.arcs)) == (4, 3)
    assert not net.linking_arcs()
    pruned = build_network(inst, prune=True)
    assert not pruned.nodes and not pruned.arcs


def test_prune_spare_participant():
    inst = three_cycle_with_spare()
    assert compute_size(inst) == (16, 15)
    net = build_network(inst, prune=True)
    assert (len(net.nodes), len(net.arcs)) == (12, 12)
    assert len(net.prune_log) == 4
    assert 4 not in net.participants
    assert all(e.node == 4 for e in net.prune_log)


def test_prune_cascade():
    # 4 only trades with 3; once 3's W is unwanted 3 loses its send side, which
    # in turn strands 4
    inst = make_instance(
        4, [(1, 2), (3, 4)],
        send={(1, "X"): 1, (2, "Y"): 1, (3, "W"): 1, (4, "V"): 1},
        recv={(1, "Y"): 1, (2, "X"): 1, (3, "V"): 1, (4, "U"): 1},
    )
    pr = prune_sets(inst)
    assert pr.participants == (1, 2)
    net = build_network(inst, prune=True)
    assert net.participants == (1, 2)
    assert net.node_id(PARTICIPANT_S, 2) == 4


def test_prune_is_confluent():
    for k, inst in enumerate(random_instances(60, max_nodes=15)):
        ref = prune_sets(inst)
        for r in range(5):
            other = prune_sets(inst, rng=np.random.default_rng(1000 * k + r))
            assert other.participants == ref.participants
            assert other.send_sets == ref.send_sets and other.recv_sets == ref.recv_sets
            # reasons depend on the order, the removed elements do not
            removed = sorted((e.kind, e.node, e.asset or "") for e in other.log)
            assert removed == sorted((e.kind, e.node, e.asset or "") for e in ref.log)


def test_build_rejects_invalid():
    inst = make_instance(2, [(1, 2)], send={(1, "X"): 1, (2, "X"): 1},
                         recv={(1, "X"): 1, (2, "Y"): 1})
    with pytest.raises(BuildError, match="overlap"):
        build_network(inst)


def test_counts_and_degree_law_random():
    for inst in random_instances(120):
        net = build_network(inst)
        assert (len(net.nodes), len(net.arcs)) == compute_size(inst)
        assert degree_law_violations(net) == []
        assert degree_law_violations(build_network(inst, prune=True)) == []


def test_linking_arcs_match_admissibility():
    for inst in random_instances(80, max_nodes=12):
        net = build_network(inst)
        links = sorted((a.owner, a.receiver, a.asset) for a in net.linking_arcs())
        assert links == sorted(admissible_links(inst))
        for i, j, a in links:
            assert admissible(inst, i, j, a)


def test_multipliers_attached():
    inst = dataclasses.replace(three_cycle(), multiplier={(1, 3, "X"): 0.5})
    net = build_network(inst)
    mult = {(a.owner, a.receiver, a.asset): a.multiplier for a in net.linking_arcs()}
    assert mult == {(1, 3, "X"): 0.5, (2, 1, "Z"): 1.0, (3, 2, "Y"): 1.0}


def test_dimacs_fixture():
    assert export_dimacs(build_network(three_cycle(), prune=True)) == FIXTURE_DIMACS


def test_dimacs_unit_vs_weighted_differ_in_costs_only():
    inst = dataclasses.replace(three_cycle(), recv_value={(1, "Z"): 5.0})
    net = build_network(inst, prune=True)
    unit = export_dimacs(net, "unit").splitlines()
    weighted = export_dimacs(net, "weighted").splitlines()
    assert len(unit) == len(weighted)
    for u, w in zip(unit, weighted):
        assert u.split()[:-1] == w.split()[:-1]
    assert "a 10 1 0 1 -5" in weighted
    assert unit != weighted


def test_dimacs_rejects_lower_bounds():
    with pytest.raises(ExportError, match="two-phase"):
        export_dimacs(build_network(splitting(), prune=True))


def test_dump_lists_every_arc():
    net = build_network(three_cycle())
    text = dump_arcs(net)
    assert len(text.splitlines()) == 12
    assert "owner=1->3 asset=X bounds=[0,inf]" in text
    assert text.splitlines()[0].startswith(THROUGHPUT)
