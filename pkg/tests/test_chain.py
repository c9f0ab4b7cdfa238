import dataclasses

import pytest

from chainex.chain import (
    MODES,
    POLICIES,
    STAT_NAMES,
    ChainState,
    Smoothing,
    SolveConfig,
    breakthrough_basic,
    breakthrough_fertile,
    breakthrough_generalized,
    forward_scan,
    init_state,
    open_breakthroughs,
    reverse_scan,
    select_root,
    smooth_priorities,
    solve,
    solve_with_state,
)
from chainex.errors import ConfigError, InputError
from chainex.fixtures import gain_ring, splitting, three_cycle, three_cycle_with_spare, two_node_swap
from chainex.instance import GeneratorParams, generate_random, make_instance
from chainex.netform import build_network
from chainex.oracle import solve_exact, verify_solution
from chainex.solution import serialize_solution

ALL_CONFIGS = [SolveConfig(mode=m, policy=p) for m in MODES for p in POLICIES]


def links_of(cycle):
    return [(lk.sender, lk.receiver, lk.asset, lk.qty) for lk in cycle.links]


def fresh(inst, **kw):
    state = init_state(inst, SolveConfig(**kw))
    state.reset_predecessors()
    return state


# ---- configuration ---------------------------------------------------------

@pytest.mark.parametrize("kw", [
    dict(mode="sideways"), dict(policy="lifo"), dict(phases=3), dict(epsilon=0.0),
    dict(smoothing=Smoothing(0.3, 0.5)), dict(smoothing=Smoothing(0.7, 0.3, -1)),
    dict(phase1_policy="best"),
])
def test_bad_config(kw):
    with pytest.raises(ConfigError):
        SolveConfig(**kw)


def test_config_echo():
    d = SolveConfig(phases=2, seed=5).to_dict()
    assert d["phases"] == "two" and d["seed"] == 5 and d["mode"] == "forward"


# ---- initialization ----------------------------------------------------------

def test_init_fixture():
    state = init_state(three_cycle())
    assert state.open_set == {1, 2, 3}
    assert set(state.flow_node.values()) == {0}
    assert set(state.flow_send.values()) == set(state.flow_recv.values()) == {0}
    assert all(p is None for p in state.pred_s.values())
    assert state.residual_send == {1: {"X"}, 2: {"Z"}, 3: {"Y"}}


def test_init_drops_pruned_participant():
    assert init_state(three_cycle_with_spare()).open_set == {1, 2, 3}


def test_single_open_participant():
    inst = make_instance(1, [], send={(1, "X"): 2}, recv={(1, "Y"): 2})
    state = init_state(inst)
    assert len(state.open_set) <= 1
    assert select_root(state) is None
    sol = solve(inst)
    assert sol.cycles == () and sol.objective_units == 0


def test_init_rejects_invalid():
    inst = make_instance(2, [(1, 2)], send={(1, "X"): 1, (2, "X"): 1},
                         recv={(1, "X"): 1, (2, "Y"): 1})
    with pytest.raises(InputError):
        init_state(inst)


# ---- priorities --------------------------------------------------------------

PATH = {1: frozenset({2}), 2: frozenset({1, 3}), 3: frozenset({2})}


def test_smoothing_identity():
    p = {1: 3.0, 2: -1.0, 3: 0.5}
    assert smooth_priorities(p, PATH, 0.7, 0.3, rounds=0) == p


def test_smoothing_uniform_fixed_point():
    out = smooth_priorities({1: 2.0, 2: 2.0, 3: 2.0}, PATH, 0.6, 0.4, rounds=5)
    assert out == pytest.approx({1: 2.0, 2: 2.0, 3: 2.0}, abs=1e-15)


def test_smoothing_path():
    out = smooth_priorities({1: 1.0, 2: 0.0, 3: 0.0}, PATH, 0.6, 0.4, rounds=1)
    assert out == pytest.approx({1: 0.6, 2: 0.2, 3: 0.0})


def test_smoothing_path_equal_weights():
    out = smooth_priorities({1: 1.0, 2: 0.0, 3: 0.0}, PATH, 0.5, 0.5, rounds=1)
    assert out == {1: 0.5, 2: 0.25, 3: 0.0}


def test_smoothing_rejects_negative():
    with pytest.raises(ConfigError):
        smooth_priorities({1: 1.0}, PATH, 0.5, -0.1)


def test_smoothing_isolated_node():
    out = smooth_priorities({1: 4.0}, {1: frozenset()}, 0.5, 0.25)
    assert out == {1: 2.0}


# ---- root selection ----------------------------------------------------------

def test_select_root_fifo():
    assert select_root(init_state(three_cycle())) == 1


def test_select_root_priority_ties_to_lowest_id():
    inst = dataclasses.replace(three_cycle(), priority={1: 1.0, 2: 5.0, 3: 5.0})
    assert select_root(init_state(inst, SolveConfig(policy="priority"))) == 2


def test_select_root_single_open():
    state = init_state(three_cycle())
    state.remove_from_open(2)
    state.remove_from_open(3)
    assert select_root(state) is None


def test_select_root_random_stays_open():
    for seed in range(20):
        state = init_state(three_cycle(), SolveConfig(policy="random", seed=seed))
        state.remove_from_open(2)
        assert select_root(state) in {1, 3}


# ---- forward scan ------------------------------------------------------------

def test_forward_scan_fixture():
    state = fresh(three_cycle())
    out = forward_scan(state, 1)
    assert out.breakthrough == 1
    assert out.visited == (1, 3, 2)
    assert state.pred_s == {1: 2, 2: 3, 3: 1}
    assert state.asset_s == {1: "Z", 2: "Y", 3: "X"}


def test_forward_scan_exhausted_when_target_saturated():
    state = fresh(three_cycle())
    state.close_recv(3, "X")
    out = forward_scan(state, 1)
    assert out.exhausted and out.visited == (1,)


def test_forward_scan_empty_send_side():
    inst = three_cycle()
    state = fresh(inst)
    state.st[3][0] = False  # close 1's only send slot
    assert forward_scan(state, 1).exhausted


def test_forward_scan_root_must_be_open():
    state = fresh(three_cycle())
    state.remove_from_open(1)
    with pytest.raises(InputError):
        forward_scan(state, 1)


# ---- reverse scan ------------------------------------------------------------

def test_reverse_scan_fixture():
    state = fresh(three_cycle(), mode="reverse-forward")
    assert reverse_scan(state, 1) is True
    assert state.pred_r[2] == 1 and state.asset_r[2] == "Z"
    assert state.pred_r[3] is None


def test_reverse_scan_no_seller():
    state = fresh(three_cycle(), mode="reverse-forward")
    state.st[3][state.send_keys.index((2, "Z"))] = False
    assert reverse_scan(state, 1) is False


def test_reverse_scan_empty_receive_side():
    state = fresh(three_cycle(), mode="reverse-forward")
    state.close_recv(1, "Z")
    assert reverse_scan(state, 1) is False


# ---- breakthroughs -----------------------------------------------------------

def test_breakthrough_basic_fixture():
    state = fresh(three_cycle())
    forward_scan(state, 1)
    cyc = breakthrough_basic(state, 1)
    assert cyc.delta == 1 and cyc.root == 1 and cyc.is_closed()
    assert links_of(cyc) == [(1, 3, "X", 1), (3, 2, "Y", 1), (2, 1, "Z", 1)]
    assert state.open_set == set()
    assert all(not s for s in state.residual_send.values())


def test_breakthrough_residual_minimum():
    inst = make_instance(3, [(1, 2), (2, 3), (1, 3)],
                         send={(1, "X"): 3, (2, "Z"): 3, (3, "Y"): 3},
                         recv={(1, "Z"): 5, (2, "Y"): 5, (3, "X"): 5})
    state = fresh(inst)
    forward_scan(state, 1)
    assert breakthrough_basic(state, 1).delta == 3


def shared_hub():
    return make_instance(
        3, [(1, 2), (1, 3)],
        send={(1, "X"): 1, (1, "W"): 1, (2, "Y"): 1, (3, "V"): 1},
        recv={(1, "Y"): 1, (1, "V"): 1, (2, "X"): 1, (3, "W"): 1},
        node_cap={1: 2, 2: 1, 3: 1},
    )


def test_two_breakthroughs_through_shared_node():
    state = init_state(shared_hub())
    deltas = []
    for _ in range(2):
        state.reset_predecessors()
        assert select_root(state) == 1
        assert forward_scan(state, 1).breakthrough == 1
        deltas.append(breakthrough_basic(state, 1).delta)
        if len(deltas) == 1:
            assert state.flow_node[1] == 1 and 1 in state.open_set
    assert deltas == [1, 1]
    assert state.flow_node[1] == 2 and 1 not in state.open_set


def test_breakthrough_fertile_fixture():
    state = fresh(three_cycle(), mode="reverse-forward")
    assert reverse_scan(state, 1)
    out = forward_scan(state, 1)
    assert out.breakthrough == 2
    cyc = breakthrough_fertile(state, 1, 2)
    assert cyc.delta == 1
    assert links_of(cyc) == [(1, 3, "X", 1), (3, 2, "Y", 1), (2, 1, "Z", 1)]
    assert verify_solution(three_cycle(), solve(three_cycle(), SolveConfig(mode="reverse-forward"))).ok


def test_breakthrough_fertile_two_node_swap():
    # arcs 4, 5, 5, 4 and node caps 3, 4: node 1's cap binds
    state = fresh(two_node_swap(), mode="reverse-forward")
    assert reverse_scan(state, 1)
    assert forward_scan(state, 1).breakthrough == 2
    cyc = breakthrough_fertile(state, 1, 2)
    assert cyc.delta == 3
    assert links_of(cyc) == [(1, 2, "P", 3), (2, 1, "Q", 3)]


def test_breakthrough_fertile_requires_mark():
    state = fresh(three_cycle())
    forward_scan(state, 1)
    with pytest.raises(InputError):
        breakthrough_fertile(state, 1, 3)


# ---- generalized mode --------------------------------------------------------

def test_gain_ring_product():
    inst = gain_ring((0.6, 2.0, 1.2))
    sol = solve(inst, SolveConfig(generalized=True))
    (cyc,) = sol.cycles
    assert abs(cyc.gain - 1.44) < 1e-12
    last = cyc.links[-1]
    assert abs(last.received - 1.44 * cyc.delta) <= 1e-12 * cyc.delta
    assert [lk.rate for lk in cyc.links] == [0.6, 2.0, 1.2]
    assert verify_solution(inst, sol).ok


def test_gain_ring_quantities_are_scaled():
    sol = solve(gain_ring((0.6, 2.0, 1.2)), SolveConfig(generalized=True))
    (cyc,) = sol.cycles
    g = 1.0
    for lk in cyc.links:
        assert lk.qty == pytest.approx(cyc.delta * g, rel=1e-12)
        g *= lk.rate
    # root can receive at most 10, so it sends 10 / 1.44
    assert cyc.delta == pytest.approx(10 / 1.44, rel=1e-12)


def test_gain_two_link_receiver_cap_binds():
    sol = solve(gain_ring((2.0, 0.5), cap=1), SolveConfig(generalized=True))
    (cyc,) = sol.cycles
    assert cyc.delta == 0.5
    assert links_of(cyc) == [(1, 2, "G1", 0.5), (2, 1, "G2", 1)]


def test_generalized_with_unit_multipliers_matches_basic():
    for seed in range(40):
        inst = generate_random(GeneratorParams(8, 4, 0.5, seed=seed))
        for cfg in ALL_CONFIGS:
            basic = solve(inst, cfg)
            gen = solve(inst, dataclasses.replace(cfg, generalized=True))
            assert serialize_solution(gen, include_config=False) == \
                serialize_solution(basic, include_config=False)


def test_generalized_step_needs_generalized_state():
    state = fresh(three_cycle())
    forward_scan(state, 1)
    with pytest.raises(ConfigError):
        breakthrough_generalized(state, 1)


def test_generalized_step():
    state = fresh(gain_ring(), generalized=True)
    assert forward_scan(state, 1).breakthrough == 1
    cyc = breakthrough_generalized(state, 1)
    assert cyc.gain == pytest.approx(1.44, abs=1e-12)


# ---- full solves -------------------------------------------------------------

@pytest.mark.parametrize("cfg", ALL_CONFIGS, ids=lambda c: f"{c.mode}-{c.policy}")
def test_solve_fixture(cfg):
    inst = three_cycle()
    sol = solve(inst, cfg)
    assert sol.objective_units == 3 and len(sol.cycles) == 1
    assert sol.aggregate == {(1, 3, "X"): 1, (2, 1, "Z"): 1, (3, 2, "Y"): 1}
    assert sol.objective_units == solve_exact(build_network(inst, prune=True), inst).value


def test_weighted_objective():
    inst = dataclasses.replace(three_cycle(), recv_value={(1, "Z"): 5.0})
    assert solve(inst).objective_weighted == 7


def test_stats_present():
    sol = solve(three_cycle())
    assert set(sol.stats) == set(STAT_NAMES)
    assert sol.stats["breakthroughs"] == 1 and sol.stats["failed_scans"] == 0


def test_splitting_two_phase():
    inst = splitting()
    sol = solve(inst, SolveConfig(policy="priority", phases=2))
    (lb,) = sol.lb_report
    assert lb.met and lb.flow == 100
    p1 = [c for c in sol.cycles if c.phase == 1]
    assert len(p1) >= 2 and sum(c.delta for c in p1) == 100
    assert verify_solution(inst, sol).ok


def test_splitting_single_phase_priority_falls_short():
    sol = solve(splitting(), SolveConfig(policy="priority"))
    assert not sol.lb_report[0].met


def test_phase1_policy_separate():
    sol = solve(splitting(), SolveConfig(policy="priority", phase1_policy="fifo", phases=2))
    assert sol.lb_report[0].met
    assert sol.config["phase1_policy"] == "fifo"


def test_unmet_lower_bound_without_partners():
    inst = make_instance(2, [], send={(1, "X"): 3, (2, "Y"): 3},
                         recv={(1, "Y"): (2, 3), (2, "X"): 3})
    sol = solve(inst, SolveConfig(phases=2))
    assert sol.cycles == ()
    assert sol.aggregate == {}
    assert [(s.node, s.asset, s.met) for s in sol.lb_report] == [(1, "Y", False)]


def test_argmax_invariance():
    for seed in range(15):
        inst = generate_random(GeneratorParams(10, 4, 0.5, seed=seed))
        prio = {i: float((i * 7919 + seed) % 13) for i in inst.nodes}
        a = dataclasses.replace(inst, priority=prio)
        b = dataclasses.replace(inst, priority={i: 3.5 * p for i, p in prio.items()})
        cfg = SolveConfig(policy="priority", smoothing=Smoothing(0.7, 0.2, 2))
        assert serialize_solution(solve(a, cfg)) == serialize_solution(solve(b, cfg))


def test_random_policy_deterministic_per_seed():
    inst = generate_random(GeneratorParams(15, 5, 0.5, seed=3))
    runs = {serialize_solution(solve(inst, SolveConfig(policy="random", seed=s)))
            for s in (11, 11, 11)}
    assert len(runs) == 1


def test_random_policy_uses_seed():
    inst = generate_random(GeneratorParams(25, 5, 0.6, seed=4))
    traces = {tuple(c.root for c in solve(inst, SolveConfig(policy="random", seed=s)).cycles)
              for s in range(8)}
    assert len(traces) > 1


def test_integrality_and_bounds_random():
    for seed in range(60):
        inst = generate_random(GeneratorParams(12, 5, 0.5, seed=seed))
        for cfg in ALL_CONFIGS:
            sol, state = solve_with_state(inst, cfg)
            for c in sol.cycles:
                assert isinstance(c.delta, int) and c.delta >= 1
            for (i, a), f in state.flow_recv.items():
                assert f <= inst.recv_spec[i, a].upper
            for (i, a), f in state.flow_send.items():
                assert f <= inst.send_spec[i, a].upper
            for i, f in state.flow_node.items():
                assert f <= inst.node_cap[i].upper


def test_no_breakthrough_left_after_forward_solve():
    for seed in range(60):
        inst = generate_random(GeneratorParams(12, 5, 0.5, seed=seed))
        _, state = solve_with_state(inst, SolveConfig())
        assert open_breakthroughs(state) == []


def _stepwise(inst, cfg):
    """Drive the main routine through the public step functions."""
    state = init_state(inst, cfg)
    cycles = []
    while True:
        state.reset_predecessors()
        root = select_root(state)
        if root is None:
            return cycles
        if cfg.mode == "reverse-forward" and not reverse_scan(state, root):
            state.remove_from_open(root)
            continue
        out = forward_scan(state, root)
        if out.exhausted:
            state.remove_from_open(root)
        elif out.breakthrough == root:
            cycles.append(breakthrough_basic(state, root))
        else:
            cycles.append(breakthrough_fertile(state, root, out.breakthrough))


@pytest.mark.parametrize("mode", MODES)
@pytest.mark.parametrize("policy", ["fifo", "priority"])
def test_step_functions_match_solve(mode, policy):
    cfg = SolveConfig(mode=mode, policy=policy)
    for seed in range(25):
        inst = generate_random(GeneratorParams(9, 4, 0.6, seed=seed))
        inst = dataclasses.replace(inst, priority={i: float(i % 3) for i in inst.nodes})
        stepped = _stepwise(inst, cfg)
        solved = solve(inst, cfg).cycles
        assert [links_of(c) for c in stepped] == [links_of(c) for c in solved]


def test_state_copy_is_independent():
    state = init_state(three_cycle())
    other = state.copy()
    other.remove_from_open(1)
    assert 1 in state.open_set and 1 not in other.open_set
    assert isinstance(state, ChainState)
