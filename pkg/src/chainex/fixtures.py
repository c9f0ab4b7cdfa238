"""Small hand-checkable instances used by the tests, the CLI and the docs."""
from __future__ import annotations

from .instance import Bounds, Instance, make_instance


def three_cycle(cap: int = 1) -> Instance:
    """Three participants with a single 3-way exchange: 1 sends X to 3,
    3 sends Y to 2, 2 sends Z to 1. All bounds are ``cap``."""
    b = Bounds(0, cap)
    return Instance(
        node_count=3,
        assets=("X", "Y", "Z"),
        neighbors={1: {2, 3}, 2: {1, 3}, 3: {1, 2}},
        send_spec={(1, "X"): b, (2, "Z"): b, (3, "Y"): b},
        recv_spec={(1, "Z"): b, (2, "Y"): b, (3, "X"): b},
        node_cap={1: b, 2: b, 3: b},
    )


def three_cycle_with_spare(cap: int = 1) -> Instance:
    """The three-cycle plus a fourth participant that sends W and wants V,
    neither of which anybody else trades. Pruning removes it entirely."""
    base = three_cycle(cap)
    b = Bounds(0, cap)
    nbrs = {i: set(js) | {4} for i, js in base.neighbors.items()}
    nbrs[4] = {1, 2, 3}
    return Instance(
        node_count=4,
        assets=("V", "W", "X", "Y", "Z"),
        neighbors=nbrs,
        send_spec={**base.send_spec, (4, "W"): b},
        recv_spec={**base.recv_spec, (4, "V"): b},
        node_cap={**base.node_cap, 4: b},
    )


def splitting(with_decoy: bool = True) -> Instance:
    """Participant 1 must receive exactly 100 ETH and pays in BTC.

    Participants 2 and 3 can sell 60 and 40 ETH and each takes back the same
    amount of BTC. With ``with_decoy`` a fourth, high-priority participant
    competes for participant 2's ETH, so a priority-driven single phase
    leaves participant 1 short while a two-phase solve meets the demand.
    """
    edges = [(1, 2), (1, 3)]
    send = {(1, "BTC"): 100, (2, "ETH"): 60, (3, "ETH"): 40}
    recv = {(1, "ETH"): (100, 100), (2, "BTC"): 60, (3, "BTC"): 40}
    extra = {}
    if with_decoy:
        edges.append((2, 4))
        send[4, "BTC"] = 60
        recv[4, "ETH"] = 60
        extra["priority"] = {1: 1.0, 2: 1.0, 3: 1.0, 4: 10.0}
    return make_instance(4 if with_decoy else 3, edges, send, recv, **extra)


def gain_ring(multipliers=(0.6, 2.0, 1.2), cap: int = 10) -> Instance:
    """A ring ``1 -> 2 -> ... -> k -> 1`` with one asset per hop. The
    multiplier of hop ``t`` is ``multipliers[t]`` (missing entries are 1)."""
    k = max(len(multipliers), 2)
    mults = list(multipliers) + [1.0] * (k - len(multipliers))
    edges, send, recv, rate = [], {}, {}, {}
    for t in range(k):
        i, j = t + 1, (t + 1) % k + 1
        a = f"G{t + 1}"
        edges.append((i, j))
        send[i, a] = cap
        recv[j, a] = cap
        if mults[t] != 1.0:
            rate[i, j, a] = mults[t]
    return make_instance(k, edges, send, recv,
                         node_cap={i: cap for i in range(1, k + 1)}, multiplier=rate)


def two_node_swap(send_caps=(4, 5), recv_caps=(5, 4), node_caps=(3, 4)) -> Instance:
    """1 sends P to 2, 2 sends Q back. Each cap tuple is ``(node 1, node 2)``."""
    return make_instance(
        2, [(1, 2)],
        send={(1, "P"): send_caps[0], (2, "Q"): send_caps[1]},
        recv={(1, "Q"): recv_caps[0], (2, "P"): recv_caps[1]},
        node_cap={1: node_caps[0], 2: node_caps[1]},
    )
