"""Construction of the directed exchange network from an instance.

Every participant ``i`` is split into a receiving node ``i[R]`` and a sending
node ``i[S]`` joined by a throughput arc. Each wanted asset gets a
receive-asset node feeding ``i[R]``, each offered asset a send-asset node fed
by ``i[S]``, and send-asset nodes connect to matching receive-asset nodes of
neighbours through unbounded linking arcs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BuildError, ExportError
from .instance import Instance, validate

PARTICIPANT_R = "participant-R"
PARTICIPANT_S = "participant-S"
RECV_ASSET = "recv-asset"
SEND_ASSET = "send-asset"

THROUGHPUT = "throughput"
RECEIVE = "receive"
SEND = "send"
LINKING = "linking"


@dataclass(frozen=True)
class NetNode:
    index: int
    kind: str
    owner: int
    asset: Optional[str] = None


@dataclass(frozen=True)
class NetArc:
    tail: int
    head: int
    lower: int
    upper: Optional[int]  # None means unbounded
    kind: str
    owner: int
    asset: Optional[str] = None
    receiver: Optional[int] = None  # linking arcs only
    cost: float = 0.0
    multiplier: float = 1.0
    value: float = 1.0  # receive arcs: worth of one received unit


@dataclass(frozen=True)
class PruneEntry:
    kind: str
    node: int
    asset: Optional[str]
    reason: str

    def __str__(self):
        what = f"{self.kind} node {self.node}" + (f" asset {self.asset}" if self.asset else "")
        return f"removed {what}: {self.reason}"


@dataclass(frozen=True)
class PruneResult:
    participants: tuple[int, ...]
    send_sets: dict[int, tuple[str, ...]]
    recv_sets: dict[int, tuple[str, ...]]
    log: tuple[PruneEntry, ...]


@dataclass(frozen=True)
class ExchangeNetwork:
    nodes: tuple[NetNode, ...]
    arcs: tuple[NetArc, ...]
    n: int
    participants: tuple[int, ...]
    send_sets: dict[int, tuple[str, ...]]
    recv_sets: dict[int, tuple[str, ...]]
    prune_log: tuple[PruneEntry, ...] = ()
    index: dict = field(default_factory=dict, compare=False, repr=False)

    def node_id(self, kind: str, owner: int, asset: Optional[str] = None) -> int:
        return self.index[kind, owner, asset]

    def degrees(self) -> tuple[np.ndarray, np.ndarray]:
        """(indegree, outdegree) arrays indexed by node index (slot 0 unused)."""
        indeg = np.zeros(len(self.nodes) + 1, dtype=np.int64)
        outdeg = np.zeros_like(indeg)
        for a in self.arcs:
            outdeg[a.tail] += 1
            indeg[a.head] += 1
        return indeg, outdeg

    def linking_arcs(self):
        return [a for a in self.arcs if a.kind == LINKING]


def prune_sets(instance: Instance, rng: np.random.Generator | None = None) -> PruneResult:
    """Drop offers nobody can take, wants nobody can fill, and participants
    left with an empty side, until nothing changes.

    With ``rng`` the removals are applied one at a time in random order; the
    fixed point does not depend on the order.
    """
    send = {i: set(instance.send_sets[i]) for i in instance.nodes}
    recv = {i: set(instance.recv_sets[i]) for i in instance.nodes}
    alive = set(instance.nodes)
    log: list[PruneEntry] = []

    def candidates():
        out = []
        for i in sorted(alive):
            nb = [j for j in instance.neighbors[i] if j in alive]
            for a in sorted(send[i]):
                if not any(a in recv[j] for j in nb):
                    out.append((SEND_ASSET, i, a))
            for a in sorted(recv[i]):
                if not any(a in send[j] for j in nb):
                    out.append((RECV_ASSET, i, a))
            if not send[i] or not recv[i]:
                out.append((PARTICIPANT_R, i, None))
        return out

    def still_valid(c):
        kind, i, a = c
        if i not in alive:
            return False
        nb = [j for j in instance.neighbors[i] if j in alive]
        if kind == SEND_ASSET:
            return a in send[i] and not any(a in recv[j] for j in nb)
        if kind == RECV_ASSET:
            return a in recv[i] and not any(a in send[j] for j in nb)
        return not send[i] or not recv[i]

    def apply(c):
        kind, i, a = c
        if kind == SEND_ASSET:
            send[i].discard(a)
            log.append(PruneEntry(SEND_ASSET, i, a, "no neighbor wants this asset"))
        elif kind == RECV_ASSET:
            recv[i].discard(a)
            log.append(PruneEntry(RECV_ASSET, i, a, "no neighbor offers this asset"))
        else:
            side = "send" if not send[i] else "receive"
            for b in sorted(send[i]):
                log.append(PruneEntry(SEND_ASSET, i, b, "participant removed"))
            for b in sorted(recv[i]):
                log.append(PruneEntry(RECV_ASSET, i, b, "participant removed"))
            send[i].clear()
            recv[i].clear()
            alive.discard(i)
            log.append(PruneEntry(PARTICIPANT_R, i, None, f"empty {side} set"))
            log.append(PruneEntry(PARTICIPANT_S, i, None, f"empty {side} set"))

    while True:
        cands = candidates()
        if not cands:
            break
        if rng is None:
            for c in cands:
                if still_valid(c):
                    apply(c)
        else:
            apply(cands[int(rng.integers(len(cands)))])

    parts = tuple(sorted(alive))
    return PruneResult(
        parts,
        {i: tuple(sorted(send[i])) for i in parts},
        {i: tuple(sorted(recv[i])) for i in parts},
        tuple(log),
    )


def build_network(instance: Instance, prune: bool = False) -> ExchangeNetwork:
    """Build the exchange network in the generation loop order.

    Participant ``i`` at position ``p`` among the retained participants gets
    index ``p`` for ``i[R]`` and ``p + n`` for ``i[S]``; without pruning
    ``p == i``. Asset nodes follow: send-asset nodes first, then
    receive-asset nodes.
    """
    res = validate(instance)
    if not res.ok:
        raise BuildError("invalid instance: " + "; ".join(res.messages()))

    if prune:
        pr = prune_sets(instance)
        parts, send_sets, recv_sets, log = pr.participants, pr.send_sets, pr.recv_sets, pr.log
    else:
        parts = tuple(instance.nodes)
        send_sets = {i: instance.send_sets[i] for i in parts}
        recv_sets = {i: instance.recv_sets[i] for i in parts}
        log = ()
    n = len(parts)
    keep = set(parts)
    pos = {i: p for p, i in enumerate(parts, start=1)}

    nodes: list[NetNode] = []
    arcs: list[NetArc] = []
    index: dict = {}

    def add_node(k, kind, owner, asset=None):
        nodes.append(NetNode(k, kind, owner, asset))
        index[kind, owner, asset] = k

    for i in parts:
        add_node(pos[i], PARTICIPANT_R, i)
    for i in parts:
        add_node(pos[i] + n, PARTICIPANT_S, i)
    for i in parts:
        cap = instance.node_cap[i]
        arcs.append(NetArc(pos[i], pos[i] + n, cap.lower, cap.upper, THROUGHPUT, i))

    k = 2 * n
    for i in parts:
        for a in send_sets[i]:
            k += 1
            add_node(k, SEND_ASSET, i, a)
            b = instance.send_spec[i, a]
            arcs.append(NetArc(pos[i] + n, k, b.lower, b.upper, SEND, i, a))
    for j in parts:
        for a in recv_sets[j]:
            k += 1
            add_node(k, RECV_ASSET, j, a)
            b = instance.recv_spec[j, a]
            arcs.append(NetArc(k, pos[j], b.lower, b.upper, RECEIVE, j, a,
                               value=instance.value(j, a)))
    for i in parts:
        for a in send_sets[i]:
            tail = index[SEND_ASSET, i, a]
            for j in sorted(instance.neighbors[i] & keep):
                if a in recv_sets[j]:
                    arcs.append(NetArc(tail, index[RECV_ASSET, j, a], 0, None, LINKING, i, a,
                                       receiver=j, multiplier=instance.rate(i, j, a)))

    nodes.sort(key=lambda v: v.index)
    return ExchangeNetwork(tuple(nodes), tuple(arcs), n, parts, send_sets, recv_sets,
                           tuple(log), index)


def compute_size(instance: Instance) -> tuple[int, int]:
    """Closed-form node and arc counts of the unpruned network."""
    n = instance.node_count
    sides = sum(len(instance.recv_sets[i]) + len(instance.send_sets[i]) for i in instance.nodes)
    links = sum(
        len(set(instance.send_sets[i]) & set(instance.recv_sets[j]))
        for i in instance.nodes
        for j in instance.neighbors[i]
    )
    return 2 * n + sides, n + sides + links


def degree_law_violations(network: ExchangeNetwork) -> list[str]:
    indeg, outdeg = network.degrees()
    bad = []
    for v in network.nodes:
        k = v.index
        if v.kind == SEND_ASSET and indeg[k] != 1:
            bad.append(f"send-asset node {k} has indegree {indeg[k]}")
        elif v.kind == RECV_ASSET and outdeg[k] != 1:
            bad.append(f"recv-asset node {k} has outdegree {outdeg[k]}")
        elif v.kind == PARTICIPANT_R and outdeg[k] != 1:
            bad.append(f"participant-R node {k} has outdegree {outdeg[k]}")
        elif v.kind == PARTICIPANT_S and indeg[k] != 1:
            bad.append(f"participant-S node {k} has indegree {indeg[k]}")
    return bad


def _cost_text(x: float) -> str:
    x = float(x)
    if x == 0:
        return "0"
    return str(int(x)) if x.is_integer() else repr(x)


def arc_costs(network: ExchangeNetwork, objective: str = "unit") -> list[float]:
    """Minimisation costs: -1 per linking unit, or -value per received unit."""
    if objective not in ("unit", "weighted"):
        raise ExportError(f"unknown objective {objective!r}")
    out = []
    for a in network.arcs:
        if objective == "unit":
            out.append(-1.0 if a.kind == LINKING else 0.0)
        else:
            out.append(-a.value if a.kind == RECEIVE else 0.0)
    return out


def export_dimacs(network: ExchangeNetwork, objective: str = "unit") -> str:
    """DIMACS min-cost circulation text for the (basic, lower-bound free) network."""
    lb = [a for a in network.arcs if a.lower != 0]
    if lb:
        a = lb[0]
        raise ExportError(
            f"nonzero lower bound {a.lower} on {a.kind} arc of node {a.owner}; "
            "exact export covers the basic model only, use the two-phase solver"
        )
    costs = arc_costs(network, objective)
    big = sum(a.upper for a in network.arcs if a.kind == RECEIVE)
    lines = [f"p min {len(network.nodes)} {len(network.arcs)}"]
    for a, c in zip(network.arcs, costs):
        cap = big if a.upper is None else a.upper
        lines.append(f"a {a.tail} {a.head} {a.lower} {cap} {_cost_text(c)}")
    return "\n".join(lines) + "\n"


def dump_arcs(network: ExchangeNetwork) -> str:
    """One arc per line, for eyeballing a network."""
    lines = []
    for a in network.arcs:
        up = "inf" if a.upper is None else str(a.upper)
        who = f"{a.owner}->{a.receiver}" if a.kind == LINKING else str(a.owner)
        lines.append(
            f"{a.kind:<10} {a.tail:>5} -> {a.head:<5} owner={who} asset={a.asset or '-'} "
            f"bounds=[{a.lower},{up}] mult={a.multiplier:g}"
        )
    return "\n".join(lines) + "\n"
