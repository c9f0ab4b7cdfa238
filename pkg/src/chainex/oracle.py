"""Independent checks for exchange solutions.

* ``verify_solution`` re-derives every constraint from the instance and the
  solution's flow table.
* ``solve_exact`` computes the true optimum of the basic network model by
  negative-cycle canceling.
* ``enumerate_tiny`` brute-forces tiny instances as a check on the check.
* ``decompose_cycles`` splits a balanced flow table into exchange cycles.

Nothing here imports the chaining solver.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _cancel
from .errors import DecompositionError, OracleError
from .instance import Instance
from .netform import LINKING, RECEIVE, SEND, THROUGHPUT, ExchangeNetwork
from .solution import ExchangeCycle, Link, Solution

FAMILIES = (
    "admissibility",
    "nonnegativity",
    "receive_caps",
    "send_caps",
    "node_caps",
    "balance",
    "integrality",
    "aggregate",
)


@dataclass(frozen=True)
class FamilyResult:
    passed: bool
    witness: Optional[str] = None


@dataclass
class VerificationReport:
    mode: str
    families: dict[str, FamilyResult] = field(default_factory=dict)
    info: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(f.passed for f in self.families.values())

    def failures(self) -> dict[str, str]:
        return {k: f.witness for k, f in self.families.items() if not f.passed}

    def render(self) -> str:
        lines = [f"verification ({self.mode} mode)"]
        for name in FAMILIES:
            f = self.families[name]
            lines.append(f"  {name:<14} {'PASS' if f.passed else 'FAIL'}"
                         + (f"  {f.witness}" if f.witness else ""))
        for note in self.info:
            lines.append(f"  info: {note}")
        lines.append("overall: " + ("PASS" if self.ok else "FAIL"))
        return "\n".join(lines) + "\n"


def verify_solution(instance: Instance, solution: Solution, mode: Optional[str] = None
                    ) -> VerificationReport:
    mode = mode or ("generalized" if solution.generalized else "basic")
    gen = mode == "generalized"
    report = VerificationReport(mode)
    fam = report.families

    def rate(i, j, a):
        return instance.multiplier.get((i, j, a), 1.0) if gen else 1.0

    def tol(cap):
        return 1e-9 * max(1.0, abs(cap)) if gen else 0.0

    agg = {k: float(v) for k, v in solution.aggregate.items()}
    n = instance.node_count

    bad = None
    for (i, j, a) in sorted(agg):
        ok = (
            1 <= i <= n and 1 <= j <= n
            and j in instance.neighbors.get(i, ())
            and (i, a) in instance.send_spec
            and (j, a) in instance.recv_spec
        )
        if not ok:
            bad = f"({i},{j},{a})"
            break
    fam["admissibility"] = FamilyResult(bad is None, bad)

    neg = [k for k, q in sorted(agg.items()) if q < 0]
    fam["nonnegativity"] = FamilyResult(not neg, f"{neg[0]} = {agg[neg[0]]}" if neg else None)

    recv_units = defaultdict(float)
    send_units = defaultdict(float)
    node_in = defaultdict(float)
    node_out = defaultdict(float)
    for (i, j, a), q in agg.items():
        got = q * rate(i, j, a)
        recv_units[j, a] += got
        send_units[i, a] += q
        node_in[j] += got
        node_out[i] += q

    def cap_family(units, spec, label):
        for key, u in sorted(units.items()):
            b = spec.get(key)
            limit = b.upper if b is not None else 0
            if u > limit + tol(limit):
                return FamilyResult(False, f"{label} {key}: {u:g} > {limit}")
        return FamilyResult(True)

    fam["receive_caps"] = cap_family(recv_units, instance.recv_spec, "receive")
    fam["send_caps"] = cap_family(send_units, instance.send_spec, "send")
    node_caps = {i: b for i, b in instance.node_cap.items()}
    fam["node_caps"] = cap_family(node_in, node_caps, "node")
    if fam["node_caps"].passed and not gen:
        fam["node_caps"] = cap_family(node_out, node_caps, "node (sent)")

    if not gen:
        bad = None
        for i in range(1, n + 1):
            if node_in.get(i, 0.0) != node_out.get(i, 0.0):
                bad = f"node {i}: received {node_in.get(i, 0.0):g}, sent {node_out.get(i, 0.0):g}"
                break
        fam["balance"] = FamilyResult(bad is None, bad)
        frac = [k for k, q in sorted(agg.items()) if not float(q).is_integer()]
        fam["integrality"] = FamilyResult(not frac, f"{frac[0]} = {agg[frac[0]]}" if frac else None)
    else:
        bad = None
        for c in solution.cycles:
            L = len(c.links)
            for t in range(L - 1):
                lk, nxt = c.links[t], c.links[t + 1]
                got = float(lk.qty) * rate(lk.sender, lk.receiver, lk.asset)
                if abs(got - float(nxt.qty)) > tol(got):
                    bad = f"cycle at root {c.root}: node {lk.receiver} gets {got:g}, sends {nxt.qty}"
                    break
            if bad:
                break
            if L:
                first, back = c.links[0], c.links[-1]
                got = float(back.qty) * rate(back.sender, back.receiver, back.asset)
                if abs(got - float(first.qty)) > tol(got):
                    report.info.append(
                        f"root {c.root} sends {float(first.qty):.6g}, receives {got:.6g}"
                    )
        fam["balance"] = FamilyResult(bad is None, bad)
        fam["integrality"] = FamilyResult(True, None)

    summed = defaultdict(float)
    bad = None
    for c in solution.cycles:
        L = len(c.links)
        if L < 2 or c.links[0].sender != c.root or any(
            c.links[t].receiver != c.links[(t + 1) % L].sender for t in range(L)
        ):
            bad = f"cycle at root {c.root} is not a closed chain"
            break
        for lk in c.links:
            summed[lk.sender, lk.receiver, lk.asset] += float(lk.qty)
    if bad is None:
        for k in sorted(set(summed) | set(agg)):
            a, b = summed.get(k, 0.0), agg.get(k, 0.0)
            if abs(a - b) > tol(b):
                bad = f"{k}: cycles sum {a:g}, aggregate {b:g}"
                break
    fam["aggregate"] = FamilyResult(bad is None, bad)
    return report


@dataclass(frozen=True)
class ExactResult:
    flow: dict[tuple[int, int, str], float]
    value: float
    objective: str
    canceled: int = 0


def solve_exact(network: ExchangeNetwork, instance: Instance, objective: str = "unit"
                ) -> ExactResult:
    """Exact optimum of the basic model over ``network``.

    Capacities are taken from ``instance`` rather than from the network's
    arcs. Objective values are receiver-valued in weighted mode.
    """
    if objective not in ("unit", "weighted"):
        raise OracleError(f"unknown objective {objective!r}")
    if instance.has_lower_bounds():
        raise OracleError("exact oracle covers upper bounds only; use the two-phase heuristic")

    arcs = network.arcs
    m = len(arcs)
    tail = np.array([a.tail - 1 for a in arcs], dtype=np.int64)
    head = np.array([a.head - 1 for a in arcs], dtype=np.int64)
    cap = np.zeros(m)
    cost = np.zeros(m)
    big = float(sum(instance.recv_spec[a.owner, a.asset].upper for a in arcs if a.kind == RECEIVE))
    for k, a in enumerate(arcs):
        if a.kind == THROUGHPUT:
            cap[k] = instance.node_cap[a.owner].upper
        elif a.kind == SEND:
            cap[k] = instance.send_spec[a.owner, a.asset].upper
        elif a.kind == RECEIVE:
            cap[k] = instance.recv_spec[a.owner, a.asset].upper
            if objective == "weighted":
                cost[k] = -instance.recv_value.get((a.owner, a.asset), 1.0)
        else:
            cap[k] = big
            if objective == "unit":
                cost[k] = -1.0
    tol = 1e-12 if objective == "unit" else 1e-9
    flow, canceled = _cancel.cancel_cycles(len(network.nodes), tail, head, cap, cost, tol)

    table = {}
    for k, a in enumerate(arcs):
        if a.kind == LINKING and flow[k] > 0:
            table[a.owner, a.receiver, a.asset] = _as_num(flow[k])
    value = -float(np.dot(cost, flow))
    return ExactResult(table, _as_num(value), objective, int(canceled))


def _as_num(x):
    x = float(x)
    return int(x) if x.is_integer() else x


TINY_NODES = 4
TINY_CAP = 2
TINY_ASSETS = 3


def enumerate_tiny(instance: Instance, objective: str = "unit") -> float:
    """Brute-force optimum over every integer flow table (tiny instances only)."""
    caps = [b.upper for b in instance.send_spec.values()]
    caps += [b.upper for b in instance.recv_spec.values()]
    caps += [b.upper for b in instance.node_cap.values()]
    if (instance.node_count > TINY_NODES or len(instance.assets) > TINY_ASSETS
            or any(c > TINY_CAP for c in caps)):
        raise OracleError(
            f"enumeration refused: needs n <= {TINY_NODES}, |A| <= {TINY_ASSETS}, "
            f"all caps <= {TINY_CAP}"
        )
    if instance.has_lower_bounds():
        raise OracleError("enumeration covers upper bounds only")

    triples = [
        (i, j, a)
        for (i, a) in sorted(instance.send_spec)
        for j in sorted(instance.neighbors[i])
        if (j, a) in instance.recv_spec
    ]
    if not triples:
        return 0
    ranges = [min(instance.send_spec[i, a].upper, instance.recv_spec[j, a].upper)
              for i, j, a in triples]
    grids = np.meshgrid(*[np.arange(r + 1) for r in ranges], indexing="ij")
    X = np.stack([g.ravel() for g in grids], axis=1)

    ok = np.ones(X.shape[0], dtype=bool)
    n = instance.node_count
    inflow = np.zeros((X.shape[0], n + 1), dtype=np.int64)
    outflow = np.zeros_like(inflow)
    recv_tot = defaultdict(lambda: 0)
    send_tot = defaultdict(lambda: 0)
    for t, (i, j, a) in enumerate(triples):
        inflow[:, j] += X[:, t]
        outflow[:, i] += X[:, t]
        recv_tot[j, a] = recv_tot[j, a] + X[:, t]
        send_tot[i, a] = send_tot[i, a] + X[:, t]
    for key, tot in recv_tot.items():
        ok &= tot <= instance.recv_spec[key].upper
    for key, tot in send_tot.items():
        ok &= tot <= instance.send_spec[key].upper
    for i in range(1, n + 1):
        ok &= inflow[:, i] == outflow[:, i]
        ok &= inflow[:, i] <= instance.node_cap[i].upper

    if objective == "unit":
        w = np.ones(len(triples))
    else:
        w = np.array([instance.recv_value.get((j, a), 1.0) for i, j, a in triples])
    vals = X @ w
    best = float(vals[ok].max()) if ok.any() else 0.0
    return _as_num(best)


def decompose_cycles(flow: dict[tuple[int, int, str], float],
                     network: ExchangeNetwork | None = None) -> list[ExchangeCycle]:
    """Greedy cycle decomposition of a balanced flow table.

    Starts from the lowest-numbered node with outflow and follows, at each
    node, the positive link with the lowest asset then lowest receiver until
    a node repeats.
    """
    rem = {k: float(v) for k, v in flow.items() if float(v) != 0}
    if any(v < 0 for v in rem.values()):
        raise DecompositionError("negative flow")
    if network is not None:
        arcs = {(a.owner, a.receiver, a.asset) for a in network.arcs if a.kind == LINKING}
        missing = sorted(set(rem) - arcs)
        if missing:
            raise DecompositionError(f"flow on a link absent from the network: {missing[0]}")
    bal = defaultdict(float)
    for (i, j, _), q in rem.items():
        bal[i] -= q
        bal[j] += q
    off = sorted(k for k, v in bal.items() if abs(v) > 1e-9)
    if off:
        raise DecompositionError(f"unbalanced flow at node {off[0]}")

    out = []
    while rem:
        start = min(i for i, _, _ in rem)
        pos = {start: 0}
        path: list[tuple[int, int, str]] = []
        u = start
        while True:
            i, j, a = min((k for k in rem if k[0] == u), key=lambda k: (k[2], k[1]))
            path.append((i, j, a))
            if j in pos:
                cyc = path[pos[j]:]
                break
            pos[j] = len(path)
            u = j
        q = min(rem[k] for k in cyc)
        for k in cyc:
            rem[k] -= q
            if rem[k] <= 1e-12:
                del rem[k]
        qn = _as_num(q)
        out.append(ExchangeCycle(cyc[0][0], tuple(Link(i, j, a, qn) for i, j, a in cyc), qn))
    return out
