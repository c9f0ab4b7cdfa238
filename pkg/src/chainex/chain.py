"""Combinatorial chaining: locate mutually beneficial exchange cycles and push
flow around them until no open participant can close another cycle.

The per-step functions here (``select_root``, ``forward_scan``,
``reverse_scan``, ``breakthrough_*``) drive the array kernels one step at a
time; ``solve`` runs the whole main routine inside a single kernel call.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping, Optional

import numpy as np

from . import _chain_kernels as K
from .errors import ConfigError, InputError
from .instance import Instance, validate
from .netform import prune_sets
from .solution import ExchangeCycle, Link, Solution, build_solution

MODES = ("forward", "reverse-forward")
POLICIES = {"fifo": K.FIFO, "priority": K.PRIORITY, "random": K.RANDOM}


@dataclass(frozen=True)
class Smoothing:
    self_weight: float = 0.7
    neighbor_weight: float = 0.3
    rounds: int = 1

    def check(self):
        if not self.self_weight > self.neighbor_weight >= 0:
            raise ConfigError("smoothing needs self_weight > neighbor_weight >= 0")
        if self.rounds < 0:
            raise ConfigError("smoothing rounds must be >= 0")


@dataclass(frozen=True)
class SolveConfig:
    mode: str = "forward"
    policy: str = "fifo"
    phases: int = 1
    generalized: bool = False
    epsilon: float = 1e-9
    seed: int = 0
    smoothing: Optional[Smoothing] = None
    phase1_policy: Optional[str] = None  # defaults to ``policy``

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        for p in (self.policy, self.phase1_policy or self.policy):
            if p not in POLICIES:
                raise ConfigError(f"policy must be one of {tuple(POLICIES)}, got {p!r}")
        if self.phases not in (1, 2):
            raise ConfigError("phases must be 1 or 2")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.smoothing is not None:
            self.smoothing.check()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["phases"] = "two" if self.phases == 2 else "one"
        return d


@dataclass(frozen=True)
class ScanOutcome:
    breakthrough: Optional[int]  # node id closing the cycle, None when exhausted
    visited: tuple[int, ...]

    @property
    def exhausted(self) -> bool:
        return self.breakthrough is None


def smooth_priorities(
    priority: Mapping[int, float],
    neighbors: Mapping[int, frozenset[int]],
    self_weight: float,
    neighbor_weight: float,
    rounds: int = 1,
) -> dict[int, float]:
    """Blend each node's priority with the mean priority of its neighbours.

    One round maps ``p(i) -> w0*p(i) + w1*mean(p(j) for j in N_i)``; an
    isolated node contributes a neighbour mean of 0. Only non-negativity is
    checked here; ``SolveConfig`` additionally requires ``w0 > w1``.
    """
    if self_weight < 0 or neighbor_weight < 0 or rounds < 0:
        raise ConfigError("smoothing weights and rounds must be non-negative")
    nodes = sorted(set(priority) | set(neighbors))
    p = {i: float(priority.get(i, 0.0)) for i in nodes}
    for _ in range(rounds):
        nxt = {}
        for i in nodes:
            nb = neighbors.get(i, ())
            mean = sum(p.get(j, 0.0) for j in nb) / len(nb) if nb else 0.0
            nxt[i] = self_weight * p[i] + neighbor_weight * mean
        p = nxt
    return p


def _splitmix64(seed: int) -> int:
    z = (seed + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    z ^= z >> 31
    return z or 0x2545F4914F6CDD1D


class ChainState:
    """Working arrays of one solve. Tables are keyed by participant and by
    (participant, asset) only; linking arcs are never stored individually
    except for their multipliers in generalized mode."""

    def __init__(self, instance: Instance, config: SolveConfig):
        res = validate(instance)
        if not res.ok:
            raise InputError("invalid instance: " + "; ".join(res.messages()))
        self.instance = instance
        self.config = config
        self.eps = float(config.epsilon) if config.generalized else 0.0
        self.phase1 = False

        n = instance.node_count
        self.assets = list(instance.assets)
        aidx = {a: k for k, a in enumerate(self.assets)}
        m = len(self.assets)
        pr = prune_sets(instance)
        alive = set(pr.participants)

        nbrs = [sorted(instance.neighbors[i]) for i in instance.nodes]
        nbr_ptr = np.zeros(n + 1, dtype=np.int64)
        nbr_ptr[1:] = np.cumsum([len(x) for x in nbrs])
        nbr_idx = np.array([j - 1 for x in nbrs for j in x], dtype=np.int64)

        self.send_keys: list[tuple[int, str]] = []
        self.recv_keys: list[tuple[int, str]] = []
        send_ptr = np.zeros(n + 1, dtype=np.int64)
        recv_ptr = np.zeros(n + 1, dtype=np.int64)
        for i in instance.nodes:
            for a in pr.send_sets.get(i, ()):
                self.send_keys.append((i, a))
            for a in pr.recv_sets.get(i, ()):
                self.recv_keys.append((i, a))
            send_ptr[i] = len(self.send_keys)
            recv_ptr[i] = len(self.recv_keys)
        ns, nr = len(self.send_keys), len(self.recv_keys)

        send_asset = np.array([aidx[a] for _, a in self.send_keys], dtype=np.int64)
        recv_asset = np.array([aidx[a] for _, a in self.recv_keys], dtype=np.int64)
        send_cap = np.array([instance.send_spec[k].upper for k in self.send_keys], dtype=np.float64)
        recv_cap = np.array([instance.recv_spec[k].upper for k in self.recv_keys], dtype=np.float64)
        recv_lower = np.array([instance.recv_spec[k].lower for k in self.recv_keys], dtype=np.float64)
        send_slot = np.full((n, m), -1, dtype=np.int64)
        recv_slot = np.full((n, m), -1, dtype=np.int64)
        for s, (i, a) in enumerate(self.send_keys):
            send_slot[i - 1, aidx[a]] = s
        for s, (i, a) in enumerate(self.recv_keys):
            recv_slot[i - 1, aidx[a]] = s
        node_cap = np.array([instance.node_cap[i].upper for i in instance.nodes], dtype=np.float64)

        deg = np.diff(nbr_ptr)
        link_ptr = np.zeros(ns, dtype=np.int64)
        mults = []
        for s, (i, a) in enumerate(self.send_keys):
            link_ptr[s] = len(mults)
            for j in nbrs[i - 1]:
                mults.append(instance.rate(i, j, a) if config.generalized else 1.0)
        link_mult = np.array(mults, dtype=np.float64)
        assert link_mult.size == int(sum(deg[i - 1] for i, _ in self.send_keys))

        prio = dict(instance.priority)
        if config.smoothing is not None and config.smoothing.rounds > 0:
            sm = config.smoothing
            prio = smooth_priorities(prio, instance.neighbors, sm.self_weight,
                                     sm.neighbor_weight, sm.rounds)
        priority = np.array([prio.get(i, 0.0) for i in instance.nodes], dtype=np.float64)
        self.priority = priority

        self.net = (nbr_ptr, nbr_idx, send_ptr, send_asset, send_cap, recv_ptr, recv_asset,
                    recv_cap, recv_lower, recv_slot, send_slot, node_cap, link_ptr,
                    link_mult, priority)

        node_open = np.array([(i in alive) and node_cap[i - 1] > self.eps for i in instance.nodes],
                             dtype=np.bool_)
        self.st = (
            np.zeros(ns), np.zeros(nr), np.zeros(n),
            send_cap > self.eps, recv_cap > self.eps, node_open, node_open.copy(),
            *(np.full(n, -1, dtype=np.int64) for _ in range(8)),
            np.zeros(n, dtype=np.int64),
            np.array([_splitmix64(int(config.seed))], dtype=np.uint64),
        )

    # ---- views -------------------------------------------------------------

    @property
    def open_set(self) -> set[int]:
        return {int(i) + 1 for i in np.flatnonzero(self.st[5])}

    def _table(self, keys, arr):
        return {k: _clean(v) for k, v in zip(keys, arr)}

    @property
    def flow_send(self) -> dict:
        return self._table(self.send_keys, self.st[0])

    @property
    def flow_recv(self) -> dict:
        return self._table(self.recv_keys, self.st[1])

    @property
    def flow_node(self) -> dict:
        return {i: _clean(v) for i, v in zip(self.instance.nodes, self.st[2])}

    @property
    def residual_send(self) -> dict[int, set[str]]:
        return self._residual(self.send_keys, self.st[3])

    @property
    def residual_recv(self) -> dict[int, set[str]]:
        return self._residual(self.recv_keys, self.st[4])

    def _residual(self, keys, flags):
        out = {i: set() for i in self.instance.nodes}
        for (i, a), ok in zip(keys, flags):
            if ok:
                out[i].add(a)
        return out

    @property
    def pred_s(self) -> dict[int, Optional[int]]:
        return {i: (int(p) + 1 if p >= 0 else None) for i, p in zip(self.instance.nodes, self.st[7])}

    @property
    def asset_s(self) -> dict[int, Optional[str]]:
        return {i: (self.assets[self.net[3][s]] if s >= 0 else None)
                for i, s in zip(self.instance.nodes, self.st[9])}

    @property
    def pred_r(self) -> dict[int, Optional[int]]:
        return {i: (int(p) + 1 if p >= 0 else None) for i, p in zip(self.instance.nodes, self.st[11])}

    @property
    def asset_r(self) -> dict[int, Optional[str]]:
        return {i: (self.assets[self.net[6][s]] if s >= 0 else None)
                for i, s in zip(self.instance.nodes, self.st[14])}

    # ---- mutation helpers --------------------------------------------------

    def reset_predecessors(self) -> None:
        K.reset_preds(self.st)

    def close_recv(self, node: int, asset: str) -> None:
        """Saturate a receive slot (testing and what-if helper)."""
        s = self.recv_keys.index((node, asset))
        self.st[1][s] = self.net[7][s]
        self.st[4][s] = False

    def remove_from_open(self, node: int) -> None:
        self.st[5][node - 1] = False

    def copy(self) -> "ChainState":
        other = object.__new__(ChainState)
        other.__dict__.update(self.__dict__)
        other.st = tuple(a.copy() for a in self.st)
        return other


def _clean(v):
    v = float(v)
    return int(v) if v.is_integer() else v


def init_state(instance: Instance, config: SolveConfig | None = None) -> ChainState:
    return ChainState(instance, config or SolveConfig())


def _policy(state: ChainState, config: SolveConfig | None) -> int:
    cfg = config or state.config
    name = (cfg.phase1_policy or cfg.policy) if state.phase1 else cfg.policy
    return POLICIES[name]


def select_root(state: ChainState, config: SolveConfig | None = None) -> Optional[int]:
    r = K.select_root(state.net, state.st, _policy(state, config), state.phase1, state.eps)
    return None if r < 0 else int(r) + 1


def forward_scan(state: ChainState, root: int, config: SolveConfig | None = None) -> ScanOutcome:
    """One forward scan from ``root``; predecessors must already be reset.

    On exhaustion the caller decides what to do with the root.
    """
    cfg = config or state.config
    if root not in state.open_set:
        raise InputError(f"forward scan root {root} is not open")
    fertile = cfg.mode == "reverse-forward"
    j, pops = K.forward_scan(state.net, state.st, root - 1, _policy(state, cfg), fertile,
                             state.phase1, state.eps)
    visited = tuple(int(v) + 1 for v in state.st[15][:pops])
    return ScanOutcome(None if j < 0 else int(j) + 1, visited)


def reverse_scan(state: ChainState, root: int) -> bool:
    """Mark fertile neighbours of ``root``; False when there are none."""
    if root not in state.open_set:
        raise InputError(f"reverse scan root {root} is not open")
    return bool(K.reverse_scan(state.net, state.st, root - 1, state.phase1, state.eps))


def _augment(state: ChainState, root: int, j: int) -> ExchangeCycle:
    links = K.trace_cycle(state.st, root - 1, j - 1)
    delta, g = K.augment(state.net, state.st, links, state.phase1, state.eps)
    return _make_cycle(state, root, links, delta, g, 1)


def _make_cycle(state, root, links, delta, g, phase) -> ExchangeCycle:
    send_asset, link_mult = state.net[3], state.net[13]
    out = []
    for t in range(links.shape[0]):
        out.append(Link(int(links[t, 0]) + 1, int(links[t, 1]) + 1,
                        state.assets[send_asset[links[t, 2]]], _clean(delta * g[t]),
                        float(link_mult[links[t, 4]])))
    return ExchangeCycle(root, tuple(out), _clean(delta), float(g[-1]), phase)


def breakthrough_basic(state: ChainState, root: int) -> ExchangeCycle:
    """Augment along the predecessor chain that returned to ``root``."""
    if state.st[7][root - 1] < 0:
        raise InputError(f"root {root} has no forward predecessor")
    return _augment(state, root, root)


def breakthrough_fertile(state: ChainState, root: int, j: int) -> ExchangeCycle:
    """Augment along root -> ... -> j plus the closing link j -> root."""
    if state.st[7][j - 1] < 0 or state.st[11][j - 1] != root - 1:
        raise InputError(f"node {j} is not a reached fertile node of root {root}")
    return _augment(state, root, j)


def breakthrough_generalized(state: ChainState, root: int, j: Optional[int] = None) -> ExchangeCycle:
    """Augment with arc multipliers: the root sends ``delta`` and link ``t``
    carries ``delta`` times the product of the multipliers before it."""
    if not state.config.generalized:
        raise ConfigError("generalized breakthrough needs a generalized-mode state")
    if j is None or j == root:
        return breakthrough_basic(state, root)
    return breakthrough_fertile(state, root, j)


STAT_NAMES = ("iterations", "breakthroughs", "failed_scans", "scanned_nodes",
              "phase1_breakthroughs", "phase1_iterations")


def solve_with_state(instance: Instance, config: SolveConfig | None = None
                     ) -> tuple[Solution, ChainState]:
    cfg = config or SolveConfig()
    state = ChainState(instance, cfg)
    stats, cyc_i, cyc_f, lk_i, lk_f = K.run_chain(
        state.net, state.st, cfg.mode == "reverse-forward",
        POLICIES[cfg.phase1_policy or cfg.policy], POLICIES[cfg.policy],
        cfg.phases == 2, state.eps,
    )
    cycles = []
    pos = 0
    mult = {}
    if cfg.generalized:
        mult = instance.multiplier
    for c in range(cyc_i.shape[0]):
        L = int(cyc_i[c, 1])
        links = []
        for t in range(pos, pos + L):
            i, j = int(lk_i[t, 0]) + 1, int(lk_i[t, 1]) + 1
            a = state.assets[lk_i[t, 2]]
            links.append(Link(i, j, a, _clean(lk_f[t, 0]), mult.get((i, j, a), 1.0)))
        pos += L
        phase = int(cyc_i[c, 2]) if cfg.phases == 2 else 1
        cycles.append(ExchangeCycle(int(cyc_i[c, 0]) + 1, tuple(links), _clean(cyc_f[c, 0]),
                                    float(cyc_f[c, 1]), phase))
    stats_d = {k: int(v) for k, v in zip(STAT_NAMES, stats)}
    return extract_solution(state, cycles, stats_d), state


def solve(instance: Instance, config: SolveConfig | None = None) -> Solution:
    return solve_with_state(instance, config)[0]


def extract_solution(state: ChainState, cycles, stats=None) -> Solution:
    return build_solution(state.instance, cycles, stats, state.config.to_dict())


def open_breakthroughs(state: ChainState) -> list[int]:
    """Participants that could still close a cycle on the final flows.

    Every participant with spare throughput is treated as open (failed roots
    included) and scanned forward from; the state is left untouched.
    """
    probe = state.copy()
    node_cap, node_flow = probe.net[11], probe.st[2]
    live = np.zeros_like(probe.st[5])
    alive = set(prune_sets(state.instance).participants)
    for i in alive:
        live[i - 1] = node_cap[i - 1] - node_flow[i - 1] > state.eps
    hits = []
    for r in np.flatnonzero(live):
        probe.st[5][:] = live
        K.reset_preds(probe.st)
        j, _ = K.forward_scan(probe.net, probe.st, int(r), K.FIFO, False, False, state.eps)
        if j >= 0:
            hits.append(int(r) + 1)
    return hits
