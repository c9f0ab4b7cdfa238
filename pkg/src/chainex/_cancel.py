"""Negative-cycle canceling for min-cost circulation.

Kept separate from the chaining kernels so the exact oracle shares no code
with the heuristic it checks.
"""
import numpy as np

from ._jit import njit


@njit
def find_negative_cycle(nv, tail, head, cap, cost, flow, tol):
    """Bellman-Ford from a virtual source joined to every node at cost 0.

    Residual edge ``e < m`` is arc ``e`` forward, ``e >= m`` is arc ``e - m``
    backward. Returns the residual edge ids of one negative cycle, or an
    empty array.
    """
    m = tail.shape[0]
    dist = np.zeros(nv)
    pred = np.full(nv, -1, dtype=np.int64)
    last = -1
    for _ in range(nv + 1):
        last = -1
        for e in range(2 * m):
            if e < m:
                u = tail[e]
                v = head[e]
                r = cap[e] - flow[e]
                c = cost[e]
            else:
                u = head[e - m]
                v = tail[e - m]
                r = flow[e - m]
                c = -cost[e - m]
            if r <= tol:
                continue
            if dist[u] + c < dist[v] - tol:
                dist[v] = dist[u] + c
                pred[v] = e
                last = v
        if last < 0:
            return np.empty(0, dtype=np.int64)

    # walk back far enough to land on the cycle itself
    x = last
    for _ in range(nv):
        e = pred[x]
        if e < 0:
            raise RuntimeError("broken predecessor chain")
        x = tail[e] if e < m else head[e - m]
    out = np.empty(nv + 1, dtype=np.int64)
    k = 0
    y = x
    while True:
        e = pred[y]
        out[k] = e
        k += 1
        y = tail[e] if e < m else head[e - m]
        if y == x:
            break
    return out[:k][::-1].copy()


@njit
def cancel_cycles(nv, tail, head, cap, cost, tol):
    """Min-cost circulation from zero flow. Returns ``(flow, n_canceled)``."""
    m = tail.shape[0]
    flow = np.zeros(m)
    canceled = 0
    while True:
        cyc = find_negative_cycle(nv, tail, head, cap, cost, flow, tol)
        if cyc.shape[0] == 0:
            return flow, canceled
        bottleneck = np.inf
        total = 0.0
        for e in cyc:
            if e < m:
                bottleneck = min(bottleneck, cap[e] - flow[e])
                total += cost[e]
            else:
                bottleneck = min(bottleneck, flow[e - m])
                total -= cost[e - m]
        if not total < -tol:
            raise RuntimeError("predecessor cycle is not negative")
        for e in cyc:
            if e < m:
                flow[e] += bottleneck
            else:
                flow[e - m] -= bottleneck
        canceled += 1
