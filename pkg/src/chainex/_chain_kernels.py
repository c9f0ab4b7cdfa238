"""Array kernels for combinatorial chaining.

Participants are 0-based positions ``0..n-1``. Offers and wants live in CSR
"slots": ``send_ptr[i]:send_ptr[i+1]`` are participant ``i``'s send slots,
each with an asset index, capacity and running flow (same for receive
slots). A linking arc is addressed as ``link_ptr[send slot] + k`` where ``k``
is the receiver's position in the sender's sorted neighbour list.

``net`` (read only)::

    nbr_ptr, nbr_idx, send_ptr, send_asset, send_cap, recv_ptr, recv_asset,
    recv_cap, recv_lower, recv_slot, send_slot, node_cap, link_ptr,
    link_mult, priority

``st`` (mutated in place)::

    send_flow, recv_flow, node_flow, send_open, recv_open, node_open, cand,
    pred_s, pred_link, pred_sslot, pred_rslot, pred_r, rev_link, rev_sslot,
    rev_rslot, queue, rng

Open flags mirror the residual sets: a slot is open iff its residual exceeds
``eps``. ``cand`` marks participants still eligible as phase-1 roots.
"""
import numpy as np

from ._jit import njit

FIFO = 0
PRIORITY = 1
RANDOM = 2

# run_chain stats layout
ST_ITER = 0
ST_BREAK = 1
ST_FAIL = 2
ST_POPS = 3
ST_BREAK1 = 4
ST_ITER1 = 5
N_STATS = 6


@njit
def next_random(rng, k):
    """xorshift64 draw, uniform on ``0..k-1``."""
    x = rng[0]
    x ^= x << np.uint64(13)
    x ^= x >> np.uint64(7)
    x ^= x << np.uint64(17)
    rng[0] = x
    return np.int64(x % np.uint64(k))


@njit
def reset_preds(st):
    pred_s, pred_link, pred_sslot, pred_rslot = st[7], st[8], st[9], st[10]
    pred_r, rev_link, rev_sslot, rev_rslot = st[11], st[12], st[13], st[14]
    pred_s[:] = -1
    pred_link[:] = -1
    pred_sslot[:] = -1
    pred_rslot[:] = -1
    pred_r[:] = -1
    rev_link[:] = -1
    rev_sslot[:] = -1
    rev_rslot[:] = -1


@njit
def has_deficit(net, st, i, eps):
    recv_ptr, recv_lower = net[5], net[8]
    recv_flow, recv_open = st[1], st[4]
    for s in range(recv_ptr[i], recv_ptr[i + 1]):
        if recv_open[s] and recv_flow[s] < recv_lower[s] - eps:
            return True
    return False


@njit
def select_root(net, st, policy, phase1, eps):
    priority = net[14]
    node_open, cand, rng = st[5], st[6], st[16]
    n = node_open.shape[0]
    n_open = 0
    for i in range(n):
        if node_open[i]:
            n_open += 1
    if n_open <= 1:
        return -1
    best = -1
    n_cand = 0
    for i in range(n):
        if not node_open[i]:
            continue
        if phase1 and not (cand[i] and has_deficit(net, st, i, eps)):
            continue
        n_cand += 1
        if best < 0:
            best = i
            if policy == FIFO:
                break
        elif policy == PRIORITY and priority[i] > priority[best]:
            best = i
    if best < 0 or policy != RANDOM:
        return best
    r = next_random(rng, n_cand)
    for i in range(n):
        if not node_open[i]:
            continue
        if phase1 and not (cand[i] and has_deficit(net, st, i, eps)):
            continue
        if r == 0:
            return i
        r -= 1
    return -1


@njit
def reverse_scan(net, st, root, phase1, eps):
    """Mark every open neighbour able to send ``root`` a wanted asset."""
    nbr_ptr, nbr_idx = net[0], net[1]
    recv_ptr, recv_asset, recv_lower = net[5], net[6], net[8]
    send_slot, link_ptr = net[10], net[12]
    recv_flow, send_open, recv_open, node_open = st[1], st[3], st[4], st[5]
    pred_r, rev_link, rev_sslot, rev_rslot = st[11], st[12], st[13], st[14]
    find = False
    for s in range(recv_ptr[root], recv_ptr[root + 1]):
        if not recv_open[s]:
            continue
        if phase1 and not recv_flow[s] < recv_lower[s] - eps:
            continue
        a = recv_asset[s]
        for k in range(nbr_ptr[root], nbr_ptr[root + 1]):
            j = nbr_idx[k]
            if not node_open[j]:
                continue
            ss = send_slot[j, a]
            if ss < 0 or not send_open[ss]:
                continue
            pos = np.searchsorted(nbr_idx[nbr_ptr[j]:nbr_ptr[j + 1]], root)
            pred_r[j] = root
            rev_sslot[j] = ss
            rev_rslot[j] = s
            rev_link[j] = link_ptr[ss] + pos
            find = True
    return find


@njit
def forward_scan(net, st, root, policy, fertile, phase1, eps):
    """Grow the predecessor tree from ``root``.

    Returns ``(j, pops)``: ``j`` closes a cycle (``root`` itself, or a fertile
    node when ``fertile``), or -1 when the scan set empties.
    ``queue[:pops]`` holds the nodes in the order they were scanned.
    """
    nbr_ptr, nbr_idx = net[0], net[1]
    send_ptr, send_asset = net[2], net[3]
    recv_lower, recv_slot, link_ptr, priority = net[8], net[9], net[12], net[14]
    recv_flow, send_open, recv_open, node_open = st[1], st[3], st[4], st[5]
    pred_s, pred_link, pred_sslot, pred_rslot = st[7], st[8], st[9], st[10]
    pred_r, queue, rng = st[11], st[15], st[16]

    head = 0
    tail = 1
    queue[0] = root
    pops = 0
    while head < tail:
        if policy == PRIORITY:
            b = head
            for q in range(head + 1, tail):
                u = queue[q]
                if priority[u] > priority[queue[b]] or (
                    priority[u] == priority[queue[b]] and u < queue[b]
                ):
                    b = q
            queue[head], queue[b] = queue[b], queue[head]
        elif policy == RANDOM:
            b = head + next_random(rng, tail - head)
            queue[head], queue[b] = queue[b], queue[head]
        i = queue[head]
        head += 1
        pops += 1
        for s in range(send_ptr[i], send_ptr[i + 1]):
            if not send_open[s]:
                continue
            a = send_asset[s]
            for k in range(nbr_ptr[i], nbr_ptr[i + 1]):
                j = nbr_idx[k]
                if not node_open[j] or pred_s[j] != -1:
                    continue
                rs = recv_slot[j, a]
                if rs < 0 or not recv_open[rs]:
                    continue
                if j == root:
                    # a fertile node always precedes the root on any path back
                    if fertile:
                        continue
                    if phase1 and not recv_flow[rs] < recv_lower[rs] - eps:
                        continue
                pred_s[j] = i
                pred_link[j] = link_ptr[s] + (k - nbr_ptr[i])
                pred_sslot[j] = s
                pred_rslot[j] = rs
                if (j == root) or (fertile and pred_r[j] != -1):
                    return j, pops
                queue[tail] = j
                tail += 1
    return -1, pops


@njit
def trace_cycle(st, root, j):
    """Links of the cycle closed at ``j``, in flow order starting at ``root``.

    Returns int64 array ``(L, 5)``: sender, receiver, send slot, receive slot,
    link index.
    """
    pred_s, pred_link, pred_sslot, pred_rslot = st[7], st[8], st[9], st[10]
    rev_link, rev_sslot, rev_rslot = st[12], st[13], st[14]
    n = pred_s.shape[0]
    tmp = np.empty((n + 1, 5), dtype=np.int64)
    L = 0
    v = j
    while True:
        u = pred_s[v]
        tmp[L, 0] = u
        tmp[L, 1] = v
        tmp[L, 2] = pred_sslot[v]
        tmp[L, 3] = pred_rslot[v]
        tmp[L, 4] = pred_link[v]
        L += 1
        v = u
        if v == root:
            break
    closing = 1 if j != root else 0
    out = np.empty((L + closing, 5), dtype=np.int64)
    for t in range(L):
        out[t] = tmp[L - 1 - t]
    if closing:
        out[L, 0] = j
        out[L, 1] = root
        out[L, 2] = rev_sslot[j]
        out[L, 3] = rev_rslot[j]
        out[L, 4] = rev_link[j]
    return out


@njit
def augment(net, st, links, phase1, eps):
    """Push the largest feasible amount around ``links``.

    The root sends ``delta``; link ``t`` carries ``delta * g[t]`` and delivers
    ``delta * g[t+1]`` where ``g`` is the running product of multipliers.
    Send slots are charged sent units; receive slots and node throughput are
    charged received units. Saturated elements are closed. In phase 1 the
    amount delivered to the root is also capped by its remaining deficit on
    the closing asset. Returns ``(delta, gains)``.
    """
    send_cap, recv_cap, recv_lower = net[4], net[7], net[8]
    node_cap, link_mult = net[11], net[13]
    send_flow, recv_flow, node_flow = st[0], st[1], st[2]
    send_open, recv_open, node_open = st[3], st[4], st[5]
    L = links.shape[0]
    g = np.empty(L + 1)
    g[0] = 1.0
    for t in range(L):
        g[t + 1] = g[t] * link_mult[links[t, 4]]

    delta = np.inf
    for t in range(L):
        ss = links[t, 2]
        rs = links[t, 3]
        v = links[t, 1]
        delta = min(delta, (send_cap[ss] - send_flow[ss]) / g[t])
        delta = min(delta, (recv_cap[rs] - recv_flow[rs]) / g[t + 1])
        delta = min(delta, (node_cap[v] - node_flow[v]) / g[t + 1])
    if phase1:
        rs = links[L - 1, 3]
        delta = min(delta, (recv_lower[rs] - recv_flow[rs]) / g[L])
    if not delta > 0.0:
        raise RuntimeError("non-positive flow increment on a located cycle")

    for t in range(L):
        ss = links[t, 2]
        rs = links[t, 3]
        v = links[t, 1]
        send_flow[ss] += delta * g[t]
        if send_cap[ss] - send_flow[ss] <= eps:
            send_open[ss] = False
        got = delta * g[t + 1]
        recv_flow[rs] += got
        if recv_cap[rs] - recv_flow[rs] <= eps:
            recv_open[rs] = False
        node_flow[v] += got
        if node_cap[v] - node_flow[v] <= eps:
            node_open[v] = False
    return delta, g


@njit
def _grow(a, need):
    if need <= a.shape[0]:
        return a
    b = np.empty((max(need, 2 * a.shape[0]), a.shape[1]), dtype=a.dtype)
    b[: a.shape[0]] = a
    return b


@njit
def run_chain(net, st, fertile, policy1, policy2, two_phase, eps):
    """Main routine: pick roots and scan until no root is available.

    With ``two_phase`` the first phase only roots at participants with an
    unmet receive lower bound; a failed phase-1 root loses its candidacy but
    stays available to other scans. Phase 2 is the plain routine on the
    flows left by phase 1.

    Returns ``(stats, cycles, links)``: ``cycles`` rows are
    ``(root, n_links, phase)`` paired with float rows ``(delta, gain)``;
    ``links`` rows are ``(sender, receiver, asset)`` with float rows
    ``(sent, received)``.
    """
    send_asset = net[3]
    node_open, cand = st[5], st[6]
    stats = np.zeros(N_STATS, dtype=np.int64)
    cyc_i = np.empty((16, 3), dtype=np.int64)
    cyc_f = np.empty((16, 2), dtype=np.float64)
    lk_i = np.empty((64, 3), dtype=np.int64)
    lk_f = np.empty((64, 2), dtype=np.float64)
    nc = 0
    nl = 0

    phase = 1 if two_phase else 2
    while True:
        ph1 = phase == 1
        policy = policy1 if ph1 else policy2
        root = select_root(net, st, policy, ph1, eps)
        if root < 0:
            if ph1:
                phase = 2
                continue
            break
        stats[ST_ITER] += 1
        if ph1:
            stats[ST_ITER1] += 1
        reset_preds(st)
        j = -1
        if fertile:
            if reverse_scan(net, st, root, ph1, eps):
                j, pops = forward_scan(net, st, root, policy, True, ph1, eps)
                stats[ST_POPS] += pops
        else:
            j, pops = forward_scan(net, st, root, policy, False, ph1, eps)
            stats[ST_POPS] += pops
        if j < 0:
            stats[ST_FAIL] += 1
            if ph1:
                cand[root] = False
            else:
                node_open[root] = False
            continue

        links = trace_cycle(st, root, j)
        delta, g = augment(net, st, links, ph1, eps)
        stats[ST_BREAK] += 1
        if ph1:
            stats[ST_BREAK1] += 1
        L = links.shape[0]
        cyc_i = _grow(cyc_i, nc + 1)
        cyc_f = _grow(cyc_f, nc + 1)
        cyc_i[nc, 0] = root
        cyc_i[nc, 1] = L
        cyc_i[nc, 2] = phase
        cyc_f[nc, 0] = delta
        cyc_f[nc, 1] = g[L]
        nc += 1
        lk_i = _grow(lk_i, nl + L)
        lk_f = _grow(lk_f, nl + L)
        for t in range(L):
            lk_i[nl, 0] = links[t, 0]
            lk_i[nl, 1] = links[t, 1]
            lk_i[nl, 2] = send_asset[links[t, 2]]
            lk_f[nl, 0] = delta * g[t]
            lk_f[nl, 1] = delta * g[t + 1]
            nl += 1
    return stats, cyc_i[:nc], cyc_f[:nc], lk_i[:nl], lk_f[:nl]
