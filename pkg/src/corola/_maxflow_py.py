"""Pure-Python Boykov-Kolmogorov max-flow, used when the compiled kernel is absent.

Both kernels share one calling convention.  The graph is given in CSR form:
arcs leaving node ``i`` are ``first[i]:first[i+1]``; ``head[a]`` is the node
arc ``a`` points to, ``tail[a]`` the node it leaves and ``sister[a]`` the
reverse arc.  ``rcap`` holds integer residual capacities of the non-terminal
arcs and ``tr_cap[i]`` the net terminal capacity (positive: residual from the
source, negative: residual to the sink).  Neither input array is modified.

The return value is ``(flow, labels)`` where ``labels[i] == 1`` iff node ``i``
can still reach the sink in the final residual graph.  This is the smallest
sink side over all minimum cuts, i.e. ties resolve toward label 0.
"""
from collections import deque

import numpy as np

TERMINAL = -1
ORPHAN = -2
FREE = -3


def bk_maxflow(first, head, tail, sister, rcap, tr_cap):
    first = np.asarray(first).tolist()
    head = np.asarray(head).tolist()
    tail = np.asarray(tail).tolist()
    sister = np.asarray(sister).tolist()
    rcap = np.asarray(rcap, dtype=np.int64).tolist()
    tr = np.asarray(tr_cap, dtype=np.int64).tolist()
    n = len(tr)

    parent = [FREE] * n
    in_sink = [False] * n
    queued = [False] * n
    active = deque()
    orphans = deque()

    for i in range(n):
        if tr[i] != 0:
            parent[i] = TERMINAL
            in_sink[i] = tr[i] < 0
            queued[i] = True
            active.append(i)

    flow = 0
    while active:
        i = active.popleft()
        queued[i] = False
        if parent[i] == FREE:
            continue

        # growth
        mid = -1
        if not in_sink[i]:
            for a in range(first[i], first[i + 1]):
                if rcap[a] > 0:
                    j = head[a]
                    if parent[j] == FREE:
                        parent[j] = sister[a]
                        in_sink[j] = False
                        if not queued[j]:
                            queued[j] = True
                            active.append(j)
                    elif in_sink[j]:
                        mid = a
                        break
        else:
            for a in range(first[i], first[i + 1]):
                sa = sister[a]
                if rcap[sa] > 0:
                    j = head[a]
                    if parent[j] == FREE:
                        parent[j] = sa
                        in_sink[j] = True
                        if not queued[j]:
                            queued[j] = True
                            active.append(j)
                    elif not in_sink[j]:
                        mid = sa
                        break
        if mid < 0:
            continue

        queued[i] = True
        active.appendleft(i)

        # bottleneck of the path source -> tail[mid] -> head[mid] -> sink
        b = rcap[mid]
        k = tail[mid]
        while parent[k] != TERMINAL:
            a = parent[k]
            c = rcap[sister[a]]
            if c < b:
                b = c
            k = head[a]
        if tr[k] < b:
            b = tr[k]
        k = head[mid]
        while parent[k] != TERMINAL:
            a = parent[k]
            if rcap[a] < b:
                b = rcap[a]
            k = head[a]
        if -tr[k] < b:
            b = -tr[k]

        # augment
        rcap[mid] -= b
        rcap[sister[mid]] += b
        k = tail[mid]
        while parent[k] != TERMINAL:
            a = parent[k]
            sa = sister[a]
            rcap[sa] -= b
            rcap[a] += b
            nxt = head[a]
            if rcap[sa] == 0:
                parent[k] = ORPHAN
                orphans.append(k)
            k = nxt
        tr[k] -= b
        if tr[k] == 0:
            parent[k] = ORPHAN
            orphans.append(k)
        k = head[mid]
        while parent[k] != TERMINAL:
            a = parent[k]
            sa = sister[a]
            rcap[a] -= b
            rcap[sa] += b
            nxt = head[a]
            if rcap[a] == 0:
                parent[k] = ORPHAN
                orphans.append(k)
            k = nxt
        tr[k] += b
        if tr[k] == 0:
            parent[k] = ORPHAN
            orphans.append(k)
        flow += b

        # adoption
        while orphans:
            k = orphans.popleft()
            sink_side = in_sink[k]
            found = -1
            for a in range(first[k], first[k + 1]):
                # residual arc from the candidate parent toward the sink/source root
                c = rcap[a] if sink_side else rcap[sister[a]]
                if c <= 0:
                    continue
                j = head[a]
                if in_sink[j] != sink_side or parent[j] == FREE:
                    continue
                x = j
                while True:
                    p = parent[x]
                    if p == TERMINAL:
                        found = a
                        break
                    if p == ORPHAN:
                        break
                    x = head[p]
                if found >= 0:
                    break
            if found >= 0:
                parent[k] = found
                continue
            for a in range(first[k], first[k + 1]):
                j = head[a]
                if in_sink[j] != sink_side or parent[j] == FREE:
                    continue
                c = rcap[a] if sink_side else rcap[sister[a]]
                if c > 0 and not queued[j]:
                    queued[j] = True
                    active.append(j)
                p = parent[j]
                if p >= 0 and head[p] == k:
                    parent[j] = ORPHAN
                    orphans.append(j)
            parent[k] = FREE

    labels = np.fromiter(
        (1 if (in_sink[i] and parent[i] != FREE) else 0 for i in range(n)),
        dtype=np.uint8,
        count=n,
    )
    return flow, labels
