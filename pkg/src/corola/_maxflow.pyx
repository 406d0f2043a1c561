# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Boykov-Kolmogorov max-flow.

Same calling convention and result as :func:`corola._maxflow_py.bk_maxflow`.
"""
import numpy as np
cimport numpy as cnp

from libc.stdint cimport int64_t

cnp.import_array()

cdef enum:
    TERMINAL = -1
    ORPHAN = -2
    FREE = -3


def bk_maxflow(first_in, head_in, tail_in, sister_in, rcap_in, tr_cap_in):
    cdef cnp.int64_t[::1] first = np.ascontiguousarray(first_in, dtype=np.int64)
    cdef cnp.int64_t[::1] head = np.ascontiguousarray(head_in, dtype=np.int64)
    cdef cnp.int64_t[::1] tail = np.ascontiguousarray(tail_in, dtype=np.int64)
    cdef cnp.int64_t[::1] sister = np.ascontiguousarray(sister_in, dtype=np.int64)
    cdef cnp.int64_t[::1] rcap = np.array(rcap_in, dtype=np.int64, copy=True)
    cdef cnp.int64_t[::1] tr = np.array(tr_cap_in, dtype=np.int64, copy=True)
    cdef Py_ssize_t n = tr.shape[0]

    cdef cnp.int64_t[::1] parent = np.full(n, FREE, dtype=np.int64)
    cdef cnp.uint8_t[::1] in_sink = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] queued = np.zeros(n, dtype=np.uint8)
    # circular buffers; a node sits in each at most once
    cdef Py_ssize_t cap = n + 1
    cdef cnp.int64_t[::1] aq = np.empty(cap, dtype=np.int64)
    cdef cnp.int64_t[::1] oq = np.empty(cap, dtype=np.int64)
    cdef Py_ssize_t aq_head = 0, aq_len = 0, oq_head = 0, oq_len = 0

    cdef Py_ssize_t i, j, k, x, a, sa, mid, found, nxt, p
    cdef int64_t b, c, flow = 0
    cdef bint sink_side

    for i in range(n):
        if tr[i] != 0:
            parent[i] = TERMINAL
            in_sink[i] = tr[i] < 0
            queued[i] = 1
            aq[(aq_head + aq_len) % cap] = i
            aq_len += 1

    while aq_len > 0:
        i = aq[aq_head]
        aq_head = (aq_head + 1) % cap
        aq_len -= 1
        queued[i] = 0
        if parent[i] == FREE:
            continue

        mid = -1
        if not in_sink[i]:
            for a in range(first[i], first[i + 1]):
                if rcap[a] > 0:
                    j = head[a]
                    if parent[j] == FREE:
                        parent[j] = sister[a]
                        in_sink[j] = 0
                        if not queued[j]:
                            queued[j] = 1
                            aq[(aq_head + aq_len) % cap] = j
                            aq_len += 1
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
                        in_sink[j] = 1
                        if not queued[j]:
                            queued[j] = 1
                            aq[(aq_head + aq_len) % cap] = j
                            aq_len += 1
                    elif not in_sink[j]:
                        mid = sa
                        break
        if mid < 0:
            continue

        queued[i] = 1
        aq_head = (aq_head - 1 + cap) % cap
        aq[aq_head] = i
        aq_len += 1

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
                oq[(oq_head + oq_len) % cap] = k
                oq_len += 1
            k = nxt
        tr[k] -= b
        if tr[k] == 0:
            parent[k] = ORPHAN
            oq[(oq_head + oq_len) % cap] = k
            oq_len += 1
        k = head[mid]
        while parent[k] != TERMINAL:
            a = parent[k]
            sa = sister[a]
            rcap[a] -= b
            rcap[sa] += b
            nxt = head[a]
            if rcap[a] == 0:
                parent[k] = ORPHAN
                oq[(oq_head + oq_len) % cap] = k
                oq_len += 1
            k = nxt
        tr[k] += b
        if tr[k] == 0:
            parent[k] = ORPHAN
            oq[(oq_head + oq_len) % cap] = k
            oq_len += 1
        flow += b

        while oq_len > 0:
            k = oq[oq_head]
            oq_head = (oq_head + 1) % cap
            oq_len -= 1
            sink_side = in_sink[k]
            found = -1
            for a in range(first[k], first[k + 1]):
                if sink_side:
                    c = rcap[a]
                else:
                    c = rcap[sister[a]]
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
                if sink_side:
                    c = rcap[a]
                else:
                    c = rcap[sister[a]]
                if c > 0 and not queued[j]:
                    queued[j] = 1
                    aq[(aq_head + aq_len) % cap] = j
                    aq_len += 1
                p = parent[j]
                if p >= 0 and head[p] == k:
                    parent[j] = ORPHAN
                    oq[(oq_head + oq_len) % cap] = j
                    oq_len += 1
            parent[k] = FREE

    labels = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] lab = labels
    for i in range(n):
        if in_sink[i] and parent[i] != FREE:
            lab[i] = 1
    return int(flow), labels
