# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled graph kernels. See _pykernels for the contracts."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport qsort, malloc, free, realloc

cnp.import_array()

ctypedef cnp.int64_t i64


cdef int _cmp_i64(const void* a, const void* b) noexcept nogil:
    cdef i64 x = (<i64*>a)[0]
    cdef i64 y = (<i64*>b)[0]
    return (x > y) - (x < y)


cdef void* realloc_i64(i64* p, Py_ssize_t count) except NULL:
    cdef void* q = realloc(p, count * sizeof(i64))
    if q == NULL:
        raise MemoryError()
    return q


def tau_closure(Py_ssize_t n, indptr, indices):
    cdef i64[::1] ptr = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef i64[::1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    cdef i64[::1] mark = np.full(n, -1, dtype=np.int64)
    cdef i64[::1] stack = np.empty(max(n, 1), dtype=np.int64)
    cdef i64[::1] row = np.empty(max(n, 1), dtype=np.int64)
    out_ptr = np.zeros(n + 1, dtype=np.int64)
    cdef i64[::1] optr = out_ptr
    chunks = []
    cdef Py_ssize_t s, sp, cnt, e
    cdef i64 x, y
    for s in range(n):
        mark[s] = s
        stack[0] = s
        sp = 1
        cnt = 0
        row[cnt] = s
        cnt += 1
        while sp > 0:
            sp -= 1
            x = stack[sp]
            for e in range(ptr[x], ptr[x + 1]):
                y = idx[e]
                if mark[y] != s:
                    mark[y] = s
                    stack[sp] = y
                    sp += 1
                    row[cnt] = y
                    cnt += 1
        qsort(&row[0], cnt, sizeof(i64), _cmp_i64)
        chunks.append(np.asarray(row[:cnt]).copy())
        optr[s + 1] = optr[s] + cnt
    flat = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    return out_ptr, flat


def saturate(Py_ssize_t n, Py_ssize_t nlabels, clo_ptr, clo_idx, vis_ptr, vis_lbl, vis_dst):
    cdef i64[::1] cptr = np.ascontiguousarray(clo_ptr, dtype=np.int64)
    cdef i64[::1] cidx = np.ascontiguousarray(clo_idx, dtype=np.int64)
    cdef i64[::1] vptr = np.ascontiguousarray(vis_ptr, dtype=np.int64)
    cdef i64[::1] vlbl = np.ascontiguousarray(vis_lbl, dtype=np.int64)
    cdef i64[::1] vdst = np.ascontiguousarray(vis_dst, dtype=np.int64)
    # mark[l * n + w] == s  <=>  (l, w) already emitted for row s
    cdef i64[::1] mark = np.full(max(nlabels * n, 1), -1, dtype=np.int64)
    cdef Py_ssize_t cap = max(n, 16)
    cdef i64* buf = <i64*>malloc(cap * sizeof(i64))
    cdef i64* tmp
    out_ptr = np.zeros(n + 1, dtype=np.int64)
    cdef i64[::1] optr = out_ptr
    chunks = []
    cdef Py_ssize_t s, a, e, b, cnt
    cdef i64 t, u, w, l, code
    try:
        for s in range(n):
            cnt = 0
            for a in range(cptr[s], cptr[s + 1]):
                t = cidx[a]
                if cnt >= cap:
                    cap *= 2
                    tmp = <i64*>realloc_i64(buf, cap)
                    buf = tmp
                if mark[t] != s:
                    mark[t] = s
                    buf[cnt] = t
                    cnt += 1
                for e in range(vptr[t], vptr[t + 1]):
                    l = vlbl[e]
                    u = vdst[e]
                    for b in range(cptr[u], cptr[u + 1]):
                        w = cidx[b]
                        code = l * n + w
                        if mark[code] != s:
                            mark[code] = s
                            if cnt >= cap:
                                cap *= 2
                                tmp = <i64*>realloc_i64(buf, cap)
                                buf = tmp
                            buf[cnt] = code
                            cnt += 1
            qsort(buf, cnt, sizeof(i64), _cmp_i64)
            chunk = np.empty(cnt, dtype=np.int64)
            for a in range(cnt):
                chunk[a] = buf[a]
            chunks.append(chunk)
            optr[s + 1] = optr[s] + cnt
    finally:
        free(buf)
    codes = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    if n == 0:
        return out_ptr, codes, codes.copy()
    return out_ptr, codes // n, codes % n


def _normalise(blocks):
    ids = {}
    out = np.empty(len(blocks), dtype=np.int64)
    for i, b in enumerate(blocks):
        out[i] = ids.setdefault(int(b), len(ids))
    return out


def refine(Py_ssize_t n, indptr, lbl, dst, init):
    cdef i64[::1] ptr = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef i64[::1] elbl = np.ascontiguousarray(lbl, dtype=np.int64)
    cdef i64[::1] edst = np.ascontiguousarray(dst, dtype=np.int64)
    block_arr = _normalise(init)
    cdef i64[::1] block = block_arr
    rounds = [block_arr]
    cdef Py_ssize_t maxdeg = 1, s, e, k, m
    for s in range(n):
        if ptr[s + 1] - ptr[s] + 1 > maxdeg:
            maxdeg = ptr[s + 1] - ptr[s] + 1
    sig_arr = np.empty(maxdeg, dtype=np.int64)
    cdef i64[::1] sig = sig_arr
    cdef i64 nb = len(set(block_arr.tolist())) if n else 0
    cdef i64 width
    while True:
        width = nb + 1
        ids = {}
        new_arr = np.empty(n, dtype=np.int64)
        for s in range(n):
            k = 0
            for e in range(ptr[s], ptr[s + 1]):
                sig[k] = elbl[e] * width + block[edst[e]]
                k += 1
            qsort(&sig[0], k, sizeof(i64), _cmp_i64)
            m = 0
            for e in range(k):
                if m == 0 or sig[e] != sig[m - 1]:
                    sig[m] = sig[e]
                    m += 1
            key = (block[s], sig_arr[:m].tobytes())
            new_arr[s] = ids.setdefault(key, len(ids))
        if len(ids) == nb:
            return rounds
        nb = len(ids)
        block_arr = new_arr
        block = block_arr
        rounds.append(block_arr)


cdef extern from *:
    int __builtin_ctzll(unsigned long long) nogil

ctypedef cnp.uint64_t u64


def simulation(Py_ssize_t np_, p_ptr, p_lbl, p_dst, Py_ssize_t nq, q_ptr, q_lbl, q_dst):
    # Bitset rounds: per label a and target p', answer[a, p'] is the set of q
    # with some q -a-> q' and (p', q') still kept; then (p, q) survives iff q
    # is in answer[a, p'] for every edge p -a-> p'.
    cdef i64[::1] pp = np.ascontiguousarray(p_ptr, dtype=np.int64)
    cdef i64[::1] pl = np.ascontiguousarray(p_lbl, dtype=np.int64)
    cdef i64[::1] pd = np.ascontiguousarray(p_dst, dtype=np.int64)
    cdef i64[::1] qp = np.ascontiguousarray(q_ptr, dtype=np.int64)
    cdef i64[::1] ql = np.ascontiguousarray(q_lbl, dtype=np.int64)
    cdef i64[::1] qd = np.ascontiguousarray(q_dst, dtype=np.int64)
    removed_arr = np.zeros((np_, nq), dtype=np.int32)
    if np_ == 0 or nq == 0:
        return removed_arr
    cdef int[:, ::1] removed = removed_arr
    cdef Py_ssize_t W = (nq + 63) // 64
    cdef Py_ssize_t nl = max(int(np.max(pl, initial=-1)), int(np.max(ql, initial=-1))) + 1
    pre_arr = np.zeros((nl, nq, W), dtype=np.uint64)
    cdef u64[:, :, ::1] pre = pre_arr
    cdef Py_ssize_t p, q, e, w, a, p2, q2, b
    for q in range(nq):
        for e in range(qp[q], qp[q + 1]):
            pre[ql[e], qd[e], q >> 6] |= (<u64>1) << (q & 63)
    # (label, target) pairs that some p-edge asks about
    need_arr = np.zeros((nl, np_), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] need = need_arr
    for e in range(pp[np_]):
        need[pl[e], pd[e]] = 1
    kept_arr = np.zeros((np_, W), dtype=np.uint64)
    cdef u64[:, ::1] kept = kept_arr
    cdef u64 full = ~(<u64>0)
    cdef u64 tail = full if nq % 64 == 0 else (((<u64>1) << (nq % 64)) - 1)
    for p in range(np_):
        for w in range(W):
            kept[p, w] = full
        kept[p, W - 1] = tail
    answer_arr = np.zeros((nl, np_, W), dtype=np.uint64)
    cdef u64[:, :, ::1] answer = answer_arr
    cdef u64 bits, acc, drop
    cdef int rnd = 0
    cdef bint changed
    while True:
        rnd += 1
        for a in range(nl):
            for p2 in range(np_):
                if not need[a, p2]:
                    continue
                for w in range(W):
                    answer[a, p2, w] = 0
                for w in range(W):
                    bits = kept[p2, w]
                    while bits:
                        b = __builtin_ctzll(bits)
                        bits &= bits - 1
                        q2 = w * 64 + b
                        for q in range(W):
                            answer[a, p2, q] |= pre[a, q2, q]
        changed = False
        for p in range(np_):
            for w in range(W):
                acc = kept[p, w]
                if not acc:
                    continue
                for e in range(pp[p], pp[p + 1]):
                    acc &= answer[pl[e], pd[e], w]
                drop = kept[p, w] & ~acc
                if drop:
                    changed = True
                    kept[p, w] = acc
                    while drop:
                        b = __builtin_ctzll(drop)
                        drop &= drop - 1
                        removed[p, w * 64 + b] = rnd
        if not changed:
            return removed_arr


def tau_scc(Py_ssize_t n, indptr, indices):
    cdef i64[::1] ptr = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef i64[::1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    cdef i64[::1] index = np.full(max(n, 1), -1, dtype=np.int64)
    cdef i64[::1] low = np.zeros(max(n, 1), dtype=np.int64)
    cdef cnp.uint8_t[::1] on_stack = np.zeros(max(n, 1), dtype=np.uint8)
    comp_arr = np.full(n, -1, dtype=np.int64)
    cdef i64[::1] comp = comp_arr
    cdef i64[::1] stack = np.empty(max(n, 1), dtype=np.int64)
    cdef i64[::1] wv = np.empty(max(n, 1), dtype=np.int64)
    cdef i64[::1] wi = np.empty(max(n, 1), dtype=np.int64)
    cdef Py_ssize_t sp = 0, wp, root
    cdef i64 counter = 0, ncomp = 0, v, i, w, u
    for root in range(n):
        if index[root] != -1:
            continue
        wp = 0
        wv[wp] = root
        wi[wp] = ptr[root]
        wp += 1
        index[root] = counter
        low[root] = counter
        counter += 1
        stack[sp] = root
        sp += 1
        on_stack[root] = 1
        while wp > 0:
            v = wv[wp - 1]
            i = wi[wp - 1]
            if i < ptr[v + 1]:
                wi[wp - 1] = i + 1
                w = idx[i]
                if index[w] == -1:
                    index[w] = counter
                    low[w] = counter
                    counter += 1
                    stack[sp] = w
                    sp += 1
                    on_stack[w] = 1
                    wv[wp] = w
                    wi[wp] = ptr[w]
                    wp += 1
                elif on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
                continue
            wp -= 1
            if wp > 0:
                u = wv[wp - 1]
                if low[v] < low[u]:
                    low[u] = low[v]
            if low[v] == index[v]:
                while True:
                    sp -= 1
                    w = stack[sp]
                    on_stack[w] = 0
                    comp[w] = ncomp
                    if w == v:
                        break
                ncomp += 1
    return comp_arr, ncomp
