"""Pure-Python graph kernels; same contracts and outputs as the compiled ones.

Graphs are passed in CSR form: ``indptr`` (length ``n + 1``) and, per edge,
a target array and optionally a label array. Every function returns numpy
arrays of ``int64`` (or ``int32`` for the simulation matrix).
"""

from __future__ import annotations

import numpy as np


def tau_closure(n: int, indptr, indices):
    """Reflexive-transitive closure of a graph, rows sorted."""
    indptr = np.asarray(indptr, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    adj = [indices[indptr[s]:indptr[s + 1]].tolist() for s in range(n)]
    out_ptr = np.zeros(n + 1, dtype=np.int64)
    rows: list[list[int]] = []
    for s in range(n):
        seen = {s}
        stack = [s]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        row = sorted(seen)
        rows.append(row)
        out_ptr[s + 1] = out_ptr[s] + len(row)
    flat = np.fromiter((x for row in rows for x in row), dtype=np.int64, count=int(out_ptr[-1]))
    return out_ptr, flat


def saturate(n: int, nlabels: int, clo_ptr, clo_idx, vis_ptr, vis_lbl, vis_dst):
    """Weak edges: label 0 is the tau closure, label ``k`` is ``=>k=>``.

    Output is CSR with each row sorted by (label, target).
    """
    clo = [clo_idx[clo_ptr[s]:clo_ptr[s + 1]].tolist() for s in range(n)]
    vis = [
        list(zip(vis_lbl[vis_ptr[s]:vis_ptr[s + 1]].tolist(), vis_dst[vis_ptr[s]:vis_ptr[s + 1]].tolist()))
        for s in range(n)
    ]
    out_ptr = np.zeros(n + 1, dtype=np.int64)
    lbls: list[int] = []
    dsts: list[int] = []
    for s in range(n):
        row = {(0, t) for t in clo[s]}
        for t in clo[s]:
            for lbl, u in vis[t]:
                for w in clo[u]:
                    row.add((lbl, w))
        for lbl, w in sorted(row):
            lbls.append(lbl)
            dsts.append(w)
        out_ptr[s + 1] = len(lbls)
    return out_ptr, np.array(lbls, dtype=np.int64), np.array(dsts, dtype=np.int64)


def _normalise(blocks) -> np.ndarray:
    ids: dict[int, int] = {}
    out = np.empty(len(blocks), dtype=np.int64)
    for i, b in enumerate(blocks):
        out[i] = ids.setdefault(int(b), len(ids))
    return out


def refine(n: int, indptr, lbl, dst, init):
    """Round-based partition refinement.

    Returns the list of block arrays, one per round, starting with the
    normalised initial partition and ending with the coarsest stable one.
    Blocks are numbered by first occurrence, so two states share a block in
    round ``r`` iff no formula of modal depth ``r`` tells them apart.
    """
    block = _normalise(init)
    rounds = [block]
    edges = [
        list(zip(lbl[indptr[s]:indptr[s + 1]].tolist(), dst[indptr[s]:indptr[s + 1]].tolist()))
        for s in range(n)
    ]
    count = len(set(block.tolist()))
    while True:
        ids: dict[tuple, int] = {}
        new = np.empty(n, dtype=np.int64)
        for s in range(n):
            sig = (int(block[s]),) + tuple(sorted({(a, int(block[t])) for a, t in edges[s]}))
            new[s] = ids.setdefault(sig, len(ids))
        if len(ids) == count:
            return rounds
        count = len(ids)
        block = new
        rounds.append(block)


def simulation(np_: int, p_ptr, p_lbl, p_dst, nq: int, q_ptr, q_lbl, q_dst):
    """Greatest simulation between two labelled graphs, computed in rounds.

    Returns an ``np_ x nq`` int32 matrix holding 0 for pairs in the greatest
    simulation and ``r >= 1`` for pairs dropped in round ``r``. Round ``r``
    keeps ``(p, q)`` iff every ``p -a-> p'`` is answered by some
    ``q -a-> q'`` with ``(p', q')`` kept in round ``r - 1``.
    """
    p_ptr, p_lbl, p_dst = (np.asarray(x, dtype=np.int64) for x in (p_ptr, p_lbl, p_dst))
    q_ptr, q_lbl, q_dst = (np.asarray(x, dtype=np.int64) for x in (q_ptr, q_lbl, q_dst))
    removed = np.zeros((np_, nq), dtype=np.int32)
    if np_ == 0 or nq == 0:
        return removed
    p_src = np.repeat(np.arange(np_), np.diff(p_ptr))
    q_src = np.repeat(np.arange(nq), np.diff(q_ptr))
    nlabels = int(max(p_lbl.max(initial=-1), q_lbl.max(initial=-1))) + 1
    groups = []
    for a in range(nlabels):
        pm, qm = p_lbl == a, q_lbl == a
        if pm.any():
            # CSR order keeps sources sorted, as reduceat needs
            ps, pd, qs, qd = p_src[pm], p_dst[pm], q_src[qm], q_dst[qm]
            p_starts = np.flatnonzero(np.r_[True, ps[1:] != ps[:-1]])
            q_starts = np.flatnonzero(np.r_[True, qs[1:] != qs[:-1]]) if len(qs) else None
            groups.append((ps[p_starts], p_starts, pd, qs, q_starts, qd))
    kept = np.ones((np_, nq), dtype=bool)
    rnd = 0
    while True:
        rnd += 1
        ok = kept.copy()
        for p_rows, p_starts, pd, qs, q_starts, qd in groups:
            # answer[p', q]: some q -a-> q' with (p', q') kept
            answer = np.zeros((np_, nq), dtype=bool)
            if q_starts is not None:
                answer[:, qs[q_starts]] = np.logical_or.reduceat(kept[:, qd], q_starts, axis=1)
            ok[p_rows] &= np.logical_and.reduceat(answer[pd], p_starts, axis=0)
        dropped = kept & ~ok
        if not dropped.any():
            return removed
        removed[dropped] = rnd
        kept = ok


def tau_scc(n: int, indptr, indices):
    """Tarjan's algorithm (iterative). Returns (component id per state, count)."""
    adj = [indices[indptr[s]:indptr[s + 1]].tolist() for s in range(n)]
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    comp = np.full(n, -1, dtype=np.int64)
    stack: list[int] = []
    counter = 0
    ncomp = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, i = work[-1]
            if i < len(adj[v]):
                work[-1] = (v, i + 1)
                w = adj[v][i]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp[w] = ncomp
                    if w == v:
                        break
                ncomp += 1
    return comp, ncomp
