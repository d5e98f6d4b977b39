import os
import random
import subprocess
import sys

import numpy as np
import pytest

from oracles import brute_tau_components, random_graph, synthetic_lts
from usol import kernels
from usol.kernels import _pykernels
from usol.lts import saturate

try:
    from usol.kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = [_pykernels] + ([_ckernels] if _ckernels is not None else [])


def _csr(n, pairs):
    rows = [[] for _ in range(n)]
    for s, d in pairs:
        rows[s].append(d)
    ptr = np.zeros(n + 1, dtype=np.int64)
    for i, r in enumerate(rows):
        ptr[i + 1] = ptr[i] + len(r)
    return ptr, np.array([d for r in rows for d in sorted(r)], dtype=np.int64)


def _graphs(seed, count, max_n=30):
    rng = random.Random(seed)
    for _ in range(count):
        n = rng.randint(1, max_n)
        yield n, random_graph(rng, n, rng.uniform(0.3, 3.0))


def _labelled(rng, n, nlabels, density):
    edges = sorted({(rng.randrange(n), rng.randrange(nlabels), rng.randrange(n))
                    for _ in range(int(density * n))})
    ptr = np.zeros(n + 1, dtype=np.int64)
    for s, _, _ in edges:
        ptr[s + 1] += 1
    np.cumsum(ptr, out=ptr)
    return (ptr, np.array([e[1] for e in edges], dtype=np.int64),
            np.array([e[2] for e in edges], dtype=np.int64), edges)


def _naive_simulation(np_, pe, nq, qe):
    """Round numbers by direct iteration over pairs."""
    kept = {(p, q) for p in range(np_) for q in range(nq)}
    removed = np.zeros((np_, nq), dtype=np.int32)
    rnd = 0
    while True:
        rnd += 1
        drop = {(p, q) for p, q in kept
                if not all(any(b == a and (p2, q2) in kept for s2, b, q2 in qe if s2 == q)
                           for s, a, p2 in pe if s == p)}
        if not drop:
            return removed
        for p, q in drop:
            removed[p, q] = rnd
        kept -= drop


def test_backend_selected():
    assert kernels.BACKEND in ("python", "cython")
    if _ckernels is not None:
        assert kernels.BACKEND == "cython" or kernels.tau_scc is _pykernels.tau_scc


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_tau_scc_matches_brute_force(impl):
    for n, edges in _graphs(1, 200):
        ptr, idx = _csr(n, [(s, d) for s, a, d, _ in edges if not a.visible])
        comp, count = impl.tau_scc(n, ptr, idx)
        oracle = brute_tau_components(n, edges)
        assert count == len(set(oracle))
        for s in range(n):
            for t in range(n):
                assert (comp[s] == comp[t]) == (t in oracle[s])


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_simulation_matches_naive_rounds(impl):
    rng = random.Random(2)
    for _ in range(150):
        np_, nq = rng.randint(1, 9), rng.randint(1, 9)
        p_ptr, p_lbl, p_dst, pe = _labelled(rng, np_, 3, 2.0)
        q_ptr, q_lbl, q_dst, qe = _labelled(rng, nq, 3, 2.5)
        got = impl.simulation(np_, p_ptr, p_lbl, p_dst, nq, q_ptr, q_lbl, q_dst)
        assert np.array_equal(got, _naive_simulation(np_, pe, nq, qe))


@pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")
def test_backends_agree():
    rng = random.Random(7)
    for n, edges in _graphs(8, 150, max_n=60):
        tau_ptr, tau_idx = _csr(n, [(s, d) for s, a, d, _ in edges if not a.visible])
        for name in ("tau_closure", "tau_scc"):
            a = getattr(_pykernels, name)(n, tau_ptr, tau_idx)
            b = getattr(_ckernels, name)(n, tau_ptr, tau_idx)
            assert all(np.array_equal(x, y) for x, y in zip(a, b))
        weak = saturate(synthetic_lts(n, edges))
        init = [rng.randrange(2) for _ in range(n)]
        r1 = _pykernels.refine(n, weak.indptr, weak.edge_label, weak.edge_dst, init)
        r2 = _ckernels.refine(n, weak.indptr, weak.edge_label, weak.edge_dst, init)
        assert len(r1) == len(r2) and all(np.array_equal(x, y) for x, y in zip(r1, r2))
        args = (n, weak.indptr, weak.edge_label, weak.edge_dst) * 2
        assert np.array_equal(_pykernels.simulation(*args), _ckernels.simulation(*args))


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_refine_rounds_are_monotone(impl):
    for n, edges in _graphs(3, 100):
        weak = saturate(synthetic_lts(n, edges))
        rounds = impl.refine(n, weak.indptr, weak.edge_label, weak.edge_dst, [0] * n)
        sizes = [len(set(r.tolist())) for r in rounds]
        assert sizes == sorted(sizes) and len(set(sizes)) == len(sizes)
        # every later partition refines every earlier one
        for early, late in zip(rounds, rounds[1:]):
            for s in range(n):
                for t in range(n):
                    if late[s] == late[t]:
                        assert early[s] == early[t]


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_empty_graphs(impl):
    empty = np.zeros(1, dtype=np.int64)
    none = np.zeros(0, dtype=np.int64)
    comp, count = impl.tau_scc(0, empty, none)
    assert count == 0 and len(comp) == 0
    assert impl.simulation(0, empty, none, none, 0, empty, none, none).shape == (0, 0)


def test_pure_python_switch():
    env = dict(os.environ, USOL_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from usol import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, timeout=60)
    assert out.stdout.strip() == "python"
