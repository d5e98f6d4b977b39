"""Time the compiled kernels against the pure-Python ones.

    python3 benchmarks/bench_kernels.py [--sizes 500 2000] [--repeat 3] [--json out.json]

Each kernel runs on the same random graphs with both backends; outputs are
compared before timings are reported. A short end-to-end run (weak
bisimilarity on two 2600-state LTSs) is timed in a subprocess per backend, since
the backend is chosen at import.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from usol.kernels import _pykernels

try:
    from usol.kernels import _ckernels
except ImportError:
    _ckernels = None


def random_csr(rng: np.random.Generator, n: int, degree: float, nlabels: int = 1):
    m = int(n * degree)
    src = np.sort(rng.integers(0, n, m))
    dst = rng.integers(0, n, m)
    lbl = rng.integers(0, nlabels, m)
    order = np.lexsort((dst, lbl, src))
    src, dst, lbl = src[order], dst[order], lbl[order]
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(ptr, src + 1, 1)
    return np.cumsum(ptr), lbl.astype(np.int64), dst.astype(np.int64)


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def same(a, b) -> bool:
    if isinstance(a, (tuple, list)):
        return len(a) == len(b) and all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def kernel_cases(n: int, seed: int):
    rng = np.random.default_rng(seed)
    tau_ptr, _, tau_dst = random_csr(rng, n, 0.9)  # below 1 keeps tau-SCCs small
    clo = _pykernels.tau_closure(n, tau_ptr, tau_dst)
    vis_ptr, vis_lbl, vis_dst = random_csr(rng, n, 1.5, nlabels=3)
    vis_lbl += 1
    sat = _pykernels.saturate(n, 4, clo[0], clo[1], vis_ptr, vis_lbl, vis_dst)
    m = max(n // 4, 20)  # the simulation matrix is quadratic in memory
    s_ptr, s_lbl, s_dst = random_csr(rng, m, 2.0, nlabels=3)
    return {
        "tau_closure": (n, tau_ptr, tau_dst),
        "tau_scc": (n, tau_ptr, tau_dst),
        "saturate": (n, 4, clo[0], clo[1], vis_ptr, vis_lbl, vis_dst),
        "refine": (n, sat[0], sat[1], sat[2], np.zeros(n, dtype=np.int64)),
        "simulation": (m, s_ptr, s_lbl, s_dst, m, s_ptr, s_lbl, s_dst),
    }


END_TO_END = """
import time
from usol import kernels
from usol.equiv import weak_bisim
from usol.lts import Env
from usol.parser import parse_term
n = 12
env = Env({f"C{i}": parse_term(f"a.tau.C{(i + 1) % n} + b.C{(i * 7 + 3) % n} + tau.C{(i * 3 + 1) % n}")
           for i in range(n)})
t0 = time.perf_counter()
res = weak_bisim(parse_term("C0 | C1 | C2"), parse_term("C3 | C1 | C2"), 200000, env, upto=False)
print(kernels.BACKEND, res.verdict, res.stats["lhs_states"], round(time.perf_counter() - t0, 4))
"""


def end_to_end() -> list[str]:
    lines = []
    for flag in ("", "1"):
        env = dict(os.environ, USOL_PURE_PYTHON=flag)
        out = subprocess.run([sys.executable, "-c", END_TO_END], env=env,
                             capture_output=True, text=True, timeout=600)
        lines.append(out.stdout.strip() or out.stderr.strip().splitlines()[-1])
    return lines


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 2000, 8000])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write raw timings here")
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args()

    if _ckernels is None:
        print("compiled kernels are not built; only the Python backend can be timed")
    rows = []
    print(f"{'kernel':<12} {'n':>6} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for n in args.sizes:
        for name, call_args in kernel_cases(n, seed=n).items():
            py_fn = getattr(_pykernels, name)
            t_py = best_of(lambda: py_fn(*call_args), args.repeat)
            t_c = None
            if _ckernels is not None:
                c_fn = getattr(_ckernels, name)
                if not same(py_fn(*call_args), c_fn(*call_args)):
                    raise SystemExit(f"backends disagree on {name} (n={n})")
                t_c = best_of(lambda: c_fn(*call_args), args.repeat)
            speed = f"{t_py / t_c:8.1f}" if t_c else "     n/a"
            c_text = f"{t_c:10.4f}" if t_c is not None else "       n/a"
            print(f"{name:<12} {n:>6} {t_py:10.4f} {c_text} {speed}")
            rows.append({"kernel": name, "n": n, "python": t_py, "cython": t_c})
    if not args.skip_end_to_end:
        print("\nend to end (backend, verdict, states, seconds):")
        for line in end_to_end():
            print("  " + line)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
