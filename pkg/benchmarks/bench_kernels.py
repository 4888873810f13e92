"""Compare the numba and numpy flavours of the hot kernels.

Kernel timings call both flavours directly in one process. The end-to-end
timing runs ``psiepi optimize`` in subprocesses with and without
PSIEPI_DISABLE_NUMBA so the import-time switch is exercised as users see it.

    python3 benchmarks/bench_kernels.py [--repeat 200] [--skip-e2e]
"""
import argparse
import os
import subprocess
import sys
import tempfile
import time
import timeit

import numpy as np

from psiepi import kernels
from psiepi.inequality import pair_keys


def _problem(d, n, seed=0):
    rng = np.random.default_rng(seed)
    keys = pair_keys(n)
    psi0 = np.zeros(d)
    psi0[0] = 1.0
    ia = np.array([k[0] - 1 for k in keys], dtype=np.int64)
    ib = np.array([k[1] - 1 for k in keys], dtype=np.int64)
    X = rng.standard_normal((n, d))
    Y1 = rng.standard_normal((len(keys), d))
    Y2 = rng.standard_normal((len(keys), d))
    return psi0, X, Y1, Y2, ia, ib


def _frames(Y1, Y2):
    U1 = Y1 / np.linalg.norm(Y1, axis=1, keepdims=True)
    V = Y2 - U1 * np.sum(U1 * Y2, axis=1, keepdims=True)
    return U1, V / np.linalg.norm(V, axis=1, keepdims=True)


def _ontic(L, n, seed=0):
    rng = np.random.default_rng(seed)
    keys = pair_keys(n)
    mu = rng.dirichlet(np.ones(L), size=n + 1)
    xi = np.transpose(rng.dirichlet(np.ones(3), size=(len(keys), L)), (0, 2, 1)).copy()
    ia = np.array([k[0] for k in keys], dtype=np.int64)
    ib = np.array([k[1] for k in keys], dtype=np.int64)
    return mu, xi, ia, ib


def _best_us(fn, repeat):
    fn()  # warm-up, includes numba compilation
    return min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e6


def kernel_rows(repeat):
    rows = []
    for d, n in [(3, 5), (4, 10)]:
        psi0, X, Y1, Y2, ia, ib = _problem(d, n)
        psi = X / np.linalg.norm(X, axis=1, keepdims=True)
        U1, U2 = _frames(Y1, Y2)
        for name, fa, fb, args in [
            ("objective_and_grad", kernels.objective_and_grad_numpy, kernels.objective_and_grad_numba,
             (psi0, X, Y1, Y2, ia, ib)),
            ("measurement_sweep", kernels.measurement_sweep_numpy, kernels.measurement_sweep_numba,
             (psi0, psi, U1, U2, ia, ib, 20, 1e-13)),
        ]:
            rows.append((f"{name} d={d} n={n}", _best_us(lambda: fa(*args), repeat),
                         _best_us(lambda: fb(*args), repeat)))
    args = _ontic(64, 8)
    rows.append(("ontic_terms L=64 n=8", _best_us(lambda: kernels.ontic_terms_numpy(*args), repeat),
                 _best_us(lambda: kernels.ontic_terms_numba(*args), repeat)))
    return rows


def end_to_end(disable):
    env = dict(os.environ)
    env["PSIEPI_DISABLE_NUMBA"] = "1" if disable else "0"
    with tempfile.TemporaryDirectory() as tmp:
        cmd = [sys.executable, "-m", "psiepi", "optimize", "--dim", "4", "--n", "5",
               "--restarts", "16", "--seed", "0", "--out", os.path.join(tmp, "s.json")]
        t0 = time.perf_counter()
        out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
        return time.perf_counter() - t0, out.stdout.split()[0]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=200)
    parser.add_argument("--skip-e2e", action="store_true")
    args = parser.parse_args(argv)

    print(f"{'kernel':34s} {'numpy_us':>10s} {'numba_us':>10s} {'speedup':>8s}")
    for name, a, b in kernel_rows(args.repeat):
        print(f"{name:34s} {a:10.1f} {b:10.1f} {a / b:8.1f}")
    if not args.skip_e2e:
        print()
        for disable in (False, True):
            secs, s = end_to_end(disable)
            print(f"optimize d=4 n=5 restarts=16 backend={'numpy' if disable else 'numba'}: {secs:.2f}s  {s}")


if __name__ == "__main__":
    main()
