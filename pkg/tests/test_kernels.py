import os
import subprocess
import sys

import numpy as np
import pytest

from psiepi import kernels
from psiepi._accel import NUMBA_AVAILABLE
from psiepi.inequality import pair_keys


def _problem(d, n, seed, cplx):
    rng = np.random.default_rng(seed)

    def g(*shape):
        x = rng.standard_normal(shape)
        return x + 1j * rng.standard_normal(shape) if cplx else x

    keys = pair_keys(n)
    psi0 = np.zeros(d, dtype=complex if cplx else float)
    psi0[0] = 1.0
    ia = np.array([k[0] - 1 for k in keys], dtype=np.int64)
    ib = np.array([k[1] - 1 for k in keys], dtype=np.int64)
    return psi0, g(n, d), g(len(keys), d), g(len(keys), d), ia, ib


def _direct_s(psi0, X, Y1, Y2, ia, ib):
    """S written out term by term from normalised states and Gram-Schmidt frames."""
    psi = X / np.linalg.norm(X, axis=1, keepdims=True)
    total = 1.0
    for p in range(len(ia)):
        u1 = Y1[p] / np.linalg.norm(Y1[p])
        v = Y2[p] - u1 * np.vdot(u1, Y2[p])
        u2 = v / np.linalg.norm(v)
        E1, E2 = np.outer(u1, u1.conj()), np.outer(u2, u2.conj())
        E0 = np.eye(len(psi0)) - E1 - E2
        b, c = psi[ia[p]], psi[ib[p]]
        total += np.real(np.vdot(psi0, E0 @ psi0) + np.vdot(b, E1 @ b) + np.vdot(c, E2 @ c))
    den = sum(1 - np.sqrt(max(0.0, 1 - abs(np.vdot(psi0, s)) ** 2)) for s in psi)
    return total / den


CASES = [(3, 3, 0, False), (3, 5, 1, False), (4, 6, 2, False), (3, 4, 3, True), (5, 5, 4, True)]


@pytest.mark.parametrize("d, n, seed, cplx", CASES)
def test_objective_backends_agree_with_direct_formula(d, n, seed, cplx):
    args = _problem(d, n, seed, cplx)
    ref = _direct_s(*args)
    a = kernels.objective_and_grad_numpy(*args)
    b = kernels.objective_and_grad_numba(*args)
    assert a[0] == pytest.approx(ref, rel=1e-13)
    assert b[0] == pytest.approx(ref, rel=1e-13)
    for x, y in zip(a[3:], b[3:]):
        np.testing.assert_allclose(x, y, atol=1e-12)


@pytest.mark.parametrize("d, n, seed, cplx", CASES)
def test_gradient_matches_central_differences(d, n, seed, cplx):
    psi0, X, Y1, Y2, ia, ib = _problem(d, n, seed, cplx)
    _, _, _, GX, GY1, GY2 = kernels.objective_and_grad(psi0, X, Y1, Y2, ia, ib)
    h = 1e-6
    rng = np.random.default_rng(seed + 100)
    arrays = [X, Y1, Y2]
    grads = [GX, GY1, GY2]
    for which in range(3):
        for _ in range(4):
            idx = tuple(rng.integers(0, s) for s in arrays[which].shape)
            steps = [1.0, 1j] if cplx else [1.0]
            for step in steps:
                plus = [a.copy() for a in arrays]
                minus = [a.copy() for a in arrays]
                plus[which][idx] += h * step
                minus[which][idx] -= h * step
                fd = (kernels.objective_and_grad(psi0, *plus, ia, ib)[0]
                      - kernels.objective_and_grad(psi0, *minus, ia, ib)[0]) / (2 * h)
                analytic = np.real(np.conj(grads[which][idx]) * step)
                assert fd == pytest.approx(analytic, abs=1e-7)


def _frames(Y1, Y2):
    u1 = Y1 / np.linalg.norm(Y1, axis=1, keepdims=True)
    v = Y2 - u1 * np.sum(u1.conj() * Y2, axis=1, keepdims=True)
    return u1, v / np.linalg.norm(v, axis=1, keepdims=True)


@pytest.mark.parametrize("d, n, seed, cplx", CASES)
def test_measurement_sweep_backends_agree_and_never_increase(d, n, seed, cplx):
    psi0, X, Y1, Y2, ia, ib = _problem(d, n, seed, cplx)
    psi = X / np.linalg.norm(X, axis=1, keepdims=True)
    U1, U2 = _frames(Y1, Y2)
    s0 = kernels.objective_and_grad(psi0, psi, U1, U2, ia, ib)[0]
    out = []
    for fn in (kernels.measurement_sweep_numpy, kernels.measurement_sweep_numba):
        V1, V2, sweeps = fn(psi0, psi, U1, U2, ia, ib, 50, 1e-13)
        assert sweeps >= 1
        np.testing.assert_allclose(np.sum(V1.conj() * V2, axis=1), 0, atol=1e-10)
        out.append(kernels.objective_and_grad(psi0, psi, V1, V2, ia, ib)[0])
    assert out[0] <= s0 + 1e-15 and out[1] <= s0 + 1e-15
    assert out[0] == pytest.approx(out[1], abs=1e-10)


@pytest.mark.parametrize("L, n, seed", [(1, 3, 0), (7, 4, 1), (64, 8, 2)])
def test_ontic_terms_backends_agree(L, n, seed):
    rng = np.random.default_rng(seed)
    mu = rng.dirichlet(np.ones(L), size=n + 1)
    keys = pair_keys(n)
    xi = np.transpose(rng.dirichlet(np.ones(3), size=(len(keys), L)), (0, 2, 1)).copy()
    ia = np.array([k[0] for k in keys], dtype=np.int64)
    ib = np.array([k[1] for k in keys], dtype=np.int64)
    a = kernels.ontic_terms_numpy(mu, xi, ia, ib)
    b = kernels.ontic_terms_numba(mu, xi, ia, ib)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, atol=1e-14)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, PSIEPI_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "import psiepi; print(psiepi.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_default_backend():
    if os.environ.get("PSIEPI_DISABLE_NUMBA", "").lower() in {"1", "true", "yes", "on"}:
        assert kernels.BACKEND == "numpy"
    else:
        assert kernels.BACKEND == ("numba" if NUMBA_AVAILABLE else "numpy")
