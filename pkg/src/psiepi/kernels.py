"""Hot numeric kernels.

Each kernel exists twice: ``<name>_numba`` (explicit loops, compiled with
numba) and ``<name>_numpy`` (vectorised numpy). The public name is bound to
one of them at import time according to :data:`psiepi._accel.USE_NUMBA`.
Both flavours accept real (float64) or complex (complex128) arrays.

Gradients follow the convention ``G = dF/dRe(z) + i dF/dIm(z)`` so that for a
real-valued F, ``dF = Re(vdot(G, dz))``; for real arrays this is the plain
gradient.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# S objective and gradient over raw (unnormalised) parameters
# ---------------------------------------------------------------------------


def objective_and_grad_numpy(psi0, X, Y1, Y2, ia, ib):
    """S value and gradient for the rank-1-triad parameterisation.

    ``X`` holds the raw amplitudes of states 1..n (row j-1 is state j);
    ``Y1``/``Y2`` hold the raw frame vectors of each pair's measurement, which
    are Gram-Schmidt orthonormalised into (u1, u2) with E1 = u1u1^H,
    E2 = u2u2^H and E0 = 1 - E1 - E2. ``ia``/``ib`` index into ``X``.

    Returns (S, numerator, denominator, GX, GY1, GY2).
    """
    xn = np.sqrt(np.sum(np.abs(X) ** 2, axis=1))
    psi = X / xn[:, None]
    y1n = np.sqrt(np.sum(np.abs(Y1) ** 2, axis=1))
    u1 = Y1 / y1n[:, None]
    c = np.sum(u1.conj() * Y2, axis=1)
    v = Y2 - u1 * c[:, None]
    vn = np.sqrt(np.sum(np.abs(v) ** 2, axis=1))
    u2 = v / vn[:, None]

    b = psi[ia]
    cc = psi[ib]
    al1 = u1.conj() @ psi0
    al2 = u2.conj() @ psi0
    be = np.sum(u1.conj() * b, axis=1)
    ga = np.sum(u2.conj() * cc, axis=1)
    terms = 1.0 - np.abs(al1) ** 2 - np.abs(al2) ** 2 + np.abs(be) ** 2 + np.abs(ga) ** 2
    num = 1.0 + np.sum(terms)

    ov = psi.conj() @ psi0
    fid = np.abs(ov) ** 2
    s = np.sqrt(np.maximum(1.0 - fid, 1e-300))
    den = np.sum(1.0 - s)
    S = num / den

    g_psi_n = np.zeros_like(psi)
    np.add.at(g_psi_n, ia, 2.0 * u1 * be[:, None])
    np.add.at(g_psi_n, ib, 2.0 * u2 * ga[:, None])
    g_psi_w = psi0[None, :] * (np.conj(ov) / s)[:, None]
    g_psi = g_psi_n / den - (num / den ** 2) * g_psi_w

    g_u1 = (-2.0 * psi0[None, :] * np.conj(al1)[:, None] + 2.0 * b * np.conj(be)[:, None]) / den
    g_u2 = (-2.0 * psi0[None, :] * np.conj(al2)[:, None] + 2.0 * cc * np.conj(ga)[:, None]) / den

    GX = (g_psi - np.real(np.sum(psi.conj() * g_psi, axis=1))[:, None] * psi) / xn[:, None]
    g_v = (g_u2 - np.real(np.sum(u2.conj() * g_u2, axis=1))[:, None] * u2) / vn[:, None]
    GY2 = g_v - u1 * np.sum(u1.conj() * g_v, axis=1)[:, None]
    sv = np.sum(g_v.conj() * u1, axis=1)
    g_u1 = g_u1 - np.conj(c)[:, None] * g_v - sv[:, None] * Y2
    GY1 = (g_u1 - np.real(np.sum(u1.conj() * g_u1, axis=1))[:, None] * u1) / y1n[:, None]
    return S, num, den, GX, GY1, GY2


@njit
def objective_and_grad_numba(psi0, X, Y1, Y2, ia, ib):
    n, d = X.shape
    P = Y1.shape[0]
    psi = np.empty_like(X)
    xn = np.empty(n)
    for j in range(n):
        acc = 0.0
        for k in range(d):
            acc += (X[j, k] * np.conj(X[j, k])).real
        xn[j] = np.sqrt(acc)
        for k in range(d):
            psi[j, k] = X[j, k] / xn[j]

    den = 0.0
    ov = np.empty(n, dtype=X.dtype)
    sq = np.empty(n)
    for j in range(n):
        o = 0.0 * X[0, 0]
        for k in range(d):
            o += np.conj(psi[j, k]) * psi0[k]
        ov[j] = o
        f = (o * np.conj(o)).real
        sq[j] = np.sqrt(max(1.0 - f, 1e-300))
        den += 1.0 - sq[j]

    u1 = np.empty_like(Y1)
    u2 = np.empty_like(Y2)
    y1n = np.empty(P)
    vn = np.empty(P)
    cs = np.empty(P, dtype=Y1.dtype)
    al1 = np.empty(P, dtype=Y1.dtype)
    al2 = np.empty(P, dtype=Y1.dtype)
    be = np.empty(P, dtype=Y1.dtype)
    ga = np.empty(P, dtype=Y1.dtype)
    num = 1.0
    for p in range(P):
        acc = 0.0
        for k in range(d):
            acc += (Y1[p, k] * np.conj(Y1[p, k])).real
        y1n[p] = np.sqrt(acc)
        c = 0.0 * Y1[0, 0]
        for k in range(d):
            u1[p, k] = Y1[p, k] / y1n[p]
            c += np.conj(u1[p, k]) * Y2[p, k]
        cs[p] = c
        acc = 0.0
        for k in range(d):
            u2[p, k] = Y2[p, k] - u1[p, k] * c
            acc += (u2[p, k] * np.conj(u2[p, k])).real
        vn[p] = np.sqrt(acc)
        for k in range(d):
            u2[p, k] = u2[p, k] / vn[p]
        a1 = 0.0 * Y1[0, 0]
        a2 = 0.0 * Y1[0, 0]
        bb = 0.0 * Y1[0, 0]
        gg = 0.0 * Y1[0, 0]
        ja = ia[p]
        jb = ib[p]
        for k in range(d):
            a1 += np.conj(u1[p, k]) * psi0[k]
            a2 += np.conj(u2[p, k]) * psi0[k]
            bb += np.conj(u1[p, k]) * psi[ja, k]
            gg += np.conj(u2[p, k]) * psi[jb, k]
        al1[p] = a1
        al2[p] = a2
        be[p] = bb
        ga[p] = gg
        num += (1.0 - (a1 * np.conj(a1)).real - (a2 * np.conj(a2)).real
                + (bb * np.conj(bb)).real + (gg * np.conj(gg)).real)
    S = num / den
    scale_w = num / (den * den)

    g_psi = np.zeros_like(X)
    GY1 = np.empty_like(Y1)
    GY2 = np.empty_like(Y2)
    gu1 = np.empty(d, dtype=Y1.dtype)
    gu2 = np.empty(d, dtype=Y1.dtype)
    gv = np.empty(d, dtype=Y1.dtype)
    for p in range(P):
        ja = ia[p]
        jb = ib[p]
        for k in range(d):
            g_psi[ja, k] += 2.0 * u1[p, k] * be[p] / den
            g_psi[jb, k] += 2.0 * u2[p, k] * ga[p] / den
            gu1[k] = (-2.0 * psi0[k] * np.conj(al1[p]) + 2.0 * psi[ja, k] * np.conj(be[p])) / den
            gu2[k] = (-2.0 * psi0[k] * np.conj(al2[p]) + 2.0 * psi[jb, k] * np.conj(ga[p])) / den
        r = 0.0
        for k in range(d):
            r += (np.conj(u2[p, k]) * gu2[k]).real
        for k in range(d):
            gv[k] = (gu2[k] - r * u2[p, k]) / vn[p]
        t = 0.0 * Y1[0, 0]
        sv = 0.0 * Y1[0, 0]
        for k in range(d):
            t += np.conj(u1[p, k]) * gv[k]
            sv += np.conj(gv[k]) * u1[p, k]
        for k in range(d):
            GY2[p, k] = gv[k] - u1[p, k] * t
            gu1[k] = gu1[k] - np.conj(cs[p]) * gv[k] - sv * Y2[p, k]
        r = 0.0
        for k in range(d):
            r += (np.conj(u1[p, k]) * gu1[k]).real
        for k in range(d):
            GY1[p, k] = (gu1[k] - r * u1[p, k]) / y1n[p]

    GX = np.empty_like(X)
    for j in range(n):
        w = np.conj(ov[j]) / sq[j]
        for k in range(d):
            g_psi[j, k] -= scale_w * psi0[k] * w
        r = 0.0
        for k in range(d):
            r += (np.conj(psi[j, k]) * g_psi[j, k]).real
        for k in range(d):
            GX[j, k] = (g_psi[j, k] - r * psi[j, k]) / xn[j]
    return S, num, den, GX, GY1, GY2


# ---------------------------------------------------------------------------
# Per-pair measurement refinement (block-coordinate eigen updates)
# ---------------------------------------------------------------------------

_SHIFT = 4.0


def _pair_terms_numpy(psi0, b, c, U1, U2):
    return (1.0 - np.abs(U1.conj() @ psi0) ** 2 - np.abs(U2.conj() @ psi0) ** 2
            + np.abs(np.sum(U1.conj() * b, axis=1)) ** 2
            + np.abs(np.sum(U2.conj() * c, axis=1)) ** 2)


def measurement_sweep_numpy(psi0, psi, U1, U2, ia, ib, max_sweeps, tol):
    """Refine orthonormal frames (u1, u2) of every pair with states fixed.

    Alternately sets u1 to the minimising eigenvector of
    |b><b| - |psi0><psi0| on the complement of u2, and u2 likewise with
    |c><c|. Each update is exact for its block, so no pair's objective
    increases. Returns (U1, U2, sweeps_done).
    """
    d = psi0.size
    b = psi[ia]
    c = psi[ib]
    aa = np.outer(psi0, psi0.conj())
    A = b[:, :, None] * b.conj()[:, None, :] - aa
    B = c[:, :, None] * c.conj()[:, None, :] - aa
    eye = np.eye(d)
    U1 = U1.copy()
    U2 = U2.copy()
    f = _pair_terms_numpy(psi0, b, c, U1, U2)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        P2 = U2[:, :, None] * U2.conj()[:, None, :]
        Q = eye - P2
        n1 = np.linalg.eigh(Q @ A @ Q + _SHIFT * P2)[1][:, :, 0]
        P1 = n1[:, :, None] * n1.conj()[:, None, :]
        Q = eye - P1
        n2 = np.linalg.eigh(Q @ B @ Q + _SHIFT * P1)[1][:, :, 0]
        fn = _pair_terms_numpy(psi0, b, c, n1, n2)
        better = fn < f
        U1[better] = n1[better]
        U2[better] = n2[better]
        gain = np.where(better, f - fn, 0.0)
        f = np.where(better, fn, f)
        if np.max(gain) < tol:
            break
    return U1, U2, sweeps


@njit
def measurement_sweep_numba(psi0, psi, U1, U2, ia, ib, max_sweeps, tol):
    P, d = U1.shape
    U1 = U1.copy()
    U2 = U2.copy()
    aa = np.outer(psi0, np.conj(psi0))
    eye = np.eye(d)
    done = 0
    for p in range(P):
        b = psi[ia[p]]
        c = psi[ib[p]]
        A = np.outer(b, np.conj(b)) - aa
        B = np.outer(c, np.conj(c)) - aa
        u1 = U1[p].copy()
        u2 = U2[p].copy()
        f = (1.0 - abs(np.vdot(u1, psi0)) ** 2 - abs(np.vdot(u2, psi0)) ** 2
             + abs(np.vdot(u1, b)) ** 2 + abs(np.vdot(u2, c)) ** 2)
        for it in range(1, max_sweeps + 1):
            P2 = np.outer(u2, np.conj(u2))
            Q = eye - P2
            n1 = np.linalg.eigh(Q @ A @ Q + _SHIFT * P2)[1][:, 0].copy()
            P1 = np.outer(n1, np.conj(n1))
            Q = eye - P1
            n2 = np.linalg.eigh(Q @ B @ Q + _SHIFT * P1)[1][:, 0].copy()
            fn = (1.0 - abs(np.vdot(n1, psi0)) ** 2 - abs(np.vdot(n2, psi0)) ** 2
                  + abs(np.vdot(n1, b)) ** 2 + abs(np.vdot(n2, c)) ** 2)
            if fn < f:
                gain = f - fn
                u1 = n1
                u2 = n2
                f = fn
            else:
                gain = 0.0
            if it > done:
                done = it
            if gain < tol:
                break
        U1[p] = u1
        U2[p] = u2
    return U1, U2, done


# ---------------------------------------------------------------------------
# Finite ontological models
# ---------------------------------------------------------------------------


def ontic_terms_numpy(mu, xi, ia, ib):
    """Per-model quantities entering the overlap theorem.

    ``mu`` is the (n+1, L) epistemic matrix, ``xi`` the (P, 3, L) responses.
    Returns (prob_sums (P,), triple (P,), pairwise (n,)) where prob_sums[p] is
    sum_i P(m_i | psi_{j_i}), triple[p] = sum_l min(mu0, mu_a, mu_b) and
    pairwise[j-1] = sum_l min(mu0, mu_j).
    """
    m0 = mu[0]
    ma = mu[ia]
    mb = mu[ib]
    prob = (xi[:, 0, :] @ m0) + np.sum(xi[:, 1, :] * ma, axis=1) + np.sum(xi[:, 2, :] * mb, axis=1)
    triple = np.sum(np.minimum(np.minimum(ma, mb), m0[None, :]), axis=1)
    pairwise = np.sum(np.minimum(mu[1:], m0[None, :]), axis=1)
    return prob, triple, pairwise


@njit
def ontic_terms_numba(mu, xi, ia, ib):
    P = xi.shape[0]
    L = mu.shape[1]
    n = mu.shape[0] - 1
    prob = np.zeros(P)
    triple = np.zeros(P)
    pairwise = np.zeros(n)
    for p in range(P):
        a = ia[p]
        b = ib[p]
        sp = 0.0
        st = 0.0
        for lam in range(L):
            sp += xi[p, 0, lam] * mu[0, lam] + xi[p, 1, lam] * mu[a, lam] + xi[p, 2, lam] * mu[b, lam]
            st += min(mu[0, lam], mu[a, lam], mu[b, lam])
        prob[p] = sp
        triple[p] = st
    for j in range(n):
        s = 0.0
        for lam in range(L):
            s += min(mu[0, lam], mu[j + 1, lam])
        pairwise[j] = s
    return prob, triple, pairwise


if USE_NUMBA:
    objective_and_grad = objective_and_grad_numba
    measurement_sweep = measurement_sweep_numba
    ontic_terms = ontic_terms_numba
else:
    objective_and_grad = objective_and_grad_numpy
    measurement_sweep = measurement_sweep_numpy
    ontic_terms = ontic_terms_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
