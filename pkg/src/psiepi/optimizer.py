"""Numerical search for states and measurements that minimise S.

Each restart starts from random states (psi_0 pinned to |0>, the others at a
random moderate fidelity with it) and random rank-1 triads, then repeats two
stages until S stops improving:

1. quasi-Newton descent (L-BFGS) jointly over the states, which live on unit
   spheres through normalisation, and each pair's orthonormal measurement
   frame, which lives on a Stiefel manifold through Gram-Schmidt;
2. an exact block-coordinate refinement of every pair's frame with the states
   held fixed (:func:`psiepi.kernels.measurement_sweep`).

Neither stage can increase S, so the recorded trace is non-increasing. With
``rank1_measurements=False`` the result is further polished with general PSD
effects (projected gradient on the POVM set) alternated with state descent.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from scipy.optimize import minimize

from . import kernels, seeding
from .errors import BadDimension, BadN, DimensionMismatch, InvalidScenario, PsiEpiError
from .inequality import FIELDS, ProbabilityTable, Scenario, born_table, pair_keys, s_value
from .quantum import Measurement, PureState, validate_measurement

MIN_SCENARIO_DIM = 3
MAX_SCENARIO_DIM = 8
MAX_N = 24
TIE_TOL = 1e-12
_MAX_ROUNDS = 20
_SWEEPS = 50
_INIT_FIDELITY = (0.3, 0.9)


@dataclass(frozen=True)
class OptimizerOptions:
    restarts: int = 64
    max_iters: int = 2000
    step_tolerance: float = 1e-10
    objective_tolerance: float = 1e-12
    seed: int = 0
    field: str = "real"
    rank1_measurements: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not (self.step_tolerance > 0 and self.objective_tolerance > 0):
            raise ValueError("tolerances must be positive")
        if self.field not in FIELDS:
            raise ValueError(f"field must be 'real' or 'complex', got {self.field!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    scenario: Scenario
    s: float
    theory_table: ProbabilityTable
    restarts_run: int
    best_restart_index: int
    converged: bool
    trace: tuple = ()
    restart_values: tuple = dc_field(default=(), repr=False)


def _check_size(dim: int, n: int) -> None:
    if not MIN_SCENARIO_DIM <= dim <= MAX_SCENARIO_DIM:
        raise BadDimension(f"dim must be in [{MIN_SCENARIO_DIM}, {MAX_SCENARIO_DIM}], got {dim}")
    if not 3 <= n <= MAX_N:
        raise BadN(f"n must be >= 3 (and <= {MAX_N}), got {n}")


def _indices(n: int):
    keys = pair_keys(n)
    ia = np.array([k[0] - 1 for k in keys], dtype=np.int64)
    ib = np.array([k[1] - 1 for k in keys], dtype=np.int64)
    return keys, ia, ib


def _gaussian(rng, shape, complex_field: bool) -> np.ndarray:
    x = rng.standard_normal(shape)
    if complex_field:
        x = x + 1j * rng.standard_normal(shape)
    return x


def _orthonormal_frames(Y1, Y2):
    u1 = Y1 / np.linalg.norm(Y1, axis=1, keepdims=True)
    v = Y2 - u1 * np.sum(u1.conj() * Y2, axis=1, keepdims=True)
    u2 = v / np.linalg.norm(v, axis=1, keepdims=True)
    return u1, u2


def random_scenario(dim: int, n: int, seed: int, field: str = "real") -> Scenario:
    """States uniform on the unit sphere and random rank-1 triads, reproducible from ``seed``."""
    _check_size(dim, n)
    if field not in FIELDS:
        raise ValueError(f"field must be 'real' or 'complex', got {field!r}")
    rng = seeding.rng(seed, seeding.SCENARIO)
    cplx = field == "complex"
    X = _gaussian(rng, (n + 1, dim), cplx)
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    keys = pair_keys(n)
    Y1 = _gaussian(rng, (len(keys), dim), cplx)
    Y2 = _gaussian(rng, (len(keys), dim), cplx)
    u1, u2 = _orthonormal_frames(Y1, Y2)
    states = tuple(PureState(x) for x in X)
    meas = {k: Measurement.from_frame(u1[p], u2[p]) for p, k in enumerate(keys)}
    return Scenario(states, meas, field)


# ---------------------------------------------------------------------------
# parameter packing
# ---------------------------------------------------------------------------


class _Packer:
    def __init__(self, n, P, d, cplx):
        self.shapes = [(n, d), (P, d), (P, d)]
        self.sizes = [n * d, P * d, P * d]
        self.cplx = cplx

    def pack(self, *arrays):
        flat = np.concatenate([a.ravel() for a in arrays])
        if self.cplx:
            return np.concatenate([flat.real, flat.imag])
        return flat.astype(float)

    def unpack(self, z):
        if self.cplx:
            half = z.size // 2
            z = z[:half] + 1j * z[half:]
        out = []
        start = 0
        for shape, size in zip(self.shapes, self.sizes):
            out.append(z[start:start + size].reshape(shape))
            start += size
        return out


def _lbfgs(psi0, X, U1, U2, ia, ib, options, maxiter, trace):
    packer = _Packer(X.shape[0], U1.shape[0], X.shape[1], np.iscomplexobj(X))

    def fun(z):
        Xz, Y1, Y2 = packer.unpack(z)
        S, _, _, GX, GY1, GY2 = kernels.objective_and_grad(psi0, Xz, Y1, Y2, ia, ib)
        return S, packer.pack(GX, GY1, GY2)

    def callback(intermediate_result):
        trace.append(float(intermediate_result.fun))

    res = minimize(
        fun,
        packer.pack(X, U1, U2),
        jac=True,
        method="L-BFGS-B",
        callback=callback,
        options=dict(maxiter=maxiter, ftol=options.objective_tolerance,
                     gtol=options.step_tolerance, maxcor=20),
    )
    Xn, Y1, Y2 = packer.unpack(res.x)
    Xn = Xn / np.linalg.norm(Xn, axis=1, keepdims=True)
    U1n, U2n = _orthonormal_frames(Y1, Y2)
    return Xn, U1n, U2n, res


def _value(psi0, X, U1, U2, ia, ib) -> float:
    return float(kernels.objective_and_grad(psi0, X, U1, U2, ia, ib)[0])


def _descend(psi0, X, U1, U2, ia, ib, options):
    """Alternate joint L-BFGS and exact frame sweeps; returns the final point and trace."""
    X = X / np.linalg.norm(X, axis=1, keepdims=True)
    U1, U2 = _orthonormal_frames(U1, U2)
    S = _value(psi0, X, U1, U2, ia, ib)
    trace = [S]
    budget = options.max_iters
    converged = False
    for _ in range(_MAX_ROUNDS):
        start = S
        lb_trace = []
        Xn, U1n, U2n, res = _lbfgs(psi0, X, U1, U2, ia, ib, options, budget, lb_trace)
        budget -= res.nit
        Sn = _value(psi0, Xn, U1n, U2n, ia, ib)
        if Sn <= S:
            X, U1, U2, S = Xn, U1n, U2n, Sn
            # L-BFGS reports values at unnormalised parameters; they can sit a
            # rounding error below the renormalised S, so keep only those above it
            for v in lb_trace:
                if S <= v <= trace[-1]:
                    trace.append(v)
            if trace[-1] != S:
                trace.append(S)
        U1n, U2n, _ = kernels.measurement_sweep(psi0, X, U1, U2, ia, ib, _SWEEPS,
                                                options.objective_tolerance)
        Sn = _value(psi0, X, U1n, U2n, ia, ib)
        if Sn < S:
            U1, U2, S = U1n, U2n, Sn
            trace.append(S)
        if start - S < options.objective_tolerance:
            converged = bool(res.success)
            break
        if budget <= 0:
            break
    return X, U1, U2, S, trace, converged


# ---------------------------------------------------------------------------
# general (not necessarily rank-1) effects
# ---------------------------------------------------------------------------


def _project_psd(M):
    w, v = np.linalg.eigh((M + M.conj().swapaxes(-1, -2)) / 2)
    return (v * np.clip(w, 0.0, None)[..., None, :]) @ v.conj().swapaxes(-1, -2)


def project_povm(effects, tol=1e-12, max_iters=5000):
    """Frobenius projection of 3 matrices onto {E_i >= 0, sum_i E_i = 1} (Dykstra)."""
    E = np.array(effects)
    d = E.shape[-1]
    eye = np.eye(d)
    p = np.zeros_like(E)
    q = np.zeros_like(E)
    for _ in range(max_iters):
        Y = E + p
        A = Y - (Y.sum(axis=0) - eye)[None] / 3.0
        p = Y - A
        Z = A + q
        B = _project_psd(Z)
        q = Z - B
        done = np.max(np.abs(B - E)) < tol
        E = B
        if done and np.max(np.abs(E.sum(axis=0) - eye)) < tol * 10:
            break
    return E


def _triple_value(rhos, E):
    return float(np.real(sum(np.trace(E[i] @ rhos[i]) for i in range(3))))


def refine_general_measurement(rhos, E, max_iters=500, tol=1e-12):
    """Projected gradient on the POVM set for min sum_i tr(E_i rho_i)."""
    E = np.array(E)
    f = _triple_value(rhos, E)
    step = 0.1
    for _ in range(max_iters):
        trial = project_povm(E - step * np.asarray(rhos))
        ft = _triple_value(rhos, trial)
        if ft < f - tol:
            gain = f - ft
            E, f = trial, ft
            step = min(step * 2.0, 10.0)
            if gain < tol:
                break
        else:
            step *= 0.5
            if step < 1e-10:
                break
    return E, f


def _general_polish(psi0, X, effects, ia, ib, options, trace):
    """Alternate general-effect refinement and state descent with effects fixed."""
    n, d = X.shape
    cplx = np.iscomplexobj(X)

    def value_grad(z):
        Xz = z[: n * d].reshape(n, d) if not cplx else (z[: n * d] + 1j * z[n * d:]).reshape(n, d)
        xn = np.linalg.norm(Xz, axis=1)
        psi = Xz / xn[:, None]
        ov = psi.conj() @ psi0
        sq = np.sqrt(np.maximum(1.0 - np.abs(ov) ** 2, 1e-300))
        den = np.sum(1.0 - sq)
        num = 1.0 + float(np.sum(np.real(np.einsum("i,pij,j->p", psi0.conj(), effects[:, 0], psi0))))
        Ea = effects[:, 1]
        Eb = effects[:, 2]
        pa = np.einsum("pij,pj->pi", Ea, psi[ia])
        pb = np.einsum("pij,pj->pi", Eb, psi[ib])
        num += float(np.sum(np.real(np.sum(psi[ia].conj() * pa, axis=1))))
        num += float(np.sum(np.real(np.sum(psi[ib].conj() * pb, axis=1))))
        g = np.zeros_like(psi)
        np.add.at(g, ia, 2.0 * pa)
        np.add.at(g, ib, 2.0 * pb)
        g = g / den - (num / den**2) * psi0[None, :] * (np.conj(ov) / sq)[:, None]
        GX = (g - np.real(np.sum(psi.conj() * g, axis=1))[:, None] * psi) / xn[:, None]
        GX = GX.ravel()
        if cplx:
            GX = np.concatenate([GX.real, GX.imag])
        return num / den, GX

    def pack(Xa):
        f = Xa.ravel()
        return np.concatenate([f.real, f.imag]) if cplx else f.astype(float)

    S = value_grad(pack(X))[0]
    for _ in range(_MAX_ROUNDS):
        start = S
        psi = X / np.linalg.norm(X, axis=1, keepdims=True)
        for p in range(len(ia)):
            rhos = [np.outer(v, v.conj()) for v in (psi0, psi[ia[p]], psi[ib[p]])]
            newE, f_new = refine_general_measurement(rhos, effects[p], tol=options.objective_tolerance)
            if f_new < _triple_value(rhos, effects[p]):
                effects = effects.copy()
                effects[p] = newE
        S_m = value_grad(pack(X))[0]
        if S_m < S:
            S = S_m
            trace.append(S)
        res = minimize(value_grad, pack(X), jac=True, method="L-BFGS-B",
                       options=dict(maxiter=options.max_iters, ftol=options.objective_tolerance,
                                    gtol=options.step_tolerance))
        if res.fun < S:
            z = res.x
            Xn = z[: n * d].reshape(n, d) if not cplx else (z[: n * d] + 1j * z[n * d:]).reshape(n, d)
            X = Xn / np.linalg.norm(Xn, axis=1, keepdims=True)
            S = float(res.fun)
            trace.append(S)
        if start - S < options.objective_tolerance:
            break
    return X, effects, S


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def _frame_effects(U1, U2):
    d = U1.shape[1]
    E1 = U1[:, :, None] * U1.conj()[:, None, :]
    E2 = U2[:, :, None] * U2.conj()[:, None, :]
    E0 = np.eye(d)[None] - E1 - E2
    return np.stack([E0, E1, E2], axis=1)


def _build_result_scenario(psi0, X, effects, keys, field_name) -> Scenario:
    states = (PureState(psi0),) + tuple(PureState(x) for x in X)
    meas = {k: Measurement.from_matrices(effects[p]) for p, k in enumerate(keys)}
    return Scenario(states, meas, field_name)


def _restart(args):
    dim, n, r, options = args
    keys, ia, ib = _indices(n)
    cplx = options.field == "complex"
    rng = seeding.rng(options.seed, seeding.OPTIMIZER, r)
    psi0 = np.zeros(dim, dtype=complex if cplx else float)
    psi0[0] = 1.0
    # start every psi_j at a moderate fidelity with psi_0; from uniform random
    # starts in d >= 4 most restarts collapse onto the flat S = 1 set psi_j -> psi_0
    X = _gaussian(rng, (n, dim), cplx)
    X[:, 0] = 0.0
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    f = rng.uniform(_INIT_FIDELITY[0], _INIT_FIDELITY[1], n)
    X *= np.sqrt(1.0 - f)[:, None]
    X[:, 0] = np.sqrt(f)
    Y1 = _gaussian(rng, (len(keys), dim), cplx)
    Y2 = _gaussian(rng, (len(keys), dim), cplx)
    return _solve_from(psi0, X, Y1, Y2, ia, ib, options)


def _solve_from(psi0, X, Y1, Y2, ia, ib, options):
    X, U1, U2, S, trace, converged = _descend(psi0, X, Y1, Y2, ia, ib, options)
    effects = _frame_effects(U1, U2)
    if not options.rank1_measurements:
        X, effects, S = _general_polish(psi0, X, effects, ia, ib, options, trace)
    return S, X, effects, tuple(trace), converged


def _pick_best(values):
    best = 0
    for i, v in enumerate(values):
        if v < values[best] - TIE_TOL:
            best = i
    return best


def _map(func, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, jobs))
    return [func(j) for j in jobs]


def optimize_scenario(dim: int, n: int, options: OptimizerOptions | None = None) -> OptimizationResult:
    """Multi-start minimisation of S for ``n + 1`` states in dimension ``dim``."""
    options = options or OptimizerOptions()
    _check_size(dim, n)
    keys, _, _ = _indices(n)
    jobs = [(dim, n, r, options) for r in range(options.restarts)]
    outcomes = _map(_restart, jobs, options.workers)
    values = [o[0] for o in outcomes]
    best = _pick_best(values)
    S, X, effects, trace, converged = outcomes[best]
    psi0 = np.zeros(dim, dtype=X.dtype)
    psi0[0] = 1.0
    scenario = _build_result_scenario(psi0, X, effects, keys, options.field)
    table = born_table(scenario)
    return OptimizationResult(
        scenario=scenario,
        s=s_value(scenario, table).s,
        theory_table=table,
        restarts_run=options.restarts,
        best_restart_index=best,
        converged=converged,
        trace=trace,
        restart_values=tuple(values),
    )


def _frame_from_effects(effects):
    """Leading eigenvectors of E1 and E2, orthonormalised."""
    u = []
    for E in effects[1:]:
        w, v = np.linalg.eigh((E + E.conj().T) / 2)
        u.append(v[:, -1])
    return u[0], u[1]


def reoptimize(scenario: Scenario, options: OptimizerOptions | None = None) -> OptimizationResult:
    """Warm-started descent from an existing scenario; never returns a worse S."""
    options = options or OptimizerOptions()
    if not isinstance(scenario, Scenario):
        raise InvalidScenario("reoptimize expects a Scenario")
    problems = scenario.problems()
    if problems:
        raise InvalidScenario(problems[0])
    keys, ia, ib = _indices(scenario.n)
    cplx = scenario.field == "complex" or any(not s.is_real for s in scenario.states)
    dtype = complex if cplx else float
    psi0 = scenario.states[0].coeffs.astype(dtype)
    X = np.array([s.coeffs for s in scenario.states[1:]], dtype=dtype)
    frames = [_frame_from_effects([e.matrix.astype(dtype) for e in scenario.measurements[k].effects])
              for k in keys]
    Y1 = np.array([f[0] for f in frames])
    Y2 = np.array([f[1] for f in frames])
    # a zero second frame vector (u2 parallel to u1) would break Gram-Schmidt
    degenerate = np.abs(np.sum(Y1.conj() * Y2, axis=1)) > 1 - 1e-9
    if np.any(degenerate):
        raise InvalidScenario("measurement effects E1 and E2 share their leading eigenvector")
    in_table = born_table(scenario)
    s_in = s_value(scenario, in_table).s
    S, Xn, effects, trace, converged = _solve_from(psi0, X, Y1, Y2, ia, ib, replace(options, field=scenario.field))
    out = _build_result_scenario(psi0, Xn, effects, keys, scenario.field)
    table = born_table(out)
    s_out = s_value(out, table).s
    if s_out > s_in:
        out, table, s_out, trace = scenario, in_table, s_in, (s_in,)
    return OptimizationResult(out, s_out, table, 1, 0, converged, tuple(trace), (s_out,))


# ---------------------------------------------------------------------------
# single triple
# ---------------------------------------------------------------------------


def triple_objective(psi0, a, b, effects) -> float:
    """sum_i <psi_{j_i}|E_i|psi_{j_i}> for the triple (psi0, a, b)."""
    return float(sum(np.real(np.vdot(v, E @ v)) for v, E in zip((psi0, a, b), effects)))


def _triple_value_grad(z, psi0, a, b, d, cplx):
    if cplx:
        half = z.size // 2
        z = z[:half] + 1j * z[half:]
    Y1 = z[:d]
    Y2 = z[d:]
    n1 = np.linalg.norm(Y1)
    u1 = Y1 / n1
    c = np.vdot(u1, Y2)
    v = Y2 - u1 * c
    vn = np.linalg.norm(v)
    u2 = v / vn
    al1, al2, be, ga = np.vdot(u1, psi0), np.vdot(u2, psi0), np.vdot(u1, a), np.vdot(u2, b)
    f = 1.0 - abs(al1) ** 2 - abs(al2) ** 2 + abs(be) ** 2 + abs(ga) ** 2
    g1 = -2.0 * psi0 * np.conj(al1) + 2.0 * a * np.conj(be)
    g2 = -2.0 * psi0 * np.conj(al2) + 2.0 * b * np.conj(ga)
    gv = (g2 - np.real(np.vdot(u2, g2)) * u2) / vn
    G2 = gv - u1 * np.vdot(u1, gv)
    g1 = g1 - np.conj(c) * gv - np.vdot(gv, u1) * Y2
    G1 = (g1 - np.real(np.vdot(u1, g1)) * u1) / n1
    G = np.concatenate([G1, G2])
    if cplx:
        G = np.concatenate([G.real, G.imag])
    return float(f), G


def basis_baseline(psi0: PureState, psiA: PureState, psiB: PureState) -> float:
    """Best objective over triads built from computational-basis projectors."""
    d = psi0.dim
    eye = np.eye(d)
    best = np.inf
    for i, j in itertools.permutations(range(d), 2):
        E = Measurement.from_frame(eye[i], eye[j])
        best = min(best, triple_objective(psi0.coeffs, psiA.coeffs, psiB.coeffs,
                                          [e.matrix for e in E.effects]))
    return best


def optimize_measurement_for_triple(psi0: PureState, psiA: PureState, psiB: PureState,
                                    options: OptimizerOptions | None = None) -> Measurement:
    """Three-outcome measurement minimising P(m0|psi0) + P(m1|psiA) + P(m2|psiB)."""
    options = options or OptimizerOptions()
    if not psi0.dim == psiA.dim == psiB.dim:
        raise DimensionMismatch("the three states must share a dimension")
    d = psi0.dim
    cplx = options.field == "complex" or not (psi0.is_real and psiA.is_real and psiB.is_real)
    dtype = complex if cplx else float
    vecs = [s.coeffs.astype(dtype) for s in (psi0, psiA, psiB)]
    eye = np.eye(d, dtype=dtype)
    starts = [np.concatenate([eye[i], eye[j]]) for i, j in itertools.permutations(range(d), 2)]
    # states themselves make natural frames: u1 along psi0, u2 along psiA, etc.
    for x, y in itertools.permutations(vecs, 2):
        if abs(np.vdot(x, y)) < 1 - 1e-6:
            starts.append(np.concatenate([x, y]))
    rng = seeding.rng(options.seed, seeding.TRIPLE)
    for _ in range(max(4, min(options.restarts, 16))):
        starts.append(_gaussian(rng, 2 * d, cplx))
    best_f, best_z = np.inf, None
    for z0 in starts:
        if cplx:
            z0 = np.concatenate([z0.real, z0.imag])
        res = minimize(_triple_value_grad, z0, args=(*vecs, d, cplx), jac=True, method="L-BFGS-B",
                       options=dict(maxiter=options.max_iters, ftol=options.objective_tolerance,
                                    gtol=options.step_tolerance))
        if res.fun < best_f - TIE_TOL:
            best_f, best_z = float(res.fun), res.x
    z = best_z[: best_z.size // 2] + 1j * best_z[best_z.size // 2:] if cplx else best_z
    u1, u2 = _orthonormal_frames(z[None, :d], z[None, d:])
    m = Measurement.from_frame(u1[0], u2[0])
    if not options.rank1_measurements:
        rhos = [np.outer(v, v.conj()) for v in vecs]
        E = np.array([e.matrix.astype(dtype) for e in m.effects])
        E2, f2 = refine_general_measurement(rhos, E, tol=options.objective_tolerance)
        if f2 < best_f:
            candidate = Measurement.from_matrices(E2)
            if validate_measurement(candidate).ok():
                m = candidate
    return m


__all__ = [
    "OptimizerOptions",
    "OptimizationResult",
    "random_scenario",
    "optimize_measurement_for_triple",
    "optimize_scenario",
    "reoptimize",
    "triple_objective",
    "basis_baseline",
    "project_povm",
    "refine_general_measurement",
    "PsiEpiError",
]
