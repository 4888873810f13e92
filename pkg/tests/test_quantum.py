import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from psiepi import (
    Measurement,
    PureState,
    born_probability,
    make_state,
    quantum_overlap,
    validate_measurement,
)
from psiepi.errors import BadDimension, DimensionMismatch, NonFinite, NotNormalized, ZeroNorm
from psiepi.quantum import Effect, discrimination_success, fidelity, infidelity

from conftest import random_orthogonal


def test_make_state_keeps_normalised_input():
    s = make_state([1, 0, 0])
    assert s.coeffs.tolist() == [1.0, 0.0, 0.0]


def test_make_state_normalises():
    s = make_state([1, 1, 0, 0])
    np.testing.assert_allclose(s.coeffs, np.array([1, 1, 0, 0]) / np.sqrt(2), atol=1e-15)


@pytest.mark.parametrize("coeffs, exc", [
    ([0, 0, 0], ZeroNorm),
    ([1, np.nan, 0], NonFinite),
    ([1, np.inf], NonFinite),
    ([1.0], BadDimension),
    ([1.0] * 9, BadDimension),
    ([[1, 0], [0, 1]], BadDimension),
])
def test_make_state_errors(coeffs, exc):
    with pytest.raises(exc):
        make_state(coeffs)


def test_pure_state_does_not_rescale():
    with pytest.raises(NotNormalized):
        PureState(np.array([1.0, 1.0, 0.0]))
    PureState(np.array([1.0 + 5e-10, 0.0]))


def test_pure_state_is_immutable_and_reports_field():
    s = make_state([1, 1j, 0])
    assert not s.is_real
    with pytest.raises(ValueError):
        s.coeffs[0] = 0
    assert make_state(np.array([1, 2, 0], dtype=complex)).is_real


def test_born_examples():
    psi = make_state([0.3, -0.4, 0.5, 0.1])
    assert born_probability(psi, Effect(psi.projector())) == pytest.approx(1.0, abs=1e-15)
    e1 = np.diag([0.0, 1.0, 0.0])
    assert born_probability(make_state([1, 0, 0]), Effect(e1)) == 0.0
    e0 = np.diag([1.0, 0.0, 0.0])
    assert born_probability(make_state([1, 1, 0]), Effect(e0)) == pytest.approx(0.5, abs=1e-15)


def test_born_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        born_probability(make_state([1, 0]), Effect(np.eye(3)))


def test_born_global_phase():
    rng = np.random.default_rng(1)
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    a = make_state(v)
    b = make_state(v * np.exp(0.7j))
    E = Effect(np.diag([0.2, 0.5, 0.1, 0.9]))
    assert born_probability(a, E) == pytest.approx(born_probability(b, E), abs=1e-15)


def test_born_clamps_only_near_interval():
    psi = make_state([1, 0, 0])
    assert born_probability(psi, Effect(np.diag([-5e-10, 0, 0]))) == 0.0
    assert born_probability(psi, Effect(np.diag([1 + 5e-10, 0, 0]))) == 1.0
    assert born_probability(psi, Effect(np.diag([-0.1, 0, 0]))) == pytest.approx(-0.1)


def _state_with_fidelity(f, d=3):
    a = make_state(np.eye(d)[0])
    b = make_state(np.sqrt(f) * np.eye(d)[0] + np.sqrt(1 - f) * np.eye(d)[1])
    return a, b


def test_overlap_examples():
    a = make_state([1, 0, 0])
    assert quantum_overlap(a, a) == 1.0
    assert quantum_overlap(a, make_state([0, 1, 0])) == 0.0
    a, b = _state_with_fidelity(0.75)
    assert quantum_overlap(a, b) == pytest.approx(0.5, abs=1e-14)


def test_discrimination_examples():
    a = make_state([1, 0, 0])
    assert discrimination_success(a, a) == 0.5
    assert discrimination_success(a, make_state([0, 0, 1])) == 1.0
    a, b = _state_with_fidelity(0.75)
    assert discrimination_success(a, b) == pytest.approx(0.75, abs=1e-14)


def test_validate_measurement_examples():
    basis = Measurement.from_matrices([np.diag(r) for r in np.eye(3)])
    diag = validate_measurement(basis)
    assert diag.psd_ok and diag.hermitian_ok and diag.completeness_residual == 0.0

    p0 = np.diag([1.0, 0.0, 0.0]) * 2 / 3
    assert validate_measurement(Measurement.from_matrices([p0, p0, p0])).completeness_residual == pytest.approx(1.0)

    bad = Measurement.from_matrices([np.diag([1.1, 0, 0]), np.diag([-0.1, 1, 0]), np.diag([0, 0, 1.0])])
    assert not validate_measurement(bad).psd_ok


def test_validate_measurement_does_not_mutate():
    mats = [np.diag(r) for r in np.eye(3)]
    m = Measurement.from_matrices(mats)
    before = [e.matrix.copy() for e in m.effects]
    validate_measurement(m, 1e-3)
    for b, e in zip(before, m.effects):
        np.testing.assert_array_equal(b, e.matrix)
    with pytest.raises(ValueError):
        validate_measurement(m, 0.0)


def test_measurement_needs_three_equal_dim_effects():
    with pytest.raises(BadDimension):
        Measurement.from_matrices([np.eye(3), np.zeros((3, 3))])
    with pytest.raises(DimensionMismatch):
        Measurement.from_matrices([np.eye(3), np.zeros((3, 3)), np.zeros((2, 2))])


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

dims = st.integers(2, 8)
seeds = st.integers(0, 2**32 - 1)


def _random_state(d, rng, cplx):
    v = rng.standard_normal(d)
    if cplx:
        v = v + 1j * rng.standard_normal(d)
    return make_state(v)


def _random_povm(d, rng, cplx):
    """General three-outcome POVM: E_i = T^-1/2 A_i T^-1/2 with T = sum A_i."""
    A = []
    for _ in range(3):
        g = rng.standard_normal((d, d))
        if cplx:
            g = g + 1j * rng.standard_normal((d, d))
        A.append(g @ g.conj().T)
    w, v = np.linalg.eigh(sum(A))
    t = v @ np.diag(w ** -0.5) @ v.conj().T
    return Measurement.from_matrices([t @ a @ t for a in A])


@settings(max_examples=200, deadline=None)
@given(d=dims, seed=seeds, cplx=st.booleans())
def test_overlap_bounds_symmetry_unitary_invariance(d, seed, cplx):
    rng = np.random.default_rng(seed)
    a, b = _random_state(d, rng, cplx), _random_state(d, rng, cplx)
    w = quantum_overlap(a, b)
    assert 0.0 <= w <= 1.0
    assert w == quantum_overlap(b, a)
    U = random_orthogonal(d, rng, cplx)
    assert abs(quantum_overlap(make_state(U @ a.coeffs), make_state(U @ b.coeffs)) - w) < 1e-9
    assert 0.5 <= discrimination_success(a, b) <= 1.0
    assert fidelity(a, b) == pytest.approx(abs(np.vdot(a.coeffs, b.coeffs)) ** 2)


@settings(max_examples=200, deadline=None)
@given(d=dims, seed=seeds, cplx=st.booleans())
def test_outcome_probabilities_normalised(d, seed, cplx):
    rng = np.random.default_rng(seed)
    m = _random_povm(d, rng, cplx)
    assert validate_measurement(m, 1e-8).ok(1e-8)
    psi = _random_state(d, rng, cplx)
    raw = [float(np.real(np.vdot(psi.coeffs, e.matrix @ psi.coeffs))) for e in m.effects]
    assert all(-1e-9 <= p <= 1 + 1e-9 for p in raw)
    assert abs(sum(born_probability(psi, e) for e in m.effects) - 1.0) < 1e-7


@settings(max_examples=100, deadline=None)
@given(d=st.integers(3, 8), seed=seeds, cplx=st.booleans())
def test_rank1_triad_is_valid_povm(d, seed, cplx):
    rng = np.random.default_rng(seed)
    q = random_orthogonal(d, rng, cplx)
    m = Measurement.from_frame(q[:, 0], q[:, 1])
    diag = validate_measurement(m)
    assert diag.ok()
    psi = _random_state(d, rng, cplx)
    assert abs(sum(born_probability(psi, e) for e in m.effects) - 1.0) < 1e-7


@settings(max_examples=100, deadline=None)
@given(d=dims, seed=seeds, cplx=st.booleans())
def test_overlap_accurate_for_identical_states(d, seed, cplx):
    rng = np.random.default_rng(seed)
    a = _random_state(d, rng, cplx)
    U = random_orthogonal(d, rng, cplx)
    ua = make_state(U @ a.coeffs)
    assert quantum_overlap(a, a) == pytest.approx(1.0, abs=1e-12)
    assert quantum_overlap(ua, ua) == pytest.approx(1.0, abs=1e-12)
    b = _random_state(d, rng, cplx)
    assert infidelity(a, b) == pytest.approx(1 - fidelity(a, b), abs=1e-12)
