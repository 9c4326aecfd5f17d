import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from incompat import core
from incompat.core import PAULI_X, PAULI_Y, PAULI_Z
from incompat.errors import (
    DimensionMismatch,
    NegativeEffect,
    NonHermitian,
    NotDichotomic,
    NotNormalized,
    TOutOfRange,
)


def test_trivial_povm_is_valid():
    p = core.validate_povm([np.eye(2) / 2, np.eye(2) / 2])
    assert p.k == 2 and p.dim == 2


def test_negative_effect_reports_eigenvalue():
    with pytest.raises(NegativeEffect) as info:
        core.validate_povm([np.diag([1.2, 0]), np.diag([-0.2, 1])])
    assert info.value.index == 1
    assert info.value.worst_eigenvalue == pytest.approx(-0.2)


def test_not_normalized_reports_deviation():
    with pytest.raises(NotNormalized) as info:
        core.validate_povm([np.diag([1, 0]), np.diag([0, 0.5])])
    assert info.value.deviation == pytest.approx(0.5)


def test_non_hermitian_rejected():
    with pytest.raises(NonHermitian):
        core.validate_povm([np.array([[1, 1], [0, 0]]), np.array([[0, -1], [0, 1]])])


def test_projective_basis_valid():
    p = core.validate_povm([np.diag([1, 0]), np.diag([0, 1])])
    assert core.is_projective(p)


def test_mixed_dimensions_rejected():
    with pytest.raises(DimensionMismatch):
        core.measurement_set([[np.eye(2)], [np.eye(3)]])


def test_effects_are_read_only():
    p = core.validate_povm([np.diag([1, 0]), np.diag([0, 1])])
    with pytest.raises(ValueError):
        p.effects[0][0, 0] = 5


def test_white_noise_examples():
    basis = core.validate_povm([np.diag([1, 0]), np.diag([0, 1])])
    same = core.apply_white_noise(basis, 1.0)
    assert all(np.allclose(a, b) for a, b in zip(same.effects, basis.effects))
    flat = core.apply_white_noise(basis, 0.0)
    assert all(np.allclose(e, np.eye(2) / 2) for e in flat.effects)
    half = core.apply_white_noise(basis, 0.5)
    assert np.allclose(half.effects[0], np.diag([0.75, 0.25]))
    assert np.allclose(half.effects[1], np.diag([0.25, 0.75]))
    assert not core.is_projective(half)


@pytest.mark.parametrize("t", [-0.1, 1.5])
def test_white_noise_range(t):
    with pytest.raises(TOutOfRange):
        core.apply_white_noise(core.validate_povm([np.eye(2)]), t)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.integers(0, 10_000))
def test_white_noise_composes_multiplicatively(t, s, seed):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    u, _ = np.linalg.qr(z)
    p = core.basis_measurement(u)
    twice = core.apply_white_noise(core.apply_white_noise(p, t), s)
    once = core.apply_white_noise(p, t * s)
    for a, b in zip(twice.effects, once.effects):
        assert np.max(np.abs(a - b)) <= 1e-12


def test_observable_examples():
    assert np.allclose(core.observable_of(core.validate_povm([np.eye(2) / 2] * 2)).matrix, 0)
    assert np.allclose(core.observable_of(core.validate_povm([np.diag([1, 0]), np.diag([0, 1])])).matrix, PAULI_Z)
    P = np.diag([1, 1, 0, 0, 0]).astype(complex)
    a = core.observable_of(core.validate_povm([P, np.eye(5) - P])).matrix
    assert np.allclose(np.sort(np.linalg.eigvalsh(a)), [-1, -1, -1, 1, 1])


def test_observable_needs_two_outcomes():
    with pytest.raises(NotDichotomic):
        core.observable_of(core.validate_povm([np.eye(2) / 3] * 3))


def test_dichotomic_spectrum_bound():
    with pytest.raises(NotDichotomic):
        core.dichotomic(2 * PAULI_Z)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5))
def test_observable_round_trip(seed, d):
    rng = np.random.default_rng(seed)
    h = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = h + h.conj().T
    a = h / (np.abs(np.linalg.eigvalsh(h)).max() + 1e-3)
    back = core.observable_of(core.povm_of(a)).matrix
    assert np.max(np.abs(back - a)) <= 1e-12


def test_trivial_single_effect_is_projective():
    assert core.is_projective(core.validate_povm([np.eye(3)]))


@pytest.mark.parametrize("g,d", [(1, 1), (2, 2), (3, 2), (4, 4), (5, 4), (6, 8), (7, 8)])
def test_pauli_basis_clifford_relations(g, d):
    obs = core.pauli_basis(g)
    assert len(obs) == g
    mats = [o.matrix for o in obs]
    assert all(m.shape == (d, d) for m in mats)
    for x, a in enumerate(mats):
        assert np.allclose(a @ a, np.eye(d))
        for y, b in enumerate(mats):
            assert np.trace(a @ b).real == pytest.approx(d if x == y else 0, abs=1e-12)
            if x != y:
                assert np.allclose(a @ b + b @ a, 0)


def test_pauli_small_cases_are_the_usual_matrices():
    assert [np.allclose(o.matrix, m) for o, m in zip(core.pauli_basis(3), (PAULI_Z, PAULI_X, PAULI_Y))] == [True] * 3


def test_json_round_trip():
    u = core.fourier_matrix(3)
    mset = core.measurement_set([core.basis_measurement(np.eye(3)), core.basis_measurement(u)])
    back = core.loads(core.dumps(mset))
    assert back.outcome_counts == (3, 3)
    for p, q in zip(mset.povms, back.povms):
        for a, b in zip(p.effects, q.effects):
            assert np.allclose(a, b, atol=1e-15)
    povm = core.loads(core.dumps(mset.povms[1]))
    assert povm.k == 3


def test_json_outcome_count_mismatch():
    data = core.measurement_set_to_dict(core.measurement_set([core.povm_of(PAULI_Z)]))
    data["outcome_counts"] = [3]
    with pytest.raises(DimensionMismatch):
        core.measurement_set_from_dict(data)


def test_fourier_is_unitary_and_unbiased():
    f = core.fourier_matrix(5)
    assert np.allclose(f.conj().T @ f, np.eye(5))
    assert np.allclose(np.abs(f), 1 / np.sqrt(5))
