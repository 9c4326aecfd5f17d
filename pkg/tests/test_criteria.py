import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from incompat import core, criteria, sampling, sdp, spectra
from incompat.core import PAULI_X, PAULI_Z
from incompat.criteria import LOWER, UPPER
from incompat.errors import GTooLarge, ParameterOutOfRange, ProblemTooLarge

KET0 = np.diag([1.0, 0.0]).astype(complex)
KETP = np.full((2, 2), 0.5, dtype=complex)


def by_source(bounds):
    return {b.source: b for b in bounds}


def test_library_pauli_regime_is_tight():
    b = by_source(criteria.bound_library(8, 4))
    assert b["dichotomic-1/sqrt(g)"].value == 0.5
    assert b["dichotomic-1/sqrt(g)"].tight
    assert not by_source(criteria.bound_library(2, 4))["dichotomic-1/sqrt(g)"].tight


def test_library_central_binomial():
    assert by_source(criteria.bound_library(2, 2))["dichotomic-c(d)"].value == 0.5
    assert criteria.central_binomial_bound(3) == 0.5
    assert criteria.central_binomial_bound(4) == pytest.approx(6 / 16)


def test_library_cloning_for_bases():
    b = by_source(criteria.bound_library(2, 2, [2, 2], bases=True, mub=True))
    assert b["basis-cloning"].value == pytest.approx(2 / 3)
    assert b["mub"].kind == UPPER
    assert b["mub"].value == pytest.approx(1 / math.sqrt(2))
    assert b["kmax-cloning"].value == pytest.approx(6 / 10)


def test_library_k_list_length():
    with pytest.raises(ValueError):
        criteria.bound_library(2, 3, [2, 2])


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_library_consistent_with_sdp_on_mubs(d):
    mset = core.measurement_set([core.basis_measurement(np.eye(d)), core.basis_measurement(core.fourier_matrix(d))])
    tau = sdp.tau_general(mset)
    for b in criteria.applicable_bounds(mset):
        if b.kind == LOWER:
            assert b.value <= tau.upper + 1e-4, b
        else:
            assert b.value >= tau.lower - 1e-4, b


@pytest.mark.parametrize("g", [2, 3, 4])
def test_library_lower_bounds_below_pauli_degree(g):
    obs = core.pauli_basis(g)
    tau = sdp.tau_dichotomic(obs).lower
    for b in criteria.bound_library(obs[0].dim, g):
        assert b.value <= tau + 1e-4


def test_bound_value_range():
    with pytest.raises(ValueError):
        criteria.BoundValue(1.5, LOWER, "x")
    with pytest.raises(ValueError):
        criteria.BoundValue(0.5, "sideways", "x")


def test_jordan_compatible_examples():
    d = core.validate_povm([KET0, np.eye(2) - KET0])
    assert criteria.jordan_compatible(d, d)
    plus = core.validate_povm([KETP, np.eye(2) - KETP])
    assert not criteria.jordan_compatible(d, plus)
    assert criteria._min_anticommutator([KET0], [KETP]) == pytest.approx(-(1 / math.sqrt(2)) * (1 - 1 / math.sqrt(2)))
    trivial = core.validate_povm([np.eye(2) / 3] * 3)
    assert criteria.jordan_compatible(plus, trivial)


def test_jordan_dimension_mismatch():
    with pytest.raises(ValueError):
        criteria.jordan_compatible(core.validate_povm([np.eye(2)]), core.validate_povm([np.eye(3)]))


def test_jordan_lower_examples():
    assert criteria.jordan_tau_lower(KET0, KET0).value == 1.0
    v = criteria.jordan_tau_lower(KET0, KETP, tol=1e-5).value
    assert abs(v - 1 / math.sqrt(2)) <= 1e-5
    assert criteria._jordan_margin(KET0, KETP, 1 / math.sqrt(2)) == pytest.approx(0, abs=1e-12)


def test_jordan_lower_random_balanced():
    hits = 0
    for i in range(50):
        rng = sampling.SeededRng(31, i)
        P, Q = sampling.random_projection(100, 50, rng), sampling.random_projection(100, 50, rng)
        hits += abs(criteria.jordan_tau_lower(P, Q).value - 1 / math.sqrt(2)) <= 0.05
    assert hits >= 48


def test_jordan_is_sound_against_sdp():
    for i in range(100):
        rng = sampling.SeededRng(41, i)
        d = 2 + i % 2
        P = sampling.random_projection(d, 1, rng)
        Q = sampling.random_projection(d, 1 + (i // 2) % (d - 1), rng)
        lo = criteria.jordan_tau_lower(P, Q).value
        tau = sdp.tau_dichotomic([2 * P - np.eye(d), 2 * Q - np.eye(d)]).upper
        assert lo <= tau + 1e-4


def test_noise_content_examples():
    trivial = core.measurement_set([[np.eye(2) / 2] * 2] * 2)
    assert criteria.noise_content(trivial) == pytest.approx(2)
    assert criteria.noise_content_compatible(trivial)
    bases = core.measurement_set([core.basis_measurement(np.eye(3)), core.basis_measurement(core.fourier_matrix(3))])
    assert criteria.noise_content(bases) == pytest.approx(0, abs=1e-12)
    assert not criteria.noise_content_compatible(bases)
    e = np.diag([0.34, 0.66])
    three = core.measurement_set([[e, np.eye(2) - e]] * 3)
    assert criteria.noise_content(three) == pytest.approx(3 * 2 * 0.34)
    assert criteria.noise_content_compatible(three)


def test_noise_content_tau_lower_matches_test():
    bases = core.measurement_set([core.basis_measurement(np.eye(2)), core.basis_measurement(core.fourier_matrix(2))])
    t = criteria.noise_content_tau_lower(bases).value
    assert t == pytest.approx(0.5)
    assert criteria.noise_content_compatible(core.noisy_set(bases, t))
    assert not criteria.noise_content_compatible(core.noisy_set(bases, t + 0.01))


def test_witness_sufficient_examples():
    d, g, k = 3, 2, 3
    assert criteria.witness_sufficient([[np.zeros((d, d))] * k] * g)
    assert criteria.witness_sufficient([[np.eye(d) / (g * d)] * k] * g)
    assert not criteria.witness_sufficient([[np.eye(d) / (g * d) * 1.01] * k] * g)


def test_witness_sufficient_colinear_basis():
    us = [sampling.haar_unitary(3, sampling.SeededRng(8, i)) for i in range(3)]
    alpha = 1 / (3 * criteria.eta(us))
    W = [[alpha * np.outer(u[:, i], u[:, i].conj()) for i in range(3)] for u in us]
    assert criteria.witness_sufficient(W)
    W2 = [[1.01 * w for w in row] for row in W]
    assert not criteria.witness_sufficient(W2)


def test_witness_sufficient_guard():
    with pytest.raises(ProblemTooLarge):
        criteria.witness_sufficient([[np.zeros((1, 1))] * 4] * 10)


def test_colinear_examples():
    is_w, thr = criteria.colinear_projection_witness([PAULI_Z, PAULI_X], 1 / math.sqrt(2))
    assert is_w and thr == pytest.approx(1 / math.sqrt(2))
    is_w, thr = criteria.colinear_projection_witness([PAULI_Z, PAULI_X], 1e-6)
    assert is_w and thr > 1e5
    assert not criteria.colinear_projection_witness([PAULI_Z, PAULI_X], 0.8)[0]


def test_colinear_errors():
    with pytest.raises(ParameterOutOfRange):
        criteria.colinear_projection_witness([PAULI_Z / 2, PAULI_X], 0.5)
    with pytest.raises(GTooLarge):
        criteria.colinear_projection_witness([PAULI_Z] * 25, 0.1)


def test_max_sign_eigenvalue_half_enumeration():
    obs = [sampling.random_dichotomic(4, 2, sampling.SeededRng(0, i)) for i in range(4)]
    brute = max(
        np.linalg.eigvalsh(sum(e * a for e, a in zip(eps, obs)))[-1]
        for eps in np.array(np.meshgrid(*[[1, -1]] * 4)).T.reshape(-1, 4)
    )
    assert criteria.max_sign_eigenvalue(obs) == pytest.approx(brute, abs=1e-12)


def test_colinear_witness_soundness():
    checked = 0
    for i in range(12):
        rng = sampling.SeededRng(51, i)
        d = 2 * (1 + i % 3)
        g = 2 + i % 2
        obs = [sampling.random_dichotomic(d, d // 2, rng) for _ in range(g)]
        s = 1 / criteria.max_sign_eigenvalue(obs)
        is_w, thr = criteria.colinear_projection_witness(obs, s)
        t = thr + 0.02
        if not is_w or t > 1:
            continue
        mset = core.measurement_set([core.povm_of(a) for a in obs])
        assert not sdp.joint_feasible(mset, t)[0]
        checked += 1
    assert checked >= 6


def test_eta_examples():
    assert criteria.eta([np.eye(4)]) == 1.0
    assert criteria.eta([np.eye(3), np.eye(3)]) == pytest.approx(2)
    for d in (2, 3, 5):
        assert criteria.eta([np.eye(d), core.fourier_matrix(d)]) == pytest.approx(1 + 1 / math.sqrt(d), abs=1e-12)


def test_eta_guard():
    with pytest.raises(ProblemTooLarge):
        criteria.eta([np.eye(4)] * 11)


def test_eta_g2_examples():
    assert criteria.eta_g2(np.eye(3)) == 2
    assert criteria.eta_g2(core.fourier_matrix(2)) == pytest.approx(1.70711, abs=1e-5)


def test_eta_g2_matches_enumeration():
    for i in range(50):
        u = sampling.haar_unitary(8, sampling.SeededRng(61, i))
        assert abs(criteria.eta_g2(u) - criteria.eta([np.eye(8), u])) <= 1e-10


def test_eta_three_bases_in_range():
    us = [sampling.haar_unitary(4, sampling.SeededRng(62, i)) for i in range(3)]
    assert 1 <= criteria.eta(us) <= 3


def test_eta_threshold_examples():
    assert criteria.eta_incompatibility_threshold(3, 5, 3) == pytest.approx(1)
    assert criteria.eta_incompatibility_threshold(1 + 1 / math.sqrt(2), 2, 2) == pytest.approx(1 / math.sqrt(2))
    d, g = 2000, 4000
    e = 135 * math.log(d) * g / d
    assert criteria.eta_incompatibility_threshold(e, d, g) == pytest.approx((135 * math.log(d) - 1) / (d - 1))


def test_eta_threshold_errors():
    with pytest.raises(ParameterOutOfRange):
        criteria.eta_incompatibility_threshold(1.5, 1, 2)
    with pytest.raises(ParameterOutOfRange):
        criteria.eta_incompatibility_threshold(2.5, 4, 2)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 50), st.integers(1, 10), st.floats(0, 1))
def test_eta_threshold_monotone_and_bounded(d, g, frac):
    e = 1 + frac * (g - 1)
    thr = criteria.eta_incompatibility_threshold(e, d, g)
    assert thr <= 1 + 1e-12
    if g > 1:
        assert thr <= criteria.eta_incompatibility_threshold(min(g, e + 0.1), d, g) + 1e-12


def test_eta_lower_examples():
    rng = sampling.SeededRng(0)
    assert criteria.eta_lower_sampled([sampling.haar_unitary(4, rng)], 5, rng) == pytest.approx(1)
    assert criteria.eta_lower_sampled([np.eye(3), np.eye(3)], 5, rng) == pytest.approx(2)
    with pytest.raises(ParameterOutOfRange):
        criteria.eta_lower_sampled([np.eye(2)], 0, rng)


def test_eta_lower_never_exceeds_exact():
    for i in range(50):
        rng = sampling.SeededRng(71, i)
        u = sampling.haar_unitary(8, rng)
        assert criteria.eta_lower_sampled([np.eye(8), u], 50, rng) <= criteria.eta_g2(u) + 1e-10
    for i in range(10):
        rng = sampling.SeededRng(72, i)
        us = [sampling.haar_unitary(4, rng) for _ in range(3)]
        exact = criteria.eta(us)
        low = criteria.eta_lower_sampled(us, 200, rng)
        assert low <= exact + 1e-10
        assert low >= exact - 0.1


def test_haar_moment_consistency():
    for d in (2, 4, 8):
        v = sampling.haar_vectors(d, 100_000, sampling.SeededRng(81, d))
        x = (np.abs(v) ** 2) @ np.concatenate([np.ones(d // 2), -np.ones(d // 2)])
        se1 = x.std() / math.sqrt(len(x))
        assert abs(x.mean()) <= 3 * se1
        x2 = x**2
        se2 = x2.std() / math.sqrt(len(x))
        assert abs(x2.mean() - float(spectra.haar_projection_moment(d, 2))) <= 3 * se2


def test_applicable_bounds_qubit_mub():
    mset = core.measurement_set([core.povm_of(PAULI_Z), core.povm_of(PAULI_X)])
    b = by_source(criteria.applicable_bounds(mset))
    assert {"jordan", "compression", "mub", "basis-cloning", "noise-content"} <= set(b)
    assert b["jordan"].value == pytest.approx(1 / math.sqrt(2), abs=1e-5)
    assert b["compression"].value == pytest.approx(1 / math.sqrt(2), abs=1e-12)
