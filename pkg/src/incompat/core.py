"""Effects, POVMs, dichotomic observables and the white-noise map.

Hermitian operators are plain read-only ``numpy`` arrays that passed
:func:`as_hermitian`; the containers below are frozen dataclasses holding
tuples of such arrays, so every object is immutable after construction.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    NegativeEffect,
    NonHermitian,
    NotDichotomic,
    NotNormalized,
    ParameterOutOfRange,
    TOutOfRange,
)

HERMITIAN_TOL = 1e-12
EIG_FLOOR = 1e-9

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def as_hermitian(matrix, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return a read-only complex copy of ``matrix`` after checking Hermiticity.

    The stored copy is exactly symmetrised, so ``eigvalsh`` on it returns
    real eigenvalues sorted ascending.
    """
    m = np.array(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {m.shape}")
    dev = np.max(np.abs(m - m.conj().T))
    if dev > tol * max(1.0, np.max(np.abs(m))):
        raise NonHermitian(f"matrix is not Hermitian: max |A - A^H| = {dev:.3e}")
    m = (m + m.conj().T) / 2
    m.setflags(write=False)
    return m


def eigvalsh(matrix) -> np.ndarray:
    return np.linalg.eigvalsh(matrix)


def lambda_min(matrix) -> float:
    return float(np.linalg.eigvalsh(matrix)[0])


def lambda_max(matrix) -> float:
    return float(np.linalg.eigvalsh(matrix)[-1])


def opnorm(matrix) -> float:
    """Operator (spectral) norm."""
    return float(np.linalg.norm(matrix, 2))


@dataclass(frozen=True)
class Povm:
    dim: int
    effects: tuple

    @property
    def k(self) -> int:
        return len(self.effects)

    def __iter__(self):
        return iter(self.effects)

    def __len__(self):
        return len(self.effects)

    def __getitem__(self, i):
        return self.effects[i]


@dataclass(frozen=True)
class DichotomicObservable:
    """Hermitian ``A`` with ``-I <= A <= I``; encodes the POVM ``((I+A)/2, (I-A)/2)``."""

    dim: int
    matrix: np.ndarray

    def povm(self) -> Povm:
        return povm_of(self)


@dataclass(frozen=True)
class MeasurementSet:
    dim: int
    povms: tuple

    @property
    def g(self) -> int:
        return len(self.povms)

    @property
    def outcome_counts(self) -> tuple:
        return tuple(p.k for p in self.povms)

    def __iter__(self):
        return iter(self.povms)

    def __len__(self):
        return len(self.povms)

    def __getitem__(self, x):
        return self.povms[x]


def validate_povm(effects: Iterable) -> Povm:
    """Check positivity and normalisation and return an immutable :class:`Povm`.

    Raises
    ------
    NonHermitian, NegativeEffect, NotNormalized, DimensionMismatch
    """
    if isinstance(effects, Povm):
        return effects
    mats = [as_hermitian(e) for e in effects]
    if not mats:
        raise DimensionMismatch("a POVM needs at least one effect")
    d = mats[0].shape[0]
    if any(m.shape != (d, d) for m in mats):
        raise DimensionMismatch("effects have different dimensions")
    for i, m in enumerate(mats):
        low = lambda_min(m)
        if low < -EIG_FLOOR:
            raise NegativeEffect(i, low)
    dev = np.max(np.abs(sum(mats) - np.eye(d)))
    if dev > EIG_FLOOR:
        raise NotNormalized(dev)
    return Povm(d, tuple(mats))


def measurement_set(povms: Sequence) -> MeasurementSet:
    """Bundle POVMs (or effect lists) sharing one dimension."""
    ps = tuple(validate_povm(p) for p in povms)
    if not ps:
        raise DimensionMismatch("a measurement set needs at least one POVM")
    d = ps[0].dim
    if any(p.dim != d for p in ps):
        raise DimensionMismatch("POVMs act on different dimensions")
    return MeasurementSet(d, ps)


def apply_white_noise(povm: Povm, t: float) -> Povm:
    """Mix every effect with ``I/k``: ``E_i -> t E_i + (1 - t) I / k``."""
    if not 0.0 <= t <= 1.0:
        raise TOutOfRange(f"noise parameter must lie in [0, 1], got {t}")
    povm = validate_povm(povm)
    k, d = povm.k, povm.dim
    noisy = [t * e + (1 - t) * np.eye(d) / k for e in povm.effects]
    return validate_povm(noisy)


def noisy_set(mset: MeasurementSet, t: float) -> MeasurementSet:
    return MeasurementSet(mset.dim, tuple(apply_white_noise(p, t) for p in mset.povms))


def dichotomic(matrix, tol: float = EIG_FLOOR) -> DichotomicObservable:
    if isinstance(matrix, DichotomicObservable):
        return matrix
    a = as_hermitian(matrix)
    ev = eigvalsh(a)
    if ev[0] < -1 - tol or ev[-1] > 1 + tol:
        raise NotDichotomic(f"spectrum [{ev[0]:.6g}, {ev[-1]:.6g}] leaves [-1, 1]")
    return DichotomicObservable(a.shape[0], a)


def observable_of(povm: Povm) -> DichotomicObservable:
    povm = validate_povm(povm)
    if povm.k != 2:
        raise NotDichotomic(f"expected 2 effects, got {povm.k}")
    return dichotomic(2 * povm.effects[0] - np.eye(povm.dim))


def povm_of(obs) -> Povm:
    a = dichotomic(obs).matrix
    eye = np.eye(a.shape[0])
    return validate_povm([(eye + a) / 2, (eye - a) / 2])


def is_projective(povm: Povm, tol: float = 1e-9) -> bool:
    return all(np.max(np.abs(e @ e - e)) <= tol for e in validate_povm(povm).effects)


def _kron_all(mats):
    return reduce(np.kron, mats, np.eye(1, dtype=complex))


def pauli_basis(g: int) -> list[DichotomicObservable]:
    """``g`` pairwise anticommuting Hermitian unitaries on ``2**ceil((g-1)/2)`` dims.

    Built as the usual Clifford chain on ``n`` qubits: the all-``Z`` string
    first, then ``Z..Z X I..I`` and ``Z..Z Y I..I`` for each slot.  For
    ``g = 2, 3`` this gives ``(Z, X)`` and ``(Z, X, Y)``.
    """
    if g < 1:
        raise ParameterOutOfRange("g must be >= 1")
    n = -(-(g - 1) // 2)
    gens = [_kron_all([PAULI_Z] * n)]
    for j in range(n):
        head = [PAULI_Z] * j
        tail = [PAULI_I] * (n - j - 1)
        gens.append(_kron_all(head + [PAULI_X] + tail))
        gens.append(_kron_all(head + [PAULI_Y] + tail))
    return [dichotomic(m) for m in gens[:g]]


def basis_measurement(unitary) -> Povm:
    """Rank-one projective POVM onto the columns of ``unitary``."""
    u = np.asarray(unitary, dtype=complex)
    return validate_povm([np.outer(u[:, i], u[:, i].conj()) for i in range(u.shape[1])])


def fourier_matrix(d: int) -> np.ndarray:
    j, k = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    return np.exp(2j * np.pi * j * k / d) / np.sqrt(d)


# -- JSON ---------------------------------------------------------------------

def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise DimensionMismatch("matrices are encoded as rows of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def povm_to_dict(povm: Povm) -> dict:
    return {"dim": povm.dim, "effects": [matrix_to_json(e) for e in povm.effects]}


def povm_from_dict(data: dict) -> Povm:
    povm = validate_povm([matrix_from_json(e) for e in data["effects"]])
    if "dim" in data and data["dim"] != povm.dim:
        raise DimensionMismatch(f"declared dim {data['dim']} != {povm.dim}")
    return povm


def measurement_set_to_dict(mset: MeasurementSet) -> dict:
    return {
        "dim": mset.dim,
        "outcome_counts": list(mset.outcome_counts),
        "povms": [povm_to_dict(p) for p in mset.povms],
    }


def measurement_set_from_dict(data: dict) -> MeasurementSet:
    if "povms" not in data:
        # a bare POVM is a one-element set
        return measurement_set([povm_from_dict(data)])
    mset = measurement_set([povm_from_dict(p) for p in data["povms"]])
    counts = data.get("outcome_counts")
    if counts is not None and tuple(counts) != mset.outcome_counts:
        raise DimensionMismatch(f"outcome_counts {counts} do not match {mset.outcome_counts}")
    return mset


def dumps(obj, **kw) -> str:
    if isinstance(obj, MeasurementSet):
        return json.dumps(measurement_set_to_dict(obj), **kw)
    if isinstance(obj, Povm):
        return json.dumps(povm_to_dict(obj), **kw)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def loads(text: str):
    data = json.loads(text)
    if "povms" in data:
        return measurement_set_from_dict(data)
    return povm_from_dict(data)
