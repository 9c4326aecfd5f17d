"""Seeded samplers for Haar unitaries and the random measurement ensembles.

Haar unitaries come from a complex Ginibre matrix and a QR factorisation
whose ``R`` diagonal is normalised to positive reals (Mezzadri); without
that phase fix the output is not Haar distributed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Povm, as_hermitian, validate_povm
from .errors import AncillaTooSmall, ParameterOutOfRange, RankOutOfRange


@dataclass
class SeededRng:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Distinct ``stream_id`` values spawn independent child sequences of the
    same seed. The wrapped generator is stateful, so one instance must not
    be shared between threads.
    """

    seed: int = 0
    stream_id: int = 0
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if not (0 <= self.seed < 2**64 and 0 <= self.stream_id < 2**64):
            raise ParameterOutOfRange("seed and stream_id must be unsigned 64-bit integers")
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def spawn(self, stream_id: int) -> "SeededRng":
        return SeededRng(self.seed, stream_id)


def _gen(rng) -> np.random.Generator:
    if isinstance(rng, SeededRng):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    raise TypeError(f"expected SeededRng or numpy Generator, got {type(rng).__name__}")


@dataclass(frozen=True)
class Subspace:
    dim: int
    rank: int
    basis: np.ndarray  # dim x rank, orthonormal columns

    def projector(self) -> np.ndarray:
        return as_hermitian(self.basis @ self.basis.conj().T, tol=1e-10)


def ginibre(shape, rng) -> np.ndarray:
    gen = _gen(rng)
    return (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) / np.sqrt(2)


def _phase_fixed_qr(z: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    ph = diag / np.where(np.abs(diag) == 0, 1, np.abs(diag))
    return q * ph[..., None, :]


def haar_unitary(d: int, rng) -> np.ndarray:
    """Haar-distributed ``d x d`` unitary."""
    if d < 1:
        raise ParameterOutOfRange("d must be >= 1")
    return _phase_fixed_qr(ginibre((d, d), rng))


def haar_unitaries(d: int, n: int, rng) -> np.ndarray:
    """``n`` independent Haar unitaries stacked as an ``(n, d, d)`` array."""
    if d < 1 or n < 0:
        raise ParameterOutOfRange("need d >= 1 and n >= 0")
    return _phase_fixed_qr(ginibre((n, d, d), rng))


def haar_isometry(m: int, d: int, rng) -> np.ndarray:
    """First ``d`` columns of a Haar unitary on ``C^m`` (an ``m x d`` isometry).

    Sampled directly from an ``m x d`` Ginibre block, which has the same law
    as truncating a full ``m x m`` Haar unitary.
    """
    if not 1 <= d <= m:
        raise ParameterOutOfRange(f"need 1 <= d <= m, got d={d}, m={m}")
    return _phase_fixed_qr(ginibre((m, d), rng))


def haar_vectors(d: int, n: int, rng) -> np.ndarray:
    """``n`` uniform unit vectors in ``C^d`` as rows (the law of one column of a Haar unitary)."""
    z = ginibre((n, d), rng)
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def random_subspace(d: int, r: int, rng) -> Subspace:
    if not 0 <= r <= d:
        raise RankOutOfRange(f"rank {r} outside [0, {d}]")
    if r == 0:
        return Subspace(d, 0, np.zeros((d, 0), dtype=complex))
    return Subspace(d, r, haar_isometry(d, r, rng))


def random_projection(d: int, r: int, rng) -> np.ndarray:
    """Haar-random rank-``r`` orthogonal projection ``U P_0 U^*``."""
    return random_subspace(d, r, rng).projector()


def random_dichotomic(d: int, r: int, rng) -> np.ndarray:
    """Observable ``2P - I`` of a Haar-random rank-``r`` projection."""
    return as_hermitian(2 * random_projection(d, r, rng) - np.eye(d), tol=1e-10)


def random_basis_measurement(d: int, rng) -> Povm:
    u = haar_unitary(d, rng)
    return validate_povm([np.outer(u[:, i], u[:, i].conj()) for i in range(d)])


def random_induced_povm(d: int, k: int, n: int, rng) -> Povm:
    """Induced POVM ``M_i = V^* (|i><i| (x) I_n) V`` for a Haar isometry ``V: C^d -> C^k (x) C^n``."""
    if d < 1 or k < 1 or n < 1:
        raise ParameterOutOfRange("d, k, n must be positive")
    if k * n < d:
        raise AncillaTooSmall(f"k*n = {k * n} < d = {d}: no isometry exists")
    v = haar_isometry(k * n, d, rng)
    blocks = v.reshape(k, n, d)
    return validate_povm([b.conj().T @ b for b in blocks])


def induced_c(d: int, k: int, n: int) -> float:
    """Ancilla ratio ``c = d / (k n)``; ``c = 1`` is projective."""
    return d / (k * n)
