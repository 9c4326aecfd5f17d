"""Principal angles between subspaces and two-dimensional compressions.

Two projections ``P, Q`` decompose the space into 2x2 blocks indexed by the
principal angles between their ranges.  Compressing to one such block turns
the pair ``(2P - I, 2Q - I)`` into a pair of qubit observables whose
compatibility degree has a closed form, which gives upper bounds on ``tau``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PAULI_X, PAULI_Y, PAULI_Z, dichotomic, opnorm
from .errors import DimensionMismatch, NoNontrivialAngle, ParameterOutOfRange, SinZero
from .sampling import Subspace

SIN_FLOOR = 1e-8


@dataclass(frozen=True)
class AngleSpectrum:
    """Non-trivial principal angles, ascending, plus counts of the forced ones.

    ``angles`` has ``min(rE, rF, d - rE, d - rF)`` entries; ``n_zero`` and
    ``n_right`` count the angles equal to 0 and pi/2 that are forced by the
    dimensions alone.
    """

    angles: np.ndarray
    dims: tuple
    n_zero: int = 0
    n_right: int = 0
    all_angles: np.ndarray | None = None

    def __len__(self):
        return len(self.angles)


@dataclass(frozen=True)
class BlochVector:
    m: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.m, dtype=float).reshape(3)
        if np.linalg.norm(v) > 1 + 1e-12:
            raise ParameterOutOfRange(f"Bloch vector norm {np.linalg.norm(v):.6g} > 1")
        object.__setattr__(self, "m", v)

    def observable(self) -> np.ndarray:
        return self.m[0] * PAULI_X + self.m[1] * PAULI_Y + self.m[2] * PAULI_Z

    @classmethod
    def of(cls, a) -> "BlochVector":
        """Bloch vector of an unbiased qubit observable ``a = m . sigma``."""
        a = np.asarray(a, dtype=complex)
        if a.shape != (2, 2):
            raise DimensionMismatch("Bloch vectors describe qubit observables")
        return cls(np.real([np.trace(a @ s) / 2 for s in (PAULI_X, PAULI_Y, PAULI_Z)]))


def _basis(sub) -> np.ndarray:
    if isinstance(sub, Subspace):
        return sub.basis
    b = np.asarray(sub, dtype=complex)
    if b.ndim != 2:
        raise DimensionMismatch("expected a Subspace or a d x r basis matrix")
    return b


def _projector_range(p: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the range of a projection."""
    w, v = np.linalg.eigh((p + p.conj().T) / 2)
    return v[:, w > 0.5]


def _overlap_svd(be, bf):
    if be.shape[0] != bf.shape[0]:
        raise DimensionMismatch(f"ambient dimensions {be.shape[0]} and {bf.shape[0]} differ")
    u, s, vh = np.linalg.svd(be.conj().T @ bf)
    return u, np.clip(s, 0.0, 1.0), vh


def principal_angles(E, F) -> AngleSpectrum:
    """Principal angles between subspaces ``E`` and ``F``.

    Parameters
    ----------
    E, F : Subspace or ndarray
        Subspaces, or ``d x r`` matrices with orthonormal columns.
    """
    be, bf = _basis(E), _basis(F)
    d, re_, rf = be.shape[0], be.shape[1], bf.shape[1]
    if bf.shape[0] != d:
        raise DimensionMismatch(f"ambient dimensions {d} and {bf.shape[0]} differ")
    if min(re_, rf) == 0:
        s = np.zeros(0)
    else:
        _, s, _ = _overlap_svd(be, bf)
    full = np.sort(np.arccos(s))
    n_zero = max(0, re_ + rf - d)
    n_right = abs(re_ - rf)
    n_triv = min(re_, rf, d - re_, d - rf)
    # the forced zeros sit at the start of the sorted list; the remaining
    # min(rE, rF) - n_zero angles are the non-trivial block
    block = full[n_zero : n_zero + n_triv]
    return AngleSpectrum(block, (d, re_, rf), n_zero, n_right, full)


def lambda_pm(alpha: float, beta: float) -> tuple[float, float]:
    """Edges of the limiting spectrum of ``PQP`` for projections of ranks ``alpha d`` and ``beta d``."""
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ParameterOutOfRange("alpha and beta must lie in (0, 1)")
    base = alpha + beta - 2 * alpha * beta
    root = 2 * math.sqrt(alpha * (1 - alpha) * beta * (1 - beta))
    return max(0.0, base - root), min(1.0, base + root)


def lambda_alpha(alpha: float) -> float:
    return 4 * alpha * (1 - alpha)


def in_disc(alpha: float, beta: float) -> bool:
    """``(alpha - 1/2)^2 + (beta - 1/2)^2 <= 1/4``, i.e. ``lambda_- <= 1/2 <= lambda_+``."""
    return (alpha - 0.5) ** 2 + (beta - 0.5) ** 2 <= 0.25


def compression_isometry(P, Q, target_angle: float = math.pi / 4):
    """Isometry ``V: C^2 -> C^d`` compressing ``(2P - I, 2Q - I)`` to a qubit pair.

    Picks the principal angle closest to ``target_angle`` and builds
    ``V = [e, (f - cos(theta) e)/sin(theta)]`` from the corresponding pair of
    principal vectors, so that ``V^H (2P - I) V = Z`` and
    ``V^H (2Q - I) V = cos(2 theta) Z + sin(2 theta) X``.

    Returns
    -------
    V : ndarray, shape (d, 2)
    theta : float
        The angle actually used.
    """
    P = np.asarray(P, dtype=complex)
    Q = np.asarray(Q, dtype=complex)
    if P.shape != Q.shape:
        raise DimensionMismatch("P and Q act on different dimensions")
    be, bf = _projector_range(P), _projector_range(Q)
    d, re_, rf = P.shape[0], be.shape[1], bf.shape[1]
    if min(re_, rf, d - re_, d - rf) == 0:
        raise NoNontrivialAngle("one range is trivial or the whole space")
    u, s, vh = _overlap_svd(be, bf)
    theta = np.arccos(s)
    if np.all(np.sin(theta) < SIN_FLOOR):
        raise NoNontrivialAngle("every principal angle is zero")
    i = int(np.argmin(np.abs(theta - target_angle)))
    th = float(theta[i])
    sin, cos = math.sin(th), math.cos(th)
    if sin < SIN_FLOOR:
        raise SinZero(f"principal angle {th:.3e} too small to build a compression")
    e = be @ u[:, i]
    f = bf @ vh[i].conj()
    # e, f are principal vectors with <e|f> = cos(theta) >= 0
    v2 = (f - cos * e) / sin
    v2 /= np.linalg.norm(v2)
    return np.column_stack([e, v2]), th


def compressed_pair(A, B, V):
    return V.conj().T @ A @ V, V.conj().T @ B @ V


def pauli_tau(m, n) -> float:
    """Compatibility degree of the unbiased qubit observables ``m.sigma`` and ``n.sigma``."""
    m = m.m if isinstance(m, BlochVector) else BlochVector(m).m
    n = n.m if isinstance(n, BlochVector) else BlochVector(n).m
    den = np.linalg.norm(m + n) + np.linalg.norm(m - n)
    if den == 0:
        return 1.0
    return float(min(1.0, 2.0 / den))


def _target_form(theta: float) -> np.ndarray:
    return math.cos(2 * theta) * PAULI_Z + math.sin(2 * theta) * PAULI_X


def default_target_angle(P, Q) -> float:
    """pi/4 in the disc regime, ``arccos(sqrt(lambda_alpha))`` otherwise (balanced-rank ratio)."""
    P = np.asarray(P)
    d = P.shape[0]
    alpha = float(np.real(np.trace(P))) / d
    beta = float(np.real(np.trace(np.asarray(Q)))) / d
    if not (0 < alpha < 1 and 0 < beta < 1) or in_disc(alpha, beta):
        return math.pi / 4
    lo, hi = lambda_pm(alpha, beta)
    # the block closest to the disc boundary: cos^2(theta) nearest 1/2 within [lo, hi]
    x = min(max(0.5, lo), hi)
    return math.acos(math.sqrt(x))


def compression_upper_bound(A, B, target_angle: float | None = None):
    """Upper bound on ``tau(A, B)`` from a two-dimensional compression.

    ``eps`` measures how far the compressed pair is from the exact target
    qubit pair; by the Lipschitz property of ``lambda`` the bound
    ``1/(1/pauli_tau - eps)`` holds whenever the denominator is positive.
    """
    from .criteria import UPPER, BoundValue

    a = dichotomic(A).matrix
    b = dichotomic(B).matrix
    d = a.shape[0]
    eye = np.eye(d)
    for name, m in (("A", a), ("B", b)):
        if np.max(np.abs(m @ m - eye)) > 1e-8:
            raise ParameterOutOfRange(f"{name} is not projective (A^2 != I)")
    P, Q = (eye + a) / 2, (eye + b) / 2
    if target_angle is None:
        target_angle = default_target_angle(P, Q)
    V, theta = compression_isometry(P, Q, target_angle)
    ca, cb = compressed_pair(a, b, V)
    eps = opnorm(ca - PAULI_Z) + opnorm(cb - _target_form(target_angle))
    n = np.array([math.sin(2 * target_angle), 0.0, math.cos(2 * target_angle)])
    tau_t = pauli_tau(np.array([0.0, 0.0, 1.0]), n)
    den = 1.0 / tau_t - eps
    value = min(1.0, 1.0 / den) if den > 0 else 1.0
    return BoundValue(
        value,
        UPPER,
        "compression",
        f"2x2 compression at angle {theta:.6g} (target {target_angle:.6g}), eps = {eps:.3e}",
    )


def jordan_min_curve(t: float, mode: str = "balanced", alpha: float = 0.5, beta: float | None = None) -> float:
    """Asymptotic minimum eigenvalue of the Jordan-product operator at noise ``t``.

    ``mode="balanced"`` uses ``1/4 - t^2/2`` (valid for
    ``1/(2 sqrt(lambda_+)) <= t <= 1/(2 sqrt(lambda_-))``);
    ``mode="unbalanced"`` uses ``(lambda_a - 1/2) t^2 - sqrt(lambda_a) t + 1/2``
    for ``0 <= t <= 1/(sqrt(lambda_a) + sqrt(1 - lambda_a))``.
    """
    if mode == "balanced":
        b = alpha if beta is None else beta
        lo, hi = lambda_pm(alpha, b)
        t_min = 1 / (2 * math.sqrt(hi))
        t_max = math.inf if lo == 0 else 1 / (2 * math.sqrt(lo))
        if not t_min - 1e-12 <= t <= t_max + 1e-12:
            raise ParameterOutOfRange(f"t = {t} outside [{t_min:.6g}, {t_max:.6g}]")
        return 0.25 - t * t / 2
    if mode == "unbalanced":
        if not 0 < alpha < 1 or in_disc(alpha, alpha):
            raise ParameterOutOfRange("unbalanced mode needs alpha outside the disc regime")
        lam = lambda_alpha(alpha)
        t_max = 1 / (math.sqrt(lam) + math.sqrt(1 - lam))
        if not -1e-12 <= t <= t_max + 1e-12:
            raise ParameterOutOfRange(f"t = {t} outside [0, {t_max:.6g}]")
        return (lam - 0.5) * t * t - math.sqrt(lam) * t + 0.5
    raise ParameterOutOfRange(f"unknown mode {mode!r}")


def unbalanced_prediction(alpha: float) -> float:
    lam = lambda_alpha(alpha)
    return 1 / (math.sqrt(lam) + math.sqrt(1 - lam))
