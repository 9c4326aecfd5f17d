"""Closed-form compatibility and incompatibility criteria.

One-sided tests come back as :class:`BoundValue` records (a number, whether
it bounds ``tau`` from below or above, and where it came from), so a report
never has to squeeze "compatible / incompatible / unknown" into a boolean.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from math import comb

import numpy as np

from .core import MeasurementSet, Povm, dichotomic, measurement_set, validate_povm
from .errors import DimensionMismatch, GTooLarge, ParameterOutOfRange, ProblemTooLarge
from .sdp import _sign_chunks

LOWER, UPPER = "LowerOnTau", "UpperOnTau"
PSD_FLOOR = 1e-9
MAX_ENUM = 10**6
MAX_G_SIGNS = 24


@dataclass(frozen=True)
class BoundValue:
    value: float
    kind: str
    source: str
    applicability: str = ""
    tight: bool = False

    def __post_init__(self):
        if self.kind not in (LOWER, UPPER):
            raise ValueError(f"unknown bound kind {self.kind!r}")
        if not -1e-12 <= self.value <= 1 + 1e-12:
            raise ValueError(f"bound value {self.value} outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "kind": self.kind,
            "source": self.source,
            "applicability": self.applicability,
            "tight": self.tight,
        }


def central_binomial_bound(d: int) -> float:
    """``c(d) = 4^{-d'} binom(2d', d')`` with ``d' = floor(d/2)``."""
    dp = d // 2
    return comb(2 * dp, dp) / 4**dp


def bound_library(d: int, g: int, k_list=None, *, bases: bool = False, mub: bool = False) -> list[BoundValue]:
    """Known bounds on the compatibility degree for the given sizes.

    Parameters
    ----------
    d, g : int
        Dimension and number of measurements.
    k_list : sequence of int, optional
        Outcome counts; defaults to all dichotomic.
    bases : bool
        The measurements are basis measurements (adds the cloning bound).
    mub : bool
        The bases are mutually unbiased (adds the MUB upper bound).

    Lower bounds hold for every set with these sizes. ``tight=True`` marks
    a bound attained by some set of that size.
    """
    if d < 1 or g < 1:
        raise ParameterOutOfRange("need d >= 1 and g >= 1")
    ks = [2] * g if k_list is None else list(k_list)
    if len(ks) != g:
        raise DimensionMismatch(f"{len(ks)} outcome counts for g = {g}")
    out = []
    if all(k == 2 for k in ks):
        tight = d >= 2 ** math.ceil((g - 1) / 2)
        out.append(BoundValue(1 / math.sqrt(g), LOWER, "dichotomic-1/sqrt(g)", "dichotomic sets", tight))
        out.append(BoundValue(central_binomial_bound(d), LOWER, "dichotomic-c(d)", "dichotomic sets"))
    out.append(BoundValue(1 / g, LOWER, "1/g", "any set"))
    kmax = max(ks)
    out.append(
        BoundValue((g + kmax * d) / (g * (1 + kmax * d)), LOWER, "kmax-cloning", "any set, k_max outcomes")
    )
    if bases:
        out.append(BoundValue((g + d) / (g * (d + 1)), LOWER, "basis-cloning", "basis measurements"))
    if mub:
        rd = math.sqrt(d)
        out.append(
            BoundValue((g + rd) / (g * (rd + 1)), UPPER, "mub", "mutually unbiased bases", tight=g == 2)
        )
    return out


# -- Jordan product and noise content ------------------------------------------

def _min_anticommutator(M, N) -> float:
    return min(
        float(np.linalg.eigvalsh(m @ n + n @ m)[0]) for m in M for n in N
    )


def jordan_compatible(M, N) -> bool:
    """Sufficient test: every anticommutator ``M_i N_j + N_j M_i`` is PSD."""
    M, N = validate_povm(M), validate_povm(N)
    if M.dim != N.dim:
        raise DimensionMismatch("POVMs act on different dimensions")
    return _min_anticommutator(M.effects, N.effects) >= -PSD_FLOOR


def _jordan_margin(P, Q, t: float) -> float:
    d = P.shape[0]
    eye = np.eye(d)
    worst = np.inf
    for p in (P, eye - P):
        for q in (Q, eye - Q):
            op = t * t * (p @ q + q @ p) + t * (1 - t) * (p + q) + (1 - t) ** 2 * eye / 2
            worst = min(worst, float(np.linalg.eigvalsh(op)[0]))
    return worst


def jordan_tau_lower(P, Q, tol: float = 1e-5) -> BoundValue:
    """Largest ``t`` (to within ``tol``) at which the noisy pair ``(P, I-P)``, ``(Q, I-Q)`` passes the Jordan test."""
    P = np.asarray(P, dtype=complex)
    Q = np.asarray(Q, dtype=complex)
    if P.shape != Q.shape or P.ndim != 2:
        raise DimensionMismatch("P and Q must be square matrices of equal size")
    ok = lambda t: _jordan_margin(P, Q, t) >= -PSD_FLOOR  # noqa: E731
    if ok(1.0):
        return BoundValue(1.0, LOWER, "jordan", "two dichotomic measurements", tight=True)
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return BoundValue(lo, LOWER, "jordan", "two dichotomic measurements")


def noise_content(mset) -> float:
    """``sum_x sum_i lambda_min(E_{i|x})``."""
    mset = mset if isinstance(mset, MeasurementSet) else measurement_set(mset)
    return sum(float(np.linalg.eigvalsh(e)[0]) for p in mset.povms for e in p.effects)


def noise_content_compatible(mset) -> bool:
    """Sufficient test: the eigenvalue sum reaches ``g - 1``."""
    mset = mset if isinstance(mset, MeasurementSet) else measurement_set(mset)
    return noise_content(mset) >= mset.g - 1 - PSD_FLOOR


def noise_content_tau_lower(mset) -> BoundValue:
    """Largest ``t`` at which the noisy set passes the eigenvalue-sum test.

    White noise maps the sum ``N`` to ``tN + (1-t)g``, so the test holds
    exactly for ``t <= 1/(g - N)``.
    """
    mset = mset if isinstance(mset, MeasurementSet) else measurement_set(mset)
    gap = mset.g - noise_content(mset)
    value = 1.0 if gap <= 1 else 1.0 / gap
    return BoundValue(value, LOWER, "noise-content", "any set")


# -- enumeration helpers --------------------------------------------------------

def _index_chunks(counts, chunk: int = 8192):
    """All tuples in ``prod(range(k) for k in counts)`` as integer arrays, chunked."""
    counts = list(counts)
    total = math.prod(counts)
    radix = np.cumprod([1] + counts[:-1])
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        yield (idx[:, None] // radix[None, :]) % np.asarray(counts)[None, :]


def witness_sufficient(W) -> bool:
    """Is ``W`` an incompatibility witness with the maximally mixed state?

    Checks ``lambda_max(sum_x W_{f(x)|x}) <= 1/d`` over every outcome
    selection ``f``.
    """
    rows = [np.asarray([np.asarray(w, dtype=complex) for w in row]) for row in W]
    if not rows:
        return True
    d = rows[0].shape[-1]
    counts = [r.shape[0] for r in rows]
    if any(r.shape[1:] != (d, d) for r in rows):
        raise DimensionMismatch("witness operators have inconsistent shapes")
    if math.prod(counts) > MAX_ENUM:
        raise ProblemTooLarge(f"{math.prod(counts)} outcome selections exceed {MAX_ENUM}")
    limit = 1.0 / d + 1e-10
    for f in _index_chunks(counts):
        s = sum(rows[x][f[:, x]] for x in range(len(rows)))
        if np.linalg.eigvalsh(s)[:, -1].max() > limit:
            return False
    return True


# -- sign-pattern witness for projective observables ----------------------------

def max_sign_eigenvalue(observables) -> float:
    """``max_eps lambda_max(sum_x eps_x A_x)`` over all sign patterns.

    ``eps`` and ``-eps`` give spectra that are negatives of each other, so
    half the patterns suffice when both ends of the spectrum are read.
    """
    mats = np.asarray([dichotomic(a).matrix for a in observables])
    g = len(mats)
    if g > MAX_G_SIGNS:
        raise GTooLarge(f"g = {g} needs 2^{g} patterns; limit is {MAX_G_SIGNS}")
    if g == 1:
        return float(np.abs(np.linalg.eigvalsh(mats[0])).max())
    best = -np.inf
    for signs in _sign_chunks(g - 1):
        s = mats[0][None] + np.einsum("se,eij->sij", signs, mats[1:])
        ev = np.linalg.eigvalsh(s)
        best = max(best, float(ev[:, -1].max()), float(-ev[:, 0].min()))
    return best


def colinear_projection_witness(observables, s: float) -> tuple[bool, float]:
    """Test the witness ``W_x = s A_x / d`` (with state ``I/d``) on projective observables.

    Returns
    -------
    is_witness : bool
        ``lambda_max(sum_x eps_x A_x) <= 1/s`` for every sign pattern.
    threshold : float
        ``1/(s g)``; when ``is_witness`` holds, the noisy set is certified
        incompatible for every ``t`` above it.
    """
    mats = [dichotomic(a).matrix for a in observables]
    g = len(mats)
    if g > MAX_G_SIGNS:
        raise GTooLarge(f"g = {g} needs 2^{g} patterns; limit is {MAX_G_SIGNS}")
    if s <= 0:
        raise ParameterOutOfRange("s must be positive")
    for x, a in enumerate(mats):
        if np.max(np.abs(a @ a - np.eye(a.shape[0]))) > 1e-8:
            raise ParameterOutOfRange(f"observable {x} is not projective (A^2 != I)")
    top = max_sign_eigenvalue(mats)
    return bool(top <= 1 / s + 1e-9), 1.0 / (s * g)


def colinear_certifies(observables, s: float, t: float) -> bool:
    """``is_witness`` and the noisy pairing ``s t g`` exceeds 1."""
    is_w, thr = colinear_projection_witness(observables, s)
    return is_w and t > thr


# -- eta for basis measurements ---------------------------------------------------

def _unitaries(U):
    us = [np.asarray(u, dtype=complex) for u in U]
    if not us:
        raise DimensionMismatch("need at least one unitary")
    d = us[0].shape[0]
    if any(u.shape != (d, d) for u in us):
        raise DimensionMismatch("unitaries have different sizes")
    return us, d


def eta(U) -> float:
    """Largest top eigenvalue of ``sum_x |u^x_{f(x)}><u^x_{f(x)}|`` over selections ``f``.

    ``u^x_i`` is the ``i``-th column of ``U[x]``. Each sum has the same
    nonzero spectrum as the ``g x g`` Gram matrix of the selected vectors,
    which is what gets diagonalised.
    """
    us, d = _unitaries(U)
    g = len(us)
    if d**g > MAX_ENUM:
        raise ProblemTooLarge(f"d^g = {d}^{g} exceeds {MAX_ENUM}; use eta_lower_sampled")
    if g == 1:
        return 1.0
    C = np.asarray([[ux.conj().T @ uy for uy in us] for ux in us])  # (g, g, d, d)
    X, Y = np.meshgrid(np.arange(g), np.arange(g), indexing="ij")
    best = 1.0
    for f in _index_chunks([d] * g):
        G = C[X[None], Y[None], f[:, :, None], f[:, None, :]]
        best = max(best, float(np.linalg.eigvalsh(G)[:, -1].max()))
    return best


def eta_g2(U) -> float:
    """``eta(I, U) = 1 + max |U_ij|``."""
    return 1.0 + float(np.abs(np.asarray(U)).max())


def eta_incompatibility_threshold(eta_value: float, d: int, g: int) -> float:
    """``(d eta - g) / (g (d - 1))``: noisy bases above this ``t`` are incompatible."""
    if d < 2:
        raise ParameterOutOfRange("need d >= 2")
    if not 1 - 1e-12 <= eta_value <= g + 1e-12:
        raise ParameterOutOfRange(f"eta = {eta_value} outside [1, g = {g}]")
    return (d * eta_value - g) / (g * (d - 1))


def _eta_objective(us, phi) -> np.ndarray:
    """``sum_x max_i |<u^x_i|phi>|^2`` for a batch of vectors (columns of ``phi``)."""
    return sum((np.abs(u.conj().T @ phi) ** 2).max(axis=0) for u in us)


def _ascend(us, phi, max_iter: int = 50) -> float:
    """Alternate between the best selection for ``phi`` and the top eigenvector of that selection."""
    best = -np.inf
    for _ in range(max_iter):
        f = [int(np.argmax(np.abs(u.conj().T @ phi))) for u in us]
        vecs = np.column_stack([u[:, i] for u, i in zip(us, f)])
        w, v = np.linalg.eigh(vecs.conj().T @ vecs)
        if w[-1] <= best + 1e-13:
            break
        best = float(w[-1])
        phi = vecs @ v[:, -1]
        phi /= np.linalg.norm(phi)
    return best


def eta_lower_sampled(U, trials: int, rng=None, refine: bool = True) -> float:
    """Lower bound on ``eta`` from candidate vectors.

    Candidates are the ``d g`` basis vectors themselves plus ``trials``
    uniform random unit vectors. With ``refine`` the best few candidates
    are improved by alternating ascent; every value returned is the top
    eigenvalue of some selection, hence never exceeds ``eta``.
    """
    from .sampling import _gen

    if trials < 1:
        raise ParameterOutOfRange("trials must be >= 1")
    us, d = _unitaries(U)
    gen = _gen(rng)
    cands = np.column_stack(us)
    z = gen.standard_normal((d, trials)) + 1j * gen.standard_normal((d, trials))
    cands = np.column_stack([cands, z / np.linalg.norm(z, axis=0)])
    vals = _eta_objective(us, cands)
    best = float(vals.max())
    if refine:
        for j in np.argsort(vals)[::-1][:8]:
            best = max(best, _ascend(us, cands[:, j]))
    return min(best, float(len(us)))


def is_mub_pair(U, V, tol: float = 1e-8) -> bool:
    o = np.abs(np.asarray(U).conj().T @ np.asarray(V)) ** 2
    return bool(np.max(np.abs(o - 1 / o.shape[0])) <= tol)


# -- applicable bounds for a concrete set ----------------------------------------

def _basis_columns(povm: Povm):
    """Columns of a unitary if ``povm`` is a rank-one basis measurement, else ``None``."""
    if povm.k != povm.dim:
        return None
    cols = []
    for e in povm.effects:
        w, v = np.linalg.eigh(e)
        if abs(w[-1] - 1) > 1e-8 or (len(w) > 1 and abs(w[-2]) > 1e-8):
            return None
        cols.append(v[:, -1])
    return np.column_stack(cols)


def applicable_bounds(mset) -> list[BoundValue]:
    """Every criterion that applies to ``mset``, as bounds on its compatibility degree."""
    from .angles import compression_upper_bound
    from .core import is_projective, observable_of
    from .errors import IncompatError

    mset = mset if isinstance(mset, MeasurementSet) else measurement_set(mset)
    bases = [_basis_columns(p) for p in mset.povms]
    is_bases = all(b is not None for b in bases)
    mub = is_bases and mset.g >= 2 and all(
        is_mub_pair(a, b) for a, b in itertools.combinations(bases, 2)
    )
    out = bound_library(mset.dim, mset.g, mset.outcome_counts, bases=is_bases, mub=mub)
    # bound_library's lower bounds are worst-case over sizes; keep them all
    out.append(noise_content_tau_lower(mset))
    if mset.g == 2 and all(k == 2 for k in mset.outcome_counts):
        P, Q = mset.povms[0].effects[0], mset.povms[1].effects[0]
        out.append(jordan_tau_lower(P, Q))
        if is_projective(mset.povms[0]) and is_projective(mset.povms[1]):
            try:
                out.append(
                    compression_upper_bound(
                        observable_of(mset.povms[0]).matrix, observable_of(mset.povms[1]).matrix
                    )
                )
            except IncompatError:
                pass
    return out
