"""Reference spectral laws, exact Haar moments and induced-POVM threshold curves.

Every continuous law here has the shape
``(x - lo)^a (hi - x)^b h(x)`` on ``[lo, hi]`` with ``a, b`` in ``{1/2, -1/2}``
and ``h`` smooth, so totals and moments go through QUADPACK's algebraic
end-point weights. CDFs are tabulated on a cosine-spaced grid, which makes
both edge behaviours smooth in the grid variable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import ParameterOutOfRange, QuadratureFailure

QUAD_TOL = 1e-8
CDF_GRID = 10_000
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class SpectralLaw:
    """A probability law: point masses plus a density on ``support``.

    ``density`` takes and returns arrays and vanishes off the support.
    ``edge_exponents`` and ``smooth`` give the factorisation used for
    quadrature: ``density(x) = (x-lo)^a (hi-x)^b smooth(x)``.
    """

    atoms: tuple
    density: Callable
    support: tuple
    edge_exponents: tuple = (0.5, 0.5)
    smooth: Callable | None = None
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def has_density(self) -> bool:
        lo, hi = self.support
        return self.smooth is not None and hi > lo

    def _quad(self, fn, lo=None, hi=None, wvar=None) -> float:
        lo = self.support[0] if lo is None else lo
        hi = self.support[1] if hi is None else hi
        wvar = self.edge_exponents if wvar is None else wvar
        val, err = integrate.quad(
            fn, lo, hi, weight="alg", wvar=wvar, epsabs=QUAD_TOL * 1e-2, epsrel=1e-10, limit=200
        )
        if not np.isfinite(val) or err > QUAD_TOL:
            raise QuadratureFailure(f"quadrature error estimate {err:.2e} on {self.name}")
        return val

    def continuous_mass(self) -> float:
        if not self.has_density:
            return 0.0
        if "cmass" not in self._cache:
            self._cache["cmass"] = self._quad(self.smooth)
        return self._cache["cmass"]

    def total_mass(self) -> float:
        return sum(m for _, m in self.atoms) + self.continuous_mass()

    def moment(self, p: int) -> float:
        """``int x^p`` against the law (atoms included)."""
        val = sum(m * x**p for x, m in self.atoms)
        if self.has_density:
            val += self._quad(lambda x: x**p * self.smooth(x))
        return val

    @property
    def mean(self) -> float:
        return self.moment(1)

    def _grid(self):
        """Cosine grid ``x_j`` and cumulative continuous mass at each node."""
        if "grid" in self._cache:
            return self._cache["grid"]
        lo, hi = self.support
        u = np.linspace(0.0, 1.0, CDF_GRID + 1)
        xs = lo + (hi - lo) * (1 - np.cos(np.pi * u)) / 2
        if self.has_density:
            # Gauss-Legendre in u on every cell; the Jacobian dx/du cancels the edge behaviour
            half = 0.5 / CDF_GRID
            mids = (u[:-1] + u[1:]) / 2
            nodes = mids[:, None] + half * _GL_X[None, :]
            xn = lo + (hi - lo) * (1 - np.cos(np.pi * nodes)) / 2
            jac = (hi - lo) * np.pi * np.sin(np.pi * nodes) / 2
            cell = (self.density(xn) * jac) @ _GL_W * half
            cum = np.concatenate([[0.0], np.cumsum(cell)])
            # rescale onto the adaptive-quadrature total to keep one source of truth
            if cum[-1] > 0:
                cum *= self.continuous_mass() / cum[-1]
        else:
            cum = np.zeros_like(xs)
        self._cache["grid"] = (u, xs, cum)
        return self._cache["grid"]

    def _cont_cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        if not self.has_density:
            return np.zeros_like(x)
        u_grid, _, cum = self._grid()
        z = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
        u = np.arccos(1 - 2 * z) / np.pi
        return np.interp(u, u_grid, cum)

    def cdf(self, x, left: bool = False) -> np.ndarray:
        """``P(X <= x)``, or ``P(X < x)`` with ``left=True``."""
        x = np.asarray(x, dtype=float)
        out = self._cont_cdf(x)
        for loc, m in self.atoms:
            out = out + m * ((x > loc) if left else (x >= loc))
        return out

    def cdf_exact(self, x: float) -> float:
        """Single CDF value by adaptive quadrature (no grid)."""
        lo, hi = self.support
        val = sum(m for loc, m in self.atoms if loc <= x)
        if not self.has_density or x <= lo:
            return val
        if x >= hi:
            return val + self.continuous_mass()
        a, b = self.edge_exponents
        if x - lo <= hi - x:
            part = self._quad(lambda y: self.smooth(y) * (hi - y) ** b, lo, x, (a, 0.0))
        else:
            part = self.continuous_mass() - self._quad(
                lambda y: self.smooth(y) * (y - lo) ** a, x, hi, (0.0, b)
            )
        return val + part

    def quantile(self, q) -> np.ndarray:
        """Smallest ``x`` with ``cdf(x) >= q``, by bisection on the tabulated CDF."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        lo, hi = self.support
        pts = sorted({lo, hi, *[loc for loc, _ in self.atoms]})
        lo, hi = min(pts[0], lo), max(pts[-1], hi)
        out = np.empty_like(q)
        for j, qq in enumerate(q):
            a, b = lo, hi
            if self.cdf(a) >= qq:
                out[j] = a
                continue
            for _ in range(80):
                m = 0.5 * (a + b)
                if self.cdf(m) >= qq:
                    b = m
                else:
                    a = m
            out[j] = b
        return out


def _jacobi_type_law(lo: float, hi: float, scale: float, atoms, name: str) -> SpectralLaw:
    """Density ``scale * sqrt((x-lo)(hi-x)) / (x (1-x))`` on ``[lo, hi]`` inside ``[0, 1]``.

    When ``lo = 0`` (or ``hi = 1``) the pole cancels one square root and the
    edge becomes an inverse square root singularity.
    """
    lo_zero = lo < 1e-12
    hi_one = hi > 1 - 1e-12
    lo = 0.0 if lo_zero else lo
    hi = 1.0 if hi_one else hi
    a = -0.5 if lo_zero else 0.5
    b = -0.5 if hi_one else 0.5

    def smooth(x):
        den = (1.0 if lo_zero else x) * (1.0 if hi_one else (1 - x))
        return scale / den

    def density(x):
        x = np.asarray(x, dtype=float)
        inside = (x > lo) & (x < hi)
        xi = np.where(inside, x, 0.5 * (lo + hi))
        val = scale * np.sqrt((xi - lo) * (hi - xi)) / (xi * (1 - xi))
        return np.where(inside, val, 0.0)

    atoms = tuple((float(p), float(m)) for p, m in atoms if m > 0)
    if hi - lo < 1e-14:
        return SpectralLaw(atoms, lambda x: np.zeros_like(np.asarray(x, dtype=float)), (lo, hi), (a, b), None, name)
    return SpectralLaw(atoms, density, (lo, hi), (a, b), smooth, name)


def kesten_mckay(g: int) -> SpectralLaw:
    """Free additive convolution of ``g`` symmetric Bernoulli laws.

    Density ``g / (2 pi (g^2 - x^2)) * sqrt(4(g-1) - x^2)`` on
    ``[-2 sqrt(g-1), 2 sqrt(g-1)]``.
    """
    if int(g) != g or g < 2:
        raise ParameterOutOfRange("g must be an integer >= 2")
    g = int(g)
    r = 2 * math.sqrt(g - 1)

    def density(x):
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) < r
        xi = np.where(inside, x, 0.0)
        return np.where(inside, g * np.sqrt(r * r - xi * xi) / (2 * np.pi * (g * g - xi * xi)), 0.0)

    if g == 2:
        # g^2 - x^2 = r^2 - x^2: the edges turn into inverse square roots (arcsine law)
        return SpectralLaw((), density, (-r, r), (-0.5, -0.5), lambda x: 1 / np.pi, "kesten-mckay(2)")
    smooth = lambda x: g / (2 * np.pi * (g * g - x * x))  # noqa: E731
    return SpectralLaw((), density, (-r, r), (0.5, 0.5), smooth, f"kesten-mckay({g})")


def haar_projection_moment(d: int, p: int) -> Fraction:
    """``E[X^p]`` for ``X = <phi|U^H (2P - I) U|phi>`` with ``P`` of rank ``d/2`` and ``U`` Haar.

    Odd moments vanish; ``E[X^{2q}] = binom(d/2+q-1, q) / binom(d+2q-1, 2q)``.
    """
    if d < 2 or d % 2 or p < 0:
        raise ParameterOutOfRange("need even d >= 2 and p >= 0")
    if p % 2:
        return Fraction(0)
    q = p // 2
    return Fraction(comb(d // 2 + q - 1, q), comb(d + 2 * q - 1, 2 * q))


def moment_bound(d: int, p: int) -> float:
    """``(p/2)! (2/d)^{p/2}`` for even ``p``."""
    return math.factorial(p // 2) * (2 / d) ** (p // 2)


def _phi(s, t):
    base = s + t - 2 * s * t
    root = 2 * math.sqrt(max(0.0, s * t * (1 - s) * (1 - t)))
    return min(1.0, max(0.0, base - root)), min(1.0, max(0.0, base + root))


def phi_pm(s: float, t: float) -> tuple[float, float]:
    """``s + t - 2st -+ 2 sqrt(st(1-s)(1-t))``: edges of the free product of two Bernoulli laws."""
    if not (0 < s < 1 and 0 < t < 1):
        raise ParameterOutOfRange("s and t must lie in (0, 1)")
    return _phi(s, t)


def nu_kc(k: int, c: float) -> SpectralLaw:
    """Limiting eigenvalue law of one effect of a random induced POVM.

    ``k`` outcomes, ancilla ratio ``c = d/(kn)``.
    """
    if int(k) != k or k < 2:
        raise ParameterOutOfRange("k must be an integer >= 2")
    if not 0 < c <= 1:
        raise ParameterOutOfRange("c must lie in (0, 1]")
    lo, hi = _phi(c, 1 / k)
    atoms = [(0.0, max(0.0, 1 - 1 / (c * k))), (1.0, max(0.0, 1 - 1 / c + 1 / (c * k)))]
    return _jacobi_type_law(lo, hi, 1 / (2 * math.pi * c), atoms, f"nu(k={k}, c={c:g})")


def angle_cos2_law(alpha: float, beta: float) -> SpectralLaw:
    """Law of ``cos^2`` of the non-trivial principal angles between random subspaces.

    Subspaces of dimensions ``alpha d`` and ``beta d``; the density is
    proportional to ``sqrt((x-lambda_-)(lambda_+-x)) / (x(1-x))`` on
    ``[lambda_-, lambda_+]``, normalised here numerically. Angles
    themselves are the push-forward by ``arccos(sqrt(x))``.
    """
    from .angles import lambda_pm

    lo, hi = lambda_pm(alpha, beta)
    raw = _jacobi_type_law(lo, hi, 1.0, (), "angles")
    return _jacobi_type_law(lo, hi, 1.0 / raw.continuous_mass(), (), f"cos2-angles({alpha:g},{beta:g})")


@dataclass(frozen=True)
class InducedThresholds:
    witness_c: float
    jordan_c_g2: float
    noise_c_g2: float
    noise_c_g: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def induced_thresholds(k: int, g: int) -> InducedThresholds:
    """Ancilla-ratio thresholds for ``g`` random induced POVMs with ``k`` outcomes.

    Above ``witness_c`` the POVMs are asymptotically incompatible; below
    ``jordan_c_g2`` (pairs) or ``noise_c_g2`` / ``noise_c_g`` they are
    asymptotically compatible. The ``_g2`` fields refer to pairs regardless
    of ``g``.
    """
    if k < 2 or g < 2:
        raise ParameterOutOfRange("need k >= 2 and g >= 2")
    witness = 4 * (k - 1) * g / ((k - 1) ** 2 * g**2 - 2 * (k - 2) * (k - 1) * g + k**2)
    r2 = math.sqrt(2)
    jordan = ((3 - 2 * r2) * k + 2 * (r2 - 1)) / (k**2 + 4 * k - 4)
    noise2 = 1 / (6 * k + 4 * math.sqrt((k - 1) * (2 * k - 1)) - 4)
    noise_g = (1 / g) / (
        2 * g * (k - 1) + 2 * math.sqrt((g - 1) * (k - 1) * (g * (k - 1) + 1)) - k + 2
    )
    return InducedThresholds(witness, jordan, noise2, noise_g)


@dataclass(frozen=True)
class EmpiricalSpectrum:
    eigenvalues: np.ndarray
    dim: int

    def __post_init__(self):
        if len(self.eigenvalues) != self.dim:
            raise ValueError("eigenvalue count must equal the dimension")

    def cdf(self, x, left: bool = False):
        side = "left" if left else "right"
        return np.searchsorted(self.eigenvalues, x, side=side) / self.dim


def empirical_spectrum(H) -> EmpiricalSpectrum:
    from .core import as_hermitian

    h = as_hermitian(H, tol=1e-9)
    ev = np.linalg.eigvalsh(h)
    return EmpiricalSpectrum(ev, len(ev))


def empirical_from_values(values) -> EmpiricalSpectrum:
    v = np.sort(np.asarray(values, dtype=float))
    return EmpiricalSpectrum(v, len(v))


def ks_distance(emp, law: SpectralLaw) -> float:
    """Kolmogorov-Smirnov distance between an empirical spectrum and a law.

    Both CDFs are right-continuous step/monotone functions, so the supremum
    is reached at a jump of either; those points are checked from both sides.
    """
    if not isinstance(emp, EmpiricalSpectrum):
        emp = empirical_from_values(emp)
    lo, hi = law.support
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise QuadratureFailure("law support must be finite")
    pts = np.unique(np.concatenate([emp.eigenvalues, [loc for loc, _ in law.atoms]]))
    right = np.abs(emp.cdf(pts) - law.cdf(pts))
    left = np.abs(emp.cdf(pts, left=True) - law.cdf(pts, left=True))
    return float(max(right.max(), left.max()))
