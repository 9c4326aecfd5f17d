"""Semidefinite programs for compatibility degrees and incompatibility witnesses.

Problems are assembled as :class:`SdpProblem` objects (``cvxpy`` expressions
plus bookkeeping) and handed to a backend that returns a :class:`SolveReport`.
The default backend runs the Clarabel interior-point solver through cvxpy.

All formulations keep constant terms on the right-hand side of equality
constraints, which lets the backend recover the dual objective from the
equality multipliers and report a duality gap.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import cvxpy as cp
import numpy as np

from .core import (
    DichotomicObservable,
    MeasurementSet,
    as_hermitian,
    dichotomic,
    measurement_set,
    validate_povm,
)
from .errors import DimensionMismatch, GTooLarge, ProblemTooLarge, SolverFailure, TOutOfRange

GAP_TOL = 1e-7
PSD_FLOOR = 1e-7
FEAS_TOL = 1e-8
MAX_G_DICHOTOMIC = 16
MAX_JOINT_OUTCOMES = 4096
MAX_G_VERIFY = 24

OPTIMAL, INFEASIBLE, INACCURATE, FAILURE = "Optimal", "Infeasible", "Inaccurate", "SolverFailure"


@dataclass
class SolveReport:
    status: str
    value: float
    gap: float
    solution: dict = field(default_factory=dict)
    min_psd_eigenvalue: float = float("nan")

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


@dataclass(frozen=True)
class TauBracket:
    """Interval known to contain a compatibility degree, with provenance tags.

    ``tau_tilde`` is the unclipped ``1/lambda`` value when it was computed; it
    can exceed 1 and is kept separate from the clipped bracket.
    """

    lower: float
    upper: float
    lower_source: str
    upper_source: str
    tau_tilde: float | None = None

    def __post_init__(self):
        if self.lower > self.upper + 1e-6:
            raise ValueError(f"inverted bracket [{self.lower}, {self.upper}]")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def mid(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "lower_source": self.lower_source,
            "upper_source": self.upper_source,
            "tau_tilde": self.tau_tilde,
        }


@dataclass(frozen=True)
class WitnessCertificate:
    """Witness operators ``W[x][i]``, the state ``rho`` and the pairing ``<W, E>``."""

    witness: tuple
    state: np.ndarray
    pairing: float

    @property
    def certifies(self) -> bool:
        return self.pairing > 1 + GAP_TOL

    def to_dict(self) -> dict:
        from .core import matrix_to_json

        return {
            "pairing": self.pairing,
            "certifies_incompatibility": self.certifies,
            "state": matrix_to_json(self.state),
            "witness": [[matrix_to_json(w) for w in row] for row in self.witness],
        }


class SdpProblem:
    """A conic program over Hermitian matrix blocks.

    Parameters
    ----------
    variables : dict
        Named cvxpy variables (or lists of them).
    objective : cvxpy expression
        Real linear functional to optimise.
    sense : {"max", "min"}
    psd : list of cvxpy expressions
        Hermitian affine expressions required to be PSD.
    equalities : list of (lhs, rhs)
        ``rhs`` holds every constant/parameter term.
    """

    def __init__(self, variables, objective, sense, psd, equalities):
        self.variables = variables
        self.sense = sense
        self.psd = list(psd)
        self.equalities = list(equalities)
        self._eq_cons = [lhs == rhs for lhs, rhs in self.equalities]
        obj = cp.Maximize(objective) if sense == "max" else cp.Minimize(objective)
        self.problem = cp.Problem(obj, [e >> 0 for e in self.psd] + self._eq_cons)

    def dual_objective(self) -> float:
        total = 0.0
        for con, (_, rhs) in zip(self._eq_cons, self.equalities):
            y = con.dual_value
            b = rhs.value if isinstance(rhs, cp.Expression) else rhs
            total += float(np.real(np.vdot(np.asarray(y), np.asarray(b))))
        return total

    def values(self) -> dict:
        def grab(v):
            if isinstance(v, (list, tuple)):
                return [grab(u) for u in v]
            if isinstance(v, dict):
                return {k: grab(u) for k, u in v.items()}
            return None if v.value is None else np.asarray(v.value)

        return {k: grab(v) for k, v in self.variables.items()}


class CvxpyBackend:
    """Solve :class:`SdpProblem` instances with a cvxpy-supported conic solver.

    ``fallbacks`` are tried in order when the primary solver raises; the
    report records which solver produced the answer.
    """

    def __init__(self, solver: str = "CLARABEL", fallbacks=("CVXOPT",), **options):
        self.solver = solver
        self.fallbacks = tuple(f for f in fallbacks if f != solver)
        self.options = options

    def solve(self, sp: SdpProblem) -> SolveReport:
        errors = []
        for name in (self.solver, *self.fallbacks):
            opts = self.options if name == self.solver else {}
            try:
                with warnings.catch_warnings():
                    # inaccurate solves are reported through SolveReport.status
                    warnings.simplefilter("ignore", UserWarning)
                    sp.problem.solve(solver=name, **opts)
                break
            except cp.error.SolverError as exc:
                errors.append(f"{name}: {exc}")
        else:
            return SolveReport(FAILURE, float("nan"), float("nan"), {"error": "; ".join(errors)})
        status = sp.problem.status
        if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return SolveReport(INFEASIBLE, float("nan"), float("nan"))
        if sp.problem.value is None or status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            return SolveReport(FAILURE, float("nan"), float("nan"), {"cvxpy_status": status})
        value = float(sp.problem.value)
        gap = abs(value - sp.dual_objective())
        floor = min(
            (float(np.linalg.eigvalsh(_herm(e.value))[0]) for e in sp.psd), default=0.0
        )
        ok = status == cp.OPTIMAL and gap <= GAP_TOL * max(1.0, abs(value)) and floor >= -PSD_FLOOR
        return SolveReport(OPTIMAL if ok else INACCURATE, value, gap, sp.values(), floor)


def _herm(m):
    m = np.atleast_2d(np.asarray(m))
    return (m + m.conj().T) / 2


DEFAULT_BACKEND = CvxpyBackend()


def _matrices(observables) -> list[np.ndarray]:
    mats = [dichotomic(a).matrix for a in observables]
    if not mats:
        raise DimensionMismatch("need at least one observable")
    d = mats[0].shape[0]
    if any(m.shape != (d, d) for m in mats):
        raise DimensionMismatch("observables act on different dimensions")
    return mats


def _sign_patterns(g: int):
    return list(itertools.product((1, -1), repeat=g))


def _sum_expr(terms):
    terms = list(terms)
    out = terms[0]
    for t in terms[1:]:
        out = out + t
    return out


def lambda_problem(observables) -> SdpProblem:
    """``max sum_x Tr(A_x Y_x)`` s.t. ``sum_x eps_x Y_x <= rho`` for all signs, ``rho`` a state."""
    mats = _matrices(observables)
    g, d = len(mats), mats[0].shape[0]
    if g > MAX_G_DICHOTOMIC:
        raise GTooLarge(f"g = {g} needs 2^{g} PSD constraints; limit is g <= {MAX_G_DICHOTOMIC}")
    rho = cp.Variable((d, d), hermitian=True)
    ys = [cp.Variable((d, d), hermitian=True) for _ in range(g)]
    psd = [rho]
    for eps in _sign_patterns(g):
        psd.append(rho - _sum_expr(e * y for e, y in zip(eps, ys)))
    objective = cp.real(_sum_expr(cp.trace(a @ y) for a, y in zip(mats, ys)))
    eq = [(cp.real(cp.trace(rho)), 1.0)]
    return SdpProblem({"rho": rho, "Y": ys}, objective, "max", psd, eq)


def compatibility_lambda_dichotomic(observables, backend=None) -> SolveReport:
    """Compatibility norm ``lambda(A)`` of dichotomic observables.

    ``1/lambda`` is the largest ``t`` (possibly above 1) for which the
    POVMs ``(I +- t A_x)/2`` are compatible.

    Raises
    ------
    GTooLarge
        More than 16 observables.
    SolverFailure
        The solver did not reach an optimal point.
    """
    sp = lambda_problem(observables)
    report = (backend or DEFAULT_BACKEND).solve(sp)
    if report.status not in (OPTIMAL, INACCURATE):
        raise SolverFailure(f"lambda SDP failed with status {report.status}", report)
    return report


def tau_dichotomic(observables, backend=None) -> TauBracket:
    report = compatibility_lambda_dichotomic(observables, backend)
    tilde = 1.0 / report.value
    tau = min(1.0, tilde)
    src = "sdp:lambda" if tilde <= 1 else "sdp:lambda(clipped)"
    return TauBracket(tau, tau, src, src, tau_tilde=tilde)


# -- general POVM sets --------------------------------------------------------

def _as_set(mset) -> MeasurementSet:
    if isinstance(mset, MeasurementSet):
        return mset
    return measurement_set(mset)


def _outcome_tuples(counts):
    n = math.prod(counts)
    if n > MAX_JOINT_OUTCOMES:
        raise ProblemTooLarge(
            f"joint POVM needs prod(k_x) = {n} PSD blocks; limit is {MAX_JOINT_OUTCOMES}"
        )
    return list(itertools.product(*[range(k) for k in counts]))


def _independent_marginals(x: int, povm):
    """Marginal constraints to impose for POVM ``x``.

    Every POVM's marginals sum to the same ``sum_f J_f = I``, so after the
    first POVM the last outcome is implied; dropping it keeps the equality
    system full rank, which interior-point solvers need.
    """
    items = list(enumerate(povm.effects))
    return items if x == 0 else items[:-1]


class _JointProblem:
    """Margin form of the joint-measurement test, parametrised by the noise ``t``.

    Maximises ``s`` subject to ``J_f >= s I`` and the marginals of ``J``
    matching the ``t``-noised effects.  The program is always feasible and
    the set is compatible at ``t`` exactly when the optimum is ``>= 0``.
    """

    def __init__(self, mset: MeasurementSet):
        d, counts = mset.dim, mset.outcome_counts
        self.mset = mset
        self.outcomes = _outcome_tuples(counts)
        self.t = cp.Parameter(nonneg=True, value=1.0)
        self.J = {f: cp.Variable((d, d), hermitian=True) for f in self.outcomes}
        s = cp.Variable()
        eye = np.eye(d)
        eqs = []
        for x, povm in enumerate(mset.povms):
            k = counts[x]
            for i, e in _independent_marginals(x, povm):
                lhs = _sum_expr(self.J[f] for f in self.outcomes if f[x] == i)
                eqs.append((lhs, self.t * (e - eye / k) + eye / k))
        psd = [self.J[f] - s * eye for f in self.outcomes]
        self.sdp = SdpProblem({"J": self.J, "s": s}, s, "max", psd, eqs)

    def solve(self, t: float, backend=None) -> SolveReport:
        self.t.value = float(t)
        return (backend or DEFAULT_BACKEND).solve(self.sdp)


def _decide(report: SolveReport) -> bool:
    if report.status not in (OPTIMAL, INACCURATE):
        raise SolverFailure(f"joint-measurement SDP failed with status {report.status}", report)
    return report.value >= -FEAS_TOL


def joint_feasible(mset, t: float, backend=None) -> tuple[bool, SolveReport]:
    """Is the ``t``-noised set jointly measurable?

    Returns the verdict and the report of the margin program; its ``value``
    is the largest ``s`` with all joint effects ``>= s I``.
    """
    if not 0.0 <= t <= 1.0:
        raise TOutOfRange(f"t must lie in [0, 1], got {t}")
    jp = _JointProblem(_as_set(mset))
    report = jp.solve(t, backend)
    return _decide(report), report


def tau_general(mset, tol: float = 1e-4, max_iter: int = 40, backend=None) -> TauBracket:
    """Bisection on ``t`` with :func:`joint_feasible`.

    Relies on the compatible region being convex, so that feasibility is
    monotone in ``t``. The returned bracket has a feasible lower end and an
    infeasible upper end, unless the whole range is feasible.
    """
    jp = _JointProblem(_as_set(mset))
    if _decide(jp.solve(1.0, backend)):
        return TauBracket(1.0, 1.0, "joint:feasible@1", "trivial")
    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if _decide(jp.solve(mid, backend)):
            lo = mid
        else:
            hi = mid
    return TauBracket(lo, hi, "joint:bisection", "joint:bisection")


def tau_direct(mset, backend=None) -> SolveReport:
    """One-shot program ``max t`` over joint POVMs with ``t``-noised marginals.

    ``t`` is left unbounded above, so the value is the unclipped degree.
    """
    mset = _as_set(mset)
    d, counts = mset.dim, mset.outcome_counts
    outcomes = _outcome_tuples(counts)
    J = {f: cp.Variable((d, d), hermitian=True) for f in outcomes}
    t = cp.Variable()
    eye = np.eye(d)
    eqs = []
    for x, povm in enumerate(mset.povms):
        k = counts[x]
        for i, e in _independent_marginals(x, povm):
            lhs = _sum_expr(J[f] for f in outcomes if f[x] == i) - t * (e - eye / k)
            eqs.append((lhs, eye / k))
    sp = SdpProblem({"J": J, "t": t}, t, "max", list(J.values()), eqs)
    report = (backend or DEFAULT_BACKEND).solve(sp)
    if report.status not in (OPTIMAL, INACCURATE):
        raise SolverFailure(f"direct tau SDP failed with status {report.status}", report)
    return report


# -- witnesses ----------------------------------------------------------------

def _is_dichotomic_set(mset: MeasurementSet) -> bool:
    return all(k == 2 for k in mset.outcome_counts)


def general_witness_problem(mset: MeasurementSet) -> SdpProblem:
    """Lagrangian dual of the noisy joint-measurement program.

    ``max <W, E>`` over ``W`` with ``sum_i W_{i|x} = 0`` and a state ``rho``
    dominating every ``W_f = sum_x W_{f(x)|x}``.  The optimum equals
    ``1/tau_tilde``.
    """
    d, counts = mset.dim, mset.outcome_counts
    outcomes = _outcome_tuples(counts)
    rho = cp.Variable((d, d), hermitian=True)
    W = [[cp.Variable((d, d), hermitian=True) for _ in range(k)] for k in counts]
    psd = [rho] + [rho - _sum_expr(W[x][f[x]] for x in range(len(counts))) for f in outcomes]
    eqs = [(cp.real(cp.trace(rho)), 1.0)]
    zero = np.zeros((d, d))
    for row in W:
        eqs.append((_sum_expr(row), zero))
    objective = cp.real(
        _sum_expr(cp.trace(e @ w) for povm, row in zip(mset.povms, W) for e, w in zip(povm.effects, row))
    )
    return SdpProblem({"rho": rho, "W": W}, objective, "max", psd, eqs)


def witness_search(mset, backend=None) -> WitnessCertificate:
    """Optimal incompatibility witness for ``mset``.

    Dichotomic sets use the ``2^g`` sign-pattern program on ``A_x = 2E_x - I``
    (witness ``W_{+|x} = Y_x``, ``W_{-|x} = -Y_x``); other sets use the dual
    of the joint-measurement program. A pairing above ``1 + 1e-7``
    certifies incompatibility.
    """
    mset = _as_set(mset)
    if _is_dichotomic_set(mset):
        obs = [2 * p.effects[0] - np.eye(mset.dim) for p in mset.povms]
        report = compatibility_lambda_dichotomic(obs, backend)
        ys = [as_hermitian(_herm(y), tol=1e-6) for y in report.solution["Y"]]
        witness = tuple((y, -y) for y in ys)
    else:
        report = (backend or DEFAULT_BACKEND).solve(general_witness_problem(mset))
        if report.status not in (OPTIMAL, INACCURATE):
            raise SolverFailure(f"witness SDP failed with status {report.status}", report)
        witness = tuple(
            tuple(as_hermitian(_herm(w), tol=1e-6) for w in row) for row in report.solution["W"]
        )
    rho = _herm(report.solution["rho"])
    pairing = sum(
        float(np.real(np.trace(w @ e)))
        for povm, row in zip(mset.povms, witness)
        for e, w in zip(povm.effects, row)
    )
    return WitnessCertificate(witness, rho, pairing)


def verify_witness_dichotomic(W: Sequence, rho, floor: float = 1e-8) -> bool:
    """Check ``rho - sum_x eps_x W_x >= -floor`` for every sign pattern."""
    ws = [np.asarray(w, dtype=complex) for w in W]
    g = len(ws)
    if g > MAX_G_VERIFY:
        raise GTooLarge(f"g = {g} needs 2^{g} eigenvalue checks; limit is {MAX_G_VERIFY}")
    rho = np.asarray(rho, dtype=complex)
    if g == 0:
        return bool(np.linalg.eigvalsh(_herm(rho))[0] >= -floor)
    stack = np.asarray(ws)
    for chunk in _sign_chunks(g):
        s = np.einsum("se,eij->sij", chunk, stack)
        if np.linalg.eigvalsh(_herm_batch(rho[None] - s))[:, 0].min() < -floor:
            return False
    return True


def verify_witness(W: Sequence[Sequence], rho, floor: float = 1e-8) -> bool:
    """General form: ``rho - W_f >= -floor`` for every outcome selection ``f``."""
    rows = [[np.asarray(w, dtype=complex) for w in row] for row in W]
    rho = np.asarray(rho, dtype=complex)
    for f in _outcome_tuples([len(r) for r in rows]):
        wf = sum(rows[x][f[x]] for x in range(len(rows)))
        if np.linalg.eigvalsh(_herm(rho - wf))[0] < -floor:
            return False
    return True


def _herm_batch(m):
    return (m + np.conj(np.swapaxes(m, -1, -2))) / 2


def _sign_chunks(g: int, chunk: int = 4096):
    """All ``2^g`` sign vectors as float arrays, in chunks."""
    total = 1 << g
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        bits = (idx[:, None] >> np.arange(g)[None, :]) & 1
        yield 1.0 - 2.0 * bits
