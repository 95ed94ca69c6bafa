"""L1-penalized inverse covariance estimation (graphical lasso).

Solves, for a sample covariance ``sigma`` and penalty ``lam``,

    maximize_{S > 0}   log det(S) - tr(sigma S) - lam * sum(|S_ij|)

where the L1 term runs over ALL entries including the diagonal.  The solver
is the classic block coordinate descent over columns of the working
covariance W = S^-1: each column update is an L1-regularized quadratic
subproblem handled by the coordinate-descent kernel in ``_kernels``.
Optimality is certified independently through the stationarity residual
``kkt_residual``, which never trusts the solver's internal state.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._kernels import lasso_cd
from .errors import (DimensionError, InvalidMatrix, NotConverged,
                     SingularityError)
from .spd import SpdMatrix, _as_square

# |S_ij| below this counts as zero when classifying KKT conditions
KKT_ZERO_TOL = 1e-9
# |S_ij| below this counts as zero when reporting support patterns
SUPPORT_TOL = 1e-6


class SampleCovariance:
    """Symmetric PSD matrix of second moments.

    Accepts slightly indefinite input (min eigenvalue >= -1e-10 * trace) to
    absorb accumulation noise; anything worse is rejected.
    """

    __slots__ = ("values",)

    def __init__(self, entries):
        a = _as_square(entries)
        values = (a + a.T) / 2.0
        d = np.diag(values)
        if np.any(d < 0):
            raise InvalidMatrix("covariance diagonal must be nonnegative")
        w = np.linalg.eigvalsh(values)
        floor = -1e-10 * max(np.trace(values), np.finfo(np.float64).tiny)
        if w[0] < floor:
            raise InvalidMatrix(
                f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("SampleCovariance is immutable")

    @property
    def dim(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class SiceSolution:
    """One converged penalized estimate with its optimality certificate."""

    estimate: SpdMatrix
    lam: float
    objective_value: float
    kkt_residual: float
    iterations: int
    objective_trace: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class SicePath:
    """Solutions along a strictly increasing penalty grid."""

    lambdas: tuple
    solutions: tuple
    support_violations: tuple = ()


def _cov_values(sigma):
    if isinstance(sigma, SampleCovariance):
        return sigma.values
    return SampleCovariance(sigma).values


def _estimate_values(s):
    if isinstance(s, SpdMatrix):
        return s.values
    a = _as_square(s)
    return (a + a.T) / 2.0


def sice_objective(sigma, lam, s):
    """Penalized log-likelihood value at the estimate ``s``."""
    sig = _cov_values(sigma)
    sv = _estimate_values(s)
    if sig.shape != sv.shape:
        raise DimensionError(
            f"dimension mismatch: {sig.shape[0]} vs {sv.shape[0]}")
    sign, logdet = np.linalg.slogdet(sv)
    if sign <= 0:
        return -np.inf
    return float(logdet - np.sum(sig * sv) - lam * np.sum(np.abs(sv)))


def _kkt_from_inverse(sig, lam, sv, w, zero_tol):
    """Max stationarity violation given the exact inverse ``w`` of ``sv``."""
    r = w - sig
    nonzero = np.abs(sv) > zero_tol
    viol_nz = np.abs(r - lam * np.sign(sv))
    viol_z = np.maximum(0.0, np.abs(r) - lam)
    viol = np.where(nonzero, viol_nz, viol_z)
    return float(viol.max())


def kkt_residual(sigma, lam, s, zero_tol=KKT_ZERO_TOL):
    """Independent optimality certificate for the penalized objective.

    Measures the worst entrywise violation of the stationarity condition
    S^-1 - sigma - lam * G = 0 with G a subgradient of the entrywise L1
    norm.  Zero exactly at the optimum.
    """
    sig = _cov_values(sigma)
    if isinstance(s, SpdMatrix):
        sv = s.values
        w = s.inverse_values()
    else:
        sv = _estimate_values(s)
        ew, ev = np.linalg.eigh(sv)
        if ew[0] <= 0:
            raise InvalidMatrix("estimate must be positive definite")
        w = (ev / ew) @ ev.T
        w = (w + w.T) / 2.0
    if sig.shape != sv.shape:
        raise DimensionError(
            f"dimension mismatch: {sig.shape[0]} vs {sv.shape[0]}")
    return _kkt_from_inverse(sig, lam, sv, w, zero_tol)


def _invert_psd(values, what):
    w, v = np.linalg.eigh(values)
    if w[0] <= 1e-12 * max(w[-1], 0.0) or w[-1] <= 0.0:
        raise SingularityError(f"{what} is singular; a positive penalty is required")
    inv = (v / w) @ v.T
    return (inv + inv.T) / 2.0


def glasso_solve(sigma, lam, tol=1e-6, max_iter=1000, warm_start=None):
    """Solve the penalized estimation problem at one penalty level.

    Parameters
    ----------
    sigma : SampleCovariance or array
    lam : float
        Nonnegative penalty.  ``lam == 0`` requires an invertible sigma and
        is answered by direct inversion.
    tol : float
        Bound on the returned ``kkt_residual``.
    max_iter : int
        Maximum number of outer column sweeps.
    warm_start : SpdMatrix or array, optional
        Initial precision estimate, typically the solution at a smaller
        penalty.

    Raises
    ------
    SingularityError
        ``lam == 0`` with singular sigma.
    NotConverged
        Sweep budget exhausted; carries the best iterate and its residual.
    """
    sig = _cov_values(sigma)
    d = sig.shape[0]
    if lam < 0 or not np.isfinite(lam):
        raise InvalidMatrix(f"penalty must be nonnegative, got {lam}")
    if tol <= 0:
        raise InvalidMatrix("tol must be positive")

    if lam == 0.0:
        est = SpdMatrix(_invert_psd(sig, "sigma"))
        res = kkt_residual(sig, 0.0, est)
        obj = sice_objective(sig, 0.0, est)
        return SiceSolution(est, 0.0, obj, res, 0, (obj,))

    if d == 1:
        p = 1.0 / (sig[0, 0] + lam)
        est = SpdMatrix([[p]])
        obj = sice_objective(sig, lam, est)
        return SiceSolution(est, lam, obj, kkt_residual(sig, lam, est), 0, (obj,))

    w_work = sig.copy()
    w_work[np.diag_indices(d)] = np.diag(sig) + lam
    b_work = np.zeros((d, d))
    if warm_start is not None:
        start = warm_start if isinstance(warm_start, SpdMatrix) else SpdMatrix(warm_start)
        if start.dim != d:
            raise DimensionError(f"warm start dimension {start.dim} != {d}")
        w0 = start.inverse_values()
        w0[np.diag_indices(d)] = np.diag(sig) + lam
        if np.linalg.eigvalsh(w0)[0] > 0:
            w_work = w0
            p0 = start.values
            for j in range(d):
                mask = np.arange(d) != j
                b_work[mask, j] = -p0[mask, j] / p0[j, j]

    masks = [np.arange(d) != j for j in range(d)]
    inner_tol = 0.01 * tol
    inner_max = 1000
    best_res = np.inf
    best_p = None
    trace = []
    prev_res = np.inf
    stall = 0

    for sweep in range(1, max_iter + 1):
        for j in range(d):
            mask = masks[j]
            v = np.ascontiguousarray(w_work[np.ix_(mask, mask)])
            s12 = np.ascontiguousarray(sig[mask, j])
            beta = np.ascontiguousarray(b_work[mask, j])
            beta, _, _ = lasso_cd(v, s12, lam, beta, inner_tol, inner_max)
            b_work[mask, j] = beta
            w12 = v @ beta
            w_work[mask, j] = w12
            w_work[j, mask] = w12

        # recover the precision matrix from the working covariance
        p_work = np.zeros((d, d))
        for j in range(d):
            mask = masks[j]
            beta = b_work[mask, j]
            denom = w_work[j, j] - w_work[mask, j] @ beta
            pjj = 1.0 / denom
            p_work[j, j] = pjj
            p_work[mask, j] = -beta * pjj
        p_sym = (p_work + p_work.T) / 2.0

        ew, ev = np.linalg.eigh(p_sym)
        if ew[0] <= 0:
            trace.append(-np.inf)
            continue
        w_exact = (ev / ew) @ ev.T
        w_exact = (w_exact + w_exact.T) / 2.0
        res = _kkt_from_inverse(sig, lam, p_sym, w_exact, KKT_ZERO_TOL)
        obj = float(np.sum(np.log(ew)) - np.sum(sig * p_sym)
                    - lam * np.sum(np.abs(p_sym)))
        trace.append(obj)
        if res < best_res:
            best_res = res
            best_p = p_sym
        if res <= tol:
            est = SpdMatrix(p_sym)
            return SiceSolution(est, float(lam), obj, res, sweep, tuple(trace))
        # tighten the subproblem tolerance if the outer residual stalls
        if res > 0.5 * prev_res:
            stall += 1
            if stall >= 2:
                inner_tol *= 0.1
                stall = 0
        else:
            stall = 0
        prev_res = res

    raise NotConverged(
        f"no convergence after {max_iter} sweeps (residual {best_res:.3e})",
        estimate=best_p, residual=best_res, iterations=max_iter)


def glasso_path(sigma, lambdas, tol=1e-6, max_iter=1000):
    """Solve along an ascending penalty grid with warm starts.

    Each level starts from the previous solution.  Support nestedness along
    the path is checked at the reporting threshold and violations are
    emitted as warnings, never errors.
    """
    sig = _cov_values(sigma)
    lams = [float(x) for x in lambdas]
    if not lams:
        raise InvalidMatrix("lambda grid must be nonempty")
    if any(l <= 0 for l in lams):
        raise InvalidMatrix("path penalties must be strictly positive")
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise InvalidMatrix("lambda grid must be strictly increasing")

    solutions = []
    warm = None
    for t, lam in enumerate(lams):
        try:
            sol = glasso_solve(sig, lam, tol=tol, max_iter=max_iter, warm_start=warm)
        except NotConverged as exc:
            exc.level = t
            exc.args = (f"level {t} (lambda={lam:g}): {exc.args[0]}",)
            raise
        solutions.append(sol)
        warm = sol.estimate

    violations = []
    off = ~np.eye(sig.shape[0], dtype=bool)
    prev_support = None
    for t, sol in enumerate(solutions):
        support = (np.abs(sol.estimate.values) > SUPPORT_TOL) & off
        if prev_support is not None:
            extra = int(np.sum(support & ~prev_support))
            if extra > 0:
                violations.append((t, extra))
                warnings.warn(
                    f"support nestedness violated at level {t}: "
                    f"{extra} new off-diagonal entries", stacklevel=2)
        prev_support = support
    return SicePath(tuple(lams), tuple(solutions), tuple(violations))
