"""Symmetric/SPD matrix primitives and the log-Euclidean base kernel.

Everything here is a pure function of its inputs; ``SymMatrix`` and
``SpdMatrix`` freeze their storage after construction so values can be
shared freely between threads.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidMatrix, NotPositiveDefinite

# relative slack for the positive-definiteness check at construction
SPD_EIG_RTOL = 1e-12


def _as_square(entries):
    a = np.array(entries, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidMatrix(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix("matrix entries must be finite")
    return a


class SymMatrix:
    """Real symmetric matrix; construction symmetrizes via (A + A')/2."""

    __slots__ = ("values",)

    def __init__(self, entries):
        a = _as_square(entries)
        values = (a + a.T) / 2.0
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("SymMatrix is immutable")

    @property
    def dim(self):
        return self.values.shape[0]

    def __repr__(self):
        return f"SymMatrix(dim={self.dim})"


class SpdMatrix:
    """Symmetric positive definite matrix.

    The eigendecomposition is computed once at construction and reused by
    the log/inverse operations, so repeated kernel evaluations on the same
    matrix never re-factorize.
    """

    __slots__ = ("values", "_eigvals", "_eigvecs", "_log")

    def __init__(self, entries):
        if isinstance(entries, SymMatrix):
            values = entries.values
        else:
            a = _as_square(entries)
            values = (a + a.T) / 2.0
        w, v = np.linalg.eigh(values)
        if w[-1] <= 0.0 or w[0] <= -SPD_EIG_RTOL * w[-1]:
            raise NotPositiveDefinite(
                f"matrix is not positive definite (min eigenvalue {w[0]:.3e})")
        values = np.array(values)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_eigvals", w)
        object.__setattr__(self, "_eigvecs", v)
        object.__setattr__(self, "_log", None)

    def __setattr__(self, name, value):
        raise AttributeError("SpdMatrix is immutable")

    @property
    def dim(self):
        return self.values.shape[0]

    def min_eigenvalue(self):
        return float(self._eigvals[0])

    def log_values(self):
        """Matrix logarithm as a plain ndarray (cached)."""
        if self._log is None:
            w = self._eigvals
            if w[0] <= 0.0:
                raise NotPositiveDefinite(
                    f"cannot take the log: min eigenvalue {w[0]:.3e} <= 0")
            v = self._eigvecs
            lw = np.log(w)
            out = (v * lw) @ v.T
            out = (out + out.T) / 2.0
            out.setflags(write=False)
            object.__setattr__(self, "_log", out)
        return self._log

    def inverse_values(self):
        """Inverse as a plain ndarray, from the cached eigendecomposition."""
        w = self._eigvals
        if w[0] <= 0.0:
            raise NotPositiveDefinite(
                f"cannot invert: min eigenvalue {w[0]:.3e} <= 0")
        v = self._eigvecs
        out = (v / w) @ v.T
        return (out + out.T) / 2.0

    def __repr__(self):
        return f"SpdMatrix(dim={self.dim})"


@dataclass(frozen=True)
class KernelConfig:
    """Bandwidth of the Gaussian log-Euclidean kernel."""

    gamma: float

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidMatrix(f"gamma must be positive, got {self.gamma}")


def sym_eigen(a):
    """Eigendecomposition of a symmetric matrix.

    Returns (eigenvalues, eigenvectors) with eigenvalues in descending
    order and eigenvectors as the matching orthonormal columns.
    """
    values = a.values if isinstance(a, SymMatrix) else _as_square(a)
    w, v = np.linalg.eigh(values)
    return w[::-1].copy(), v[:, ::-1].copy()


def matrix_exp(a):
    """Matrix exponential of a symmetric matrix; the result is SPD."""
    values = a.values if isinstance(a, SymMatrix) else SymMatrix(a).values
    w, v = np.linalg.eigh(values)
    out = (v * np.exp(w)) @ v.T
    return SpdMatrix(out)


def matrix_log(a):
    """Matrix logarithm of an SPD matrix, returned as a SymMatrix."""
    if not isinstance(a, SpdMatrix):
        a = SpdMatrix(a)
    return SymMatrix(a.log_values())


def log_euclidean_distance(a, b):
    """Frobenius distance between matrix logarithms: ||log a - log b||_F."""
    if not isinstance(a, SpdMatrix):
        a = SpdMatrix(a)
    if not isinstance(b, SpdMatrix):
        b = SpdMatrix(b)
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return float(np.linalg.norm(a.log_values() - b.log_values()))


def log_euclidean_kernel(a, b, cfg):
    """Gaussian kernel on the log-Euclidean distance.

    kappa(a, b) = exp(-gamma * ||log a - log b||_F^2), in (0, 1] and equal
    to 1 exactly when a is b.
    """
    d = log_euclidean_distance(a, b)
    return float(np.exp(-cfg.gamma * d * d))


def median_heuristic_gamma(mats):
    """Default bandwidth: 1 / median of squared pairwise distances.

    Falls back to 1.0 when fewer than two distinct matrices are supplied or
    all pairwise distances vanish.
    """
    logs = [m.log_values() if isinstance(m, SpdMatrix) else SpdMatrix(m).log_values()
            for m in mats]
    n = len(logs)
    if n < 2:
        return 1.0
    flat = np.array([l.ravel() for l in logs])
    sq = pairwise_sq_distances(flat)
    iu = np.triu_indices(n, k=1)
    med = float(np.median(sq[iu]))
    if med <= 0.0:
        return 1.0
    return 1.0 / med


def pairwise_sq_distances(flat):
    """Squared Euclidean distances between the rows of ``flat``.

    Exactly symmetric with an exactly zero diagonal, so kernels built from
    it evaluate to 1 on identical indices.
    """
    sq_norms = np.einsum("ij,ij->i", flat, flat)
    g = flat @ flat.T
    g = (g + g.T) / 2.0
    d2 = sq_norms[:, None] + sq_norms[None, :] - 2.0 * g
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def cross_sq_distances(flat_a, flat_b):
    """Squared Euclidean distances between rows of two stacks."""
    na = np.einsum("ij,ij->i", flat_a, flat_a)
    nb = np.einsum("ij,ij->i", flat_b, flat_b)
    d2 = na[:, None] + nb[None, :] - 2.0 * (flat_a @ flat_b.T)
    np.maximum(d2, 0.0, out=d2)
    return d2
