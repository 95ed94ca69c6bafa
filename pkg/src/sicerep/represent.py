"""Frame features and covariance-style representations of sequences.

A sample is an ordered list of frame feature vectors.  Its representation
is either the regularized sample covariance (or its inverse), or a set of
penalized inverse covariance estimates across an ascending penalty grid
("hierarchy"), all of which are fixed-size d x d SPD matrices regardless
of sequence length.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateInput, FormatError, InvalidMatrix, TooShort)
from .glasso import SampleCovariance, glasso_path
from .spd import SpdMatrix

DEFAULT_EPS = 1e-7
DEFAULT_LEVELS = 10
DEFAULT_GRID_RATIO = 0.01


class SkeletonSequence:
    """Joint-coordinate sequence: m frames of J joints in 3-D."""

    __slots__ = ("frames",)

    def __init__(self, frames):
        a = np.array(frames, dtype=np.float64)
        if a.ndim != 3 or a.shape[2] != 3:
            raise FormatError(
                f"expected frames of shape (m, J, 3), got {a.shape}")
        if a.shape[0] < 2:
            raise FormatError("a skeleton sequence needs at least 2 frames")
        if not np.all(np.isfinite(a)):
            raise FormatError("joint coordinates must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "frames", a)

    def __setattr__(self, name, value):
        raise AttributeError("SkeletonSequence is immutable")

    @property
    def joints(self):
        return self.frames.shape[1]

    @property
    def length(self):
        return self.frames.shape[0]


class FrameFeatureSequence:
    """Ordered frame feature vectors with an optional class label."""

    __slots__ = ("frames", "label", "sample_id")

    def __init__(self, frames, label=None, sample_id=None):
        a = np.array(frames, dtype=np.float64)
        if a.ndim != 2:
            raise FormatError(f"expected frames of shape (m, d), got {a.shape}")
        if a.shape[0] < 2:
            raise FormatError("a feature sequence needs at least 2 frames")
        if not np.all(np.isfinite(a)):
            raise FormatError("frame features must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "frames", a)
        object.__setattr__(self, "label", label)
        object.__setattr__(self, "sample_id", sample_id)

    def __setattr__(self, name, value):
        raise AttributeError("FrameFeatureSequence is immutable")

    @property
    def dim(self):
        return self.frames.shape[1]

    @property
    def length(self):
        return self.frames.shape[0]


@dataclass(frozen=True)
class SiceHierarchy:
    """Penalized inverse-covariance estimates of one sample, dense to sparse."""

    levels: tuple          # SpdMatrix per penalty, ascending penalties
    lambdas: tuple
    sample_id: object = None

    def __post_init__(self):
        if len(self.levels) != len(self.lambdas) or not self.levels:
            raise InvalidMatrix("levels and lambdas must align and be nonempty")
        dims = {m.dim for m in self.levels}
        if len(dims) != 1:
            raise InvalidMatrix(f"mixed level dimensions: {sorted(dims)}")
        if any(b <= a for a, b in zip(self.lambdas, self.lambdas[1:])):
            raise InvalidMatrix("lambdas must be strictly increasing")

    @property
    def depth(self):
        return len(self.levels)

    @property
    def dim(self):
        return self.levels[0].dim


def coordinate_features(seq):
    """Flatten joint coordinates per frame, joint-major then axis.

    Output dimensionality is 3J (e.g. 31 joints -> 93, 20 joints -> 60).
    """
    m, j, _ = seq.frames.shape
    flat = seq.frames.reshape(m, 3 * j)
    return FrameFeatureSequence(flat)


def frame_differences(values):
    """Backward and forward differences, dropping the boundary frames.

    For frames p_1..p_m returns m-2 rows, row t = (p_t - p_{t-1}, p_{t+1} - p_t).
    """
    a = np.asarray(values, dtype=np.float64)
    back = a[1:-1] - a[:-2]
    fwd = a[2:] - a[1:-1]
    return np.hstack([back, fwd])


def velocity_features(seq):
    """Coordinate differences against both direct neighbor frames.

    Output dimensionality is 6J; the first and last frames have no complete
    neighborhood and are dropped.
    """
    m, j, _ = seq.frames.shape
    if m < 3:
        raise TooShort(f"velocity features need at least 3 frames, got {m}")
    flat = seq.frames.reshape(m, 3 * j)
    return FrameFeatureSequence(frame_differences(flat))


def sample_covariance(f):
    """Mean-centered second-moment matrix with 1/m normalization."""
    x = f.frames - f.frames.mean(axis=0)
    cov = x.T @ x / f.length
    return SampleCovariance(cov)


def cov_rp(f, eps=DEFAULT_EPS):
    """Sample covariance with an isotropic regularizer: cov + eps*I."""
    if eps <= 0:
        raise InvalidMatrix(f"eps must be positive, got {eps}")
    cov = sample_covariance(f).values
    return SpdMatrix(cov + eps * np.eye(cov.shape[0]))


def inverse_cov_rp(f, eps=DEFAULT_EPS):
    """Inverse of the regularized sample covariance: (cov + eps*I)^-1."""
    return SpdMatrix(cov_rp(f, eps).inverse_values())


def default_lambda_grid(sigma, levels=DEFAULT_LEVELS, ratio=DEFAULT_GRID_RATIO):
    """Log-spaced penalty grid anchored at the largest off-diagonal moment.

    The top of the grid is lambda_max = max |sigma_ij|, i != j (falling back
    to the largest diagonal entry when all off-diagonals vanish), the bottom
    is ratio * lambda_max, with `levels` points inclusive.
    """
    if levels < 1:
        raise InvalidMatrix(f"levels must be >= 1, got {levels}")
    if not 0 < ratio < 1:
        raise InvalidMatrix(f"ratio must be in (0, 1), got {ratio}")
    values = sigma.values if isinstance(sigma, SampleCovariance) else np.asarray(sigma)
    off = values[~np.eye(values.shape[0], dtype=bool)]
    lam_max = float(np.abs(off).max()) if off.size else 0.0
    if lam_max == 0.0:
        lam_max = float(np.diag(values).max())
    if lam_max <= 0.0:
        raise DegenerateInput("covariance carries no signal; cannot build a grid")
    if levels == 1:
        return (lam_max,)
    return tuple(np.geomspace(ratio * lam_max, lam_max, levels))


def sice_hierarchy(f, grid=None, tol=1e-6, max_iter=1000, sample_id=None):
    """Penalized estimates of one sample along an ascending grid.

    The grid defaults to ``default_lambda_grid`` of the sample's own
    covariance.  Solver failures are annotated with the sample id.
    """
    sigma = sample_covariance(f)
    if grid is None:
        grid = default_lambda_grid(sigma)
    sid = sample_id if sample_id is not None else f.sample_id
    try:
        path = glasso_path(sigma, grid, tol=tol, max_iter=max_iter)
    except Exception as exc:
        exc.args = (f"sample {sid!r}: {exc.args[0] if exc.args else exc}",)
        raise
    levels = tuple(sol.estimate for sol in path.solutions)
    return SiceHierarchy(levels, tuple(path.lambdas), sid)


def spd_hierarchy(mat, sample_id=None):
    """Wrap a single SPD matrix as a depth-1 hierarchy (lambda slot 0)."""
    return SiceHierarchy((mat,), (0.0,), sample_id)
