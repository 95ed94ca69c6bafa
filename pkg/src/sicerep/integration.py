"""Cross-sparsity-level Gram blocks and the hierarchy kernels.

For two samples p, q with hierarchies of depth T, the block K(p, q) is the
T x T matrix of base-kernel values between all level pairs.  Four kernels
reduce a block to a scalar similarity:

  weighted  (beta):   b' K b          with b on the probability simplex
  weighted  (M):      <M, K>_F        with M nonnegative, entries summing to 1
  same-level (mkl):   sum_j b_j K_jj
  uniform   (emk):    mean of all T^2 entries

The block cache stores all N(N+1)/2 blocks of a dataset once so weights can
change without re-evaluating the base kernel; reductions use a fixed pair
order so Grams are bit-reproducible.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, FormatError, InvalidMatrix
from .spd import log_euclidean_kernel, pairwise_sq_distances

CACHE_MAGIC = b"SRGB"
CACHE_VERSION = 1


@dataclass(frozen=True)
class WeightsBeta:
    """Per-level weights on the probability simplex."""

    beta: tuple

    def __post_init__(self):
        b = np.asarray(self.beta, dtype=np.float64)
        if b.ndim != 1 or b.size < 1:
            raise InvalidMatrix("beta must be a nonempty vector")
        if np.any(b < 0) or abs(b.sum() - 1.0) > 1e-12:
            raise InvalidMatrix("beta must be nonnegative and sum to 1")
        object.__setattr__(self, "beta", tuple(float(x) for x in b))

    @property
    def depth(self):
        return len(self.beta)

    def as_array(self):
        return np.array(self.beta)


@dataclass(frozen=True)
class WeightsM:
    """Per-level-pair weights: symmetric, nonnegative, summing to 1."""

    m: tuple

    def __post_init__(self):
        a = np.asarray(self.m, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidMatrix("M must be square")
        if np.any(a < 0) or abs(a.sum() - 1.0) > 1e-12:
            raise InvalidMatrix("M must be nonnegative and sum to 1")
        if not np.array_equal(a, a.T):
            raise InvalidMatrix("M must be symmetric")
        object.__setattr__(self, "m", tuple(tuple(float(x) for x in row) for row in a))

    @property
    def depth(self):
        return len(self.m)

    def as_array(self):
        return np.array(self.m)


@dataclass(frozen=True)
class GramBlock:
    """Base-kernel values between all level pairs of two samples."""

    values: np.ndarray
    p_id: object = None
    q_id: object = None

    @property
    def depth(self):
        return self.values.shape[0]


def gram_block(p, q, cfg):
    """Block of base-kernel values kappa(level_i of p, level_j of q)."""
    if p.depth != q.depth or p.dim != q.dim:
        raise DimensionError(
            f"hierarchies mismatch: depth {p.depth}/{q.depth}, dim {p.dim}/{q.dim}")
    t = p.depth
    values = np.empty((t, t))
    for i in range(t):
        for j in range(t):
            values[i, j] = log_euclidean_kernel(p.levels[i], q.levels[j], cfg)
    return GramBlock(values, p.sample_id, q.sample_id)


def _block_values(block):
    return block.values if isinstance(block, GramBlock) else np.asarray(block)


def _check_depth(values, depth):
    if values.shape[0] != depth or values.shape[1] != depth:
        raise DimensionError(
            f"weights of depth {depth} against block of shape {values.shape}")


def k_beta(block, w):
    """Similarity of the combined feature maps: beta' K beta."""
    values = _block_values(block)
    b = w.as_array() if isinstance(w, WeightsBeta) else np.asarray(w, dtype=np.float64)
    _check_depth(values, b.size)
    return float(b @ values @ b)


def k_m(block, w):
    """Frobenius pairing of the block with a weight matrix: <M, K>_F."""
    values = _block_values(block)
    m = w.as_array() if isinstance(w, WeightsM) else np.asarray(w, dtype=np.float64)
    _check_depth(values, m.shape[0])
    return float(np.sum(m * values))


def k_mkl(block, w):
    """Same-level weighted sum: independent of every off-diagonal entry."""
    values = _block_values(block)
    b = w.as_array() if isinstance(w, WeightsBeta) else np.asarray(w, dtype=np.float64)
    _check_depth(values, b.size)
    return float(b @ np.diag(values))


def k_emk(block):
    """Uniform average over all level pairs."""
    values = _block_values(block)
    return float(values.mean())


def uniform_m(depth):
    return WeightsM(np.full((depth, depth), 1.0 / depth**2))


def uniform_beta(depth):
    return WeightsBeta(np.full(depth, 1.0 / depth))


class BlockCache:
    """All pairwise blocks of a hierarchy dataset, stored once.

    Blocks are kept in the fixed pair order i <= j (row-major within each
    block); ``block(i, j)`` with i > j returns the stored transpose.  Gram
    assembly under any weights is a pure reduction over this storage.
    """

    def __init__(self, blocks, n, depth, gamma):
        expected = n * (n + 1) // 2
        if blocks.shape != (expected, depth, depth):
            raise DimensionError(
                f"expected {expected} blocks of {depth}x{depth}, got {blocks.shape}")
        self.blocks = blocks
        self.n = n
        self.depth = depth
        self.gamma = gamma

    @classmethod
    def from_hierarchies(cls, hierarchies, cfg):
        """Evaluate the base kernel for every level pair of every sample pair."""
        n = len(hierarchies)
        if n == 0:
            raise InvalidMatrix("need at least one hierarchy")
        depth = hierarchies[0].depth
        dim = hierarchies[0].dim
        for h in hierarchies:
            if h.depth != depth or h.dim != dim:
                raise DimensionError("hierarchies must share depth and dimension")
        flat = np.array([lvl.log_values().ravel()
                         for h in hierarchies for lvl in h.levels])
        kappa = np.exp(-cfg.gamma * pairwise_sq_distances(flat))
        blocks = np.empty((n * (n + 1) // 2, depth, depth))
        k = 0
        for i in range(n):
            for j in range(i, n):
                blocks[k] = kappa[i * depth:(i + 1) * depth,
                                  j * depth:(j + 1) * depth]
                k += 1
        return cls(blocks, n, depth, cfg.gamma)

    def _pair_index(self, i, j):
        # packed upper-triangle offset for i <= j
        return i * self.n - i * (i - 1) // 2 + (j - i)

    def block(self, i, j):
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise DimensionError(f"pair ({i}, {j}) out of range for n={self.n}")
        if i <= j:
            return self.blocks[self._pair_index(i, j)]
        return self.blocks[self._pair_index(j, i)].T

    def _scatter(self, packed):
        """Packed pair values -> full symmetric N x N matrix."""
        g = np.empty((self.n, self.n))
        iu = np.triu_indices(self.n)
        g[iu] = packed
        g[(iu[1], iu[0])] = packed
        return g

    def gram(self, weights):
        """Assemble the N x N Gram under the given integration weights.

        ``weights`` is a WeightsBeta (combined feature map), WeightsM
        (pairwise weighting), the string "emk", or a ("mkl", WeightsBeta)
        pair for the same-level baseline.
        """
        if isinstance(weights, WeightsBeta):
            b = weights.as_array()
            self._check(b.size)
            packed = np.einsum("i,pij,j->p", b, self.blocks, b)
        elif isinstance(weights, WeightsM):
            m = weights.as_array()
            self._check(m.shape[0])
            packed = np.einsum("ij,pij->p", m, self.blocks)
        elif weights == "emk":
            packed = self.blocks.mean(axis=(1, 2))
        elif isinstance(weights, tuple) and len(weights) == 2 and weights[0] == "mkl":
            b = weights[1].as_array() if isinstance(weights[1], WeightsBeta) \
                else np.asarray(weights[1], dtype=np.float64)
            self._check(b.size)
            diag = np.einsum("pii->pi", self.blocks)
            packed = diag @ b
        else:
            raise InvalidMatrix(f"unsupported weights: {weights!r}")
        return self._scatter(packed)

    def _check(self, depth):
        if depth != self.depth:
            raise DimensionError(
                f"weights of depth {depth} against cache of depth {self.depth}")

    def weighted_block_sum(self, coeff):
        """Fixed-order reduction  sum_ij coeff[i,j] * block(i, j)  (T x T).

        ``coeff`` must be symmetric; the result is then symmetric because
        block(j, i) is the stored transpose of block(i, j).
        """
        c = np.asarray(coeff, dtype=np.float64)
        if c.shape != (self.n, self.n):
            raise DimensionError(f"coefficients must be {self.n}x{self.n}")
        iu = np.triu_indices(self.n)
        packed_c = c[iu]
        # off-diagonal pairs appear as both (i,j) and (j,i) = transpose
        h = np.einsum("p,pij->ij", packed_c, self.blocks)
        offdiag = iu[0] != iu[1]
        h_t = np.einsum("p,pij->ji", packed_c[offdiag], self.blocks[offdiag])
        return h + h_t

    def subset(self, indices):
        """Cache restricted to a subset of samples (new packed storage)."""
        idx = np.asarray(indices, dtype=np.int64)
        m = idx.size
        blocks = np.empty((m * (m + 1) // 2, self.depth, self.depth))
        k = 0
        for a in range(m):
            for b in range(a, m):
                blocks[k] = self.block(int(idx[a]), int(idx[b]))
                k += 1
        return BlockCache(blocks, m, self.depth, self.gamma)

    def save(self, path):
        """Write the cache in the binary interchange format.

        Layout: magic "SRGB", then version, N, T as little-endian uint32,
        then the packed blocks as little-endian float64, pair order i <= j,
        row-major within each block.
        """
        with open(path, "wb") as fh:
            fh.write(CACHE_MAGIC)
            fh.write(struct.pack("<III", CACHE_VERSION, self.n, self.depth))
            fh.write(struct.pack("<d", self.gamma))
            fh.write(self.blocks.astype("<f8").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != CACHE_MAGIC:
                raise FormatError(f"{path}: bad magic {magic!r}")
            version, n, depth = struct.unpack("<III", fh.read(12))
            if version != CACHE_VERSION:
                raise FormatError(f"{path}: unsupported version {version}")
            (gamma,) = struct.unpack("<d", fh.read(8))
            count = n * (n + 1) // 2 * depth * depth
            data = np.frombuffer(fh.read(count * 8), dtype="<f8", count=count)
            if data.size != count:
                raise FormatError(f"{path}: truncated block data")
            blocks = data.reshape(n * (n + 1) // 2, depth, depth).astype(np.float64)
        return cls(blocks, n, depth, gamma)


def hierarchy_gram(hierarchies, weights, cfg, cache=None):
    """Gram matrix of a hierarchy dataset under an integration kernel.

    Returns (gram, cache); pass the cache back in to reweight without
    re-evaluating the base kernel.
    """
    if cache is None:
        cache = BlockCache.from_hierarchies(hierarchies, cfg)
    return cache.gram(weights), cache
