"""Radius and margin QPs, their product objective, and weight learning.

The integration weights (per-level or per-level-pair) are learned by
minimizing R^2 * ||w||^2, where R is the radius of the smallest enclosing
sphere of the training samples in the kernel-induced space and 1/||w|| is
the margin of an L2-soft-margin SVM.  Both quantities come from small dual
QPs; the weight update is projected gradient with a backtracking line
search, one shared weight vector/matrix across all one-vs-one class pairs.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateLabels, DimensionError, IndefiniteKernel,
                     InsufficientClass, InvalidMatrix, ModelMismatch,
                     NotConverged, StaleDuals)
from ._kernels import radius_pairs, svm_smo
from .integration import WeightsBeta, WeightsM

log = logging.getLogger(__name__)

# grams are accepted as PSD down to this eigenvalue; below it the shift
# policy adds max(0, -eigmin) + SHIFT_PAD once per evaluation
PSD_EIG_TOL = -1e-8
SHIFT_PAD = 1e-10

DEFAULT_DUAL_TOL = 1e-8
DEFAULT_ITERS = 100
DEFAULT_TAU = 1e-5


@dataclass(frozen=True)
class RadiusSolution:
    """Dual of the smallest enclosing sphere: simplex weights and R^2."""

    alpha: np.ndarray
    r_squared: float


@dataclass(frozen=True)
class SvmDual:
    """L2-soft-margin dual: multipliers, squared normal, and bias."""

    eta: np.ndarray
    w_norm_squared: float
    bias: float


@dataclass(frozen=True)
class TrainedClassifier:
    """One-vs-one multiclass model over hierarchy representations."""

    kind: str                       # single | beta | m | mkl | emk
    weights: object                 # WeightsBeta, WeightsM, or None for emk
    classes: tuple
    pair_duals: tuple               # per class pair, aligned with pair order
    gamma: float
    lambdas: tuple
    dim: int
    depth: int
    c: float
    sample_ids: tuple               # training ids, index-aligned with duals
    j_trace: tuple = ()
    hierarchies: tuple = field(default=None, repr=False, compare=False)

    def pairs(self):
        cs = self.classes
        return [(cs[i], cs[j]) for i in range(len(cs)) for j in range(i + 1, len(cs))]


@dataclass(frozen=True)
class PairDual:
    """Binary dual for one class pair, with its sample index set."""

    class_pos: object
    class_neg: object
    indices: tuple                  # positions into the training sample list
    labels: tuple                   # +1 / -1, aligned with indices
    eta: tuple
    bias: float
    w_norm_squared: float
    r_squared: float


def project_simplex(v):
    """Euclidean projection onto the probability simplex.

    Vectors are projected directly; matrices are symmetrized first and the
    flattened entries projected, so the result stays symmetric.
    """
    a = np.asarray(v, dtype=np.float64)
    if a.ndim == 2:
        if a.shape[0] != a.shape[1]:
            raise DimensionError("matrix weights must be square")
        sym = (a + a.T) / 2.0
        return _project_simplex_vector(sym.ravel()).reshape(a.shape)
    if a.ndim != 1:
        raise DimensionError("weights must be a vector or square matrix")
    return _project_simplex_vector(a)


def _project_simplex_vector(c):
    n = c.size
    a = -np.sort(-c)
    cut = (np.cumsum(a) - 1.0) / np.arange(1, n + 1)
    k = np.nonzero(a > cut)[0][-1]
    return np.maximum(c - cut[k], 0.0)


def _check_sym_psd(gram, tol=PSD_EIG_TOL, what="gram"):
    g = np.asarray(gram, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DimensionError(f"{what} must be square, got {g.shape}")
    if np.abs(g - g.T).max() > 1e-10 * max(1.0, np.abs(g).max()):
        raise InvalidMatrix(f"{what} must be symmetric")
    eigmin = float(np.linalg.eigvalsh(g)[0])
    if eigmin < tol:
        raise IndefiniteKernel(
            f"{what} has eigenvalue {eigmin:.3e} below the accepted tolerance")
    return g, eigmin


def solve_radius(gram, tol=1e-6, max_iter=None):
    """Smallest enclosing sphere in feature space, as a simplex QP.

    Maximizes sum_i a_i k_ii - a'Ka over the simplex.  At the optimum every
    weighted sample sits on the sphere (distance R^2 within tol) and the
    rest lie inside.  The gram must be PSD within the accepted tolerance;
    indefinite input raises IndefiniteKernel.  Exhausting the iteration
    budget raises NotConverged.
    """
    g, _ = _check_sym_psd(gram)
    n = g.shape[0]
    if max_iter is None:
        max_iter = max(50_000, 2_000 * n)
    alpha, gap, it = radius_pairs(g, tol, max_iter)
    if gap > tol:
        raise NotConverged(
            f"radius QP: gap {gap:.3e} > tol after {it} iterations",
            estimate=alpha, residual=gap, iterations=it)
    alpha = alpha / alpha.sum()
    r2 = float(alpha @ np.diag(g) - alpha @ g @ alpha)
    alpha.setflags(write=False)
    return RadiusSolution(alpha, max(r2, 0.0))


def radius_kkt_violation(gram, sol):
    """Worst violation of the enclosing-sphere optimality conditions."""
    g = np.asarray(gram, dtype=np.float64)
    alpha = sol.alpha
    ka = g @ alpha
    dist = np.diag(g) - 2.0 * ka + alpha @ ka
    on_sphere = np.abs(dist - sol.r_squared)
    inside = dist - sol.r_squared
    viol = np.where(alpha > 0, on_sphere, np.maximum(0.0, inside))
    return float(viol.max())


def solve_svm_l2(gram, labels, c, tol=1e-6, max_iter=None):
    """L2-soft-margin SVM dual on a precomputed gram.

    The slack penalty appears as a (1/c) ridge on the gram diagonal; pass
    ``c=inf`` for the hard-margin limit.  Labels must be +1/-1 with both
    classes present.  Returns the multipliers, ||w||^2 = 2 * (optimal dual
    value), and the bias averaged over the support KKT conditions.
    """
    g = np.asarray(gram, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if g.shape[0] != y.size:
        raise DimensionError(f"gram {g.shape} against {y.size} labels")
    if not np.all(np.abs(y) == 1.0):
        raise InvalidMatrix("labels must be +1/-1")
    if np.all(y > 0) or np.all(y < 0):
        raise DegenerateLabels("both classes must be present")
    ridge = 0.0 if np.isinf(c) else 1.0 / c
    ktilde = g + ridge * np.eye(g.shape[0])
    _check_sym_psd(ktilde, what="ridged gram")
    if max_iter is None:
        max_iter = max(100_000, 4_000 * y.size)
    z, gap, it = svm_smo(np.ascontiguousarray(ktilde), y, tol, max_iter)
    if gap > tol:
        raise NotConverged(
            f"SVM dual: gap {gap:.3e} > tol after {it} iterations",
            estimate=z, residual=gap, iterations=it)
    eta = z * y
    np.maximum(eta, 0.0, out=eta)
    grad = y - ktilde @ z
    support = eta > 0
    bias = float(grad[support].mean()) if support.any() else 0.0
    objective = float(eta.sum() - 0.5 * z @ ktilde @ z)
    eta.setflags(write=False)
    return SvmDual(eta, 2.0 * objective, bias)


def svm_kkt_violation(gram, labels, c, dual):
    """Worst violation of the L2-soft-margin dual optimality conditions."""
    g = np.asarray(gram, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    ridge = 0.0 if np.isinf(c) else 1.0 / c
    ktilde = g + ridge * np.eye(g.shape[0])
    f = ktilde @ (dual.eta * y)
    margin = y * (f + dual.bias)
    viol = np.where(dual.eta > 0, np.abs(margin - 1.0),
                    np.maximum(0.0, 1.0 - margin))
    balance = abs(float(dual.eta @ y))
    return max(float(viol.max()), balance)


def _shifted(gram, context=""):
    """Apply the indefiniteness shift policy; returns (gram', shift)."""
    eigmin = float(np.linalg.eigvalsh(gram)[0])
    if eigmin >= PSD_EIG_TOL:
        return gram, 0.0
    shift = -eigmin + SHIFT_PAD
    log.warning("indefinite gram (eigmin %.3e)%s: shifting by %.3e",
                eigmin, f" [{context}]" if context else "", shift)
    return gram + shift * np.eye(gram.shape[0]), shift


def radius_margin_objective(gram, labels, c, tol=DEFAULT_DUAL_TOL):
    """R^2 * ||w||^2 for one binary problem on an assembled gram.

    The radius QP runs on the (shift-policy adjusted) gram itself; the SVM
    dual runs on the same gram plus the (1/c) ridge.  Returns
    (J, RadiusSolution, SvmDual).
    """
    g = np.asarray(gram, dtype=np.float64)
    g, _ = _shifted(g)
    radius = solve_radius(g, tol=tol)
    dual = solve_svm_l2(g, labels, c, tol=tol)
    return radius.r_squared * dual.w_norm_squared, radius, dual


def _dual_feasibility(labels, radius, dual):
    y = np.asarray(labels, dtype=np.float64)
    res = abs(float(radius.alpha.sum()) - 1.0)
    res = max(res, float(max(0.0, -(radius.alpha.min())))) if radius.alpha.size else res
    res = max(res, abs(float(dual.eta @ y)))
    if dual.eta.size:
        res = max(res, float(max(0.0, -dual.eta.min())))
    return res


def pair_gradient_coefficients(labels, radius, dual):
    """Envelope-theorem coefficient matrix dJ/dk_ij for one binary problem.

    dR^2/dk uses  diag(alpha) - alpha alpha', d||w||^2/dk uses
    -(eta*l)(eta*l)'; the combined coefficient is
    ||w||^2 * dR^2/dk + R^2 * d||w||^2/dk.  Raises StaleDuals when the
    supplied duals are no longer feasible.
    """
    if _dual_feasibility(labels, radius, dual) > 1e-6:
        raise StaleDuals("dual solutions violate feasibility beyond 1e-6")
    y = np.asarray(labels, dtype=np.float64)
    a = radius.alpha
    zy = dual.eta * y
    c_radius = np.diag(a) - np.outer(a, a)
    c_margin = -np.outer(zy, zy)
    return dual.w_norm_squared * c_radius + radius.r_squared * c_margin


def _weights_object(kind, arr):
    """Gram-assembly spec for the block cache at raw weights ``arr``."""
    if kind in ("beta", "single"):
        return WeightsBeta(arr)
    if kind == "m":
        return WeightsM(arr)
    if kind == "mkl":
        return ("mkl", WeightsBeta(arr))
    if kind == "emk":
        return "emk"
    raise InvalidMatrix(f"unknown integrator kind {kind!r}")


def _weights_value(kind, arr):
    """Stored weights object (beta vector, M matrix, or None for emk)."""
    if kind in ("beta", "single", "mkl"):
        return WeightsBeta(arr)
    if kind == "m":
        return WeightsM(arr)
    if kind == "emk":
        return None
    raise InvalidMatrix(f"unknown integrator kind {kind!r}")


def _uniform_start(kind, depth):
    if kind == "m":
        return np.full((depth, depth), 1.0 / depth**2)
    return np.full(depth, 1.0 / depth)


def _class_pairs(labels):
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise DegenerateLabels("need at least two classes")
    pairs = []
    for i in range(len(classes)):
        for j in range(i + 1, len(classes)):
            a, b = classes[i], classes[j]
            idx = np.array([k for k, l in enumerate(labels) if l in (a, b)],
                           dtype=np.int64)
            y = np.array([1.0 if labels[k] == a else -1.0 for k in idx])
            pairs.append((a, b, idx, y))
    return classes, pairs


def _evaluate_pairs(kind, arr, cache, pairs, c, tol):
    """Sum of per-pair J values at the given raw weights; keeps the duals."""
    gram = cache.gram(_weights_object(kind, arr))
    total = 0.0
    details = []
    for a, b, idx, y in pairs:
        sub = gram[np.ix_(idx, idx)]
        sub, _ = _shifted(sub, context=f"{a} vs {b}")
        radius = solve_radius(sub, tol=tol)
        dual = solve_svm_l2(sub, y, c, tol=tol)
        total += radius.r_squared * dual.w_norm_squared
        details.append((radius, dual))
    return total, details


def _pairs_gradient(kind, arr, cache, pairs, details):
    coeff_full = np.zeros((cache.n, cache.n))
    for (a, b, idx, y), (radius, dual) in zip(pairs, details):
        coeff = pair_gradient_coefficients(y, radius, dual)
        coeff_full[np.ix_(idx, idx)] += coeff
    h = cache.weighted_block_sum(coeff_full)
    if kind in ("beta", "single"):
        return 2.0 * (h @ arr)
    if kind == "m":
        return h
    if kind == "mkl":
        return np.diag(h).copy()
    raise InvalidMatrix(f"no gradient for kind {kind!r}")


def radius_margin_objective(weights, cache, labels, c, tol=DEFAULT_DUAL_TOL,
                            indices=None, kind=None):
    """R^2 * ||w||^2 at the given integration weights for one binary problem.

    Assembles the Gram from the block cache under ``weights`` (WeightsBeta
    or WeightsM; pass kind="mkl" for the same-level baseline), applies the
    indefiniteness shift policy, and solves the radius QP on the gram and
    the SVM dual on the gram plus the (1/c) ridge.  ``indices`` restricts
    to a subset of the cached samples.  Returns (J, RadiusSolution, SvmDual).
    """
    if kind is None:
        kind = "beta" if isinstance(weights, WeightsBeta) else "m"
    arr = weights.as_array() if hasattr(weights, "as_array") else np.asarray(weights)
    gram = cache.gram(_weights_object(kind, arr))
    if indices is not None:
        idx = np.asarray(indices, dtype=np.int64)
        gram = gram[np.ix_(idx, idx)]
    gram, _ = _shifted(gram)
    radius = solve_radius(gram, tol=tol)
    dual = solve_svm_l2(gram, labels, c, tol=tol)
    return radius.r_squared * dual.w_norm_squared, radius, dual


def gradient_weights(weights, cache, labels, c, radius, dual, indices=None,
                     kind=None):
    """Gradient of R^2 * ||w||^2 with respect to the integration weights.

    Differentiates at the supplied optimal duals (envelope theorem); the
    per-pair kernel derivative is (B + B')beta for per-level weights, the
    raw block for per-pair weights, and the block diagonal for the
    same-level baseline.  Raises StaleDuals when the duals are infeasible.
    """
    if kind is None:
        kind = "beta" if isinstance(weights, WeightsBeta) else "m"
    arr = weights.as_array() if hasattr(weights, "as_array") else np.asarray(weights)
    coeff = pair_gradient_coefficients(labels, radius, dual)
    if indices is not None:
        idx = np.asarray(indices, dtype=np.int64)
        full = np.zeros((cache.n, cache.n))
        full[np.ix_(idx, idx)] = coeff
        coeff = full
    h = cache.weighted_block_sum(coeff)
    if kind in ("beta", "single"):
        return 2.0 * (h @ arr)
    if kind == "m":
        return h
    if kind == "mkl":
        return np.diag(h).copy()
    raise InvalidMatrix(f"no gradient for kind {kind!r}")


def optimize_weights(kind, cache, labels, c, iters=DEFAULT_ITERS,
                     tau=DEFAULT_TAU, tol=DEFAULT_DUAL_TOL, max_halvings=30):
    """Learn integration weights by minimizing the summed radius-margin bound.

    Starts from uniform weights and alternates dual solves with projected
    gradient steps; a backtracking halving line search accepts only strict
    decreases, so the returned J trace never increases.  Stops after
    ``iters`` updates or when |J_{i+1} - J_i| <= tau * J_i.  Multiclass
    label sets are handled as the unweighted sum of one-vs-one objectives
    sharing the same weights.  Returns (weights, j_trace).
    """
    arr = _uniform_start(kind, cache.depth)
    _, pairs = _class_pairs(labels)
    j_cur, details = _evaluate_pairs(kind, arr, cache, pairs, c, tol)
    trace = [j_cur]
    if cache.depth == 1:
        return _weights_value(kind, arr), tuple(trace)
    step = None
    for _ in range(iters):
        grad = _pairs_gradient(kind, arr, cache, pairs, details)
        gmax = float(np.abs(grad).max())
        if gmax == 0.0:
            break
        if step is None:
            step = 1.0 / gmax
        s = step
        accepted = False
        for _h in range(max_halvings):
            cand = project_simplex(arr - s * grad)
            if np.array_equal(cand, arr):
                s *= 0.5
                continue
            j_cand, details_cand = _evaluate_pairs(kind, cand, cache, pairs, c, tol)
            if j_cand < j_cur:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            # projected fixed point: the next iterate does not move, so the
            # relative-change rule fires with a zero step
            trace.append(j_cur)
            break
        j_prev, j_cur = j_cur, j_cand
        arr, details = cand, details_cand
        trace.append(j_cur)
        step = 2.0 * s
        if abs(j_cur - j_prev) <= tau * j_prev:
            break
    return _weights_value(kind, arr), tuple(trace)


def train_multiclass(hierarchies, labels, kind, c, gamma, grid_spec=None,
                     iters=DEFAULT_ITERS, tau=DEFAULT_TAU,
                     tol=DEFAULT_DUAL_TOL, sample_ids=None, cache=None):
    """Fit a one-vs-one classifier over hierarchy representations.

    Every class needs at least two training samples.  For kinds beta/m/mkl
    the shared integration weights are learned first; emk uses the fixed
    uniform pairing and single requires depth-1 hierarchies.  One binary
    dual is stored per class pair, fit on that pair's samples only.
    """
    from .integration import BlockCache
    from .spd import KernelConfig

    labels = list(labels)
    if len(hierarchies) != len(labels):
        raise DimensionError("one label per hierarchy required")
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise InsufficientClass("need at least two classes")
    for cls in classes:
        if labels.count(cls) < 2:
            raise InsufficientClass(f"class {cls!r} has fewer than 2 samples")
    depth = hierarchies[0].depth
    if kind == "single" and depth != 1:
        raise InvalidMatrix("kind 'single' requires depth-1 hierarchies")
    if sample_ids is None:
        sample_ids = tuple(h.sample_id for h in hierarchies)

    if cache is None:
        cache = BlockCache.from_hierarchies(hierarchies, KernelConfig(gamma))
    if kind in ("beta", "m", "mkl"):
        weights, trace = optimize_weights(kind, cache, labels, c,
                                          iters=iters, tau=tau, tol=tol)
    elif kind == "emk":
        weights = None
        j_total, _ = _evaluate_pairs("emk", None, cache, _class_pairs(labels)[1], c, tol)
        trace = (j_total,)
    elif kind == "single":
        weights = WeightsBeta((1.0,))
        j_total, _ = _evaluate_pairs("single", np.array([1.0]), cache,
                                     _class_pairs(labels)[1], c, tol)
        trace = (j_total,)
    else:
        raise InvalidMatrix(f"unknown integrator kind {kind!r}")

    arr = weights.as_array() if weights is not None else None
    wobj = _weights_object(kind, arr) if kind != "emk" else "emk"
    gram = cache.gram(wobj)
    _, pairs = _class_pairs(labels)
    pair_duals = []
    for a, b, idx, y in pairs:
        sub = gram[np.ix_(idx, idx)]
        sub, _ = _shifted(sub, context=f"{a} vs {b}")
        radius = solve_radius(sub, tol=tol)
        dual = solve_svm_l2(sub, y, c, tol=tol)
        pair_duals.append(PairDual(
            class_pos=a, class_neg=b,
            indices=tuple(int(k) for k in idx),
            labels=tuple(int(v) for v in y),
            eta=tuple(float(v) for v in dual.eta),
            bias=dual.bias,
            w_norm_squared=dual.w_norm_squared,
            r_squared=radius.r_squared))

    if grid_spec is None:
        grid_spec = ("explicit", tuple(hierarchies[0].lambdas))
    return TrainedClassifier(
        kind=kind, weights=weights, classes=tuple(classes),
        pair_duals=tuple(pair_duals), gamma=float(gamma),
        lambdas=tuple(grid_spec), dim=hierarchies[0].dim, depth=depth,
        c=float(c), sample_ids=tuple(sample_ids), j_trace=tuple(trace),
        hierarchies=tuple(hierarchies))


def _cross_gram(model, samples):
    """Integrated kernel between every training sample and every query."""
    from .spd import cross_sq_distances

    train = model.hierarchies
    depth = model.depth
    flat_a = np.array([lvl.log_values().ravel() for h in train for lvl in h.levels])
    flat_b = np.array([lvl.log_values().ravel() for h in samples for lvl in h.levels])
    kappa = np.exp(-model.gamma * cross_sq_distances(flat_a, flat_b))
    k4 = kappa.reshape(len(train), depth, len(samples), depth)
    kind = model.kind
    if kind in ("beta", "single"):
        b = model.weights.as_array()
        return np.einsum("i,aibj,j->ab", b, k4, b)
    if kind == "m":
        m = model.weights.as_array()
        return np.einsum("ij,aibj->ab", m, k4)
    if kind == "mkl":
        b = model.weights.as_array()
        return np.einsum("j,ajbj->ab", b, k4)
    if kind == "emk":
        return k4.mean(axis=(1, 3))
    raise InvalidMatrix(f"unknown integrator kind {kind!r}")


def predict_batch(model, samples):
    """Predicted class for each query hierarchy, with vote details.

    Each class-pair classifier votes by the sign of its decision value;
    the majority wins, ties are broken by the largest sum of absolute
    decision values over the tied class's pairs, then by class order.
    Returns a list of (label, votes, decisions) tuples.
    """
    if model.hierarchies is None:
        raise ModelMismatch("model is not bound to its training hierarchies")
    for s in samples:
        if s.depth != model.depth or s.dim != model.dim:
            raise ModelMismatch(
                f"sample depth/dim ({s.depth}, {s.dim}) does not match "
                f"model ({model.depth}, {model.dim})")
    gram = _cross_gram(model, samples)
    class_index = {cls: k for k, cls in enumerate(model.classes)}
    results = []
    for s_col in range(len(samples)):
        votes = {cls: 0 for cls in model.classes}
        strength = {cls: 0.0 for cls in model.classes}
        decisions = []
        for pd in model.pair_duals:
            idx = np.asarray(pd.indices, dtype=np.int64)
            y = np.asarray(pd.labels, dtype=np.float64)
            eta = np.asarray(pd.eta)
            dec = float((eta * y) @ gram[idx, s_col] + pd.bias)
            winner = pd.class_pos if dec > 0 else pd.class_neg
            votes[winner] += 1
            strength[winner] += abs(dec)
            decisions.append((pd.class_pos, pd.class_neg, dec))
        best = max(votes.values())
        tied = [cls for cls in model.classes if votes[cls] == best]
        if len(tied) > 1:
            top = max(strength[cls] for cls in tied)
            tied = [cls for cls in tied if strength[cls] == top]
        label = min(tied, key=lambda cls: class_index[cls])
        results.append((label, votes, decisions))
    return results


def predict(model, sample):
    """Predicted class for one query hierarchy (see ``predict_batch``)."""
    return predict_batch(model, [sample])[0]
