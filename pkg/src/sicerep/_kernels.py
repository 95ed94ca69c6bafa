"""Hot inner loops, compiled with numba when available.

Each function is written once in plain numpy-compatible Python; the
``maybe_jit`` wrapper from ``_backend`` decides whether it runs compiled or
interpreted.  All loops use fixed iteration orders so results are
reproducible for identical input bits regardless of backend.
"""

import numpy as np

from ._backend import maybe_jit


def _lasso_cd(V, s, lam, beta, tol, max_sweeps):
    """Cyclic coordinate descent for  min_b  0.5 b'Vb - s'b + lam*||b||_1.

    ``beta`` is updated in place and also returned.  ``V`` must be symmetric
    with a strictly positive diagonal.  Returns (beta, sweeps, max_delta).
    """
    p = beta.shape[0]
    # residual r = s - V @ beta, maintained incrementally
    r = s - V @ beta
    delta_max = 0.0
    sweeps = 0
    for sweep in range(max_sweeps):
        delta_max = 0.0
        for k in range(p):
            bk = beta[k]
            z = r[k] + V[k, k] * bk
            if z > lam:
                bnew = (z - lam) / V[k, k]
            elif z < -lam:
                bnew = (z + lam) / V[k, k]
            else:
                bnew = 0.0
            d = bnew - bk
            if d != 0.0:
                beta[k] = bnew
                r -= V[:, k] * d
                ad = abs(d)
                if ad > delta_max:
                    delta_max = ad
        sweeps = sweep + 1
        if delta_max <= tol:
            break
    return beta, sweeps, delta_max


def _svm_smo(ktilde, labels, tol, max_iter):
    """Pairwise ascent for the equality-constrained SVM dual.

    Works on z_i = eta_i * l_i so the balance constraint sum(z) = 0 holds
    exactly throughout.  Sign constraints: z_i >= 0 when l_i = +1 and
    z_i <= 0 when l_i = -1.  Returns (z, gap, iterations).
    """
    n = labels.shape[0]
    z = np.zeros(n)
    # gradient of  sum(l*z) - 0.5 z'Kz  with respect to z
    g = labels.copy()
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        # i: steepest coordinate allowed to grow, j: allowed to shrink
        gi = -np.inf
        gj = np.inf
        i = -1
        j = -1
        for a in range(n):
            if labels[a] > 0.0 or z[a] < 0.0:
                if g[a] > gi:
                    gi = g[a]
                    i = a
            if labels[a] < 0.0 or z[a] > 0.0:
                if g[a] < gj:
                    gj = g[a]
                    j = a
        gap = gi - gj
        if gap <= tol or i < 0 or j < 0 or i == j:
            break
        denom = ktilde[i, i] + ktilde[j, j] - 2.0 * ktilde[i, j]
        if denom > 0.0:
            t = gap / denom
        else:
            t = np.inf
        # step bounds from the sign constraints; a hit lands exactly on 0
        if labels[i] < 0.0 and -z[i] < t:
            t = -z[i]
        if labels[j] > 0.0 and z[j] < t:
            t = z[j]
        if not np.isfinite(t) or t <= 0.0:
            break
        z[i] += t
        z[j] -= t
        g -= t * (ktilde[:, i] - ktilde[:, j])
    return z, gap, it


def _radius_pairs(K, tol, max_iter):
    """Pairwise simplex ascent for  max_a  sum(a*diag(K)) - a'Ka.

    Classic minimum-enclosing-ball updates: shift mass between the most
    violating pair of coordinates with an exact line step.  Returns
    (alpha, gap, iterations).
    """
    n = K.shape[0]
    alpha = np.full(n, 1.0 / n)
    Ka = K @ alpha
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        gi = -np.inf
        gj = np.inf
        i = -1
        j = -1
        for a in range(n):
            ga = K[a, a] - 2.0 * Ka[a]
            if ga > gi:
                gi = ga
                i = a
            if alpha[a] > 0.0 and ga < gj:
                gj = ga
                j = a
        gap = gi - gj
        if gap <= tol or i == j:
            break
        denom = 2.0 * (K[i, i] + K[j, j] - 2.0 * K[i, j])
        if denom > 0.0:
            t = gap / denom
            if t > alpha[j]:
                t = alpha[j]
        else:
            t = alpha[j]
        alpha[i] += t
        alpha[j] -= t
        Ka += t * (K[:, i] - K[:, j])
    return alpha, gap, it


lasso_cd = maybe_jit(_lasso_cd)
svm_smo = maybe_jit(_svm_smo)
radius_pairs = maybe_jit(_radius_pairs)
