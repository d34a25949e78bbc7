"""Pure-numpy kernels.

Reference implementations of the hot numeric paths. `cnesens.backend`
selects between this module and the numba-compiled twin in
`_kernels_numba`; both expose the same functions with identical
signatures and (up to floating-point roundoff) identical results.

Conventions shared by both backends:
  * ``X``     -- (n, d) float64 coordinate matrix.
  * ``A``     -- (n, n) float64 symmetric 0/1 adjacency, zero diagonal.
  * ``gamma`` -- 1/sigma1^2 - 1/sigma2^2 > 0.
  * ``alpha`` -- distance-independent log-odds offset,
                 logit(prior) + log(sigma2/sigma1).
  * ``eps``   -- probability clamp; logs and divisions only ever see
                 probabilities in [eps, 1 - eps].

The pairwise link log-odds are ``z = alpha - gamma * d^2 / 2`` so the
link probability is ``sigmoid(z)``.  Objectives clamp probabilities
before taking logs; gradients use the unclamped ``a - p`` form (exact
away from the clamp saturation zone, which random/fitted embeddings do
not reach).
"""

from __future__ import annotations

import numpy as np


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _sq_dists(X):
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def link_prob_matrix(X, gamma, alpha, eps):
    """Symmetric matrix of link probabilities, clamped, zero diagonal."""
    z = alpha - 0.5 * gamma * _sq_dists(X)
    p = _sigmoid(z)
    np.clip(p, eps, 1.0 - eps, out=p)
    np.fill_diagonal(p, 0.0)
    return p


def objective(X, A, gamma, alpha, eps):
    """Log-likelihood of A given X, summed over unordered pairs."""
    z = alpha - 0.5 * gamma * _sq_dists(X)
    p = np.clip(_sigmoid(z), eps, 1.0 - eps)
    ll = A * np.log(p) + (1.0 - A) * np.log(1.0 - p)
    iu = np.triu_indices(X.shape[0], k=1)
    return float(np.sum(ll[iu]))


def objective_gradient(X, A, gamma, alpha, eps):
    """Objective and its (n, d) gradient: row i = gamma * sum_j (a_ij - p_ij)(x_j - x_i)."""
    z = alpha - 0.5 * gamma * _sq_dists(X)
    p = _sigmoid(z)
    np.fill_diagonal(p, 0.0)
    iu = np.triu_indices(X.shape[0], k=1)
    pu = np.clip(p[iu], eps, 1.0 - eps)
    au = A[iu]
    f = float(np.sum(au * np.log(pu) + (1.0 - au) * np.log(1.0 - pu)))
    w = gamma * (A - p)
    np.fill_diagonal(w, 0.0)
    # difference form per row: exactly zero for coincident points, unlike
    # the algebraically equal w @ X - rowsum(w) * X
    grad = np.empty_like(X)
    for i in range(X.shape[0]):
        grad[i] = w[i] @ (X - X[i])
    return f, grad


def rows_objective(X, xi, xj, i, j, A, gamma, alpha, eps):
    """Log-likelihood restricted to pairs touching i or j, with rows i, j overridden."""
    fi, _ = _row_terms(X, xi, xj, i, j, A, gamma, alpha, eps)
    fj, _ = _row_terms(X, xj, xi, j, i, A, gamma, alpha, eps)
    # the (i, j) pair was counted by both rows; drop the j-side copy
    d2 = float(np.sum((xi - xj) ** 2))
    pij = float(np.clip(_sigmoid(np.array([alpha - 0.5 * gamma * d2]))[0], eps, 1.0 - eps))
    aij = A[i, j]
    dup = aij * np.log(pij) + (1.0 - aij) * np.log(1.0 - pij)
    return fi + fj - dup


def _row_terms(X, xk, xo, k, o, A, gamma, alpha, eps):
    """Objective terms and gradient for row k against all others (row o overridden by xo)."""
    diff = X - xk
    diff[k] = 0.0
    diff[o] = xo - xk
    d2 = np.sum(diff * diff, axis=1)
    z = alpha - 0.5 * gamma * d2
    p = _sigmoid(z)
    pc = np.clip(p, eps, 1.0 - eps)
    a = A[k]
    ll = a * np.log(pc) + (1.0 - a) * np.log(1.0 - pc)
    ll[k] = 0.0
    w = gamma * (a - p)
    w[k] = 0.0
    grad = w @ diff
    return float(np.sum(ll)), grad


def rows_objective_gradient(X, xi, xj, i, j, A, gamma, alpha, eps):
    """Restricted objective plus gradients for the two free rows."""
    fi, gi = _row_terms(X, xi, xj, i, j, A, gamma, alpha, eps)
    fj, gj = _row_terms(X, xj, xi, j, i, A, gamma, alpha, eps)
    d2 = float(np.sum((xi - xj) ** 2))
    pij = float(np.clip(_sigmoid(np.array([alpha - 0.5 * gamma * d2]))[0], eps, 1.0 - eps))
    aij = A[i, j]
    dup = aij * np.log(pij) + (1.0 - aij) * np.log(1.0 - pij)
    return fi + fj - dup, gi, gj


def link_prob_rows(X, xi, xj, i, j, gamma, alpha, eps):
    """Probability rows for nodes i and j with their coordinates overridden.

    Entry [i] of the first row and [j] of the second are 0 (self);
    both rows carry the overridden (i, j) pair probability.
    """
    rows = []
    for k, xk, o, xo in ((i, xi, j, xj), (j, xj, i, xi)):
        diff = X - xk
        diff[o] = xo - xk
        d2 = np.sum(diff * diff, axis=1)
        p = _sigmoid(alpha - 0.5 * gamma * d2)
        np.clip(p, eps, 1.0 - eps, out=p)
        p[k] = 0.0
        rows.append(p)
    return rows[0], rows[1]


def _kl_terms(p, q):
    return p * np.log(p / q) + (1.0 - p) * np.log((1.0 - p) / (1.0 - q))


def kl_total(P, Q, eps):
    """KL divergence between two Bernoulli link-probability matrices over unordered pairs."""
    iu = np.triu_indices(P.shape[0], k=1)
    p = np.clip(P[iu], eps, 1.0 - eps)
    q = np.clip(Q[iu], eps, 1.0 - eps)
    return float(np.sum(_kl_terms(p, q)))


def kl_rows(P, qi, qj, i, j, eps):
    """KL restricted to pairs touching i or j; (i, j) counted once via the i row."""
    n = P.shape[0]
    mask_i = np.ones(n, dtype=bool)
    mask_i[i] = False
    p_i = np.clip(P[i][mask_i], eps, 1.0 - eps)
    q_i = np.clip(qi[mask_i], eps, 1.0 - eps)
    mask_j = np.ones(n, dtype=bool)
    mask_j[j] = False
    mask_j[i] = False
    p_j = np.clip(P[j][mask_j], eps, 1.0 - eps)
    q_j = np.clip(qj[mask_j], eps, 1.0 - eps)
    return float(np.sum(_kl_terms(p_i, q_i)) + np.sum(_kl_terms(p_j, q_j)))


def hessian_blocks(X, A, P, gamma):
    """All diagonal d x d blocks H_k of the objective Hessian, stacked (n, d, d)."""
    n, d = X.shape
    out = np.empty((n, d, d))
    eye = np.eye(d)
    for k in range(n):
        diff = X[k] - X
        w2 = (gamma * gamma) * P[k] * (1.0 - P[k])
        w2[k] = 0.0
        scal = gamma * (np.sum(P[k] - A[k]) - (P[k, k] - A[k, k]))
        out[k] = scal * eye - (diff.T * w2) @ diff
    return out


def approx_scores(X, P, invH, gamma, flips_i, flips_j):
    """Closed-form second-order sensitivity for a batch of flips.

    ``invH[k]`` is the inverse of the k-th Hessian block.  For flip
    (i, j) the score is

        (gamma^4 / 2) * [ sum_{l != i} P_il(1-P_il) ((x_i - x_l) . v_i)^2
                        + sum_{l != i,j} P_jl(1-P_jl) ((x_j - x_l) . v_j)^2 ]

    with v_i = invH[i] (x_i - x_j) and v_j = invH[j] (x_j - x_i); the
    (i, j) pair contributes once, through the i-side sum.
    """
    g4 = gamma ** 4
    m = flips_i.shape[0]
    out = np.empty(m)
    for t in range(m):
        i = flips_i[t]
        j = flips_j[t]
        u = X[i] - X[j]
        vi = invH[i] @ u
        vj = -(invH[j] @ u)
        di = (X[i] - X) @ vi
        dj = (X[j] - X) @ vj
        wi = P[i] * (1.0 - P[i])
        wj = P[j] * (1.0 - P[j])
        si = wi @ (di * di) - wi[i] * di[i] ** 2
        sj = wj @ (dj * dj) - wj[j] * dj[j] ** 2 - wj[i] * dj[i] ** 2
        out[t] = 0.5 * g4 * (si + sj)
    return out
