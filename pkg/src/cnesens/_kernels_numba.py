"""Numba-compiled kernels.

Hot-loop twin of `_kernels_numpy`; same functions, same signatures,
explicit pair loops instead of matrix algebra.  Compiled lazily on
first call with on-disk caching, so repeated processes (pytest runs,
worker pools) pay the compile cost once.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _sig(z):
    if z >= 0.0:
        return 1.0 / (1.0 + np.exp(-z))
    ez = np.exp(z)
    return ez / (1.0 + ez)


@njit(cache=True)
def link_prob_matrix(X, gamma, alpha, eps):
    n, d = X.shape
    P = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d2 = 0.0
            for c in range(d):
                dx = X[i, c] - X[j, c]
                d2 += dx * dx
            p = _sig(alpha - 0.5 * gamma * d2)
            if p < eps:
                p = eps
            elif p > 1.0 - eps:
                p = 1.0 - eps
            P[i, j] = p
            P[j, i] = p
    return P


@njit(cache=True)
def objective(X, A, gamma, alpha, eps):
    n, d = X.shape
    f = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            d2 = 0.0
            for c in range(d):
                dx = X[i, c] - X[j, c]
                d2 += dx * dx
            p = _sig(alpha - 0.5 * gamma * d2)
            if p < eps:
                p = eps
            elif p > 1.0 - eps:
                p = 1.0 - eps
            if A[i, j] == 1.0:
                f += np.log(p)
            else:
                f += np.log(1.0 - p)
    return f


@njit(cache=True)
def objective_gradient(X, A, gamma, alpha, eps):
    n, d = X.shape
    grad = np.zeros((n, d))
    f = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            d2 = 0.0
            for c in range(d):
                dx = X[i, c] - X[j, c]
                d2 += dx * dx
            p = _sig(alpha - 0.5 * gamma * d2)
            pc = p
            if pc < eps:
                pc = eps
            elif pc > 1.0 - eps:
                pc = 1.0 - eps
            a = A[i, j]
            if a == 1.0:
                f += np.log(pc)
            else:
                f += np.log(1.0 - pc)
            w = gamma * (a - p)
            for c in range(d):
                dx = X[j, c] - X[i, c]
                grad[i, c] += w * dx
                grad[j, c] -= w * dx
    return f, grad


@njit(cache=True, inline="always")
def _row_ll_grad(X, xk, xo, k, o, a_row, gamma, alpha, eps, grad_out):
    """Objective terms and gradient for free row k (row o overridden by xo)."""
    n, d = X.shape
    f = 0.0
    for c in range(d):
        grad_out[c] = 0.0
    for l in range(n):
        if l == k:
            continue
        d2 = 0.0
        for c in range(d):
            if l == o:
                dx = xo[c] - xk[c]
            else:
                dx = X[l, c] - xk[c]
            d2 += dx * dx
        p = _sig(alpha - 0.5 * gamma * d2)
        pc = p
        if pc < eps:
            pc = eps
        elif pc > 1.0 - eps:
            pc = 1.0 - eps
        a = a_row[l]
        if a == 1.0:
            f += np.log(pc)
        else:
            f += np.log(1.0 - pc)
        w = gamma * (a - p)
        for c in range(d):
            if l == o:
                dx = xo[c] - xk[c]
            else:
                dx = X[l, c] - xk[c]
            grad_out[c] += w * dx
    return f


@njit(cache=True)
def _pair_ll(xi, xj, aij, gamma, alpha, eps):
    d2 = 0.0
    for c in range(xi.shape[0]):
        dx = xi[c] - xj[c]
        d2 += dx * dx
    p = _sig(alpha - 0.5 * gamma * d2)
    if p < eps:
        p = eps
    elif p > 1.0 - eps:
        p = 1.0 - eps
    if aij == 1.0:
        return np.log(p)
    return np.log(1.0 - p)


@njit(cache=True)
def rows_objective(X, xi, xj, i, j, A, gamma, alpha, eps):
    d = X.shape[1]
    scratch = np.empty(d)
    fi = _row_ll_grad(X, xi, xj, i, j, A[i], gamma, alpha, eps, scratch)
    fj = _row_ll_grad(X, xj, xi, j, i, A[j], gamma, alpha, eps, scratch)
    return fi + fj - _pair_ll(xi, xj, A[i, j], gamma, alpha, eps)


@njit(cache=True)
def rows_objective_gradient(X, xi, xj, i, j, A, gamma, alpha, eps):
    d = X.shape[1]
    gi = np.empty(d)
    gj = np.empty(d)
    fi = _row_ll_grad(X, xi, xj, i, j, A[i], gamma, alpha, eps, gi)
    fj = _row_ll_grad(X, xj, xi, j, i, A[j], gamma, alpha, eps, gj)
    f = fi + fj - _pair_ll(xi, xj, A[i, j], gamma, alpha, eps)
    return f, gi, gj


@njit(cache=True)
def link_prob_rows(X, xi, xj, i, j, gamma, alpha, eps):
    n, d = X.shape
    qi = np.zeros(n)
    qj = np.zeros(n)
    for l in range(n):
        if l != i:
            d2 = 0.0
            for c in range(d):
                if l == j:
                    dx = xj[c] - xi[c]
                else:
                    dx = X[l, c] - xi[c]
                d2 += dx * dx
            p = _sig(alpha - 0.5 * gamma * d2)
            if p < eps:
                p = eps
            elif p > 1.0 - eps:
                p = 1.0 - eps
            qi[l] = p
        if l != j:
            d2 = 0.0
            for c in range(d):
                if l == i:
                    dx = xi[c] - xj[c]
                else:
                    dx = X[l, c] - xj[c]
                d2 += dx * dx
            p = _sig(alpha - 0.5 * gamma * d2)
            if p < eps:
                p = eps
            elif p > 1.0 - eps:
                p = 1.0 - eps
            qj[l] = p
    return qi, qj


@njit(cache=True, inline="always")
def _kl_term(p, q, eps):
    if p < eps:
        p = eps
    elif p > 1.0 - eps:
        p = 1.0 - eps
    if q < eps:
        q = eps
    elif q > 1.0 - eps:
        q = 1.0 - eps
    return p * np.log(p / q) + (1.0 - p) * np.log((1.0 - p) / (1.0 - q))


@njit(cache=True)
def kl_total(P, Q, eps):
    n = P.shape[0]
    s = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            s += _kl_term(P[i, j], Q[i, j], eps)
    return s


@njit(cache=True)
def kl_rows(P, qi, qj, i, j, eps):
    n = P.shape[0]
    s = 0.0
    for l in range(n):
        if l != i:
            s += _kl_term(P[i, l], qi[l], eps)
        if l != j and l != i:
            s += _kl_term(P[j, l], qj[l], eps)
    return s


@njit(cache=True)
def hessian_blocks(X, A, P, gamma):
    n, d = X.shape
    out = np.zeros((n, d, d))
    g2 = gamma * gamma
    for k in range(n):
        scal = 0.0
        for l in range(n):
            if l == k:
                continue
            scal += P[k, l] - A[k, l]
            w2 = g2 * P[k, l] * (1.0 - P[k, l])
            for c in range(d):
                dc = X[k, c] - X[l, c]
                for e in range(d):
                    out[k, c, e] -= w2 * dc * (X[k, e] - X[l, e])
        scal *= gamma
        for c in range(d):
            out[k, c, c] += scal
    return out


@njit(cache=True)
def approx_scores(X, P, invH, gamma, flips_i, flips_j):
    n, d = X.shape
    m = flips_i.shape[0]
    out = np.empty(m)
    g4 = gamma ** 4
    vi = np.empty(d)
    vj = np.empty(d)
    for t in range(m):
        i = flips_i[t]
        j = flips_j[t]
        for c in range(d):
            u = 0.0
            v = 0.0
            for e in range(d):
                ue = X[i, e] - X[j, e]
                u += invH[i, c, e] * ue
                v -= invH[j, c, e] * ue
            vi[c] = u
            vj[c] = v
        acc = 0.0
        for l in range(n):
            if l != i:
                s = 0.0
                for c in range(d):
                    s += (X[i, c] - X[l, c]) * vi[c]
                acc += P[i, l] * (1.0 - P[i, l]) * s * s
            if l != j and l != i:
                s = 0.0
                for c in range(d):
                    s += (X[j, c] - X[l, c]) * vj[c]
                acc += P[j, l] * (1.0 - P[j, l]) * s * s
        out[t] = 0.5 * g4 * acc
    return out
