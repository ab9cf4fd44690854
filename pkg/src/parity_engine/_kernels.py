"""Compiled inner loops for drawing team strengths.

The strength path ``theta`` (``T`` periods by ``t`` teams) has a Gaussian full
conditional whose precision is block tridiagonal: diagonal blocks
``w * XtX[p] + diag_prior[p] * I`` and off-diagonal blocks
``off_prior[p] * I`` between periods ``p`` and ``p + 1``.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _cholesky(a, out):
    n = a.shape[0]
    for j in range(n):
        s = a[j, j]
        for k in range(j):
            s -= out[j, k] * out[j, k]
        if s <= 0.0:
            return False
        d = math.sqrt(s)
        out[j, j] = d
        for i in range(j + 1, n):
            s = a[i, j]
            for k in range(j):
                s -= out[i, k] * out[j, k]
            out[i, j] = s / d
        for i in range(j):
            out[i, j] = 0.0
    return True


@njit(cache=True)
def _lower_inverse(L, out):
    n = L.shape[0]
    for j in range(n):
        out[j, j] = 1.0 / L[j, j]
        for i in range(j + 1, n):
            s = 0.0
            for k in range(j, i):
                s -= L[i, k] * out[k, j]
            out[i, j] = s / L[i, i]
        for i in range(j):
            out[i, j] = 0.0


@njit(cache=True)
def _matvec(A, x, out, transpose):
    n = A.shape[0]
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += (A[j, i] if transpose else A[i, j]) * x[j]
        out[i] = s


@njit(cache=True)
def draw_theta_joint(xtx, w, diag_prior, off_prior, lin, z, theta):
    """Exact joint draw of the strength path via block Cholesky.

    Returns False if a block fails to factorise.
    """
    T, t = lin.shape
    Linv = np.empty((T, t, t))
    L = np.empty((t, t))
    D = np.empty((t, t))
    v = np.empty((T, t))
    tmp = np.empty(t)
    tmp2 = np.empty(t)
    for p in range(T):
        for i in range(t):
            for j in range(t):
                D[i, j] = w * xtx[p, i, j]
            D[i, i] += diag_prior[p]
        if p > 0:
            b2 = off_prior[p - 1] * off_prior[p - 1]
            Li = Linv[p - 1]
            for i in range(t):
                for j in range(t):
                    s = 0.0
                    for k in range(max(i, j), t):
                        s += Li[k, i] * Li[k, j]
                    D[i, j] -= b2 * s
        if not _cholesky(D, L):
            return False
        _lower_inverse(L, Linv[p])
        for i in range(t):
            tmp[i] = lin[p, i]
        if p > 0:
            _matvec(Linv[p - 1], v[p - 1], tmp2, True)
            for i in range(t):
                tmp[i] -= off_prior[p - 1] * tmp2[i]
        _matvec(Linv[p], tmp, v[p], False)
    for i in range(t):
        tmp[i] = v[T - 1, i] + z[T - 1, i]
    _matvec(Linv[T - 1], tmp, theta[T - 1], True)
    for p in range(T - 2, -1, -1):
        _matvec(Linv[p], theta[p + 1], tmp2, False)
        for i in range(t):
            tmp[i] = v[p, i] + z[p, i] - off_prior[p] * tmp2[i]
        _matvec(Linv[p], tmp, theta[p], True)
    return True


@njit(cache=True)
def draw_theta_blockwise(xtx, w, diag_prior, off_prior, lin, z, theta):
    """One Gibbs pass drawing each period's strengths given its neighbours."""
    T, t = lin.shape
    L = np.empty((t, t))
    Li = np.empty((t, t))
    D = np.empty((t, t))
    rhs = np.empty(t)
    mean_part = np.empty(t)
    for p in range(T):
        for i in range(t):
            for j in range(t):
                D[i, j] = w * xtx[p, i, j]
            D[i, i] += diag_prior[p]
            rhs[i] = lin[p, i]
            if p > 0:
                rhs[i] -= off_prior[p - 1] * theta[p - 1, i]
            if p < T - 1:
                rhs[i] -= off_prior[p] * theta[p + 1, i]
        if not _cholesky(D, L):
            return False
        _lower_inverse(L, Li)
        _matvec(Li, rhs, mean_part, False)
        for i in range(t):
            mean_part[i] += z[p, i]
        _matvec(Li, mean_part, theta[p], True)
    return True
