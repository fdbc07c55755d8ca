# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled level recursions; mirrors onlinefwer._pykernels exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()

BACKEND = "cython"


def adaptive_spending(const double[::1] p, double alpha, double lam, const double[::1] gamma):
    cdef Py_ssize_t n = p.shape[0], i
    cdef Py_ssize_t t = 0
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] lv = out
    cdef double scale = alpha * (1.0 - lam)
    for i in range(n):
        lv[i] = scale * gamma[t]
        if p[i] > lam:
            t += 1
    return out


def geometric(const double[::1] xi, double alpha, const double[::1] lam, const double[::1] pi):
    cdef Py_ssize_t n = xi.shape[0], i
    cdef double remaining = alpha
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] lv = out
    for i in range(n):
        lv[i] = pi[i] * (1.0 - lam[i]) * remaining
        # remaining - level * xi / (1 - lam) without cancellation
        remaining *= 1.0 - pi[i] * xi[i]
    return out


def graph(const double[::1] p, const double[::1] xi, const double[::1] lam, double alpha,
          const double[::1] gamma, const double[::1] h, bint closed):
    cdef Py_ssize_t n = p.shape[0], i, j
    cdef double inflow, carry
    out = np.empty(n, dtype=np.float64)
    credit = np.empty(n, dtype=np.float64)
    cdef double[::1] lv = out
    cdef double[::1] c = credit
    for i in range(n):
        inflow = 0.0
        for j in range(i):
            inflow += h[i - j - 1] * c[j]
        lv[i] = (1.0 - lam[i]) * (alpha * gamma[i] + inflow)
        carry = 1.0 - xi[i]
        if closed and p[i] <= lv[i]:
            carry = 1.0
        c[i] = carry * lv[i] / (1.0 - lam[i])
    return out


def spending(const double[::1] p, const double[::1] xi, double alpha, double lam,
             double s, const double[::1] table, bint closed):
    cdef Py_ssize_t n = p.shape[0], i, k
    cdef Py_ssize_t m = table.shape[0]
    cdef double x, frac, f
    cdef double acc = 0.0
    cdef double scale = alpha * (1.0 - lam) / s
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] lv = out
    for i in range(n):
        x = 1.0 + acc
        k = <Py_ssize_t> floor(x)
        frac = x - k
        if k >= m:
            f = table[m - 1]
        elif frac == 0.0:
            f = table[k - 1]
        else:
            f = table[k - 1] + frac * (table[k] - table[k - 1])
        lv[i] = scale * f
        if not (closed and p[i] <= lv[i]):
            acc += xi[i]
    return out
