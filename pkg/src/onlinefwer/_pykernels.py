"""Pure-Python level recursions, used when the compiled extension is absent.

Signatures and semantics match ``_ckernels.pyx`` one for one.  ``gamma`` and
``h`` are 0-based: ``gamma[k]`` holds the (k+1)-th spending value and
``h[d - 1]`` the graph weight between hypotheses ``d`` steps apart.
"""
import math

import numpy as np

BACKEND = "python"


def adaptive_spending(p, alpha, lam, gamma):
    p = np.asarray(p, dtype=float)
    # t(i) - 1 = number of earlier non-candidates
    t = np.concatenate(([0], np.cumsum(p > lam)[:-1])).astype(np.intp) if p.size else np.zeros(0, np.intp)
    return alpha * (1.0 - lam) * np.asarray(gamma, dtype=float)[t]


def geometric(xi, alpha, lam, pi):
    xi = np.asarray(xi, dtype=float)
    out = np.empty(xi.size)
    remaining = alpha
    for i in range(xi.size):
        out[i] = pi[i] * (1.0 - lam[i]) * remaining
        # remaining - level * xi / (1 - lam) without cancellation
        remaining *= 1.0 - pi[i] * xi[i]
    return out


def graph(p, xi, lam, alpha, gamma, h, closed):
    n = len(p)
    out = np.empty(n)
    credit = np.empty(n)
    h = np.asarray(h, dtype=float)
    for i in range(n):
        inflow = float(np.dot(h[i - 1::-1], credit[:i])) if i else 0.0
        out[i] = (1.0 - lam[i]) * (alpha * gamma[i] + inflow)
        carry = 1.0 - xi[i]
        if closed and p[i] <= out[i]:
            carry = 1.0
        credit[i] = carry * out[i] / (1.0 - lam[i])
    return out


def spending(p, xi, alpha, lam, s, table, closed):
    n = len(p)
    m = len(table)
    out = np.empty(n)
    scale = alpha * (1.0 - lam) / s
    acc = 0.0
    for i in range(n):
        x = 1.0 + acc
        k = int(math.floor(x))
        frac = x - k
        if k >= m:
            f = table[m - 1]
        elif frac == 0.0:
            f = table[k - 1]
        else:
            f = table[k - 1] + frac * (table[k] - table[k - 1])
        out[i] = scale * f
        if not (closed and p[i] <= out[i]):
            acc += xi[i]
    return out
