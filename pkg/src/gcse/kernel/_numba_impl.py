"""Numba ``@njit`` implementations of the array kernels.

Matmuls go through BLAS via ``np.dot``; elementwise passes are explicit
loops so numba fuses them into single sweeps without temporaries. Kept
single-threaded and without fastmath so results are reproducible
run-to-run (they may differ from the numpy backend by roundoff).
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def affine(a, w, b):
    z = np.dot(a, w.T)
    for i in range(z.shape[0]):
        for j in range(z.shape[1]):
            z[i, j] += b[j]
    return z


@njit(cache=True)
def affine_elu(a, w, b, alpha):
    z = np.dot(a, w.T)
    h = np.empty_like(z)
    d = np.empty_like(z)
    for i in range(z.shape[0]):
        for j in range(z.shape[1]):
            v = z[i, j] + b[j]
            z[i, j] = v
            if v >= 0.0:
                h[i, j] = v
                d[i, j] = 1.0
            else:
                e = alpha * np.exp(v)
                h[i, j] = e - alpha
                d[i, j] = e
    return z, h, d


@njit(cache=True)
def gate(u, d):
    out = np.empty_like(u)
    for i in range(u.shape[0]):
        for j in range(u.shape[1]):
            out[i, j] = u[i, j] * d[i, j]
    return out


@njit(cache=True)
def gate2(rbar, s, z, d):
    sbar = np.empty_like(rbar)
    zbar = np.empty_like(rbar)
    for i in range(rbar.shape[0]):
        for j in range(rbar.shape[1]):
            sb = rbar[i, j] * d[i, j]
            sbar[i, j] = sb
            zbar[i, j] = sb * s[i, j] if z[i, j] < 0.0 else 0.0
    return sbar, zbar


@njit(cache=True)
def grad_w(dz, a):
    return np.dot(dz.T, a)


@njit(cache=True)
def mat_right(v, w):
    return np.dot(v, w)


@njit(cache=True)
def mat_t(v, w):
    return np.dot(v, w.T)


@njit(cache=True)
def sum0(v):
    out = np.zeros(v.shape[1])
    for i in range(v.shape[0]):
        for j in range(v.shape[1]):
            out[j] += v[i, j]
    return out


@njit(cache=True)
def sigmoid(z):
    out = np.empty_like(z)
    for i in range(z.shape[0]):
        for j in range(z.shape[1]):
            v = z[i, j]
            if v >= 0.0:
                out[i, j] = 1.0 / (1.0 + np.exp(-v))
            else:
                e = np.exp(v)
                out[i, j] = e / (1.0 + e)
    return out


@njit(cache=True)
def penalty_seed(g, mask, scale):
    nrow, ncol = g.shape
    ghat = np.zeros_like(g)
    value = 0.0
    for i in range(nrow):
        sq = 0.0
        for j in range(ncol):
            gm = g[i, j] * mask[j]
            sq += gm * gm
        norm = np.sqrt(sq)
        dev = norm - 1.0
        value += dev * dev
        if norm > 0.0:
            coef = scale * dev / norm
            for j in range(ncol):
                ghat[i, j] = g[i, j] * mask[j] * coef
    return ghat, value / nrow


@njit(cache=True)
def adam_step(p, g, m, v, t, lr, beta1, beta2, eps):
    m2 = np.empty_like(m)
    v2 = np.empty_like(v)
    p2 = np.empty_like(p)
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    flat_p = p.ravel()
    flat_g = g.ravel()
    flat_m = m.ravel()
    flat_v = v.ravel()
    out_p = p2.ravel()
    out_m = m2.ravel()
    out_v = v2.ravel()
    for k in range(flat_p.size):
        gm = beta1 * flat_m[k] + (1.0 - beta1) * flat_g[k]
        gv = beta2 * flat_v[k] + (1.0 - beta2) * flat_g[k] * flat_g[k]
        out_m[k] = gm
        out_v[k] = gv
        out_p[k] = flat_p[k] - lr * (gm / c1) / (np.sqrt(gv / c2) + eps)
    return p2, m2, v2
