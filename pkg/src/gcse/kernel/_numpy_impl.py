"""Pure-numpy implementations of the array kernels.

Every function here has an identically-named twin in ``_numba_impl``;
the two must agree to floating-point roundoff (not bitwise, since BLAS
and fused loops sum in different orders). All arrays are float64.

The exponential is evaluated once per hidden layer, in ``affine_elu``;
the returned derivative plane feeds every later backward or second-order
sweep as a plain multiply.
"""

from __future__ import annotations

import numpy as np


def affine(a: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a (B,i) through weight w (o,i) and bias b (o,): returns a @ w.T + b."""
    return a @ w.T + b


def affine_elu(a: np.ndarray, w: np.ndarray, b: np.ndarray, alpha: float):
    """Affine layer plus Elu; returns (z, h, d) with d = elu'(z)."""
    z = a @ w.T + b
    e = alpha * np.exp(np.minimum(z, 0.0))
    pos = z >= 0.0
    h = np.where(pos, z, e - alpha)
    d = np.where(pos, 1.0, e)
    return z, h, d


def gate(u: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Backward pass through a hidden activation: u * elu'(z)."""
    return u * d


def gate2(rbar: np.ndarray, s: np.ndarray, z: np.ndarray, d: np.ndarray):
    """Second-order gate for the penalty sweep.

    Returns (sbar, zbar) with sbar = elu'(z) * rbar and
    zbar = elu''(z) * s * rbar, using elu'' = elu' below zero and 0 at
    and above it (right limit at the kink).
    """
    sbar = rbar * d
    zbar = np.where(z < 0.0, sbar * s, 0.0)
    return sbar, zbar


def grad_w(dz: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Weight gradient dz (B,o) x a (B,i) -> (o,i), summed over the batch."""
    return dz.T @ a


def mat_right(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    return v @ w


def mat_t(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    return v @ w.T


def sum0(v: np.ndarray) -> np.ndarray:
    return v.sum(axis=0)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def penalty_seed(g: np.ndarray, mask: np.ndarray, scale: float):
    """Cotangent of mean((||mask*g||_2 - 1)^2) with respect to g.

    g is (B,p) of per-row input gradients. Returns (ghat, value). Rows with
    exactly zero masked norm get a zero cotangent (subgradient choice).
    """
    gm = g * mask
    norm = np.sqrt(np.sum(gm * gm, axis=1))
    dev = norm - 1.0
    value = float(np.mean(dev * dev))
    nz = norm > 0.0
    coef = np.zeros_like(norm)
    coef[nz] = scale * dev[nz] / norm[nz]
    return gm * coef[:, None], value


def adam_step(
    p: np.ndarray,
    g: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    t: int,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
):
    """One bias-corrected adaptive-moment update; returns (p2, m2, v2)."""
    m2 = beta1 * m + (1.0 - beta1) * g
    v2 = beta2 * v + (1.0 - beta2) * (g * g)
    mhat = m2 / (1.0 - beta1**t)
    vhat = v2 / (1.0 - beta2**t)
    p2 = p - lr * mhat / (np.sqrt(vhat) + eps)
    return p2, m2, v2
