"""Independent reference implementations used as test oracles.

These deliberately avoid the library's code paths: rational arithmetic
for the ordered-sample survival formulas, central finite differences for
gradients, and closed-form recursions for the optimizer.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from gcse.kernel import MLPParams


def ordered_km_na_rational(pairs):
    """Exact Kaplan-Meier / Nelson-Aalen over an ordered sample.

    ``pairs`` is a list of (time, delta). Sorts ascending with events
    before censorings at ties, applies the ordered-sample formulas in
    exact rational arithmetic, and returns (times, na_values, km_values)
    compressed to one entry per distinct time.
    """
    s = sorted(pairs, key=lambda p: (p[0], -p[1]))
    m = len(s)
    cum = Fraction(0)
    prod = Fraction(1)
    rows = []
    for j, (t, d) in enumerate(s, start=1):
        term = Fraction(int(d), m - j + 1)
        cum += term
        prod *= 1 - term
        rows.append((t, cum, prod))
    times, na_vals, km_vals = [], [], []
    for i, (t, cum, prod) in enumerate(rows):
        if i + 1 < len(rows) and rows[i + 1][0] == t:
            continue
        times.append(t)
        na_vals.append(cum)
        km_vals.append(prod)
    return times, na_vals, km_vals


def perturbed(net: MLPParams, layer: int, which: str, idx, h: float) -> MLPParams:
    """Copy of a network with one parameter entry shifted by h."""
    ws = [w.copy() for w in net.weights]
    bs = [b.copy() for b in net.biases]
    if which == "w":
        ws[layer][idx] += h
    else:
        bs[layer][idx] += h
    return MLPParams(tuple(ws), tuple(bs), alpha=net.alpha, output=net.output)


def fd_param_check(net: MLPParams, scalar_fn, grads_w, grads_b, h: float = 1e-6) -> float:
    """Worst relative error of analytic parameter gradients vs central
    finite differences of ``scalar_fn`` (relative to max(1, |grad|))."""
    worst = 0.0
    for layer in range(net.n_layers):
        for which, grads in (("w", grads_w), ("b", grads_b)):
            arr = (net.weights if which == "w" else net.biases)[layer]
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                up = scalar_fn(perturbed(net, layer, which, idx, +h))
                dn = scalar_fn(perturbed(net, layer, which, idx, -h))
                fd = (up - dn) / (2.0 * h)
                g = grads[layer][idx]
                rel = abs(fd - g) / max(1.0, abs(g), abs(fd))
                worst = max(worst, rel)
    return worst


def random_net(rng: np.random.Generator, output: str = "linear", max_width: int = 16) -> MLPParams:
    """A random small network: 1-3 affine layers, widths <= max_width."""
    from gcse.kernel import init_mlp

    depth = int(rng.integers(1, 4))
    in_dim = int(rng.integers(2, 7))
    sizes = [in_dim] + [int(rng.integers(2, max_width + 1)) for _ in range(depth - 1)]
    sizes.append(2 if output == "heads" else 1)
    net = init_mlp(sizes, rng, alpha=0.3, output=output)
    # nonzero biases so finite differences see every parameter
    bs = tuple(rng.normal(0.0, 0.3, size=b.shape) for b in net.biases)
    return MLPParams(net.weights, bs, alpha=net.alpha, output=output)


def adam_closed_form(g_sequence, lr, beta1, beta2, eps, p0=0.0):
    """Reference recursion for the bias-corrected moment update."""
    m = 0.0
    v = 0.0
    p = p0
    for t, g in enumerate(g_sequence, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        p = p - lr * mhat / (vhat**0.5 + eps)
    return p
