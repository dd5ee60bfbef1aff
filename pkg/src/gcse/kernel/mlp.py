"""Dense feedforward kernels.

Forward evaluation with a replayable tape, reverse-mode parameter and
input gradients, and the second-order sweep that differentiates the
input-gradient-norm penalty with respect to the parameters. Networks are
plain affine stacks with Elu hidden activations; the output layer is
linear, sigmoid, or a two-column [linear, sigmoid] head pair.

Everything is float64 and purely functional: no call mutates its inputs,
so values can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend

OUTPUT_KINDS = ("linear", "sigmoid", "heads")


class ShapeError(ValueError):
    """Input or tape dimensions do not match the network."""


@dataclass(frozen=True)
class MLPParams:
    """Weights/biases of one network. weights[l] is (fan_out, fan_in)."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    alpha: float = 0.3
    output: str = "linear"

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("need one bias vector per weight matrix")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ShapeError(f"layer {l}: weight {w.shape} / bias {b.shape}")
            if l > 0 and w.shape[1] != self.weights[l - 1].shape[0]:
                raise ShapeError(
                    f"layer {l} input width {w.shape[1]} != layer {l - 1} "
                    f"output width {self.weights[l - 1].shape[0]}"
                )
        if not self.alpha > 0.0:
            raise ValueError("elu alpha must be positive")
        if self.output not in OUTPUT_KINDS:
            raise ValueError(f"output must be one of {OUTPUT_KINDS}")
        if self.output == "heads" and self.out_dim != 2:
            raise ShapeError("'heads' output requires exactly 2 output units")

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def validate_finite(self) -> None:
        for arr in (*self.weights, *self.biases):
            if not np.isfinite(arr).all():
                raise FloatingPointError("non-finite network parameter")


@dataclass
class ForwardTape:
    """Cached state from one mlp_forward call.

    ``pre`` holds the affine pre-activations, ``act`` the hidden-layer
    outputs, ``dgrad`` the Elu derivative at each hidden pre-activation
    (so no backward pass ever re-evaluates an exponential).
    """

    x2d: np.ndarray
    pre: list[np.ndarray]
    act: list[np.ndarray]
    dgrad: list[np.ndarray]
    out: np.ndarray
    squeeze: bool


@dataclass
class GradBundle:
    """Gradients of a scalar objective: per-parameter, per-input, value."""

    weight_grads: tuple[np.ndarray, ...]
    bias_grads: tuple[np.ndarray, ...]
    input_grad: np.ndarray
    value: float


def init_mlp(
    sizes: list[int],
    rng: np.random.Generator,
    alpha: float = 0.3,
    output: str = "linear",
) -> MLPParams:
    """Fan-scaled uniform weights on +-sqrt(6/(fan_in+fan_out)), zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MLPParams(tuple(weights), tuple(biases), alpha=alpha, output=output)


def _as_batch(x) -> tuple[np.ndarray, bool]:
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim == 2:
        return arr, False
    raise ShapeError(f"input must be a vector or a batch, got ndim={arr.ndim}")


def mlp_forward(params: MLPParams, x) -> tuple[np.ndarray, ForwardTape]:
    """Evaluate the network; returns (output, tape).

    Accepts a single input vector or a (batch, in) matrix; the output has
    the matching shape. Pure: identical inputs give bit-identical outputs.
    """
    ops = backend.ops
    x2d, squeeze = _as_batch(x)
    if x2d.shape[1] != params.in_dim:
        raise ShapeError(f"input width {x2d.shape[1]} != network width {params.in_dim}")
    pre, act, dgrad = [], [], []
    a = x2d
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        z, a, d = ops.affine_elu(a, w, b, params.alpha)
        pre.append(z)
        act.append(a)
        dgrad.append(d)
    z = ops.affine(a, params.weights[-1], params.biases[-1])
    pre.append(z)
    if params.output == "linear":
        out = z
    elif params.output == "sigmoid":
        out = ops.sigmoid(z)
    else:  # heads: column 0 linear, column 1 sigmoid
        out = z.copy()
        out[:, 1:2] = ops.sigmoid(np.ascontiguousarray(z[:, 1:2]))
    tape = ForwardTape(x2d, pre, act, dgrad, out, squeeze)
    return (out[0] if squeeze else out), tape


def _check_tape(params: MLPParams, tape: ForwardTape) -> None:
    if len(tape.pre) != params.n_layers or tape.x2d.shape[1] != params.in_dim:
        raise ShapeError("tape does not match network")
    for z, w in zip(tape.pre, params.weights):
        if z.shape[1] != w.shape[0]:
            raise ShapeError("tape does not match network (stale tape?)")


def _output_cotangent(params: MLPParams, tape: ForwardTape, upstream) -> np.ndarray:
    nb, out_dim = tape.out.shape
    u = np.asarray(upstream, dtype=np.float64)
    if u.ndim == 0:
        dout = np.full((nb, out_dim), float(u))
    elif u.shape == (nb,) and out_dim == 1:
        dout = u[:, None].copy()
    elif u.shape == (out_dim,):
        dout = np.tile(u, (nb, 1))
    elif u.shape == (nb, out_dim):
        dout = u.copy()
    else:
        raise ShapeError(f"upstream shape {u.shape} incompatible with output {tape.out.shape}")
    return np.ascontiguousarray(dout)


def backward_params(params: MLPParams, tape: ForwardTape, upstream) -> GradBundle:
    """Reverse pass: gradients of sum(upstream * output) over params and input.

    ``upstream`` is a scalar cotangent, a per-output vector, or a full
    (batch, out) array. Parameter gradients are summed over the batch;
    the input gradient stays per-row.
    """
    ops = backend.ops
    _check_tape(params, tape)
    dout = _output_cotangent(params, tape, upstream)
    value = float(np.sum(dout * tape.out))

    # chain through the output activation
    if params.output == "linear":
        dz = dout
    elif params.output == "sigmoid":
        s = tape.out
        dz = np.ascontiguousarray(dout * s * (1.0 - s))
    else:
        dz = dout.copy()
        s = tape.out[:, 1]
        dz[:, 1] = dout[:, 1] * s * (1.0 - s)
        dz = np.ascontiguousarray(dz)

    n_layers = params.n_layers
    wgrads: list[np.ndarray] = [None] * n_layers
    bgrads: list[np.ndarray] = [None] * n_layers
    for l in range(n_layers - 1, -1, -1):
        a_prev = tape.act[l - 1] if l > 0 else tape.x2d
        wgrads[l] = ops.grad_w(dz, a_prev)
        bgrads[l] = ops.sum0(dz)
        da = ops.mat_right(dz, params.weights[l])
        if l > 0:
            dz = ops.gate(da, tape.dgrad[l - 1])
    input_grad = da[0] if tape.squeeze else da
    return GradBundle(tuple(wgrads), tuple(bgrads), input_grad, value)


def slice_tape(tape: ForwardTape, start: int, stop: int) -> ForwardTape:
    """Row-range view of a batched tape (no copies)."""
    return ForwardTape(
        tape.x2d[start:stop],
        [z[start:stop] for z in tape.pre],
        [a[start:stop] for a in tape.act],
        [d[start:stop] for d in tape.dgrad],
        tape.out[start:stop],
        False,
    )


def input_gradient(params: MLPParams, tape: ForwardTape) -> np.ndarray:
    """Per-row gradient of a scalar-output network w.r.t. its input."""
    g, _, _ = _input_gradient_sweep(params, tape)
    return g[0] if tape.squeeze else g


def _input_gradient_sweep(params, tape):
    """Reverse pass for d(out)/d(input), keeping intermediates for reuse.

    Returns (g, r, s): g is the (batch, in) input gradient; r[l] and s[l]
    are the post-gate / pre-gate signals at hidden layer l needed by the
    penalty parameter sweep.
    """
    ops = backend.ops
    if params.output != "linear" or params.out_dim != 1:
        raise ShapeError("input-gradient sweep requires a scalar linear output")
    n_layers = params.n_layers
    nb = tape.x2d.shape[0]
    r: list[np.ndarray] = [None] * (n_layers + 1)
    s: list[np.ndarray] = [None] * n_layers
    r[n_layers] = np.ones((nb, 1))
    for l in range(n_layers, 1, -1):
        s[l - 1] = ops.mat_right(r[l], params.weights[l - 1])
        r[l - 1] = ops.gate(s[l - 1], tape.dgrad[l - 2])
    g = ops.mat_right(r[1], params.weights[0])
    return g, r, s


def grad_penalty_param_gradient(
    params: MLPParams, x, norm_mask: np.ndarray | None = None
) -> GradBundle:
    """Parameter gradient of P = mean_rows (||mask * d out/d input||_2 - 1)^2.

    ``norm_mask`` is a 0/1 vector selecting which input coordinates enter
    the norm (all of them when omitted). Differentiates through the
    input-gradient computation itself, using the right-limit convention
    elu''(0) = 0; rows whose masked gradient norm is exactly zero
    contribute the subgradient 0. ``value`` is P and ``input_grad`` is
    dP/d input per row.
    """
    _, tape = mlp_forward(params, x)
    return penalty_from_tape(params, tape, norm_mask)


def penalty_from_tape(
    params: MLPParams, tape: ForwardTape, norm_mask: np.ndarray | None = None
) -> GradBundle:
    """Same as grad_penalty_param_gradient but reusing an existing tape."""
    ops = backend.ops
    _check_tape(params, tape)
    g, r, s = _input_gradient_sweep(params, tape)
    nb = tape.x2d.shape[0]
    if norm_mask is None:
        mask = np.ones(params.in_dim)
    else:
        mask = np.ascontiguousarray(norm_mask, dtype=np.float64)
        if mask.shape != (params.in_dim,):
            raise ShapeError("norm_mask must match the input width")
    ghat, value = ops.penalty_seed(g, mask, 2.0 / nb)

    n_layers = params.n_layers
    wgrads = [np.zeros_like(w) for w in params.weights]
    bgrads = [np.zeros_like(b) for b in params.biases]

    # adjoints through the reverse (input-gradient) computation
    zbar_contrib: list[np.ndarray] = [None] * n_layers
    sbar = ghat
    for l in range(1, n_layers + 1):
        wgrads[l - 1] += ops.grad_w(r[l], sbar)
        if l == n_layers:
            break
        rbar = ops.mat_t(sbar, params.weights[l - 1])
        sbar, zbar_contrib[l - 1] = ops.gate2(rbar, s[l], tape.pre[l - 1], tape.dgrad[l - 1])

    # adjoints through the forward computation (z_l routes); the output
    # pre-activation carries no adjoint, so the top layer is skipped
    dz = None
    for l in range(n_layers - 1, 0, -1):
        if dz is None:
            dz = zbar_contrib[l - 1]
        else:
            da = ops.mat_right(dz, params.weights[l])
            dz = ops.gate(da, tape.dgrad[l - 1]) + zbar_contrib[l - 1]
        a_prev = tape.act[l - 2] if l > 1 else tape.x2d
        wgrads[l - 1] += ops.grad_w(dz, a_prev)
        bgrads[l - 1] += ops.sum0(dz)
    if dz is not None:
        input_grad = ops.mat_right(dz, params.weights[0])
    else:  # single-layer network: P depends on W only
        input_grad = np.zeros_like(tape.x2d)
    input_grad = input_grad[0] if tape.squeeze else input_grad
    return GradBundle(tuple(wgrads), tuple(bgrads), input_grad, value)
