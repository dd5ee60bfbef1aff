"""Conditional generator pair and critic definitions.

The generator maps (noise, covariates) to a two-head output: head 1 is a
linear time output (log scale), head 2 a sigmoid censoring score in
(0, 1). Both heads share every hidden layer and differ only in the
output row. The critic maps (covariates, time, censoring coordinate) to
an unconstrained scalar. Hidden activations are Elu for both networks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import MLPParams, ShapeError, backward_params, init_mlp, mlp_forward
from .kernel.mlp import GradBundle, ForwardTape

DEFAULT_ALPHA = 0.3


@dataclass(frozen=True)
class GeneratorPair:
    """Shared-trunk two-head conditional generator."""

    net: MLPParams
    noise_dim: int
    covariate_dim: int
    clamp: float | None = None

    def __post_init__(self):
        if self.net.output != "heads":
            raise ValueError("generator network must use the two-head output")
        if self.net.in_dim != self.noise_dim + self.covariate_dim:
            raise ShapeError(
                f"generator input width {self.net.in_dim} != "
                f"noise_dim + covariate_dim = {self.noise_dim + self.covariate_dim}"
            )
        if self.clamp is not None and not self.clamp > 0.0:
            raise ValueError("clamp bound must be positive")


@dataclass(frozen=True)
class Discriminator:
    """Scalar critic over (covariates, time, censoring coordinate)."""

    net: MLPParams
    covariate_dim: int

    def __post_init__(self):
        if self.net.output != "linear" or self.net.out_dim != 1:
            raise ValueError("critic must have a scalar linear output")
        if self.net.in_dim != self.covariate_dim + 2:
            raise ShapeError(
                f"critic input width {self.net.in_dim} != covariate_dim + 2"
            )


@dataclass(frozen=True)
class Preset:
    """Architecture preset: hidden widths for both nets plus noise dim."""

    gen_hidden: tuple[int, ...]
    disc_hidden: tuple[int, ...]
    noise_dim: int
    covariate_dim: int | None = None  # None: taken from the data


PRESETS: dict[str, Preset] = {
    "M1-independent": Preset((60, 30), (60, 30), 3, 5),
    "M2-independent": Preset((60, 30), (60, 30), 7, 5),
    "M3-independent": Preset((40, 20), (50, 25), 5, 5),
    "M4-independent": Preset((40, 20), (50, 25), 7, 5),
    "M1-dependent": Preset((50, 25), (50, 25), 3, 5),
    "M2-dependent": Preset((60, 30), (60, 30), 7, 5),
    "M3-dependent": Preset((40, 20), (50, 25), 5, 5),
    "M4-dependent": Preset((40, 20), (50, 25), 7, 5),
    "pbc": Preset((30, 15), (30, 15), 10),
    "support": Preset((60, 30), (60, 30), 20),
}


def build_generator(
    covariate_dim: int,
    noise_dim: int,
    hidden: tuple[int, ...],
    rng: np.random.Generator,
    alpha: float = DEFAULT_ALPHA,
    clamp: float | None = None,
) -> GeneratorPair:
    sizes = [noise_dim + covariate_dim, *hidden, 2]
    net = init_mlp(sizes, rng, alpha=alpha, output="heads")
    return GeneratorPair(net, noise_dim, covariate_dim, clamp)


def build_discriminator(
    covariate_dim: int,
    hidden: tuple[int, ...],
    rng: np.random.Generator,
    alpha: float = DEFAULT_ALPHA,
) -> Discriminator:
    sizes = [covariate_dim + 2, *hidden, 1]
    net = init_mlp(sizes, rng, alpha=alpha, output="linear")
    return Discriminator(net, covariate_dim)


def build_from_preset(
    preset: str,
    rng: np.random.Generator,
    covariate_dim: int | None = None,
    alpha: float = DEFAULT_ALPHA,
    clamp: float | None = None,
) -> tuple[GeneratorPair, Discriminator]:
    """Instantiate generator and critic for a named preset.

    ``covariate_dim`` must be given for presets that leave it open and
    must agree with the preset when it fixes one.
    """
    spec = PRESETS[preset]
    d = spec.covariate_dim
    if d is None:
        d = covariate_dim
        if d is None:
            raise ValueError(f"preset {preset!r} needs an explicit covariate_dim")
    elif covariate_dim is not None and covariate_dim != d:
        raise ShapeError(
            f"preset {preset!r} is defined for {d} covariates, got {covariate_dim}"
        )
    gen = build_generator(d, spec.noise_dim, spec.gen_hidden, rng, alpha, clamp)
    disc = build_discriminator(d, spec.disc_hidden, rng, alpha)
    return gen, disc


def sample_noise(rng: np.random.Generator, m: int, noise_dim: int) -> np.ndarray:
    """Reference-distribution draws: m standard-normal vectors."""
    return rng.standard_normal((m, noise_dim))


def generator_forward(gen: GeneratorPair, eta: np.ndarray, x: np.ndarray) -> tuple[float, float]:
    """Single evaluation: returns (time output, censoring score)."""
    g1, g2, _, _ = generator_forward_batch(
        gen, np.asarray(eta, float)[None, :], np.asarray(x, float)[None, :]
    )
    return float(g1[0]), float(g2[0])


def generator_forward_batch(
    gen: GeneratorPair, eta: np.ndarray, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray, ForwardTape, np.ndarray | None]:
    """Batched generator pass; also returns the tape and the clamp gate.

    The gate is None when no output clamp is configured, otherwise a 0/1
    vector marking rows whose head-1 output fell strictly inside the
    clamp interval (those keep their gradient).
    """
    if eta.ndim != 2 or x.ndim != 2 or eta.shape[0] != x.shape[0]:
        raise ShapeError("eta and x must be matching-length batches")
    gin = np.concatenate([eta, x], axis=1)
    out, tape = mlp_forward(gen.net, gin)
    g1 = out[:, 0].copy()
    g2 = out[:, 1].copy()
    gate = None
    if gen.clamp is not None:
        gate = (np.abs(g1) < gen.clamp).astype(np.float64)
        g1 = np.clip(g1, -gen.clamp, gen.clamp)
    return g1, g2, tape, gate


def generator_backward(
    gen: GeneratorPair,
    tape: ForwardTape,
    cot_time: np.ndarray,
    cot_score: np.ndarray,
    clamp_gate: np.ndarray | None = None,
) -> GradBundle:
    """Backprop per-head cotangents into generator parameter gradients."""
    if clamp_gate is not None:
        cot_time = cot_time * clamp_gate
    upstream = np.stack([cot_time, cot_score], axis=1)
    return backward_params(gen.net, tape, upstream)


def threshold_indicator(g2: float) -> int:
    """Censoring indicator from a sigmoid score: 1 iff g2 >= 0.5."""
    return 1 if g2 >= 0.5 else 0


def discriminator_forward(
    disc: Discriminator, x: np.ndarray, y: float, dtilde: float
) -> float:
    """Critic score for one (covariates, time, censoring coordinate) triple.

    ``dtilde`` may be a hard 0/1 indicator (real samples) or a continuous
    score in [0, 1] (generated samples before thresholding).
    """
    row = np.concatenate([np.asarray(x, float).ravel(), [float(y)], [float(dtilde)]])
    out, _ = mlp_forward(disc.net, row)
    return float(out[0])
