"""Alternating adversarial training of the conditional generator.

Each cycle runs several critic ascent steps — on the mean critic gap
between generated and observed triples minus the gradient-norm penalty
at the observed points — followed by one generator descent step on the
mean critic score of its own output. Minibatches are drawn without
replacement per epoch from a single seeded stream, fresh noise is drawn
per batch, and the whole run is reproducible from (dataset, config):
identical seeds give bit-identical parameters.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field, asdict

import numpy as np
from threadpoolctl import threadpool_limits

from .kernel import (
    GradBundle,
    OptimizerState,
    adam_update,
    backward_params,
    grad_penalty_param_gradient,
    init_optimizer,
    mlp_forward,
    penalty_from_tape,
)
from .kernel.mlp import slice_tape
from .kernel.mlp import MLPParams
from .networks import (
    PRESETS,
    Discriminator,
    GeneratorPair,
    build_from_preset,
    generator_backward,
    generator_forward_batch,
    sample_noise,
)
from .pipeline_io import Dataset


class NumericalError(RuntimeError):
    """Training produced a non-finite objective."""

    def __init__(self, message: str, step: int, report: "TrainReport | None" = None):
        super().__init__(message)
        self.step = step
        self.report = report


@dataclass
class TrainConfig:
    preset: str = "M1-independent"
    lambda_gp: float = 10.0
    critic_steps: int = 5
    batch_size: int = 256
    total_generator_steps: int = 20_000
    lr_generator: float = 1e-4
    lr_discriminator: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    adam_eps: float = 1e-8
    seed: int = 0
    clamp_output: bool = False
    # Penalty placement. The defaults follow the standard gradient-penalty
    # recipe: norm of the full input gradient, evaluated at uniform
    # real/generated mixtures. Setting both flags False penalizes only the
    # (covariates, time) part of the gradient at the observed points; that
    # variant leaves the critic a cost-free direction separating hard 0/1
    # indicators from interior generator scores, and its slope there grows
    # without bound, so it exists for comparison rather than use.
    interpolate_penalty: bool = True
    penalty_indicator_coord: bool = True

    def __post_init__(self):
        if self.lambda_gp < 0:
            raise ValueError("lambda_gp must be nonnegative")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.critic_steps < 1:
            raise ValueError("critic_steps must be at least 1")
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")


@dataclass
class TrainReport:
    critic_values: list[float] = field(default_factory=list)
    penalty_values: list[float] = field(default_factory=list)
    generator_values: list[float] = field(default_factory=list)
    wall_seconds: float = 0.0
    steps_completed: int = 0
    checksum: str = ""


def params_checksum(gen: GeneratorPair, disc: Discriminator) -> str:
    """sha256 over both parameter sets, shape-prefixed."""
    h = hashlib.sha256()
    for net in (gen.net, disc.net):
        for arr in (*net.weights, *net.biases):
            h.update(str(arr.shape).encode())
            h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def _descent_bundle(gap: GradBundle, penalty: GradBundle, lam: float) -> GradBundle:
    """Negated ascent direction: -(gap - lam * penalty), per parameter."""
    wg = tuple(
        lam * c - a for a, c in zip(gap.weight_grads, penalty.weight_grads)
    )
    bg = tuple(lam * c - a for a, c in zip(gap.bias_grads, penalty.bias_grads))
    return GradBundle(wg, bg, gap.input_grad, 0.0)


def _zero_bundle(net: MLPParams) -> GradBundle:
    return GradBundle(
        tuple(np.zeros_like(w) for w in net.weights),
        tuple(np.zeros_like(b) for b in net.biases),
        np.zeros(net.in_dim),
        0.0,
    )


def critic_step(
    disc: Discriminator,
    disc_opt: OptimizerState,
    gen: GeneratorPair,
    xb: np.ndarray,
    yb: np.ndarray,
    db: np.ndarray,
    eta: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator | None = None,
) -> tuple[Discriminator, OptimizerState, float, float]:
    """One ascent step on the penalized critic objective.

    Returns (new critic, new optimizer state, objective value, penalty
    value). Real samples enter with their hard 0/1 indicator, generated
    ones with the raw sigmoid score. The penalty sits at the observed
    points; with ``interpolate_penalty`` it moves to uniform mixtures of
    observed and generated rows (``rng`` required then).
    """
    nb = xb.shape[0]
    if not (yb.shape[0] == db.shape[0] == eta.shape[0] == nb):
        raise ValueError("batch and noise lengths differ")
    g1, g2, _, _ = generator_forward_batch(gen, eta, xb)
    fake_in = np.column_stack([xb, g1, g2])
    real_in = np.column_stack([xb, yb, db.astype(np.float64)])

    # one stacked pass: upstream +1/n on generated rows, -1/n on observed
    # rows makes the backward pass yield the critic-gap gradient directly
    stacked = np.ascontiguousarray(np.vstack([fake_in, real_in]))
    _, tape = mlp_forward(disc.net, stacked)
    upstream = np.empty((2 * nb, 1))
    upstream[:nb] = 1.0 / nb
    upstream[nb:] = -1.0 / nb
    gap = backward_params(disc.net, tape, upstream)

    if cfg.lambda_gp > 0.0:
        mask = np.ones(disc.covariate_dim + 2)
        if not cfg.penalty_indicator_coord:
            mask[-1] = 0.0  # censoring coordinate out of the norm
        if cfg.interpolate_penalty:
            if rng is None:
                raise ValueError("interpolate_penalty needs an rng")
            mix = rng.random((nb, 1))
            pen_points = mix * real_in + (1.0 - mix) * fake_in
            pen = grad_penalty_param_gradient(disc.net, pen_points, mask)
        else:
            pen = penalty_from_tape(disc.net, slice_tape(tape, nb, 2 * nb), mask)
    else:
        pen = _zero_bundle(disc.net)

    objective = gap.value - cfg.lambda_gp * pen.value
    if not math.isfinite(objective):
        raise NumericalError("critic objective is not finite", step=disc_opt.step)
    descent = _descent_bundle(gap, pen, cfg.lambda_gp)
    disc_opt, net = adam_update(disc_opt, disc.net, descent)
    return Discriminator(net, disc.covariate_dim), disc_opt, objective, pen.value


def generator_step(
    disc: Discriminator,
    gen: GeneratorPair,
    gen_opt: OptimizerState,
    xb: np.ndarray,
    eta: np.ndarray,
    cfg: TrainConfig,
) -> tuple[GeneratorPair, OptimizerState, float]:
    """One descent step on the mean critic score of generated triples.

    Gradients flow through both heads; the censoring head contributes
    through its continuous sigmoid score, never the thresholded value.
    """
    nb = xb.shape[0]
    if eta.shape[0] != nb:
        raise ValueError("batch and noise lengths differ")
    g1, g2, tape_g, gate = generator_forward_batch(gen, eta, xb)
    din = np.column_stack([xb, g1, g2])
    _, tape_d = mlp_forward(disc.net, din)
    gb_d = backward_params(disc.net, tape_d, 1.0 / nb)
    objective = gb_d.value
    if not math.isfinite(objective):
        raise NumericalError("generator objective is not finite", step=gen_opt.step)
    d = gen.covariate_dim
    cot = gb_d.input_grad
    gb_g = generator_backward(gen, tape_g, cot[:, d], cot[:, d + 1], gate)
    gen_opt, net = adam_update(gen_opt, gen.net, gb_g)
    return GeneratorPair(net, gen.noise_dim, gen.covariate_dim, gen.clamp), gen_opt, objective


@dataclass
class TrainState:
    """Everything needed to continue a run mid-stream."""

    gen: GeneratorPair
    disc: Discriminator
    gen_opt: OptimizerState
    disc_opt: OptimizerState
    rng: np.random.Generator
    perm: np.ndarray
    cursor: int
    gen_step: int


class _Batcher:
    """Without-replacement minibatches, reshuffled each epoch.

    A trailing remainder smaller than the batch size is dropped so every
    batch has full size.
    """

    def __init__(self, n: int, batch_size: int, perm: np.ndarray, cursor: int):
        self.n = n
        self.batch = min(batch_size, n)
        self.perm = perm
        self.cursor = cursor

    def next(self, rng: np.random.Generator) -> np.ndarray:
        if self.cursor + self.batch > self.n:
            self.perm = rng.permutation(self.n)
            self.cursor = 0
        idx = self.perm[self.cursor : self.cursor + self.batch]
        self.cursor += self.batch
        return idx


def _fresh_state(dataset: Dataset, cfg: TrainConfig) -> TrainState:
    rng = np.random.default_rng(cfg.seed)
    clamp = 1.0 + math.log(dataset.n) if cfg.clamp_output else None
    gen, disc = build_from_preset(cfg.preset, rng, covariate_dim=dataset.d, clamp=clamp)
    gen_opt = init_optimizer(gen.net, cfg.lr_generator, cfg.beta1, cfg.beta2, cfg.adam_eps)
    disc_opt = init_optimizer(disc.net, cfg.lr_discriminator, cfg.beta1, cfg.beta2, cfg.adam_eps)
    perm = rng.permutation(dataset.n)
    return TrainState(gen, disc, gen_opt, disc_opt, rng, perm, 0, 0)


def train(
    dataset: Dataset,
    cfg: TrainConfig,
    state: TrainState | None = None,
) -> tuple[GeneratorPair, Discriminator, TrainReport, TrainState]:
    """Run the alternating schedule to cfg.total_generator_steps.

    Pass a loaded ``state`` to continue an interrupted run; the result is
    then identical to the uninterrupted one. The input dataset is never
    mutated. Raises NumericalError (with the partial report attached)
    when an objective goes non-finite.
    """
    if dataset.n < 1:
        raise ValueError("dataset is empty")
    if dataset.time_scale != "log":
        raise ValueError("trainer expects log-scale times")
    if state is None:
        state = _fresh_state(dataset, cfg)
    report = TrainReport()
    batcher = _Batcher(dataset.n, cfg.batch_size, state.perm, state.cursor)
    rng = state.rng
    gen, disc = state.gen, state.disc
    gen_opt, disc_opt = state.gen_opt, state.disc_opt
    started = time.perf_counter()
    step = state.gen_step
    try:
        # single-threaded BLAS: the matrices are too small to gain from
        # threads, and a fixed reduction order keeps runs reproducible
        with threadpool_limits(limits=1, user_api="blas"):
            while step < cfg.total_generator_steps:
                for _ in range(cfg.critic_steps):
                    idx = batcher.next(rng)
                    eta = sample_noise(rng, idx.size, gen.noise_dim)
                    disc, disc_opt, cval, pval = critic_step(
                        disc, disc_opt, gen, dataset.x[idx], dataset.y[idx],
                        dataset.delta[idx], eta, cfg, rng,
                    )
                    report.critic_values.append(cval)
                    report.penalty_values.append(pval)
                idx = batcher.next(rng)
                eta = sample_noise(rng, idx.size, gen.noise_dim)
                gen, gen_opt, gval = generator_step(disc, gen, gen_opt, dataset.x[idx], eta, cfg)
                report.generator_values.append(gval)
                step += 1
    except NumericalError as exc:
        report.wall_seconds = time.perf_counter() - started
        report.steps_completed = step
        raise NumericalError(str(exc), step=step, report=report) from None
    report.wall_seconds = time.perf_counter() - started
    report.steps_completed = step
    report.checksum = params_checksum(gen, disc)
    final_state = TrainState(
        gen, disc, gen_opt, disc_opt, rng, batcher.perm, batcher.cursor, step
    )
    return gen, disc, report, final_state


def sample_conditional(
    gen: GeneratorPair, x, m: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """m seeded conditional draws at covariate x.

    Returns (log-scale times, thresholded 0/1 indicators). The noise
    stream is row-major, so a shorter run is a prefix of a longer one
    under the same seed.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    rng = np.random.default_rng(seed)
    eta = sample_noise(rng, m, gen.noise_dim)
    xmat = np.tile(np.asarray(x, dtype=np.float64)[None, :], (m, 1))
    g1, g2, _, _ = generator_forward_batch(gen, eta, xmat)
    return g1, (g2 >= 0.5).astype(np.int8)


def make_sampler(gen: GeneratorPair):
    """Adapt a trained generator to the (x, m, seed) sampler interface."""

    def sample(x, m: int, seed: int):
        return sample_conditional(gen, x, m, seed)

    return sample


# ---------------------------------------------------------------------------
# resumable state serialization


def _encode_array(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape), "data": [float(v).hex() for v in arr.ravel()]}


def _decode_array(obj: dict) -> np.ndarray:
    arr = np.array([float.fromhex(v) for v in obj["data"]])
    return arr.reshape(obj["shape"])


def _encode_opt(opt: OptimizerState) -> dict:
    return {
        "m_w": [_encode_array(a) for a in opt.m_w],
        "m_b": [_encode_array(a) for a in opt.m_b],
        "v_w": [_encode_array(a) for a in opt.v_w],
        "v_b": [_encode_array(a) for a in opt.v_b],
        "step": opt.step,
        "learning_rate": opt.learning_rate,
        "beta1": opt.beta1,
        "beta2": opt.beta2,
        "eps": opt.eps,
    }


def _decode_opt(obj: dict) -> OptimizerState:
    return OptimizerState(
        m_w=tuple(_decode_array(a) for a in obj["m_w"]),
        m_b=tuple(_decode_array(a) for a in obj["m_b"]),
        v_w=tuple(_decode_array(a) for a in obj["v_w"]),
        v_b=tuple(_decode_array(a) for a in obj["v_b"]),
        step=obj["step"],
        learning_rate=obj["learning_rate"],
        beta1=obj["beta1"],
        beta2=obj["beta2"],
        eps=obj["eps"],
    )


def save_train_state(path: str, state: TrainState, cfg: TrainConfig) -> None:
    """Atomic JSON dump of optimizer moments, RNG state, and batch cursor.

    Network parameters live in the companion checkpoint file; this file
    carries the rest of what resumption needs.
    """
    payload = {
        "format": "gcse-train-state v1",
        "config": asdict(cfg),
        "gen_opt": _encode_opt(state.gen_opt),
        "disc_opt": _encode_opt(state.disc_opt),
        "rng_state": state.rng.bit_generator.state,
        "perm": state.perm.tolist(),
        "cursor": state.cursor,
        "gen_step": state.gen_step,
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    os.replace(tmp, path)


def load_train_state(
    path: str, gen: GeneratorPair, disc: Discriminator
) -> tuple[TrainState, TrainConfig]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "gcse-train-state v1":
        raise ValueError(f"{path}: not a training-state file")
    cfg = TrainConfig(**payload["config"])
    rng = np.random.default_rng()
    rng.bit_generator.state = payload["rng_state"]
    state = TrainState(
        gen=gen,
        disc=disc,
        gen_opt=_decode_opt(payload["gen_opt"]),
        disc_opt=_decode_opt(payload["disc_opt"]),
        rng=rng,
        perm=np.asarray(payload["perm"], dtype=np.int64),
        cursor=payload["cursor"],
        gen_step=payload["gen_step"],
    )
    return state, cfg
