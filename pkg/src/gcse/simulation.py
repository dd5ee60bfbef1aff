"""Benchmark data generators with closed-form truth.

Four conditional laws for the failure time given a standard-normal
5-vector of covariates, each with an independent (uniform) and a
covariate-dependent (truncated exponential) censoring mode:

  M1  exponential with log-rate x1 + 0.5 x2 + 1.5 x3 - 2 x4 - 0.3 x5
  M2  Weibull shape 2, log-scale x1^2 - 0.5 x2^2 + 1.5 x3 - 2 x4 - 0.3 x5
  M3  log-normal: log T = x1^2 + 0.5 x2 - 0.8 x3 + N(0,1)
  M4  log T = x1^2 + 0.5 x2 - 0.8 x3 + log Exp(1)

Every model exposes its exact conditional survival function and its
inverse, which is what the calibration metric scores estimators against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .estimators import CensoredSample, kaplan_meier, survival_at
from .pipeline_io import Dataset

COVARIATE_DIM = 5
TRUNCATION_POINT = 10.0
WEIBULL_SHAPE = 2.0  # M2; module-level so tests can exercise the shape-1
# reduction to the exponential law

_UNIFORM_MAX = {"M1": 2.0, "M2": 3.5, "M3": 6.0, "M4": 5.0}
_DEP_RATE_COEF = {"M1": 0.8, "M2": 0.4, "M3": 0.2, "M4": 0.3}

# conditional sampler signature shared by trained generators and oracles:
# (x, m, seed) -> (log-scale times, indicators)
ConditionalSampler = Callable[[np.ndarray, int, int], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class SimModelSpec:
    """One benchmark scenario: model M1-M4 plus censoring mode."""

    model: Literal["M1", "M2", "M3", "M4"]
    censoring: Literal["independent", "dependent"] = "independent"
    truncation: Literal["condition", "cap"] = "condition"

    def __post_init__(self):
        if self.model not in _UNIFORM_MAX:
            raise ValueError(f"unknown model {self.model!r}")
        if self.censoring not in ("independent", "dependent"):
            raise ValueError(f"unknown censoring mode {self.censoring!r}")
        if self.truncation not in ("condition", "cap"):
            raise ValueError(f"unknown truncation mode {self.truncation!r}")

    @property
    def preset_name(self) -> str:
        return f"{self.model}-{self.censoring}"


@dataclass(frozen=True)
class LabeledDataset:
    """Simulated dataset plus the latent times behind it."""

    data: Dataset
    true_time: np.ndarray
    censor_time: np.ndarray


def _as_matrix(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    arr2 = arr[None, :] if arr.ndim == 1 else arr
    if arr2.shape[1] != COVARIATE_DIM:
        raise ValueError(f"covariates must have {COVARIATE_DIM} components")
    return arr2


def log_rate(x) -> np.ndarray:
    """M1 log hazard rate."""
    x = _as_matrix(x)
    return x @ np.array([1.0, 0.5, 1.5, -2.0, -0.3])


def weibull_scale(x) -> np.ndarray:
    """M2 scale parameter."""
    x = _as_matrix(x)
    return np.exp(x[:, 0] ** 2 - 0.5 * x[:, 1] ** 2 + 1.5 * x[:, 2] - 2.0 * x[:, 3] - 0.3 * x[:, 4])


def location(x) -> np.ndarray:
    """M3/M4 log-time location."""
    x = _as_matrix(x)
    return x[:, 0] ** 2 + 0.5 * x[:, 1] - 0.8 * x[:, 2]


def censor_shift(x) -> np.ndarray:
    """Log-rate shift of the covariate-dependent censoring time."""
    x = _as_matrix(x)
    return x[:, 0] + x[:, 1] - x[:, 2]


def derive_seed(seed: int, index: int) -> int:
    """Child seed for replicate ``index``; independent replicates can run
    in parallel on these without sharing a stream."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def norm_cdf(z: float) -> float:
    """Standard normal CDF via erf (well below 1e-12 error)."""
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def norm_quantile(p: float) -> float:
    """Inverse standard normal CDF by symmetric bisection to 1e-12."""
    if not 0.0 < p < 1.0:
        raise ValueError("quantile level must be in (0, 1)")
    lo, hi = -1.0, 1.0
    while norm_cdf(lo) > p:
        lo *= 2.0
    while norm_cdf(hi) < p:
        hi *= 2.0
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if norm_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _draw_event_times(spec: SimModelSpec, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    if spec.model == "M1":
        return -np.log(rng.random(n)) / np.exp(log_rate(x))
    if spec.model == "M2":
        return weibull_scale(x) * (-np.log(rng.random(n))) ** (1.0 / WEIBULL_SHAPE)
    if spec.model == "M3":
        return np.exp(location(x) + rng.standard_normal(n))
    return np.exp(location(x)) * (-np.log(rng.random(n)))


def _draw_censor_times(spec: SimModelSpec, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    if spec.censoring == "independent":
        return _UNIFORM_MAX[spec.model] * rng.random(n)
    rate = _DEP_RATE_COEF[spec.model] * np.exp(censor_shift(x))
    u = rng.random(n)
    if spec.truncation == "cap":
        return np.minimum(-np.log(u) / rate, TRUNCATION_POINT)
    # exact draw from Exp(rate) conditioned on C <= truncation point
    # (inverse CDF of the conditional law; same law as resampling)
    return -np.log1p(-u * -np.expm1(-TRUNCATION_POINT * rate)) / rate


def simulate(spec: SimModelSpec, n: int, seed: int) -> LabeledDataset:
    """Draw n observations; the returned dataset carries log-scale times."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, COVARIATE_DIM))
    t = _draw_event_times(spec, x, rng)
    c = _draw_censor_times(spec, x, rng)
    y = np.log(np.minimum(t, c))
    delta = (t <= c).astype(np.int8)
    columns = tuple(f"x{i + 1}" for i in range(COVARIATE_DIM))
    data = Dataset(x, y, delta, columns, time_scale="log")
    return LabeledDataset(data, t, c)


def true_survival(spec: SimModelSpec, x, t: float) -> float:
    """Exact conditional survival probability of the failure time at t."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        return 1.0
    if spec.model == "M1":
        return float(np.exp(-np.exp(log_rate(x)[0]) * t))
    if spec.model == "M2":
        return float(np.exp(-((t / weibull_scale(x)[0]) ** WEIBULL_SHAPE)))
    if spec.model == "M3":
        return 1.0 - norm_cdf(math.log(t) - float(location(x)[0]))
    return float(np.exp(-t * np.exp(-location(x)[0])))


def true_quantile(spec: SimModelSpec, x, level: float) -> float:
    """The time where true_survival equals the given level."""
    if not 0.0 < level < 1.0:
        raise ValueError("survival level must be in (0, 1)")
    if spec.model == "M1":
        return float(-math.log(level) / np.exp(log_rate(x)[0]))
    if spec.model == "M2":
        return float(weibull_scale(x)[0] * (-math.log(level)) ** (1.0 / WEIBULL_SHAPE))
    if spec.model == "M3":
        return float(math.exp(location(x)[0] + norm_quantile(1.0 - level)))
    return float(-math.log(level) * np.exp(location(x)[0]))


def oracle_sampler(spec: SimModelSpec, censor: bool = True) -> ConditionalSampler:
    """A perfect conditional sampler drawn from the true laws.

    Stands in for a trained generator to exercise the estimation path in
    isolation; with ``censor=False`` the event times come back uncensored.
    """

    def sample(x, m: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(seed)
        xmat = np.tile(_as_matrix(x), (m, 1))
        t = _draw_event_times(spec, xmat, rng)
        if not censor:
            return np.log(t), np.ones(m, dtype=np.int8)
        c = _draw_censor_times(spec, xmat, rng)
        return np.log(np.minimum(t, c)), (t <= c).astype(np.int8)

    return sample


def calibration_metric(
    sampler: ConditionalSampler,
    spec: SimModelSpec,
    x,
    levels: tuple[float, ...] = (0.25, 0.50, 0.75),
    m: int = 10_000,
    seed: int = 0,
) -> np.ndarray:
    """Estimated survival (in percent) at the true conditional quantiles.

    Draws m conditional samples at x, builds the product-limit curve on
    the raw time scale, and reads it at the exact quantile times; a
    perfect sampler returns 100 * levels up to Monte-Carlo error.
    """
    y_log, delta = sampler(np.asarray(x, dtype=np.float64), m, seed)
    sample = CensoredSample(np.exp(y_log), delta, scale="raw")
    curve = kaplan_meier(sample)
    return np.array(
        [100.0 * survival_at(curve, true_quantile(spec, x, lv)) for lv in levels]
    )
