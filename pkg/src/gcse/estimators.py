"""Nonparametric survival machinery over censored samples.

Given pairs (time, indicator) — typically Monte-Carlo draws from the
conditional generator — this module builds the empirical observed-time
distribution and event subdistribution, the Nelson-Aalen cumulative
hazard and the Kaplan-Meier survival curve via their ordered-sample
forms, and derives quantiles, prediction intervals, and the majority
censoring classification from them.

All step curves are right-continuous. Ties are ordered events-first,
the usual convention (generator output is continuous, but file-borne
data can tie after rounding).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

Scale = Literal["log", "raw"]


class EmptySampleError(ValueError):
    pass


@dataclass(frozen=True)
class CensoredSample:
    """Observed times with 0/1 censoring indicators."""

    y: np.ndarray
    delta: np.ndarray
    scale: Scale = "raw"

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        d = np.asarray(self.delta)
        if y.ndim != 1 or d.shape != y.shape:
            raise ValueError("y and delta must be equal-length vectors")
        if d.size and not np.isin(d, (0, 1)).all():
            raise ValueError("delta must be 0/1")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "delta", d.astype(np.int8))

    def __len__(self) -> int:
        return self.y.size


@dataclass(frozen=True)
class StepCurve:
    """Right-continuous step function: value(t) = values[last jump <= t].

    ``times`` are the strictly increasing jump locations, ``values`` the
    post-jump levels, ``initial`` the level before the first jump.
    """

    times: np.ndarray
    values: np.ndarray
    initial: float
    kind: Literal["survival", "hazard", "cdf"]
    scale: Scale = "raw"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be equal-length vectors")
        if t.size > 1 and not (np.diff(t) > 0).all():
            raise ValueError("jump times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        full = np.concatenate([[self.initial], v])
        if self.kind == "survival":
            if not ((full >= -1e-12) & (full <= 1 + 1e-12)).all():
                raise ValueError("survival values must lie in [0, 1]")
            if (np.diff(full) > 1e-12).any():
                raise ValueError("survival curve must be nonincreasing")
        else:
            if (np.diff(full) < -1e-12).any():
                raise ValueError(f"{self.kind} curve must be nondecreasing")

    def __call__(self, t) -> np.ndarray | float:
        tq = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.times, tq, side="right")
        full = np.concatenate([[self.initial], self.values])
        out = full[idx]
        return float(out) if np.isscalar(t) or tq.ndim == 0 else out


def _ordered(sample: CensoredSample) -> tuple[np.ndarray, np.ndarray]:
    """Sort ascending by time, events before censorings at ties."""
    if len(sample) == 0:
        raise EmptySampleError("need at least one observation")
    order = np.lexsort((1 - sample.delta, sample.y))
    return sample.y[order], sample.delta[order]


def _compress(times: np.ndarray, cumvals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Keep the last cumulative value at each distinct time."""
    last = np.r_[np.nonzero(np.diff(times))[0], times.size - 1]
    return times[last], cumvals[last]


def empirical_subdistributions(sample: CensoredSample) -> tuple[StepCurve, StepCurve]:
    """Empirical CDF of the observed time and its event-only part.

    Returns (H, H1) with H(t) the fraction of observations <= t and
    H1(t) the fraction with an event at or before t.
    """
    ys, ds = _ordered(sample)
    m = ys.size
    h = np.arange(1, m + 1) / m
    h1 = np.cumsum(ds) / m
    th, vh = _compress(ys, h)
    th1, vh1 = _compress(ys, h1)
    cdf = StepCurve(th, vh, 0.0, "cdf", sample.scale)
    sub = StepCurve(th1, vh1, 0.0, "cdf", sample.scale)
    return cdf, sub


def nelson_aalen(sample: CensoredSample) -> StepCurve:
    """Cumulative-hazard estimate: sum of delta_(j) / (m - j + 1) over the
    ordered sample up to t."""
    ys, ds = _ordered(sample)
    m = ys.size
    increments = ds / (m - np.arange(m, dtype=np.float64))
    times, vals = _compress(ys, np.cumsum(increments))
    return StepCurve(times, vals, 0.0, "hazard", sample.scale)


def kaplan_meier(sample: CensoredSample) -> StepCurve:
    """Product-limit survival estimate over the ordered sample."""
    ys, ds = _ordered(sample)
    m = ys.size
    factors = 1.0 - ds / (m - np.arange(m, dtype=np.float64))
    times, vals = _compress(ys, np.cumprod(factors))
    return StepCurve(times, vals, 1.0, "survival", sample.scale)


def survival_at(curve: StepCurve, t: float) -> float:
    """Right-continuous evaluation of a survival curve."""
    if curve.kind != "survival":
        raise ValueError("survival_at needs a survival-tagged curve")
    return float(curve(t))


def quantile(curve: StepCurve, level: float) -> float | None:
    """Smallest jump time where the survival curve is <= level.

    Returns None ("saturated") when the curve never reaches the level —
    e.g. a heavy-censoring plateau.
    """
    if curve.kind != "survival":
        raise ValueError("quantile needs a survival-tagged curve")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    below = np.nonzero(curve.values <= level)[0]
    if below.size == 0:
        return None
    return float(curve.times[below[0]])


def prediction_interval(
    curve: StepCurve, coverage: float = 0.90
) -> tuple[float, float, bool]:
    """Central interval [lo, hi] from survival-quantile inversion.

    lo sits at survival level (1+coverage)/2, hi at (1-coverage)/2. When
    censoring keeps the curve above the lower level, hi falls back to the
    largest generated time and the saturation flag is set. (A saturated
    lo — a curve that never drops below the upper level — gets the same
    fallback.)
    """
    if not 0.0 < coverage < 1.0:
        raise ValueError("coverage must be in (0, 1)")
    if curve.times.size == 0:
        raise EmptySampleError("curve has no jumps")
    top = float(curve.times[-1])
    lo = quantile(curve, (1.0 + coverage) / 2.0)
    hi = quantile(curve, (1.0 - coverage) / 2.0)
    saturated = hi is None
    return (top if lo is None else lo), (top if saturated else hi), saturated


def censoring_classification(sample: CensoredSample) -> tuple[str, float]:
    """Majority vote on generated indicators.

    Returns ("censored"|"uncensored", censored fraction); the censored
    call requires the fraction to exceed one half strictly.
    """
    if len(sample) == 0:
        raise EmptySampleError("need at least one observation")
    frac = float(np.mean(sample.delta == 0))
    return ("censored" if frac > 0.5 else "uncensored"), frac


def curve_to_text(curve: StepCurve, m: int | None = None) -> str:
    """Two-column export with a descriptive header; 12 significant digits."""
    mtag = "" if m is None else f" m={m}"
    lines = [f"# {curve.kind} scale={curve.scale}{mtag}", "# time value"]
    lines.append(f"{'-inf'} {curve.initial:.12g}")
    for t, v in zip(curve.times, curve.values):
        lines.append(f"{t:.12g} {v:.12g}")
    return "\n".join(lines) + "\n"
