"""Cox proportional-hazards baseline.

Newton-Raphson maximization of the log partial likelihood with Breslow
tie handling and step-halving, the Breslow estimator of the baseline
cumulative hazard, and conditional survival curves. This is the
comparator the generative estimator is benchmarked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimators import StepCurve
from .pipeline_io import Dataset

_SCORE_TOL = 1e-9
_LOGLIK_RTOL = 1e-12
_MAX_ITER = 100
_MAX_HALVINGS = 30


class CoxError(RuntimeError):
    pass


@dataclass(frozen=True)
class CoxFit:
    """Fitted coefficients, their standard errors, and the baseline hazard."""

    beta: np.ndarray
    std_err: np.ndarray
    log_likelihood: float
    iterations: int
    baseline_hazard: StepCurve
    columns: tuple[str, ...]
    time_scale: str


def _risk_sums(xs: np.ndarray, ys: np.ndarray, beta: np.ndarray):
    """Suffix risk-set sums S0, S1, S2 at each row of the time-sorted data.

    Row i's sums run over every subject with time >= ys[i]; tied times
    share the same risk set (Breslow convention).
    """
    n, p = xs.shape
    w = np.exp(xs @ beta)
    # suffix cumulative sums: sums over j >= i in time-ascending order
    s0 = np.cumsum(w[::-1])[::-1]
    s1 = np.cumsum((xs * w[:, None])[::-1], axis=0)[::-1]
    outer = xs[:, :, None] * xs[:, None, :] * w[:, None, None]
    s2 = np.cumsum(outer[::-1], axis=0)[::-1]
    # map each row to the first index of its tie group so ties at an event
    # time keep the full risk set
    new_group = np.r_[True, ys[1:] != ys[:-1]]
    first = np.maximum.accumulate(np.where(new_group, np.arange(n), 0))
    return w, s0[first], s1[first], s2[first]


def _log_partial_likelihood(xs, ys, ds, beta) -> float:
    _, s0, _, _ = _risk_sums(xs, ys, beta)
    ev = ds == 1
    return float(np.sum(xs[ev] @ beta) - np.sum(np.log(s0[ev])))


def fit_coxph(dataset: Dataset, max_iter: int = _MAX_ITER) -> CoxFit:
    """Maximize the Breslow log partial likelihood by damped Newton steps.

    Needs at least one event. Raises CoxError on a singular information
    matrix or when the likelihood degenerates (monotone likelihood from a
    separating covariate), naming the worst coordinate.
    """
    n_events = int(np.sum(dataset.delta == 1))
    if n_events == 0:
        raise CoxError("no events in the data; partial likelihood is undefined")
    order = np.argsort(dataset.y, kind="stable")
    xs = np.ascontiguousarray(dataset.x[order])
    ys = dataset.y[order]
    ds = dataset.delta[order]
    n, p = xs.shape

    beta = np.zeros(p)
    loglik = _log_partial_likelihood(xs, ys, ds, beta)
    iterations = 0
    if p > 0:
        for iterations in range(1, max_iter + 1):
            _, s0, s1, s2 = _risk_sums(xs, ys, beta)
            ev = ds == 1
            xbar = s1[ev] / s0[ev, None]
            score = (xs[ev] - xbar).sum(axis=0)
            info = (
                s2[ev] / s0[ev, None, None]
                - xbar[:, :, None] * xbar[:, None, :]
            ).sum(axis=0)
            if np.max(np.abs(score)) < _SCORE_TOL:
                break
            try:
                step = np.linalg.solve(info, score)
            except np.linalg.LinAlgError:
                raise CoxError(
                    "singular information matrix; covariates are not full "
                    "rank on the events"
                ) from None
            # step-halving keeps the likelihood nondecreasing
            factor = 1.0
            for _ in range(_MAX_HALVINGS):
                candidate = beta + factor * step
                cand_loglik = _log_partial_likelihood(xs, ys, ds, candidate)
                if cand_loglik >= loglik or not math.isfinite(loglik):
                    break
                factor *= 0.5
            else:
                break  # no uphill direction left: converged to tolerance
            improved = cand_loglik - loglik
            beta, prev_loglik, loglik = candidate, loglik, cand_loglik
            if np.max(np.abs(beta)) > 50.0:
                worst = dataset.columns[int(np.argmax(np.abs(beta)))]
                raise CoxError(
                    f"divergence: coefficient for {worst!r} is unbounded "
                    "(monotone likelihood / complete separation)"
                )
            if abs(improved) < _LOGLIK_RTOL * max(1.0, abs(prev_loglik)):
                break
        else:
            raise CoxError(f"no convergence in {max_iter} iterations")
        _, s0, s1, s2 = _risk_sums(xs, ys, beta)
        ev = ds == 1
        xbar = s1[ev] / s0[ev, None]
        info = (s2[ev] / s0[ev, None, None] - xbar[:, :, None] * xbar[:, None, :]).sum(axis=0)
        try:
            cov = np.linalg.inv(info)
        except np.linalg.LinAlgError:
            raise CoxError("singular information matrix at the optimum") from None
        std_err = np.sqrt(np.diag(cov))
        loglik = _log_partial_likelihood(xs, ys, ds, beta)
    else:
        std_err = np.zeros(0)

    baseline = _breslow_baseline(xs, ys, ds, beta, dataset.time_scale)
    return CoxFit(
        beta=beta,
        std_err=std_err,
        log_likelihood=loglik,
        iterations=iterations,
        baseline_hazard=baseline,
        columns=dataset.columns,
        time_scale=dataset.time_scale,
    )


def _breslow_baseline(xs, ys, ds, beta, scale) -> StepCurve:
    """Baseline cumulative hazard: event counts over risk-set weight sums."""
    _, s0, _, _ = _risk_sums(xs, ys, beta)
    ev_idx = np.nonzero(ds == 1)[0]
    jumps = 1.0 / s0[ev_idx]
    times = ys[ev_idx]
    uniq, start = np.unique(times, return_index=True)
    cum = np.cumsum(jumps)
    # cumulative value at the last tied event of each distinct time
    last = np.r_[start[1:] - 1, jumps.size - 1]
    return StepCurve(uniq, cum[last], 0.0, "hazard", scale)


def cox_survival(fit: CoxFit, x, t: float) -> float:
    """exp(-Lambda0(t) * exp(x'beta)), the model's survival at time t."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    lam0 = float(fit.baseline_hazard(t))
    eta = float(np.asarray(x, dtype=np.float64) @ fit.beta) if fit.beta.size else 0.0
    return math.exp(-lam0 * math.exp(eta))


def cox_survival_curve(fit: CoxFit, x) -> StepCurve:
    """The full conditional survival step curve for covariates x."""
    eta = float(np.asarray(x, dtype=np.float64) @ fit.beta) if fit.beta.size else 0.0
    lam = fit.baseline_hazard
    values = np.exp(-lam.values * math.exp(eta))
    return StepCurve(lam.times, values, 1.0, "survival", fit.time_scale)


def fit_report(fit: CoxFit) -> str:
    """Human-readable fit summary block."""
    lines = [
        "cox proportional hazards fit",
        f"log_partial_likelihood = {fit.log_likelihood:.10g}",
        f"iterations = {fit.iterations}",
        f"time_scale = {fit.time_scale}",
        "covariate coef se",
    ]
    for name, b, se in zip(fit.columns, fit.beta, fit.std_err):
        lines.append(f"{name} {b:.10g} {se:.10g}")
    return "\n".join(lines) + "\n"
