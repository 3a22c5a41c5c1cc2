"""Monte Carlo estimators over path ensembles.

Everything here consumes plain sample arrays (usually produced by the
``sim`` ensembles) and reports point estimates with asymptotic standard
errors. The finite/infinite dichotomies of the stationary law can only be
detected statistically; estimators of positive functionals therefore carry
a ``diverged`` flag driven by the upper-tail index of the summands (an
infinite mean of a regularly-varying summand means tail index <= 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptySampleError,
    InsufficientTailError,
    MomentOrderError,
    NotErgodicError,
    SizeMismatchError,
)
from .model import ModelSpec, ergodicity_margin
from .sim import STATIONARY, sample_merge, sample_synchronous
from .spectral import eta, kappa

BURN_IN_DECADES = 40.0
DIVERGENCE_MIN_SAMPLES = 1000
DIVERGENCE_Z = 2.0
SURVIVAL_WINDOW_QUANTILES = (0.99, 0.999)
MIN_FIT_POINTS = 10


@dataclass(frozen=True)
class EstimateSummary:
    """A Monte Carlo point estimate with its standard-error band."""

    value: float
    std_error: float
    n: int
    diverged: bool = False

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "n": self.n,
            "diverged": self.diverged,
        }


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of a log quantity against time."""

    slope: float
    intercept: float
    r2: float

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2}


@dataclass(frozen=True)
class DecayExperiment:
    """Transport-distance decay measured on a coupled ensemble.

    ``values[j]`` is the order-statistics distance between the two
    ensembles at ``times[j]``; ``fit`` is over ``p * log(values)`` (the
    p-th power of the distance decays at the spectral rate), restricted
    to ``times >= fit_start`` with nonpositive distances dropped.
    """

    p: float
    times: np.ndarray
    values: np.ndarray
    fit: DecayFit
    fit_start: float


@dataclass(frozen=True)
class MergeExperiment:
    """Merge-coupling experiment: meeting-time survival plus distance decay."""

    p: float
    theta: float
    gamma: float
    gamma_r2: float
    meeting_times: np.ndarray
    decay: DecayExperiment


def _check_samples(samples) -> np.ndarray:
    arr = np.asarray(samples, dtype=float).ravel()
    if arr.size == 0:
        raise EmptySampleError("estimator called on an empty sample")
    return arr


def _hill(sorted_positive, k):
    # Hill estimate on the k largest of an ascending positive array;
    # returns inf when the top spacings are degenerate.
    tail = sorted_positive[-k:]
    threshold = sorted_positive[-k - 1]
    mean_log = float(np.mean(np.log(tail / threshold)))
    if mean_log <= 0.0:
        return math.inf
    return 1.0 / mean_log


def _tail_divergence_flag(weights) -> bool:
    """Judge the estimand E[w] numerically divergent.

    For the regularly-varying summands produced by the heavy-tail
    regimes the mean is infinite exactly when the upper-tail index is
    <= 1, so the flag fires when the Hill estimate at k = sqrt(n) stays
    below 1 even after a two-standard-error allowance. (A naive
    sample-doubling drift test cannot work here: for these tails the
    sample standard error is inflated by the same extreme order
    statistics that drive the drift, and the drift-to-SE ratio stays
    O(1) no matter how divergent the estimand is.)
    """
    if not np.all(np.isfinite(weights)):
        return True
    if weights.size < DIVERGENCE_MIN_SAMPLES:
        return False
    positive = np.sort(weights[weights > 0])
    k = int(math.isqrt(positive.size)) if positive.size else 0
    if k < 16 or positive.size < k + 1 or positive[-k - 1] <= 0:
        return False
    alpha = _hill(positive, k)
    if math.isinf(alpha):
        return False
    return alpha + DIVERGENCE_Z * alpha / math.sqrt(k) < 1.0


def _summarize(weights) -> EstimateSummary:
    n = weights.size
    value = float(np.mean(weights))
    std_error = float(np.std(weights, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EstimateSummary(
        value=value, std_error=std_error, n=n, diverged=_tail_divergence_flag(weights)
    )


def estimate_moment(samples, p: float) -> EstimateSummary:
    """Mean of ``|y|^p`` with standard error."""
    if p <= 0:
        raise ValueError(f"p must be > 0, got {p}")
    samples = _check_samples(samples)
    return _summarize(np.abs(samples) ** p)


def estimate_laplace(samples, v: float) -> EstimateSummary:
    """Empirical Laplace transform, mean of ``exp(v*y)``."""
    samples = _check_samples(samples)
    return _summarize(np.exp(v * samples))


def estimate_gaussian_moment(samples, delta: float) -> EstimateSummary:
    """Mean of ``exp(delta * y^2)`` with standard error."""
    if delta <= 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    samples = _check_samples(samples)
    return _summarize(np.exp(delta * samples**2))


def tail_index(samples, k=None) -> EstimateSummary:
    """Hill estimator of the upper-tail index on the ``k`` largest
    positive samples (default ``k = floor(sqrt(n))``).

    The standard error is the asymptotic ``estimate / sqrt(k)``.
    """
    samples = _check_samples(samples)
    n = samples.size
    if k is None:
        k = int(math.isqrt(n))
    k = int(k)
    if k < 1 or 2 * k >= n:
        raise InsufficientTailError(f"k = {k} must satisfy 1 <= k < n/2 (n = {n})")
    positive = np.sort(samples[samples > 0])
    if positive.size < k + 1:
        raise InsufficientTailError(
            f"need more than k = {k} positive samples, got {positive.size}"
        )
    alpha = _hill(positive, k)
    if math.isinf(alpha):
        raise InsufficientTailError("degenerate tail: zero log-spacings")
    return EstimateSummary(
        value=alpha, std_error=alpha / math.sqrt(k), n=n, diverged=False
    )


def _fit_line(x, y):
    n = x.size
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    total = y - y.mean()
    denom = float(total @ total)
    r2 = 1.0 - float(resid @ resid) / denom if denom > 0 else 1.0
    if n > 2:
        sxx = float(np.sum((x - x.mean()) ** 2))
        se = math.sqrt(float(resid @ resid) / (n - 2) / sxx)
    else:
        se = 0.0
    return float(slope), float(intercept), r2, se


def _log_survival_points(sorted_values, n_total, t_lo, t_hi):
    # empirical log-survival at every observed level inside the window
    lo = int(np.searchsorted(sorted_values, t_lo, side="left"))
    hi = int(np.searchsorted(sorted_values, t_hi, side="right"))
    levels = sorted_values[lo:hi]
    exceed = n_total - (np.arange(lo, hi) + 1)
    keep = exceed > 0
    return levels[keep], np.log(exceed[keep] / n_total)


def survival_decay_rate(samples, t_lo=None, t_hi=None) -> EstimateSummary:
    """Exponential decay rate of the upper tail.

    Fits the empirical log-survival ``log P(Y > t)`` by least squares on
    the window ``[t_lo, t_hi]`` (default: the 99th and 99.9th percentile
    thresholds) and returns the negated slope. The reported ``n`` is the
    number of points entering the fit.
    """
    samples = _check_samples(samples)
    if t_lo is None:
        t_lo = float(np.quantile(samples, SURVIVAL_WINDOW_QUANTILES[0]))
    if t_hi is None:
        t_hi = float(np.quantile(samples, SURVIVAL_WINDOW_QUANTILES[1]))
    if not t_lo < t_hi:
        raise InsufficientTailError(f"need t_lo < t_hi, got [{t_lo:g}, {t_hi:g}]")
    sorted_values = np.sort(samples)
    levels, log_surv = _log_survival_points(sorted_values, samples.size, t_lo, t_hi)
    if levels.size < MIN_FIT_POINTS or np.ptp(levels) == 0:
        raise InsufficientTailError(
            f"only {levels.size} usable tail points in [{t_lo:g}, {t_hi:g}]"
        )
    slope, _, _, se = _fit_line(levels, log_surv)
    return EstimateSummary(
        value=-slope, std_error=se, n=int(levels.size), diverged=False
    )


def _order_stat_power_cost(a, b, p):
    # mean of |a_(i) - b_(i)|^p over the monotone matching
    return float(np.mean(np.abs(np.sort(a) - np.sort(b)) ** p))


def empirical_wasserstein(a, b, p: float = 1.0) -> float:
    """Order-``p`` Wasserstein distance between equal-size empirical
    samples via order statistics (monotone matching is the optimal
    one-dimensional coupling for ``p >= 1``)."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size or a.size == 0:
        raise SizeMismatchError(
            f"samples must have equal nonzero sizes, got {a.size} and {b.size}"
        )
    return _order_stat_power_cost(a, b, p) ** (1.0 / p)


def stationary_horizon(model: ModelSpec) -> float:
    """Burn-in horizon for sampling the stationary law: 40 divided by a
    reference spectral rate (``eta`` at ``min(1, kappa/2)`` in the
    heavy-tailed regime, at 1 otherwise)."""
    if ergodicity_margin(model) <= 0:
        raise NotErgodicError("no stationary law: mean drift is not positive")
    if model.drift_min < 0:
        p_ref = min(1.0, 0.5 * kappa(model))
    else:
        p_ref = 1.0
    return BURN_IN_DECADES / eta(model, p_ref)


def _fit_power_decay(times, values, p, fit_start):
    mask = (times >= fit_start) & (values > 0)
    if mask.sum() < 3:
        return DecayFit(slope=math.nan, intercept=math.nan, r2=math.nan)
    slope, intercept, r2, _ = _fit_line(times[mask], p * np.log(values[mask]))
    return DecayFit(slope=slope, intercept=intercept, r2=r2)


def wasserstein_decay_experiment(
    model: ModelSpec,
    y0_law_a,
    y0_law_b,
    p: float,
    horizon: float,
    n_paths: int,
    seed: int,
    times=None,
    x0=STATIONARY,
    fit_start=None,
    workers=None,
) -> DecayExperiment:
    """Measure the transport-distance decay under the synchronous coupling.

    Both ensembles share chain paths and Brownian increments pairwise;
    initial diffusion values come from ``y0_law_a`` / ``y0_law_b``
    (scalars for point masses, or per-path arrays). The distance at each
    output time is the order-statistics matching cost; the fit is of its
    ``p``-th power's log against time, whose slope the coupling bounds by
    minus the spectral rate at ``p``.

    Raises :class:`MomentOrderError` when ``p`` is not below the critical
    moment order.
    """
    if p <= 0:
        raise ValueError(f"p must be > 0, got {p}")
    crit = kappa(model)
    if p >= crit:
        raise MomentOrderError(f"p = {p:g} is not below the critical order {crit:g}")
    if times is None:
        times = np.linspace(0.0, horizon, 41)
    times = np.asarray(times, dtype=float)
    if fit_start is None:
        fit_start = horizon / 4.0
    y, yt, _ = sample_synchronous(
        model, n_paths, horizon, times, seed,
        y0=y0_law_a, y0_tilde=y0_law_b, x0=x0, workers=workers,
    )
    costs = np.array(
        [_order_stat_power_cost(y[:, j], yt[:, j], p) for j in range(times.size)]
    )
    values = costs ** (1.0 / p)
    fit = _fit_power_decay(times, values, p, fit_start)
    return DecayExperiment(
        p=p, times=times, values=values, fit=fit, fit_start=float(fit_start)
    )


def merge_coupling_experiment(
    model: ModelSpec,
    x0,
    x0_tilde,
    p: float,
    theta: float,
    horizon: float,
    n_paths: int,
    seed: int,
    y0=0.0,
    y0_tilde=0.0,
    times=None,
    fit_start=None,
    workers=None,
) -> MergeExperiment:
    """Run the merge coupling and summarize both of its rates.

    The chains' meeting times give the survival fit
    ``log P(T > t) ~ -gamma t``; the diffusion ensembles give the same
    distance-decay measurement as the synchronous experiment. ``theta``
    is the moment order assumed finite for the composite-rate bound
    (``p < theta`` required).
    """
    if not 0 < p < theta:
        raise MomentOrderError(f"need 0 < p < theta, got p={p:g}, theta={theta:g}")
    crit = kappa(model)
    if theta >= crit:
        raise MomentOrderError(
            f"theta = {theta:g} is not below the critical order {crit:g}"
        )
    if times is None:
        times = np.linspace(0.0, horizon, 41)
    times = np.asarray(times, dtype=float)
    if fit_start is None:
        fit_start = horizon / 4.0
    y, yt, meetings = sample_merge(
        model, n_paths, horizon, times, seed,
        x0=x0, x0_tilde=x0_tilde, y0=y0, y0_tilde=y0_tilde, workers=workers,
    )
    finite = np.sort(meetings[np.isfinite(meetings)])
    if finite.size < MIN_FIT_POINTS:
        raise InsufficientTailError(
            f"only {finite.size} finite meeting times out of {meetings.size}"
        )
    # survival fit over levels with at least MIN_FIT_POINTS exceedances
    t_hi = float(finite[-MIN_FIT_POINTS]) if finite.size > MIN_FIT_POINTS else finite[-1]
    levels, log_surv = _log_survival_points(finite, meetings.size, 0.0, t_hi)
    slope, _, gamma_r2, _ = _fit_line(levels, log_surv)
    costs = np.array(
        [_order_stat_power_cost(y[:, j], yt[:, j], p) for j in range(times.size)]
    )
    values = costs ** (1.0 / p)
    fit = _fit_power_decay(times, values, p, fit_start)
    decay = DecayExperiment(
        p=p, times=times, values=values, fit=fit, fit_start=float(fit_start)
    )
    return MergeExperiment(
        p=p, theta=theta, gamma=-slope, gamma_r2=gamma_r2,
        meeting_times=meetings, decay=decay,
    )


def composite_coupling_rate(gamma: float, eta_p: float, p: float, theta: float) -> float:
    """Decay rate of the distance bound when the chains start apart:
    the meeting phase (rate ``gamma``) and the post-meeting contraction
    (rate ``eta_p``) combine through a Holder split at exponent
    ``theta/p`` into ``gamma * eta_p / (gamma + s * eta_p)`` with
    ``s = 1/(1 - p/theta)``."""
    s = 1.0 / (1.0 - p / theta)
    return gamma * eta_p / (gamma + s * eta_p)
