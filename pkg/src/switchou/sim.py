"""Exact pathwise simulation of the switched OU diffusion.

The chain is simulated on its jump skeleton (exponential holding times,
embedded-chain transitions); between checkpoints the diffusion is updated
from its exact Gaussian transition law, so no time discretization enters
anywhere.

Randomness comes from counter-based Philox substreams keyed by
``(seed, path_index)``: ensemble results are bit-reproducible and
independent of how paths are scheduled across worker threads. Within a
path the draws are consumed in skeleton order (holding exponential, one
standard normal per checkpoint, next-state uniform); the compiled kernels
in ``_kernels`` and the pure-Python path builders here follow the same
order and produce identical values.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    InvalidHorizonError,
    InvalidOutputTimesError,
    SwitchouError,
)
from .model import ModelSpec, chain_quantities
from .spectral import exponential_structure

MASK64 = (1 << 64) - 1
STATIONARY = "stationary"
COUPLING_IDENTITY_RTOL = 1e-10
_PARALLEL_MIN_PATHS = 4096


@dataclass(frozen=True)
class PathSample:
    """One realized trajectory of (chain, diffusion).

    ``states`` has one more entry than ``jump_times``: the value held on
    each inter-jump interval. ``y_at`` maps every requested output time
    and every jump time to the diffusion value there. ``(seed,
    path_index)`` reproduce the path exactly.
    """

    jump_times: np.ndarray
    states: np.ndarray
    y_at: dict
    seed: int
    path_index: int = 0


@dataclass(frozen=True)
class HittingSubchain:
    """(time, state, value) at successive entrances into the
    positive-drift set; index 0 is the starting point."""

    entry_times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    seed: int
    path_index: int = 0


@dataclass(frozen=True)
class MergeCoupling:
    """Result of the merge coupling: the two paths and their chains'
    first meeting time (``inf`` when censored at the horizon)."""

    path: PathSample
    path_tilde: PathSample
    meeting_time: float


def generator_for(seed, stream=0) -> np.random.Generator:
    """Philox generator positioned at substream ``(seed, stream)``."""
    key = np.empty(2, dtype=np.uint64)
    key[0] = int(seed) & MASK64
    key[1] = int(stream) & MASK64
    return np.random.Generator(np.random.Philox(key=key))


class _Substreams:
    """Reusable generator re-keyed per path; equivalent to constructing
    ``generator_for(seed, stream)`` afresh but several times cheaper."""

    def __init__(self, seed):
        key = np.array([int(seed) & MASK64, 0], dtype=np.uint64)
        self._bitgen = np.random.Philox(key=key)
        self.generator = np.random.Generator(self._bitgen)
        self._template = self._bitgen.state

    def reset(self, stream) -> np.random.Generator:
        self._template["state"]["key"][1] = int(stream) & MASK64
        self._bitgen.state = self._template
        return self.generator


class _Chain:
    """Model arrays in the layout the kernels consume."""

    def __init__(self, model: ModelSpec):
        q = chain_quantities(model)
        self.rates = np.ascontiguousarray(q.jump_rates)
        self.cum_p = np.ascontiguousarray(np.cumsum(q.embedded, axis=1))
        self.cum_mu = np.ascontiguousarray(np.cumsum(q.invariant))
        self.drift = np.ascontiguousarray(model.drift)
        self.sigma = np.ascontiguousarray(model.sigma)


def _check_horizon(horizon) -> float:
    horizon = float(horizon)
    if not horizon > 0:
        raise InvalidHorizonError(f"horizon must be > 0, got {horizon:g}")
    return horizon


def _check_times(output_times, horizon) -> np.ndarray:
    times = np.asarray(output_times, dtype=float)
    if times.ndim != 1:
        raise InvalidOutputTimesError("output times must be one-dimensional")
    if times.size:
        if np.any(np.diff(times) < 0):
            raise InvalidOutputTimesError("output times must be sorted")
        if times[0] < 0 or times[-1] > horizon:
            raise InvalidOutputTimesError(
                f"output times must lie in [0, {horizon:g}]"
            )
    return times


def _resolve_x0(model: ModelSpec, x0) -> int:
    # -1 encodes "draw the initial state from the invariant measure".
    if isinstance(x0, str):
        if x0 == STATIONARY:
            return -1
        raise ValueError(f"x0 must be a state index or '{STATIONARY}', got {x0!r}")
    x0 = int(x0)
    if not 0 <= x0 < model.d:
        raise ValueError(f"x0 = {x0} outside state space of size {model.d}")
    return x0


def _broadcast_y0(y0, n_paths) -> np.ndarray:
    arr = np.asarray(y0, dtype=float)
    if arr.ndim == 0:
        return np.full(n_paths, float(arr))
    if arr.shape != (n_paths,):
        raise ValueError(f"y0 must be a scalar or length-{n_paths} array")
    return arr


def _resolve_workers(workers) -> int:
    if workers is None:
        env = os.environ.get("SWITCHOU_THREADS")
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(workers))


def _run_paths(n_paths, seed, workers, run_chunk):
    # run_chunk(lo, hi) owns substreams (seed, lo..hi-1) and writes
    # disjoint output rows, so scheduling cannot affect results.
    workers = _resolve_workers(workers)
    if workers == 1 or n_paths < _PARALLEL_MIN_PATHS:
        run_chunk(0, n_paths)
        return
    bounds = np.linspace(0, n_paths, workers + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(run_chunk, int(lo), int(hi))
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        for fut in futures:
            fut.result()


# ---------------------------------------------------------------------------
# single-path builders (pure Python, kernel-identical draw order)
# ---------------------------------------------------------------------------


def _advance(g, y, lam, sig2, dt):
    dec = np.exp(-lam * dt)
    sd = np.sqrt(_kernels._ou_var(lam, sig2, dt))
    return y * dec + sd * g.standard_normal()


def simulate_path(
    model: ModelSpec, x0, y0, horizon, output_times=(), seed=0, path_index=0
) -> PathSample:
    """Simulate one exact path up to ``horizon``.

    ``x0`` is a state index or ``"stationary"`` (initial state drawn from
    the invariant measure). The diffusion value is recorded at every jump
    time and every requested output time.
    """
    horizon = _check_horizon(horizon)
    times = _check_times(output_times, horizon)
    chain = _Chain(model)
    g = generator_for(seed, path_index)

    x = _resolve_x0(model, x0)
    if x < 0:
        x = int(np.searchsorted(chain.cum_mu, g.random(), side="right"))
    y = float(y0)
    t = 0.0
    idx = 0
    jump_times = []
    states = [x]
    y_at = {}
    while True:
        t_jump = t + g.standard_exponential() / chain.rates[x]
        seg_end = t_jump if t_jump < horizon else horizon
        lam = chain.drift[x]
        sig2 = chain.sigma[x] * chain.sigma[x]
        while idx < times.size and times[idx] <= seg_end:
            dt = times[idx] - t
            if dt > 0.0:
                y = _advance(g, y, lam, sig2, dt)
                t = times[idx]
            y_at[float(times[idx])] = y
            idx += 1
        dt = seg_end - t
        if dt > 0.0:
            y = _advance(g, y, lam, sig2, dt)
            t = seg_end
        if t_jump >= horizon:
            break
        x = int(np.searchsorted(chain.cum_p[x], g.random(), side="right"))
        jump_times.append(t_jump)
        states.append(x)
        y_at[float(t_jump)] = y
    return PathSample(
        jump_times=np.array(jump_times),
        states=np.array(states, dtype=np.int64),
        y_at=y_at,
        seed=int(seed),
        path_index=int(path_index),
    )


def couple_synchronous(
    model: ModelSpec, x0, y0, y0_tilde, horizon, output_times=(), seed=0, path_index=0
) -> tuple[PathSample, PathSample]:
    """Two diffusion copies on one chain path, driven by the same
    Brownian increments.

    The gap between the copies then contracts deterministically:
    ``|Y_t - Y'_t| = |y0 - y0'| * exp(-integral of drift)``. The running
    drift integral is tracked along the skeleton and the identity is
    checked to relative tolerance ``COUPLING_IDENTITY_RTOL`` at every
    checkpoint.
    """
    horizon = _check_horizon(horizon)
    times = _check_times(output_times, horizon)
    chain = _Chain(model)
    g = generator_for(seed, path_index)

    x = _resolve_x0(model, x0)
    if x < 0:
        x = int(np.searchsorted(chain.cum_mu, g.random(), side="right"))
    y = float(y0)
    yt = float(y0_tilde)
    gap0 = abs(y - yt)
    lam_int = 0.0
    t = 0.0
    idx = 0
    jump_times = []
    states = [x]
    y_at = {}
    yt_at = {}

    def step_pair(y, yt, lam, sig2, dt):
        dec = np.exp(-lam * dt)
        sd = np.sqrt(_kernels._ou_var(lam, sig2, dt))
        gauss = g.standard_normal()
        return y * dec + sd * gauss, yt * dec + sd * gauss

    def check_identity(y, yt, lam_int, t):
        expected = gap0 * math.exp(-lam_int)
        if abs(abs(y - yt) - expected) > COUPLING_IDENTITY_RTOL * max(expected, 1e-300):
            raise SwitchouError(
                f"synchronous coupling identity violated at t={t:g}: "
                f"gap {abs(y - yt):.17g} vs expected {expected:.17g}"
            )

    while True:
        t_jump = t + g.standard_exponential() / chain.rates[x]
        seg_end = t_jump if t_jump < horizon else horizon
        lam = chain.drift[x]
        sig2 = chain.sigma[x] * chain.sigma[x]
        while idx < times.size and times[idx] <= seg_end:
            dt = times[idx] - t
            if dt > 0.0:
                y, yt = step_pair(y, yt, lam, sig2, dt)
                lam_int += lam * dt
                t = times[idx]
            y_at[float(times[idx])] = y
            yt_at[float(times[idx])] = yt
            check_identity(y, yt, lam_int, t)
            idx += 1
        dt = seg_end - t
        if dt > 0.0:
            y, yt = step_pair(y, yt, lam, sig2, dt)
            lam_int += lam * dt
            t = seg_end
        if t_jump >= horizon:
            check_identity(y, yt, lam_int, t)
            break
        x = int(np.searchsorted(chain.cum_p[x], g.random(), side="right"))
        jump_times.append(t_jump)
        states.append(x)
        y_at[float(t_jump)] = y
        yt_at[float(t_jump)] = yt
        check_identity(y, yt, lam_int, t)

    jump_times = np.array(jump_times)
    states = np.array(states, dtype=np.int64)
    first = PathSample(jump_times, states, y_at, int(seed), int(path_index))
    second = PathSample(jump_times, states, yt_at, int(seed), int(path_index))
    return first, second


def couple_merge(
    model: ModelSpec,
    x0,
    x0_tilde,
    y0,
    y0_tilde,
    horizon,
    output_times=(),
    seed=0,
    path_index=0,
) -> MergeCoupling:
    """Two chains run independently until their first meeting, identical
    afterward; both diffusion copies ride the same Brownian path the
    whole time (exact joint updates on the union of the two skeletons).

    Meetings are detected at jump epochs. Returns both paths and the
    meeting time (``inf`` if the chains have not met by the horizon).
    """
    horizon = _check_horizon(horizon)
    times = _check_times(output_times, horizon)
    chain = _Chain(model)
    g = generator_for(seed, path_index)

    xa = _resolve_x0(model, x0)
    xb = _resolve_x0(model, x0_tilde)
    if xa < 0 or xb < 0:
        raise ValueError("merge coupling requires explicit initial states")
    ya = float(y0)
    yb = float(y0_tilde)
    t = 0.0
    idx = 0
    nja = g.standard_exponential() / chain.rates[xa]
    njb = g.standard_exponential() / chain.rates[xb]
    meeting = math.inf
    if xa == xb:
        meeting = 0.0

    jt_a, st_a, ya_at = [], [xa], {}
    jt_b, st_b, yb_at = [], [xb], {}

    def pair_step(ya, yb, dt):
        lama, lamb = chain.drift[xa], chain.drift[xb]
        siga, sigb = chain.sigma[xa], chain.sigma[xb]
        vara = _kernels._ou_var(lama, siga * siga, dt)
        varb = _kernels._ou_var(lamb, sigb * sigb, dt)
        cov = siga * sigb * _kernels._int_decay(lama + lamb, dt)
        sda = np.sqrt(vara)
        g1 = g.standard_normal()
        g2 = g.standard_normal()
        c = cov / sda
        rem = varb - c * c
        if rem < 0.0:
            rem = 0.0
        ya = ya * np.exp(-lama * dt) + sda * g1
        yb = yb * np.exp(-lamb * dt) + c * g1 + np.sqrt(rem) * g2
        return ya, yb

    while meeting == math.inf:
        te = nja if nja < njb else njb
        seg_end = te if te < horizon else horizon
        while idx < times.size and times[idx] <= seg_end:
            dt = times[idx] - t
            if dt > 0.0:
                ya, yb = pair_step(ya, yb, dt)
                t = times[idx]
            ya_at[float(times[idx])] = ya
            yb_at[float(times[idx])] = yb
            idx += 1
        dt = seg_end - t
        if dt > 0.0:
            ya, yb = pair_step(ya, yb, dt)
            t = seg_end
        if te >= horizon:
            break
        if nja <= njb:
            xa = int(np.searchsorted(chain.cum_p[xa], g.random(), side="right"))
            nja = te + g.standard_exponential() / chain.rates[xa]
            jt_a.append(te)
            st_a.append(xa)
            ya_at[float(te)] = ya
        else:
            xb = int(np.searchsorted(chain.cum_p[xb], g.random(), side="right"))
            njb = te + g.standard_exponential() / chain.rates[xb]
            jt_b.append(te)
            st_b.append(xb)
            yb_at[float(te)] = yb
        if xa == xb:
            meeting = te

    if meeting != math.inf:
        # merged phase: one skeleton (first chain's clock), shared draws
        while True:
            te = nja
            seg_end = te if te < horizon else horizon
            lam = chain.drift[xa]
            sig2 = chain.sigma[xa] * chain.sigma[xa]
            while idx < times.size and times[idx] <= seg_end:
                dt = times[idx] - t
                if dt > 0.0:
                    dec = np.exp(-lam * dt)
                    sd = np.sqrt(_kernels._ou_var(lam, sig2, dt))
                    gauss = g.standard_normal()
                    ya = ya * dec + sd * gauss
                    yb = yb * dec + sd * gauss
                    t = times[idx]
                ya_at[float(times[idx])] = ya
                yb_at[float(times[idx])] = yb
                idx += 1
            dt = seg_end - t
            if dt > 0.0:
                dec = np.exp(-lam * dt)
                sd = np.sqrt(_kernels._ou_var(lam, sig2, dt))
                gauss = g.standard_normal()
                ya = ya * dec + sd * gauss
                yb = yb * dec + sd * gauss
                t = seg_end
            if te >= horizon:
                break
            xa = int(np.searchsorted(chain.cum_p[xa], g.random(), side="right"))
            nja = te + g.standard_exponential() / chain.rates[xa]
            xb = xa
            for jt, st, vals, val in ((jt_a, st_a, ya_at, ya), (jt_b, st_b, yb_at, yb)):
                jt.append(te)
                st.append(xa)
                vals[float(te)] = val

    path_a = PathSample(
        np.array(jt_a), np.array(st_a, dtype=np.int64), ya_at, int(seed), int(path_index)
    )
    path_b = PathSample(
        np.array(jt_b), np.array(st_b, dtype=np.int64), yb_at, int(seed), int(path_index)
    )
    return MergeCoupling(path=path_a, path_tilde=path_b, meeting_time=meeting)


def simulate_Ix(model: ModelSpec, x0, seed=0, path_index=0) -> float:
    """One draw of the Brownian integral over a zero-drift sojourn
    started at ``x0``, up to the first entrance into the positive-drift
    set. Requires the exponential-like regime."""
    structure = exponential_structure(model)
    if x0 not in structure.n_states:
        raise ValueError(f"x0 = {x0} is not a zero-drift state")
    chain = _Chain(model)
    g = generator_for(seed, path_index)
    zero = model.drift == 0.0
    x = int(x0)
    total = 0.0
    while True:
        tau = g.standard_exponential() / chain.rates[x]
        total += chain.sigma[x] * np.sqrt(tau) * g.standard_normal()
        x = int(np.searchsorted(chain.cum_p[x], g.random(), side="right"))
        if not zero[x]:
            return total


def simulate_hitting_subchain(
    model: ModelSpec, x0, y0, n_entries, seed=0, path_index=0
) -> HittingSubchain:
    """Observe (chain, diffusion) at successive entrance times into the
    positive-drift set, starting from ``x0`` in that set, until
    ``n_entries`` entrances have been recorded."""
    structure = exponential_structure(model)
    if x0 not in structure.m_states:
        raise ValueError(f"x0 = {x0} is not a positive-drift state")
    n_entries = int(n_entries)
    if n_entries < 0:
        raise ValueError("n_entries must be >= 0")
    chain = _Chain(model)
    g = generator_for(seed, path_index)
    in_m = model.drift > 0.0
    out_t = np.empty(n_entries + 1)
    out_u = np.empty(n_entries + 1, dtype=np.int64)
    out_v = np.empty(n_entries + 1)
    _kernels.subchain_kernel(
        g, chain.rates, chain.cum_p, chain.drift, chain.sigma, in_m,
        int(x0), float(y0), out_t, out_u, out_v,
    )
    return HittingSubchain(
        entry_times=out_t, u=out_u, v=out_v, seed=int(seed), path_index=int(path_index)
    )


# ---------------------------------------------------------------------------
# ensembles (compiled kernels, one substream per path)
# ---------------------------------------------------------------------------


def sample_synchronous(
    model: ModelSpec,
    n_paths,
    horizon,
    times,
    seed,
    y0=0.0,
    y0_tilde=0.0,
    x0=STATIONARY,
    workers=None,
):
    """Ensemble of synchronous coupling pairs.

    Returns arrays ``(y, y_tilde, drift_integral)`` of shape
    ``(n_paths, len(times))`` with values at the requested times. Path
    ``i`` uses substream ``(seed, i)``. With ``y0_tilde == y0`` the first
    array is just a plain ensemble of the diffusion and the third is the
    pathwise integral of the drift (a Feynman-Kac functional when
    exponentiated).
    """
    horizon = _check_horizon(horizon)
    times = _check_times(times, horizon)
    n_paths = int(n_paths)
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    chain = _Chain(model)
    x0_code = _resolve_x0(model, x0)
    y0_arr = _broadcast_y0(y0, n_paths)
    y0t_arr = _broadcast_y0(y0_tilde, n_paths)

    out_y = np.empty((n_paths, times.size))
    out_yt = np.empty((n_paths, times.size))
    out_li = np.empty((n_paths, times.size))

    def run_chunk(lo, hi):
        streams = _Substreams(seed)
        for i in range(lo, hi):
            g = streams.reset(i)
            _kernels.sync_path_kernel(
                g, chain.rates, chain.cum_p, chain.drift, chain.sigma,
                chain.cum_mu, x0_code, y0_arr[i], y0t_arr[i], horizon, times,
                out_y[i], out_yt[i], out_li[i],
            )

    _run_paths(n_paths, seed, workers, run_chunk)
    return out_y, out_yt, out_li


def sample_values(
    model: ModelSpec, n_paths, horizon, times, seed, x0=STATIONARY, y0=0.0, workers=None
) -> np.ndarray:
    """Ensemble of diffusion values, shape ``(n_paths, len(times))``."""
    y, _, _ = sample_synchronous(
        model, n_paths, horizon, times, seed, y0=y0, y0_tilde=y0, x0=x0, workers=workers
    )
    return y


def sample_terminal(
    model: ModelSpec, n_paths, horizon, seed, x0=STATIONARY, y0=0.0, workers=None
) -> np.ndarray:
    """Ensemble of diffusion values at the horizon (one per path)."""
    values = sample_values(
        model, n_paths, horizon, np.array([float(horizon)]), seed,
        x0=x0, y0=y0, workers=workers,
    )
    return values[:, 0]


def sample_Ix(model: ModelSpec, x0, n_draws, seed, workers=None) -> np.ndarray:
    """Independent draws of the zero-drift sojourn integral; draw ``i``
    uses substream ``(seed, i)``."""
    structure = exponential_structure(model)
    if x0 not in structure.n_states:
        raise ValueError(f"x0 = {x0} is not a zero-drift state")
    n_draws = int(n_draws)
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    chain = _Chain(model)
    zero = model.drift == 0.0
    out = np.empty(n_draws)

    def run_chunk(lo, hi):
        streams = _Substreams(seed)
        for i in range(lo, hi):
            g = streams.reset(i)
            out[i] = _kernels.ix_kernel(
                g, chain.rates, chain.cum_p, chain.sigma, zero, int(x0)
            )

    _run_paths(n_draws, seed, workers, run_chunk)
    return out


def sample_merge(
    model: ModelSpec,
    n_paths,
    horizon,
    times,
    seed,
    x0,
    x0_tilde,
    y0=0.0,
    y0_tilde=0.0,
    workers=None,
):
    """Ensemble of merge-coupling pairs.

    Returns ``(y, y_tilde, meeting_times)``; the value arrays have shape
    ``(n_paths, len(times))`` and censored meeting times are ``inf``.
    """
    horizon = _check_horizon(horizon)
    times = _check_times(times, horizon)
    n_paths = int(n_paths)
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    chain = _Chain(model)
    xa = _resolve_x0(model, x0)
    xb = _resolve_x0(model, x0_tilde)
    if xa < 0 or xb < 0:
        raise ValueError("merge coupling requires explicit initial states")
    y0_arr = _broadcast_y0(y0, n_paths)
    y0t_arr = _broadcast_y0(y0_tilde, n_paths)

    out_y = np.empty((n_paths, times.size))
    out_yt = np.empty((n_paths, times.size))
    meetings = np.empty(n_paths)

    def run_chunk(lo, hi):
        streams = _Substreams(seed)
        for i in range(lo, hi):
            g = streams.reset(i)
            meetings[i] = _kernels.merge_pair_kernel(
                g, chain.rates, chain.cum_p, chain.drift, chain.sigma,
                xa, xb, y0_arr[i], y0t_arr[i], horizon, times,
                out_y[i], out_yt[i],
            )

    _run_paths(n_paths, seed, workers, run_chunk)
    return out_y, out_yt, meetings


def _euler_reference_terminal(lam, sig, y0, horizon, dt, n_paths, seed):
    # Brute-force Euler-Maruyama for constant coefficients; test-only
    # cross-check of the exact engine, never part of the public API.
    rng = np.random.default_rng(seed)
    n_steps = int(round(horizon / dt))
    y = np.full(int(n_paths), float(y0))
    root_dt = math.sqrt(dt)
    for _ in range(n_steps):
        y += -lam * y * dt + sig * root_dt * rng.standard_normal(y.size)
    return y
