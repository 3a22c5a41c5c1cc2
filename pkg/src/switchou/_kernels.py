"""Jump-skeleton simulation kernels.

Each kernel consumes one path's randomness from a dedicated
``numpy.random.Generator`` substream in a fixed order (holding-time
exponential, then one standard normal per checkpoint inside the holding
interval, then the next-state uniform). The pure-Python path builder in
``sim`` follows the identical order, so both produce bit-identical values
from the same substream.

Between checkpoints the diffusion value is updated exactly from its
Gaussian transition law; nothing here discretizes time.
"""

import numpy as np
from numba import njit

# Below this, the closed-form variance integral degenerates to its
# zero-drift limit (avoids 0/0 at drift == 0).
TINY_EXPONENT = 1e-12


@njit(cache=True, nogil=True)
def _ou_var(lam, sig2, dt):
    if abs(lam) * dt < TINY_EXPONENT:
        return sig2 * dt
    return sig2 * (1.0 - np.exp(-2.0 * lam * dt)) / (2.0 * lam)


@njit(cache=True, nogil=True)
def _int_decay(c, dt):
    # integral of exp(-c*(dt - r)) dr over [0, dt]
    if abs(c) * dt < TINY_EXPONENT:
        return dt
    return (1.0 - np.exp(-c * dt)) / c


@njit(cache=True, nogil=True)
def sync_path_kernel(
    g, rates, cum_p, drift, sigma, cum_mu, x0, y0, y0t, horizon, times,
    out_y, out_yt, out_lam_int,
):
    """Two diffusion copies on one chain path, sharing every Gaussian draw.

    With ``y0t == y0`` this doubles as a plain single-copy sampler; the
    running drift integral is recorded alongside. ``x0 < 0`` draws the
    initial state from ``cum_mu``. Returns the final state.
    """
    x = np.int64(x0)
    if x < 0:
        x = np.searchsorted(cum_mu, g.random(), side="right")
    y = y0
    yt = y0t
    lam_int = 0.0
    t = 0.0
    idx = 0
    n_times = times.shape[0]
    while True:
        t_jump = t + g.standard_exponential() / rates[x]
        seg_end = t_jump if t_jump < horizon else horizon
        lam = drift[x]
        sig2 = sigma[x] * sigma[x]
        while idx < n_times and times[idx] <= seg_end:
            dt = times[idx] - t
            if dt > 0.0:
                dec = np.exp(-lam * dt)
                sd = np.sqrt(_ou_var(lam, sig2, dt))
                gauss = g.standard_normal()
                y = y * dec + sd * gauss
                yt = yt * dec + sd * gauss
                lam_int += lam * dt
                t = times[idx]
            out_y[idx] = y
            out_yt[idx] = yt
            out_lam_int[idx] = lam_int
            idx += 1
        dt = seg_end - t
        if dt > 0.0:
            dec = np.exp(-lam * dt)
            sd = np.sqrt(_ou_var(lam, sig2, dt))
            gauss = g.standard_normal()
            y = y * dec + sd * gauss
            yt = yt * dec + sd * gauss
            lam_int += lam * dt
            t = seg_end
        if t_jump >= horizon:
            return x
        x = np.searchsorted(cum_p[x], g.random(), side="right")


@njit(cache=True, nogil=True)
def ix_kernel(g, rates, cum_p, sigma, zero_drift, x0):
    """One draw of the Brownian integral over a zero-drift sojourn:
    sum of sigma(x) * sqrt(holding) * normal until the chain leaves the
    zero-drift set."""
    x = np.int64(x0)
    total = 0.0
    while True:
        tau = g.standard_exponential() / rates[x]
        total += sigma[x] * np.sqrt(tau) * g.standard_normal()
        x = np.searchsorted(cum_p[x], g.random(), side="right")
        if not zero_drift[x]:
            return total


@njit(cache=True, nogil=True)
def subchain_kernel(g, rates, cum_p, drift, sigma, in_m, x0, y0, out_t, out_u, out_v):
    """Record (time, state, diffusion value) at successive entrances of
    the chain into the positive-drift set. Slot 0 is the start; the
    output arrays have length ``n_entries + 1``."""
    x = np.int64(x0)
    y = y0
    t = 0.0
    out_t[0] = 0.0
    out_u[0] = x
    out_v[0] = y
    count = 0
    n_entries = out_t.shape[0] - 1
    while count < n_entries:
        tau = g.standard_exponential() / rates[x]
        lam = drift[x]
        dec = np.exp(-lam * tau)
        sd = np.sqrt(_ou_var(lam, sigma[x] * sigma[x], tau))
        y = y * dec + sd * g.standard_normal()
        t += tau
        was_in_m = in_m[x]
        x = np.searchsorted(cum_p[x], g.random(), side="right")
        if in_m[x] and not was_in_m:
            count += 1
            out_t[count] = t
            out_u[count] = x
            out_v[count] = y


@njit(cache=True, nogil=True)
def _pair_step(g, ya, yb, lama, lamb, siga, sigb, dt):
    # Exact joint update of two copies driven by one Brownian path but
    # different coefficients: the two stochastic integrals over the
    # interval are jointly Gaussian with an explicit covariance.
    vara = _ou_var(lama, siga * siga, dt)
    varb = _ou_var(lamb, sigb * sigb, dt)
    cov = siga * sigb * _int_decay(lama + lamb, dt)
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


@njit(cache=True, nogil=True)
def merge_pair_kernel(
    g, rates, cum_p, drift, sigma, x0a, x0b, y0a, y0b, horizon, times,
    out_ya, out_yb,
):
    """Two chains run independently until they first occupy the same
    state, identically afterward; both diffusion copies are driven by the
    same Brownian path throughout (increments realized on the union of
    the two jump skeletons). Returns the meeting time, or inf if the
    chains have not met by the horizon.

    Meetings can only happen at jump epochs; the check runs after every
    jump. The jumping chain always draws its next state and next holding
    in that order, so stream consumption is a deterministic function of
    the realized skeletons.
    """
    xa = np.int64(x0a)
    xb = np.int64(x0b)
    ya = y0a
    yb = y0b
    t = 0.0
    idx = 0
    n_times = times.shape[0]
    nja = g.standard_exponential() / rates[xa]
    njb = g.standard_exponential() / rates[xb]
    meeting = np.inf
    if xa == xb:
        meeting = 0.0

    while meeting == np.inf:
        te = nja if nja < njb else njb
        seg_end = te if te < horizon else horizon
        lama = drift[xa]
        lamb = drift[xb]
        siga = sigma[xa]
        sigb = sigma[xb]
        while idx < n_times and times[idx] <= seg_end:
            dt = times[idx] - t
            if dt > 0.0:
                ya, yb = _pair_step(g, ya, yb, lama, lamb, siga, sigb, dt)
                t = times[idx]
            out_ya[idx] = ya
            out_yb[idx] = yb
            idx += 1
        dt = seg_end - t
        if dt > 0.0:
            ya, yb = _pair_step(g, ya, yb, lama, lamb, siga, sigb, dt)
            t = seg_end
        if te >= horizon:
            return meeting
        if nja <= njb:
            xa = np.searchsorted(cum_p[xa], g.random(), side="right")
            nja = te + g.standard_exponential() / rates[xa]
        else:
            xb = np.searchsorted(cum_p[xb], g.random(), side="right")
            njb = te + g.standard_exponential() / rates[xb]
        if xa == xb:
            meeting = te

    # Merged phase: one skeleton (chain a's pending clock), shared draws.
    while True:
        te = nja
        seg_end = te if te < horizon else horizon
        lam = drift[xa]
        sig2 = sigma[xa] * sigma[xa]
        while idx < n_times and times[idx] <= seg_end:
            dt = times[idx] - t
            if dt > 0.0:
                dec = np.exp(-lam * dt)
                sd = np.sqrt(_ou_var(lam, sig2, dt))
                gauss = g.standard_normal()
                ya = ya * dec + sd * gauss
                yb = yb * dec + sd * gauss
                t = times[idx]
            out_ya[idx] = ya
            out_yb[idx] = yb
            idx += 1
        dt = seg_end - t
        if dt > 0.0:
            dec = np.exp(-lam * dt)
            sd = np.sqrt(_ou_var(lam, sig2, dt))
            gauss = g.standard_normal()
            ya = ya * dec + sd * gauss
            yb = yb * dec + sd * gauss
            t = seg_end
        if te >= horizon:
            return meeting
        xa = np.searchsorted(cum_p[xa], g.random(), side="right")
        nja = te + g.standard_exponential() / rates[xa]
