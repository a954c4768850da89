"""Numba implementations of the hot time-stepping kernels.

All kernels mirror the signatures in ``kernels_numpy``; the package picks
one module at import time (see ``kppfronts.backends``).
"""

import numpy as np
from numba import njit

JIT = True


@njit(cache=True, nogil=True)
def solve_tridiag(sub, dia, sup, rhs):
    """Thomas solve of a tridiagonal system; sub[0] and sup[-1] are ignored."""
    n = dia.shape[0]
    cp = np.empty(n)
    xp = np.empty(n)
    cp[0] = sup[0] / dia[0]
    xp[0] = rhs[0] / dia[0]
    for i in range(1, n):
        den = dia[i] - sub[i] * cp[i - 1]
        cp[i] = sup[i] / den
        xp[i] = (rhs[i] - sub[i] * xp[i - 1]) / den
    x = np.empty(n)
    x[n - 1] = xp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = xp[i] - cp[i] * x[i + 1]
    return x


@njit(cache=True, nogil=True)
def solve_cyclic(sub, dia, sup, rhs):
    """Solve a cyclic tridiagonal system (wraparound corners sub[0], sup[-1]).

    Sherman-Morrison with two Thomas passes fused into one sweep.
    """
    n = dia.shape[0]
    beta = sub[0]      # A[0, n-1]
    alpha = sup[n - 1]  # A[n-1, 0]
    gamma = -dia[0]

    d0 = np.empty(n)
    for i in range(n):
        d0[i] = dia[i]
    d0[0] = dia[0] - gamma
    d0[n - 1] = dia[n - 1] - alpha * beta / gamma

    # fused forward elimination for both right-hand sides
    cp = np.empty(n)
    y1 = np.empty(n)
    y2 = np.empty(n)
    u0 = gamma
    un = alpha
    cp[0] = sup[0] / d0[0]
    y1[0] = rhs[0] / d0[0]
    y2[0] = u0 / d0[0]
    for i in range(1, n):
        den = d0[i] - sub[i] * cp[i - 1]
        cp[i] = sup[i] / den
        ui = un if i == n - 1 else 0.0
        y1[i] = (rhs[i] - sub[i] * y1[i - 1]) / den
        y2[i] = (ui - sub[i] * y2[i - 1]) / den
    x1 = np.empty(n)
    x2 = np.empty(n)
    x1[n - 1] = y1[n - 1]
    x2[n - 1] = y2[n - 1]
    for i in range(n - 2, -1, -1):
        x1[i] = y1[i] - cp[i] * x1[i + 1]
        x2[i] = y2[i] - cp[i] * x2[i + 1]

    # correction x = x1 - x2 * (v . x1) / (1 + v . x2), v = e0 + (beta/gamma) e_{n-1}
    fac = (x1[0] + beta / gamma * x1[n - 1]) / (1.0 + x2[0] + beta / gamma * x2[n - 1])
    x = np.empty(n)
    for i in range(n):
        x[i] = x1[i] - fac * x2[i]
    return x


@njit(cache=True, nogil=True)
def _cell_step(eta, arow, brow, rrow, dx, dt, sub, dia, sup, rhs):
    """One Crank-Nicolson step of d_t eta = a eta_xx - b eta_x on the periodic
    cell, followed by exact integration of the zeroth-order term r."""
    n = eta.shape[0]
    dx2 = dx * dx
    half = 0.5 * dt
    for j in range(n):
        cdiff = arow[j] / dx2
        cadv = brow[j] / (2.0 * dx)
        wm = cdiff + cadv
        wp = cdiff - cadv
        w0 = -2.0 * cdiff
        jm = j - 1 if j > 0 else n - 1
        jp = j + 1 if j < n - 1 else 0
        rhs[j] = eta[j] + half * (wm * eta[jm] + w0 * eta[j] + wp * eta[jp])
        sub[j] = -half * wm
        dia[j] = 1.0 - half * w0
        sup[j] = -half * wp
    out = solve_cyclic(sub, dia, sup, rhs)
    for j in range(n):
        eta[j] = out[j] * np.exp(dt * rrow[j])


@njit(cache=True, nogil=True)
def evolve_cell_chunk(eta, a, b, r, dx, dt, steps):
    """Advance the periodic-cell state ``steps`` times in place.

    a, b, r have shape (steps, n) or (1, n); row 0 is reused when the
    coefficients do not depend on time.
    """
    n = eta.shape[0]
    sub = np.empty(n)
    dia = np.empty(n)
    sup = np.empty(n)
    rhs = np.empty(n)
    for k in range(steps):
        ka = k if a.shape[0] > 1 else 0
        kb = k if b.shape[0] > 1 else 0
        kr = k if r.shape[0] > 1 else 0
        _cell_step(eta, a[ka], b[kb], r[kr], dx, dt, sub, dia, sup, rhs)


@njit(cache=True, nogil=True)
def evolve_cell_chunk_trace(eta, a, b, r, dx, dt, steps, lognorm, minratio, profiles):
    """Like evolve_cell_chunk but renormalizes after every step, recording the
    accumulated log sup-norm and the per-step min/max ratio.

    ``profiles`` receives the normalized state after each step when its first
    dimension equals ``steps``; pass a (0, n) array to skip storage.
    """
    n = eta.shape[0]
    sub = np.empty(n)
    dia = np.empty(n)
    sup = np.empty(n)
    rhs = np.empty(n)
    acc = 0.0
    keep = profiles.shape[0] == steps
    for k in range(steps):
        ka = k if a.shape[0] > 1 else 0
        kb = k if b.shape[0] > 1 else 0
        kr = k if r.shape[0] > 1 else 0
        _cell_step(eta, a[ka], b[kb], r[kr], dx, dt, sub, dia, sup, rhs)
        s = eta[0]
        m = eta[0]
        for j in range(1, n):
            if eta[j] > s:
                s = eta[j]
            if eta[j] < m:
                m = eta[j]
        acc += np.log(s)
        lognorm[k] = acc
        minratio[k] = m / s
        for j in range(n):
            eta[j] = eta[j] / s
        if keep:
            for j in range(n):
                profiles[k, j] = eta[j]


@njit(cache=True, nogil=True)
def _line_step(u, arow, brow, frow, dx, dt, left, right, sub, dia, sup, rhs):
    """One IMEX step on the Dirichlet line: CN for a u_xx - b u_x, explicit
    reaction values frow (already evaluated at the current state).

    Returns the total clipping magnitude of the step.
    """
    n = u.shape[0]
    dx2 = dx * dx
    half = 0.5 * dt
    sub[0] = 0.0
    dia[0] = 1.0
    sup[0] = 0.0
    rhs[0] = left
    for j in range(1, n - 1):
        cdiff = arow[j] / dx2
        cadv = brow[j] / (2.0 * dx)
        wm = cdiff + cadv
        wp = cdiff - cadv
        w0 = -2.0 * cdiff
        rhs[j] = u[j] + half * (wm * u[j - 1] + w0 * u[j] + wp * u[j + 1]) + dt * frow[j]
        sub[j] = -half * wm
        dia[j] = 1.0 - half * w0
        sup[j] = -half * wp
    sub[n - 1] = 0.0
    dia[n - 1] = 1.0
    sup[n - 1] = 0.0
    rhs[n - 1] = right
    out = solve_tridiag(sub, dia, sup, rhs)
    clip = 0.0
    for j in range(n):
        v = out[j]
        if v < 0.0:
            clip += -v
            v = 0.0
        elif v > 1.0:
            clip += v - 1.0
            v = 1.0
        u[j] = v
    u[0] = left
    u[n - 1] = right
    return clip


@njit(cache=True, nogil=True)
def evolve_line_chunk(u, a, b, mu, dx, dt, steps, left, right):
    """Advance the line state ``steps`` times with logistic reaction
    mu * u * (1 - u). Returns (total clip, max clip in one step)."""
    n = u.shape[0]
    sub = np.empty(n)
    dia = np.empty(n)
    sup = np.empty(n)
    rhs = np.empty(n)
    frow = np.empty(n)
    clip_total = 0.0
    clip_max = 0.0
    for k in range(steps):
        ka = k if a.shape[0] > 1 else 0
        kb = k if b.shape[0] > 1 else 0
        km = k if mu.shape[0] > 1 else 0
        murow = mu[km]
        for j in range(n):
            frow[j] = murow[j] * u[j] * (1.0 - u[j])
        c = _line_step(u, a[ka], b[kb], frow, dx, dt, left, right, sub, dia, sup, rhs)
        clip_total += c
        if c > clip_max:
            clip_max = c
    return clip_total, clip_max


@njit(cache=True, nogil=True)
def step_line_explicit(u, arow, brow, frow, dx, dt, left, right):
    """Single IMEX line step with an arbitrary pre-evaluated reaction row."""
    n = u.shape[0]
    sub = np.empty(n)
    dia = np.empty(n)
    sup = np.empty(n)
    rhs = np.empty(n)
    return _line_step(u, arow, brow, frow, dx, dt, left, right, sub, dia, sup, rhs)
