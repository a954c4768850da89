"""Pure numpy/scipy fallback for the hot kernels.

Same signatures and semantics as ``kernels_numba``; used when numba is
unavailable or when KPPFRONTS_BACKEND=numpy is set. The per-step linear
algebra goes through LAPACK (scipy.linalg.solve_banded) so the fallback
stays usable, just slower.
"""

import numpy as np
from scipy.linalg import solve_banded

JIT = False


def _banded(sub, dia, sup):
    n = dia.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = sup[:-1]
    ab[1, :] = dia
    ab[2, :-1] = sub[1:]
    return ab


def solve_tridiag(sub, dia, sup, rhs):
    """Tridiagonal solve; sub[0] and sup[-1] are ignored."""
    return solve_banded((1, 1), _banded(sub, dia, sup), rhs)


def solve_cyclic(sub, dia, sup, rhs):
    """Cyclic tridiagonal solve via Sherman-Morrison on top of solve_banded."""
    n = dia.shape[0]
    beta = sub[0]
    alpha = sup[n - 1]
    gamma = -dia[0]
    d0 = dia.copy()
    d0[0] = dia[0] - gamma
    d0[n - 1] = dia[n - 1] - alpha * beta / gamma
    ab = _banded(sub, d0, sup)
    u = np.zeros(n)
    u[0] = gamma
    u[n - 1] = alpha
    x12 = solve_banded((1, 1), ab, np.column_stack([rhs, u]))
    x1, x2 = x12[:, 0], x12[:, 1]
    fac = (x1[0] + beta / gamma * x1[n - 1]) / (1.0 + x2[0] + beta / gamma * x2[n - 1])
    return x1 - fac * x2


def _cell_weights(arow, brow, dx):
    cdiff = arow / (dx * dx)
    cadv = brow / (2.0 * dx)
    return cdiff + cadv, -2.0 * cdiff, cdiff - cadv


def _cell_step(eta, arow, brow, rrow, dx, dt):
    wm, w0, wp = _cell_weights(arow, brow, dx)
    half = 0.5 * dt
    rhs = eta + half * (wm * np.roll(eta, 1) + w0 * eta + wp * np.roll(eta, -1))
    out = solve_cyclic(-half * wm, 1.0 - half * w0, -half * wp, rhs)
    return out * np.exp(dt * rrow)


def _row(arr, k):
    return arr[k if arr.shape[0] > 1 else 0]


def evolve_cell_chunk(eta, a, b, r, dx, dt, steps):
    for k in range(steps):
        eta[:] = _cell_step(eta, _row(a, k), _row(b, k), _row(r, k), dx, dt)


def evolve_cell_chunk_trace(eta, a, b, r, dx, dt, steps, lognorm, minratio, profiles):
    acc = 0.0
    keep = profiles.shape[0] == steps
    for k in range(steps):
        eta[:] = _cell_step(eta, _row(a, k), _row(b, k), _row(r, k), dx, dt)
        s = eta.max()
        acc += np.log(s)
        lognorm[k] = acc
        minratio[k] = eta.min() / s
        eta /= s
        if keep:
            profiles[k] = eta


def _line_step(u, arow, brow, frow, dx, dt, left, right):
    n = u.shape[0]
    wm, w0, wp = _cell_weights(arow, brow, dx)
    half = 0.5 * dt
    rhs = np.empty(n)
    rhs[1:-1] = (u[1:-1] + half * (wm[1:-1] * u[:-2] + w0[1:-1] * u[1:-1]
                                   + wp[1:-1] * u[2:]) + dt * frow[1:-1])
    rhs[0] = left
    rhs[n - 1] = right
    sub = np.zeros(n)
    dia = np.ones(n)
    sup = np.zeros(n)
    sub[1:-1] = -half * wm[1:-1]
    dia[1:-1] = 1.0 - half * w0[1:-1]
    sup[1:-1] = -half * wp[1:-1]
    out = solve_tridiag(sub, dia, sup, rhs)
    clipped = np.clip(out, 0.0, 1.0)
    clip = float(np.abs(out - clipped).sum())
    u[:] = clipped
    u[0] = left
    u[n - 1] = right
    return clip


def evolve_line_chunk(u, a, b, mu, dx, dt, steps, left, right):
    clip_total = 0.0
    clip_max = 0.0
    for k in range(steps):
        murow = _row(mu, k)
        frow = murow * u * (1.0 - u)
        c = _line_step(u, _row(a, k), _row(b, k), frow, dx, dt, left, right)
        clip_total += c
        clip_max = max(clip_max, c)
    return clip_total, clip_max


def step_line_explicit(u, arow, brow, frow, dx, dt, left, right):
    return _line_step(u, arow, brow, frow, dx, dt, left, right)
