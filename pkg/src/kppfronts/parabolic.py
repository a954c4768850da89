"""Finite-difference steppers for the two parabolic problems.

* the linear x-periodic cell problem
      d_t eta = a eta_xx - (q + 2 lam a) eta_x + (mu + lam^2 a + lam q) eta,
  advanced by a Crank-Nicolson step for diffusion + drift (cyclic
  tridiagonal solve, central differences) with the zeroth-order term
  integrated exactly at its frozen half-step value;

* the nonlinear Fisher-KPP problem on a truncated line with Dirichlet data
  1 (left) / 0 (right), advanced IMEX: CN for the linear part, explicit
  reaction at the current state, output clipped to [0, 1] with the clipping
  magnitude reported.

Central differences keep the drift second order; upwinding would pollute
the exponential growth rates that define the wave speeds. CN is
unconditionally stable; the monotonicity bound
dt <= min(dx^2 / (2 a_max), dx / max|q + 2 lam a|) under which the step is
positivity- and order-preserving is recorded on the grid, not enforced
(production runs use accuracy-driven dt, the comparison/positivity
guarantees are claimed below the recorded bound only).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .backends import kernels

EPS_CLIP = 1e-10
CLIP_STEP_LIMIT = 1e-6


class ParabolicError(RuntimeError):
    pass


@dataclass(frozen=True)
class CellGrid:
    """Uniform periodic grid on one spatial period, with time step dt.

    dt is snapped so that a unit time interval is a whole number of steps
    (the eta renormalization and the speed samples live on integer times).

    Keep dt <= dx for long cell runs: CN is not L-stable, so for
    dt >> dx^2 the Nyquist-mode cluster is barely damped and the
    x-dependent zeroth-order term pumps it at a rate ~ dt |mu_osc| / 2 per
    step, a slow instability that surfaces only after O(100) time units.
    ``default_cell_grid`` builds a grid honoring this.
    """
    n_x: int
    period_l: float
    dt: float
    monotone_dt: Optional[float] = None

    def __post_init__(self):
        if self.n_x < 32:
            raise ParabolicError("cell grid needs n_x >= 32")
        if self.dt <= 0:
            raise ParabolicError("dt must be positive")
        steps = max(1, int(round(1.0 / self.dt)))
        object.__setattr__(self, "dt", 1.0 / steps)

    @property
    def steps_per_unit(self) -> int:
        return int(round(1.0 / self.dt))

    @property
    def dx(self) -> float:
        return self.period_l / self.n_x

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_x) * self.dx

    def with_monotone_bound(self, cf, lam_max):
        """Record the monotonicity bound for drifts up to q + 2 lam_max a."""
        drift = cf.q_sup + 2.0 * lam_max * cf.alpha_upper
        bound = self.dx ** 2 / (2.0 * cf.alpha_upper)
        if drift > 0:
            bound = min(bound, self.dx / drift)
        return replace(self, monotone_dt=bound)

    @property
    def dt_is_monotone(self):
        return self.monotone_dt is not None and self.dt <= self.monotone_dt


def default_cell_grid(cf, n_x: int = 128, steps_per_unit: Optional[int] = None,
                      lam_max: float = 10.0) -> CellGrid:
    """Cell grid with dt at or below dx (see the CellGrid note) and the
    monotonicity bound recorded for drifts up to 2 lam_max a + q."""
    if steps_per_unit is None:
        steps_per_unit = max(64, int(np.ceil(n_x / cf.period_l)))
    grid = CellGrid(n_x=n_x, period_l=cf.period_l, dt=1.0 / steps_per_unit)
    return grid.with_monotone_bound(cf, lam_max)


@dataclass(frozen=True)
class LineGrid:
    """Truncated-line grid with Dirichlet values 1 (left) and 0 (right)."""
    x_min: float
    x_max: float
    n_x: int
    dt: float
    bc_left: float = 1.0
    bc_right: float = 0.0

    def __post_init__(self):
        if self.x_max <= self.x_min:
            raise ParabolicError("x_max must exceed x_min")
        if self.n_x < 16:
            raise ParabolicError("line grid needs n_x >= 16")
        if self.dt <= 0:
            raise ParabolicError("dt must be positive")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x)


def check_line_domain(grid: LineGrid, c_max: float, T_sim: float,
                      diffusion_length: float, margin_lengths: float = 20.0):
    """Domain-width guard: the front must never feel the right boundary."""
    margin = margin_lengths * diffusion_length
    need = c_max * T_sim + margin
    width = grid.x_max - grid.x_min
    if width < need:
        raise ParabolicError(
            f"line domain width {width:.3g} too small for c_max*T_sim + margin = {need:.3g}")


@dataclass
class StateVector:
    """Grid values at one time level."""
    values: np.ndarray
    t: float
    clip: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ParabolicError("state contains non-finite values")

    def check_unit_range(self):
        lo = float(self.values.min())
        hi = float(self.values.max())
        if lo < -EPS_CLIP or hi > 1.0 + EPS_CLIP:
            raise ParabolicError(f"state outside [0,1] beyond eps_clip: [{lo}, {hi}]")


def cell_rows(cf, grid: CellGrid, lam: float, t0: float, steps: int,
              drift_sign: float = 1.0, dt: Optional[float] = None):
    """Coefficient rows a, b = q + sign 2 lam a, r = mu + lam^2 a + lam q at
    the half-step times of [t0, t0 + steps*dt].

    The rows are the per-chunk memoization of the coefficient expressions:
    one dense evaluation per chunk, shape (steps, n) for time-dependent data
    and (1, n) otherwise.
    """
    if dt is None:
        dt = grid.dt
    x = grid.x[None, :]
    if cf.t_dependent:
        th = (t0 + (np.arange(steps) + 0.5) * dt)[:, None]
    else:
        th = np.array([[t0]])
    a = np.ascontiguousarray(cf.a(x, th))
    q = np.ascontiguousarray(cf.q(x, th))
    mu = np.ascontiguousarray(cf.mu(x, th))
    b = q + drift_sign * 2.0 * lam * a
    r = mu + lam * lam * a + lam * q
    return a, np.ascontiguousarray(b), np.ascontiguousarray(r)


def line_rows(cf, grid: LineGrid, t0: float, steps: int):
    """Coefficient rows a, drift q and growth mu on the line grid."""
    x = grid.x[None, :]
    if cf.t_dependent:
        th = (t0 + (np.arange(steps) + 0.5) * grid.dt)[:, None]
    else:
        th = np.array([[t0]])
    a = np.ascontiguousarray(cf.a(x, th))
    q = np.ascontiguousarray(cf.q(x, th))
    mu = np.ascontiguousarray(cf.mu(x, th))
    return a, q, mu


def step_linear_cell(state: StateVector, grid: CellGrid, cf, lam: float,
                     t: Optional[float] = None) -> StateVector:
    """One CN + exponential step of the linear cell problem."""
    if lam < 0:
        raise ParabolicError("lam must be nonnegative")
    if state.values.min() <= 0:
        raise ParabolicError("linear cell state must be strictly positive")
    t0 = state.t if t is None else t
    a, b, r = cell_rows(cf, grid, lam, t0, 1)
    vals = state.values.copy()
    kernels.evolve_cell_chunk(vals, a, b, r, grid.dx, grid.dt, 1)
    if not np.all(np.isfinite(vals)):
        raise ParabolicError("linear cell step produced non-finite values; reduce dt")
    if vals.min() <= 0:
        raise ParabolicError(
            f"linear cell step lost positivity (dt = {grid.dt:.3g}; "
            f"recorded monotone bound {grid.monotone_dt}); reduce dt")
    return StateVector(vals, t0 + grid.dt)


def step_nonlinear_line(state: StateVector, grid: LineGrid, cf, rt,
                        t: Optional[float] = None) -> StateVector:
    """One IMEX step of the nonlinear problem; Dirichlet values re-imposed,
    output clipped to [0, 1] with the clipped mass reported on the state."""
    state.check_unit_range()
    t0 = state.t if t is None else t
    vals = np.clip(state.values, 0.0, 1.0)
    a, q, mu = line_rows(cf, grid, t0, 1)
    if rt.kind == "logistic":
        clip, _ = kernels.evolve_line_chunk(vals, a, q, mu, grid.dx, grid.dt, 1,
                                            grid.bc_left, grid.bc_right)
    else:
        th = t0 + 0.5 * grid.dt
        fvals = np.ascontiguousarray(rt.f(grid.x, th, vals))
        clip = kernels.step_line_explicit(vals, a[0], q[0], fvals, grid.dx, grid.dt,
                                          grid.bc_left, grid.bc_right)
    if clip > CLIP_STEP_LIMIT:
        raise ParabolicError(f"clipped {clip:.3g} in one step; dt too large")
    return StateVector(vals, t0 + grid.dt, clip=float(clip))


@dataclass
class PiecewiseCandidate:
    """Function of (x, t) built from smooth pieces; ``piece`` labels which
    piece is active so stencils straddling an interface can be masked."""
    value: Callable
    piece: Callable = field(default=None)

    def labels(self, x, t):
        if self.piece is None:
            return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(t)), dtype=np.int64)
        return self.piece(x, t)


@dataclass
class ResidualField:
    x: np.ndarray
    t: np.ndarray
    values: np.ndarray        # masked entries are NaN
    interface_mask: np.ndarray
    labels: np.ndarray        # candidate piece label at each interior node
    min_unmasked: float
    max_unmasked: float
    n_masked: int


def residual(candidate: PiecewiseCandidate, window, grid: LineGrid, cf, rt) -> ResidualField:
    """Discrete residual d_t w - a w_xx + q w_x - f(x,t,w) of a candidate
    sub/supersolution, by centered differences on the smooth pieces.

    Interface cells, where the candidate's piece label changes anywhere in
    the finite-difference stencil, are masked and reported separately.
    """
    t0, t1 = window
    n_t = int(round((t1 - t0) / grid.dt)) + 1
    times = t0 + np.arange(n_t) * grid.dt
    x = grid.x
    W = np.empty((n_t, x.size))
    L = np.empty((n_t, x.size), dtype=np.int64)
    for k, tk in enumerate(times):
        W[k] = candidate.value(x, tk)
        L[k] = candidate.labels(x, tk)

    dt, dx = grid.dt, grid.dx
    wt = (W[2:, 1:-1] - W[:-2, 1:-1]) / (2.0 * dt)
    wx = (W[1:-1, 2:] - W[1:-1, :-2]) / (2.0 * dx)
    wxx = (W[1:-1, 2:] - 2.0 * W[1:-1, 1:-1] + W[1:-1, :-2]) / dx ** 2

    ti = times[1:-1]
    xi = x[1:-1]
    a = cf.a(xi[None, :], ti[:, None])
    q = cf.q(xi[None, :], ti[:, None])
    fvals = np.empty_like(wt)
    for k, tk in enumerate(ti):
        fvals[k] = rt.f(xi, tk, W[k + 1, 1:-1])
    res = wt - a * wxx + q * wx - fvals

    center = L[1:-1, 1:-1]
    mask = ((L[:-2, 1:-1] != center) | (L[2:, 1:-1] != center)
            | (L[1:-1, :-2] != center) | (L[1:-1, 2:] != center))
    vals = res.copy()
    vals[mask] = np.nan
    unmasked = res[~mask]
    return ResidualField(
        x=xi, t=ti, values=vals, interface_mask=mask, labels=center,
        min_unmasked=float(unmasked.min()) if unmasked.size else np.nan,
        max_unmasked=float(unmasked.max()) if unmasked.size else np.nan,
        n_masked=int(mask.sum()),
    )
