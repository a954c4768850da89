"""Speed curve lam -> least mean of c_lam, the critical decay rate via the
decreasing-difference criterion, the critical speed, and the Floquet /
generalized-eigenvalue cross checks.

The membership criterion for the decreasing range is evaluated with three
shrinking probe offsets k0, k0/2, k0/4: lam belongs when the least mean of
the speed difference clears a positive margin at all three. The margin is
delta_tol per unit offset (delta_tol * k for probe k): a fixed absolute
margin would bias the detected critical rate left by about
delta_tol / (2 k_min) near the minimum of the speed curve. The reported
indicator columns are the one-sided differences c_lam - c_{lam+k}; the
bisection itself compares c_{lam-k/2} against c_{lam+k/2}, since the
one-sided probe shifts the detected flip left by k/2 while the centered
one is accurate to O(k^2).

Two drift conventions are computed for the eigenvalue bound: the periodic
eigenproblem behind the speed curve uses drift q + 2 lam a, while the
operator defining the non-existence bound is written with q - 2 lam a.
They coincide for x-symmetric or x-independent data; both are reported.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import means
from .backends import kernels
from .coefficients import make_builtin
from .eta import EtaError, compute_eta
from .parabolic import CellGrid, cell_rows

DEFAULT_K0 = 0.05
DEFAULT_DELTA_TOL = 1e-3
FLOQUET_PROFILE_TOL = 1e-8
FLOQUET_MAX_PERIODS = 500


class SpeedAnalysisError(RuntimeError):
    pass


@dataclass
class SpeedCurve:
    lambda_grid: np.ndarray
    lm_c: np.ndarray
    um_c: np.ndarray
    D: np.ndarray                  # (n_lambda, 3) least means of c_lam - c_{lam+k}
    probe_offsets: tuple
    horizon: int
    burn_in: int
    grid: CellGrid
    T_max: Optional[float] = None
    lambda_star: Optional[float] = None
    c_star: Optional[float] = None
    delta_tol: float = DEFAULT_DELTA_TOL
    warnings: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def in_range(self, i):
        """Membership indicator at grid index i: positive margin at all probes."""
        return bool(np.all(self.D[i] > self.delta_tol * np.asarray(self.probe_offsets)))


def _lambda_job(cf, lam, horizon, burn_in, grid, offsets, T_max):
    es = compute_eta(cf, lam, horizon, burn_in=burn_in, grid=grid)
    lm = means.least_mean(es.speed_samples(), T_max).value
    um = means.upper_mean(es.speed_samples(), T_max).value
    D = np.empty(len(offsets))
    for j, k in enumerate(offsets):
        es_k = compute_eta(cf, lam + k, horizon, burn_in=burn_in, grid=grid)
        diff = means.SampledFunction(1.0, es.c_samples - es_k.c_samples)
        D[j] = means.least_mean(diff, T_max).value
    return lm, um, D


def speed_curve(cf, lambda_grid, horizon, grid: CellGrid, burn_in: int = 20,
                k0: float = DEFAULT_K0, T_max=None, threads: int = 1,
                delta_tol: float = DEFAULT_DELTA_TOL) -> SpeedCurve:
    """Least/upper means of c_lam and decreasing-difference indicators on a
    lambda grid. Failures at individual lambdas are recorded (NaN rows) and
    the remaining grid points still complete."""
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    if lambda_grid.ndim != 1 or lambda_grid.size < 2:
        raise SpeedAnalysisError("lambda_grid must hold at least two rates")
    if np.any(lambda_grid <= 0) or np.any(np.diff(lambda_grid) <= 0):
        raise SpeedAnalysisError("lambda_grid must be positive and increasing")
    offsets = (k0, k0 / 2, k0 / 4)
    sc = SpeedCurve(
        lambda_grid=lambda_grid,
        lm_c=np.full(lambda_grid.size, np.nan),
        um_c=np.full(lambda_grid.size, np.nan),
        D=np.full((lambda_grid.size, 3), np.nan),
        probe_offsets=offsets, horizon=int(horizon), burn_in=int(burn_in),
        grid=grid, T_max=T_max, delta_tol=delta_tol,
    )

    def run(i):
        return _lambda_job(cf, lambda_grid[i], horizon, burn_in, grid, offsets, T_max)

    indices = range(lambda_grid.size)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda i: _guard(run, i), indices))
    else:
        results = [_guard(run, i) for i in indices]
    for i, res in enumerate(results):
        if isinstance(res, Exception):
            sc.failures.append((float(lambda_grid[i]), str(res)))
            continue
        sc.lm_c[i], sc.um_c[i], sc.D[i] = res
    return sc


def _guard(fn, i):
    try:
        return fn(i)
    except EtaError as e:  # keep going on the other rates
        return e


def find_lambda_star(sc: SpeedCurve, cf, refine_tol: float,
                     delta_tol: Optional[float] = None):
    """Bisect the membership predicate down to ``refine_tol`` and recompute
    the critical speed at the located rate. Fills sc.lambda_star / sc.c_star."""
    if delta_tol is None:
        delta_tol = sc.delta_tol
    ks = np.asarray(sc.probe_offsets)

    def c_at(lam):
        return compute_eta(cf, lam, sc.horizon, burn_in=sc.burn_in,
                           grid=sc.grid).c_samples

    def pred(lam):
        for k in ks:
            lo = lam - 0.5 * k
            if lo <= 0:  # centered probe leaves (0, inf); fall back one-sided
                lo = lam
            diff = means.SampledFunction(1.0, c_at(lo) - c_at(lo + k))
            if means.least_mean(diff, sc.T_max).value <= delta_tol * k:
                return False
        return True

    margins = sc.D - delta_tol * ks[None, :]
    member = np.all(margins > 0, axis=1) & np.all(np.isfinite(sc.D), axis=1)
    outside = np.all(margins <= 0, axis=1) & np.all(np.isfinite(sc.D), axis=1)
    if not member.any():
        raise SpeedAnalysisError(
            "no grid rate is inside the decreasing range; extend the grid "
            "toward smaller lambda (the envelope bounds guarantee membership there)")
    lo_i = int(np.flatnonzero(member).max())
    above = np.flatnonzero(outside & (np.arange(outside.size) > lo_i))
    if above.size == 0:
        raise SpeedAnalysisError(
            "no grid rate is outside the decreasing range with all probes "
            "agreeing; extend the grid toward larger lambda")
    hi_i = int(above.min())
    lo, hi = float(sc.lambda_grid[lo_i]), float(sc.lambda_grid[hi_i])

    while hi - lo > refine_tol:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    lambda_star = 0.5 * (lo + hi)
    es = compute_eta(cf, lambda_star, sc.horizon, burn_in=sc.burn_in, grid=sc.grid)
    c_star = means.least_mean(es.speed_samples(), sc.T_max).value
    sc.lambda_star = lambda_star
    sc.c_star = c_star
    return lambda_star, c_star


@dataclass
class FloquetResult:
    k: float
    periods: int
    profile_gap: float


def floquet_k(cf, lam: float, grid: CellGrid, time_period: Optional[float] = None,
              drift_sign: float = 1.0, profile_tol: float = FLOQUET_PROFILE_TOL,
              max_periods: int = FLOQUET_MAX_PERIODS) -> FloquetResult:
    """Principal Floquet exponent of the periodic-cell linear evolution:
    log growth of the sup norm per time period once the normalized period
    map has reached a fixed point.

    Requires time-periodic coefficients with a declared period (constant-in-
    time data declares period 1).
    """
    T_p = cf.time_period if time_period is None else time_period
    if T_p is None:
        raise SpeedAnalysisError(
            "Floquet eigenvalues need time-periodic coefficients with a "
            "declared time_period")
    if lam < 0:
        raise SpeedAnalysisError("lam must be nonnegative")
    m_p = max(1, int(round(T_p / grid.dt)))
    dt_p = T_p / m_p
    # one period of coefficient rows serves every iterate
    a, b, r = cell_rows(cf, grid, lam, 0.0, m_p, drift_sign=drift_sign, dt=dt_p)
    state = np.ones(grid.n_x)
    lognorm = np.empty(m_p)
    minr = np.empty(m_p)
    dummy = np.empty((0, grid.n_x))
    prev = np.empty_like(state)
    for period in range(1, max_periods + 1):
        prev[:] = state
        kernels.evolve_cell_chunk_trace(state, a, b, r, grid.dx, dt_p, m_p,
                                        lognorm, minr, dummy)
        gap = float(np.abs(state - prev).max())
        if gap < profile_tol:
            return FloquetResult(k=float(lognorm[m_p - 1] / T_p), periods=period,
                                 profile_gap=gap)
    raise SpeedAnalysisError(
        f"period map did not converge after {max_periods} periods (gap {gap:.2e})")


@dataclass
class EigenCurve:
    lambda_grid: np.ndarray
    k_vals: np.ndarray           # Floquet exponents, drift q + 2 lam a
    kappa_vals: np.ndarray       # generalized principal eigenvalues, drift q - 2 lam a
    kappa_plus_vals: np.ndarray  # the q + 2 lam a variant (= -k_vals)
    c_star_floquet: float        # min over lam of k(lam)/lam
    c_star_lower: float          # -max over lam of kappa(lam)/lam
    lambda_floquet_min: float
    lambda_kappa_max: float
    warnings: list = field(default_factory=list)


def _golden_min(f, a, b, rel_tol=1e-3):
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = b - phi * (b - a)
    x2 = a + phi * (b - a)
    f1, f2 = f(x1), f(x2)
    while (b - a) > rel_tol * max(abs(a), abs(b)):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - phi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + phi * (b - a)
            f2 = f(x2)
    xm = 0.5 * (a + b)
    return xm, f(xm)


def _refined_min(vals, grid_pts, f):
    i = int(np.nanargmin(vals))
    a = grid_pts[max(i - 1, 0)]
    b = grid_pts[min(i + 1, grid_pts.size - 1)]
    if a == b:
        return float(grid_pts[i]), float(vals[i])
    return _golden_min(f, a, b)


def kappa_curve(cf, lambda_grid, grid: CellGrid, time_period=None,
                phi1_rtol=1e-3) -> EigenCurve:
    """Both eigenvalue curves and the non-existence speed bound.

    kappa(lam) is minus the Floquet exponent of the evolution with drift
    q - 2 lam a (the operator of the non-existence bound); the variant with
    drift q + 2 lam a equals minus the speed-curve exponent k(lam) and is
    reported alongside. The test-function bound
    kappa <= -a_min lam^2 + q_sup lam - inf mu is checked on every grid
    point."""
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    k_vals = np.empty(lambda_grid.size)
    k_minus = np.empty(lambda_grid.size)
    for i, lam in enumerate(lambda_grid):
        k_vals[i] = floquet_k(cf, lam, grid, time_period, drift_sign=1.0).k
        k_minus[i] = floquet_k(cf, lam, grid, time_period, drift_sign=-1.0).k
    kappa_vals = -k_minus
    warnings = []
    bound = -cf.alpha_lower * lambda_grid ** 2 + cf.q_sup * lambda_grid - cf.mu_inf
    viol = kappa_vals - bound
    worst = float(viol.max())
    if worst > phi1_rtol * max(1.0, float(np.abs(bound).max())):
        warnings.append(f"test-function eigenvalue bound violated by {worst:.2e}")

    lam_f, c_f = _refined_min(k_vals / lambda_grid, lambda_grid,
                              lambda l: floquet_k(cf, l, grid, time_period, 1.0).k / l)
    lam_k, c_k = _refined_min(k_minus / lambda_grid, lambda_grid,
                              lambda l: floquet_k(cf, l, grid, time_period, -1.0).k / l)
    return EigenCurve(
        lambda_grid=lambda_grid, k_vals=k_vals, kappa_vals=kappa_vals,
        kappa_plus_vals=-k_vals, c_star_floquet=float(c_f), c_star_lower=float(c_k),
        lambda_floquet_min=float(lam_f), lambda_kappa_max=float(lam_k),
        warnings=warnings,
    )


def default_lambda_grid(cf, n: int = 24, span=(0.1, 10.0), horizon: float = 200.0):
    """Geometric grid around lam_hat = sqrt(least mean of min_x mu / a_min),
    wide enough that the membership transition is bracketed."""
    lm = least_mean_of_mu_min(cf, horizon)
    if lm <= 0:
        raise SpeedAnalysisError(
            f"least mean of min_x mu is {lm:.3g}; the speed pipeline needs it positive")
    lam_hat = float(np.sqrt(lm / cf.alpha_lower))
    return np.geomspace(span[0] * lam_hat, span[1] * lam_hat, n), lam_hat


def least_mean_of_mu_min(cf, horizon: float = 200.0, h: float = 0.05) -> float:
    ts = np.arange(int(round(horizon / h))) * h
    vals = np.asarray(cf.mu_min_fn(ts), dtype=float)
    return means.least_mean(means.SampledFunction(h, vals)).value


@dataclass
class OracleResult:
    family: str
    lambda_star: float
    c_star: float
    c_lambda: str
    details: dict = field(default_factory=dict)


def oracle(family: str, params: dict, horizon: float = 400.0, h: float = 0.01) -> OracleResult:
    """Closed-form critical values for the worked special cases.

    The means entering the formulas are computed numerically by the means
    module on finely sampled coefficient expressions."""
    params = dict(params or {})
    if family == "homogeneous":
        mu0 = float(params["mu0"])
        return OracleResult(family, float(np.sqrt(mu0)), float(2.0 * np.sqrt(mu0)),
                            "c_lambda = lambda + mu0 / lambda", {"mu0": mu0})
    if family in ("time_only", "time_periodic"):
        cf, _ = make_builtin("time_only", {"mu": params["mu"]})
        ts = np.arange(int(round(horizon / h))) * h
        vals = np.asarray(cf.mu(0.0, ts), dtype=float)
        lm = means.least_mean(means.SampledFunction(h, vals)).value
        if lm <= 0:
            raise SpeedAnalysisError("least mean of mu must be positive")
        return OracleResult(family, float(np.sqrt(lm)), float(2.0 * np.sqrt(lm)),
                            "c_lambda(t) = lambda + mu(t) / lambda",
                            {"least_mean_mu": lm})
    if family == "advection_time":
        mu0 = float(params["mu0"])
        if mu0 <= 0:
            raise SpeedAnalysisError("mu0 must be positive")
        from . import expr as ex
        q_node = ex.parse(str(params.get("q", "0")))
        ts = np.arange(int(round(horizon / h))) * h
        q_vals = np.broadcast_to(np.asarray(ex.evaluate(q_node, t=ts), dtype=float),
                                 ts.shape)
        um = means.upper_mean(means.SampledFunction(h, q_vals.copy())).value
        return OracleResult(family, float(np.sqrt(mu0)),
                            float(2.0 * np.sqrt(mu0) - um),
                            "c_lambda(t) = lambda - q(t) + mu0 / lambda",
                            {"upper_mean_q": um, "mu0": mu0})
    raise SpeedAnalysisError(f"no closed-form oracle for family {family!r}")
