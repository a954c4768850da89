"""The x-periodic entire solution eta_lam of the linearized equation, its
Lipschitz log-norm surrogate S_lam, the speed samples c_lam and the Harnack
diagnostics.

Integration starts from constant data at time -B and only t in [0, H] is
retained; the finite burn-in B approximates the entire solution obtained
as a limit from initial times going to -infinity, and is doubled
automatically until two different positive initial profiles agree at
t = 0. The state is renormalized by its sup after every
step (the accumulated log of the sup norms is the quantity of interest);
S_lam(n) is the accumulated (1/lam) log sup at integer times, anchored at
S_lam(0) = 0, and c_lam is stored as the unit-interval averages
S_lam(n+1) - S_lam(n).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import means
from .backends import kernels
from .parabolic import CellGrid, PiecewiseCandidate, cell_rows

UNIQUENESS_TOL = 1e-6
HARNACK_FLOOR = 1e-8
ENVELOPE_RTOL = 1e-3
BURN_IN_CAP = 320


class EtaError(RuntimeError):
    pass


@dataclass
class EtaSolution:
    lam: float
    grid: CellGrid
    t_origin: float
    burn_in: int
    horizon: int
    t_nodes: np.ndarray
    profiles: np.ndarray          # (H+1, n_x), each normalized to max 1
    logS: np.ndarray              # S_lam at integer times, S_lam(0) = 0
    c_samples: np.ndarray         # unit-interval averages of S_lam'
    harnack_ratios: np.ndarray    # min/max over the cell at integer times
    dense_t: Optional[np.ndarray] = None
    dense_logS: Optional[np.ndarray] = None
    dense_minratio: Optional[np.ndarray] = None
    dense_profiles: Optional[np.ndarray] = None

    def speed_samples(self) -> means.SampledFunction:
        return means.SampledFunction(1.0, self.c_samples)

    def profile_at(self, x, k):
        """Periodic linear interpolation of the stored profile at dense index k."""
        prof = self.dense_profiles[k]
        l = self.grid.period_l
        pos = np.asarray(x, dtype=float) % l
        s = pos / self.grid.dx
        j = np.floor(s).astype(int) % self.grid.n_x
        w = s - np.floor(s)
        jp = (j + 1) % self.grid.n_x
        return (1.0 - w) * prof[j] + w * prof[jp]

    def dense_index(self, t):
        k = int(round(t / self.grid.dt))
        if abs(t - k * self.grid.dt) > 1e-9:
            raise EtaError(f"time {t} is not aligned with the stored dt grid")
        if not 0 <= k < self.dense_logS.size:
            raise EtaError(f"time {t} outside the stored horizon")
        return k


def _evolve_units(cf, grid, lam, state, t_start, n_units, lognorm_buf, minr_buf):
    """Advance ``n_units`` unit intervals with per-step renormalization,
    discarding the growth bookkeeping (burn-in use)."""
    m = grid.steps_per_unit
    dummy = np.empty((0, grid.n_x))
    rows_cache = None
    for n in range(n_units):
        if cf.t_dependent or rows_cache is None:
            rows_cache = cell_rows(cf, grid, lam, t_start + n, m)
        a, b, r = rows_cache
        kernels.evolve_cell_chunk_trace(state, a, b, r, grid.dx, grid.dt, m,
                                        lognorm_buf, minr_buf, dummy)
        if not np.isfinite(lognorm_buf[m - 1]):
            raise EtaError("overflow despite renormalization; dt unstable for this lam")


def _burn_in_converged(cf, grid, lam, burn_in, t_origin, lognorm_buf, minr_buf):
    """Run two positive initial profiles through the burn-in; return the
    surviving state and their sup distance at t = 0."""
    eta1 = np.ones(grid.n_x)
    eta2 = 1.0 + 0.5 * np.cos(2.0 * np.pi * grid.x / grid.period_l)
    t_start = t_origin - burn_in
    for state in (eta1, eta2):
        _evolve_units(cf, grid, lam, state, t_start, burn_in, lognorm_buf, minr_buf)
    return eta1, float(np.abs(eta1 - eta2).max())


def compute_eta(cf, lam: float, horizon: int, burn_in: int = 20,
                grid: Optional[CellGrid] = None, t_origin: float = 0.0,
                auto_burn_in: bool = True, store_dense: bool = False) -> EtaSolution:
    """Integrate the linear cell problem and collect speeds and diagnostics.

    Requires lam > 0, horizon >= 50 and burn_in >= 10. With
    ``auto_burn_in`` the burn-in doubles (up to a cap) until two distinct
    initial profiles coincide at t = 0 within 1e-6.
    """
    if lam <= 0:
        raise EtaError("lam must be positive")
    horizon = int(horizon)
    burn_in = int(burn_in)
    if horizon < 50:
        raise EtaError("horizon must be at least 50 time units")
    if burn_in < 10:
        raise EtaError("burn_in must be at least 10 time units")
    if grid is None:
        raise EtaError("an explicit CellGrid is required")

    m = grid.steps_per_unit
    lognorm_buf = np.empty(m)
    minr_buf = np.empty(m)

    B = burn_in
    while True:
        eta, dist = _burn_in_converged(cf, grid, lam, B, t_origin, lognorm_buf, minr_buf)
        if dist <= UNIQUENESS_TOL or not auto_burn_in:
            break
        B *= 2
        if B > BURN_IN_CAP:
            raise EtaError(
                f"burn-in did not converge (distance {dist:.2e} at B = {B // 2}); "
                "the cell problem may be under-resolved")

    s = eta.max()
    eta /= s  # anchor: max of the retained profile at t = 0 is exactly 1

    H = horizon
    profiles = np.empty((H + 1, grid.n_x))
    harnack = np.empty(H + 1)
    logS = np.zeros(H + 1)
    c_samples = np.empty(H)
    profiles[0] = eta
    harnack[0] = float(eta.min())
    if store_dense:
        dense_logS = np.zeros(H * m + 1)
        dense_minr = np.empty(H * m + 1)
        dense_profiles = np.empty((H * m + 1, grid.n_x))
        dense_minr[0] = harnack[0]
        dense_profiles[0] = eta

    dummy = np.empty((0, grid.n_x))
    rows_cache = None
    for n in range(H):
        if cf.t_dependent or rows_cache is None:
            rows_cache = cell_rows(cf, grid, lam, t_origin + n, m)
        a, b, r = rows_cache
        prof = dense_profiles[1 + n * m: 1 + (n + 1) * m] if store_dense else dummy
        kernels.evolve_cell_chunk_trace(eta, a, b, r, grid.dx, grid.dt, m,
                                        lognorm_buf, minr_buf, prof)
        g = lognorm_buf[m - 1]
        if not np.isfinite(g):
            raise EtaError("overflow despite renormalization; dt unstable for this lam")
        logS[n + 1] = logS[n] + g / lam
        c_samples[n] = g / lam
        harnack[n + 1] = minr_buf[m - 1]
        profiles[n + 1] = eta
        if store_dense:
            dense_logS[1 + n * m: 1 + (n + 1) * m] = logS[n] + lognorm_buf / lam
            dense_minr[1 + n * m: 1 + (n + 1) * m] = minr_buf

    sol = EtaSolution(
        lam=lam, grid=grid, t_origin=t_origin, burn_in=B, horizon=H,
        t_nodes=np.arange(H + 1), profiles=profiles, logS=logS,
        c_samples=c_samples, harnack_ratios=harnack,
    )
    if store_dense:
        sol.dense_t = np.arange(H * m + 1) * grid.dt
        sol.dense_logS = dense_logS
        sol.dense_minratio = dense_minr
        sol.dense_profiles = dense_profiles
    if harnack.min() < HARNACK_FLOOR:
        raise EtaError(
            f"Harnack ratio {harnack.min():.2e} below {HARNACK_FLOOR}; cell under-resolved")
    return sol


def uniqueness_check(cf, lam: float, grid: CellGrid, horizon: int = 50,
                     burn_in: int = 10, t_origin: float = 0.0):
    """Distance trace between two integrations from different positive data.

    Reports sup_x |eta1 - eta2| on normalized profiles at integer times of
    [0, horizon]; the trace must fall below 1e-6.
    """
    m = grid.steps_per_unit
    lognorm_buf = np.empty(m)
    minr_buf = np.empty(m)
    states = [np.ones(grid.n_x),
              1.0 + 0.5 * np.cos(2.0 * np.pi * grid.x / grid.period_l)]
    t_start = t_origin - burn_in
    for state in states:
        _evolve_units(cf, grid, lam, state, t_start, burn_in, lognorm_buf, minr_buf)
        state /= state.max()
    distances = np.empty(horizon + 1)
    distances[0] = np.abs(states[0] - states[1]).max()
    for n in range(horizon):
        for state in states:
            _evolve_units(cf, grid, lam, state, t_origin + n, 1, lognorm_buf, minr_buf)
        distances[n + 1] = np.abs(states[0] - states[1]).max()
    passed = bool(distances.min() <= UNIQUENESS_TOL)
    return distances, passed


@dataclass
class HarnackReport:
    inf_ratio: float
    beta: float
    max_upper_violation: float
    max_lower_violation: float
    envelope_ok: bool
    n_pairs_checked: int
    global_harnack_C: float = np.nan


def _smallest_harnack_constant(gaps, Ts):
    """Smallest C >= 1 with log C + C T >= gap for every checked (gap, T)
    pair: the constant of the global two-sided Harnack inequality
    (1/C) ||eta(t)|| e^{-CT} <= eta(x, t+T) <= C ||eta(t)|| e^{CT}."""
    need = 1.0
    for gap, T in zip(gaps, Ts):
        if T >= gap:  # C = 1 already satisfies log 1 + T >= gap
            continue
        lo, hi = 1.0, 2.0
        while np.log(hi) + hi * T < gap:
            hi *= 2.0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if np.log(mid) + mid * T >= gap:
                hi = mid
            else:
                lo = mid
        need = max(need, hi)
    return need


def _mu_extreme_integrals(cf, grid, horizon, t_origin):
    """Midpoint integrals of min_x mu and max_x mu between integer times."""
    m = grid.steps_per_unit
    th = t_origin + (np.arange(horizon * m) + 0.5) * grid.dt
    mn = np.asarray(cf.mu_min_fn(th), dtype=float)
    mx = np.asarray(cf.mu_max_fn(th), dtype=float)
    imin = np.concatenate([[0.0], np.cumsum(mn) * grid.dt])
    imax = np.concatenate([[0.0], np.cumsum(mx) * grid.dt])
    return imin[::m], imax[::m]


def harnack_report(es: EtaSolution, cf, T_range=range(1, 11),
                   rtol=ENVELOPE_RTOL) -> HarnackReport:
    """Same-time Harnack infimum plus the sup-norm growth envelope checks.

    For every retained integer time n and T in 1..10 the log growth of the
    sup norm must sit below (a_max lam^2 + q_sup lam) T + int max mu, and the
    log growth of the min must sit above (a_min lam^2 - q_sup lam) T +
    int min mu. Violation beyond ``rtol`` (relative) is a hard failure: the
    discretization is unsound.

    The report also carries the smallest constant of the two-sided global
    Harnack inequality satisfied by the computed trajectory, the diagnostic
    for media where only that inequality (and no periodic structure) is
    available.
    """
    lam = es.lam
    H = es.horizon
    imin, imax = _mu_extreme_integrals(cf, es.grid, H, es.t_origin)
    ln_sup = lam * es.logS
    ln_min = ln_sup + np.log(es.harnack_ratios)
    up_rate = cf.alpha_upper * lam * lam + cf.q_sup * lam
    low_rate = cf.alpha_lower * lam * lam - cf.q_sup * lam

    max_up = -np.inf
    max_low = -np.inf
    checked = 0
    gaps = []
    gap_Ts = []
    for T in T_range:
        if T > H:
            continue
        n = np.arange(H - T + 1)
        upper_env = up_rate * T + (imax[n + T] - imax[n])
        lower_env = low_rate * T + (imin[n + T] - imin[n])
        up_viol = (ln_sup[n + T] - ln_sup[n]) - upper_env
        low_viol = lower_env - (ln_min[n + T] - ln_min[n])
        tol_up = rtol * np.maximum(1.0, np.abs(upper_env))
        tol_low = rtol * np.maximum(1.0, np.abs(lower_env))
        max_up = max(max_up, float((up_viol / tol_up).max() * rtol))
        max_low = max(max_low, float((low_viol / tol_low).max() * rtol))
        checked += n.size
        gaps.append(float((ln_sup[n + T] - ln_sup[n]).max()))
        gap_Ts.append(float(T))
        gaps.append(float((ln_sup[n] - ln_min[n + T]).max()))
        gap_Ts.append(float(T))

    inf_ratio = float(es.harnack_ratios.min())
    # Lipschitz constant of S_lam: |log growth per unit| <= beta (1 + lam^2)
    n = np.arange(H)
    up1 = up_rate + (imax[n + 1] - imax[n])
    low1 = low_rate + (imin[n + 1] - imin[n]) + np.log(inf_ratio)
    beta = float(np.maximum(np.abs(up1), np.abs(low1)).max() / (1.0 + lam * lam))
    ok = max_up <= rtol and max_low <= rtol
    report = HarnackReport(
        inf_ratio=inf_ratio, beta=beta,
        max_upper_violation=max_up, max_lower_violation=max_low,
        envelope_ok=ok, n_pairs_checked=checked,
        global_harnack_C=_smallest_harnack_constant(gaps, gap_Ts),
    )
    if not ok:
        raise EtaError(
            f"growth envelope violated beyond {rtol} (upper {max_up:.2e}, "
            f"lower {max_low:.2e}); discretization unsound")
    return report


def wave_supersolution(es: EtaSolution) -> PiecewiseCandidate:
    """The generalized supersolution min(e^{-lam x} eta_lam, 1) from the
    stored dense trajectory (requires store_dense)."""
    if es.dense_logS is None:
        raise EtaError("supersolution candidate needs store_dense=True")
    lam = es.lam

    def value(x, t):
        k = es.dense_index(t)
        z = np.log(es.profile_at(x, k)) - lam * (np.asarray(x, float) - es.dense_logS[k])
        return np.exp(np.minimum(z, 0.0))

    def piece(x, t):
        k = es.dense_index(t)
        z = np.log(es.profile_at(x, k)) - lam * (np.asarray(x, float) - es.dense_logS[k])
        return (z >= 0.0).astype(np.int64)

    return PiecewiseCandidate(value=value, piece=piece)


@dataclass
class Subsolution:
    candidate: PiecewiseCandidate
    m: float
    K: float
    sigma: means.SampledFunction
    certificate: means.SigmaCertificate
    lam: float
    lam2: float


def wave_subsolution(es_a: EtaSolution, es_b: EtaSolution, rt,
                     epsilon_frac: float = 0.25, margin: float = 1.1) -> Subsolution:
    """The subsolution e^{-lam x} eta_lam - m psi of the existence proof.

    es_a carries the decay rate lam, es_b the rate lam' in
    (lam, (1+nu) lam) with positive least mean of c_lam - c_lam'. The
    corrector sigma comes from the least-mean key property applied to
    lam' (c_lam - c_lam'), and m is sized so the candidate is nonpositive
    behind the interface and a subsolution where positive.
    """
    if es_a.dense_logS is None or es_b.dense_logS is None:
        raise EtaError("subsolution candidate needs store_dense=True on both etas")
    if es_a.grid.dt != es_b.grid.dt:
        raise EtaError("the two trajectories must share the time grid")
    lam, lam2 = es_a.lam, es_b.lam
    if not lam < lam2 < (1.0 + rt.kpp_exponent_nu) * lam:
        raise EtaError("need lam < lam' < (1 + nu) lam")

    dt = es_a.grid.dt
    n = min(es_a.dense_logS.size, es_b.dense_logS.size) - 1
    g_vals = lam2 * (np.diff(es_a.dense_logS[:n + 1]) - np.diff(es_b.dense_logS[:n + 1])) / dt
    g = means.SampledFunction(dt, g_vals)
    lm = means.least_mean(g)
    if lm.value <= 0:
        raise EtaError(f"least mean of lam'(c_lam - c_lam') is {lm.value:.3g}, not positive")
    sigma, cert = means.construct_sigma(g, epsilon_frac * lm.value)
    K = cert.inf_residual
    if K <= 0:
        raise EtaError("corrector certificate failed to deliver a positive margin")

    n_sigma = sigma.values.size  # sigma covers dense indices [0, n_sigma)
    n_star = int(round(cert.T_star / dt))
    sigma_min = float(sigma.values.min())
    pb_min = float(es_b.dense_profiles[:n_sigma].min())
    cond_sign = np.exp(-sigma_min) / pb_min
    cond_sub = rt.kpp_constant_C / (K * pb_min * np.exp(sigma_min))
    m = margin * max(cond_sign, cond_sub)

    def _parts(x, t):
        k = es_a.dense_index(t)
        if k >= n_sigma:
            raise EtaError("time outside the corrector horizon")
        rho = np.asarray(x, float) - es_a.dense_logS[k]
        pa = es_a.profile_at(x, k)
        pb = es_b.profile_at(x, k)
        sig = sigma.values[k]
        v = np.exp(-lam * rho) * pa - m * np.exp(sig) * pb * np.exp(-lam2 * rho)
        return v, k

    def value(x, t):
        return _parts(x, t)[0]

    def piece(x, t):
        v, k = _parts(x, t)
        return (v > 0.0).astype(np.int64) + 2 * (k // n_star + 1)

    return Subsolution(candidate=PiecewiseCandidate(value=value, piece=piece),
                       m=m, K=K, sigma=sigma, certificate=cert, lam=lam, lam2=lam2)
