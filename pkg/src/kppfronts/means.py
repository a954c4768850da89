"""Least and upper means of bounded sampled functions.

The least mean of g is lim (equivalently sup) over window length T of the
infimum over window position of the windowed average; the upper mean is the
mirror image. Everything here works on a finite horizon [0, H], the sampled
stand-in for the real-line definition: samples are treated as cell values on
[i*h, (i+1)*h), so windowed averages of unit-interval speed samples are
exact. The convergence trace is exposed so callers can judge whether the
horizon was long enough.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

T_GRID_RATIO = 1.25
CONVERGENCE_RTOL = 0.05


class MeanError(ValueError):
    pass


@dataclass(frozen=True)
class SampledFunction:
    """Uniform samples g(i*h) for i = 0..len-1, covering [0, len*h)."""
    h: float
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.h <= 0:
            raise MeanError("sample step h must be positive")
        if self.values.ndim != 1 or self.values.size == 0:
            raise MeanError("values must be a non-empty 1-d array")
        if not np.all(np.isfinite(self.values)):
            raise MeanError("samples must be finite")

    @property
    def horizon(self):
        return self.h * self.values.size


@dataclass
class MeanEstimate:
    value: float
    best_window_T: float
    trace: np.ndarray  # columns (T, extremal windowed average)
    flavor: str
    converged: bool
    convergence_gap: float

    def trace_pairs(self):
        return [(float(T), float(v)) for T, v in self.trace]


def _prefix(values):
    p = np.empty(values.size + 1)
    p[0] = 0.0
    np.cumsum(values, out=p[1:])
    return p


def windowed_extremum(g: SampledFunction, n_win: int, flavor: str) -> float:
    """inf (flavor 'least') or sup (flavor 'upper') over all window starts of
    the average of n_win consecutive samples."""
    if not 1 <= n_win <= g.values.size:
        raise MeanError(f"window of {n_win} samples does not fit in {g.values.size}")
    p = _prefix(g.values)
    avgs = (p[n_win:] - p[:-n_win]) / n_win
    return float(avgs.min() if flavor == "least" else avgs.max())


def _t_grid(g: SampledFunction, T_max: float):
    lengths = []
    T = min(1.0, T_max)
    while T < T_max * (1.0 - 1e-12):
        lengths.append(T)
        T *= T_GRID_RATIO
    lengths.append(T_max)
    n_wins = sorted({max(1, int(round(T / g.h))) for T in lengths})
    return [n for n in n_wins if n <= g.values.size]


def _mean(g: SampledFunction, T_max, flavor) -> MeanEstimate:
    horizon = g.horizon
    if T_max is None:
        T_max = horizon / 2
    if not 0 < T_max <= horizon / 2 + 1e-12:
        raise MeanError(f"T_max = {T_max} exceeds half the horizon {horizon}")
    if horizon < 10:
        raise MeanError(f"horizon {horizon} too short for a mean estimate (need >= 10)")
    n_wins = _t_grid(g, T_max)
    trace = np.empty((len(n_wins), 2))
    for i, n in enumerate(n_wins):
        trace[i, 0] = n * g.h
        trace[i, 1] = windowed_extremum(g, n, flavor)
    if flavor == "least":
        best = int(np.argmax(trace[:, 1]))
    else:
        best = int(np.argmin(trace[:, 1]))
    value = float(trace[best, 1])
    gap = abs(float(trace[-1, 1]) - value)
    return MeanEstimate(
        value=value,
        best_window_T=float(trace[best, 0]),
        trace=trace,
        flavor=flavor,
        converged=bool(gap <= CONVERGENCE_RTOL * max(abs(value), 1e-6)),
        convergence_gap=gap,
    )


def least_mean(g: SampledFunction, T_max=None) -> MeanEstimate:
    """Least mean over the sampled horizon: max over a geometric grid of
    window lengths T of the infimum over window starts of the windowed
    average. The raw value at T_max is kept as a convergence cross-check."""
    return _mean(g, T_max, "least")


def upper_mean(g: SampledFunction, T_max=None) -> MeanEstimate:
    """Upper mean: min over window lengths of the sup over window starts."""
    return _mean(g, T_max, "upper")


@dataclass(frozen=True)
class SigmaCertificate:
    T_star: float
    lm_value: float
    epsilon: float
    inf_residual: float       # inf over samples of (sigma' + g)
    sigma_sup: float
    sigma_sup_bound: float    # T* (||g||_inf + |lm| + eps)
    residual_ok: bool
    bound_ok: bool


def construct_sigma(g: SampledFunction, epsilon: float):
    """Bounded corrector sigma with inf(sigma' + g) >= least_mean(g) - epsilon.

    Picks the smallest window length T* whose inf windowed average is within
    epsilon of the least mean, then on each block [k T*, (k+1) T*) sets
    sigma' = block_average - g. The returned sigma covers the tiled part of
    the horizon (a whole number of blocks) and carries a checked certificate.
    """
    if epsilon <= 0:
        raise MeanError("epsilon must be positive")
    est = least_mean(g)
    target = est.value - epsilon
    n_star = None
    p = _prefix(g.values)
    for T, v in est.trace:
        if v >= target:
            n_star = max(1, int(round(T / g.h)))
            break
    assert n_star is not None  # the best window itself satisfies v = value
    n_blocks = g.values.size // n_star
    m = n_blocks * n_star
    block_means = (p[n_star::n_star][:n_blocks] - p[0:m:n_star]) / n_star
    sigma = np.zeros(m + 1)
    incr = (np.repeat(block_means, n_star) - g.values[:m]) * g.h
    np.cumsum(incr, out=sigma[1:])
    sigma_prime = np.diff(sigma) / g.h
    residual = sigma_prime + g.values[:m]
    T_star = n_star * g.h
    cert = SigmaCertificate(
        T_star=T_star,
        lm_value=est.value,
        epsilon=epsilon,
        inf_residual=float(residual.min()),
        sigma_sup=float(np.abs(sigma).max()),
        sigma_sup_bound=float(T_star * (np.abs(g.values).max() + abs(est.value) + epsilon)),
        residual_ok=bool(residual.min() >= target - 1e-12),
        bound_ok=bool(np.abs(sigma).max() <= T_star * (np.abs(g.values).max() + abs(est.value) + epsilon) + 1e-12),
    )
    return SampledFunction(g.h, sigma), cert
