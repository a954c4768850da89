"""Equation data: diffusion a(x,t), drift q(x,t), growth rate mu(x,t) and the
reaction term f(x,t,u), with the builtin families used throughout.

The equation is always written in the form

    d_t u - a(x,t) u_xx + q(x,t) u_x = f(x,t,u),   x in R, t in R,

with a, q, mu periodic in x with period ``period_l``. The ``advection_time``
builtin is specified by the transport form d_t u - u_xx - q(t) u_x = mu0 u(1-u),
so its stored drift is the negation of the given q.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import expr as ex

FAMILIES = (
    "homogeneous",
    "time_only",
    "space_periodic",
    "time_periodic",
    "space_time_periodic",
    "quasi_periodic_time",
    "advection_time",
)

DEFAULT_BOUNDS_RESOLUTION = 64
DEFAULT_BOUNDS_WINDOW = (0.0, 100.0)


class CoefficientError(ValueError):
    """Invalid coefficient data or builtin parameters."""


def _field_fn(node):
    """Vectorized (x, t) callable for an expression in x and t."""
    def fn(x, t):
        out = ex.evaluate(node, x=x, t=t)
        shape = np.broadcast_shapes(np.shape(x), np.shape(t))
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy() if shape else float(out)
    return fn


@dataclass(frozen=True)
class BoundReport:
    alpha_lower: float
    alpha_upper: float
    q_sup: float
    mu_inf: float
    mu_sup: float
    resolution: int
    t_window: tuple

    def dominates(self, other: "BoundReport") -> bool:
        """True when self is at least as wide as other (finer-grid bounds widen)."""
        return (self.alpha_lower <= other.alpha_lower
                and self.alpha_upper >= other.alpha_upper
                and self.q_sup >= other.q_sup
                and self.mu_inf <= other.mu_inf
                and self.mu_sup >= other.mu_sup)


@dataclass(frozen=True)
class CoefficientField:
    a: Callable
    q: Callable
    mu: Callable
    period_l: float
    alpha_lower: float
    alpha_upper: float
    q_sup: float
    mu_min_fn: Callable
    mu_max_fn: Callable
    mu_inf: float
    mu_sup: float
    time_period: Optional[float] = None
    x_dependent: bool = True
    t_dependent: bool = True
    family: Optional[str] = None
    params: dict = field(default_factory=dict)

    def describe(self):
        return {"family": self.family, "params": dict(self.params),
                "period_l": self.period_l, "time_period": self.time_period}


@dataclass(frozen=True)
class ReactionTerm:
    f: Callable
    mu: Callable
    kpp_constant_C: float
    kpp_exponent_nu: float
    kpp_delta: float
    kind: str = "logistic"


def _sample_grids(period_l, resolution, t_window):
    # nested grids: doubling the resolution keeps every old sample point
    xs = np.arange(resolution) * (period_l / resolution)
    t0, t1 = t_window
    n_t = max(1, int(np.ceil((t1 - t0) * resolution)))
    ts = t0 + np.arange(n_t + 1) / resolution
    return xs, ts


def sample_bounds(a_fn, q_fn, mu_fn, period_l,
                  resolution=DEFAULT_BOUNDS_RESOLUTION,
                  t_window=DEFAULT_BOUNDS_WINDOW) -> BoundReport:
    """Grid-sampled ellipticity and drift/growth bounds.

    Sampling uses ``resolution`` points per spatial period and per unit time;
    the reported bounds dominate every sampled value and widen monotonically
    as the resolution is refined (the sample grids are nested).
    """
    if resolution < 16:
        raise CoefficientError("bounds resolution must be at least 16 samples per period")
    xs, ts = _sample_grids(period_l, resolution, t_window)
    X = xs[None, :]
    T = ts[:, None]
    a_vals = np.asarray(a_fn(X, T), dtype=float)
    q_vals = np.asarray(q_fn(X, T), dtype=float)
    mu_vals = np.asarray(mu_fn(X, T), dtype=float)
    alpha_lower = float(a_vals.min())
    alpha_upper = float(a_vals.max())
    if not alpha_lower > 0.0:
        raise CoefficientError(f"diffusion is not uniformly elliptic on samples (min a = {alpha_lower})")
    return BoundReport(
        alpha_lower=alpha_lower,
        alpha_upper=alpha_upper,
        q_sup=float(np.abs(q_vals).max()),
        mu_inf=float(mu_vals.min()),
        mu_sup=float(mu_vals.max()),
        resolution=resolution,
        t_window=tuple(t_window),
    )


def _extrema_fns(mu_fn, period_l, x_dep, resolution=256):
    """min/max of mu(., t) over one cell, as vectorized functions of t."""
    if not x_dep:
        def both(t):
            v = mu_fn(0.0, t)
            return v, v
    else:
        xs = np.arange(resolution) * (period_l / resolution)

        def both(t):
            tarr = np.asarray(t, dtype=float)
            vals = mu_fn(xs[None, :], tarr.reshape(-1, 1))
            mn = vals.min(axis=1).reshape(tarr.shape)
            mx = vals.max(axis=1).reshape(tarr.shape)
            if tarr.ndim == 0:
                return float(mn), float(mx)
            return mn, mx

    def mu_min(t):
        return both(t)[0]

    def mu_max(t):
        return both(t)[1]

    return mu_min, mu_max


def make_field(a_src="1", q_src="0", mu_src="1", period_l=1.0, time_period=None,
               resolution=DEFAULT_BOUNDS_RESOLUTION, t_window=DEFAULT_BOUNDS_WINDOW,
               family=None, params=None) -> CoefficientField:
    """Build a CoefficientField from expression strings in x and t."""
    if period_l <= 0:
        raise CoefficientError("period_l must be positive")
    if time_period is not None and time_period <= 0:
        raise CoefficientError("time_period must be positive")
    nodes = {}
    for name, src in (("a", a_src), ("q", q_src), ("mu", mu_src)):
        node = ex.parse(src) if isinstance(src, str) else src
        bad = ex.variables(node) - {"x", "t"}
        if bad:
            raise CoefficientError(f"coefficient {name} uses forbidden variable(s) {sorted(bad)}")
        nodes[name] = node
    a_fn = _field_fn(nodes["a"])
    q_fn = _field_fn(nodes["q"])
    mu_fn = _field_fn(nodes["mu"])
    x_dep = any("x" in ex.variables(n) for n in nodes.values())
    t_dep = any("t" in ex.variables(n) for n in nodes.values())
    rep = sample_bounds(a_fn, q_fn, mu_fn, period_l, resolution, t_window)
    mu_min_fn, mu_max_fn = _extrema_fns(mu_fn, period_l, "x" in ex.variables(nodes["mu"]))
    return CoefficientField(
        a=a_fn, q=q_fn, mu=mu_fn, period_l=period_l,
        alpha_lower=rep.alpha_lower, alpha_upper=rep.alpha_upper, q_sup=rep.q_sup,
        mu_min_fn=mu_min_fn, mu_max_fn=mu_max_fn,
        mu_inf=rep.mu_inf, mu_sup=rep.mu_sup,
        time_period=time_period, x_dependent=x_dep, t_dependent=t_dep,
        family=family, params=dict(params or {}),
    )


def logistic_reaction(cf: CoefficientField) -> ReactionTerm:
    """f(x,t,u) = mu(x,t) u (1-u): C = sup mu, nu = 1, delta = 1."""
    mu = cf.mu

    def f(x, t, u):
        return mu(x, t) * u * (1.0 - u)

    return ReactionTerm(f=f, mu=mu, kpp_constant_C=cf.mu_sup,
                        kpp_exponent_nu=1.0, kpp_delta=1.0, kind="logistic")


def expression_reaction(cf: CoefficientField, f_src, C=None, nu=1.0, delta=1.0) -> ReactionTerm:
    """Reaction from an expression in x, t, u; its KPP bounds are only
    sample-checked, never certified."""
    node = ex.parse(f_src) if isinstance(f_src, str) else f_src
    bad = ex.variables(node) - {"x", "t", "u"}
    if bad:
        raise CoefficientError(f"reaction uses forbidden variable(s) {sorted(bad)}")

    def f(x, t, u):
        out = ex.evaluate(node, x=x, t=t, u=u)
        shape = np.broadcast_shapes(np.shape(x), np.shape(t), np.shape(u))
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy() if shape else float(out)

    return ReactionTerm(f=f, mu=cf.mu, kpp_constant_C=float(C if C is not None else cf.mu_sup),
                        kpp_exponent_nu=float(nu), kpp_delta=float(delta), kind="expression")


def _require(params, family, *names):
    for name in names:
        if name not in params:
            raise CoefficientError(f"family {family!r} needs parameter {name!r}")
    return [params[name] for name in names]


def _positive_mu0(params, family):
    mu0 = float(_require(params, family, "mu0")[0])
    if mu0 <= 0:
        raise CoefficientError(f"family {family!r} needs mu0 > 0, got {mu0}")
    return mu0


def make_builtin(family, params=None):
    """Construct (CoefficientField, ReactionTerm) for a builtin family.

    All builtins use the logistic reaction mu(x,t) u (1-u). Families with a
    logistic reaction require inf mu > 0 on samples and reject otherwise.
    """
    params = dict(params or {})
    resolution = int(params.pop("bounds_resolution", DEFAULT_BOUNDS_RESOLUTION))
    t_window = tuple(params.pop("bounds_window", DEFAULT_BOUNDS_WINDOW))
    if family not in FAMILIES:
        raise CoefficientError(f"unknown builtin family {family!r} (choose from {FAMILIES})")

    kw = dict(resolution=resolution, t_window=t_window, family=family, params=params)
    if family == "homogeneous":
        mu0 = _positive_mu0(params, family)
        cf = make_field(mu_src=repr(mu0), time_period=1.0, **kw)
    elif family in ("time_only", "quasi_periodic_time"):
        (mu_src,) = _require(params, family, "mu")
        time_period = params.get("time_period")
        if family == "quasi_periodic_time" and time_period is not None:
            raise CoefficientError("quasi_periodic_time has no time period")
        cf = make_field(mu_src=mu_src, time_period=time_period, **kw)
    elif family == "time_periodic":
        mu_src, time_period = _require(params, family, "mu", "time_period")
        cf = make_field(mu_src=mu_src, time_period=float(time_period), **kw)
        _check_time_periodic(cf)
    elif family == "space_periodic":
        (mu_src,) = _require(params, family, "mu")
        period_l = float(params.get("period_l", 1.0))
        cf = make_field(mu_src=mu_src, period_l=period_l, time_period=1.0, **kw)
    elif family == "space_time_periodic":
        mu_src, time_period = _require(params, family, "mu", "time_period")
        cf = make_field(a_src=params.get("a", "1"), q_src=params.get("q", "0"),
                        mu_src=mu_src, period_l=float(params.get("period_l", 1.0)),
                        time_period=float(time_period), **kw)
        _check_time_periodic(cf)
    else:  # advection_time, the separated transport example
        mu0 = _positive_mu0(params, family)
        q_src = params.get("q", "0")
        q_node = ex.parse(str(q_src))
        if ex.variables(q_node) - {"t"}:
            raise CoefficientError("advection_time drift must depend on t only")
        time_period = params.get("time_period")
        if time_period is None and not ex.variables(q_node):
            time_period = 1.0  # constant data is periodic with any period
        cf = make_field(q_src=ex.Neg(q_node), mu_src=repr(mu0),
                        time_period=time_period, **kw)
    if cf.mu_inf <= 0:
        raise CoefficientError(
            f"family {family!r} requires inf mu > 0 for the logistic reaction "
            f"(sampled inf mu = {cf.mu_inf})")
    return cf, logistic_reaction(cf)


def _check_time_periodic(cf, rtol=1e-9):
    T = cf.time_period
    ts = np.linspace(0.0, 3.0, 64)
    xs = np.arange(32) * (cf.period_l / 32)
    for fn in (cf.a, cf.q, cf.mu):
        v0 = fn(xs[None, :], ts[:, None])
        v1 = fn(xs[None, :], (ts + T)[:, None])
        scale = max(1.0, float(np.abs(v0).max()))
        if np.abs(v1 - v0).max() > rtol * scale:
            raise CoefficientError(
                f"declared time_period {T} is not a period of the coefficients")


def check_x_periodicity(cf, n_x=64, n_t=16, t_window=(0.0, 4.0)):
    """Max mismatch |g(x + l, t) - g(x, t)| over a sample grid, per coefficient."""
    xs = np.arange(n_x) * (cf.period_l / n_x)
    ts = np.linspace(*t_window, n_t)
    out = {}
    for name, fn in (("a", cf.a), ("q", cf.q), ("mu", cf.mu)):
        v0 = fn(xs[None, :], ts[:, None])
        v1 = fn(xs[None, :] + cf.period_l, ts[:, None])
        out[name] = float(np.abs(v1 - v0).max())
    return out
