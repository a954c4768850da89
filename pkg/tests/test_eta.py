import numpy as np
import pytest

from kppfronts.coefficients import make_builtin
from kppfronts.eta import (EtaError, compute_eta, harnack_report,
                           uniqueness_check, _mu_extreme_integrals)
from kppfronts.parabolic import CellGrid


@pytest.fixture(scope="module")
def fine_grid():
    return CellGrid(32, 1.0, 1.0 / 256)


def test_homogeneous_speed_samples(homogeneous):
    cf, _ = homogeneous
    grid = CellGrid(64, 1.0, 1.0 / 64)
    for lam in (0.5, 1.0, 2.0):
        es = compute_eta(cf, lam, horizon=60, grid=grid)
        assert np.abs(es.c_samples - (lam + 1.0 / lam)).max() <= 1e-4
        assert es.harnack_ratios.min() >= 1.0 - 1e-10


def test_time_only_unit_averages(time_only_sin, fine_grid):
    # c on (n, n+1) equals lam + (1/lam) int mu, here in closed form
    cf, _ = time_only_sin
    for lam in (0.5, 1.0):
        es = compute_eta(cf, lam, horizon=50, grid=fine_grid)
        n = np.arange(50)
        exact = lam + (1.0 + 0.5 * (np.cos(n) - np.cos(n + 1.0))) / lam
        assert np.abs(es.c_samples - exact).max() <= 1e-6


def test_advection_unit_averages(fine_grid):
    cf, _ = make_builtin("advection_time", {"mu0": 1.0, "q": "0.3*sin(t)"})
    lam = 0.8
    es = compute_eta(cf, lam, horizon=50, grid=fine_grid)
    n = np.arange(50)
    int_q = 0.3 * (np.cos(n) - np.cos(n + 1.0))
    exact = lam - int_q + 1.0 / lam
    assert np.abs(es.c_samples - exact).max() <= 1e-4


def test_profiles_normalized_exactly(space_periodic_cos):
    cf, _ = space_periodic_cos
    grid = CellGrid(64, 1.0, 1.0 / 64)
    es = compute_eta(cf, 1.0, horizon=50, grid=grid)
    assert (es.profiles.max(axis=1) == 1.0).all()
    assert (es.profiles.min(axis=1) > 0.0).all()


def test_logS_anchored_and_consistent(space_periodic_cos):
    cf, _ = space_periodic_cos
    grid = CellGrid(64, 1.0, 1.0 / 64)
    es = compute_eta(cf, 0.7, horizon=50, grid=grid, store_dense=True)
    assert es.logS[0] == 0.0
    np.testing.assert_allclose(np.diff(es.logS), es.c_samples, atol=1e-12)
    m = grid.steps_per_unit
    np.testing.assert_allclose(es.dense_logS[::m], es.logS, atol=1e-12)
    assert es.dense_profiles.shape == (50 * m + 1, 64)


def test_lmbounds_integrand_wise():
    # a_min lam - q_sup + int mu_min / lam <= c_n <= a_max lam + q_sup + int mu_max / lam
    cases = [
        make_builtin("homogeneous", {"mu0": 1.0}),
        make_builtin("time_only", {"mu": "1+0.5*sin(t)"}),
        make_builtin("space_periodic", {"mu": "1+0.5*cos(2*pi*x)"}),
        make_builtin("advection_time", {"mu0": 1.0, "q": "0.5"}),
    ]
    lam = 1.0
    for cf, _ in cases:
        grid = CellGrid(64, cf.period_l, 1.0 / 64)
        es = compute_eta(cf, lam, horizon=50, grid=grid)
        imin, imax = _mu_extreme_integrals(cf, grid, 50, 0.0)
        lo = cf.alpha_lower * lam - cf.q_sup + np.diff(imin) / lam
        hi = cf.alpha_upper * lam + cf.q_sup + np.diff(imax) / lam
        assert (es.c_samples >= lo - 1e-3).all()
        assert (es.c_samples <= hi + 1e-3).all()


def test_harnack_report_homogeneous(homogeneous):
    cf, _ = homogeneous
    grid = CellGrid(32, 1.0, 1.0 / 64)
    es = compute_eta(cf, 1.0, horizon=50, grid=grid)
    rep = harnack_report(es, cf)
    assert rep.inf_ratio == pytest.approx(1.0, abs=1e-9)
    assert rep.envelope_ok
    # Lipschitz bound on the speed samples
    assert np.abs(es.c_samples).max() <= rep.beta * (1 + 1.0) / 1.0 + 1e-9


def test_global_harnack_constant(homogeneous, space_periodic_cos):
    # the two-sided Harnack diagnostic: the constant must cover the observed
    # growth gaps, and for x-constant profiles the growth itself is the only
    # contribution
    grid = CellGrid(64, 1.0, 1.0 / 64)
    for cf, _ in (homogeneous, space_periodic_cos):
        es = compute_eta(cf, 1.0, horizon=50, grid=grid)
        rep = harnack_report(es, cf)
        C = rep.global_harnack_C
        assert C >= 1.0
        lnsup = 1.0 * es.logS
        for T in (1, 5, 10):
            n = np.arange(50 - T + 1)
            assert (lnsup[n + T] - lnsup[n] <= np.log(C) + C * T + 1e-9).all()


def test_harnack_ratio_stationary_after_burn_in(space_periodic_cos):
    cf, _ = space_periodic_cos
    grid = CellGrid(64, 1.0, 1.0 / 64)
    es = compute_eta(cf, 1.0, horizon=60, grid=grid)
    ratios = es.harnack_ratios
    assert 0.0 < ratios.min() <= ratios.max() < 1.0
    spread = ratios.max() - ratios.min()
    assert spread <= 0.01 * ratios.mean()
    rep = harnack_report(es, cf)
    assert rep.envelope_ok
    assert np.abs(es.c_samples).max() <= rep.beta * 2.0 + 1e-9


def test_envelope_mismatch_is_hard_failure(homogeneous, space_periodic_cos):
    # wrong coefficient bounds must trip the envelope check
    cf_space, _ = space_periodic_cos
    cf_wrong, _ = make_builtin("homogeneous", {"mu0": 0.2})
    grid = CellGrid(64, 1.0, 1.0 / 64)
    es = compute_eta(cf_space, 1.0, horizon=50, grid=grid)
    with pytest.raises(EtaError):
        harnack_report(es, cf_wrong)


def test_uniqueness_homogeneous(homogeneous):
    cf, _ = homogeneous
    grid = CellGrid(32, 1.0, 1.0 / 64)
    distances, passed = uniqueness_check(cf, 1.0, grid, horizon=50)
    assert passed
    assert distances[1] <= 1e-12  # constants after the first normalization


def test_uniqueness_space_periodic(space_periodic_cos):
    cf, _ = space_periodic_cos
    grid = CellGrid(64, 1.0, 1.0 / 64)
    distances, passed = uniqueness_check(cf, 1.0, grid, horizon=40, burn_in=10)
    assert passed
    assert distances[30] <= 1e-6
    # monotone decay down to the rounding floor
    above = distances > 1e-12
    assert (np.diff(distances)[above[:-1]] <= 1e-12).all()


def test_burn_in_doubles_for_slow_convergence():
    # period 8 cell: the spectral gap is ~ (2 pi / 8)^2, too slow for B = 10
    cf, _ = make_builtin("space_periodic",
                         {"mu": "1+0.5*cos(2*pi*x/8)", "period_l": 8.0})
    grid = CellGrid(64, 8.0, 1.0 / 64)
    es = compute_eta(cf, 0.5, horizon=50, burn_in=10, grid=grid)
    assert es.burn_in > 10
    # opting out keeps the requested burn-in
    es2 = compute_eta(cf, 0.5, horizon=50, burn_in=10, grid=grid,
                      auto_burn_in=False)
    assert es2.burn_in == 10


def test_shift_consistency_time_periodic():
    cf, _ = make_builtin("space_time_periodic",
                         {"mu": "1+0.25*cos(2*pi*x)+0.25*cos(2*pi*t)",
                          "time_period": 1.0})
    grid = CellGrid(64, 1.0, 1.0 / 64)
    es0 = compute_eta(cf, 1.0, horizon=52, grid=grid)
    es1 = compute_eta(cf, 1.0, horizon=51, grid=grid, t_origin=1.0)
    np.testing.assert_allclose(es1.c_samples[:50], es0.c_samples[1:51], atol=1e-6)


def test_compute_eta_preconditions(homogeneous):
    cf, _ = homogeneous
    grid = CellGrid(32, 1.0, 1.0 / 64)
    with pytest.raises(EtaError):
        compute_eta(cf, 0.0, horizon=60, grid=grid)
    with pytest.raises(EtaError):
        compute_eta(cf, 1.0, horizon=40, grid=grid)
    with pytest.raises(EtaError):
        compute_eta(cf, 1.0, horizon=60, burn_in=5, grid=grid)
    with pytest.raises(EtaError):
        compute_eta(cf, 1.0, horizon=60, grid=None)
