import numpy as np
import pytest

from kppfronts import front
from kppfronts.parabolic import LineGrid, ParabolicError


@pytest.fixture(scope="module")
def homog_steep(homogeneous):
    # long enough that the logarithmic speed correction decays below the
    # least-mean bound's 0.05 margin
    cf, rt = homogeneous
    grid = front.auto_line_grid(cf, T_sim=100.0, c_max=2.3)
    return front.simulate_front(cf, rt, "step", 100.0, grid, c_max=2.3)


def test_steep_front_speed(homog_steep):
    assert homog_steep.found_front
    assert homog_steep.fitted_speed == pytest.approx(2.0, rel=0.03)


def test_front_position_monotone_after_burn_in(homog_steep):
    tr = homog_steep
    keep = tr.times >= tr.burn_in_T
    dX = np.diff(tr.X_theta[keep])
    assert dX.min() >= -tr.grid.dx


def test_values_stay_in_unit_interval(homog_steep):
    assert homog_steep.clip_total <= 1e-6
    assert homog_steep.snapshots.min() >= 0.0
    assert homog_steep.snapshots.max() <= 1.0


def test_profile_width_settles(homog_steep):
    w = homog_steep.profile_width
    keep = homog_steep.times >= homog_steep.burn_in_T
    assert np.isfinite(w[keep]).all()
    assert w[keep].std() <= 0.2 * w[keep].mean()


def test_exponential_data_selects_decay_speed(homogeneous):
    cf, rt = homogeneous
    grid = front.auto_line_grid(cf, T_sim=60.0, c_max=2.8)
    tr = front.simulate_front(cf, rt, "exponential", 60.0, grid,
                              lambda0=0.5, c_max=2.8)
    assert tr.fitted_speed == pytest.approx(2.5, rel=0.03)


def test_theta_choice_does_not_move_the_speed(homogeneous):
    cf, rt = homogeneous
    grid = front.auto_line_grid(cf, T_sim=60.0, c_max=2.3)
    tr = front.simulate_front(cf, rt, "step", 60.0, grid, theta=0.25, c_max=2.3)
    assert tr.fitted_speed == pytest.approx(2.0, rel=0.03)


def test_expression_reaction_path_matches_logistic(homogeneous):
    # the generic-reaction stepper (per-step evaluated f) must reproduce the
    # logistic fast path when the expressions agree
    from kppfronts.coefficients import expression_reaction
    cf, rt_logistic = homogeneous
    rt_expr = expression_reaction(cf, "u*(1-u)", C=1.0)
    grid = front.auto_line_grid(cf, T_sim=30.0, c_max=2.4)
    tr_a = front.simulate_front(cf, rt_logistic, "step", 30.0, grid, c_max=2.4,
                                store_profiles=False)
    tr_b = front.simulate_front(cf, rt_expr, "step", 30.0, grid, c_max=2.4,
                                store_profiles=False)
    np.testing.assert_allclose(tr_b.X_theta, tr_a.X_theta, atol=1e-8)


def test_zero_data_flags_no_front(homogeneous):
    cf, rt = homogeneous
    grid = LineGrid(-10.0, 60.0, 701, 0.005, bc_left=0.0)
    tr = front.simulate_front(cf, rt, "zero", 10.0, grid, c_max=2.3,
                              margin_lengths=5.0)
    assert not tr.found_front
    assert np.isnan(tr.X_theta).all()
    assert np.isnan(tr.fitted_speed)
    with pytest.raises(front.FrontError):
        front.measured_speed_analysis(tr)
    with pytest.raises(front.FrontError):
        front.transition_wave_check(tr)


def test_contaminated_run_aborts(homogeneous):
    # domain sized for a claimed c_max = 0.5 while the real front moves at 2
    cf, rt = homogeneous
    grid = LineGrid(-8.0, 40.0, 481, 0.005)
    with pytest.raises(front.FrontError, match="contaminated"):
        front.simulate_front(cf, rt, "step", 40.0, grid, c_max=0.5,
                             margin_lengths=5.0)


def test_domain_validation(homogeneous):
    cf, rt = homogeneous
    grid = LineGrid(0.0, 30.0, 301, 0.005)
    with pytest.raises(ParabolicError):
        front.simulate_front(cf, rt, "step", 60.0, grid, c_max=2.3)


def test_sampling_and_theta_validation(homogeneous):
    cf, rt = homogeneous
    grid = front.auto_line_grid(cf, T_sim=10.0, c_max=2.3)
    with pytest.raises(front.FrontError):
        front.simulate_front(cf, rt, "step", 10.0, grid, c_max=2.3,
                             sample_dt=grid.dt * 1.37)
    with pytest.raises(front.FrontError):
        front.simulate_front(cf, rt, "step", 10.0, grid, theta=1.2, c_max=2.3)
    with pytest.raises(front.FrontError):
        front.simulate_front(cf, rt, "exponential", 10.0, grid, c_max=2.3)


def test_transition_wave_uniformity(homog_steep):
    rep = front.transition_wave_check(homog_steep)
    assert rep.behind_decreasing and rep.ahead_decreasing
    assert rep.behind_sup[-1] <= 1e-2
    assert rep.ahead_sup[-1] <= 1e-4


def test_ahead_tail_decays_at_critical_rate(homog_steep):
    # the leading-edge deviations shrink like e^{-lam_star r}; measure the
    # rate on the last offset pair, the asymptotic part of the tail
    rep = front.transition_wave_check(homog_steep)
    r1, r2 = rep.offsets[-2], rep.offsets[-1]
    rate = -(np.log(rep.ahead_sup[-1]) - np.log(rep.ahead_sup[-2])) / (r2 - r1)
    assert rate == pytest.approx(1.0, rel=0.2)  # lam_star = 1


def test_measured_speed_bound(homog_steep):
    est, ok = front.measured_speed_analysis(homog_steep, c_star_lower=2.0)
    assert ok
    assert est.value == pytest.approx(2.0, rel=0.03)


def test_rightmost_crossing_interpolation():
    x = np.array([0.0, 1.0, 2.0, 3.0])
    u = np.array([1.0, 0.8, 0.2, 0.0])
    assert front.rightmost_crossing(x, u, 0.5) == pytest.approx(1.5)
    assert np.isnan(front.rightmost_crossing(x, u, 1.5))
    # non-monotone profile: the rightmost crossing wins
    u2 = np.array([1.0, 0.2, 0.8, 0.0])
    assert front.rightmost_crossing(x, u2, 0.5) == pytest.approx(2.375)
