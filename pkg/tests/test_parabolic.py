import numpy as np
import pytest

from kppfronts.backends import kernels
from kppfronts.coefficients import make_field
from kppfronts.parabolic import (CellGrid, LineGrid, ParabolicError,
                                 PiecewiseCandidate, StateVector,
                                 check_line_domain, default_cell_grid,
                                 residual, step_linear_cell,
                                 step_nonlinear_line)


def test_cell_grid_validation():
    with pytest.raises(ParabolicError):
        CellGrid(16, 1.0, 0.01)
    with pytest.raises(ParabolicError):
        CellGrid(64, 1.0, -0.01)
    g = CellGrid(64, 1.0, 0.013)  # dt snapped to a unit divisor
    assert g.steps_per_unit == round(1.0 / g.dt)
    assert g.steps_per_unit * g.dt == 1.0


def test_monotone_bound_recorded(homogeneous):
    cf, _ = homogeneous
    g = CellGrid(64, 1.0, 1.0 / 64).with_monotone_bound(cf, lam_max=2.0)
    dx = 1.0 / 64
    assert g.monotone_dt == pytest.approx(min(dx * dx / 2.0, dx / 4.0))
    assert not g.dt_is_monotone
    g2 = CellGrid(64, 1.0, g.monotone_dt).with_monotone_bound(cf, lam_max=2.0)
    assert g2.dt_is_monotone


def test_default_cell_grid_keeps_dt_at_or_below_dx(space_periodic_cos):
    cf, _ = space_periodic_cos
    g = default_cell_grid(cf, 128)
    assert g.dt <= g.dx + 1e-15


def test_linear_cell_exponential_growth(homogeneous):
    # x-constant data: the zeroth-order integration makes growth exact
    cf, _ = homogeneous
    grid = CellGrid(32, 1.0, 1.0 / 64)
    for lam in (0.5, 1.0, 2.0):
        state = StateVector(np.ones(32), 0.0)
        for _ in range(grid.steps_per_unit):
            state = step_linear_cell(state, grid, cf, lam)
        want = np.exp(1.0 + lam * lam)
        assert np.abs(state.values / want - 1.0).max() <= 1e-6


def test_linear_cell_mass_conservation():
    # lam = 0, mu = 0, q = 0: periodic diffusion conserves the cell average
    cf = make_field(mu_src="0")
    grid = CellGrid(64, 1.0, 1.0 / 64)
    rng = np.random.default_rng(5)
    state = StateVector(1.0 + 0.5 * rng.random(64), 0.0)
    mass = state.values.mean()
    for _ in range(50):
        prev = state.values.mean()
        state = step_linear_cell(state, grid, cf, 0.0)
        assert abs(state.values.mean() - prev) <= 1e-10
    assert abs(state.values.mean() - mass) <= 1e-9


def test_linear_cell_rejects_nonpositive_state(homogeneous):
    cf, _ = homogeneous
    grid = CellGrid(32, 1.0, 1.0 / 64)
    vals = np.ones(32)
    vals[3] = 0.0
    with pytest.raises(ParabolicError):
        step_linear_cell(StateVector(vals, 0.0), grid, cf, 1.0)
    with pytest.raises(ParabolicError):
        step_linear_cell(StateVector(np.ones(32), 0.0), grid, cf, -0.5)


def _random_field(rng):
    def trig(base, amp):
        return (f"{base:.5f}+{rng.uniform(-amp, amp):.5f}"
                f"*cos(2*pi*x+{rng.uniform(0, 6.28):.5f})")
    return make_field(a_src=trig(1.0, 0.3), q_src=trig(0.0, 0.5),
                      mu_src=trig(1.0, 0.5), t_window=(0.0, 2.0))


def test_linear_cell_positivity_one_million_steps(rng):
    # a million random monotone-dt steps never lose positivity
    total = 0
    n_x = 32
    while total < 1_000_000:
        cf = _random_field(rng)
        lam = rng.uniform(0.05, 2.0)
        grid = CellGrid(n_x, 1.0, 1.0).with_monotone_bound(cf, lam)
        grid = CellGrid(n_x, 1.0, 0.9 * grid.monotone_dt,
                        monotone_dt=grid.monotone_dt)
        steps = min(20_000, 1_000_000 - total)
        from kppfronts.parabolic import cell_rows
        a, b, r = cell_rows(cf, grid, lam, 0.0, 1)
        eta = np.ascontiguousarray(0.05 + rng.random(n_x))
        lognorm = np.empty(steps)
        minr = np.empty(steps)
        kernels.evolve_cell_chunk_trace(
            eta, a, b, r, grid.dx, grid.dt, steps, lognorm, minr,
            np.empty((0, n_x)))
        assert minr.min() > 0.0
        total += steps
    assert total >= 1_000_000


def test_order_of_accuracy():
    # period 2 pi, so the k = 1 mode survives to t = 1:
    # exact e^{(mu0+lam^2) t} (1 + 0.5 e^{-t} cos(x - 2 lam t))
    cf = make_field(mu_src="1", period_l=2.0 * np.pi)
    lam = 1.0

    def exact(x, t):
        return np.exp(2.0 * t) * (1.0 + 0.5 * np.exp(-t)
                                  * np.cos(x - 2.0 * lam * t))

    errs = []
    for n_x, m in ((32, 32), (64, 64)):
        grid = CellGrid(n_x, 2.0 * np.pi, 1.0 / m)
        state = StateVector(exact(grid.x, 0.0), 0.0)
        for _ in range(m):
            state = step_linear_cell(state, grid, cf, lam)
        errs.append(np.abs(state.values - exact(grid.x, 1.0)).max()
                    / np.abs(exact(grid.x, 1.0)).max())
    assert errs[0] / errs[1] >= 3.5


def test_nonlinear_fixed_points(homogeneous):
    cf, rt = homogeneous
    grid = LineGrid(0.0, 10.0, 101, 0.004, bc_left=0.0, bc_right=0.0)
    state = StateVector(np.zeros(101), 0.0)
    state = step_nonlinear_line(state, grid, cf, rt)
    assert np.abs(state.values).max() == 0.0

    grid1 = LineGrid(0.0, 10.0, 101, 0.004, bc_left=1.0, bc_right=1.0)
    state = StateVector(np.ones(101), 0.0)
    state = step_nonlinear_line(state, grid1, cf, rt)
    assert np.abs(state.values - 1.0).max() <= 1e-14


def test_logistic_growth_small_data(homogeneous):
    cf, rt = homogeneous
    grid = LineGrid(0.0, 40.0, 401, 0.004, bc_left=0.0, bc_right=0.0)
    u0 = 1e-4
    state = StateVector(np.full(401, u0), 0.0)
    state.values[0] = state.values[-1] = 0.0
    steps = int(round(1.0 / grid.dt))
    for _ in range(steps):
        state = step_nonlinear_line(state, grid, cf, rt)
    mid = state.values[150:250]
    want = u0 * np.exp(1.0)
    assert np.abs(mid / want - 1.0).max() <= 0.01


def test_nonlinear_state_validation(homogeneous):
    cf, rt = homogeneous
    grid = LineGrid(0.0, 10.0, 101, 0.004)
    bad = np.linspace(1.0, 0.0, 101)
    bad[50] = 1.5
    with pytest.raises(ParabolicError):
        step_nonlinear_line(StateVector(bad, 0.0), grid, cf, rt)
    with pytest.raises(ParabolicError):
        StateVector(np.array([np.inf, 1.0]), 0.0)


def test_clipping_guard_flags_large_dt(homogeneous):
    # dt mu > 1 makes the explicit reaction overshoot 1 on a flat 0.75 state
    cf, rt = homogeneous
    grid = LineGrid(0.0, 20.0, 201, 2.5)
    u = np.full(201, 0.75)
    u[0], u[-1] = 1.0, 0.0
    with pytest.raises(ParabolicError):
        step_nonlinear_line(StateVector(u, 0.0), grid, cf, rt)


def test_comparison_principle_quick(rng):
    from kppfronts.verify import comparison_suite
    ok, worst = comparison_suite(rng, 20)
    assert ok, worst


def test_residual_of_constant_one(homogeneous):
    cf, rt = homogeneous
    grid = LineGrid(0.0, 10.0, 101, 0.01)
    cand = PiecewiseCandidate(value=lambda x, t: np.ones_like(np.asarray(x, float)))
    rf = residual(cand, (0.0, 0.5), grid, cf, rt)
    assert rf.n_masked == 0
    assert abs(rf.min_unmasked) <= 1e-12
    assert abs(rf.max_unmasked) <= 1e-12


def test_residual_masks_interfaces(homogeneous):
    cf, rt = homogeneous
    grid = LineGrid(0.0, 10.0, 201, 0.01)
    cand = PiecewiseCandidate(
        value=lambda x, t: np.minimum(np.exp(-(np.asarray(x, float) - 5.0)), 1.0),
        piece=lambda x, t: (np.asarray(x, float) >= 5.0).astype(np.int64))
    rf = residual(cand, (0.0, 0.2), grid, cf, rt)
    assert rf.n_masked > 0
    assert np.isnan(rf.values[rf.interface_mask]).all()


def test_line_grid_validation():
    with pytest.raises(ParabolicError):
        LineGrid(0.0, -1.0, 100, 0.01)
    with pytest.raises(ParabolicError):
        LineGrid(0.0, 1.0, 4, 0.01)
    grid = LineGrid(0.0, 50.0, 501, 0.005)
    with pytest.raises(ParabolicError):
        check_line_domain(grid, c_max=2.0, T_sim=100.0, diffusion_length=1.0)
    check_line_domain(grid, c_max=0.4, T_sim=100.0, diffusion_length=0.5)
