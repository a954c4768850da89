"""Backend-agreement and solver-correctness tests for the hot kernels."""

import numpy as np
import pytest

from kppfronts.backends import BACKEND, get_backend

nb = get_backend("numba")
npk = get_backend("numpy")


def random_system(rng, n, cyclic):
    dia = rng.uniform(3.0, 4.0, n)
    sub = rng.uniform(-1.0, -0.1, n)
    sup = rng.uniform(-1.0, -0.1, n)
    rhs = rng.normal(size=n)
    A = np.diag(dia) + np.diag(sub[1:], -1) + np.diag(sup[:-1], 1)
    if cyclic:
        A[0, -1] = sub[0]
        A[-1, 0] = sup[-1]
    return sub, dia, sup, rhs, A


@pytest.mark.parametrize("n", [8, 33, 128])
def test_tridiag_solvers_match_dense(rng, n):
    for _ in range(10):
        sub, dia, sup, rhs, A = random_system(rng, n, cyclic=False)
        A[0, -1] = 0.0
        A[-1, 0] = 0.0
        want = np.linalg.solve(A, rhs)
        np.testing.assert_allclose(nb.solve_tridiag(sub, dia, sup, rhs), want,
                                   rtol=0, atol=1e-11)
        np.testing.assert_allclose(npk.solve_tridiag(sub, dia, sup, rhs), want,
                                   rtol=0, atol=1e-11)


@pytest.mark.parametrize("n", [8, 33, 128])
def test_cyclic_solvers_match_dense(rng, n):
    for _ in range(10):
        sub, dia, sup, rhs, A = random_system(rng, n, cyclic=True)
        want = np.linalg.solve(A, rhs)
        np.testing.assert_allclose(nb.solve_cyclic(sub, dia, sup, rhs), want,
                                   rtol=0, atol=1e-11)
        np.testing.assert_allclose(npk.solve_cyclic(sub, dia, sup, rhs), want,
                                   rtol=0, atol=1e-11)


def test_cell_chunk_backends_agree(rng):
    n, m = 48, 32
    dx, dt = 1.0 / n, 1.0 / m
    a = rng.uniform(0.8, 1.2, (m, n))
    b = rng.uniform(-1.0, 1.0, (m, n))
    r = rng.uniform(0.5, 2.5, (m, n))
    eta1 = rng.uniform(0.5, 1.5, n)
    eta2 = eta1.copy()
    nb.evolve_cell_chunk(eta1, a, b, r, dx, dt, m)
    npk.evolve_cell_chunk(eta2, a, b, r, dx, dt, m)
    np.testing.assert_allclose(eta1, eta2, rtol=1e-12)


def test_cell_chunk_trace_backends_agree(rng):
    n, m = 48, 32
    dx, dt = 1.0 / n, 1.0 / m
    a = rng.uniform(0.8, 1.2, (1, n))
    b = rng.uniform(-1.0, 1.0, (1, n))
    r = rng.uniform(0.5, 2.5, (1, n))
    out = []
    for mod in (nb, npk):
        eta = np.ones(n)
        logn = np.empty(m)
        minr = np.empty(m)
        prof = np.empty((m, n))
        mod.evolve_cell_chunk_trace(eta, a, b, r, dx, dt, m, logn, minr, prof)
        out.append((eta.copy(), logn.copy(), minr.copy(), prof.copy()))
    for x, y in zip(out[0], out[1]):
        np.testing.assert_allclose(x, y, rtol=1e-12)
    assert out[0][3][-1].max() == 1.0  # per-step renormalization


def test_line_chunk_backends_agree(rng):
    n, m = 80, 20
    dx, dt = 0.1, 0.004
    a = rng.uniform(0.8, 1.2, (m, n))
    b = rng.uniform(-0.5, 0.5, (m, n))
    mu = rng.uniform(0.5, 1.5, (m, n))
    u0 = np.clip(np.linspace(1.2, -0.2, n), 0.0, 1.0)
    u1, u2 = u0.copy(), u0.copy()
    c1 = nb.evolve_line_chunk(u1, a, b, mu, dx, dt, m, 1.0, 0.0)
    c2 = npk.evolve_line_chunk(u2, a, b, mu, dx, dt, m, 1.0, 0.0)
    np.testing.assert_allclose(u1, u2, rtol=0, atol=1e-12)
    assert c1[0] == pytest.approx(c2[0], abs=1e-12)


def test_step_line_explicit_backends_agree(rng):
    n = 60
    dx, dt = 0.1, 0.004
    a = rng.uniform(0.8, 1.2, n)
    b = rng.uniform(-0.5, 0.5, n)
    u0 = np.clip(np.linspace(1.1, -0.1, n), 0.0, 1.0)
    f = u0 * (1 - u0)
    u1, u2 = u0.copy(), u0.copy()
    nb.step_line_explicit(u1, a, b, f, dx, dt, 1.0, 0.0)
    npk.step_line_explicit(u2, a, b, f, dx, dt, 1.0, 0.0)
    np.testing.assert_allclose(u1, u2, rtol=0, atol=1e-12)


def test_backend_flag():
    assert BACKEND in ("numba", "numpy")
    assert nb.JIT is True
    assert npk.JIT is False
    with pytest.raises(ValueError):
        get_backend("fortran")
