import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lrlat import (DomainError, HarmonicParams, Propagator, SingularModeError, SiteField, Torus,
                   build_kernels, delta_field, dispersion, dual_grid, evolve_field, lr_velocity,
                   symplectic_form)


def rand_field(torus, rng):
    return SiteField(torus, rng.normal(size=torus.shape) + 1j * rng.normal(size=torus.shape))


def test_dispersion_examples():
    assert dispersion(0.7, HarmonicParams(1.0, 0.0)) == pytest.approx(1.0)
    assert dispersion(np.pi, HarmonicParams(0.0, 1.0)) == pytest.approx(2.0)
    for k in dual_grid(Torus(2, 6)):
        assert dispersion(k, HarmonicParams(3.0, 0.0, nu=2)) == pytest.approx(3.0)


def test_dispersion_singular_mode():
    with pytest.raises(SingularModeError):
        dispersion(0.0, HarmonicParams(0.0, 1.0))


@pytest.mark.parametrize("nu,L,omega,lam", [(1, 16, 0.5, 2.0), (2, 8, 1.0, 0.3)])
def test_dispersion_bounds(nu, L, omega, lam):
    p = HarmonicParams(omega, lam, nu)
    g = np.array([dispersion(k, p) for k in dual_grid(Torus(nu, L))])
    assert np.all(g >= omega - 1e-15)
    assert np.all(g <= math.sqrt(omega ** 2 + 4 * nu * lam) + 1e-15)


def test_lr_velocity_examples():
    assert lr_velocity(HarmonicParams(1.0, 0.0)) == pytest.approx(6.0)
    assert lr_velocity(HarmonicParams(0.0, 1.0)) == pytest.approx(12.0)
    assert lr_velocity(HarmonicParams(0.0, 0.0)) == 0.0


def test_symplectic_examples():
    # sigma(f, g) = (1/2) Im sum f conj(g): the normalization the brute-force
    # Weyl matrices obey, so sigma(delta, i delta) = -1/2.
    t = Torus(1, 8)
    rng = np.random.default_rng(1)
    f = rand_field(t, rng)
    assert symplectic_form(f, f) == pytest.approx(0.0, abs=1e-14)
    d = delta_field(2, t)
    assert symplectic_form(d, d * 1j) == pytest.approx(-0.5)
    assert symplectic_form(delta_field(0, t), delta_field(1, t) * 1j) == 0.0
    g = rand_field(t, rng)
    assert symplectic_form(f, g) == pytest.approx(-symplectic_form(g, f))
    with pytest.raises(DomainError):
        symplectic_form(f, delta_field(0, Torus(1, 4)))


def test_kernels_at_zero_time():
    t = Torus(1, 16)
    k = build_kernels(0.0, t, HarmonicParams(1.0, 0.7))
    np.testing.assert_allclose(k.h1.values, delta_field(0, t).values, atol=1e-14)
    np.testing.assert_allclose(k.h2.values, 0, atol=1e-14)


def test_kernels_decoupled_closed_form():
    t = Torus(1, 8)
    k = build_kernels(0.4, t, HarmonicParams(1.0, 0.0))
    np.testing.assert_allclose(k.h1.values, delta_field(0, t).values * np.exp(-0.8j), atol=1e-14)
    np.testing.assert_allclose(k.h2.values, 0, atol=1e-14)


def test_kernel_h2_sum_is_zero_mode():
    p = HarmonicParams(0.6, 1.1)
    t, time = Torus(1, 12), 0.35
    k = build_kernels(time, t, p)
    g0 = dispersion(0.0, p)
    expect = 0.5j * np.imag((g0 - 1 / g0) * np.exp(-2j * g0 * time))
    assert k.h2.values.sum() == pytest.approx(expect, abs=1e-14)


@pytest.mark.parametrize("nu,L", [(1, 12), (2, 6)])
def test_kernel_evenness(nu, L):
    t = Torus(nu, L)
    k = build_kernels(0.9, t, HarmonicParams(1.0, 0.8, nu))
    for h in (k.h1.values, k.h2.values):
        flipped = np.roll(np.flip(h, axis=tuple(range(nu))), 1, axis=tuple(range(nu)))
        np.testing.assert_allclose(h, flipped, atol=1e-14)


def test_kernels_reject_zero_omega():
    with pytest.raises(SingularModeError):
        build_kernels(0.1, Torus(1, 4), HarmonicParams(0.0, 1.0))
    with pytest.raises(SingularModeError):
        Propagator(HarmonicParams(0.0, 1.0), Torus(1, 4))


def test_evolve_examples():
    t = Torus(1, 16)
    rng = np.random.default_rng(2)
    f = rand_field(t, rng)
    prop = Propagator(HarmonicParams(1.0, 0.5), t)
    np.testing.assert_allclose(prop.evolve(f, 0.0).values, f.values, atol=1e-14)
    free = Propagator(HarmonicParams(1.0, 0.0), t)
    np.testing.assert_allclose(free.evolve(f, 0.3).values, np.exp(0.6j) * f.values, atol=1e-14)
    np.testing.assert_allclose(prop.evolve(prop.evolve(f, 0.3), 0.7).values, prop.evolve(f, 1.0).values,
                               atol=1e-10)


def test_evolve_matches_classical_flow():
    # independent oracle: dq/dt = 2p, dp/dt = -2Kq solved by eigendecomposition of K
    L, lam, omega, time = 10, 0.5, 0.8, 0.37
    K = np.eye(L) * (omega ** 2 + 2 * lam)
    for x in range(L):
        K[x, (x + 1) % L] -= lam
        K[x, (x - 1) % L] -= lam
    w, U = np.linalg.eigh(K)
    om = np.sqrt(w)
    C = U @ np.diag(np.cos(2 * om * time)) @ U.T
    S = U @ np.diag(np.sin(2 * om * time)) @ U.T
    Om, Oi = U @ np.diag(om) @ U.T, U @ np.diag(1 / om) @ U.T
    rng = np.random.default_rng(3)
    f = rng.normal(size=L) + 1j * rng.normal(size=L)
    expect = (C @ f.real - Om @ S @ f.imag) + 1j * (Oi @ S @ f.real + C @ f.imag)
    prop = Propagator(HarmonicParams(omega, lam), Torus(1, L))
    for method in ("fft", "direct", "series"):
        got = prop.evolve(SiteField(Torus(1, L), f), time, method).values
        np.testing.assert_allclose(got, expect, atol=1e-12)


def test_real_but_not_complex_linear():
    t = Torus(1, 16)
    rng = np.random.default_rng(4)
    f, g = rand_field(t, rng), rand_field(t, rng)
    prop = Propagator(HarmonicParams(1.0, 1.0), t)
    lhs = prop.evolve(f * 2.5 + g, 0.4).values
    rhs = 2.5 * prop.evolve(f, 0.4).values + prop.evolve(g, 0.4).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    assert np.abs(prop.evolve(f * 1j, 0.4).values - 1j * prop.evolve(f, 0.4).values).max() > 1e-3


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 2 ** 31))
def test_group_law_and_symplectic_invariance(s, u, seed):
    t = Torus(1, 32)
    rng = np.random.default_rng(seed)
    f, g = rand_field(t, rng), rand_field(t, rng)
    prop = Propagator(HarmonicParams(1.0, 0.9), t)
    a = prop.evolve(prop.evolve(f, s), u).values
    b = prop.evolve(f, s + u).values
    assert np.linalg.norm(a - b) <= 1e-10 * max(1.0, np.linalg.norm(b))
    assert abs(symplectic_form(prop.evolve(f, u), prop.evolve(g, u)) - symplectic_form(f, g)) <= 1e-10


@pytest.mark.parametrize("nu,L", [(1, 8), (1, 32), (2, 8)])
def test_fft_matches_direct(nu, L):
    t = Torus(nu, L)
    prop = Propagator(HarmonicParams(0.9, 0.6, nu), t)
    rng = np.random.default_rng(5)
    f = rand_field(t, rng)
    for time in (0.2, 1.3):
        kf, kd = prop.kernels(time), prop.kernels_direct(time)
        np.testing.assert_allclose(kf.h1.values, kd.h1.values, atol=1e-10)
        np.testing.assert_allclose(kf.h2.values, kd.h2.values, atol=1e-10)
        np.testing.assert_allclose(prop.evolve(f, time, "fft").values, prop.evolve(f, time, "direct").values,
                                   atol=1e-10)


def test_evolve_field_and_path():
    t = Torus(1, 16)
    prop = Propagator(HarmonicParams(1.0, 1.0), t)
    f = delta_field(0, t)
    path = prop.evolve_path(f, [0.0, 0.2, 0.5])
    np.testing.assert_allclose(path[2].values, evolve_field(f, 0.5, prop).values, atol=1e-12)
    with pytest.raises(DomainError):
        prop.evolve(delta_field(0, Torus(1, 8)), 0.1)
    with pytest.raises(ValueError):
        prop.evolve(f, 0.1, method="magic")
