import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from spectral_levy.driver import DistortedLevyDensity
from spectral_levy.errors import DomainError, InvariantError
from spectral_levy.levy import (
    BGParams,
    MBGParams,
    bg_char_exponent,
    bg_cumulant,
    bg_interval_mass,
    bg_levy_density,
    bg_mean_rate,
    bg_tail_mass,
    characteristic_exponent,
    make_jump_grid,
    mbg_common_marginal,
    mbg_marginal_bg,
    simulate_bg_increments,
    simulate_mbg,
    vg_levy_density,
)
from spectral_levy.pricing import FourierSpec, density_from_levy

from conftest import SPY

mpmath.mp.dps = 50

bg_params = st.builds(
    BGParams,
    st.floats(0.002, 0.3),
    st.floats(0.2, 20.0),
    st.floats(0.002, 0.3),
    st.floats(0.2, 20.0),
)


def two_asset(corr=0.3, zeta=4.0, b_p=(0.02, 0.03), b_n=(0.025, 0.02)):
    return MBGParams(np.array(b_p), np.array([1.5, 2.0]), np.array(b_n), np.array([1.2, 0.9]), zeta, np.array([[1, corr], [corr, 1]]))


# --- parameter objects --------------------------------------------------------


def test_bg_params_reject_nonpositive():
    with pytest.raises(InvariantError):
        BGParams(0.01, -1.0, 0.01, 1.0)
    with pytest.raises(InvariantError):
        BGParams(np.nan, 1.0, 0.01, 1.0)


def test_mbg_invariants():
    with pytest.raises(InvariantError):
        MBGParams(np.array([0.02]), np.array([0.1]), np.array([0.02]), np.array([1.0]), 4.0, np.eye(1))
    with pytest.raises(InvariantError):
        two_asset(corr=1.5)
    m = two_asset()
    assert m.dim == 2


# --- density and tails --------------------------------------------------------


def test_density_at_scale():
    p = BGParams(0.02, 1.7, 0.03, 0.9)
    assert bg_levy_density(p.b_p, p) == pytest.approx(p.c_p / p.b_p * np.exp(-1.0), rel=1e-15)


def test_density_high_precision():
    y = mpmath.mpf("0.01")
    expected = mpmath.mpf("1.5592") / y * mpmath.exp(-y / mpmath.mpf("0.0075"))
    assert bg_levy_density(0.01, SPY) == pytest.approx(float(expected), rel=1e-13)


def test_density_diverges_like_shape_over_y():
    y = 1e-10
    assert bg_levy_density(y, SPY) * y == pytest.approx(SPY.c_p, rel=1e-7)


def test_density_and_tail_reject_zero():
    with pytest.raises(DomainError):
        bg_levy_density(0.0, SPY)
    with pytest.raises(DomainError):
        bg_tail_mass(np.array([0.1, 0.0]), SPY)


def test_tail_mass_identities():
    p = BGParams(0.02, 1.0, 0.03, 2.0)
    assert bg_tail_mass(p.b_p, p) == pytest.approx(0.21938393439552029, rel=1e-13)
    assert bg_tail_mass(np.inf, p) == 0.0
    assert bg_tail_mass(-np.inf, p) == 0.0


def test_tail_mass_matches_quadrature():
    quad, _ = integrate.quad(lambda y: bg_levy_density(y, SPY), 0.02, np.inf, epsabs=1e-13, epsrel=1e-12)
    assert bg_tail_mass(0.02, SPY) == pytest.approx(quad, abs=1e-8)


@pytest.mark.parametrize("y", np.geomspace(1e-3, 0.5, 9))
def test_tail_quadrature_on_range(y):
    for sign in (1.0, -1.0):
        lo, hi = (y, np.inf) if sign > 0 else (-np.inf, -y)
        quad, _ = integrate.quad(lambda t: bg_levy_density(t, SPY), lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)
        assert bg_tail_mass(sign * y, SPY) == pytest.approx(quad, abs=1e-8)


@given(bg_params, st.floats(1e-5, 2.0), st.floats(1e-5, 2.0))
def test_tail_mass_monotone(p, y1, y2):
    lo, hi = min(y1, y2), max(y1, y2)
    assert bg_tail_mass(lo, p) >= bg_tail_mass(hi, p)
    assert bg_tail_mass(-hi, p) <= bg_tail_mass(-lo, p)


def test_interval_mass():
    assert bg_interval_mass(0.01, 0.05, SPY) == pytest.approx(bg_tail_mass(0.01, SPY) - bg_tail_mass(0.05, SPY), rel=1e-13)
    assert bg_interval_mass(-0.05, -0.01, SPY) == pytest.approx(bg_tail_mass(-0.01, SPY) - bg_tail_mass(-0.05, SPY), rel=1e-13)
    with pytest.raises(DomainError):
        bg_interval_mass(-0.01, 0.01, SPY)


# --- moments -----------------------------------------------------------------


def test_mean_rate_closed_form_vs_quadrature():
    f = lambda y: np.expm1(y) * bg_levy_density(y, SPY)  # noqa: E731
    pos, _ = integrate.quad(f, 0, np.inf, epsabs=1e-14, limit=200)
    neg, _ = integrate.quad(f, -np.inf, 0, epsabs=1e-14, limit=200)
    assert bg_mean_rate(SPY) == pytest.approx(pos + neg, abs=1e-8)
    closed = np.log((1 - SPY.b_p) ** (-SPY.c_p) * (1 + SPY.b_n) ** (-SPY.c_n))
    assert bg_mean_rate(SPY) == pytest.approx(closed, abs=1e-12)


def test_mean_rate_limits():
    tiny = BGParams(1e-12, 1.3, 1e-12, 1.3)
    assert abs(bg_mean_rate(tiny)) < 1e-11
    one_sided = BGParams(0.05, 1e-300, 0.04, 2.0)
    assert bg_mean_rate(one_sided) == pytest.approx(-2.0 * np.log(1.04), rel=1e-14)
    with pytest.raises(DomainError):
        bg_mean_rate(BGParams(1.0, 1.0, 0.1, 1.0))


def test_cumulants():
    p = BGParams(0.02, 1.5, 0.03, 0.8)
    assert bg_cumulant(1, p, 2.0) == pytest.approx(2.0 * (1.5 * 0.02 - 0.8 * 0.03))
    assert bg_cumulant(2, p) == pytest.approx(1.5 * 0.02**2 + 0.8 * 0.03**2)


# --- characteristic exponent --------------------------------------------------


def test_grid_invariants():
    g = make_jump_grid(SPY, n_per_side=200)
    assert np.all(np.diff(g.nodes) > 0)
    assert np.all(np.abs(g.nodes) >= g.eps)
    assert np.all(g.weights >= 0)
    with pytest.raises(DomainError):
        make_jump_grid(SPY, eps=0.0)


def test_char_exponent_zero_and_conjugate():
    g = make_jump_grid(SPY, n_per_side=500)
    assert characteristic_exponent(0.0, g)[0] == 0
    th = np.array([3.0, 40.0])
    assert np.allclose(characteristic_exponent(-th, g), np.conj(characteristic_exponent(th, g)), rtol=1e-13, atol=1e-15)


@pytest.mark.parametrize("theta", [1.0, 10.0, 50.0, 200.0])
def test_char_exponent_matches_closed_form(theta):
    g = make_jump_grid(SPY, eps=1e-6)
    num = characteristic_exponent(theta, g)[0]
    assert abs(num - bg_char_exponent(theta, SPY)) < 1e-4


def test_fourier_density_mass_and_mean():
    p = BGParams(0.08, 1.0, 0.1, 1.0)
    t = 1 / 12
    g = make_jump_grid(p, n_per_side=2000)
    dens = density_from_levy(DistortedLevyDensity(g, np.zeros_like(g.nodes)), t, FourierSpec(n_points=2**14))
    assert dens.mass() == pytest.approx(1.0, abs=1e-6)
    assert dens.mean() == pytest.approx(t * (p.c_p * p.b_p - p.c_n * p.b_n), abs=1e-5)


# --- simulation ---------------------------------------------------------------


def test_simulation_deterministic_and_one_sided():
    a = simulate_bg_increments(SPY, 1.0, 100, seed=3)
    assert np.array_equal(a, simulate_bg_increments(SPY, 1.0, 100, seed=3))
    no_losses = BGParams(SPY.b_p, SPY.c_p, SPY.b_n, 1e-300)
    assert np.all(simulate_bg_increments(no_losses, 1.0, 1000, seed=4) >= 0)


def test_simulation_mean():
    n = 10**6
    x = simulate_bg_increments(SPY, 0.5, n, seed=1)
    expected = 0.5 * (SPY.c_p * SPY.b_p - SPY.c_n * SPY.b_n)
    assert abs(x.mean() - expected) < 3 * x.std() / np.sqrt(n)


def test_simulation_ks_against_fourier_cdf():
    # shape * t = 1 keeps the density bounded at the origin
    p = BGParams(0.08, 1.0, 0.1, 1.0)
    t = 1.0
    g = make_jump_grid(p, n_per_side=2000)
    dens = density_from_levy(DistortedLevyDensity(g, np.zeros_like(g.nodes)), t, FourierSpec(n_points=2**14))
    x = np.sort(simulate_bg_increments(p, t, 10**5, seed=5))
    model = dens.cdf(x)
    emp_hi = np.arange(1, x.size + 1) / x.size
    ks = max(np.max(emp_hi - model), np.max(model - (emp_hi - 1 / x.size)))
    assert ks < 0.01


# --- multivariate -------------------------------------------------------------


def test_marginal_parameters():
    m = two_asset(zeta=4.0)
    q = mbg_marginal_bg(m, 1)
    assert (q.b_p, q.c_p, q.b_n, q.c_n) == pytest.approx((0.03, 2.0 - 0.25, 0.02, 0.9 - 0.25))
    big = MBGParams(m.b_p, m.c_p, m.b_n, m.c_n, 1e12, m.corr)
    assert mbg_marginal_bg(big, 0).c_p == pytest.approx(1.5, rel=1e-10)
    with pytest.raises(DomainError):
        mbg_marginal_bg(m, 2)


def test_marginal_shape_arithmetic():
    zeta = 4.0
    m = MBGParams(np.array([0.02]), np.array([1 / zeta + 0.5]), np.array([0.02]), np.array([1.0]), zeta, np.eye(1))
    assert mbg_marginal_bg(m, 0).c_p == pytest.approx(0.5)


def test_vg_density_reduces_to_one_dimensional_form():
    m = MBGParams(np.array([0.03]), np.array([2.0]), np.array([0.05]), np.array([2.0]), 3.0, np.eye(1))
    y = np.array([[-0.2], [-0.01], [0.004], [0.1]])
    expected = bg_levy_density(y[:, 0], mbg_common_marginal(m, 0))
    assert np.allclose(vg_levy_density(y, m), expected, rtol=1e-10)


def test_vg_density_symmetry():
    m = two_asset(b_p=(0.02, 0.03), b_n=(0.02, 0.03))
    y = np.array([[0.01, -0.03], [0.05, 0.02]])
    assert np.allclose(vg_levy_density(y, m), vg_levy_density(-y, m), rtol=1e-12)


def test_vg_density_high_precision():
    m = two_asset()
    y = np.array([0.01, 0.01])
    cov = [[mpmath.mpf(v) for v in row] for row in m.covariance]
    cov = mpmath.matrix(cov)
    inv = cov**-1
    yv = mpmath.matrix([mpmath.mpf("0.01")] * 2)
    th = mpmath.matrix([mpmath.mpf(v) for v in m.drift])
    zeta = mpmath.mpf(m.zeta)
    qa = (yv.T * inv * yv)[0]
    qb = 2 / zeta + (th.T * inv * th)[0]
    val = (2 / zeta) * (2 * mpmath.pi) ** -1 / mpmath.sqrt(mpmath.det(cov))
    val *= mpmath.exp((th.T * inv * yv)[0]) * (qb / qa) ** (mpmath.mpf(2) / 4) * mpmath.besselk(1, mpmath.sqrt(qa * qb))
    assert vg_levy_density(y, m)[0] == pytest.approx(float(val), rel=1e-10)


def test_vg_density_rejects_origin():
    with pytest.raises(DomainError):
        vg_levy_density(np.zeros(2), two_asset())


def test_mbg_marginal_characteristic_function_by_monte_carlo():
    m = two_asset()
    dt = 1.0
    n = 200_000
    x = simulate_mbg(m, dt, n, seed=2)
    for i in range(2):
        total = BGParams(m.b_p[i], m.c_p[i], m.b_n[i], m.c_n[i])
        for u in (5.0, 20.0):
            phase = np.exp(1j * u * x[:, i])
            target = np.exp(dt * bg_char_exponent(u, total))
            se = np.sqrt(np.var(phase.real) / n + np.var(phase.imag) / n)
            assert abs(phase.mean() - target) < 4 * se
