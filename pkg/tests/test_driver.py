import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from spectral_levy.distortions import ExpDistortionParams, IdentityPair, bg2bg_pair, exp_distortion_pair
from spectral_levy.driver import (
    DistortedLevyDensity,
    GridFunction,
    LevelSetMasses,
    check_comonotone_additivity,
    choquet_driver,
    distorted_density,
    distorted_levy_interval_mass,
    driver_density,
    is_comonotone,
    psi_grid_general,
    psi_monotone,
)
from spectral_levy.errors import DomainError, InvariantError
from spectral_levy.levy import BGParams, bg_levy_density, bg_tail_mass, make_jump_grid

from conftest import GMM_DIST, SPY
from oracles import dense_level_mass, increment_values, lattice_step_function, riemann_choquet

GRID100 = make_jump_grid(SPY, n_per_side=50)
PAIR = exp_distortion_pair(GMM_DIST)
MILD = exp_distortion_pair(ExpDistortionParams(2.0, 0.3, 0.5, 0.7))

grid_values = st.lists(st.floats(-1.0, 1.0), min_size=100, max_size=100).map(np.array)


def gf(values, grid=GRID100):
    return GridFunction(grid, np.asarray(values, dtype=float))


# --- Choquet driver -----------------------------------------------------------


def test_zero_claim():
    assert choquet_driver(gf(np.zeros(100)), PAIR) == 0.0


def test_indicator_claim():
    y0 = GRID100.nodes[70]
    z = (GRID100.nodes >= y0).astype(float)
    mass = GRID100.weights[GRID100.nodes >= y0].sum()
    assert choquet_driver(gf(z), PAIR) == pytest.approx(PAIR.gamma_plus(mass), rel=1e-14)


def test_two_level_step_against_riemann_sum():
    z = np.where(GRID100.nodes > 0.01, 2.0, np.where(GRID100.nodes > 0.002, 0.5, 0.0))
    z[GRID100.nodes < -0.02] = -1.5
    ref = riemann_choquet(z, GRID100.weights, PAIR.gamma_plus, PAIR.gamma_minus)
    assert choquet_driver(gf(z), PAIR) == pytest.approx(ref, rel=1e-6)


def test_random_lattice_steps_against_riemann_sum():
    rng = np.random.default_rng(1)
    for _ in range(10):
        z = lattice_step_function(rng, 100, scale=rng.uniform(0.1, 5.0))
        ref = riemann_choquet(z, GRID100.weights, MILD.gamma_plus, MILD.gamma_minus)
        assert choquet_driver(gf(z), MILD) == pytest.approx(ref, rel=1e-6)


@given(grid_values)
def test_driver_nonnegative(values):
    assert choquet_driver(gf(values), PAIR) >= 0.0


@given(grid_values, st.sampled_from([0.5, 2.0, 10.0]))
def test_positive_homogeneity(values, lam):
    g = choquet_driver(gf(values), MILD)
    assert abs(choquet_driver(gf(lam * values), MILD) - lam * g) <= 1e-9 * max(1.0, abs(lam * g))


@given(grid_values, grid_values)
def test_subadditivity(v1, v2):
    lhs = choquet_driver(gf(v1 + v2), MILD)
    assert lhs <= choquet_driver(gf(v1), MILD) + choquet_driver(gf(v2), MILD) + 1e-8


def test_driver_density_reproduces_driver():
    rng = np.random.default_rng(2)
    z = gf(rng.normal(size=100))
    psi = driver_density(z, PAIR)
    assert np.sum(psi * z.values * GRID100.weights) == pytest.approx(choquet_driver(z, PAIR), rel=1e-12)


def test_grid_function_invariants():
    with pytest.raises(InvariantError):
        gf(np.zeros(5))
    with pytest.raises(DomainError):
        gf(np.full(100, np.nan))


# --- monotone claims ----------------------------------------------------------


def test_psi_exponential_closed_form():
    c, g, a = GMM_DIST.c, GMM_DIST.gamma, GMM_DIST.a
    y = np.array([0.001, 0.01, 0.05])
    tail = bg_tail_mass(y, SPY)
    expected = a * c / (1 + g) * (1 - np.exp(-c * tail)) ** (-g / (1 + g)) * np.exp(-c * tail)
    assert np.allclose(psi_monotone(y, SPY, PAIR, "upper"), expected, rtol=1e-12)


def test_psi_identity_and_errors():
    y = np.array([-0.02, 0.03])
    assert np.all(psi_monotone(y, SPY, IdentityPair()) == 0.0)
    with pytest.raises(DomainError):
        psi_monotone(0.0, SPY, PAIR)
    with pytest.raises(DomainError):
        psi_monotone(0.1, SPY, PAIR, "sideways")


def test_monotone_claim_density_reproduces_driver():
    grid = make_jump_grid(SPY, n_per_side=4000)
    z = np.expm1(grid.nodes)
    for direction, sign in (("upper", 1.0), ("lower", -1.0)):
        psi = psi_monotone(grid.nodes, SPY, PAIR, direction)
        lhs = float(np.sum(psi * z * grid.weights))
        # the lower valuation is -g(-z)
        rhs = sign * choquet_driver(gf(sign * z, grid), PAIR)
        assert lhs == pytest.approx(rhs, rel=1e-5)


@given(st.sampled_from([GMM_DIST, ExpDistortionParams(12.7, 0.77, 1e-7, 0.99), ExpDistortionParams(0.3, 0.1, 2.0, 0.4)]))
def test_one_plus_psi_positive(params):
    pair = exp_distortion_pair(params)
    y = GRID100.nodes
    for direction in ("upper", "lower"):
        assert np.all(1.0 + psi_monotone(y, SPY, pair, direction) >= 0.0)


def test_distorted_density_rejects_negative_intensity():
    with pytest.raises(InvariantError):
        DistortedLevyDensity(GRID100, np.full(100, -1.5))


def test_interval_mass_against_quadrature():
    grid_free = lambda y: bg_levy_density(y, SPY) * (1 + psi_monotone(y, SPY, PAIR, "upper"))  # noqa: E731
    quad, _ = integrate.quad(grid_free, 0.02, np.inf, epsabs=1e-12, epsrel=1e-12, limit=200)
    assert distorted_levy_interval_mass(SPY, PAIR, [(0.02, np.inf)]) == pytest.approx(quad, abs=1e-6)


def test_interval_mass_identity_and_origin():
    assert distorted_levy_interval_mass(SPY, IdentityPair(), [(0.01, 0.1)]) == pytest.approx(
        bg_tail_mass(0.01, SPY) - bg_tail_mass(0.1, SPY), rel=1e-13
    )
    with pytest.raises(DomainError):
        distorted_levy_interval_mass(SPY, PAIR, [(-0.1, 0.1)])


def test_bg2bg_closure_on_grid():
    new = BGParams(0.009, SPY.c_p, 0.015, SPY.c_n)
    pair = bg2bg_pair(SPY, new.b_p, new.b_n)
    y = np.concatenate([-np.geomspace(1e-5, 0.3, 500), np.geomspace(1e-5, 0.15, 500)])
    lhs = bg_levy_density(y, SPY) * (1 + psi_monotone(y, SPY, pair, "upper"))
    assert np.allclose(lhs, bg_levy_density(y, new), rtol=1e-9, atol=0)


def test_distorted_density_risk_charge_sign():
    up = distorted_density(SPY, PAIR, "upper", GRID100)
    lo = distorted_density(SPY, PAIR, "lower", GRID100)
    assert up.risk_charge() > 0 > lo.risk_charge()


# --- general claims -----------------------------------------------------------


def test_general_psi_matches_monotone_for_monotone_claims():
    grid = make_jump_grid(SPY, n_per_side=200)
    z = gf(np.expm1(grid.nodes), grid)
    for direction in ("upper", "lower"):
        general = psi_grid_general(z, PAIR, direction)
        monotone = psi_monotone(grid.nodes, SPY, PAIR, direction)
        assert np.allclose(general, monotone, rtol=1e-8, atol=1e-12)


def test_hump_level_sets_against_dense_scan():
    grid = make_jump_grid(SPY, n_per_side=200)
    pos = grid.nodes > 0
    z = np.where(pos, np.exp(-((grid.nodes - 0.02) / 0.008) ** 2), -0.1)
    ge = LevelSetMasses(grid).masses(z[None, :])[0][0]
    xs, zs = grid.nodes[pos], z[pos]
    for k in np.flatnonzero(pos)[[60, 120, 150]]:
        level = z[k]
        if level <= 0.05:
            continue
        ref = dense_level_mass(xs, zs, lambda y: bg_levy_density(y, SPY), level, lo=0.001, hi=0.06)
        assert ge[k] == pytest.approx(ref, abs=1e-6, rel=1e-6)


def test_constant_claim_uses_total_mass():
    grid = make_jump_grid(SPY, n_per_side=100)
    z = gf(np.full(grid.nodes.size, 0.3), grid)
    total = bg_tail_mass(grid.eps, SPY) + bg_tail_mass(-grid.eps, SPY)
    psi = psi_grid_general(z, PAIR, "upper")
    assert np.allclose(psi, PAIR.d_gamma_plus(total), rtol=1e-10)


def test_general_psi_rejects_nonfinite():
    with pytest.raises(DomainError):
        LevelSetMasses(GRID100).masses(np.full(100, np.inf))


# --- comonotone additivity ----------------------------------------------------


def test_scaled_claim_is_comonotone_and_additive():
    rng = np.random.default_rng(3)
    z1 = gf(rng.normal(size=100))
    report = check_comonotone_additivity(z1, z1.scaled(2.0), PAIR)
    assert report.comonotone and report.additive


def test_opposite_monotone_claims_not_comonotone():
    up = gf(np.linspace(-1, 1, 100))
    report = check_comonotone_additivity(up, up.scaled(-1.0), PAIR)
    assert not report.comonotone
    assert report.additive


@given(st.integers(0, 10_000))
def test_nondecreasing_steps_are_additive(seed):
    rng = np.random.default_rng(seed)
    z1, z2 = gf(increment_values(rng, GRID100)), gf(increment_values(rng, GRID100))
    assert is_comonotone(z1.values, z2.values)
    report = check_comonotone_additivity(z1, z2, PAIR)
    assert report.residual <= report.tolerance


def test_sign_mismatch_breaks_comonotonicity_and_additivity():
    # both nondecreasing, but they change sign at different jump sizes
    z1 = gf(np.linspace(-1.0, 1.0, 100))
    z2 = gf(np.linspace(-0.2, 1.8, 100))
    assert is_comonotone(z1.values, z2.values, anchor_zero=False)
    assert not is_comonotone(z1.values, z2.values)
    assert check_comonotone_additivity(z1, z2, PAIR).residual > 1e-6
