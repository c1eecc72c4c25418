import math

import numpy as np
import pytest
import scipy.integrate
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from conftest import dense_laplacian, random_field
from dnls_orbit.lattice import (
    ContinuousSampler,
    GridSpec,
    LatticeField,
    SineSpectrum,
    discrete_sobolev_constant,
    dst_forward,
    dst_inverse,
    energy_inner,
    fe_h1_norm,
    interpolate,
    laplacian,
    mass_inner,
    norm_mu,
    omega,
    operator_norm_estimate,
    project,
    seminorm_weight,
    tail_norm_sq,
)
from dnls_orbit.soliton import eta, eta_sampler

grids = st.builds(GridSpec, h=st.floats(0.05, 1.5), K=st.integers(1, 12))


def hat():
    g = GridSpec(1.0, 1)
    return LatticeField(g, [0, 1, 0], symmetric=True)


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(0.0, 3)
    with pytest.raises(ValueError):
        GridSpec(0.1, 0)
    g = GridSpec(0.25, 4)
    assert g.npoints == 9
    assert g.half_width == pytest.approx(1.0)
    assert np.array_equal(g.indices, np.arange(-4, 5))


def test_field_invariants():
    g = GridSpec(1.0, 2)
    with pytest.raises(ValueError):
        LatticeField(g, [1, 2, 3, 4, 5], symmetric=True)
    with pytest.raises(ValueError):
        LatticeField(g, [1, np.nan, 0, 0, 0])
    f = LatticeField(g, [1, np.inf, 0, 0, 0], diverged=True)
    assert not np.all(np.isfinite(f.values))
    f = LatticeField(g, [1, 2, 3, 2, 1], symmetric=True)
    with pytest.raises(ValueError):
        f.values[0] = 5
    with pytest.raises(ValueError):
        LatticeField(g, [1, 2, 3])


def test_laplacian_hand_values():
    g = GridSpec(1.0, 1)
    assert np.allclose(laplacian(hat()).values, [1, -2, 1])
    assert np.allclose(laplacian(g.zeros()).values, 0)
    psi = np.sin(np.pi * (g.indices + 2) / 4)
    out = laplacian(LatticeField(g, psi)).values
    assert np.allclose(out, -(2 - math.sqrt(2)) * psi, atol=1e-14)


def test_omega_small_grid_against_dense_eigensolve():
    g = GridSpec(1.0, 1)
    expected = [2 - math.sqrt(2), 2, 2 + math.sqrt(2)]
    assert [omega(g, k) for k in (1, 2, 3)] == pytest.approx(expected, abs=1e-14)
    ev = np.linalg.eigvalsh(-dense_laplacian(g))
    assert np.allclose(np.sort(ev), expected, atol=1e-14)
    with pytest.raises(IndexError):
        omega(g, 0)
    with pytest.raises(IndexError):
        omega(g, 4)


@pytest.mark.parametrize("K", [1, 2, 5, 8])
@pytest.mark.parametrize("h", [1.0, 0.3])
def test_spectral_pairs_match_dense_eigensolve(K, h):
    g = GridSpec(h, K)
    ev, vecs = scipy.linalg.eigh(-dense_laplacian(g))
    assert np.allclose(ev, g.frequencies, rtol=0, atol=1e-10 * ev.max())
    assert np.all(np.diff(g.frequencies) > 0)
    for k in range(1, g.npoints + 1):
        v = g.eigenmode(k).values.real
        u = vecs[:, k - 1]
        assert min(np.abs(v - u).max(), np.abs(v + u).max()) < 1e-10


def test_omega_asymptotics():
    h = 0.2
    for K in (100, 400, 1600):
        g = GridSpec(h, K)
        approx = (math.pi / (2 * (K + 1) * h)) ** 2
        assert omega(g, 1) == pytest.approx(approx, rel=1e-3)
    g = GridSpec(0.3, 7)
    assert omega(g, g.npoints) < 4 / g.h**2


def test_dst_roundtrip_parseval_and_parity(rng):
    g = GridSpec(0.3, 20)
    f = random_field(g, rng, symmetric=True)
    s = dst_forward(f)
    back = dst_inverse(s)
    assert np.allclose(back.values, f.values, rtol=0, atol=1e-12 * np.abs(f.values).max())
    assert back.symmetric
    assert np.sum(np.abs(s.coeffs) ** 2) == pytest.approx(np.sum(np.abs(f.values) ** 2), rel=1e-12)
    assert np.abs(s.coeffs[1::2]).max() <= 1e-13 * np.abs(s.coeffs).max()
    k = 5
    spec = dst_forward(g.eigenmode(k)).coeffs
    assert abs(spec[k - 1]) == pytest.approx(1.0, abs=1e-12)
    assert np.abs(np.delete(spec, k - 1)).max() < 1e-12
    with pytest.raises(ValueError):
        SineSpectrum(g, np.zeros(3))


def test_norm_mu_hand_values():
    f = hat()
    # jumps 0->1 and 1->0 only (the zero extension adds nothing else)
    assert norm_mu(f) == pytest.approx(math.sqrt(3))
    assert norm_mu(f, "doubled") == pytest.approx(math.sqrt(5))
    assert norm_mu(hat().grid.zeros()) == 0
    assert seminorm_weight("fe-exact") == 1 and seminorm_weight(2.0) == 2.0
    with pytest.raises(ValueError):
        seminorm_weight("bogus")


def test_norm_mu_matches_brute_force_sum(rng):
    g = GridSpec(0.4, 6)
    f = random_field(g, rng)
    v = np.concatenate(([0], f.values, [0]))
    brute = sum(abs(v[j + 1] - v[j]) ** 2 for j in range(len(v) - 1)) / g.h + g.h * sum(abs(v) ** 2)
    assert norm_mu(f) ** 2 == pytest.approx(brute, rel=1e-13)


def test_soliton_mass_fine_grid():
    g = GridSpec(0.05, 600)
    f = project(eta_sampler(), g)
    assert g.h * np.sum(np.abs(f.values) ** 2) == pytest.approx(2.0, abs=1e-6)
    assert scipy.integrate.quad(lambda x: eta(x) ** 2, -np.inf, np.inf)[0] == pytest.approx(2.0)


def test_inner_products(rng):
    g = GridSpec(0.3, 10)
    f, h_ = random_field(g, rng), random_field(g, rng)
    assert mass_inner(f, f).imag == 0
    assert mass_inner(f, f).real == pytest.approx(g.h * np.sum(np.abs(f.values) ** 2))
    assert mass_inner(f, 1j * f) == pytest.approx(-1j * mass_inner(f, f))
    ph = np.exp(0.7j)
    assert mass_inner(ph * f, ph * h_) == pytest.approx(mass_inner(f, h_), rel=1e-13)
    e = energy_inner(f, f)
    assert abs(e.imag) < 1e-13 * abs(e)
    assert e.real == pytest.approx(norm_mu(f) ** 2, rel=1e-13)
    with pytest.raises(ValueError):
        mass_inner(f, GridSpec(0.3, 9).zeros())


def test_project_samples_window():
    g = GridSpec(0.5, 4)
    assert np.all(project(ContinuousSampler(lambda x: 0 * x), g).values == 0)
    f = project(eta_sampler(), g)
    assert f.symmetric
    assert f.values[g.K] == pytest.approx(0.7071067812, abs=1e-10)


def test_tail_norm_against_direct_sum():
    g = GridSpec(0.1875, 80)
    s = eta_sampler()
    t = tail_norm_sq(s, g)
    # direct evaluation on a much wider lattice
    wide = GridSpec(0.1875, 400)
    full = project(s, wide).values.copy()
    full[np.abs(wide.indices) <= 80] = 0
    direct = norm_mu(LatticeField(wide, full)) ** 2
    assert t == pytest.approx(direct, rel=1e-10)
    # scale of the exponential tail bound
    assert t < math.exp(-7.5) / g.h**2


def test_fe_h1_norm_hat_and_quadrature(rng):
    assert fe_h1_norm(hat()) == pytest.approx(math.sqrt(8 / 3))
    assert fe_h1_norm(hat().grid.zeros()) == 0
    g = GridSpec(0.5, 4)
    f = random_field(g, rng)
    x = np.linspace(-(g.K + 1) * g.h, (g.K + 1) * g.h, 200_001)
    u = interpolate(f, x)
    du = np.gradient(u, x)
    quad = scipy.integrate.trapezoid(np.abs(u) ** 2 + np.abs(du) ** 2, x)
    assert fe_h1_norm(f) ** 2 == pytest.approx(quad, rel=1e-3)
    # derivative part equals the weight-1 seminorm
    mass_part = fe_h1_norm(f) ** 2 - (norm_mu(f) ** 2 - g.h * np.sum(np.abs(f.values) ** 2))
    assert mass_part == pytest.approx(scipy.integrate.trapezoid(np.abs(u) ** 2, x), rel=1e-6)


@given(grids, st.integers(0, 2**32 - 1))
def test_laplacian_self_adjoint(g, seed):
    rng = np.random.default_rng(seed)
    f, h_ = random_field(g, rng), random_field(g, rng)
    a = mass_inner(laplacian(f), h_)
    b = mass_inner(f, laplacian(h_))
    assert abs(a - b) <= 1e-12 * max(abs(a), 1e-300) + 1e-12


@given(grids, st.integers(0, 2**32 - 1))
def test_discrete_sobolev(g, seed):
    f = random_field(g, np.random.default_rng(seed))
    lhs = norm_mu(f) ** 2
    assert lhs <= discrete_sobolev_constant(g.h) * g.h * np.sum(np.abs(f.values) ** 2) * (1 + 1e-12)


@given(grids, st.integers(0, 2**32 - 1))
def test_symmetric_inputs_stay_symmetric(g, seed):
    f = random_field(g, np.random.default_rng(seed), symmetric=True)
    assert laplacian(f).symmetric
    assert dst_inverse(dst_forward(f)).symmetric


def test_operator_norm_equals_top_frequency():
    for h, K in ((1.0, 1), (0.5, 10), (0.1875, 80)):
        g = GridSpec(h, K)
        tau = 0.02
        est = operator_norm_estimate(g, tau, iterations=2000)
        assert est <= tau * omega(g, g.npoints) * (1 + 1e-9)
        assert est == pytest.approx(tau * omega(g, g.npoints), rel=1e-3)
        assert est < 4 * tau / h**2


@pytest.mark.xfail(strict=True, reason="the mu-operator norm of tau*Delta_h is tau*omega_max, "
                                       "close to 4 tau/h^2, so a 3 tau/h^2 bound cannot hold")
def test_operator_norm_three_tau_over_h2_bound():
    g = GridSpec(0.5, 10)
    assert operator_norm_estimate(g, 0.02) <= 3 * 0.02 / g.h**2
