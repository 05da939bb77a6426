"""Spectrum, Riesz projection, nilpotent part, and asymptotic diagnostics."""

import cmath
import math

import numpy as np
import pytest

from kslab.errors import InsufficientData
from kslab.ksop import build_ks_matrix
from kslab.partition import smallest_zero, zeros
from kslab.spectral import (
    coefficient_asymptotics,
    leading_asymptotics,
    leading_projection,
    matrix_leading,
    nilpotent_and_pole,
    power_convergence,
    ray_limit,
    riesz_projection,
    spectral_radius_check,
    spectrum,
)

from conftest import make_ideal, make_tonks


@pytest.fixture(scope="module")
def ks5(tonks5):
    return build_ks_matrix(tonks5)


@pytest.fixture(scope="module")
def spec5(ks5):
    return spectrum(ks5)


def test_spectrum_matches_partition_zeros(tonks5, spec5):
    # Z_6 = 0 puts an exact zero eigenvalue in the M=6 realization; the
    # reciprocal correspondence covers the nonzero part of the spectrum
    zs = zeros(tonks5).zeros
    got = sorted((l for l in spec5.eigenvalues if abs(l) > 1e-12),
                 key=lambda w: (w.real, w.imag))
    want = sorted((1.0 / z for z in zs), key=lambda w: (w.real, w.imag))
    assert len(got) == len(want)
    for g, w in zip(got, want):
        assert abs(g - w) <= 1e-10 * abs(w)
    assert spec5.lam_c == pytest.approx(1.0 / smallest_zero(zeros(tonks5)).z_c,
                                        rel=1e-10)


def test_spectrum_orders_and_gaps(spec5):
    mods = np.abs(spec5.eigenvalues)
    assert np.all(np.diff(mods) <= 1e-12)  # descending
    assert spec5.spectral_radius == pytest.approx(mods[0])
    assert spec5.lam2_mod == pytest.approx(mods[1])
    rest = [l for l in spec5.eigenvalues if abs(l - spec5.lam_c) > 1e-12]
    assert spec5.dist_gap == pytest.approx(min(abs(l - spec5.lam_c) for l in rest))
    assert not spec5.is_tie
    assert spec5.normalized


def test_left_right_pair_is_biorthogonal(ks5, spec5):
    A = ks5.scaled_matrix()
    lam_s = spec5.lam_c * ks5.scale
    assert np.linalg.norm(A @ spec5.right - lam_s * spec5.right) <= 1e-9 * abs(lam_s)
    assert np.linalg.norm(spec5.left @ A - lam_s * spec5.left) <= 1e-9 * abs(lam_s)
    assert np.dot(spec5.left, spec5.right) == pytest.approx(1.0, rel=1e-10)


def test_leading_projection_tonks(ks5, spec5):
    rz = leading_projection(ks5, spec5)
    assert rz.precision == "float64"
    assert rz.rank == 1
    assert rz.pole_order == 1
    assert rz.second_singular_ratio <= 1e-12
    assert rz.algebra_defect <= 1e-10
    assert rz.nilpotent_ratio <= 1e-11


def test_riesz_projection_on_jordan_companion():
    # (lam - 2)^2 (lam - 1/2): a rank-2 group with a genuine order-2 pole
    comp = np.array([[4.5, -6.0, 2.0], [1, 0, 0], [0, 1, 0]])
    rz = riesz_projection(comp, 2.0, 0.6)
    assert rz.rank == 2
    assert rz.pole_order == 2
    assert rz.algebra_defect <= 1e-8


def test_nilpotent_and_pole_orders():
    diag = np.diag([2.0, 1.0, 0.5])
    P = np.diag([1.0, 0.0, 0.0])
    assert nilpotent_and_pole(diag, 2.0, P).pole_order == 1
    J = np.array([[2.0, 1.0], [0.0, 2.0]])
    res = nilpotent_and_pole(J, 2.0, np.eye(2))
    assert res.pole_order == 2
    assert res.norms[0] == pytest.approx(1.0)


def test_power_convergence_tracks_subleading_ratio(ks5, spec5):
    rep = power_convergence(ks5, spec5, n_terms=60)
    assert rep.expected_ratio == pytest.approx(
        spec5.lam2_mod / abs(spec5.lam_c), rel=1e-12
    )
    assert rep.fitted_ratio == pytest.approx(rep.expected_ratio, rel=0.01)
    assert rep.n_used >= 10


def test_ray_limit_extracts_directional_value():
    z0 = -0.4

    def g(z):
        return 3.0 / (1.0 - z / z0) * (1.0 - z / z0) + cmath.cos(z) * (1.0 - z / z0)

    mean, spread, rays = ray_limit(g, z0, 0.2)
    assert abs(mean - 3.0) <= 1e-12
    assert spread <= 1e-11
    assert len(rays) == 5


def test_leading_asymptotics_ideal_agrees_with_residue():
    poly = make_ideal(V=1.0, M=4)
    res = leading_asymptotics(poly, np.array([[0.5]]))
    assert res.agreement <= 1e-9
    doc = res.to_json()
    assert {"ray_value", "residue_value", "agreement", "z_c"} <= set(doc)


def test_matrix_leading_is_left_component(ks5, spec5):
    assert matrix_leading(ks5, spec5) == complex(spec5.left[0])


def test_coefficient_asymptotics_separates_pole_orders():
    k = np.arange(40)
    double = (k + 1) * 2.5**k  # order-2 pole at 0.4
    ca = coefficient_asymptotics(double)
    assert ca.subexp_exponent == pytest.approx(1.0, abs=0.1)
    # log(k+1) vs log(k) in the fitted model leaves a small finite-k bias
    assert ca.fit_rate == pytest.approx(2.5, rel=3e-3)
    simple = 2.5**k
    cs = coefficient_asymptotics(simple)
    assert abs(cs.subexp_exponent) <= 0.05
    assert cs.fit_rate == pytest.approx(2.5, rel=1e-6)
    assert cs.growth_estimate == pytest.approx(2.5, rel=1e-12)


def test_coefficient_asymptotics_needs_data():
    with pytest.raises(InsufficientData):
        coefficient_asymptotics([1.0, 2.0, 4.0])


def test_spectral_radius_check_reports(ks5, spec5):
    doc = spectral_radius_check(ks5, 2.0, spec5)
    assert doc["xi_inverse"] == pytest.approx(0.5)
    assert doc["ratio"] == pytest.approx(doc["spectral_radius"] * 2.0)
    assert doc["radius_below_inverse_xi"] == (doc["spectral_radius"] <= 0.5)
