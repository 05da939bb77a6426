"""Companion realization and direct application of the truncated operator."""

import json
import math

import numpy as np
import pytest

from kslab.errors import ConfigError
from kslab.integrals import Box
from kslab.ksop import (
    CallableFamily,
    CorrelationFamily,
    apply_ks_function,
    build_ks_matrix,
    dxi_norm,
    ks_residual,
    probe_anchor_sets,
)
from kslab.partition import smallest_zero, zeros
from kslab.potentials import PairPotential

from conftest import make_ideal, make_tonks, poly_from_coeffs


def test_companion_layout(tonks5):
    ks = build_ks_matrix(tonks5)
    assert ks.M == 6
    np.testing.assert_allclose(ks.matrix[0], -tonks5.coeffs[1:])
    np.testing.assert_allclose(ks.matrix[1:, :-1], np.eye(5))
    np.testing.assert_allclose(ks.matrix[1:, -1], 0.0)


def test_eigenvalues_are_reciprocal_zeros(tonks5):
    # degree drops to 5 (Z_6 = 0), so one eigenvalue is exactly zero and
    # the rest must be 1/z_i for the five partition zeros
    ks = build_ks_matrix(tonks5)
    lam = np.linalg.eigvals(ks.scaled_matrix()) / ks.scale
    lam = sorted((l for l in lam if abs(l) > 1e-12), key=lambda w: (w.real, w.imag))
    want = sorted((1.0 / z for z in zeros(tonks5).zeros),
                  key=lambda w: (w.real, w.imag))
    assert len(lam) == len(want) == 5
    for g, w in zip(lam, want):
        assert abs(g - w) <= 1e-10 * abs(w)


def test_scaled_and_conditioned_are_similar(tonks5):
    ks = build_ks_matrix(tonks5)
    a = np.sort_complex(np.linalg.eigvals(ks.scaled_matrix()))
    b = np.sort_complex(np.linalg.eigvals(ks.conditioned_matrix()))
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


def test_to_json_and_save(tonks5, tmp_path):
    ks = build_ks_matrix(tonks5)
    doc = ks.to_json()
    assert set(doc) == {"M", "first_row", "scale"}
    path = ks.save(tmp_path / "op.json")
    assert json.load(open(path))["M"] == 6


def test_build_requires_degree(tonks5):
    with pytest.raises(ConfigError):
        build_ks_matrix(poly_from_coeffs([2.0]))


def test_ideal_power_family_is_exact_fixed_point():
    # for the free gas the kernel vanishes, so phi_n = z^n solves the full
    # system at every truncation; the application must reproduce it to
    # rounding, not merely to quadrature accuracy
    p = PairPotential.ideal(beta=1.0, dimension=1)
    box = Box((1.0,))
    anchors_full = np.array([[0.2], [0.45], [0.7], [0.95]])
    worst = 0.0
    for z in (0.1, 0.3, 0.2 + 0.1j):
        fam = CallableFamily(lambda lvl, cfg, z=z: np.full(cfg.shape[0], z**lvl))
        for M in (4, 8):
            for n in range(1, 5):
                val, err = apply_ks_function(p, box, fam, n,
                                             anchors_full[:n], M, order=16)
                rhs = z * (1.0 + val) if n == 1 else z * val
                worst = max(worst, abs(z**n - rhs))
    assert worst <= 1e-12


def test_constant_family_keeps_every_kernel_term():
    # the packing cutoff is only for families that vanish on overlaps; a
    # constant family keeps all m terms, with the exact value known by hand
    p = PairPotential.hardcore(1.0)
    box = Box((5.0,))
    fam = CallableFamily(lambda lvl, cfg: np.full(cfg.shape[0], 0.3**lvl))
    anch = np.array([[1.2], [2.6]])  # window [0.2, 2.2], length 2
    exact = 0.3 - 2 * 0.3**2 + 4 * 0.3**3 / 2 - 8 * 0.3**4 / 6 + 16 * 0.3**5 / 24
    q, qe = apply_ks_function(p, box, fam, 2, anch, 6, strategy="quadrature", order=32)
    assert abs(q - exact) <= qe + 1e-12
    s, se = apply_ks_function(p, box, fam, 2, anch, 6, strategy="sampling", seed=3)
    assert abs(s - exact) <= 3 * se + 1e-12


def test_sampling_spread_is_reported():
    # a family that varies across the kernel window must come back with a
    # strictly positive replicate spread
    p = PairPotential.step(0.8, 1.3, beta=1.0)
    box = Box((5.0,))
    fam = CallableFamily(lambda lvl, cfg: cfg.sum(axis=(1, 2)))
    val, err = apply_ks_function(p, box, fam, 2, np.array([[1.2], [2.6]]), 5,
                                 strategy="sampling", seed=7)
    assert err > 0.0


def test_overlapping_anchor_pair_zeroes_both_sides(tonks5):
    z = 0.2
    fam = CorrelationFamily(tonks5, z, degree=5)
    anch = np.array([[2.5], [2.9]])  # closer than the rod diameter
    val, err = apply_ks_function(tonks5.potential, tonks5.box, fam, 2, anch, 6)
    assert val == 0.0 and err == 0.0


def test_residual_consistent_vs_unit_constant():
    # with c_M != 0 the finite-M inhomogeneity differs from 1; feeding the
    # infinite-system constant must surface as a level-1 truncation gap
    poly = make_tonks(5.0, M=4)
    rep_c = ks_residual(poly, 0.2, 1, order=24, count=8, constant_term="consistent")
    rep_u = ks_residual(poly, 0.2, 1, order=24, count=8, constant_term="unit")
    gap = rep_u.levels[0].truncation_gap
    assert gap > 1e-8
    assert rep_c.sup_residual <= rep_c.error_bound
    assert rep_u.sup_residual == pytest.approx(gap, rel=1e-6)
    assert rep_u.sup_residual > 10 * rep_c.sup_residual


def test_residual_report_shape(tonks5):
    rep = ks_residual(tonks5, 0.2, 2, order=24, count=8)
    assert [lv.n for lv in rep.levels] == [1, 2]
    assert rep.sup_residual <= rep.error_bound
    doc = rep.to_json()
    assert doc["M"] == 6 and len(doc["levels"]) == 2


def test_residual_preconditions(tonks5):
    with pytest.raises(ConfigError):
        ks_residual(tonks5, 0.2, 6)  # n_max must stay below M
    with pytest.raises(ConfigError):
        ks_residual(tonks5, 0.9, 1)  # outside the zero-free disk


def test_apply_preconditions():
    p = PairPotential.hardcore(1.0, dimension=2)
    fam = CallableFamily(lambda lvl, cfg: np.zeros(cfg.shape[0]))
    with pytest.raises(ConfigError):
        apply_ks_function(p, Box((3.0, 3.0)), fam, 1, np.array([[0.5, 0.5]]), 4)
    with pytest.raises(ConfigError):
        apply_ks_function(PairPotential.hardcore(1.0), Box((5.0,)), fam, 2,
                          np.array([[0.5]]), 4)


def test_probe_sets_deterministic_and_admissible():
    p = PairPotential.hardcore(1.0)
    box = Box((5.0,))
    a = probe_anchor_sets(box, p, 2, count=16)
    b = probe_anchor_sets(box, p, 2, count=16)
    assert len(a) == len(b) > 0
    for s, t in zip(a, b):
        np.testing.assert_array_equal(s, t)
    # by design one deliberately overlapping pair is included
    assert any(abs(s[0, 0] - s[1, 0]) < p.a for s in a)
    singles = probe_anchor_sets(box, p, 1, count=16)
    assert all(0.0 < s[0, 0] < 5.0 for s in singles)


def test_dxi_norm_closed_form():
    assert dxi_norm([2.0, 8.0], 2.0) == pytest.approx(2.0)
    assert dxi_norm([1.0, 1.0, 1.0], 1.0) == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        dxi_norm([1.0], 0.0)
