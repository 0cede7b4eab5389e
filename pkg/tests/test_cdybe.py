import math

import numpy as np
import pytest

from dynrmat.cdybe import (BlockRMatrix, DerivativeScheme, bracket_12_13, bracket_12_23, bracket_13_23,
                           equivariance_check, evaluation_check, loop_grade_window_residual, residual_finite,
                           residual_loop, residual_spectral)
from dynrmat.errors import InconsistentSpectralParams, InvalidTau, StripViolation
from dynrmat.liealg import LieAlgebra, decompose, identity_automorphism
from dynrmat.loopalg import AffineDynVariable, homogeneous, make_affine, theorem1_residual
from dynrmat.matfun import f_fn
from dynrmat.rmat import r_tau, rho_q, rho_q_fns, rho_q_tensor
from dynrmat.sampling import random_admissible_omega, random_z_triple

FD = DerivativeScheme("fd")


def test_tensor_brackets_against_loops(sl2, rng):
    C = sl2.L.struct
    r, s = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
    want12_13 = np.zeros((3, 3, 3), complex)
    want12_23 = np.zeros((3, 3, 3), complex)
    want13_23 = np.zeros((3, 3, 3), complex)
    for a in range(3):
        for b in range(3):
            for d in range(3):
                for e in range(3):
                    # [T_a, T_d] (x) T_b (x) T_e etc.
                    want12_13[:, b, e] += r[a, b] * s[d, e] * C[a, d]
                    want12_23[a, :, e] += r[a, b] * s[d, e] * C[b, d]
                    want13_23[a, d, :] += r[a, b] * s[d, e] * C[b, e]
    assert np.allclose(bracket_12_13(C, r, s), want12_13)
    assert np.allclose(bracket_12_23(C, r, s), want12_23)
    assert np.allclose(bracket_13_23(C, r, s), want13_23)


def rho_family(fx, q=1):
    return BlockRMatrix(fx.L, fx.dec, rho_q_fns(fx.dec, q))


def test_rho_q_solves_cdybe(sl2):
    om = 0.1 * sl2.L.unit("h")
    fam = rho_family(sl2)
    assert residual_finite(sl2.L, sl2.dec, fam, om).residual_max < 1e-8
    assert residual_finite(sl2.L, sl2.dec, fam, om, FD).residual_max < 1e-8


def test_canonical_solves_cdybe(sl2_id, rng):
    om = 0.3 * rng.normal(size=3)
    fam = BlockRMatrix(sl2_id.L, sl2_id.dec, {0: f_fn()})
    assert residual_finite(sl2_id.L, sl2_id.dec, fam, om).residual_max < 1e-8


def test_sl3_rho_q(sl3, rng):
    for q in (1, 2):
        om = sl3.dec.bases[0] @ (0.2 * rng.normal(size=2))
        assert residual_finite(sl3.L, sl3.dec, rho_family(sl3, q), om).residual_max < 1e-8


def test_zero_on_abelian_algebra():
    L = LieAlgebra(2, {}, np.eye(2), ("x", "y"))
    dec = decompose(L, identity_automorphism(L))
    res = residual_finite(L, dec, lambda om: np.zeros((2, 2)), np.zeros(2), FD)
    assert res.residual_max == 0


def test_wrong_rmatrix_is_detected(sl2):
    om = 0.1 * sl2.L.unit("h")
    bad = lambda w: 1.1 * rho_q(sl2.L, sl2.dec, 1, w)
    res = residual_finite(sl2.L, sl2.dec, bad, om, FD)
    assert res.residual_max > 1e-3 and len(res.witness) == 2


def test_derivative_scheme_validation():
    with pytest.raises(ValueError):
        DerivativeScheme("exact")


SPECTRAL_Z = (0.2 - 0.1j, 0.0, -0.15 - 0.05j)


def zs(z1, z2, z3):
    return z1 - z2, z1 - z3, z2 - z3


def test_spectral_example(sl2):
    om = 0.3 * sl2.L.unit("h")
    z = zs(*SPECTRAL_Z)
    assert residual_spectral(sl2.L, sl2.dec, 1j, om, *z).max_abs() < 1e-8
    assert residual_spectral(sl2.L, sl2.dec, 1j, om, *z, scheme=FD).max_abs() < 1e-6


def test_spectral_sl3_random(sl3, rng):
    worst = 0.0
    for _ in range(10):
        tau = 0.4 + 0.9j
        om = random_admissible_omega(sl3.L, sl3.dec, rng, tau=tau, scale=0.3)
        z = random_z_triple(tau, rng)
        worst = max(worst, residual_spectral(sl3.L, sl3.dec, tau, om, *zs(*z)).max_abs())
    assert worst < 1e-6


def test_spectral_inconsistent_parameters(sl2):
    with pytest.raises(InconsistentSpectralParams):
        residual_spectral(sl2.L, sl2.dec, 1j, np.zeros(3), 0.1, 0.2, 0.3)


def test_spectral_abelian():
    L = LieAlgebra(1, {}, np.eye(1), ("x",))
    dec = decompose(L, identity_automorphism(L))
    assert residual_spectral(L, dec, 1j, np.zeros(1), 0.1, 0.3 - 0.1j, 0.2 - 0.1j).max_abs() < 1e-15


def test_spectral_leg_swap(sl2):
    # swapping points 1 and 2 and legs 1 and 2 negates the residual
    om = 0.3 * sl2.L.unit("h")
    z1, z2, z3 = SPECTRAL_Z
    corrupt = lambda z, w: 1.001 * r_tau(sl2.L, sl2.dec, 1j, w, z).coeffs
    a = residual_spectral(sl2.L, sl2.dec, 1j, om, *zs(z1, z2, z3), r_override=corrupt).coeffs
    b = residual_spectral(sl2.L, sl2.dec, 1j, om, *zs(z2, z1, z3), r_override=corrupt).coeffs
    assert np.abs(a).max() > 1e-4
    assert np.abs(a + b.transpose(1, 0, 2)).max() < 1e-8


def test_spectral_sensitivity(sl2, rng):
    om = 0.3 * sl2.L.unit("h")
    i, j = rng.integers(0, 3, size=2)

    def bumped(z, w):
        c = r_tau(sl2.L, sl2.dec, 1j, w, z).coeffs.copy()
        c[i, j] += 1e-3
        return c

    assert residual_spectral(sl2.L, sl2.dec, 1j, om, *zs(*SPECTRAL_Z), r_override=bumped).max_abs() > 1e-4


@pytest.fixture(scope="module")
def loop2():
    from dynrmat.liealg import coxeter_automorphism, make_sl
    L, cd = make_sl(2)
    dec = decompose(L, coxeter_automorphism(cd))
    return L, dec, make_affine(L, dec, 4, central=False), make_affine(L, dec, 4)


def test_loop_examples(loop2):
    L, dec, T, _ = loop2
    e, f = L.unit("e"), L.unit("f")
    assert residual_loop(T, 1.0, np.zeros(3), homogeneous(e, 1), homogeneous(f, -1)) < 1e-9
    assert residual_loop(T, 1.0, np.zeros(3), homogeneous(e, 1), homogeneous(f, -1), mode="fd") < 1e-7
    om = 0.2 * L.unit("h")
    assert residual_loop(T, -0.8 + 0.3j, om, homogeneous(L.unit("h"), 0), homogeneous(e, 3)) < 1e-9


def test_loop_window(loop2, rng):
    L, dec, T, _ = loop2
    worst, wit = loop_grade_window_residual(T, -0.8 + 0.3j, 0.15 * L.unit("h"), rng)
    assert worst < 1e-9 and wit is not None


def test_loop_matches_central_version(loop2, rng):
    # dropping c_hat and the d direction leaves the loop-part of the residual unchanged
    L, dec, T, TA = loop2
    om, k = 0.2 * L.unit("h"), -0.7 + 0.2j
    from dynrmat.loopalg import AffineRMatrix, cdybe_operator_residual
    for m, n in [(1, -1), (2, 1), (0, 3), (-2, 2)]:
        X = homogeneous(dec.bases[dec.grade_of(m)] @ rng.normal(size=dec.bases[dec.grade_of(m)].shape[1]), m)
        Y = homogeneous(dec.bases[dec.grade_of(n)] @ rng.normal(size=dec.bases[dec.grade_of(n)].shape[1]), n)
        a = cdybe_operator_residual(T, AffineRMatrix(T, AffineDynVariable(om, k)), X, Y)
        b = theorem1_residual(TA, AffineDynVariable(om, k, 0.9), X, Y)
        for g in set(a.parts) | set(b.parts):
            assert np.abs(a.part(g, 3) - b.part(g, 3)).max() < 1e-12


def test_loop_rejects_central_inputs(loop2):
    L, dec, T, TA = loop2
    with pytest.raises(ValueError):
        residual_loop(TA, 1.0, np.zeros(3), homogeneous(L.unit("e"), 1), homogeneous(L.unit("f"), 1))
    with pytest.raises(ValueError):
        residual_loop(T, 1.0, np.zeros(3), homogeneous(L.unit("h"), 0, d=1.0), homogeneous(L.unit("f"), 1))


def test_evaluation_example(sl2):
    res = evaluation_check(sl2.L, sl2.dec, -math.pi, 0.2 * sl2.L.unit("h"), -0.5j, M=40)
    assert res.max_error < 1e-8
    assert res.decay_rate == pytest.approx(math.pi, rel=0.05)


def test_evaluation_error_decreases(sl3):
    k = -2 * math.pi / 3 * 1.2
    om = sl3.cd.cartan_basis @ np.array([0.1, 0.05j])
    errs = [evaluation_check(sl3.L, sl3.dec, k, om, -0.4j, M=M).max_error for M in (5, 10, 15, 20)]
    floor = 1e-14
    assert all(b < a or b < floor for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-8


def test_evaluation_strip(sl2):
    with pytest.raises(StripViolation):
        evaluation_check(sl2.L, sl2.dec, -math.pi, 0.2 * sl2.L.unit("h"), 0.1j, M=5)
    with pytest.raises(StripViolation):
        evaluation_check(sl2.L, sl2.dec, -math.pi, 0.2 * sl2.L.unit("h"), -1.1j, M=5)
    with pytest.raises(InvalidTau):
        evaluation_check(sl2.L, sl2.dec, math.pi, 0.2 * sl2.L.unit("h"), -0.5j, M=5)


def test_equivariance_random_cartan(sl3, rng):
    L, dec, cd = sl3.L, sl3.dec, sl3.cd
    om = random_admissible_omega(L, dec, rng, tau=1j, scale=0.3)
    T = cd.cartan_basis @ rng.normal(size=2)
    rf = lambda w: r_tau(L, dec, 1j, w, 0.2 - 0.3j).coeffs
    out = equivariance_check(L, rf, om, T)
    assert out["residual"] < 1e-6
    # T -> 2T doubles both sides
    out2 = equivariance_check(L, rf, om, 2 * T)
    assert out2["rhs_max"] == pytest.approx(2 * out["rhs_max"], rel=1e-12)
    assert out2["residual"] < 2e-6


def test_equivariance_nonabelian(sl3_outer, rng):
    L, dec = sl3_outer.L, sl3_outer.dec
    om = dec.g0_from_coords(0.2 * rng.normal(size=3))
    T = dec.g0_from_coords(rng.normal(size=3))
    out = equivariance_check(L, lambda w: r_tau(L, dec, 1j, w, 0.1 - 0.4j).coeffs, om, T)
    assert out["residual"] < 1e-6 and out["rhs_max"] > 1e-3
    out = equivariance_check(L, lambda w: rho_q_tensor(L, dec, 1, w).coeffs, om, T)
    assert out["residual"] < 1e-6


def test_equivariance_stationary_flow(sl3):
    # with [T, omega] = 0 the flow is constant and the commutator term must vanish too
    L, cd, dec = sl3.L, sl3.cd, sl3.dec
    om = cd.cartan_basis @ np.array([0.2, -0.1])
    out = equivariance_check(L, lambda w: r_tau(L, dec, 1j, w, 0.2 - 0.3j).coeffs, om, om)
    assert out["lhs_max"] == 0 and out["residual"] < 1e-12
