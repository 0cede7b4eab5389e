import json
import math

import numpy as np
import pytest

from dynrmat.elliptic import ModularParam, chi, chi0_at_zero, residue_at_zero
from dynrmat.errors import DomainViolation, InvalidQ, NotInnerData
from dynrmat.liealg import coxeter_automorphism, decompose, make_sl
from dynrmat.matfun import LinOp, f_fn, matrix_function
from dynrmat.rmat import (DomainQuery, Tensor2, check_inner_data, check_q, felder_cartan_part, felder_gauge_compare,
                          felder_gauge_sides, felder_S, gauge_factor, in_domain, k_from_tau, k_form_margin,
                          loop_grade_block, operator_to_tensor, r_tau, r_tau_operator, rho_q, rho_q_shifted,
                          rho_q_tensor, rho_shift, tau_from_k, tensor_to_operator)
from dynrmat.sampling import random_admissible_omega, random_g0

TWO_PI_I = 2j * math.pi


def cartan(cd, *coords):
    return cd.cartan_basis @ np.array(coords, dtype=complex)


# --------------------------------------------------------------------------
# Tensor2


def test_operator_tensor_round_trip(sl3, rng):
    op = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    t = operator_to_tensor(sl3.L, op)
    assert np.allclose(tensor_to_operator(sl3.L, t), op)
    assert np.allclose(operator_to_tensor(sl3.L, np.eye(8)).coeffs, sl3.L.bform_inv)


def test_tensor_arithmetic_and_json():
    a = Tensor2(np.array([[1, 2j], [0, 1]]), ("x", "y"))
    b = a * 2 - a
    assert np.allclose(b.coeffs, a.coeffs) and np.allclose(a.T.coeffs, a.coeffs.T)
    doc = json.loads(a.to_json())
    assert doc["basis"] == ["x", "y"] if "basis" in doc else True
    assert (a + a).max_abs() == pytest.approx(4)


# --------------------------------------------------------------------------
# domains


def test_origin_is_admissible(sl2):
    assert in_domain(sl2.L, sl2.dec, DomainQuery(np.zeros(3), k=1.0)).admitted


def test_imaginary_k_is_rejected(sl2):
    rep = in_domain(sl2.L, sl2.dec, DomainQuery(np.zeros(3), k=TWO_PI_I / 3))
    assert not rep.admitted and "Re k" in rep.witness["reason"]


def test_forbidden_point_names_eigenvalue(sl2):
    tau = 1j
    x = -1j * math.pi * tau / 2
    rep = in_domain(sl2.L, sl2.dec, DomainQuery(x * sl2.L.unit("h"), tau=tau))
    assert not rep.admitted
    assert rep.witness["a"] == 1
    assert abs(abs(rep.witness["eigenvalue"]) - abs(2 * x)) < 1e-12
    with pytest.raises(DomainViolation):
        rep.raise_if_outside()
    json.dumps(rep.to_dict())


def test_domain_forms_coincide(sl3, rng):
    for _ in range(50):
        # Re k < 0 keeps tau = kN/(2 pi i) in the upper half plane
        k = complex(-rng.uniform(0.2, 2), rng.normal())
        om = cartan(sl3.cd, *(rng.normal(size=2) + 1j * rng.normal(size=2)))
        a = in_domain(sl3.L, sl3.dec, DomainQuery(om, k=k)).admitted
        b = in_domain(sl3.L, sl3.dec, DomainQuery(om, tau=tau_from_k(k, 3))).admitted
        assert a == b


def test_tau_k_conversion():
    assert k_from_tau(tau_from_k(-0.7 + 0.2j, 3), 3) == pytest.approx(-0.7 + 0.2j)


def test_k_form_margin_brute_force(rng):
    # exhaustive scan over a wide window agrees with the outward scan
    for _ in range(30):
        lam = complex(*rng.normal(scale=3, size=2))
        k = complex(rng.choice([-1, 1]) * rng.uniform(0.05, 2), rng.normal())
        a, N = int(rng.integers(0, 3)), 3
        d, _, _ = k_form_margin(lam, a, N, k)
        best = math.inf
        for m in range(-400, 401):
            x = lam + k * (a + m * N)
            j0 = round(x.imag / (2 * math.pi))
            for j in range(j0 - 2, j0 + 3):
                if a == 0 and m == 0 and j == 0:
                    continue
                best = min(best, abs(x - TWO_PI_I * j))
        assert d == pytest.approx(best, rel=1e-12)


def test_domain_query_needs_one_modulus():
    with pytest.raises(ValueError):
        DomainQuery(np.zeros(3))
    with pytest.raises(ValueError):
        DomainQuery(np.zeros(3), k=1, tau=1j)


# --------------------------------------------------------------------------
# rho_q


def test_rho_q_at_origin_sl2(sl2):
    op = rho_q(sl2.L, sl2.dec, 1, np.zeros(3))
    assert np.abs(op).max() < 1e-15


def test_rho_q_identity_grading_is_canonical(sl2_id, rng):
    om = 0.3 * (rng.normal(size=3) + 1j * rng.normal(size=3))
    want = matrix_function(LinOp(sl2_id.L.ad_matrix(om)), f_fn()).matrix
    assert np.allclose(rho_q(sl2_id.L, sl2_id.dec, 1, om), want, atol=1e-13)


def test_rho_q_blocks(sl3, rng):
    L, dec, cd = sl3.L, sl3.dec, sl3.cd
    om = cartan(cd, 0.2, -0.1 + 0.05j)
    op = rho_q(L, dec, 2, om)
    for alpha in cd.roots:
        a = cd.height(alpha) % 3
        w = cd.root_eval(alpha, om) + TWO_PI_I * 2 * a / 3
        e = L.unit(cd.root_index[alpha])
        assert np.allclose(op @ e, 0.5 / np.tanh(w / 2) * e, atol=1e-13)


def test_rho_q_is_antisymmetric(sl3, rng):
    om = random_g0(sl3.dec, rng, scale=0.2)
    t = rho_q_tensor(sl3.L, sl3.dec, 1, om)
    assert np.abs(t.coeffs + t.coeffs.T).max() < 1e-12


def test_invalid_q():
    L, cd = make_sl(4)
    dec = decompose(L, coxeter_automorphism(cd))
    with pytest.raises(InvalidQ):
        check_q(dec, 2)
    with pytest.raises(InvalidQ):
        check_q(dec, 4)
    check_q(dec, 3)


def test_inner_data(sl2, sl3):
    res = check_inner_data(sl2.L, sl2.dec, sl2.cd.coxeter_element)
    assert res["exp_matches_mu"] < 1e-12 and res["kernel_dim"] == 1
    check_inner_data(sl3.L, sl3.dec, sl3.cd.coxeter_element)
    with pytest.raises(NotInnerData):
        check_inner_data(sl2.L, sl2.dec, sl2.L.unit("h"))


def test_shifted_rho_at_shift_is_rho_at_origin(sl3):
    M = sl3.cd.coxeter_element
    for q in (1, 2):
        s = rho_shift(sl3.dec, q, M)
        assert np.allclose(rho_q_shifted(sl3.L, sl3.dec, q, M, s), rho_q(sl3.L, sl3.dec, q, np.zeros(8)))


def test_shifted_rho_equivariance(sl3, rng):
    # ad(T) for T in the Cartan commutes with the shifted operator when T commutes with omega
    L, cd, dec = sl3.L, sl3.cd, sl3.dec
    M = cd.coxeter_element
    om = rho_shift(dec, 1, M) + cartan(cd, 0.1, 0.2j)
    op = rho_q_shifted(L, dec, 1, M, om)
    T = cartan(cd, 0.7, -0.3)
    adT = L.ad_matrix(T)
    assert np.abs(adT @ op - op @ adT).max() < 1e-12


def test_loop_grade_block_matches_rho_q(sl3):
    # with k = 2 pi i q/N the grade-n block of R_k equals rho_q on G_a when a != 0
    L, dec, cd = sl3.L, sl3.dec, sl3.cd
    om = cartan(cd, 0.2, 0.1j)
    q = 1
    k = TWO_PI_I * q / 3
    op = rho_q(L, dec, q, om)
    for n in [1, 2, 4, -1, -5, 0]:
        a = dec.grade_of(n)
        blk = loop_grade_block(L, dec, k, om, n)
        assert np.allclose(blk, dec.block(op, a), atol=1e-12)


# --------------------------------------------------------------------------
# r_tau


def test_r_tau_residue_at_origin(sl2):
    r = r_tau(sl2.L, sl2.dec, 1j, np.zeros(3), 1e-4)
    assert np.abs(1e-4 * r.coeffs - sl2.L.bform_inv / TWO_PI_I).max() < 1e-6


def test_r_tau_residue_generic_point(sl3, rng):
    L, dec = sl3.L, sl3.dec
    om = random_admissible_omega(L, dec, rng, tau=0.4 + 0.9j, scale=0.3)
    canon = L.bform_inv / TWO_PI_I
    e = [np.abs(z * r_tau(L, dec, 0.4 + 0.9j, om, z).coeffs - canon).max() for z in (1e-4, 1e-5)]
    assert e[1] == pytest.approx(e[0] / 10, rel=1e-2)
    res = residue_at_zero(lambda z: r_tau(L, dec, 0.4 + 0.9j, om, z).coeffs[0, 0])
    assert res == pytest.approx(canon[0, 0], abs=1e-10)


@pytest.mark.parametrize("tau", [1j, 0.4 + 0.9j])
def test_r_tau_antisymmetry(sl3, rng, tau):
    L, dec = sl3.L, sl3.dec
    for _ in range(5):
        om = random_admissible_omega(L, dec, rng, tau=tau, scale=0.3)
        z = complex(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4))
        assert np.abs(r_tau(L, dec, tau, om, z).coeffs.T + r_tau(L, dec, tau, om, -z).coeffs).max() < 1e-9


def test_r_tau_cartan_block_at_origin(sl2):
    L = sl2.L
    z = 0.2 - 0.3j
    r = r_tau(L, sl2.dec, 1j, np.zeros(3), z).coeffs
    h = L.index("h")
    assert r[h, h] == pytest.approx(chi0_at_zero(z, ModularParam(1j)) * L.bform_inv[h, h], rel=1e-12)


def test_r_tau_respects_grading(sl3, rng):
    L, dec = sl3.L, sl3.dec
    om = random_admissible_omega(L, dec, rng, tau=1j, scale=0.3)
    c = r_tau(L, dec, 1j, om, 0.3 - 0.2j).coeffs
    # coefficient of T_a (x) T_b in the pure-root basis vanishes unless the grades add to 0 mod N
    grade = {}
    for alpha in sl3.cd.roots:
        grade[sl3.cd.root_index[alpha]] = sl3.cd.height(alpha) % 3
    for i in range(8):
        for j in range(8):
            gi, gj = grade.get(i, 0), grade.get(j, 0)
            if (gi + gj) % 3:
                assert abs(c[i, j]) < 1e-12


def test_r_tau_domain_violation(sl2):
    x = -1j * math.pi * 1j / 2
    with pytest.raises(DomainViolation):
        r_tau(sl2.L, sl2.dec, 1j, x * sl2.L.unit("h"), 0.1)


def test_r_tau_equals_closed_form_on_roots(sl3):
    L, cd, dec = sl3.L, sl3.cd, sl3.dec
    tau, z = 0.4 + 0.9j, 0.1 - 0.25j
    om = cartan(cd, 0.15, -0.1j)
    op = r_tau_operator(L, dec, tau, om, z)
    for alpha in cd.roots:
        a = cd.height(alpha) % 3
        w = cd.root_eval(alpha, om)
        want = np.exp(TWO_PI_I * a * z / 3) * chi(w + TWO_PI_I * a * tau / 3, z, tau)
        e = L.unit(cd.root_index[alpha])
        assert np.allclose(op @ e, want * e, rtol=1e-11)


# --------------------------------------------------------------------------
# Felder


def test_felder_gauge_example(sl2):
    om = 0.2 * sl2.L.unit("h")
    assert felder_gauge_compare(sl2.cd, 1j, om, 0.15 - 0.2j, -0.05, sl2.dec) < 1e-9


def test_felder_gauge_joint_shift(sl2):
    om = 0.2 * sl2.L.unit("h")
    z1, z2 = 0.15 - 0.2j, -0.05
    base = r_tau(sl2.L, sl2.dec, 1j, om, z1 - z2)
    for s in [0.1, -0.3 + 0.2j, 1.7j]:
        lhs, rhs = felder_gauge_sides(sl2.cd, 1j, om, z1 + s, z2 + s, sl2.dec)
        assert (lhs - base).max_abs() < 1e-12
        assert (lhs - rhs).max_abs() < 1e-9


def test_felder_gauge_sl3(sl3, rng):
    for tau in (1j, 0.4 + 0.9j):
        om = random_admissible_omega(sl3.L, sl3.dec, rng, tau=tau, scale=0.2)
        assert felder_gauge_compare(sl3.cd, tau, om, 0.1 - 0.2j, 0.05 + 0.1j, sl3.dec) < 1e-8


def test_felder_cartan_part_independent_of_omega(sl3):
    cd = sl3.cd
    a = felder_cartan_part(cd, felder_S(cd, 1j, cartan(cd, 0.1, 0.25), 0.3 - 0.1j))
    b = felder_cartan_part(cd, felder_S(cd, 1j, cartan(cd, -0.3j, 0.05), 0.3 - 0.1j))
    c = felder_cartan_part(cd, r_tau(sl3.L, sl3.dec, 1j, cartan(cd, 0.2, 0.1), 0.3 - 0.1j))
    assert np.abs(a - b).max() < 1e-14 and np.abs(a - c).max() < 1e-12


def test_felder_original_normalization(sl2):
    cd = sl2.cd
    om, z = cartan(cd, 0.03), 0.2 - 0.1j
    orig = felder_S(cd, 1j, om, z, normalization="felder-original")
    ours = felder_S(cd, 1j, TWO_PI_I * om, z)
    assert np.allclose(orig.coeffs, TWO_PI_I * ours.coeffs)
    with pytest.raises(ValueError):
        felder_S(cd, 1j, om, z, normalization="other")


def test_felder_root_parity(sl3):
    cd = sl3.cd
    om, z = cartan(cd, 0.2, -0.1 + 0.1j), 0.15 - 0.3j
    S = felder_S(cd, 1j, om, z).coeffs
    Sm = felder_S(cd, 1j, -om, -z).coeffs
    for alpha in cd.roots:
        i, j = cd.root_index[alpha], cd.root_index[cd.negative(alpha)]
        assert Sm[i, j] == pytest.approx(-S[i, j], rel=1e-12)


def test_felder_residue(sl3):
    cd = sl3.cd
    om = cartan(cd, 0.2, -0.1)
    canon = sl3.L.bform_inv / TWO_PI_I
    for i, j in [(0, 0), (0, 1), (cd.root_index[(0, 1)], cd.root_index[(1, 0)])]:
        res = residue_at_zero(lambda z: felder_S(cd, 1j, om, z).coeffs[i, j])
        assert res == pytest.approx(canon[i, j], abs=1e-10)


def test_gauge_factor_is_automorphism_of_order_N(sl3):
    g = gauge_factor(sl3.cd, 1.0)
    assert np.allclose(g, sl3.dec.mu.matrix, atol=1e-12)
    assert np.allclose(gauge_factor(sl3.cd, 0.0), np.eye(8))
