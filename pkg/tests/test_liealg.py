import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynrmat.errors import (AsymmetryFailure, AutomorphismError, FixedPointEmpty, JacobiViolation,
                            NondegeneracyFailure)
from dynrmat.liealg import (Automorphism, LieAlgebra, ad, algebra_to_spec, check_algebra, check_automorphism,
                            check_decomposition, coxeter_automorphism, decompose, identity_automorphism,
                            load_algebra, make_sl, outer_automorphism_sl)

# basis order (e, f, h): [h,e]=2e, [h,f]=-2f, [e,f]=h
SL2_SPEC = {
    "dim": 3,
    "basis_names": ["e", "f", "h"],
    "brackets": [[2, 0, 0, 2, 0], [0, 2, 0, -2, 0], [2, 1, 1, -2, 0], [1, 2, 1, 2, 0],
                 [0, 1, 2, 1, 0], [1, 0, 2, -1, 0]],
    "bform": [0, 1, 0, 1, 0, 0, 0, 0, 2],
}


def test_sl2_document_is_valid():
    L, mu = load_algebra(SL2_SPEC)
    assert mu is None
    res = check_algebra(L)
    assert res["jacobi"] == 0 and res["invariance"] == 0
    assert np.allclose(L.bracket(L.unit("e"), L.unit("f")), L.unit("h"))


def test_abelian_algebra_is_valid():
    L = LieAlgebra(2, {}, np.eye(2), ("x", "y"))
    assert check_algebra(L)["jacobi"] == 0


def test_zero_form_is_degenerate():
    doc = dict(SL2_SPEC, bform=[0] * 9)
    with pytest.raises(NondegeneracyFailure):
        load_algebra(doc)


def test_asymmetric_brackets_are_rejected_with_witness():
    doc = dict(SL2_SPEC, brackets=[[0, 1, 2, 1, 0]])
    with pytest.raises(AsymmetryFailure) as info:
        load_algebra(doc)
    assert info.value.witness is not None
    assert info.value.residual == pytest.approx(1.0)


def test_jacobi_violation_is_reported():
    # [x,y]=z, [y,z]=x, [z,x]=z is antisymmetric but not Lie
    br = []
    for a, b, g in [(0, 1, 2), (1, 2, 0), (2, 0, 2)]:
        br += [[a, b, g, 1, 0], [b, a, g, -1, 0]]
    doc = {"dim": 3, "brackets": br, "bform": [1, 0, 0, 0, 1, 0, 0, 0, 1]}
    with pytest.raises(JacobiViolation) as info:
        load_algebra(doc)
    assert len(info.value.witness) == 3


def test_document_round_trip(sl3):
    mu = coxeter_automorphism(sl3.cd)
    doc = json.loads(json.dumps(algebra_to_spec(sl3.L, mu)))
    L2, mu2 = load_algebra(doc)
    assert np.allclose(L2.struct, sl3.L.struct)
    assert np.allclose(L2.bform, sl3.L.bform)
    assert mu2.order == 3 and np.allclose(mu2.matrix, mu.matrix)


def test_load_from_path(tmp_path):
    p = tmp_path / "alg.json"
    p.write_text(json.dumps(SL2_SPEC))
    L, _ = load_algebra(str(p))
    assert L.dim == 3


def test_make_sl2():
    L, cd = make_sl(2)
    assert L.dim == 3 and cd.rank == 1 and cd.coxeter_number == 2
    assert np.allclose(cd.coxeter_element, 0.5 * L.unit("h"))
    assert len(cd.positive_roots()) == 1


def test_make_sl3():
    L, cd = make_sl(3)
    assert L.dim == 8 and cd.rank == 2 and cd.coxeter_number == 3
    assert len(cd.positive_roots()) == 3
    assert sorted(cd.height(a) for a in cd.positive_roots()) == [1, 1, 2]


@pytest.mark.parametrize("n", [2, 3, 4])
def test_sl_axioms(n):
    L, _ = make_sl(n)
    res = check_algebra(L)
    assert res["jacobi"] < 1e-12 and res["invariance"] < 1e-12


def test_root_values_match_adjoint_action(sl3):
    L, cd = sl3.L, sl3.cd
    x = cd.cartan_basis @ np.array([0.3 + 0.1j, -0.7])
    adx = L.ad_matrix(x)
    for alpha in cd.roots:
        e = L.unit(cd.root_index[alpha])
        assert np.allclose(adx @ e, cd.root_eval(alpha, x) * e)


def test_coxeter_on_sl2(sl2):
    M = sl2.dec.mu.matrix
    L = sl2.L
    assert np.allclose(M @ L.unit("h"), L.unit("h"))
    assert np.allclose(M @ L.unit("e"), -L.unit("e"))
    assert np.allclose(M @ L.unit("f"), -L.unit("f"))


def test_sl2_decomposition(sl2):
    dec = sl2.dec
    assert dec.N == 2 and dec.index_set == (0, 1)
    assert dec.bases[0].shape[1] == 1 and dec.bases[1].shape[1] == 2
    U0 = dec.bases[0][:, 0]
    assert abs(U0[0]) > 0 and np.allclose(U0[1:], 0)
    # e pairs with f inside G_1
    assert sl2.L.B(sl2.L.unit("e"), sl2.L.unit("f")) == 1


def test_sl3_grading(sl3):
    dec, cd, L = sl3.dec, sl3.cd, sl3.L
    assert dec.index_set == (0, 1, 2)
    assert [dec.bases[a].shape[1] for a in dec.index_set] == [2, 3, 3]
    for alpha in cd.roots:
        a = cd.height(alpha) % 3
        assert a != 0
        e = L.unit(cd.root_index[alpha])
        assert np.allclose(dec.projectors[a] @ e, e)


def test_coxeter_element_is_fixed(sl3):
    assert np.allclose(sl3.dec.mu.matrix @ sl3.cd.coxeter_element, sl3.cd.coxeter_element)


@pytest.mark.parametrize("name", ["sl2", "sl3", "sl2_id", "sl3_outer"])
def test_decomposition_residuals(name, request):
    fx = request.getfixturevalue(name)
    res = check_decomposition(fx.dec)
    assert max(res.values()) < 1e-12
    assert check_automorphism(fx.L, fx.dec.mu)["bracket"] < 1e-12


def test_outer_fixed_points_are_so3(sl3_outer):
    assert sl3_outer.dec.bases[0].shape[1] == 3
    assert sl3_outer.dec.bases[1].shape[1] == 5


def test_block_and_lift_round_trip(sl3):
    dec, L = sl3.dec, sl3.L
    x = dec.g0_from_coords([0.4, -0.2j])
    m = L.ad_matrix(x)
    for a in dec.index_set:
        U = dec.bases[a]
        assert np.allclose(dec.lift(dec.block(m, a), a) @ U, m @ U)


def test_ad_of_h(sl2):
    m = ad(sl2.L, sl2.L.unit("h")).matrix
    assert np.allclose(m, np.diag([0, 2, -2]))


def test_ad_of_zero_has_zero_blocks(sl3):
    op = ad(sl3.L, np.zeros(8), sl3.dec)
    assert all(np.allclose(b, 0) for b in op.blocks.values())


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=24, max_size=24))
def test_bform_invariance_property(vals):
    L, _ = make_sl(3)
    v = np.array(vals).reshape(3, 8)
    x, y, z = v
    assert abs(L.B(L.bracket(x, y), z) + L.B(y, L.bracket(x, z))) < 1e-10


def test_non_automorphism_is_rejected(sl2):
    M = np.diag([1.0, 2.0, 0.5])
    with pytest.raises(AutomorphismError):
        check_automorphism(sl2.L, Automorphism(M, 2))


def test_fixed_point_free_automorphism():
    L = LieAlgebra(1, {}, np.eye(1), ("x",))
    with pytest.raises(FixedPointEmpty):
        decompose(L, Automorphism(-np.eye(1), 2))


def test_identity_grading_is_trivial(sl2_id):
    assert sl2_id.dec.N == 1 and sl2_id.dec.index_set == (0,)
    assert sl2_id.dec.bases[0].shape[1] == 3
    assert identity_automorphism(sl2_id.L).order == 1


def test_outer_automorphism_has_order_two():
    L, cd = make_sl(4)
    mu = outer_automorphism_sl(L, cd)
    assert check_automorphism(L, mu)["order"] < 1e-12
