"""Self-dual Lie algebras, finite-order automorphisms and graded decompositions.

Elements of an algebra are coefficient vectors over a fixed ordered basis
``T_0, ..., T_{dim-1}``. The bracket is encoded by structure constants
``[T_a, T_b] = c[a, b, g] T_g`` and the invariant form by the Gram matrix
``bform[a, b] = B(T_a, T_b)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import (
    AlgebraError,
    AsymmetryFailure,
    AutomorphismError,
    FixedPointEmpty,
    InvarianceFailure,
    JacobiViolation,
    NondegeneracyFailure,
)
from .settings import DEFAULT, Settings


@dataclass(frozen=True, eq=False)
class LieAlgebra:
    dim: int
    structure_constants: dict  # (a, b, g) -> complex, sparse
    bform: np.ndarray
    basis_names: tuple = ()
    name: str = ""

    def __post_init__(self):
        if not self.basis_names:
            object.__setattr__(self, "basis_names", tuple(f"T{i}" for i in range(self.dim)))
        object.__setattr__(self, "bform", np.asarray(self.bform, dtype=complex))

    @cached_property
    def struct(self) -> np.ndarray:
        """Dense ``c[a, b, g]`` array."""
        c = np.zeros((self.dim,) * 3, dtype=complex)
        for (a, b, g), v in self.structure_constants.items():
            c[a, b, g] = v
        return c

    @cached_property
    def bform_inv(self) -> np.ndarray:
        return np.linalg.inv(self.bform)

    def index(self, name: str) -> int:
        return self.basis_names.index(name)

    def unit(self, i) -> np.ndarray:
        if isinstance(i, str):
            i = self.index(i)
        v = np.zeros(self.dim, dtype=complex)
        v[i] = 1.0
        return v

    def bracket(self, x, y) -> np.ndarray:
        return np.einsum("a,b,abg->g", x, y, self.struct)

    def B(self, x, y) -> complex:
        return complex(np.asarray(x) @ self.bform @ np.asarray(y))

    def ad_matrix(self, x) -> np.ndarray:
        # column b holds the coefficients of [x, T_b]
        return np.einsum("a,abg->gb", np.asarray(x, dtype=complex), self.struct)

    def casimir(self) -> np.ndarray:
        """Coefficients of the canonical element ``T_a (x) T^a``."""
        return self.bform_inv.copy()

    def validate(self, settings: Settings = DEFAULT) -> None:
        check_algebra(self, settings)


def _worst(arr):
    idx = np.unravel_index(np.argmax(np.abs(arr)), arr.shape)
    return tuple(int(i) for i in idx), float(np.abs(arr[idx]))


def check_algebra(L: LieAlgebra, settings: Settings = DEFAULT) -> dict:
    """Verify the self-dual Lie algebra axioms; return the residuals."""
    tol = settings.tol_algebra
    c = L.struct
    res = {}

    sym = c + c.transpose(1, 0, 2)
    w, r = _worst(sym) if sym.size else ((), 0.0)
    res["antisymmetry"] = r
    if r > tol:
        raise AsymmetryFailure(f"c[a,b,g] + c[b,a,g] = {r:.3e} at (a,b,g)={w}", w, r)

    # J[a,b,d,e] = sum_g c[a,b,g] c[g,d,e] summed over cyclic (a,b,d)
    cc = np.einsum("abg,gde->abde", c, c)
    jac = cc + cc.transpose(1, 2, 0, 3) + cc.transpose(2, 0, 1, 3)
    w, r = _worst(jac) if jac.size else ((), 0.0)
    res["jacobi"] = r
    if r > tol:
        raise JacobiViolation(f"Jacobi residual {r:.3e} at index triple {w[:3]}", w[:3], r)

    B = L.bform
    asym = B - B.T
    w, r = _worst(asym)
    res["bform_symmetry"] = r
    if r > tol:
        raise AsymmetryFailure(f"bilinear form not symmetric: {r:.3e} at {w}", w, r)

    smin = float(np.linalg.svd(B, compute_uv=False).min()) if L.dim else 1.0
    res["bform_smin"] = smin
    if smin <= settings.tol_degenerate:
        raise NondegeneracyFailure(f"bilinear form is degenerate (smallest singular value {smin:.3e})",
                                   None, smin)

    # B([x,y],z) + B(y,[x,z]) over basis triples
    bc = np.einsum("abg,gd->abd", c, B)
    inv = bc + bc.transpose(0, 2, 1)
    w, r = _worst(inv) if inv.size else ((), 0.0)
    res["invariance"] = r
    if r > tol:
        raise InvarianceFailure(f"B not ad-invariant: residual {r:.3e} at (x,y,z)={w}", w, r)
    return res


# --------------------------------------------------------------------------
# Automorphisms

@dataclass(frozen=True, eq=False)
class Automorphism:
    matrix: np.ndarray
    order: int

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))


def check_automorphism(L: LieAlgebra, mu: Automorphism, settings: Settings = DEFAULT) -> dict:
    tol = settings.tol_algebra
    M = mu.matrix
    res = {}
    r = float(np.abs(np.linalg.matrix_power(M, mu.order) - np.eye(L.dim)).max())
    res["order"] = r
    if r > tol:
        raise AutomorphismError(f"mu^{mu.order} differs from the identity by {r:.3e}", None, r)
    lhs = np.einsum("abg,hg->abh", L.struct, M)
    rhs = np.einsum("xa,yb,xyh->abh", M, M, L.struct)
    w, r = _worst(lhs - rhs)
    res["bracket"] = r
    if r > tol:
        raise AutomorphismError(f"mu does not preserve the bracket on basis pair {w[:2]} ({r:.3e})", w[:2], r)
    w, r = _worst(M.T @ L.bform @ M - L.bform)
    res["bform"] = r
    if r > tol:
        raise AutomorphismError(f"mu does not preserve B at {w} ({r:.3e})", w, r)
    return res


def identity_automorphism(L: LieAlgebra) -> Automorphism:
    return Automorphism(np.eye(L.dim), 1)


# --------------------------------------------------------------------------
# Graded decomposition

@dataclass(frozen=True, eq=False)
class GradedDecomposition:
    """Eigenspace decomposition ``G = sum_a G_a`` of a finite-order automorphism.

    ``bases[a]`` has columns ``T_{a,j}`` spanning ``G_a``; ``duals[a]`` has
    columns ``T_a^j`` in ``G_a`` paired with ``bases[(N - a) % N]``, i.e.
    ``B(T_{N-a,j}, T_a^l) = delta_j^l``.
    """

    algebra: LieAlgebra
    mu: Automorphism
    index_set: tuple
    bases: dict
    projectors: dict
    duals: dict
    pairing_cond: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.mu.order

    def partner(self, a: int) -> int:
        return (-a) % self.N

    def grade_of(self, n: int) -> int:
        return n % self.N

    def coords(self, a: int) -> np.ndarray:
        """Left inverse of ``bases[a]``: maps a vector of ``G_a`` to its coordinates."""
        return self.duals[self.partner(a)].T @ self.algebra.bform

    def block(self, op: np.ndarray, a: int) -> np.ndarray:
        """Restriction of an operator preserving ``G_a`` to ``G_a``, in the basis ``bases[a]``."""
        return self.coords(a) @ op @ self.bases[a]

    def lift(self, blk: np.ndarray, a: int) -> np.ndarray:
        """dim x dim operator acting as ``blk`` on ``G_a`` and as zero on the other eigenspaces."""
        return self.bases[a] @ blk @ self.coords(a)

    def ad_block(self, x, a: int) -> np.ndarray:
        return self.block(self.algebra.ad_matrix(x), a)

    def g0_basis(self) -> np.ndarray:
        return self.bases[0]

    def g0_dual(self) -> np.ndarray:
        return self.duals[0]

    def g0_from_coords(self, coeffs) -> np.ndarray:
        return self.bases[0] @ np.asarray(coeffs, dtype=complex)


def _range_basis(P: np.ndarray, tol: float) -> np.ndarray:
    """Columns of P selected by pivoted QR; for a basis adapted to P these are unit vectors."""
    if not np.any(np.abs(P) > tol):
        return np.zeros((P.shape[0], 0), dtype=complex)
    _, R, piv = scipy.linalg.qr(P, pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * max(1.0, diag[0])))
    cols = np.sort(piv[:rank])
    B = P[:, cols].copy()
    B[np.abs(B) < 1e-15] = 0.0
    return B


def decompose(L: LieAlgebra, mu: Automorphism, settings: Settings = DEFAULT) -> GradedDecomposition:
    N = mu.order
    powers = [np.eye(L.dim, dtype=complex)]
    for _ in range(1, N):
        powers.append(mu.matrix @ powers[-1])
    projectors, bases = {}, {}
    for a in range(N):
        P = sum(np.exp(-2j * np.pi * a * k / N) * powers[k] for k in range(N)) / N
        U = _range_basis(P, 1e-9)
        if U.shape[1]:
            projectors[a] = P
            bases[a] = U
    if 0 not in bases:
        raise FixedPointEmpty("automorphism has no nonzero fixed points (G_0 = 0)")
    total = sum(U.shape[1] for U in bases.values())
    if total != L.dim:
        raise AutomorphismError(f"eigenspaces span dimension {total}, expected {L.dim}")
    duals, cond = {}, {}
    for b, Ub in bases.items():
        partner = (-b) % N
        if partner not in bases:
            raise AutomorphismError(f"G_{b} is nonzero but G_{partner} is zero; B cannot pair them")
        gram = bases[partner].T @ L.bform @ Ub
        cond[b] = float(np.linalg.cond(gram))
        duals[b] = Ub @ np.linalg.inv(gram)
    return GradedDecomposition(L, mu, tuple(sorted(bases)), bases, projectors, duals, cond)


def check_decomposition(dec: GradedDecomposition, settings: Settings = DEFAULT) -> dict:
    """Residuals of the grading, orthogonality, pairing and eigenvector identities."""
    L, N = dec.algebra, dec.N
    res = {"bracket_grading": 0.0, "orthogonality": 0.0, "pairing": 0.0, "eigen": 0.0}
    res["completeness"] = float(np.abs(sum(dec.projectors.values()) - np.eye(L.dim)).max())
    for a in dec.index_set:
        P = dec.projectors[a]
        res["eigen"] = max(res["eigen"], float(np.abs(dec.mu.matrix @ P - np.exp(2j * np.pi * a / N) * P).max()))
        for b in dec.index_set:
            Ua, Ub = dec.bases[a], dec.bases[b]
            br = np.einsum("ai,bj,abg->gij", Ua, Ub, L.struct)
            c = (a + b) % N
            Pc = dec.projectors.get(c, np.zeros((L.dim, L.dim)))
            off = br - np.einsum("gh,hij->gij", Pc, br)
            if off.size:
                res["bracket_grading"] = max(res["bracket_grading"], float(np.abs(off).max()))
            if (a + b) % N != 0:
                g = Ua.T @ L.bform @ Ub
                if g.size:
                    res["orthogonality"] = max(res["orthogonality"], float(np.abs(g).max()))
        pairing = dec.bases[dec.partner(a)].T @ L.bform @ dec.duals[a]
        res["pairing"] = max(res["pairing"], float(np.abs(pairing - np.eye(pairing.shape[0])).max()))
    return res


# --------------------------------------------------------------------------
# sl(n) with Chevalley basis

@dataclass(frozen=True, eq=False)
class CartanData:
    algebra: LieAlgebra
    cartan_basis: np.ndarray       # columns H_i (simple coroots)
    cartan_dual: np.ndarray        # columns H^i, B(H_i, H^j) = delta
    roots: tuple                   # root labels (i, j) for E_ij, i != j
    root_values: dict              # label -> values alpha(H_k) on the Cartan basis
    root_index: dict               # label -> basis index of E_alpha
    simple_roots: tuple
    coxeter_element: np.ndarray    # J as a coefficient vector
    matrices: tuple = ()           # defining n x n matrices of the basis

    @property
    def rank(self) -> int:
        return self.cartan_basis.shape[1]

    def positive_roots(self):
        return tuple(r for r in self.roots if r[0] < r[1])

    def negative(self, alpha):
        return (alpha[1], alpha[0])

    def root_eval(self, alpha, x) -> complex:
        """alpha(x) for x in the Cartan subalgebra (given as an algebra vector)."""
        # coordinates of x in the H basis through the dual basis
        coords = self.cartan_dual.T @ self.algebra.bform @ x
        return complex(np.dot(self.root_values[alpha], coords))

    def height(self, alpha) -> int:
        return int(round(self.root_eval(alpha, self.coxeter_element).real))

    @cached_property
    def coxeter_number(self) -> int:
        ev = np.linalg.eigvals(self.algebra.ad_matrix(self.coxeter_element))
        return int(round(max(ev.real))) + 1


def _expand_slN(M: np.ndarray, n: int, names_index) -> np.ndarray:
    """Coefficients of a traceless n x n matrix in the sl_n Chevalley basis."""
    v = np.zeros(n * n - 1, dtype=complex)
    for i in range(n):
        for j in range(n):
            if i != j:
                v[names_index[(i, j)]] = M[i, j]
    # diag(d) = sum_k c_k (e_k - e_{k+1})  =>  c_k = d_0 + ... + d_k
    v[: n - 1] = np.cumsum(np.diag(M))[: n - 1]
    return v


def make_sl(n: int) -> tuple[LieAlgebra, CartanData]:
    """sl_n with the trace form and a Chevalley basis.

    Basis order: ``H_1..H_{n-1}``, then ``E_ij`` for positive roots sorted by
    height, then the corresponding negative root vectors.
    """
    if n < 2:
        raise ValueError("make_sl needs n >= 2")
    pos = sorted(((i, j) for i in range(n) for j in range(i + 1, n)), key=lambda r: (r[1] - r[0], r[0]))
    neg = [(j, i) for (i, j) in pos]
    mats, names = [], []
    for k in range(n - 1):
        H = np.zeros((n, n))
        H[k, k], H[k + 1, k + 1] = 1, -1
        mats.append(H)
        names.append("h" if n == 2 else f"H{k + 1}")
    index = {}
    for r in pos + neg:
        E = np.zeros((n, n))
        E[r] = 1
        index[r] = len(mats)
        mats.append(E)
        if n == 2:
            names.append("e" if r == (0, 1) else "f")
        else:
            names.append(f"E{r[0] + 1}{r[1] + 1}")
    dim = n * n - 1
    sc = {}
    for a in range(dim):
        for b in range(dim):
            C = mats[a] @ mats[b] - mats[b] @ mats[a]
            v = _expand_slN(C, n, index)
            for g in np.nonzero(np.abs(v) > 0)[0]:
                sc[(a, b, int(g))] = complex(v[g])
    bform = np.array([[np.trace(x @ y) for y in mats] for x in mats], dtype=complex)
    L = LieAlgebra(dim, sc, bform, tuple(names), name=f"sl{n}")

    H = np.zeros((dim, n - 1), dtype=complex)
    H[: n - 1, : n - 1] = np.eye(n - 1)
    gram = H.T @ bform @ H
    Hd = H @ np.linalg.inv(gram)
    roots = tuple(pos + neg)
    root_values = {}
    for (i, j) in roots:
        # alpha_ij(H_k) = (H_k)_ii - (H_k)_jj
        root_values[(i, j)] = np.array([mats[k][i, i] - mats[k][j, j] for k in range(n - 1)], dtype=complex)
    simple = tuple((k, k + 1) for k in range(n - 1))
    # alpha_k(J) = 1 for the simple roots; solve in the H coordinates
    A = np.array([root_values[s] for s in simple])
    Jc = np.linalg.solve(A, np.ones(n - 1))
    J = H @ Jc
    cd = CartanData(L, H, Hd, roots, root_values, dict(index), simple, J, tuple(mats))
    return L, cd


def coxeter_automorphism(cd: CartanData) -> Automorphism:
    """``mu = exp(2 pi i/N ad J)``, computed from the (integer) spectrum of ad J."""
    from .matfun import LinOp, exp_fn, matrix_function

    N = cd.coxeter_number
    adJ = LinOp(cd.algebra.ad_matrix(cd.coxeter_element))
    mu = matrix_function(adJ, exp_fn(2j * np.pi / N)).matrix
    return Automorphism(mu, N)


def outer_automorphism_sl(L: LieAlgebra, cd: CartanData) -> Automorphism:
    """The order-2 automorphism ``X -> -X^T`` of sl_n (fixed points so_n)."""
    n = len(cd.matrices[0])
    index = {r: cd.root_index[r] for r in cd.roots}
    cols = [_expand_slN(-M.T, n, index) for M in cd.matrices]
    return Automorphism(np.array(cols).T, 2)


def ad(L: LieAlgebra, x, dec: GradedDecomposition | None = None):
    """Adjoint operator of ``x``; with ``dec`` the blocks ``(ad x)_a`` are attached."""
    from .matfun import LinOp

    m = L.ad_matrix(x)
    blocks = None if dec is None else {a: dec.block(m, a) for a in dec.index_set}
    return LinOp(m, blocks=blocks)


# --------------------------------------------------------------------------
# AlgebraSpec documents

def _cx(pair):
    if isinstance(pair, (int, float)):
        return complex(pair)
    re, im = pair
    return complex(re, im)


def _pair(z):
    z = complex(z)
    return [z.real, z.imag]


def _dense(entries, dim, what):
    flat = [_cx(p) for p in entries]
    if len(flat) != dim * dim:
        raise AlgebraError(f"{what} has {len(flat)} entries, expected {dim * dim}")
    return np.array(flat, dtype=complex).reshape(dim, dim)


def load_algebra(spec, settings: Settings = DEFAULT):
    """Build and validate an algebra from an AlgebraSpec document.

    ``spec`` may be a dict, a JSON string or a path. Returns ``(algebra,
    automorphism_or_None)``.
    """
    if isinstance(spec, (str, bytes)) and not str(spec).lstrip().startswith("{"):
        with open(spec) as fh:
            spec = json.load(fh)
    elif isinstance(spec, (str, bytes)):
        spec = json.loads(spec)
    dim = int(spec["dim"])
    if dim <= 0:
        raise AlgebraError("dim must be positive")
    sc = {}
    for a, b, g, re, im in spec.get("brackets", []):
        key = (int(a), int(b), int(g))
        sc[key] = sc.get(key, 0) + complex(re, im)
    bform = _dense(spec["bform"], dim, "bform")
    names = tuple(spec.get("basis_names", ()))
    L = LieAlgebra(dim, sc, bform, names, name=spec.get("name", ""))
    check_algebra(L, settings)
    mu = None
    if spec.get("automorphism"):
        am = spec["automorphism"]
        mu = Automorphism(_dense(am["matrix"], dim, "automorphism matrix"), int(am["order"]))
        check_automorphism(L, mu, settings)
    return L, mu


def algebra_to_spec(L: LieAlgebra, mu: Automorphism | None = None) -> dict:
    doc = {
        "dim": L.dim,
        "basis_names": list(L.basis_names),
        "brackets": [[a, b, g, complex(v).real, complex(v).imag]
                     for (a, b, g), v in sorted(L.structure_constants.items()) if v != 0],
        "bform": [_pair(z) for z in L.bform.ravel()],
    }
    if L.name:
        doc["name"] = L.name
    if mu is not None:
        doc["automorphism"] = {"order": mu.order, "matrix": [_pair(z) for z in mu.matrix.ravel()]}
    return doc
