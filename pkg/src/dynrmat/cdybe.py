"""CDYBE residuals for the finite-dimensional, loop and spectral r-matrices.

Tensor brackets use the structure constants ``[T_a, T_b] = C[a, b, g] T_g``:

    [r12, s13] = r[a,b] s[d,e] [T_a, T_d] (x) T_b (x) T_e
    [r12, s23] = r[a,b] s[d,e] T_a (x) [T_b, T_d] (x) T_e
    [r13, s23] = r[a,b] s[d,e] T_a (x) T_d (x) [T_b, T_e]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import elliptic
from .errors import InconsistentSpectralParams, InvalidTau, StripViolation
from .liealg import GradedDecomposition, LieAlgebra
from .loopalg import AffineDynVariable, AffineElement, AffineRMatrix, TruncatedAffine, cdybe_operator_residual
from .matfun import TWO_PI_I, LinOp, ScalarFn, f_fn, matrix_function
from .rmat import (
    DomainQuery,
    blockwise_derivative,
    blockwise_function,
    in_domain,
    r_tau_fns,
    r_tau_operator,
    tau_from_k,
)
from .settings import DEFAULT, Settings


@dataclass(frozen=True, eq=False)
class Tensor3:
    coeffs: np.ndarray
    basis_names: tuple = ()

    def max_abs(self) -> float:
        return float(np.abs(self.coeffs).max()) if self.coeffs.size else 0.0

    def fro(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def argmax(self) -> tuple:
        return tuple(int(i) for i in np.unravel_index(np.argmax(np.abs(self.coeffs)), self.coeffs.shape))


@dataclass(frozen=True)
class DerivativeScheme:
    """How derivatives along G_0 are taken: ``analytic`` (divided differences) or ``fd``."""

    mode: str = "analytic"
    fd_step: float = 1e-5

    def __post_init__(self):
        if self.mode not in ("analytic", "fd"):
            raise ValueError(f"unknown derivative mode {self.mode!r}")


def bracket_12_13(C, r, s):
    return np.einsum("ab,de,adx->xbe", r, s, C)


def bracket_12_23(C, r, s):
    return np.einsum("ab,de,bdx->axe", r, s, C)


def bracket_13_23(C, r, s):
    return np.einsum("ab,de,bex->adx", r, s, C)


# --------------------------------------------------------------------------
# Blockwise r-matrix families


@dataclass(frozen=True, eq=False)
class BlockRMatrix:
    """``omega -> sum_a fns[a]((ad (omega - shift))_a)`` lifted to ``G``.

    Covers rho_q, its shifted version, the canonical r-matrix (N = 1) and
    ``R_tau(., z)`` at fixed z.
    """

    algebra: LieAlgebra
    dec: GradedDecomposition
    fns: dict
    shift: np.ndarray | None = None
    settings: Settings = DEFAULT

    def _arg(self, omega):
        omega = np.asarray(omega, dtype=complex)
        return omega if self.shift is None else omega - self.shift

    def __call__(self, omega) -> np.ndarray:
        return blockwise_function(self.algebra, self.dec, self.fns, self._arg(omega), self.settings)

    def derivative(self, omega, T, scheme: DerivativeScheme = DerivativeScheme()) -> np.ndarray:
        if scheme.mode == "analytic":
            return blockwise_derivative(self.algebra, self.dec, self.fns, self._arg(omega), T, self.settings)
        return fd_derivative(self, omega, T, scheme.fd_step)


def fd_derivative(rfun: Callable, omega, T, step: float = 1e-5) -> np.ndarray:
    """Central difference of ``rfun`` along the real line ``omega + t T``."""
    omega = np.asarray(omega, dtype=complex)
    h = step * max(1.0, float(np.abs(omega).max(initial=0)))
    return (rfun(omega + h * T) - rfun(omega - h * T)) / (2 * h)


def _derivative(rfun, omega, T, scheme):
    if hasattr(rfun, "derivative"):
        return rfun.derivative(omega, T, scheme)
    if scheme.mode == "analytic":
        raise ValueError("analytic derivatives need an r-matrix family with a derivative method")
    return fd_derivative(rfun, omega, T, scheme.fd_step)


# --------------------------------------------------------------------------
# Operator CDYBE on (G, G_0)


@dataclass
class ResidualResult:
    residual_max: float
    residual_fro: float
    witness: tuple
    tensor: np.ndarray = field(repr=False, default=None)


def residual_finite(L: LieAlgebra, dec: GradedDecomposition, rfun, omega,
                    scheme: DerivativeScheme = DerivativeScheme()) -> ResidualResult:
    """Operator CDYBE with A = G, K = G_0 evaluated on all basis pairs ``(T_a, T_b)``.

    ``out[g, a, b]`` is the g-component of the residual at ``X = T_a, Y = T_b``.
    """
    C = L.struct
    omega = np.asarray(omega, dtype=complex)
    R = rfun(omega)
    U0, D0 = dec.bases[0], dec.duals[0]
    coords0 = dec.coords(0)
    # D[i] = nabla_{K_i} R with K_i the columns of U0
    D = np.array([_derivative(rfun, omega, U0[:, i], scheme) for i in range(U0.shape[1])])
    out = np.einsum("ia,jb,ijg->gab", R, R, C)
    inner = np.einsum("jb,ajg->gab", R, C) + np.einsum("ia,ibg->gab", R, C)
    out -= np.einsum("hg,gab->hab", R, inner)
    if D.size:
        # <X, (nabla R) Y> = sum_i K^i B(X, D_i Y)
        out += np.einsum("gi,iab->gab", D0, np.einsum("ac,icb->iab", L.bform, D))
        # (nabla_{Y_0} R) X - (nabla_{X_0} R) Y
        out += np.einsum("ib,iga->gab", coords0, D)
        out -= np.einsum("ia,igb->gab", coords0, D)
    out += 0.25 * np.transpose(C, (2, 0, 1))
    g, a, b = np.unravel_index(np.argmax(np.abs(out)), out.shape)
    return ResidualResult(float(np.abs(out).max()), float(np.linalg.norm(out)),
                          (int(a), int(b)), out)


# --------------------------------------------------------------------------
# Spectral CDYBE


def spectral_r_family(L, dec, tau, z, settings: Settings = DEFAULT) -> BlockRMatrix:
    return BlockRMatrix(L, dec, r_tau_fns(dec, tau, z, settings), None, settings)


def spectral_residual_from(L: LieAlgebra, dec: GradedDecomposition, r_of: Callable, dr_of: Callable,
                           omega) -> Tensor3:
    """Residual tensor given ``r_of(label)`` (coefficients) and ``dr_of(label, direction)``.

    ``label`` is one of ``"12", "13", "23"``.
    """
    C = L.struct
    r12, r13, r23 = r_of("12"), r_of("13"), r_of("23")
    out = bracket_12_13(C, r12, r13) + bracket_12_23(C, r12, r23) + bracket_13_23(C, r13, r23)
    U0, D0 = dec.bases[0], dec.duals[0]
    for j in range(U0.shape[1]):
        Tj, Tdual = U0[:, j], D0[:, j]
        out += np.einsum("a,de->ade", Tj, dr_of("23", Tdual))
        out -= np.einsum("b,ae->abe", Tj, dr_of("13", Tdual))
        out += np.einsum("e,ab->abe", Tj, dr_of("12", Tdual))
    return Tensor3(out, L.basis_names)


def residual_spectral(L: LieAlgebra, dec: GradedDecomposition, tau: complex, omega, z12: complex,
                      z13: complex, z23: complex, scheme: DerivativeScheme = DerivativeScheme(),
                      settings: Settings = DEFAULT, r_override: Callable | None = None) -> Tensor3:
    """Spectral CDYBE residual of ``r_tau``; derivatives along ``omega_j = B(omega, T_j)``.

    ``r_override(z, omega)`` replaces the coefficient map (used for
    sensitivity checks); derivatives are then taken by finite differences.
    """
    z12, z13, z23 = complex(z12), complex(z13), complex(z23)
    if abs(z12 + z23 - z13) > 1e-12 * max(1.0, abs(z13)):
        raise InconsistentSpectralParams(f"z12 + z23 = {z12 + z23} differs from z13 = {z13}")
    omega = np.asarray(omega, dtype=complex)
    in_domain(L, dec, DomainQuery(omega, tau=tau), settings).raise_if_outside("omega (elliptic domain)")
    zs = {"12": z12, "13": z13, "23": z23}
    Binv = L.bform_inv
    if r_override is None:
        fams = {lbl: spectral_r_family(L, dec, tau, z, settings) for lbl, z in zs.items()}
        cache = {lbl: fam(omega) @ Binv for lbl, fam in fams.items()}
        r_of = cache.__getitem__
        dr_of = lambda lbl, T: fams[lbl].derivative(omega, T, scheme) @ Binv
    else:
        r_of = lambda lbl: r_override(zs[lbl], omega)
        dr_of = lambda lbl, T: fd_derivative(lambda w: r_override(zs[lbl], w), omega, T, scheme.fd_step)
    return spectral_residual_from(L, dec, r_of, dr_of, omega)


# --------------------------------------------------------------------------
# Loop algebra CDYBE


def residual_loop(TA: TruncatedAffine, k: complex, omega, X: AffineElement, Y: AffineElement,
                  mode: str = "analytic", settings: Settings = DEFAULT) -> float:
    """Loop-algebra CDYBE (c_hat set to zero) for ``R_k(omega)``; returns the max residual."""
    if TA.central:
        raise ValueError("residual_loop needs the algebra without central extension")
    if any(x.c or x.d for x in (X, Y)):
        raise ValueError("loop algebra elements carry no d or c_hat component")
    R = AffineRMatrix(TA, AffineDynVariable(np.asarray(omega, dtype=complex), complex(k)), settings)
    return cdybe_operator_residual(TA, R, X, Y, mode).norm()


def loop_grade_window_residual(TA: TruncatedAffine, k: complex, omega, rng=None, mode: str = "analytic",
                               settings: Settings = DEFAULT) -> tuple:
    """Max loop residual over all in-window grade pairs with random homogeneous X, Y."""
    rng = rng or np.random.default_rng(0)
    dec = TA.dec
    worst, witness = 0.0, None
    for m in TA.grades():
        for n in TA.grades():
            if abs(m + n) > TA.cutoff:
                continue
            U, V = dec.bases[dec.grade_of(m)], dec.bases[dec.grade_of(n)]
            X = AffineElement({m: U @ rng.normal(size=U.shape[1])})
            Y = AffineElement({n: V @ rng.normal(size=V.shape[1])})
            r = residual_loop(TA, k, omega, X, Y, mode, settings)
            if r > worst:
                worst, witness = r, (m, n)
    return worst, witness


# --------------------------------------------------------------------------
# Evaluation of the loop r-matrix at two points


def _psi_term_fn(k: complex, N: int, a: int, m: int, z: complex) -> ScalarFn:
    """``w -> e^{2 pi i z m} (1 + coth((k N m + k a + w)/2))``."""
    E = TWO_PI_I * z * m
    s = k * (N * m + a)
    return ScalarFn("psi_term", lambda w: elliptic.exp_times_one_plus_coth(E, (s + w) / 2))


def psi_block(L: LieAlgebra, dec: GradedDecomposition, k: complex, omega, z: complex, a: int, M: int,
              settings: Settings = DEFAULT):
    """Partial sum ``|m| <= M`` of the operator series for ``psi_a((ad omega)_a, z|k)``.

    Returns ``(block, term_norms)`` with ``term_norms[m]`` the norm of the
    combined ``+m, -m`` contribution.
    """
    N = dec.N
    A = LinOp(dec.ad_block(omega, a), settings)
    n = A.n
    norms = {}
    if a == 0:
        total = 0.5 * np.eye(n) + matrix_function(A, f_fn()).matrix
        ms = range(1, M + 1)
        for m in ms:
            t = sum(matrix_function(A, _psi_term_fn(k, N, 0, s, z)).matrix for s in (m, -m))
            norms[m] = float(np.abs(t).max()) / 2
            total = total + 0.5 * t
        return total, norms
    total = 0.5 * matrix_function(A, _psi_term_fn(k, N, a, 0, z)).matrix
    norms[0] = float(np.abs(total).max())
    for m in range(1, M + 1):
        t = sum(matrix_function(A, _psi_term_fn(k, N, a, s, z)).matrix for s in (m, -m))
        norms[m] = float(np.abs(t).max()) / 2
        total = total + 0.5 * t
    return np.exp(TWO_PI_I * a * z / N) * total, norms


@dataclass
class EvaluationResult:
    block_errors: dict
    max_error: float
    decay_rate: float
    term_norms: dict = field(repr=False, default_factory=dict)


def evaluation_coefficients(L: LieAlgebra, dec: GradedDecomposition, blocks: dict) -> np.ndarray:
    """Contract ``B(T_{N-a,j}, psi_a T_{a,l}) T_a^j (x) T_{N-a}^l`` over all a."""
    out = np.zeros((L.dim, L.dim), dtype=complex)
    for a, psi in blocks.items():
        p = dec.partner(a)
        gram = dec.bases[p].T @ L.bform @ dec.bases[a]
        out += dec.duals[a] @ (gram @ psi) @ dec.duals[p].T
    return out


def evaluation_check(L: LieAlgebra, dec: GradedDecomposition, k: complex, omega, z: complex, M: int = 40,
                     settings: Settings = DEFAULT) -> EvaluationResult:
    """Compare the evaluated loop r-matrix (series truncated at |m| <= M) with ``r_tau``."""
    N = dec.N
    k, z = complex(k), complex(z)
    tau = tau_from_k(k, N)
    if not tau.imag > 0:
        raise InvalidTau(f"tau = kN/(2 pi i) = {tau} needs Im tau > 0 (Re k < 0)")
    if not -tau.imag < z.imag < 0:
        raise StripViolation(f"Im z = {z.imag} outside the strip (-Im tau, 0) = ({-tau.imag}, 0): "
                             "the series do not converge", witness=z)
    omega = np.asarray(omega, dtype=complex)
    in_domain(L, dec, DomainQuery(omega, k=k), settings).raise_if_outside("omega")
    blocks, norms = {}, {}
    for a in dec.index_set:
        blocks[a], norms[a] = psi_block(L, dec, k, omega, z, a, M, settings)
    approx = evaluation_coefficients(L, dec, blocks)
    exact = r_tau_operator(L, dec, tau, omega, z, settings) @ L.bform_inv
    errors = {}
    for a in dec.index_set:
        # the a-block of either tensor: first leg in G_a
        P = dec.projectors[a]
        errors[a] = float(np.abs(P @ (approx - exact)).max())
    tails = [max(norms[a].get(m, 0.0) for a in dec.index_set) for m in range(M + 1)]
    rate = _decay_rate(tails)
    return EvaluationResult(errors, max(errors.values()), rate, norms)


def _decay_rate(tails: list) -> float:
    """Geometric decay rate of the term norms, fitted over the second half of the range."""
    M = len(tails) - 1
    lo = max(1, M // 2)
    pts = [(m, math.log(t)) for m, t in enumerate(tails) if m >= lo and t > 1e-300]
    if len(pts) < 2:
        return math.inf
    xs, ys = np.array(pts).T
    slope = np.polyfit(xs, ys, 1)[0]
    return float(-slope)


# --------------------------------------------------------------------------
# G_0-equivariance


def equivariance_check(L: LieAlgebra, rfun_tensor: Callable, omega, T, h: float = 1e-4) -> dict:
    """``|d/dx r(e^{x ad T} omega)|_0 - [T (x) 1 + 1 (x) T, r(omega)]|``.

    The flow derivative uses a central difference with Richardson step halving.
    """
    omega = np.asarray(omega, dtype=complex)
    adT = L.ad_matrix(T)
    from scipy.linalg import expm

    def flow(x):
        return rfun_tensor(expm(x * adT) @ omega)

    def central(s):
        return (flow(s) - flow(-s)) / (2 * s)

    d1, d2 = central(h), central(h / 2)
    deriv = (4 * d2 - d1) / 3
    r = rfun_tensor(omega)
    rhs = adT @ r + r @ adT.T
    return {"residual": float(np.abs(deriv - rhs).max()), "lhs_max": float(np.abs(deriv).max()),
            "rhs_max": float(np.abs(rhs).max()), "richardson_gap": float(np.abs(d1 - d2).max())}
