"""Finite-dimensional dynamical r-matrices and their domains.

Operators on ``G`` are converted to tensors in ``G (x) G`` by
``r = B(T_a, R T_b) T^a (x) T^b``, which in coefficient form is ``R B^-1``.
All r-matrices here act blockwise on the eigenspaces ``G_a`` of the
automorphism through a scalar function of ``(ad omega)_a``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import elliptic
from .errors import DomainViolation, InvalidQ, NotInnerData, PoleProximity
from .liealg import CartanData, GradedDecomposition, LieAlgebra, coxeter_automorphism, decompose
from .matfun import (
    TWO_PI_I,
    LinOp,
    ScalarFn,
    exp_fn,
    f_aq_fn,
    f_fn,
    F_fn,
    matrix_function,
    matrix_function_frechet,
)
from .settings import DEFAULT, Settings


@dataclass(frozen=True, eq=False)
class Tensor2:
    """``sum c[a, b] T_a (x) T_b`` over the algebra basis."""

    coeffs: np.ndarray
    basis_names: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=complex))

    @property
    def T(self) -> "Tensor2":
        """Leg swap ``T_a (x) T_b -> T_b (x) T_a``."""
        return Tensor2(self.coeffs.T, self.basis_names)

    def __add__(self, other):
        return Tensor2(self.coeffs + _coeffs(other), self.basis_names)

    def __sub__(self, other):
        return Tensor2(self.coeffs - _coeffs(other), self.basis_names)

    def __mul__(self, s):
        return Tensor2(self.coeffs * s, self.basis_names)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.abs(self.coeffs).max()) if self.coeffs.size else 0.0

    def conjugate_by(self, A: np.ndarray, C: np.ndarray) -> "Tensor2":
        """``(A (x) C) r``."""
        return Tensor2(A @ self.coeffs @ C.T, self.basis_names)

    def to_dict(self) -> dict:
        return {
            "basis": list(self.basis_names),
            "coeffs": [[[float(v.real), float(v.imag)] for v in row] for row in self.coeffs],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _coeffs(t):
    return t.coeffs if isinstance(t, Tensor2) else np.asarray(t)


def operator_to_tensor(L: LieAlgebra, op: np.ndarray) -> Tensor2:
    return Tensor2(np.asarray(op) @ L.bform_inv, L.basis_names)


def tensor_to_operator(L: LieAlgebra, t: Tensor2) -> np.ndarray:
    return _coeffs(t) @ L.bform


# --------------------------------------------------------------------------
# Blockwise functional calculus


def block_spectra(L: LieAlgebra, dec: GradedDecomposition, omega) -> dict:
    """Eigenvalues of ``(ad omega)_a`` for every ``a`` in the index set."""
    adw = L.ad_matrix(omega)
    return {a: LinOp(dec.block(adw, a)).eig[0] for a in dec.index_set}


def blockwise_function(L: LieAlgebra, dec: GradedDecomposition, fns: dict, omega,
                       settings: Settings = DEFAULT) -> np.ndarray:
    """Operator acting as ``fns[a]((ad omega)_a)`` on each ``G_a``."""
    adw = L.ad_matrix(omega)
    out = np.zeros((L.dim, L.dim), dtype=complex)
    for a in dec.index_set:
        blk = matrix_function(LinOp(dec.block(adw, a), settings), fns[a]).matrix
        out += dec.lift(blk, a)
    return out


def blockwise_derivative(L: LieAlgebra, dec: GradedDecomposition, fns: dict, omega, direction,
                         settings: Settings = DEFAULT) -> np.ndarray:
    """Derivative of :func:`blockwise_function` along ``omega + t direction`` (both in G_0)."""
    adw, adT = L.ad_matrix(omega), L.ad_matrix(direction)
    out = np.zeros((L.dim, L.dim), dtype=complex)
    for a in dec.index_set:
        A = LinOp(dec.block(adw, a), settings)
        blk = matrix_function_frechet(A, fns[a], dec.block(adT, a)).matrix
        out += dec.lift(blk, a)
    return out


# --------------------------------------------------------------------------
# Domains


@dataclass(frozen=True)
class DomainQuery:
    """``omega`` in G_0 together with either ``k`` (loop form) or ``tau`` (elliptic form)."""

    omega: np.ndarray
    k: complex | None = None
    tau: complex | None = None

    def __post_init__(self):
        if (self.k is None) == (self.tau is None):
            raise ValueError("give exactly one of k and tau")


@dataclass
class DomainReport:
    admitted: bool
    form: str
    min_margin: float
    entries: list = field(default_factory=list)
    witness: dict | None = None

    def raise_if_outside(self, what: str = "omega"):
        if not self.admitted:
            w = self.witness or {}
            raise DomainViolation(f"{what} outside the domain: {w.get('reason', '')} {w}", witness=w)

    def to_dict(self) -> dict:
        def enc(v):
            if isinstance(v, complex):
                return [v.real, v.imag]
            return v
        return {
            "admitted": self.admitted,
            "form": self.form,
            "min_margin": self.min_margin,
            "entries": [{k: enc(v) for k, v in e.items()} for e in self.entries],
            "witness": None if self.witness is None else {k: enc(v) for k, v in self.witness.items()},
        }


def _dist_2pii_Z(x: complex, exclude_zero: bool = False):
    """Distance from x to 2 pi i Z (optionally without 0) and the nearest integer j."""
    j = round(x.imag / (2 * math.pi))
    cands = [j - 1, j, j + 1]
    if exclude_zero:
        cands = [c for c in cands if c != 0] or [1]
        cands += [-1, 1]
    best = min(cands, key=lambda c: abs(x - TWO_PI_I * c))
    return abs(x - TWO_PI_I * best), best


def k_form_margin(lam: complex, a: int, N: int, k: complex):
    """Smallest distance of ``lam + k (a + m N)`` (m in Z) to the forbidden set.

    The forbidden set is 2 pi i Z, except that for ``a = 0, m = 0`` only
    2 pi i Z* is forbidden. Returns ``(distance, m, j)``. Exact: ``Re`` of the
    argument is linear in ``m`` and bounds the distance from below, so rows
    are scanned outward from the one closest to the imaginary axis.
    """
    lam, k = complex(lam), complex(k)
    if k.real == 0:
        raise ValueError("k-form margin needs Re k != 0")
    m0 = round(-(lam.real / k.real + a) / N)
    best = (math.inf, None, None)

    def visit(m):
        nonlocal best
        x = lam + k * (a + m * N)
        d, j = _dist_2pii_Z(x, exclude_zero=(a == 0 and m == 0))
        if d < best[0]:
            best = (d, m, j)
        return abs(x.real)

    visit(m0)
    for sign in (1, -1):
        m = m0 + sign
        while True:
            re = visit(m)
            if re > best[0] and abs(m - m0) > 1:
                break
            m += sign
    return best


def tau_form_margin(lam: complex, a: int, N: int, tau: complex):
    """Distance of ``lam`` to ``2 pi i Omega_a`` and the nearest lattice point."""
    return elliptic.chi_a_pole(a, N, complex(lam), complex(tau))


def in_domain(L: LieAlgebra, dec: GradedDecomposition, query: DomainQuery,
              settings: Settings = DEFAULT) -> DomainReport:
    """Decide ``omega in B_k`` (k given) or ``omega in B^tau`` (tau given), with margins."""
    N = dec.N
    spectra = block_spectra(L, dec, query.omega)
    entries = []
    if query.k is not None:
        form, k = "k", complex(query.k)
        if abs(k.real) <= settings.tol_pole:
            w = {"reason": "Re k = 0: the domain is not open for imaginary k", "k": k}
            return DomainReport(False, form, abs(k.real), [], w)
        for a, lams in spectra.items():
            for lam in lams:
                d, m, j = k_form_margin(lam, a, N, k)
                entries.append({"a": a, "eigenvalue": complex(lam), "distance": float(d),
                                "m": m, "lattice_point": TWO_PI_I * j})
    else:
        form, tau = "tau", complex(query.tau)
        elliptic.ModularParam(tau)
        for a, lams in spectra.items():
            for lam in lams:
                d, p = tau_form_margin(lam, a, N, tau)
                entries.append({"a": a, "eigenvalue": complex(lam), "distance": float(d),
                                "lattice_point": complex(p)})
    if not entries:
        return DomainReport(True, form, math.inf, [], None)
    worst = min(entries, key=lambda e: e["distance"])
    admitted = worst["distance"] > settings.tol_pole
    witness = None if admitted else {"reason": "eigenvalue on a forbidden lattice point", **worst}
    return DomainReport(admitted, form, worst["distance"], entries, witness)


def tau_from_k(k: complex, N: int) -> complex:
    return complex(k) * N / TWO_PI_I


def k_from_tau(tau: complex, N: int) -> complex:
    return complex(tau) * TWO_PI_I / N


# --------------------------------------------------------------------------
# Loop r-matrix R_k on a single grade


def loop_grade_fn(k: complex, n: int) -> ScalarFn:
    """Scalar function applied to ``(ad omega)_a`` on grade ``n``: f for n = 0, F(k n + .) otherwise."""
    return f_fn() if n == 0 else F_fn(complex(k) * n)


def loop_grade_block(L: LieAlgebra, dec: GradedDecomposition, k: complex, omega, n: int,
                     settings: Settings = DEFAULT) -> np.ndarray:
    """``R_k(omega)`` on ``G_{n mod N} (x) t^n`` in the basis ``bases[n mod N]``.

    Formula level only: no domain check beyond the pole test of the calculus.
    """
    a = dec.grade_of(n)
    if a not in dec.index_set:
        return np.zeros((0, 0), dtype=complex)
    A = LinOp(dec.ad_block(omega, a), settings)
    return matrix_function(A, loop_grade_fn(k, n)).matrix


# --------------------------------------------------------------------------
# rho_q and its shifted version


def check_q(dec: GradedDecomposition, q: int) -> None:
    N = dec.N
    if N == 1:
        return
    if not 1 <= q <= N - 1:
        raise InvalidQ(f"q must satisfy 1 <= q <= N-1 = {N - 1}, got {q}")
    for a in dec.index_set:
        if a and (q * a) % N == 0:
            raise InvalidQ(f"q a = {q * a} is a nonzero multiple of N = {N} for a = {a}")


def rho_q_fns(dec: GradedDecomposition, q: int) -> dict:
    check_q(dec, q)
    return {a: f_aq_fn(a, q, dec.N) for a in dec.index_set}


def _domain_error(exc: PoleProximity, what: str) -> DomainViolation:
    return DomainViolation(f"{what}: {exc}", witness={"eigenvalue": exc.point, "pole": exc.pole,
                                                      "distance": exc.distance})


def rho_q(L: LieAlgebra, dec: GradedDecomposition, q: int, omega,
          settings: Settings = DEFAULT) -> np.ndarray:
    """``rho_q(omega)`` acting as ``f_{a,q}((ad omega)_a)`` on ``G_a``."""
    fns = rho_q_fns(dec, q)
    try:
        return blockwise_function(L, dec, fns, omega, settings)
    except PoleProximity as e:
        raise _domain_error(e, "rho_q") from e


def rho_q_tensor(L, dec, q, omega, settings: Settings = DEFAULT) -> Tensor2:
    return operator_to_tensor(L, rho_q(L, dec, q, omega, settings))


def check_inner_data(L: LieAlgebra, dec: GradedDecomposition, M, settings: Settings = DEFAULT) -> dict:
    """Residuals of ``mu = exp((2 pi i/N) ad M)`` and ``G_0 = Ker ad M``; raises NotInnerData."""
    adM = LinOp(L.ad_matrix(M), settings)
    if adM.defective:
        raise NotInnerData("ad M is not diagonalizable")
    expo = matrix_function(adM, exp_fn(TWO_PI_I / dec.N)).matrix
    res_mu = float(np.abs(expo - dec.mu.matrix).max())
    res_ker = float(np.abs(adM.matrix @ dec.bases[0]).max())
    rank = np.linalg.matrix_rank(adM.matrix, tol=settings.tol_algebra * max(1.0, adM.norm))
    kernel_dim = L.dim - rank
    res = {"exp_matches_mu": res_mu, "g0_in_kernel": res_ker, "kernel_dim": kernel_dim,
           "g0_dim": dec.bases[0].shape[1]}
    if res_mu > settings.tol_algebra * 100:
        raise NotInnerData(f"exp((2 pi i/N) ad M) differs from mu by {res_mu:.3e}")
    if res_ker > settings.tol_algebra * 100 or kernel_dim != dec.bases[0].shape[1]:
        raise NotInnerData(f"Ker(ad M) has dim {kernel_dim}, G_0 has dim {dec.bases[0].shape[1]}"
                           f" (residual {res_ker:.3e})")
    return res


def rho_shift(dec: GradedDecomposition, q: int, M) -> np.ndarray:
    return TWO_PI_I / dec.N * q * np.asarray(M, dtype=complex)


def rho_q_shifted(L: LieAlgebra, dec: GradedDecomposition, q: int, M, omega,
                  settings: Settings = DEFAULT, check: bool = True) -> np.ndarray:
    """``rho_q(omega - (2 pi i/N) q M)``."""
    if check:
        check_inner_data(L, dec, M, settings)
    return rho_q(L, dec, q, np.asarray(omega, dtype=complex) - rho_shift(dec, q, M), settings)


# --------------------------------------------------------------------------
# Elliptic r-matrix


def r_tau_fns(dec: GradedDecomposition, tau: complex, z: complex, settings: Settings = DEFAULT) -> dict:
    mp = elliptic.ModularParam(tau)
    return {a: elliptic.chi_a_fn(a, dec.N, z, mp, settings) for a in dec.index_set}


def r_tau_operator(L: LieAlgebra, dec: GradedDecomposition, tau: complex, omega, z: complex,
                   settings: Settings = DEFAULT, check_domain: bool = True) -> np.ndarray:
    """``R_tau(omega, z)`` acting as ``chi_a((ad omega)_a, z|tau)`` on ``G_a``."""
    if check_domain:
        in_domain(L, dec, DomainQuery(np.asarray(omega, dtype=complex), tau=tau), settings) \
            .raise_if_outside("omega (elliptic domain)")
    fns = r_tau_fns(dec, tau, z, settings)
    try:
        return blockwise_function(L, dec, fns, omega, settings)
    except PoleProximity as e:
        raise _domain_error(e, "r_tau") from e


def r_tau(L: LieAlgebra, dec: GradedDecomposition, tau: complex, omega, z: complex,
          settings: Settings = DEFAULT, check_domain: bool = True) -> Tensor2:
    return operator_to_tensor(L, r_tau_operator(L, dec, tau, omega, z, settings, check_domain))


# --------------------------------------------------------------------------
# Felder's r-matrix and the gauge transformation relating it to r_tau


def felder_S(cd: CartanData, tau: complex, omega, z: complex, normalization: str = "ours",
             settings: Settings = DEFAULT) -> Tensor2:
    """Cartan part ``theta1'/theta1(z)/(2 pi i) H_i (x) H^i`` plus ``chi(alpha(omega), z) E_alpha (x) E_-alpha``.

    ``normalization="felder-original"`` returns ``2 pi i S(2 pi i omega, z)``.
    """
    if normalization not in ("ours", "felder-original"):
        raise ValueError(f"unknown normalization {normalization!r}")
    L = cd.algebra
    mp = elliptic.ModularParam(tau)
    omega = np.asarray(omega, dtype=complex)
    scale = 1.0
    if normalization == "felder-original":
        omega = TWO_PI_I * omega
        scale = TWO_PI_I
    c = np.zeros((L.dim, L.dim), dtype=complex)
    cartan = elliptic.chi0_at_zero(z, mp)
    c += cartan * cd.cartan_basis @ cd.cartan_dual.T
    for alpha in cd.roots:
        w = cd.root_eval(alpha, omega)
        val = elliptic.chi(w, z, mp, settings)
        c[cd.root_index[alpha], cd.root_index[cd.negative(alpha)]] += val
    return Tensor2(scale * c, L.basis_names)


def felder_cartan_part(cd: CartanData, t: Tensor2) -> np.ndarray:
    """Restriction of a tensor's coefficients to Cartan (x) Cartan basis indices."""
    L = cd.algebra
    root_idx = set(cd.root_index.values())
    idx = [i for i in range(L.dim) if i not in root_idx]
    return _coeffs(t)[np.ix_(idx, idx)]


def gauge_factor(cd: CartanData, s: complex) -> np.ndarray:
    """``exp((2 pi i/N) s ad J)``, exact through the integer spectrum of ad J."""
    N = cd.coxeter_number
    adJ = LinOp(cd.algebra.ad_matrix(cd.coxeter_element))
    return matrix_function(adJ, exp_fn(TWO_PI_I * complex(s) / N)).matrix


def felder_gauge_sides(cd: CartanData, tau: complex, omega, z1: complex, z2: complex,
                       dec: GradedDecomposition | None = None, settings: Settings = DEFAULT):
    """Both sides of ``r_tau(omega, z) = (g(z1) (x) g(z2)) S(omega + 2 pi i tau J/N, z)``."""
    L = cd.algebra
    if dec is None:
        dec = decompose(L, coxeter_automorphism(cd), settings)
    N = cd.coxeter_number
    z = complex(z1) - complex(z2)
    omega = np.asarray(omega, dtype=complex)
    try:
        lhs = r_tau(L, dec, tau, omega, z, settings)
    except (DomainViolation, PoleProximity) as e:
        raise DomainViolation(f"left side (r_tau): {e}", witness=getattr(e, "witness", None)) from e
    shifted = omega + TWO_PI_I * complex(tau) / N * cd.coxeter_element
    try:
        S = felder_S(cd, tau, shifted, z, settings=settings)
    except PoleProximity as e:
        raise DomainViolation(f"right side (Felder S): {e}", witness={"point": e.point}) from e
    rhs = S.conjugate_by(gauge_factor(cd, z1), gauge_factor(cd, z2))
    return lhs, rhs


def felder_gauge_compare(cd: CartanData, tau: complex, omega, z1: complex, z2: complex,
                         dec: GradedDecomposition | None = None, settings: Settings = DEFAULT) -> float:
    lhs, rhs = felder_gauge_sides(cd, tau, omega, z1, z2, dec, settings)
    return (lhs - rhs).max_abs()
