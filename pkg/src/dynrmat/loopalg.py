"""Twisted loop algebra and its affine extension, truncated to a grade window.

An element of the affine algebra is ``sum_n xi_n (x) t^n + c c_hat + d_coeff d``
with ``xi_n`` in ``G_{n mod N}``; grades are kept for ``|n| <= cutoff``.
Brackets whose result would leave the window raise ``CutoffOverflow``
instead of being silently dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CutoffOverflow, DomainViolation
from .liealg import GradedDecomposition, LieAlgebra
from .matfun import LinOp, f_fn, F_fn, matrix_function, matrix_function_frechet
from .rmat import DomainQuery, Tensor2, in_domain
from .settings import DEFAULT, Settings


@dataclass(eq=False)
class AffineElement:
    parts: dict = field(default_factory=dict)  # grade n -> coefficient vector in G
    c: complex = 0j
    d: complex = 0j

    def copy(self) -> "AffineElement":
        return AffineElement({n: v.copy() for n, v in self.parts.items()}, self.c, self.d)

    def _combine(self, other, s):
        out = self.copy()
        for n, v in other.parts.items():
            out.parts[n] = out.parts.get(n, 0) + s * v
        out.c += s * other.c
        out.d += s * other.d
        return out

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return self * -1

    def __mul__(self, s):
        return AffineElement({n: s * v for n, v in self.parts.items()}, s * self.c, s * self.d)

    __rmul__ = __mul__

    def part(self, n: int, dim: int) -> np.ndarray:
        return self.parts.get(n, np.zeros(dim, dtype=complex))

    def grade_zero(self) -> "AffineElement":
        """Component in the grade-zero subalgebra ``G_0 + C d + C c_hat``."""
        return AffineElement({0: self.parts[0].copy()} if 0 in self.parts else {}, self.c, self.d)

    def support(self, tol: float = 0.0) -> list:
        return sorted(n for n, v in self.parts.items() if np.abs(v).max(initial=0) > tol)

    def norm(self) -> float:
        vals = [float(np.abs(v).max(initial=0)) for v in self.parts.values()]
        return max(vals + [abs(self.c), abs(self.d)])


def homogeneous(xi, n: int, c: complex = 0j, d: complex = 0j) -> AffineElement:
    return AffineElement({n: np.asarray(xi, dtype=complex)}, c, d)


@dataclass(frozen=True)
class AffineDynVariable:
    """``kappa = omega + k d + l c_hat``."""

    omega: np.ndarray
    k: complex
    l: complex = 0j

    def as_element(self) -> AffineElement:
        return AffineElement({0: np.asarray(self.omega, dtype=complex)}, complex(self.l), complex(self.k))

    def moved(self, T: AffineElement, t: complex) -> "AffineDynVariable":
        """``kappa + t T`` for ``T`` in the grade-zero subalgebra."""
        om = np.asarray(self.omega, dtype=complex) + t * T.part(0, len(self.omega))
        return AffineDynVariable(om, self.k + t * T.d, self.l + t * T.c)


@dataclass(frozen=True, eq=False)
class TruncatedAffine:
    algebra: LieAlgebra
    dec: GradedDecomposition
    cutoff: int
    central: bool = True  # False: the loop algebra, c_hat set to zero and d absent

    @property
    def N(self) -> int:
        return self.dec.N

    def grade_present(self, n: int) -> bool:
        return abs(n) <= self.cutoff and self.dec.grade_of(n) in self.dec.index_set

    def grade_dim(self, n: int) -> int:
        if not self.grade_present(n):
            return 0
        extra = 2 if (n == 0 and self.central) else 0
        return self.dec.bases[self.dec.grade_of(n)].shape[1] + extra

    def grades(self) -> list:
        return [n for n in range(-self.cutoff, self.cutoff + 1) if self.grade_present(n)]

    def check(self, x: AffineElement, tol: float = 1e-10) -> float:
        """Largest component of ``x`` lying outside its eigenspace or outside the window."""
        worst = 0.0
        for n, v in x.parts.items():
            if abs(n) > self.cutoff or self.dec.grade_of(n) not in self.dec.index_set:
                worst = max(worst, float(np.abs(v).max(initial=0)))
                continue
            P = self.dec.projectors[self.dec.grade_of(n)]
            worst = max(worst, float(np.abs(v - P @ v).max(initial=0)))
        return worst

    def basis_element(self, n: int, j: int) -> AffineElement:
        return homogeneous(self.dec.bases[self.dec.grade_of(n)][:, j], n)


def make_affine(L: LieAlgebra, dec: GradedDecomposition, cutoff: int, central: bool = True) -> TruncatedAffine:
    if cutoff < dec.N:
        raise ValueError(f"cutoff {cutoff} must be at least N = {dec.N}")
    return TruncatedAffine(L, dec, int(cutoff), central)


def affine_bracket(TA: TruncatedAffine, x: AffineElement, y: AffineElement) -> AffineElement:
    L = TA.algebra
    out = AffineElement()
    for m, xi in x.parts.items():
        if not np.any(xi):
            continue
        for n, eta in y.parts.items():
            if not np.any(eta):
                continue
            if abs(m + n) > TA.cutoff:
                raise CutoffOverflow(m, n, TA.cutoff)
            br = L.bracket(xi, eta)
            out.parts[m + n] = out.parts.get(m + n, 0) + br
            if m + n == 0 and TA.central:
                out.c += m * L.B(xi, eta)
    if TA.central:
        # [d, xi^n] = n xi^n
        for n, eta in y.parts.items():
            if x.d and n:
                out.parts[n] = out.parts.get(n, 0) + x.d * n * eta
        for m, xi in x.parts.items():
            if y.d and m:
                out.parts[m] = out.parts.get(m, 0) - y.d * m * xi
    return out


def scalar_product(TA: TruncatedAffine, x: AffineElement, y: AffineElement) -> complex:
    L = TA.algebra
    s = sum((L.B(xi, y.parts[-n]) for n, xi in x.parts.items() if -n in y.parts), 0j)
    if TA.central:
        s += x.c * y.d + x.d * y.c
    return complex(s)


# --------------------------------------------------------------------------
# The r-matrix R(kappa)


class AffineRMatrix:
    """``R(kappa)``: ``f((ad kappa)_0)`` on grade zero, ``F(k n + (ad omega)_a)`` on grade ``n != 0``.

    Grade operators are dim x dim matrices acting on ``G`` (zero off
    ``G_{n mod N}``); they are built lazily and cached per grade.
    """

    def __init__(self, TA: TruncatedAffine, kappa: AffineDynVariable, settings: Settings = DEFAULT,
                 check_domain: bool = True):
        self.TA, self.kappa, self.settings = TA, kappa, settings
        if check_domain:
            in_domain(TA.algebra, TA.dec, DomainQuery(np.asarray(kappa.omega, dtype=complex), k=kappa.k),
                      settings).raise_if_outside("kappa")
        self._ops: dict = {}
        self._adw = TA.algebra.ad_matrix(kappa.omega)

    def _shifted(self, n: int) -> LinOp:
        a = self.TA.dec.grade_of(n)
        blk = self.TA.dec.block(self._adw, a)
        return LinOp(blk + self.kappa.k * n * np.eye(blk.shape[0]), self.settings)

    def grade_operator(self, n: int) -> np.ndarray:
        if n not in self._ops:
            dec = self.TA.dec
            a = dec.grade_of(n)
            if a not in dec.index_set:
                self._ops[n] = np.zeros((self.TA.algebra.dim,) * 2, dtype=complex)
            else:
                fn = f_fn() if n == 0 else F_fn()
                blk = matrix_function(self._shifted(n), fn).matrix
                self._ops[n] = dec.lift(blk, a)
        return self._ops[n]

    def apply(self, x: AffineElement) -> AffineElement:
        # R vanishes on d and c_hat since f(0) = 0
        return AffineElement({n: self.grade_operator(n) @ v for n, v in x.parts.items()})

    __call__ = apply

    def grade_derivative(self, n: int, T: AffineElement) -> np.ndarray:
        """Analytic derivative of the grade-n operator along ``kappa + t T``, T in grade zero.

        The shifted operator ``k n + (ad omega)_a`` moves in the direction
        ``T.d n + (ad T_0)_a``; the c_hat component does not enter.
        """
        dec, L = self.TA.dec, self.TA.algebra
        a = dec.grade_of(n)
        if a not in dec.index_set:
            return np.zeros((L.dim,) * 2, dtype=complex)
        T0 = T.part(0, L.dim)
        E = dec.ad_block(T0, a)
        if n != 0:
            E = E + (T.d * n) * np.eye(E.shape[0])
        fn = f_fn() if n == 0 else F_fn()
        blk = matrix_function_frechet(self._shifted(n), fn, E).matrix
        return dec.lift(blk, a)

    def nabla(self, T: AffineElement, x: AffineElement, mode: str = "analytic", h: float | None = None) -> AffineElement:
        """``(nabla_T R)(kappa) x``."""
        if mode == "analytic":
            return AffineElement({n: self.grade_derivative(n, T) @ v for n, v in x.parts.items()})
        if mode != "fd":
            raise ValueError(f"unknown derivative mode {mode!r}")
        h = h or self.settings.fd_step * max(1.0, float(np.abs(self.kappa.omega).max(initial=0)), abs(self.kappa.k))
        plus = AffineRMatrix(self.TA, self.kappa.moved(T, h), self.settings, check_domain=False)
        minus = AffineRMatrix(self.TA, self.kappa.moved(T, -h), self.settings, check_domain=False)
        return (plus(x) - minus(x)) * (1 / (2 * h))


def R_affine(TA: TruncatedAffine, kappa: AffineDynVariable, settings: Settings = DEFAULT) -> AffineRMatrix:
    if abs(complex(kappa.k).real) <= settings.tol_pole:
        raise DomainViolation("Re k must be nonzero", witness={"k": kappa.k})
    return AffineRMatrix(TA, kappa, settings)


def grade_zero_dual_pairs(TA: TruncatedAffine) -> list:
    """Dual bases ``(K_i, K^i)`` of the grade-zero subalgebra: G_0 pairs, then (d, c_hat) and (c_hat, d)."""
    dec = TA.dec
    U, D = dec.bases[0], dec.duals[0]
    pairs = [(homogeneous(U[:, j], 0), homogeneous(D[:, j], 0)) for j in range(U.shape[1])]
    if TA.central:
        pairs.append((AffineElement(d=1.0), AffineElement(c=1.0)))
        pairs.append((AffineElement(c=1.0), AffineElement(d=1.0)))
    return pairs


def cdybe_operator_residual(TA: TruncatedAffine, R: AffineRMatrix, X: AffineElement, Y: AffineElement,
                            mode: str = "analytic") -> AffineElement:
    """Left side minus right side of the operator CDYBE with grade-zero dynamical variable.

    ``[RX, RY] - R([X, RY] + [RX, Y]) + <X, (nabla R) Y> + (nabla_{Y_0} R) X
    - (nabla_{X_0} R) Y + [X, Y]/4``. With ``TA.central`` false this is the
    loop-algebra version (c_hat set to zero, no d direction).
    """
    br = lambda a, b: affine_bracket(TA, a, b)
    RX, RY = R(X), R(Y)
    out = br(RX, RY) - R(br(X, RY) + br(RX, Y)) + br(X, Y) * 0.25
    for K, Kdual in grade_zero_dual_pairs(TA):
        if K.c and not K.parts and not K.d:
            continue  # nabla along c_hat vanishes
        coef = scalar_product(TA, X, R.nabla(K, Y, mode))
        if coef:
            out = out + Kdual * coef
    out = out + R.nabla(Y.grade_zero(), X, mode) - R.nabla(X.grade_zero(), Y, mode)
    return out


def theorem1_residual(TA: TruncatedAffine, kappa: AffineDynVariable, X: AffineElement, Y: AffineElement,
                      mode: str = "analytic", settings: Settings = DEFAULT) -> AffineElement:
    if not TA.central:
        raise ValueError("theorem1_residual needs the centrally extended algebra")
    return cdybe_operator_residual(TA, R_affine(TA, kappa, settings), X, Y, mode)


def tensor_r_pm(TA: TruncatedAffine, kappa: AffineDynVariable, sign: int,
                settings: Settings = DEFAULT) -> dict:
    """Blocks of ``r^(+/-) = sum_n (R T_i[n]) (x) T^i[-n] +/- T_i[n] (x) T^i[-n] / 2`` in the window.

    Returns ``{n: Tensor2}`` where the block for ``n`` holds the coefficients of
    ``(T_a (x) t^n) (x) (T_b (x) t^-n)``; key ``"dc"`` holds the 2 x 2 block on
    ``(d, c_hat)``, which is ``+/- (d (x) c_hat + c_hat (x) d)/2`` because R kills both.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    R = R_affine(TA, kappa, settings)
    L, dec = TA.algebra, TA.dec
    out = {}
    for n in TA.grades():
        a = dec.grade_of(n)
        P = dec.projectors[a]
        out[n] = Tensor2((R.grade_operator(n) + 0.5 * sign * P) @ L.bform_inv, L.basis_names)
    if TA.central:
        out["dc"] = 0.5 * sign * np.array([[0, 1], [1, 0]], dtype=complex)
    return out


def equivariance_residual(TA: TruncatedAffine, kappa: AffineDynVariable, T: AffineElement,
                          X: AffineElement, mode: str = "fd", settings: Settings = DEFAULT) -> float:
    """``|(nabla_{[T, kappa]} R) X - [ad T, R] X|`` for ``T`` in the grade-zero subalgebra."""
    R = R_affine(TA, kappa, settings)
    direction = affine_bracket(TA, T, kappa.as_element())
    lhs = R.nabla(direction, X, mode)
    rhs = affine_bracket(TA, T, R(X)) - R(affine_bracket(TA, T, X))
    return (lhs - rhs).norm()
