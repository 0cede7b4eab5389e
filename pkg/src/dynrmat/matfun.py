"""Holomorphic functional calculus for small dense matrices.

``H(A)`` is evaluated through the eigendecomposition ``A = V diag(l) V^-1``
when ``A`` is diagonalizable, and through Hermite interpolation on the
spectrum (first-order Jordan structure) otherwise. Directional derivatives use
the divided-difference (Daleckii-Krein) formula in the eigenbasis.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import DefectiveInput, DerivativeUnavailable, PoleProximity
from .settings import DEFAULT, Settings

TWO_PI_I = 2j * math.pi


@dataclass(frozen=True, eq=False)
class LinOp:
    matrix: np.ndarray
    settings: Settings = DEFAULT
    blocks: dict | None = None

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=complex))
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"LinOp needs a square matrix, got {m.shape}")
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2)) if self.n else 0.0

    @cached_property
    def cluster_radius(self) -> float:
        return self.settings.cluster_rel * max(1.0, self.norm)

    @cached_property
    def eig(self):
        if self.n == 0:
            return np.zeros(0, dtype=complex), np.zeros((0, 0), dtype=complex)
        return np.linalg.eig(self.matrix)

    @cached_property
    def condition(self) -> float:
        return float(np.linalg.cond(self.eig[1])) if self.n else 1.0

    @cached_property
    def clusters(self) -> list:
        """``[(eigenvalue, algebraic multiplicity, member indices)]``."""
        lam = self.eig[0]
        rad = self.cluster_radius
        out = []
        for i, l in enumerate(lam):
            for c in out:
                if abs(c[0] - l) < rad:
                    c[2].append(i)
                    c[0] = complex(np.mean(lam[c[2]]))
                    c[1] += 1
                    break
            else:
                out.append([complex(l), 1, [i]])
        return [tuple(c) for c in out]

    @cached_property
    def defective(self) -> bool:
        if self.n == 0:
            return False
        if self.condition > self.settings.cond_max:
            return True
        tol = max(self.cluster_radius, 1e-12 * max(1.0, self.norm))
        for lam, mult, _ in self.clusters:
            if mult > 1:
                s = np.linalg.svd(self.matrix - lam * np.eye(self.n), compute_uv=False)
                geometric = int(np.sum(s <= tol * self.n))
                if geometric < mult:
                    return True
        return False

    @cached_property
    def reconstruction_error(self) -> float:
        lam, V = self.eig
        return float(np.abs(V @ np.diag(lam) @ np.linalg.inv(V) - self.matrix).max()) if self.n else 0.0


# --------------------------------------------------------------------------
# Scalar functions


@dataclass(frozen=True, eq=False)
class ScalarFn:
    """A scalar holomorphic (or meromorphic) function with optional derivative.

    ``nearest_pole(w)`` returns ``(distance, pole)`` or ``(inf, None)``.
    """

    name: str
    value: Callable[[complex], complex]
    deriv: Callable[[complex], complex] | None = None
    nearest_pole: Callable[[complex], tuple] | None = None
    params: dict = field(default_factory=dict)

    def check(self, w: complex, settings: Settings = DEFAULT) -> None:
        if self.nearest_pole is None:
            return
        d, p = self.nearest_pole(w)
        if d <= settings.tol_pole:
            raise PoleProximity(w, p, d, what=self.name)

    def __call__(self, w, settings: Settings = DEFAULT) -> complex:
        w = complex(w)
        self.check(w, settings)
        return self.value(w)

    def derivative(self, w, settings: Settings = DEFAULT) -> complex:
        if self.deriv is None:
            raise DerivativeUnavailable(f"{self.name} has no registered derivative")
        w = complex(w)
        self.check(w, settings)
        return self.deriv(w)


def scalar_eval(fn: ScalarFn, w, settings: Settings = DEFAULT) -> complex:
    return fn(w, settings)


def nearest_in_2pii_lattice(w: complex, shift: complex = 0.0, exclude_zero: bool = False):
    """Distance from ``w`` to ``2 pi i Z + shift`` (optionally without ``shift`` itself)."""
    x = (w - shift) / TWO_PI_I
    n = round(x.real)
    cands = [n - 1, n, n + 1]
    if exclude_zero:
        cands = [c for c in cands if c != 0] + ([2] if n == 1 else []) + ([-2] if n == -1 else [])
    best = min(cands, key=lambda m: abs(w - shift - TWO_PI_I * m))
    p = shift + TWO_PI_I * best
    return abs(w - p), p


def coth_half(w: complex, sat: float = DEFAULT.coth_saturation) -> complex:
    """coth(w/2) with saturation to sign(Re w) for |Re w| > sat."""
    if w.real > sat:
        return 1.0 + 0j
    if w.real < -sat:
        return -1.0 + 0j
    return 1.0 / cmath.tanh(w / 2)


def _coth_half_deriv(w: complex, sat: float = DEFAULT.coth_saturation) -> complex:
    # d/dw coth(w/2) = -1 / (2 sinh^2(w/2))
    if abs(w.real) > sat:
        return 0j
    s = cmath.sinh(w / 2)
    return -0.5 / (s * s)


# Bernoulli-number series  coth(w/2)/2 - 1/w = sum_k B_2k w^(2k-1) / (2k)!
_B2K = [1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6, -3617 / 510, 43867 / 798,
        -174611 / 330, 854513 / 138, -236364091 / 2730]
_F_SERIES = [b / math.factorial(2 * k + 2) for k, b in enumerate(_B2K)]
_SMALL = 0.5


def _f_value(w: complex) -> complex:
    if abs(w) < _SMALL:
        w2 = w * w
        acc = 0j
        for c in reversed(_F_SERIES):
            acc = acc * w2 + c
        return acc * w
    return 0.5 * coth_half(w) - 1.0 / w


def _f_deriv(w: complex) -> complex:
    if abs(w) < _SMALL:
        w2 = w * w
        acc = 0j
        for k in reversed(range(len(_F_SERIES))):
            acc = acc * w2 + (2 * k + 1) * _F_SERIES[k]
        return acc
    return 0.5 * _coth_half_deriv(w) + 1.0 / (w * w)


def _pole_2pii(exclude_zero=False, shift=0.0):
    return lambda w: nearest_in_2pii_lattice(w, shift, exclude_zero)


def f_fn() -> ScalarFn:
    """``f(z) = coth(z/2)/2 - 1/z`` with ``f(0) = 0``."""
    return ScalarFn("f", _f_value, _f_deriv, _pole_2pii(exclude_zero=True))


def F_fn(shift: complex = 0.0) -> ScalarFn:
    """``w -> F(w + shift)`` with ``F(z) = coth(z/2)/2``."""
    s = complex(shift)
    return ScalarFn("F", lambda w: 0.5 * coth_half(w + s), lambda w: 0.5 * _coth_half_deriv(w + s),
                    _pole_2pii(shift=-s), {"shift": s})


def f_a_fn(a: int) -> ScalarFn:
    """``f_a(w) = (1 + coth(w/2))/2 - delta_{a,0}/w``."""
    if a == 0:
        return ScalarFn("f_a", lambda w: 0.5 + _f_value(w), _f_deriv, _pole_2pii(exclude_zero=True), {"a": 0})
    return ScalarFn("f_a", lambda w: 0.5 * (1 + coth_half(w)), lambda w: 0.5 * _coth_half_deriv(w),
                    _pole_2pii(), {"a": a})


def f_aq_fn(a: int, q: int, N: int) -> ScalarFn:
    """``f_{a,q}``: ``f`` for ``a = 0``, else ``coth((w + 2 pi i q a/N)/2)/2``."""
    if a == 0:
        fn = f_fn()
        return ScalarFn("f_aq", fn.value, fn.deriv, fn.nearest_pole, {"a": 0, "q": q, "N": N})
    s = TWO_PI_I * q * a / N
    g = F_fn(s)
    return ScalarFn("f_aq", g.value, g.deriv, g.nearest_pole, {"a": a, "q": q, "N": N})


def _h_value(z):
    if abs(z) < 1e-3:
        return 1 + z / 2 + z * z / 6 + z ** 3 / 24 + z ** 4 / 120
    return (cmath.exp(z) - 1) / z


def _h_deriv(z):
    if abs(z) < 1e-3:
        return 0.5 + z / 3 + z * z / 8 + z ** 3 / 30
    return (z * cmath.exp(z) - cmath.exp(z) + 1) / (z * z)


def h_fn() -> ScalarFn:
    """``h(z) = (e^z - 1)/z``, ``h(0) = 1``."""
    return ScalarFn("h", _h_value, _h_deriv)


def _g_value(z):
    if abs(z) < 1e-3:
        z2 = z * z
        return 2 * (1 + z2 / 6 + z2 * z2 / 120 + z2 ** 3 / 5040)
    return 2 * cmath.sinh(z) / z


def _g_deriv(z):
    if abs(z) < 1e-3:
        return 2 * (z / 3 + z ** 3 / 30 + z ** 5 / 840)
    return 2 * (z * cmath.cosh(z) - cmath.sinh(z)) / (z * z)


def g_fn() -> ScalarFn:
    """``g(z) = (e^z - e^-z)/z``, ``g(0) = 2``."""
    return ScalarFn("g", _g_value, _g_deriv)


def exp_fn(scale: complex = 1.0) -> ScalarFn:
    c = complex(scale)
    return ScalarFn("exp", lambda w: cmath.exp(c * w), lambda w: c * cmath.exp(c * w), None, {"scale": c})


def exp_half_fn() -> ScalarFn:
    return exp_fn(0.5)


def q_plus_fn() -> ScalarFn:
    return ScalarFn("Q_plus", lambda w: cmath.exp(w / 2) + cmath.exp(-w / 2),
                    lambda w: 0.5 * (cmath.exp(w / 2) - cmath.exp(-w / 2)))


def q_minus_fn() -> ScalarFn:
    return ScalarFn("Q_minus", lambda w: cmath.exp(w / 2) - cmath.exp(-w / 2),
                    lambda w: 0.5 * (cmath.exp(w / 2) + cmath.exp(-w / 2)))


def identity_fn() -> ScalarFn:
    return ScalarFn("identity", lambda w: w, lambda w: 1 + 0j)


def constant_fn(c: complex) -> ScalarFn:
    c = complex(c)
    return ScalarFn("constant", lambda w: c, lambda w: 0j, None, {"c": c})


def shifted(fn: ScalarFn, s: complex) -> ScalarFn:
    """``w -> fn(w + s)``."""
    s = complex(s)
    pole = None if fn.nearest_pole is None else (lambda w: fn.nearest_pole(w + s))
    der = None if fn.deriv is None else (lambda w: fn.deriv(w + s))
    return ScalarFn(fn.name, lambda w: fn.value(w + s), der, pole, {**fn.params, "shift": s})


def make_scalar_fn(name: str, **p) -> ScalarFn:
    """Registry lookup used by the CLI ``eval`` paths."""
    if name == "f":
        return f_fn()
    if name == "F":
        return F_fn(p.get("shift", 0))
    if name == "h":
        return h_fn()
    if name == "g":
        return g_fn()
    if name == "f_a":
        return f_a_fn(int(p["a"]))
    if name == "f_aq":
        return f_aq_fn(int(p["a"]), int(p["q"]), int(p["N"]))
    if name == "exp_half":
        return exp_half_fn()
    if name == "Q_plus":
        return q_plus_fn()
    if name == "Q_minus":
        return q_minus_fn()
    if name == "chi_a":
        from .elliptic import ModularParam, chi_a_fn
        return chi_a_fn(int(p["a"]), int(p["N"]), complex(p["z"]), ModularParam(complex(p["tau"])))
    raise KeyError(f"unknown scalar function {name!r}")


# --------------------------------------------------------------------------
# Matrix functions


def spectrum(A: LinOp) -> list:
    """Eigenvalues with algebraic multiplicities, clustered."""
    return [(lam, mult) for lam, mult, _ in A.clusters]


def _check_spectrum(A: LinOp, fn: ScalarFn):
    for lam, _, _ in A.clusters:
        fn.check(lam, A.settings)


def _hermite_eval(A: LinOp, fn: ScalarFn) -> np.ndarray:
    """p(A) for the Hermite interpolant matching fn, fn' at repeated eigenvalues."""
    n = A.n
    I = np.eye(n)
    nodes = []
    for lam, mult, _ in A.clusters:
        nodes.extend([lam] * min(mult, 2))
    # the interpolant is exact only if every Jordan block has size <= 2
    M = I.astype(complex)
    for lam, mult, _ in A.clusters:
        M = M @ np.linalg.matrix_power(A.matrix - lam * I, min(mult, 2))
    if np.abs(M).max() > 1e-6 * max(1.0, A.norm) ** len(nodes):
        raise DerivativeUnavailable("Jordan block of size > 2; only first-order Jordan structure is supported")
    if fn.deriv is None and len(nodes) > len(A.clusters):
        raise DerivativeUnavailable(f"{fn.name} has no derivative for the defective case")
    k = len(nodes)
    table = [[0j] * k for _ in range(k)]
    for i, x in enumerate(nodes):
        table[i][0] = fn.value(x)
    for j in range(1, k):
        for i in range(k - j):
            x0, x1 = nodes[i], nodes[i + j]
            if abs(x1 - x0) < A.cluster_radius:
                table[i][j] = fn.deriv(x0)  # only reached for j == 1
            else:
                table[i][j] = (table[i + 1][j - 1] - table[i][j - 1]) / (x1 - x0)
    out = np.zeros((n, n), dtype=complex)
    prod = I.astype(complex)
    for j in range(k):
        out += table[0][j] * prod
        prod = prod @ (A.matrix - nodes[j] * I)
    return out


def matrix_function(A: LinOp, fn: ScalarFn) -> LinOp:
    if A.n == 0:
        return LinOp(A.matrix, A.settings)
    _check_spectrum(A, fn)
    if not A.defective:
        lam, V = A.eig
        vals = np.array([fn.value(complex(l)) for l in lam])
        out = (V * vals) @ np.linalg.inv(V)
    else:
        out = _hermite_eval(A, fn)
    return LinOp(out, A.settings)


def divided_differences(A: LinOp, fn: ScalarFn) -> np.ndarray:
    """Matrix of fn[l_i, l_j] over the eigenvalues of A (fn' on near-coincident pairs)."""
    lam = A.eig[0]
    n = len(lam)
    fv = [fn.value(complex(l)) for l in lam]
    D = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            d = lam[i] - lam[j]
            if abs(d) < max(A.cluster_radius, 1e-7 * max(1.0, abs(lam[i]))):
                D[i, j] = fn.deriv(complex(0.5 * (lam[i] + lam[j])))
            else:
                D[i, j] = (fv[i] - fv[j]) / d
    return D


def matrix_function_frechet(A: LinOp, fn: ScalarFn, E) -> LinOp:
    """d/dt fn(A + tE) at t = 0."""
    E = E.matrix if isinstance(E, LinOp) else np.asarray(E, dtype=complex)
    if A.n == 0:
        return LinOp(np.zeros((0, 0)), A.settings)
    if A.defective:
        raise DefectiveInput("Frechet derivative needs a diagonalizable operator")
    if fn.deriv is None:
        raise DerivativeUnavailable(f"{fn.name} has no registered derivative")
    _check_spectrum(A, fn)
    lam, V = A.eig
    Vinv = np.linalg.inv(V)
    D = divided_differences(A, fn)
    return LinOp(V @ (D * (Vinv @ E @ V)) @ Vinv, A.settings)


def exp_pm_half(kappa_op: LinOp) -> tuple[LinOp, LinOp]:
    """``(Q_+, Q_-) = (e^K + e^-K, e^K - e^-K)`` with ``K = kappa_op / 2``."""
    ep = matrix_function(kappa_op, exp_fn(0.5)).matrix
    em = matrix_function(kappa_op, exp_fn(-0.5)).matrix
    return LinOp(ep + em, kappa_op.settings), LinOp(ep - em, kappa_op.settings)
