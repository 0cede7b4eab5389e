"""Odd theta function, the kernel chi and its twisted versions chi_a.

Conventions::

    theta1(z|tau) = -sum_j exp(pi i (j+1/2)^2 tau + 2 pi i (j+1/2)(z+1/2))
    chi(w, z|tau) = theta1(u+z) theta1'(0) / (2 pi i theta1(z) theta1(u)),  u = w/(2 pi i)
    chi_a(w, z|tau) = e^{2 pi i a z/N} (chi(w + 2 pi i a tau/N, z) - delta_{a0}/w)

Near ``w = 0`` the a = 0 kernel is evaluated from its Taylor expansion in
``u``, built from theta1 derivatives; this removes the 1/w cancellation.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainViolation, InvalidTau, PoleProximity, StripViolation
from .matfun import ScalarFn, TWO_PI_I, f_a_fn
from .settings import DEFAULT, Settings

PI = math.pi
# |u| below which chi_0 switches to its Taylor series
_TAYLOR_RADIUS = 1e-2
_TAYLOR_ORDER = 12


@dataclass(frozen=True)
class ModularParam:
    tau: complex

    def __post_init__(self):
        t = complex(self.tau)
        if not t.imag > 0:
            raise InvalidTau(f"tau must have positive imaginary part, got {t}")
        object.__setattr__(self, "tau", t)

    @property
    def q(self) -> complex:
        return cmath.exp(1j * PI * self.tau)


def _mp(mp) -> ModularParam:
    return mp if isinstance(mp, ModularParam) else ModularParam(mp)


# --------------------------------------------------------------------------
# Lattice helpers

def lattice_nearest(x: complex, tau: complex, exclude_zero: bool = False):
    """Nearest point ``m + n tau`` of the lattice to ``x``: ``(distance, m, n)``.

    Exact: rows ``n`` are scanned outward until their vertical distance exceeds
    the best distance found.
    """
    x, tau = complex(x), complex(tau)
    n0 = round(x.imag / tau.imag)
    best = (math.inf, 0, 0)
    for step in range(0, 10_000):
        rows = [n0] if step == 0 else [n0 + step, n0 - step]
        done = True
        for n in rows:
            vert = abs(x.imag - n * tau.imag)
            if vert > best[0]:
                continue
            done = False
            r = x.real - n * tau.real
            m0 = math.floor(r)
            for m in (m0 - 1, m0, m0 + 1, m0 + 2):
                if exclude_zero and m == 0 and n == 0:
                    continue
                d = abs(x - m - n * tau)
                if d < best[0]:
                    best = (d, m, n)
        if done and step > 1:
            break
    return best


def in_strip(z: complex, mp) -> bool:
    t = _mp(mp).tau
    return -t.imag < complex(z).imag < 0


# --------------------------------------------------------------------------
# theta1

def theta1_derivs(z: complex, mp, order: int = 1, reduce: bool = True) -> np.ndarray:
    """``[theta1^(k)(z|tau) for k = 0..order]`` from the termwise series.

    With ``reduce`` the argument is first shifted into ``0 <= Re z < 1``
    using ``theta1(z+1) = -theta1(z)``.
    """
    tau = _mp(mp).tau
    z = complex(z)
    sign = 1.0
    if reduce:
        s = math.floor(z.real)
        z -= s
        if s % 2:
            sign = -1.0
    # |term j| = exp(-pi Im tau (nu - nu0)^2 + const) with nu = j + 1/2, nu0 = -Im z / Im tau;
    # terms further than `width` from the peak are below 1e-20 of it (with room for nu^order)
    nu0 = -z.imag / tau.imag
    width = math.ceil(math.sqrt((46 + 2 * order) / (PI * tau.imag))) + 2
    nu = np.arange(round(nu0 - 0.5) - width, round(nu0 - 0.5) + width + 1) + 0.5
    base = np.exp(1j * PI * nu * nu * tau + 2j * PI * nu * (z + 0.5))
    total = np.array([np.sum(base * (2j * PI * nu) ** k) for k in range(order + 1)])
    return -sign * total


def theta1(z: complex, mp, reduce: bool = True) -> complex:
    return complex(theta1_derivs(z, mp, 0, reduce)[0])


def theta1_dz(z: complex, mp, reduce: bool = True) -> complex:
    return complex(theta1_derivs(z, mp, 1, reduce)[1])


def theta1_log_derivative(z: complex, mp) -> complex:
    """theta1'(z)/theta1(z)."""
    t = theta1_derivs(z, mp, 1)
    return complex(t[1] / t[0])


@lru_cache(maxsize=256)
def _theta_at_zero(tau: complex, order: int):
    return theta1_derivs(0j, ModularParam(tau), order)


# --------------------------------------------------------------------------
# chi


def _check_z(z: complex, tau: complex, settings: Settings):
    d, m, n = lattice_nearest(z, tau)
    if d <= settings.tol_pole:
        raise PoleProximity(z, m + n * tau, d, what="chi (z on the lattice)")


def _chi_u(u: complex, z: complex, tau: complex) -> complex:
    """chi as a function of u = w/(2 pi i), without pole checks."""
    # chi is 1-periodic in u and in z
    u -= math.floor(u.real)
    z -= math.floor(z.real)
    th0 = _theta_at_zero(tau, 1)
    return (theta1(u + z, tau) * th0[1]) / (TWO_PI_I * theta1(z, tau) * theta1(u, tau))


def _chi_u_dlog(u: complex, z: complex, tau: complex) -> complex:
    """d/du log chi = theta1'(u+z)/theta1(u+z) - theta1'(u)/theta1(u)."""
    u -= math.floor(u.real)
    z -= math.floor(z.real)
    return theta1_log_derivative(u + z, tau) - theta1_log_derivative(u, tau)


def _chi0_taylor(z: complex, tau: complex, order: int = _TAYLOR_ORDER) -> tuple:
    """Taylor coefficients (in u) of chi(w, z) - 1/w around u = 0."""
    z -= math.floor(z.real)
    az = theta1_derivs(z, tau, order + 1)
    a = az / np.array([math.factorial(k) for k in range(order + 2)])
    t0 = _theta_at_zero(tau, order + 2)
    b = np.array([t0[k + 1] / math.factorial(k + 1) for k in range(order + 2)])
    c = np.zeros(order + 2, dtype=complex)
    for k in range(order + 2):
        c[k] = (a[k] - np.dot(b[1:k + 1], c[k - 1::-1][:k])) / b[0]
    pref = b[0] / (TWO_PI_I * az[0])
    # chi - 1/w = pref * sum_{k>=1} c_k u^(k-1)
    return tuple(pref * c[1:])


_taylor_cache = lru_cache(maxsize=1024)(_chi0_taylor)


def _chi0_small(u: complex, z: complex, tau: complex, deriv: bool = False) -> complex:
    coef = _taylor_cache(complex(z), complex(tau))
    if not deriv:
        acc = 0j
        for c in reversed(coef):
            acc = acc * u + c
        return acc
    acc = 0j
    for k in reversed(range(1, len(coef))):
        acc = acc * u + k * coef[k]
    return acc / TWO_PI_I


def chi(w: complex, z: complex, mp, settings: Settings = DEFAULT) -> complex:
    tau = _mp(mp).tau
    w, z = complex(w), complex(z)
    _check_z(z, tau, settings)
    d, m, n = lattice_nearest(w / TWO_PI_I, tau)
    if 2 * PI * d <= settings.tol_pole:
        raise PoleProximity(w, TWO_PI_I * (m + n * tau), 2 * PI * d, what="chi (w on 2 pi i Omega)")
    return _chi_u(w / TWO_PI_I, z, tau)


def chi_a_raw(a: int, N: int, w: complex, z: complex, tau: complex) -> complex:
    """chi_a without domain checks."""
    u = w / TWO_PI_I + a * tau / N
    ph = cmath.exp(TWO_PI_I * a * z / N)
    if a == 0:
        if abs(u) < _TAYLOR_RADIUS:
            return _chi0_small(u, z, tau)
        return _chi_u(u, z, tau) - 1.0 / w
    return ph * _chi_u(u, z, tau)


def chi_a_deriv_raw(a: int, N: int, w: complex, z: complex, tau: complex) -> complex:
    """d/dw chi_a(w, z)."""
    u = w / TWO_PI_I + a * tau / N
    if a == 0 and abs(u) < _TAYLOR_RADIUS:
        return _chi0_small(u, z, tau, deriv=True)
    val = _chi_u(u, z, tau) * _chi_u_dlog(u, z, tau) / TWO_PI_I
    if a == 0:
        return val + 1.0 / (w * w)
    return cmath.exp(TWO_PI_I * a * z / N) * val


def chi_a_pole(a: int, N: int, w: complex, tau: complex):
    """Distance from w to 2 pi i Omega_a and the nearest such point."""
    x = w / TWO_PI_I + a * tau / N
    d, m, n = lattice_nearest(x, tau, exclude_zero=(a == 0))
    p = TWO_PI_I * (m + n * tau - a * tau / N)
    return 2 * PI * d, p


def chi_a(a: int, N: int, w: complex, z: complex, mp, settings: Settings = DEFAULT) -> complex:
    tau = _mp(mp).tau
    if not 0 <= a < N:
        raise ValueError(f"need 0 <= a < N, got a={a}, N={N}")
    w, z = complex(w), complex(z)
    _check_z(z, tau, settings)
    d, p = chi_a_pole(a, N, w, tau)
    if d <= settings.tol_pole:
        raise PoleProximity(w, p, d, what=f"chi_{a}")
    return chi_a_raw(a, N, w, z, tau)


def chi_a_fn(a: int, N: int, z: complex, mp, settings: Settings = DEFAULT) -> ScalarFn:
    """``w -> chi_a(w, z|tau)`` as a ScalarFn for the matrix calculus."""
    tau = _mp(mp).tau
    z = complex(z)
    _check_z(z, tau, settings)
    return ScalarFn(
        "chi_a",
        lambda w: chi_a_raw(a, N, w, z, tau),
        lambda w: chi_a_deriv_raw(a, N, w, z, tau),
        lambda w: chi_a_pole(a, N, w, tau),
        {"a": a, "N": N, "z": z, "tau": tau},
    )


def chi0_at_zero(z: complex, mp) -> complex:
    """chi_0(0, z) = theta1'(z)/(2 pi i theta1(z))."""
    return theta1_log_derivative(z, _mp(mp).tau) / TWO_PI_I


# --------------------------------------------------------------------------
# Fourier-type series in the strip -Im tau < Im z < 0


def series_terms_needed(w: complex, z: complex, tau: complex, a: int = 0, N: int = 1,
                        eps: float = 1e-17) -> int:
    """Smallest M after which both tails of the chi_a series are below ``eps``.

    For n > 0 the bracket 1 + coth(x) decays like 2 e^{2 Re x} and
    |e^{2 pi i z n}| = e^{2 pi |Im z| n}; for n < 0 the bracket tends to 2 and
    the exponential decays like e^{-2 pi |Im z| |n|}.
    """
    y, t = -complex(z).imag, complex(tau).imag
    w = complex(w)
    rate_pos = 2 * PI * (t - y)
    rate_neg = 2 * PI * y
    shift = w.real - 2 * PI * t * a / N
    n_pos = (shift + math.log(4 / eps)) / rate_pos
    n_neg = math.log(4 / eps) / rate_neg
    # the bracket only saturates at 2 once Re(w/2 + pi i tau (a/N + n)) >> 0
    n_sat = (-shift / 2 + 20) / (PI * t)
    M = int(math.ceil(max(n_pos, n_neg, n_sat, 1)))
    return M + 1


def _check_strip(z, tau):
    if not -tau.imag < complex(z).imag < 0:
        raise StripViolation(
            f"Im z = {complex(z).imag} outside the strip (-Im tau, 0) = ({-tau.imag}, 0); the series diverge",
            witness=z)


def exp_times_one_plus_coth(E: complex, x: complex) -> complex:
    """``e^E (1 + coth x)`` without overflow when e^E is large and 1 + coth x tiny."""
    if x.real >= 0:
        return 2 * cmath.exp(E) / (1 - cmath.exp(-2 * x))
    return -2 * cmath.exp(E + 2 * x) / (1 - cmath.exp(2 * x))


def chi_series(w: complex, z: complex, mp, M: int | None = None) -> complex:
    """Partial sum of ``sum_n e^{2 pi i z n} (1 + coth(w/2 + pi i tau n))/2`` over |n| <= M."""
    tau = _mp(mp).tau
    w, z = complex(w), complex(z)
    _check_strip(z, tau)
    if M is None:
        M = series_terms_needed(w, z, tau)
    total = 0j
    for n in range(-M, M + 1):
        total += exp_times_one_plus_coth(TWO_PI_I * z * n, w / 2 + 1j * PI * tau * n)
    return 0.5 * total


def chi_a_series(a: int, N: int, w: complex, z: complex, mp, M: int | None = None) -> complex:
    """Partial sum of the chi_a series: head f_a(w + 2 pi i a tau/N) plus |n| <= M, n != 0."""
    tau = _mp(mp).tau
    w, z = complex(w), complex(z)
    _check_strip(z, tau)
    if M is None:
        M = series_terms_needed(w, z, tau, a, N)
    wa = w + TWO_PI_I * a * tau / N
    total = f_a_fn(a).value(wa)
    acc = 0j
    for n in range(1, M + 1):
        for s in (n, -n):
            acc += exp_times_one_plus_coth(TWO_PI_I * z * s, wa / 2 + 1j * PI * tau * s)
    return cmath.exp(TWO_PI_I * a * z / N) * (total + 0.5 * acc)


def residue_at_zero(fn, radius: float = 0.05, nodes: int = 64) -> complex:
    """(1/2 pi i) times the contour integral of ``fn`` around a circle at 0 (trapezoid rule)."""
    th = 2 * PI * np.arange(nodes) / nodes
    pts = radius * np.exp(1j * th)
    return complex(np.mean([fn(p) * p for p in pts]))


def domain_D_contains(w: complex, z: complex, mp, a: int = 0, N: int = 1,
                      settings: Settings = DEFAULT) -> bool:
    """Membership in D_a = {w not in 2 pi i Omega_a, -Im tau < Im z < 0} with tol_pole margins."""
    tau = _mp(mp).tau
    if not -tau.imag + settings.tol_pole < complex(z).imag < -settings.tol_pole:
        return False
    d, _ = chi_a_pole(a, N, complex(w), tau)
    return d > settings.tol_pole


def check_strip_domain(z, mp):
    """Raise DomainViolation unless Im z lies strictly in (-Im tau, 0)."""
    tau = _mp(mp).tau
    if not in_strip(z, tau):
        raise DomainViolation(f"Im z = {complex(z).imag} outside (-Im tau, 0)", witness=z)
