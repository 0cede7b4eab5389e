"""Batches of identity checks returning :class:`SampleRecord` lists.

Each suite draws its inputs from the generator it is given, so a seed fixes
the whole run.
"""

from __future__ import annotations

import cmath
import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import elliptic as ell
from .cdybe import (
    BlockRMatrix,
    DerivativeScheme,
    evaluation_check,
    fd_derivative,
    residual_finite,
    residual_spectral,
    spectral_r_family,
)
from .errors import StripViolation
from .liealg import CartanData, GradedDecomposition, LieAlgebra, decompose, identity_automorphism
from .loopalg import AffineDynVariable, AffineElement, AffineRMatrix, make_affine, theorem1_residual
from .matfun import TWO_PI_I, f_fn
from .report import SampleRecord
from .settings import DEFAULT, Settings
from .rmat import (
    DomainQuery,
    felder_cartan_part,
    felder_gauge_sides,
    felder_S,
    in_domain,
    loop_grade_block,
    r_tau,
    rho_q_fns,
    rho_shift,
    tau_from_k,
)
from .sampling import (
    random_admissible_omega,
    random_complex,
    random_g0,
    random_off_lattice,
    random_strip_point,
    random_z_triple,
)

PI = math.pi


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("DYNRMAT_THREADS", "1")))
    except ValueError:
        return 1


def pmap(fn, items):
    """Order-preserving map, threaded when DYNRMAT_THREADS > 1."""
    n = thread_count()
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(n) as ex:
        return list(ex.map(fn, items))


def _rel(a, b) -> float:
    scale = max(abs(a), abs(b), 1e-300)
    return abs(a - b) / scale


# --------------------------------------------------------------------------
# Elliptic identities


def elliptic_identity_suite(taus, rng: np.random.Generator, grid: int = 10, n_random: int = 20,
                            tol_theta: float = 1e-12, tol_translation: float = 1e-10,
                            tol_identity: float = 1e-9, N: int = 3) -> list:
    recs = []
    for tau in taus:
        tau = complex(tau)
        mp = ell.ModularParam(tau)
        q_inv = cmath.exp(-1j * PI * tau)
        worst1 = worst2 = 0.0
        xs = np.linspace(-0.95, 0.95, grid)
        ys = np.linspace(-0.95, 0.95, grid) * tau.imag
        for x in xs:
            for y in ys:
                z = complex(x, y)
                t = ell.theta1(z, mp, reduce=False)
                worst1 = max(worst1, _rel(ell.theta1(z + 1, mp, reduce=False), -t))
                worst2 = max(worst2, _rel(ell.theta1(z + tau, mp, reduce=False),
                                          -q_inv * cmath.exp(-2j * PI * z) * t))
        recs.append(SampleRecord("theta1 z+1 quasi-periodicity", {"tau": tau, "grid": grid}, worst1,
                                 passed=worst1 < tol_theta))
        recs.append(SampleRecord("theta1 z+tau quasi-periodicity", {"tau": tau, "grid": grid}, worst2,
                                 passed=worst2 < tol_theta))

        tr = par0 = para = lim = mean = res = 0.0
        for _ in range(n_random):
            z = random_off_lattice(tau, rng, 0.1)
            w = complex(random_complex(rng, 1, 0.8)[0])
            if ell.chi_a_pole(0, 1, w, tau)[0] < 0.1 or ell.chi_a_pole(0, 1, w + TWO_PI_I * tau, tau)[0] < 0.1:
                continue
            tr = max(tr, _rel(ell.chi(w + TWO_PI_I * tau, z, mp), cmath.exp(-2j * PI * z) * ell.chi(w, z, mp)))
            if ell.chi_a_pole(0, N, w, tau)[0] > 0.1:
                par0 = max(par0, abs(ell.chi_a(0, N, -w, z, mp) + ell.chi_a(0, N, w, -z, mp)))
            for a in range(1, N):
                if min(ell.chi_a_pole(a, N, -w, tau)[0], ell.chi_a_pole(N - a, N, w, tau)[0]) > 0.1:
                    para = max(para, abs(ell.chi_a(a, N, -w, z, mp) + ell.chi_a(N - a, N, w, -z, mp)))
            # chi_0(0, z) against theta1'/theta1 and against the mean value on a circle
            target = ell.theta1_dz(z, mp) / (TWO_PI_I * ell.theta1(z, mp))
            lim = max(lim, abs(ell.chi_a(0, N, 0, z, mp) - target))
            ring = 0.2 * np.exp(2j * PI * np.arange(64) / 64)
            mean = max(mean, abs(np.mean([ell.chi_a(0, N, p, z, mp) for p in ring]) - target))
            for a in range(N):
                wa = complex(random_complex(rng, 1, 0.3)[0])
                if ell.chi_a_pole(a, N, wa, tau)[0] < 0.1:
                    continue
                r = ell.residue_at_zero(lambda zz: ell.chi_a(a, N, wa, zz, mp))
                res = max(res, abs(r - 1 / TWO_PI_I))
        inputs = {"tau": tau, "samples": n_random, "N": N}
        recs += [
            SampleRecord("chi translation w -> w + 2 pi i tau", inputs, tr, passed=tr < tol_translation),
            SampleRecord("chi_0 parity", inputs, par0, passed=par0 < tol_identity),
            SampleRecord("chi_a parity against chi_(N-a)", inputs, para, passed=para < tol_identity),
            SampleRecord("chi_0(0, z) equals theta1'/(2 pi i theta1)", inputs, lim, passed=lim < tol_identity),
            SampleRecord("chi_0(0, z) equals its circle mean", inputs, mean, passed=mean < tol_identity),
            SampleRecord("residue of chi_a at z = 0", inputs, res, passed=res < tol_identity),
        ]
    return recs


def series_suite(tau: complex, rng: np.random.Generator, n: int = 50, N: int = 3, tol: float = 1e-10,
                 monotone_from: int = 5, floor: float = 1e-13) -> list:
    """Closed forms against the strip series, with auto-chosen truncation and monotone error in M."""
    tau = complex(tau)
    mp = ell.ModularParam(tau)
    recs = []
    worst, worst_a, non_monotone = 0.0, 0.0, []
    for i in range(n):
        z = random_strip_point(tau, rng)
        while True:
            w = complex(random_complex(rng, 1, 0.7)[0])
            if ell.chi_a_pole(0, 1, w, tau)[0] > 0.1 and all(ell.chi_a_pole(a, N, w, tau)[0] > 0.1 for a in range(N)):
                break
        exact = ell.chi(w, z, mp)
        worst = max(worst, abs(ell.chi_series(w, z, mp) - exact))
        for a in range(N):
            worst_a = max(worst_a, abs(ell.chi_a_series(a, N, w, z, mp) - ell.chi_a(a, N, w, z, mp)))
        M_auto = ell.series_terms_needed(w, z, tau)
        errs = [abs(ell.chi_series(w, z, mp, M) - exact) for M in range(monotone_from, M_auto + 1)]
        for j in range(1, len(errs)):
            if errs[j - 1] > floor and errs[j] > errs[j - 1]:
                non_monotone.append({"w": w, "z": z, "M": monotone_from + j})
                break
    inputs = {"tau": tau, "points": n, "N": N}
    recs.append(SampleRecord("chi equals its strip series", inputs, worst, passed=worst < tol))
    recs.append(SampleRecord("chi_a equals its strip series", inputs, worst_a, passed=worst_a < tol))
    recs.append(SampleRecord("series error decreases in M", inputs, float(len(non_monotone)),
                             passed=not non_monotone, extra={"violations": non_monotone[:5]}))
    return recs


# --------------------------------------------------------------------------
# Operator CDYBE on the truncated affine algebra


def random_homogeneous(dec: GradedDecomposition, n: int, rng: np.random.Generator, central: bool = True):
    U = dec.bases[dec.grade_of(n)]
    xi = U @ rng.normal(size=U.shape[1])
    if n == 0 and central:
        return AffineElement({0: xi.astype(complex)}, complex(rng.normal()), complex(rng.normal()))
    return AffineElement({n: xi.astype(complex)})


def random_kappa(L, dec, rng, scale: float = 0.3) -> AffineDynVariable:
    k = complex(-rng.uniform(0.3, 1.5) * rng.choice([-1, 1]), rng.normal())
    om = random_admissible_omega(L, dec, rng, k=k, scale=scale)
    return AffineDynVariable(om, k, complex(rng.normal()))


def theorem1_suite(L: LieAlgebra, dec: GradedDecomposition, rng: np.random.Generator, cutoff: int = 6,
                   n_kappa: int = 5, tol: float = 1e-9, mode: str = "analytic", name: str = "") -> list:
    TA = make_affine(L, dec, cutoff)
    kappas = [random_kappa(L, dec, rng) for _ in range(n_kappa)]
    pairs = [(m, n) for m in TA.grades() for n in TA.grades() if abs(m + n) <= cutoff]
    work = []
    for kap in kappas:
        xs = [(m, n, random_homogeneous(dec, m, rng), random_homogeneous(dec, n, rng)) for m, n in pairs]
        work.append((kap, xs))

    def run(item):
        kap, xs = item
        worst, wit, central_pairs = 0.0, None, 0
        for m, n, X, Y in xs:
            r = theorem1_residual(TA, kap, X, Y, mode).norm()
            central_pairs += (m + n == 0 and m != 0)
            if r >= worst:
                worst, wit = r, (m, n)
        return worst, wit, central_pairs

    recs = []
    for kap, (worst, wit, cp) in zip(kappas, pmap(run, work)):
        recs.append(SampleRecord(f"affine CDYBE {name}".strip(),
                                 {"omega": kap.omega, "k": kap.k, "l": kap.l, "cutoff": cutoff, "mode": mode},
                                 worst, passed=worst < tol,
                                 extra={"worst_grades": wit, "grade_pairs": len(xs), "central_pairs": cp}))
    return recs


# --------------------------------------------------------------------------
# Spectral CDYBE


def spectral_suite(L: LieAlgebra, dec: GradedDecomposition, taus, rng: np.random.Generator, n: int = 20,
                   tol_analytic: float = 1e-8, tol_fd: float = 1e-6, sensitivity: float = 1e-3,
                   sensitivity_floor: float = 1e-4, deriv: str = "both", name: str = "",
                   fd_step: float = DEFAULT.fd_step) -> list:
    work = []
    for tau in taus:
        for _ in range(n):
            om = random_admissible_omega(L, dec, rng, tau=tau, scale=0.3)
            z = random_z_triple(tau, rng, 0.1)
            idx = tuple(int(i) for i in rng.integers(0, L.dim, 2))
            work.append((complex(tau), om, z, idx))

    def run(item):
        tau, om, (z1, z2, z3), idx = item
        out = {}
        if deriv in ("analytic", "both"):
            out["analytic"] = residual_spectral(L, dec, tau, om, z1 - z2, z1 - z3, z2 - z3,
                                                DerivativeScheme("analytic"))
        if deriv in ("fd", "both"):
            out["fd"] = residual_spectral(L, dec, tau, om, z1 - z2, z1 - z3, z2 - z3, DerivativeScheme("fd", fd_step))
        bump = np.zeros((L.dim, L.dim), dtype=complex)
        bump[idx] = sensitivity

        def corrupted(z, w):
            return r_tau(L, dec, tau, w, z, check_domain=False).coeffs + bump

        out["corrupted"] = residual_spectral(L, dec, tau, om, z1 - z2, z1 - z3, z2 - z3,
                                             DerivativeScheme("fd", fd_step), r_override=corrupted)
        return out

    recs = []
    for (tau, om, z, idx), out in zip(work, pmap(run, work)):
        res = {k: v.max_abs() for k, v in out.items()}
        ok = res["corrupted"] > sensitivity_floor
        ok &= res.get("analytic", 0.0) < tol_analytic
        ok &= res.get("fd", 0.0) < tol_fd
        main = res.get("analytic", res.get("fd"))
        fro = out.get("analytic", out.get("fd")).fro()
        recs.append(SampleRecord(f"spectral CDYBE {name}".strip(),
                                 {"tau": tau, "omega": om, "z": z, "corrupted_entry": idx}, main, fro, ok,
                                 extra={"residual_" + k: v for k, v in res.items()}))
    return recs


# --------------------------------------------------------------------------
# Evaluation homomorphism


def evaluation_suite(L, dec, k: complex, omega, z: complex, Ms=(5, 10, 20, 40), tol: float = 1e-8) -> list:
    recs = []
    errs = []
    for M in Ms:
        ev = evaluation_check(L, dec, k, omega, z, M)
        errs.append(ev.max_error)
        recs.append(SampleRecord(f"evaluated loop r-matrix, M={M}", {"k": k, "omega": omega, "z": z, "M": M},
                                 ev.max_error, passed=(ev.max_error < tol) if M == max(Ms) else True,
                                 extra={"block_errors": ev.block_errors, "decay_rate": ev.decay_rate}))
    mono = all(b <= a or a < 1e-14 for a, b in zip(errs, errs[1:]))
    recs.append(SampleRecord("evaluation error decreases in M", {"Ms": list(Ms)}, errs[-1], passed=mono,
                             extra={"errors": errs}))
    t = tau_from_k(k, dec.N).imag
    for outside in (complex(z.real, 0.1), complex(z.real, -t - 0.1)):
        try:
            evaluation_check(L, dec, k, omega, outside, 5)
            raised = False
        except StripViolation:
            raised = True
        recs.append(SampleRecord("strip violation detected", {"z": outside}, 0.0, passed=raised))
    return recs


def converge_table(L, dec, k: complex, omega, zs, Ms) -> list:
    """Rows ``{z, M, max_error, block errors, decay rate}``; points outside the strip are flagged."""
    rows = []
    for z in zs:
        for M in Ms:
            try:
                ev = evaluation_check(L, dec, k, omega, z, M)
                rows.append({"z": z, "M": M, "max_error": ev.max_error, "block_errors": ev.block_errors,
                             "decay_rate": ev.decay_rate, "excluded": False})
            except StripViolation as e:
                rows.append({"z": z, "M": M, "excluded": True, "reason": str(e)})
    return rows


# --------------------------------------------------------------------------
# Felder comparison


def felder_suite(cd: CartanData, tau: complex, rng: np.random.Generator, n: int = 10, tol: float = 1e-8,
                 name: str = "") -> list:
    L = cd.algebra
    from .liealg import coxeter_automorphism

    dec = decompose(L, coxeter_automorphism(cd))
    recs = []
    for _ in range(n):
        om = random_admissible_omega(L, dec, rng, tau=tau, scale=0.3)
        z1, z2, _ = random_z_triple(tau, rng, 0.1)
        lhs, rhs = felder_gauge_sides(cd, tau, om, z1, z2, dec)
        r = (lhs - rhs).max_abs()
        recs.append(SampleRecord(f"Felder gauge equivalence {name}".strip(),
                                 {"tau": tau, "omega": om, "z1": z1, "z2": z2}, r, passed=r < tol))
    om1, om2 = random_g0(dec, rng, 0.3), random_g0(dec, rng, 0.3)
    z = random_off_lattice(tau, rng, 0.1)
    c_S = [felder_cartan_part(cd, felder_S(cd, tau, o, z)) for o in (om1, om2)]
    c_r = [felder_cartan_part(cd, r_tau(L, dec, tau, o, z)) for o in (om1, om2)]
    d = max(float(np.abs(c_S[0] - c_S[1]).max()), float(np.abs(c_r[0] - c_r[1]).max()),
            float(np.abs(c_S[0] - c_r[0]).max()))
    recs.append(SampleRecord(f"Cartan part omega-independent {name}".strip(), {"tau": tau, "z": z}, d,
                             passed=d < 1e-12))
    return recs


# --------------------------------------------------------------------------
# rho_q


def rho_q_suite(L, dec, q: int, rng: np.random.Generator, n: int = 5, tol: float = 1e-8, M=None,
                name: str = "", scale: float = 0.2) -> list:
    fns = rho_q_fns(dec, q)
    shift = None if M is None else rho_shift(dec, q, M)
    fam = BlockRMatrix(L, dec, fns, shift)
    recs = []
    for _ in range(n):
        om = random_g0(dec, rng, scale)
        if shift is not None:
            om = om + shift
        res = residual_finite(L, dec, fam, om)
        recs.append(SampleRecord(f"rho_q CDYBE {name}".strip(), {"q": q, "omega": om, "shifted": M is not None},
                                 res.residual_max, res.residual_fro, res.residual_max < tol,
                                 extra={"witness": res.witness}))
    return recs


def canonical_suite(L, rng: np.random.Generator, n: int = 5, tol: float = 1e-8, name: str = "") -> list:
    dec = decompose(L, identity_automorphism(L))
    fam = BlockRMatrix(L, dec, {0: f_fn()})
    recs = []
    for _ in range(n):
        om = random_g0(dec, rng, 0.2)
        res = residual_finite(L, dec, fam, om)
        recs.append(SampleRecord(f"canonical r-matrix CDYBE {name}".strip(), {"omega": om},
                                 res.residual_max, res.residual_fro, res.residual_max < tol))
    return recs


def bridge_suite(L, dec, q: int, rng: np.random.Generator, n: int = 5, grades=range(-6, 7), tol: float = 1e-10,
                 name: str = "") -> list:
    """Blocks of rho_q against R_k at k = 2 pi i q/N on every grade (formula level)."""
    N = dec.N
    k = TWO_PI_I * q / N
    fns = rho_q_fns(dec, q)
    from .matfun import LinOp, matrix_function

    recs = []
    for _ in range(n):
        om = random_g0(dec, rng, 0.2)
        worst = 0.0
        for g in grades:
            a = dec.grade_of(g)
            # the identity holds on G_0 itself and on every n = a mod N with a != 0
            if a not in dec.index_set or (a == 0 and g != 0):
                continue
            rho_blk = matrix_function(LinOp(dec.ad_block(om, a)), fns[a]).matrix
            worst = max(worst, float(np.abs(rho_blk - loop_grade_block(L, dec, k, om, g)).max()))
        recs.append(SampleRecord(f"rho_q equals R_k blockwise {name}".strip(), {"q": q, "omega": om}, worst,
                                 passed=worst < tol))
    return recs


# --------------------------------------------------------------------------
# Domain logic


def _cartan_omega_with_root_value(cd: CartanData, alpha, value: complex, rng) -> np.ndarray:
    """Random Cartan element ``omega`` rescaled so that ``alpha(omega) = value``."""
    v = cd.cartan_basis @ (rng.normal(size=cd.rank) + 1j * rng.normal(size=cd.rank))
    return v * (value / cd.root_eval(alpha, v))


def boundary_queries(cd: CartanData, dec: GradedDecomposition, rng: np.random.Generator, n: int) -> list:
    """Loop-form queries whose root value sits on, near, or clearly off a forbidden point.

    Offsets avoid the neighbourhood of ``tol_pole`` itself, where the two
    forms may round differently.
    """
    N = dec.N
    pos = cd.positive_roots()
    out = []
    for _ in range(n):
        alpha = pos[int(rng.integers(len(pos)))]
        a = dec.grade_of(cd.height(alpha))
        k = complex(-rng.uniform(0.2, 2.0), rng.normal())
        m, j = (int(x) for x in rng.integers(-2, 3, 2))
        if a == 0 and m == 0 and j == 0:
            j = 1
        delta = rng.choice([0.0, 1e-9, 1e-3, 0.1]) * cmath.exp(2j * PI * rng.uniform())
        lam = TWO_PI_I * j - k * (a + m * N) + delta
        out.append((_cartan_omega_with_root_value(cd, alpha, lam, rng), k))
    return out


def domain_suite(L, dec, rng: np.random.Generator, n: int = 200, cd: CartanData | None = None,
                 settings: Settings = DEFAULT) -> list:
    """Loop and elliptic domain decisions must agree; half the queries are boundary-built when ``cd`` is given."""
    N = dec.N
    queries = []
    n_boundary = n // 2 if cd is not None else 0
    for _ in range(n - n_boundary):
        queries.append((random_g0(dec, rng, rng.uniform(0.1, 6.0)), complex(-rng.uniform(0.05, 3.0), rng.normal() * 3)))
    if n_boundary:
        queries += boundary_queries(cd, dec, rng, n_boundary)
    mismatches = []
    admitted = 0
    for om, k in queries:
        a = in_domain(L, dec, DomainQuery(om, k=k), settings).admitted
        b = in_domain(L, dec, DomainQuery(om, tau=tau_from_k(k, N)), settings).admitted
        admitted += a
        if a != b:
            mismatches.append({"k": k, "omega": om})
    recs = [SampleRecord("B_k and B^tau coincide", {"queries": n}, float(len(mismatches)),
                         passed=not mismatches,
                         extra={"admitted": admitted, "rejected": n - admitted, "mismatches": mismatches[:3]})]
    zero = np.zeros(L.dim, dtype=complex)
    ks = [complex(s * rng.uniform(0.01, 5), rng.normal() * 5) for s in (-1, 1) for _ in range(10)]
    ok = all(in_domain(L, dec, DomainQuery(zero, k=k), settings).admitted for k in ks)
    recs.append(SampleRecord("origin admitted for Re k != 0", {"ks": ks}, 0.0, passed=ok))
    imag = [complex(0, v) for v in (TWO_PI_I.imag / 3, 1.0, -2.5)]
    ok = all(not in_domain(L, dec, DomainQuery(zero, k=k), settings).admitted for k in imag)
    recs.append(SampleRecord("imaginary k rejected", {"ks": imag}, 0.0, passed=ok))
    return recs


def boundary_witness_suite(cd: CartanData, dec: GradedDecomposition, tau: complex,
                           rng: np.random.Generator | None = None) -> list:
    """For each positive root, put ``alpha(omega)`` on ``2 pi i Omega_a`` and expect rejection naming it.

    For sl2 with the Coxeter twist this is ``omega = x h`` with ``x = -pi i tau / 2``.
    """
    L, N, tau = cd.algebra, dec.N, complex(tau)
    rng = np.random.default_rng(0) if rng is None else rng
    recs = []
    for alpha in cd.positive_roots():
        a = dec.grade_of(cd.height(alpha))
        target = TWO_PI_I * (-a * tau / N) if a else TWO_PI_I * tau
        if cd.rank == 1:
            h = cd.cartan_basis[:, 0]
            om = h * (target / cd.root_eval(alpha, h))
        else:
            # a generic direction keeps the other roots off the forbidden set
            om = _cartan_omega_with_root_value(cd, alpha, target, rng)
        rep = in_domain(L, dec, DomainQuery(om, tau=tau))
        w = rep.witness or {}
        ev = w.get("eigenvalue")
        # the witness is alpha(omega) or its negative (the -alpha eigenvalue in grade N - a)
        ok = (not rep.admitted) and ev is not None and min(abs(ev - target), abs(ev + target)) < 1e-12
        recs.append(SampleRecord("boundary omega rejected with witness", {"root": alpha, "tau": tau, "omega": om},
                                 0.0 if ev is None else min(abs(ev - target), abs(ev + target)), passed=ok,
                                 extra={"witness": w, "expected_eigenvalue": target}))
    return recs


# --------------------------------------------------------------------------
# Analytic against finite-difference derivatives


def derivative_agreement_suite(fixtures, rng: np.random.Generator, n: int = 100, tol: float = 1e-6,
                               fd_step: float = DEFAULT.fd_step) -> list:
    """``fixtures`` is a list of ``(label, L, dec, family_factory)``; each factory takes ``rng``.

    A factory returns ``(family, omega)`` where ``family`` has ``__call__`` and
    ``derivative``. The direction is a random complex vector of G_0.
    """
    recs = []
    worst, wit = 0.0, None
    for i in range(n):
        label, L, dec, factory = fixtures[i % len(fixtures)]
        fam, om = factory(rng)
        T = random_g0(dec, rng, 1.0)
        an = fam.derivative(om, T, DerivativeScheme("analytic"))
        fd = fam.derivative(om, T, DerivativeScheme("fd", fd_step))
        rel = float(np.abs(an - fd).max() / max(np.abs(an).max(), 1e-12))
        if rel > worst:
            worst, wit = rel, label
    recs.append(SampleRecord("analytic and finite-difference derivatives agree", {"fixtures": n}, worst,
                             passed=worst < tol, extra={"worst_fixture": wit}))
    return recs


class LoopGradeFamily:
    """``omega -> R_k(omega)`` on a single grade, lifted to G, as a derivative-capable family."""

    def __init__(self, L, dec, k, n):
        from .loopalg import TruncatedAffine

        self.L, self.dec, self.k, self.n = L, dec, k, n
        self.TA = TruncatedAffine(L, dec, max(abs(n), dec.N), central=False)

    def _R(self, omega):
        return AffineRMatrix(self.TA, AffineDynVariable(np.asarray(omega, dtype=complex), self.k), check_domain=False)

    def __call__(self, omega):
        return self._R(omega).grade_operator(self.n)

    def derivative(self, omega, T, scheme=DerivativeScheme()):
        if scheme.mode == "fd":
            return fd_derivative(self, omega, T, scheme.fd_step)
        return self._R(omega).grade_derivative(self.n, AffineElement({0: np.asarray(T, dtype=complex)}))


def standard_derivative_fixtures(algebras) -> list:
    """rho_q, r_tau and loop-grade families over the given ``(name, L, dec)`` triples."""
    out = []
    for name, L, dec in algebras:
        N = dec.N

        def rho(rng, L=L, dec=dec, N=N):
            q = 1
            return BlockRMatrix(L, dec, rho_q_fns(dec, q)), random_g0(dec, rng, 0.2)

        def rt(rng, L=L, dec=dec):
            tau = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.7, 1.5))
            z = random_off_lattice(tau, rng, 0.1)
            return spectral_r_family(L, dec, tau, z), random_admissible_omega(L, dec, rng, tau=tau, scale=0.3)

        def loop(rng, L=L, dec=dec):
            k = complex(-rng.uniform(0.3, 1.5), rng.normal())
            n = int(rng.integers(-6, 7))
            while dec.grade_of(n) not in dec.index_set:
                n += 1
            return LoopGradeFamily(L, dec, k, n), random_admissible_omega(L, dec, rng, k=k, scale=0.3)

        out += [(f"rho_q {name}", L, dec, rho), (f"r_tau {name}", L, dec, rt), (f"loop R_k {name}", L, dec, loop)]
    return out
