"""Command-line driver: ``dynrmat <subcommand> [options]``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 on bad
configuration. Settings come from defaults, then ``--config`` (a JSON
object with the same keys as the report's ``config`` echo), then flags.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import suites
from .errors import AlgebraError, ConfigError, DynRMatError
from .liealg import (
    CartanData,
    coxeter_automorphism,
    decompose,
    identity_automorphism,
    load_algebra,
    make_sl,
    outer_automorphism_sl,
)
from .loopalg import make_affine
from .cdybe import loop_grade_window_residual
from .report import SampleRecord, VerificationReport, to_jsonable
from .rmat import (
    DomainQuery,
    felder_S,
    in_domain,
    k_from_tau,
    r_tau,
    rho_q_fns,
    rho_q_tensor,
)
from .settings import Settings

SUBCOMMANDS = ("check-domain", "eval-rmatrix", "verify-cdybe", "verify-theorem1", "felder-compare",
               "converge-study", "identity-suite")

# sample counts used when --samples is not given
DEFAULT_SAMPLES = {
    "check-domain": 200,
    "eval-rmatrix": 1,
    "verify-cdybe": 20,
    "verify-theorem1": 5,
    "felder-compare": 10,
    "converge-study": 1,
    "identity-suite": 50,
}
DEFAULT_KIND = {"eval-rmatrix": "r_tau", "verify-cdybe": "spectral"}
KINDS = {
    "eval-rmatrix": ("rho_q", "r_tau", "felder"),
    "verify-cdybe": ("rho_q", "loop", "spectral", "derivatives"),
}


@dataclass
class RunConfig:
    subcommand: str = ""
    algebra: str = "sl2"
    twist: str = "coxeter"
    tau: list = field(default_factory=lambda: [1j])
    k: complex | None = None
    q: int | None = None
    kind: str | None = None
    deriv: str = "analytic"
    samples: int | None = None
    seed: int = 0
    tol: float | None = None
    tol_pole: float = 1e-6
    tol_algebra: float = 1e-10
    fd_step: float = 1e-5
    cutoff: int = 6
    omega: list | None = None
    z: list | None = None
    M: list = field(default_factory=lambda: [5, 10, 20, 40])
    normalization: str = "ours"
    shift: bool = False
    format: str = "json"
    output: str | None = None

    def settings(self) -> Settings:
        return Settings(tol_pole=self.tol_pole, tol_algebra=self.tol_algebra, fd_step=self.fd_step)

    def n_samples(self) -> int:
        return DEFAULT_SAMPLES[self.subcommand] if self.samples is None else self.samples

    def echo(self) -> dict:
        return to_jsonable({k: v for k, v in asdict(self).items() if k != "output"})


# --------------------------------------------------------------------------
# Parsing helpers


_COMPLEX_RE = re.compile(r"^[0-9eE.+\-ij ]+$")


def parse_complex(s) -> complex:
    """``0.3+0.8i``, ``i``, ``-2j``, ``1.5`` or a ``[re, im]`` pair."""
    if isinstance(s, (list, tuple)) and len(s) == 2:
        return complex(float(s[0]), float(s[1]))
    if isinstance(s, (int, float, complex)):
        return complex(s)
    t = str(s).strip().replace(" ", "")
    if not t or not _COMPLEX_RE.match(t):
        raise ConfigError(f"not a complex number: {s!r}")
    t = t.replace("i", "j")
    t = re.sub(r"(^|[+\-])j", r"\g<1>1j", t)
    try:
        return complex(t)
    except ValueError:
        raise ConfigError(f"not a complex number: {s!r}") from None


def parse_complex_list(s) -> list:
    """Comma-separated string, or a JSON list whose items are each one complex value."""
    if isinstance(s, list):
        return [parse_complex(v) for v in s]
    s = str(s).strip()
    if not s:
        return []
    return [parse_complex(p) for p in s.split(",") if p.strip()]


def parse_int_list(s) -> list:
    if isinstance(s, list):
        vals = s
    else:
        s = str(s).strip()
        vals = [p for p in s.split(",") if p.strip()] if s else []
    try:
        return [int(v) for v in vals]
    except ValueError:
        raise ConfigError(f"not a list of integers: {s!r}") from None


_CONVERTERS = {
    "tau": parse_complex_list,
    "k": lambda v: None if v is None else parse_complex(v),
    "omega": lambda v: None if v is None else parse_complex_list(v),
    "z": lambda v: None if v is None else parse_complex_list(v),
    "M": parse_int_list,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dynrmat", description="Dynamical r-matrix evaluation and verification.")
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--algebra", help="sl<n> or a path to an AlgebraSpec JSON file")
        s.add_argument("--twist", choices=["coxeter", "identity", "outer", "file"])
        s.add_argument("--config", help="JSON file with config keys")
        s.add_argument("--seed", type=int)
        s.add_argument("--samples", type=int)
        s.add_argument("--tol", type=float, help="residual bound (default: the check's own bound)")
        s.add_argument("--tol-pole", dest="tol_pole", type=float)
        s.add_argument("--tol-algebra", dest="tol_algebra", type=float)
        s.add_argument("--fd-step", dest="fd_step", type=float)
        s.add_argument("--tau", help="modular parameter(s), comma separated, e.g. i,0.4+0.9i")
        s.add_argument("--k", help="loop parameter k (alternative to --tau for check-domain)")
        s.add_argument("--omega", help="coordinates of omega in the G_0 basis, comma separated")
        s.add_argument("--output", help="write the JSON report (or converge-study table) here")
        if name in KINDS:
            s.add_argument("--kind", choices=KINDS[name])
        if name in ("eval-rmatrix", "verify-cdybe"):
            s.add_argument("--q", type=int)
        if name in ("verify-cdybe", "verify-theorem1"):
            s.add_argument("--deriv", choices=["analytic", "fd", "both"])
        if name in ("verify-cdybe", "verify-theorem1"):
            s.add_argument("--cutoff", type=int)
        if name == "verify-cdybe":
            s.add_argument("--shift", action="store_true", default=None, help="also check the shifted rho_q (M = J)")
        if name in ("eval-rmatrix", "converge-study"):
            s.add_argument("--z", help="spectral parameter(s), comma separated")
        if name == "eval-rmatrix":
            s.add_argument("--normalization", choices=["ours", "felder-original"])
        if name == "converge-study":
            s.add_argument("--M", help="truncation orders, comma separated")
            s.add_argument("--format", choices=["json", "csv"])
    return p


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    cfg = RunConfig(subcommand=ns.subcommand)
    known = {f.name for f in fields(RunConfig)}
    layers = []
    if getattr(ns, "config", None):
        try:
            with open(ns.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config file {ns.config}: {e}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        doc.pop("subcommand", None)
        layers.append(doc)
    layers.append({k: v for k, v in vars(ns).items() if k in known and k != "subcommand" and v is not None})
    for layer in layers:
        for key, val in layer.items():
            conv = _CONVERTERS.get(key)
            setattr(cfg, key, conv(val) if conv else val)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.samples is not None and cfg.samples <= 0:
        raise ConfigError(f"--samples must be positive, got {cfg.samples}")
    if not cfg.tau:
        raise ConfigError("at least one tau is required")
    for t in cfg.tau:
        if not t.imag > 0:
            raise ConfigError(f"tau = {t} needs Im tau > 0")
    if cfg.kind is not None and cfg.subcommand in KINDS and cfg.kind not in KINDS[cfg.subcommand]:
        raise ConfigError(f"--kind {cfg.kind} is not valid for {cfg.subcommand}")
    if cfg.kind is None:
        cfg.kind = DEFAULT_KIND.get(cfg.subcommand)
    if cfg.deriv not in ("analytic", "fd", "both"):
        raise ConfigError(f"unknown derivative mode {cfg.deriv!r}")
    if cfg.cutoff < 1:
        raise ConfigError("--cutoff must be positive")
    for name in ("tol_pole", "tol_algebra", "fd_step"):
        if not getattr(cfg, name) > 0:
            raise ConfigError(f"{name} must be positive")
    if cfg.subcommand == "converge-study":
        if not cfg.M or any(m < 0 for m in cfg.M):
            raise ConfigError("converge-study needs a non-empty list of non-negative M")
        if cfg.z is not None and not cfg.z:
            raise ConfigError("converge-study needs a non-empty z grid")


# --------------------------------------------------------------------------
# Fixtures


@dataclass
class Fixture:
    name: str
    L: object
    dec: object
    cd: CartanData | None


def load_fixture(cfg: RunConfig) -> Fixture:
    settings = cfg.settings()
    m = re.fullmatch(r"sl(\d+)", cfg.algebra)
    try:
        if m:
            n = int(m.group(1))
            if n < 2:
                raise ConfigError("sl<n> needs n >= 2")
            L, cd = make_sl(n)
            if cfg.twist == "coxeter":
                mu = coxeter_automorphism(cd)
            elif cfg.twist == "identity":
                mu = identity_automorphism(L)
            elif cfg.twist == "outer":
                mu = outer_automorphism_sl(L, cd)
            else:
                raise ConfigError("--twist file needs --algebra to be an AlgebraSpec path")
        else:
            L, mu_file = load_algebra(cfg.algebra, settings)
            cd = None
            if cfg.twist in ("coxeter", "outer"):
                if mu_file is None and cfg.twist == "coxeter":
                    mu = identity_automorphism(L)
                elif mu_file is None:
                    raise ConfigError("the outer twist is only built in for sl<n>")
                else:
                    mu = mu_file
            elif cfg.twist == "file":
                if mu_file is None:
                    raise ConfigError(f"{cfg.algebra} declares no automorphism")
                mu = mu_file
            else:
                mu = identity_automorphism(L)
        dec = decompose(L, mu, settings)
    except OSError as e:
        raise ConfigError(f"cannot read algebra {cfg.algebra}: {e}") from None
    except (AlgebraError, KeyError, ValueError) as e:
        raise ConfigError(f"invalid algebra {cfg.algebra}: {e}") from None
    if cfg.twist != "coxeter":
        cd_for_coxeter = None
    else:
        cd_for_coxeter = cd
    return Fixture(cfg.algebra if m else (L.name or cfg.algebra), L, dec, cd_for_coxeter)


def g0_basis(fx: Fixture) -> np.ndarray:
    """Columns whose coordinates ``--omega`` gives: coroots H_i for Coxeter sl_n, otherwise the G_0 basis."""
    if fx.cd is not None:
        return fx.cd.cartan_basis
    return fx.dec.bases[0]


def omega_from(cfg: RunConfig, fx: Fixture, default=None) -> np.ndarray:
    B = g0_basis(fx)
    if cfg.omega is None:
        if default is not None:
            return default
        return np.zeros(fx.L.dim, dtype=complex)
    if len(cfg.omega) != B.shape[1]:
        raise ConfigError(f"--omega needs {B.shape[1]} coordinates, got {len(cfg.omega)}")
    return B @ np.array(cfg.omega, dtype=complex)


def default_omega(fx: Fixture) -> np.ndarray:
    """``0.2 H_1`` (``0.2 h`` for sl2) when Cartan data is at hand, else 0."""
    if fx.cd is not None:
        return 0.2 * fx.cd.cartan_basis[:, 0]
    return np.zeros(fx.L.dim, dtype=complex)


def _need_cd(fx: Fixture, what: str) -> CartanData:
    if fx.cd is None:
        raise ConfigError(f"{what} needs a built-in sl<n> algebra with the Coxeter twist")
    return fx.cd


def _valid_qs(dec) -> list:
    N = dec.N
    out = []
    for q in range(1, N):
        if all((q * a) % N != 0 for a in dec.index_set if a != 0):
            out.append(q)
    return out


# --------------------------------------------------------------------------
# Subcommands


def cmd_check_domain(cfg: RunConfig, fx: Fixture, rng) -> VerificationReport:
    rep = VerificationReport("check-domain", fx.name, cfg.echo())
    settings = cfg.settings()
    if cfg.omega is not None:
        om = omega_from(cfg, fx)
        queries = [DomainQuery(om, k=cfg.k)] if cfg.k is not None else [DomainQuery(om, tau=t) for t in cfg.tau]
        for q in queries:
            try:
                d = in_domain(fx.L, fx.dec, q, settings)
            except DynRMatError as e:
                raise ConfigError(str(e)) from None
            rep.add(SampleRecord("omega in domain", {"omega": om, "k": q.k, "tau": q.tau}, d.min_margin,
                                 passed=d.admitted, extra={"report": d.to_dict()}))
        return rep
    for r in suites.domain_suite(fx.L, fx.dec, rng, cfg.n_samples(), fx.cd, settings):
        rep.add(r)
    if fx.cd is not None:
        for t in cfg.tau:
            for r in suites.boundary_witness_suite(fx.cd, fx.dec, t, rng):
                rep.add(r)
    return rep


def cmd_eval_rmatrix(cfg: RunConfig, fx: Fixture, rng) -> VerificationReport:
    rep = VerificationReport("eval-rmatrix", fx.name, cfg.echo())
    settings = cfg.settings()
    om = omega_from(cfg, fx, default_omega(fx))
    tau = cfg.tau[0]
    zs = cfg.z or [complex(0.25, -0.3 * tau.imag)]
    try:
        if cfg.kind == "rho_q":
            qs = [cfg.q] if cfg.q is not None else _valid_qs(fx.dec)[:1]
            if not qs:
                raise ConfigError("no admissible q for this twist")
            t = rho_q_tensor(fx.L, fx.dec, qs[0], om, settings)
            rep.add(SampleRecord("rho_q", {"q": qs[0], "omega": om}, t.max_abs(),
                                 extra={"tensor": t.to_dict()}))
        elif cfg.kind == "r_tau":
            for z in zs:
                t = r_tau(fx.L, fx.dec, tau, om, z, settings)
                rep.add(SampleRecord("r_tau", {"tau": tau, "omega": om, "z": z}, t.max_abs(),
                                     extra={"tensor": t.to_dict()}))
        else:
            cd = _need_cd(fx, "felder")
            for z in zs:
                t = felder_S(cd, tau, om, z, cfg.normalization, settings)
                rep.add(SampleRecord("felder S", {"tau": tau, "omega": om, "z": z,
                                                  "normalization": cfg.normalization},
                                     t.max_abs(), extra={"tensor": t.to_dict()}))
    except DynRMatError as e:
        if isinstance(e, ConfigError):
            raise
        rep.add(SampleRecord(f"{cfg.kind} evaluation", {"omega": om}, None, passed=False,
                             extra={"error": str(e), "witness": getattr(e, "witness", None)}))
    return rep


def cmd_verify_cdybe(cfg: RunConfig, fx: Fixture, rng) -> VerificationReport:
    rep = VerificationReport("verify-cdybe", fx.name, cfg.echo())
    L, dec, n = fx.L, fx.dec, cfg.n_samples()
    tol = cfg.tol
    if cfg.kind == "spectral":
        deriv = cfg.deriv
        recs = suites.spectral_suite(L, dec, cfg.tau, rng, n, tol_analytic=tol or 1e-8,
                                     tol_fd=tol or 1e-6, deriv=deriv, name=fx.name, fd_step=cfg.fd_step)
    elif cfg.kind == "rho_q":
        if dec.N == 1:
            recs = suites.canonical_suite(L, rng, n, tol or 1e-8, fx.name)
        else:
            qs = [cfg.q] if cfg.q is not None else _valid_qs(dec)
            recs = []
            for q in qs:
                try:
                    rho_q_fns(dec, q)
                except DynRMatError as e:
                    raise ConfigError(str(e)) from None
                recs += suites.rho_q_suite(L, dec, q, rng, n, tol or 1e-8, name=fx.name)
                recs += suites.bridge_suite(L, dec, q, rng, min(n, 5), tol=1e-10, name=fx.name)
                if cfg.shift:
                    cd = _need_cd(fx, "--shift")
                    recs += suites.rho_q_suite(L, dec, q, rng, n, tol or 1e-8, M=cd.coxeter_element,
                                               name=f"{fx.name} shifted")
    elif cfg.kind == "loop":
        TA = make_affine(L, dec, cfg.cutoff, central=False)
        modes = ["analytic", "fd"] if cfg.deriv == "both" else [cfg.deriv]
        recs = []
        for _ in range(n):
            kap = suites.random_kappa(L, dec, rng)
            for mode in modes:
                worst, wit = loop_grade_window_residual(TA, kap.k, kap.omega, rng, mode, cfg.settings())
                lim = tol or (1e-9 if mode == "analytic" else 1e-6)
                recs.append(SampleRecord(f"loop CDYBE {fx.name} ({mode})",
                                         {"k": kap.k, "omega": kap.omega, "cutoff": cfg.cutoff}, worst,
                                         passed=worst < lim, extra={"worst_grades": wit}))
    else:
        fixtures = suites.standard_derivative_fixtures([(fx.name, L, dec)])
        recs = suites.derivative_agreement_suite(fixtures, rng, n if cfg.samples else 100, tol or 1e-6,
                                                 fd_step=cfg.fd_step)
    for r in recs:
        rep.add(r)
    return rep


def cmd_verify_theorem1(cfg: RunConfig, fx: Fixture, rng) -> VerificationReport:
    rep = VerificationReport("verify-theorem1", fx.name, cfg.echo())
    modes = ["analytic", "fd"] if cfg.deriv == "both" else [cfg.deriv]
    for mode in modes:
        tol = cfg.tol or (1e-9 if mode == "analytic" else 1e-6)
        for r in suites.theorem1_suite(fx.L, fx.dec, rng, cfg.cutoff, cfg.n_samples(), tol, mode, fx.name):
            rep.add(r)
    return rep


def cmd_felder_compare(cfg: RunConfig, fx: Fixture, rng) -> VerificationReport:
    cd = _need_cd(fx, "felder-compare")
    rep = VerificationReport("felder-compare", fx.name, cfg.echo())
    for t in cfg.tau:
        for r in suites.felder_suite(cd, t, rng, cfg.n_samples(), cfg.tol or 1e-8, fx.name):
            rep.add(r)
    return rep


def converge_rows(cfg: RunConfig, fx: Fixture) -> tuple:
    tau = cfg.tau[0]
    k = k_from_tau(tau, fx.dec.N)
    om = omega_from(cfg, fx, default_omega(fx))
    zs = cfg.z if cfg.z is not None else [complex(0, -0.5 * tau.imag)]
    return k, om, zs, suites.converge_table(fx.L, fx.dec, k, om, zs, sorted(cfg.M))


def cmd_converge_study(cfg: RunConfig, fx: Fixture, rng) -> tuple:
    k, om, zs, rows = converge_rows(cfg, fx)
    rep = VerificationReport("converge-study", fx.name, cfg.echo())
    tol = cfg.tol or 1e-8
    floor = 1e-14
    for z in zs:
        zr = [r for r in rows if r["z"] == z]
        if any(r["excluded"] for r in zr):
            rep.add(SampleRecord("strip check", {"z": z}, None, passed=True,
                                 extra={"excluded": True, "reason": zr[0]["reason"]}))
            continue
        errs = [r["max_error"] for r in zr]
        # strictly decreasing until the round-off floor is reached
        mono = all(b < a or a < floor for a, b in zip(errs, errs[1:]))
        rep.add(SampleRecord("evaluated loop r-matrix against r_tau", {"z": z, "k": k, "omega": om,
                                                                        "M": max(cfg.M)},
                             errs[-1], passed=errs[-1] < tol and mono,
                             extra={"errors": errs, "decay_rate": zr[-1]["decay_rate"], "decreasing": mono}))
    return rep, rows


def cmd_identity_suite(cfg: RunConfig, fx: Fixture, rng) -> VerificationReport:
    rep = VerificationReport("identity-suite", "none", cfg.echo())
    recs = suites.elliptic_identity_suite(cfg.tau, rng)
    for t in cfg.tau:
        recs += suites.series_suite(t, rng, cfg.n_samples())
    for r in recs:
        rep.add(r)
    return rep


HANDLERS = {
    "check-domain": cmd_check_domain,
    "eval-rmatrix": cmd_eval_rmatrix,
    "verify-cdybe": cmd_verify_cdybe,
    "verify-theorem1": cmd_verify_theorem1,
    "felder-compare": cmd_felder_compare,
    "identity-suite": cmd_identity_suite,
}


def rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["z_re", "z_im", "M", "max_error", "decay_rate", "excluded"])
    for r in rows:
        z = complex(r["z"])
        w.writerow([z.real, z.imag, r["M"], r.get("max_error", ""), r.get("decay_rate", ""), r["excluded"]])
    return buf.getvalue()


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as e:
        raise ConfigError(f"cannot write {path}: {e}") from None


def run(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    try:
        cfg = resolve_config(ns)
        rng = np.random.default_rng(cfg.seed)
        fx = None if cfg.subcommand == "identity-suite" else load_fixture(cfg)
        if cfg.subcommand == "converge-study":
            rep, rows = cmd_converge_study(cfg, fx, rng)
            table = rows_to_csv(rows) if cfg.format == "csv" else json.dumps(to_jsonable(rows), indent=2)
            if cfg.output:
                _write(cfg.output, table)
            print(table, file=out)
        else:
            rep = HANDLERS[cfg.subcommand](cfg, fx, rng)
            if cfg.output:
                _write(cfg.output, rep.to_json())
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    for line in rep.summary_lines():
        print(line, file=out)
    if not rep.passed:
        bad = [s for s in rep.samples if not s.passed]
        worst = max(bad, key=lambda s: s.residual_max if isinstance(s.residual_max, float) else np.inf)
        print(f"failed check: {worst.name}; witness inputs {json.dumps(to_jsonable(worst.inputs))}", file=out)
        if "error" in worst.extra:
            print(f"reason: {worst.extra['error']}", file=out)
    return 0 if rep.passed else 1


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
