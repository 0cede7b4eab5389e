import io
import json

import pytest

from dynrmat.cli import parse_complex, parse_complex_list, parse_int_list, run
from dynrmat.errors import ConfigError
from dynrmat.liealg import algebra_to_spec, make_sl
from dynrmat.report import validate_report


def call(*argv):
    buf = io.StringIO()
    code = run(list(argv), buf)
    return code, buf.getvalue()


def strip_time(doc):
    doc = dict(doc)
    doc.pop("timestamp")
    return doc


@pytest.mark.parametrize("text,want", [("0.3+0.8i", 0.3 + 0.8j), ("i", 1j), ("-2j", -2j), ("1.5", 1.5),
                                       ("-i", -1j), ([0.4, 0.9], 0.4 + 0.9j)])
def test_parse_complex(text, want):
    assert parse_complex(text) == want


def test_parse_errors():
    with pytest.raises(ConfigError):
        parse_complex("abc")
    with pytest.raises(ConfigError):
        parse_int_list("1,x")
    assert parse_complex_list("i, 0.4+0.9i,") == [1j, 0.4 + 0.9j]
    assert parse_complex_list([[0, 1], "2"]) == [1j, 2]


def test_identity_suite_example(tmp_path):
    out = tmp_path / "r.json"
    code, text = call("identity-suite", "--tau", "i", "--output", str(out))
    assert code == 0
    assert "identity-suite: PASS" in text
    doc = json.loads(out.read_text())
    validate_report(doc)
    assert doc["pass"] is True


def test_felder_compare_example():
    code, text = call("felder-compare", "--algebra", "sl3", "--tau", "i", "--samples", "10")
    assert code == 0 and "PASS" in text.splitlines()[-1]


def test_zero_samples_is_config_error(capsys):
    code, _ = call("verify-cdybe", "--kind", "spectral", "--algebra", "sl2", "--samples", "0")
    assert code == 2
    assert "config error" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["check-domain", "--tau", "-i"],
    ["check-domain", "--tau", "nonsense"],
    ["verify-theorem1", "--cutoff", "0"],
    ["eval-rmatrix", "--algebra", "e8"],
    ["no-such-command"],
    ["converge-study", "--z", ","],
    ["converge-study", "--M", ""],
])
def test_config_errors(argv):
    assert call(*argv)[0] == 2


def test_check_domain_rejection_names_witness(tmp_path):
    # 2x = pi is a forbidden point for tau = i on G_1 of sl2 (omega coordinates in the coroot basis)
    code, text = call("check-domain", "--tau", "i", "--omega", "1.5707963267948966")
    assert code == 1
    assert "failed check" in text and "witness" in text


def test_check_domain_default_suite():
    code, text = call("check-domain", "--algebra", "sl2", "--samples", "40")
    assert code == 0


def test_eval_rmatrix_writes_tensor(tmp_path):
    out = tmp_path / "t.json"
    code, _ = call("eval-rmatrix", "--kind", "r_tau", "--tau", "i", "--omega", "0.2", "--z", "0.3-0.2i",
                   "--output", str(out))
    assert code == 0
    doc = json.loads(out.read_text())
    t = doc["samples"][0]["extra"]["tensor"]
    assert t["basis"] == ["h", "e", "f"] and len(t["coeffs"]) == 3


@pytest.mark.parametrize("kind", ["rho_q", "felder"])
def test_eval_other_kinds(kind):
    assert call("eval-rmatrix", "--kind", kind, "--tau", "i", "--z", "0.3-0.2i")[0] == 0


@pytest.mark.parametrize("kind,extra", [("rho_q", ["--shift"]), ("loop", []), ("spectral", ["--deriv", "both"]),
                                        ("derivatives", [])])
def test_verify_cdybe_kinds(kind, extra):
    code, text = call("verify-cdybe", "--kind", kind, "--algebra", "sl2", "--samples", "3", *extra)
    assert code == 0, text


def test_verify_theorem1():
    assert call("verify-theorem1", "--algebra", "sl2", "--cutoff", "4", "--samples", "1")[0] == 0


def test_converge_study_csv(tmp_path):
    out = tmp_path / "c.csv"
    code, text = call("converge-study", "--tau", "i", "--z=-0.5i", "--M", "5,10,20,40", "--format", "csv",
                      "--output", str(out))
    assert code == 0
    rows = out.read_text().strip().splitlines()
    assert len(rows) == 5 and rows[0].startswith("z")


def test_converge_study_near_boundary_decays_slower(tmp_path):
    out = tmp_path / "c.json"
    call("converge-study", "--tau", "i", "--z=-0.5i,-0.1i,0.2i", "--M", "5,10", "--output", str(out))
    rows = json.loads(out.read_text())
    inner = [r for r in rows if not r["excluded"]]
    rate = {r["z"][1]: r["decay_rate"] for r in inner}
    assert rate[-0.1] < rate[-0.5]
    assert any(r["excluded"] for r in rows)


def test_algebra_spec_file(tmp_path):
    L, cd = make_sl(2)
    from dynrmat.liealg import coxeter_automorphism
    p = tmp_path / "alg.json"
    p.write_text(json.dumps(algebra_to_spec(L, coxeter_automorphism(cd))))
    code, text = call("verify-cdybe", "--kind", "spectral", "--algebra", str(p), "--twist", "file", "--samples", "2")
    assert code == 0, text


def test_determinism_and_config_rerun(tmp_path, monkeypatch):
    a, b, c = (tmp_path / n for n in ("a.json", "b.json", "c.json"))
    argv = ["verify-cdybe", "--kind", "spectral", "--algebra", "sl3", "--samples", "3", "--seed", "7"]
    assert call(*argv, "--output", str(a))[0] == 0
    monkeypatch.setenv("DYNRMAT_THREADS", "4")
    assert call(*argv, "--output", str(b))[0] == 0
    da, db = json.loads(a.read_text()), json.loads(b.read_text())
    assert strip_time(da) == strip_time(db)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(da["config"]))
    assert call("verify-cdybe", "--config", str(cfg), "--output", str(c))[0] == 0
    assert strip_time(json.loads(c.read_text())) == strip_time(da)


def test_flag_overrides_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"samples": 2, "seed": 3, "tau": ["0.4+0.9i"]}))
    out = tmp_path / "o.json"
    assert call("felder-compare", "--config", str(cfg), "--samples", "1", "--output", str(out))[0] == 0
    conf = json.loads(out.read_text())["config"]
    assert conf["samples"] == 1 and conf["seed"] == 3 and conf["tau"] == [[0.4, 0.9]]


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"sampels": 2}))
    assert call("felder-compare", "--config", str(cfg))[0] == 2


def test_failure_exit_code_and_message():
    # an absurd tolerance forces a failing check
    code, text = call("felder-compare", "--tau", "i", "--samples", "2", "--tol", "1e-30")
    assert code == 1 and "failed check" in text
