import re

import pytest

from projmetric.cli import EXIT_ASSERT, EXIT_INDETERMINATE, EXIT_INPUT, EXIT_OK, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def kv(out):
    return dict(line.split(" = ", 1) for line in out.splitlines() if " = " in line and not line.startswith("#"))


@pytest.fixture
def spec(tmp_path):
    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    return write


def test_analyze_flat(capsys, spec):
    code, out, _ = run(capsys, "analyze", spec("flat.txt", "E = 1\nF = 0\nG = 1\n"))
    d = kv(out)
    assert code == EXIT_OK
    assert d["flat"] == "true"
    assert all(d[f"K{i}"] == "0" for i in range(4))


def test_analyze_2a_text(capsys, spec):
    code, out, _ = run(capsys, "analyze", spec("m.txt", "E = exp(3*x)\nG = exp(x)\n"), "--format", "text")
    assert code == EXIT_OK
    assert "flat: false" in out
    for line in out.splitlines():
        if line.startswith("probe[") and ".K:" in line:
            assert line.split(": ")[1].split()[1] == "0.5"


def test_degenerate_metric_is_input_error(capsys, spec):
    code, _, err = run(capsys, "analyze", spec("bad.txt", "E = 0\nG = 1\n"))
    assert code == EXIT_INPUT
    assert "det g" in err


def test_parse_error_location(capsys, spec):
    code, _, err = run(capsys, "analyze", spec("bad.txt", "E = 1\nG = 1/(x\n"))
    assert code == EXIT_INPUT
    assert "line 2" in err


@pytest.mark.parametrize(
    "source,field,small",
    [
        ("2a:eps1=1,eps2=1", "0, 1", True),
        ("CONN", "2*y, 1+y^2", True),
        ("KOENIGS", "y, 0", False),
    ],
)
def test_symmetry(capsys, spec, source, field, small):
    if source == "CONN":
        source = spec("c.txt", "param D = -0.5\nK0 = 0\nK1 = 1/2\nK2 = 0\nK3 = D*exp(-2*x)\n")
    elif source == "KOENIGS":
        source = spec("k.txt", "E = 4*x^2+y^2+1\nG = 4*x^2+y^2+1\n")
    code, out, _ = run(capsys, "symmetry", source, "--field", field)
    r = float(kv(out)["residual.max_abs"])
    assert code == EXIT_OK
    assert (r <= 1e-8) if small else (r > 0.1)


def test_field_file(capsys, spec, tmp_path):
    f = spec("z.txt", "Z1 = 0\nZ2 = 1\n")
    code, out, _ = run(capsys, "symmetry", "2b:a=1,eps1=1,eps2=1", "--field-file", f)
    assert code == EXIT_OK and kv(out)["symmetric"] == "true"


@pytest.mark.parametrize("args,dim", [(["--C", "1"], "0"), (["--D", "1", "--A", "1"], "0"), (["--D", "1", "--B", "-1"], "2")])
def test_mobility(capsys, args, dim):
    code, out, _ = run(capsys, "mobility", *args)
    assert code == EXIT_OK
    assert kv(out)["dimension"] == dim


def test_mobility_bad_case(capsys):
    code, _, _ = run(capsys, "mobility", "--C", "1", "--case", "1", "--alpha", "0,0,1")
    assert code == EXIT_INPUT


def test_distinguish(capsys):
    code, out, _ = run(capsys, "distinguish", "2a:eps1=1,eps2=1", "2b:a=1,eps1=1,eps2=1")
    assert code == EXIT_OK
    assert kv(out)["verdict"] == "distinct: I/(9R^3)"


def test_catalog_and_validation(capsys):
    code, out, _ = run(capsys, "catalog", "2c:a=1,c=1,eps1=1,eps2=1")
    d = kv(out)
    assert code == EXIT_OK
    assert float(d["R_at_x0"]) == pytest.approx(0.5, abs=1e-10)
    code, _, err = run(capsys, "catalog", "1a:b=1,eps1=1,eps2=1")
    assert code == EXIT_INPUT and "b ∉" in err


def test_flatness_abcd(capsys):
    code, out, _ = run(capsys, "flatness", "--abcd", "0", "2", "0", "1")
    assert code == EXIT_OK and kv(out)["flat"] == "true"


def test_geodesic_koenigs_and_dump(capsys, tmp_path):
    dump = tmp_path / "traj.txt"
    code, out, _ = run(capsys, "geodesic", "--suite", "koenigs", "--dump", str(dump))
    d = kv(out)
    assert code == EXIT_OK
    assert float(d["drift.max"]) <= 1e-6
    lines = dump.read_text().splitlines()
    assert lines[0] == "# t x y vx vy F0 F1 F2"
    assert len(lines[1].split()) == 8


def test_geodesic_drift_failure_exit(capsys, spec):
    code, out, _ = run(capsys, "geodesic", "--suite", "superintegrable", "--drift-tol", "1e-20")
    assert code == EXIT_ASSERT


def test_reports_reproducible(capsys, spec, tmp_path):
    src = spec("m.txt", "E = exp(3*x)\nG = exp(x)\n")
    outs = []
    for _ in range(2):
        _, out, _ = run(capsys, "analyze", src, "--seed", "7", "--tol", "1e-9")
        outs.append([l for l in out.splitlines() if not l.startswith("# generated")])
    assert outs[0] == outs[1]
    head = "\n".join(outs[0][:6])
    assert "# seed = 7" in head and "# tol = 1e-09" in head
    assert re.search(r"# input m.txt sha256 = [0-9a-f]{64}", head)


def test_out_file(capsys, tmp_path):
    out = tmp_path / "r.txt"
    code, stdout, _ = run(capsys, "distinguish", "1a:b=3,eps1=1,eps2=1", "1a:b=3,eps1=1,eps2=1", "--out", str(out))
    assert code == EXIT_OK and stdout == ""
    assert "verdict = identical" in out.read_text()


def test_missing_file(capsys):
    code, _, _ = run(capsys, "analyze", "does-not-exist.txt")
    assert code == EXIT_INPUT


def test_indeterminate_exit(capsys, monkeypatch):
    from projmetric import liouville
    from projmetric.errors import IndeterminateError

    def boom(*a, **k):
        raise IndeterminateError("gap")

    monkeypatch.setattr(liouville, "solution_space", boom)
    code, _, err = run(capsys, "mobility", "--C", "1")
    assert code == EXIT_INDETERMINATE and "gap" in err


def test_verify_single_criterion(capsys):
    code, out, _ = run(capsys, "verify", "--criterion", "4")
    assert code == EXIT_OK
    assert "criterion.4 = PASS" in out


def test_bad_tolerance_rejected():
    with pytest.raises(SystemExit):
        main(["analyze", "x.txt", "--tol", "-1"])
