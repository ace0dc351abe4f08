import hashlib

import numpy as np
import pytest

from harmonic_asymptotics import __version__
from harmonic_asymptotics.cli import main

P3 = "[field]\nkind = polynomial\ndegree = 3\ncoefficients = 1, 0\n[grid]\nr_min = 1e-3\nr_max = 0.5\ncount = 16\n"


def run(tmp_path, command, text=None, *extra, name="out"):
    out = tmp_path / name
    args = ["--out", str(out)]
    if text is not None:
        cfg = tmp_path / f"{name}.cfg"
        cfg.write_text(text)
        args += ["--config", str(cfg)]
    return main([command, *args, *extra]), out


def manifest_hashes(out):
    lines = (out / "manifest.txt").read_text().splitlines()
    return dict(line.split(" sha256=") for line in lines if " sha256=" in line)


def test_profile(tmp_path):
    code, out = run(tmp_path, "profile", P3)
    assert code == 0
    for name in ("H.csv", "D.csv", "F.csv", "limits.csv", "profile.svg", "report.txt", "manifest.txt"):
        assert (out / name).exists(), name
    F = np.loadtxt(out / "F.csv", delimiter=",", skiprows=2, usecols=1)
    assert np.allclose(F, 3, atol=1e-9)
    assert "constant_integer(3)" in (out / "report.txt").read_text()
    for name, digest in manifest_hashes(out).items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    head = (out / "manifest.txt").read_text()
    assert head.startswith(f"# harmonic-asymptotics {__version__}") and "command = profile" in head


def test_csv_precision(tmp_path):
    _, out = run(tmp_path, "profile", P3)
    row = (out / "H.csv").read_text().splitlines()[4].split(",")
    assert float(row[0]) == pytest.approx(float(np.geomspace(1e-3, 0.5, 16)[2]), rel=1e-15)


def test_deterministic_outputs(tmp_path):
    _, a = run(tmp_path, "profile", P3, name="a")
    _, b = run(tmp_path, "profile", P3, name="b")
    for name in ("H.csv", "F.csv", "limits.csv", "report.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert manifest_hashes(a) == manifest_hashes(b)


def test_threads_do_not_change_results(tmp_path):
    _, a = run(tmp_path, "profile", P3, name="a")
    _, b = run(tmp_path, "profile", P3, "--threads", "3", name="b")
    assert (a / "F.csv").read_bytes() == (b / "F.csv").read_bytes()


def test_seeded_random_field(tmp_path):
    text = "[field]\nkind = polynomial\ndegree = 4\ncoefficients = random\n[grid]\ncount = 8\n"
    _, a = run(tmp_path, "profile", text, "--seed", "11", name="a")
    _, b = run(tmp_path, "profile", text, "--seed", "11", name="b")
    _, c = run(tmp_path, "profile", text, "--seed", "12", name="c")
    ma = (a / "manifest.txt").read_text()
    assert "seed = 11" in ma and "coefficients = " in ma
    assert (a / "H.csv").read_bytes() == (b / "H.csv").read_bytes() != (c / "H.csv").read_bytes()


def test_blowup_log_drift(tmp_path):
    code, out = run(tmp_path, "blowup", "[field]\nkind = log_drift\n")
    assert code == 0
    assert "unique" in (out / "classification.txt").read_text()
    assert (out / "traces.csv").exists()


def test_blowup_rotator(tmp_path):
    code, out = run(tmp_path, "blowup", "[field]\nkind = rotator\nmode_a = 0\nmode_b = 1\n"
                                          "[blowup]\nmax_degree = 2\n")
    assert code == 0
    text = (out / "classification.txt").read_text()
    assert "rotating" in text


def test_spectrum(tmp_path):
    code, out = run(tmp_path, "spectrum", "[cone]\nshape = cap\nopening = pi/2\ncount = 3\n")
    assert code == 0
    rows = np.loadtxt(out / "spectrum.csv", delimiter=",", skiprows=1, usecols=3, ndmin=1)
    assert rows[0] == pytest.approx(1.0, abs=1e-3)


def test_solve_sector(tmp_path):
    text = ("[field]\nkind = cone_solution\nshape = sector\nopening = 3*pi/2\n"
            "[solve]\nproblem = dirichlet\ndomain = sector\ntheta0 = 3*pi/2\nn = 129\n[grid]\nr_min = 0.08\n")
    code, out = run(tmp_path, "solve", text)
    assert code == 0
    assert (out / "solution.bin").exists() and (out / "solution.csv").exists()
    assert "0.666" in (out / "report.txt").read_text()


def test_solve_without_csv(tmp_path):
    text = ("[field]\nkind = polynomial\ndegree = 1\ncoefficients = 1, 0\n"
            "[solve]\nproblem = interior\nn = 65\nexport_csv = false\n[grid]\nr_min = 0.2\ncount = 6\n")
    code, out = run(tmp_path, "solve", text)
    assert code == 0
    assert (out / "solution.bin").exists() and not (out / "solution.csv").exists()


def test_singular(tmp_path):
    code, out = run(tmp_path, "singular", "[field]\nkind = polynomial\ndegree = 2\ncoefficients = 1, 0\n")
    assert code == 0
    assert "box dimension" in (out / "singular.txt").read_text()
    assert (out / "cloud.csv").read_text().startswith("x,y,abs_u,abs_grad")
    assert (out / "dimension.csv").read_text().startswith("scale,count")


def test_figure1(tmp_path):
    code, out = run(tmp_path, "figure1")
    assert code == 0
    assert "level-set" in (out / "figure1.svg").read_text()
    target = tmp_path / "fig.svg"
    assert main(["figure1", "--out", str(tmp_path / "o2"), "--output", str(target)]) == 0
    assert target.exists()


@pytest.mark.parametrize("text", ["[field]\nkind = polynomial\nbogus = 1\n", "[field]\n",
                                  "[field]\nkind = polynomial\ndegree = 2\ncoefficients = 1\n"])
def test_config_errors_exit_2(tmp_path, text, capsys):
    code, _ = run(tmp_path, "profile", text)
    assert code == 2
    assert "line" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert main(["profile", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == 2


def test_numeric_failure_exit_3(tmp_path, capsys):
    text = ("[field]\nkind = polynomial\ndegree = 1\ncoefficients = 1, 0\n"
            "[blowup]\nbasis = full\nmax_degree = 2\nlambda_max = 1\nratio = 0.5\ncount = 4\n")
    code, _ = run(tmp_path, "blowup", text)
    assert code in (2, 3)
    text = "[field]\nkind = cone_solution\nshape = sector\nopening = pi\n[grid]\nr_min = 2\nr_max = 3\n"
    code, _ = run(tmp_path, "profile", text, name="o2")
    assert code in (2, 3)


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out
