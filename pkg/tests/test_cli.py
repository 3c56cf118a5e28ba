import csv

import pytest

from hgopt.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_VIOLATION, main
from hgopt.config import ConfigError, parse_config
from hgopt.solvers import COLUMNS

MINIMAL = """\
seeds = [1]

[manifold]
kind = "euclidean"
dim = 2

[objective]
kind = "sqdist"
anchor = [1.0, 2.0]
x0 = [0.0, 0.0]

[[solver]]
algorithm = "proximal_gradient"
eta = 1.0
T = 10
"""

H2_BENCH = """\
seeds = [0]

[manifold]
kind = "hyperbolic"
dim = 2

[objective]
kind = "frechet"
random = { n = 8, radius = 2.0, seed = 3 }
x0_radius = 2.0

[[solver]]
algorithm = "proximal_gradient"
eta = 0.5
T = 100

[[solver]]
algorithm = "rgd"
eta = 0.3
T = 100
"""


def write(tmp_path, text, name="exp.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_minimal_run(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "proximal_gradient_seed1.csv")
    assert len(rows) == 10
    assert tuple(rows[0]) == COLUMNS
    summary = read_csv(out / "summary.csv")
    assert summary[0]["status"] == "ok"
    assert summary[0]["rate_check"] == "pass"


def test_rerun_is_byte_identical(tmp_path):
    cfg = write(tmp_path, H2_BENCH)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--out", str(a)]) == EXIT_OK
    assert main(["run", "--config", cfg, "--out", str(b), "--jobs", "2"]) == EXIT_OK
    for name in ("proximal_gradient_seed0.csv", "rgd_seed0.csv", "summary.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_hyperbolic_frechet_certificate_flag(tmp_path):
    cfg = write(tmp_path, H2_BENCH)
    main(["run", "--config", cfg, "--out", str(tmp_path / "o")])
    row = read_csv(tmp_path / "o" / "summary.csv")[0]
    assert row["rate_check"] == "pass"
    assert float(row["rate_ratio"]) <= 1.0


def test_seed_override_and_env_output(tmp_path, monkeypatch):
    cfg = write(tmp_path, MINIMAL)
    monkeypatch.setenv("HGOPT_OUT", str(tmp_path / "env"))
    assert main(["run", "--config", cfg, "--seed", "7"]) == EXIT_OK
    assert (tmp_path / "env" / "proximal_gradient_seed7.csv").exists()


def test_missing_output_dir(tmp_path, monkeypatch):
    monkeypatch.delenv("HGOPT_OUT", raising=False)
    assert main(["run", "--config", write(tmp_path, MINIMAL)]) == EXIT_CONFIG


def test_bench_table(tmp_path, capsys):
    cfg = write(tmp_path, H2_BENCH)
    assert main(["bench", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    text = capsys.readouterr().out
    assert "zeta=" in text and "kappa_lb=-1" in text
    assert "not required" in text


def test_bench_warped_reports_sampled_bound(tmp_path, capsys):
    text = H2_BENCH.replace('kind = "hyperbolic"\ndim = 2', 'kind = "warped"\nphi = "exp_r2"')
    text = text.replace("radius = 2.0", "radius = 1.0").replace("x0_radius = 2.0", "x0_radius = 1.0")
    text = text.replace("T = 100", "T = 30")
    cfg = write(tmp_path, text)
    assert main(["bench", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    out = capsys.readouterr().out
    rgd = [ln for ln in out.splitlines() if ln.startswith("rgd")][0]
    prox = [ln for ln in out.splitlines() if ln.startswith("proximal_gradient")][0]
    assert "sampled kappa_lb=" in rgd
    assert prox.endswith("not required")


def test_bench_needs_two_solvers(tmp_path, capsys):
    assert main(["bench", "--config", write(tmp_path, MINIMAL), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "at least two" in capsys.readouterr().err


def test_unknown_key_reports_line_and_field(tmp_path, capsys):
    bad = MINIMAL.replace("T = 10", "T = 10\ntemperature = 3")
    assert main(["run", "--config", write(tmp_path, bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "line 16" in err and "solver.temperature" in err


@pytest.mark.parametrize("old,new,needle", [
    ("eta = 1.0", "eta = 0.0", "solver.eta"),
    ("T = 10", "T = 0", "solver.T"),
    ('kind = "euclidean"', 'kind = "sphere"', "manifold.kind"),
    ("dim = 2", "dim = 2.5", "manifold.dim"),
    ('algorithm = "proximal_gradient"', 'algorithm = "newton"', "solver.algorithm"),
    ("seeds = [1]", "seeds = [-1]", "seeds"),
])
def test_invalid_values(old, new, needle):
    with pytest.raises(ConfigError, match=needle.replace(".", r"\.")):
        parse_config(MINIMAL.replace(old, new))


def test_syntax_error_has_line():
    with pytest.raises(ConfigError, match="line"):
        parse_config("seeds = [1\n[manifold]\n")


def test_stochastic_requires_stochastic_objective():
    text = MINIMAL.replace('algorithm = "proximal_gradient"', 'algorithm = "stochastic_proximal_gradient"')
    with pytest.raises(ConfigError, match="stochastic_frechet"):
        parse_config(text)


def test_parse_is_lossless():
    cfg = parse_config(H2_BENCH)
    assert cfg.seeds == [0]
    assert cfg.manifold == {"kind": "hyperbolic", "dim": 2}
    assert cfg.objective["random"] == {"n": 8, "radius": 2.0, "seed": 3}
    assert [s.label for s in cfg.solvers] == ["proximal_gradient", "rgd"]
    assert cfg.solvers[0].config.eta == 0.5
    assert cfg.solvers[1].config.max_outer_iters == 100
    assert cfg.reference is True


def test_numerical_failure_exit_code(tmp_path):
    # a geodesic leaving the warped interval is a numerical failure, not a crash
    text = MINIMAL.replace('kind = "euclidean"\ndim = 2', 'kind = "warped"\nphi = "t2"')
    text = text.replace("anchor = [1.0, 2.0]", "anchor = [0.95, 0.0]").replace("x0 = [0.0, 0.0]", "x0 = [0.05, 3.0]")
    text = text.replace('algorithm = "proximal_gradient"', 'algorithm = "rgd"').replace("eta = 1.0", "eta = 50.0")
    code = main(["run", "--config", write(tmp_path, text), "--out", str(tmp_path / "o")])
    assert code == EXIT_NUMERICAL
    assert read_csv(tmp_path / "o" / "summary.csv")[0]["status"] == "numerical_failure"


def test_verify_single_suite(tmp_path, capsys):
    assert main(["verify", "appendix", "-n", "20", "--out", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "== appendix: pass" in out and "A1" in out and "A2" in out
    assert (tmp_path / "verify.csv").exists()


def test_verify_quasilinear_prints_additivity(capsys):
    assert main(["verify", "--suite", "quasilinear", "-n", "200"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("additivity") == 4


def test_verify_unknown_suite():
    assert main(["verify", "nonsense"]) == EXIT_CONFIG


def test_exit_code_precedence():
    from hgopt.cli import CellResult, _exit_of

    def cells(*statuses):
        return [CellResult("a", "rgd", 0, st) for st in statuses]

    assert _exit_of(cells("ok", "ok")) == EXIT_OK
    assert _exit_of(cells("ok", "violation")) == EXIT_VIOLATION
    assert _exit_of(cells("violation", "numerical_failure")) == EXIT_NUMERICAL
    assert _exit_of(cells("numerical_failure", "config_error")) == EXIT_CONFIG
