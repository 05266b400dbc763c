import json

import pytest

from conftest import random_data
from mrkit.aps import fit_aps
from mrkit.cli import cli_main
from mrkit.core import NonPositiveStdErr
from mrkit.diagnostics import DiagnosticsReport, diagnose
from mrkit.io import IoError, MissingColumn, ParseError, emit_plot_data, read_summary_tsv, write_fit_json
from mrkit.profile import fit_ps

HEADER = "snp_id\tbeta_exposure\tse_exposure\tbeta_outcome\tse_outcome"


def write_tsv(path, data, newline="\n", extra=False):
    lines = ["# exported summary statistics", HEADER + ("\teffect_allele" if extra else "")]
    for row in zip(data.snp_ids, data.gamma_hat, data.sigma_x, data.gamma_cap_hat, data.sigma_y):
        fields = [row[0]] + ["%.17g" % v for v in row[1:]] + (["A"] if extra else [])
        lines.append("\t".join(fields))
    path.write_bytes((newline.join(lines) + newline).encode())
    return path


def test_read_two_rows(tmp_path):
    p = tmp_path / "d.tsv"
    p.write_text(HEADER + "\nrs1\t0.1\t0.01\t0.05\t0.02\nrs2\t-0.2\t0.01\t-0.1\t0.02\n")
    d = read_summary_tsv(p)
    assert d.p == 2 and d.snp_ids == ("rs1", "rs2")
    assert d.gamma_hat[1] == -0.2


def test_line_endings_and_extra_columns(tmp_path, rng):
    d = random_data(rng, 10)
    a = read_summary_tsv(write_tsv(tmp_path / "a.tsv", d))
    b = read_summary_tsv(write_tsv(tmp_path / "b.tsv", d, newline="\r\n", extra=True))
    assert a == b == d


def test_missing_column(tmp_path):
    p = tmp_path / "d.tsv"
    p.write_text("snp_id\tbeta_exposure\tse_exposure\tbeta_outcome\nrs1\t0.1\t0.01\t0.05\n")
    with pytest.raises(MissingColumn) as err:
        read_summary_tsv(p)
    assert err.value.name == "se_outcome"


def test_negative_se(tmp_path):
    p = tmp_path / "d.tsv"
    p.write_text(HEADER + "\nrs1\t0.1\t-0.1\t0.05\t0.02\n")
    with pytest.raises(NonPositiveStdErr):
        read_summary_tsv(p)


def test_parse_error_location(tmp_path):
    p = tmp_path / "d.tsv"
    p.write_text(HEADER + "\nrs1\t0.1\t0.01\tabc\t0.02\n")
    with pytest.raises(ParseError) as err:
        read_summary_tsv(p)
    assert (err.value.line, err.value.column) == (2, "beta_outcome")


def test_missing_file(tmp_path):
    with pytest.raises(IoError):
        read_summary_tsv(tmp_path / "nope.tsv")


def test_json_roundtrip_and_schema(tmp_path, rng):
    d = random_data(rng, 30, tau=0.03)
    aps = fit_aps(d)
    write_fit_json(aps, None, tmp_path / "a.json")
    obj = json.loads((tmp_path / "a.json").read_text())
    assert list(obj) == ["method", "beta_hat", "beta_se", "ci", "tau2_hat", "tau2_se", "n_snps", "kappa_hat", "solver", "warnings"]
    assert obj["beta_hat"] == aps.beta_hat and obj["tau2_hat"] == aps.tau2_hat
    assert obj["ci"][0] == pytest.approx(aps.beta_hat - 1.959964 * aps.beta_se, abs=1e-6 * aps.beta_se)

    ps = fit_ps(d)
    write_fit_json(ps, None, tmp_path / "p.json")
    obj = json.loads((tmp_path / "p.json").read_text())
    assert "tau2_hat" not in obj and "tau2_se" not in obj
    assert obj["beta_hat"] == ps.beta_hat


def test_plot_data(tmp_path, rng):
    d = random_data(rng, 3)
    rep = diagnose(fit_ps(d), d)
    qq, loo = emit_plot_data(rep, tmp_path / "x")
    assert len(qq.read_text().splitlines()) == 4
    rows = [line.split(",") for line in loo.read_text().splitlines()[1:]]
    f = [float(r[1]) for r in rows]
    assert f == sorted(f)
    with pytest.raises(IoError):
        emit_plot_data(DiagnosticsReport(0.0, [], [], [], []), tmp_path / "empty")
    assert not (tmp_path / "empty.qq.csv").exists()


def test_cli_fit(tmp_path, rng):
    tsv = write_tsv(tmp_path / "d.tsv", random_data(rng, 30, tau=0.03))
    out = tmp_path / "r.json"
    code = cli_main(["fit", "--method", "raps", "--loss", "tukey", "--k", "4.685", "--input", str(tsv), "--out", str(out), "--diagnostics", str(tmp_path / "diag")])
    assert code == 0
    obj = json.loads(out.read_text())
    assert obj["method"] == "RAPS" and obj["kappa_hat"] > 0
    assert (tmp_path / "diag.loo.csv").exists()


def test_cli_usage_errors(tmp_path, capsys):
    assert cli_main(["fit", "--method", "mode", "--input", "x", "--out", "y"]) == 2
    assert "usage" in capsys.readouterr().err
    assert cli_main([]) == 2


def test_cli_runtime_error(tmp_path):
    assert cli_main(["fit", "--method", "ps", "--input", str(tmp_path / "missing.tsv"), "--out", str(tmp_path / "o.json")]) == 1


def test_cli_constants(capsys):
    assert cli_main(["constants", "--loss", "l2"]) == 0
    assert capsys.readouterr().out.strip() == "1 1 1 1"
    assert cli_main(["constants", "--loss", "huber", "--k", "1.345"]) == 0
    delta = float(capsys.readouterr().out.split()[0])
    assert delta == pytest.approx(0.8213747654313059, abs=1e-12)


def test_cli_simulate_env_seed(tmp_path, monkeypatch):
    args = ["simulate", "--setup", "2", "--p", "20", "--kappa", "9.1", "--reps", "6", "--methods", "ps,ivw"]
    monkeypatch.setenv("MRKIT_SEED", "9")
    assert cli_main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert cli_main(args + ["--seed", "9", "--out", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    header = (tmp_path / "a.csv").read_text().splitlines()[0]
    assert header == "setup,p,kappa,method,bias_pct,rmse_pct,ci_len_pct,coverage_pct,n_ok,n_failed"
