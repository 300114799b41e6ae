import functools
import json

import numpy as np
import pytest

from sepgeom import __version__, cli, integration


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_metric_json(capsys):
    code, out, _ = run(capsys, "metric", "--family", "bloch", "--point", "0.5,1,2")
    assert code == 0
    doc = json.loads(out)
    assert doc["version"] == __version__
    assert doc["config"]["command"] == ["metric", "--family", "bloch", "--point", "0.5,1,2"]
    g = np.array(doc["result"]["tensor"])
    np.testing.assert_allclose(np.diag(g), [1 / 3, 1 / 16, np.sin(1.0) ** 2 / 16], atol=1e-9)
    assert doc["result"]["null_flag"] is False


def test_metric_null_check(capsys):
    code, out, _ = run(capsys, "metric", "--family", "escort_qubit", "--null-check")
    assert code == 0 and json.loads(out)["result"]["null"] is True
    code, out, _ = run(capsys, "metric", "--family", "ar_bell", "--q", "2", "--null-check")
    assert code == 0 and json.loads(out)["result"]["null"] is False


def test_domain_error_exit_code(capsys):
    code, out, err = run(capsys, "metric", "--family", "bloch", "--point", "2,1,2")
    assert code == 2 and out == ""
    assert json.loads(err)["error"] == "DomainError"


def test_divergence_exit_code(capsys):
    code, _, err = run(capsys, "--q-range", "0.5:inf", "priors", "gain", "--extended")
    assert code == 4 and json.loads(err)["error"] == "DivergenceError"


def test_convergence_exit_code(capsys, monkeypatch):
    # a small evaluation budget makes the failure quick
    monkeypatch.setattr(integration, "integrate", functools.partial(integration.integrate, n_max=20000))
    code, _, err = run(capsys, "--tol", "1e-15", "volume", "--family", "ar_bell", "--q", "1",
                       "--method", "monte_carlo")
    assert code == 3 and json.loads(err)["exit_code"] == 3


def test_tlb_hs_sepprob(capsys):
    code, out, _ = run(capsys, "--tol", "1e-6", "sepprob", "--family", "tlb", "--metric", "hs")
    assert code == 0
    doc = json.loads(out)
    assert doc["rows"][0]["prob"] == pytest.approx(0.5, abs=1e-6)
    assert doc["result"]["kappa"] == 0.5


def test_priors_kl_csv(capsys):
    code, out, _ = run(capsys, "--format", "csv", "priors", "kl", "p_B", "p_F")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# quantity:") and "key,value" in lines
    kl_line = [l for l in lines if l.startswith("kl,")][0]
    assert float(kl_line.split(",")[1]) > 0


def test_output_independent_of_threads(capsys, tmp_path):
    args = ["--format", "csv", "priors", "biasedness", "--r", "0.995:0.9999:10"]
    _, out1, _ = run(capsys, "--threads", "1", *args)
    _, out3, _ = run(capsys, "--threads", "3", *args)
    assert out1 == out3
    target = tmp_path / "curve.csv"
    code, out, _ = run(capsys, "--threads", "2", "--out", str(target), *args)
    assert code == 0 and out == "" and target.read_text() == out1


def test_trivariate_scan_singular_rows_do_not_fail(capsys):
    code, out, _ = run(capsys, "--tol", "1e-7", "scan", "--family", "trivariate_alpha", "--metric", "hs",
                       "--grid=-1,0.5,2", "--compare-closed-form")
    assert code == 0
    rows = json.loads(out)["rows"]
    assert rows[0]["error"].startswith("DomainError")
    assert rows[1]["prob"] == pytest.approx(9 / 32, abs=1e-5)


def test_invalid_threads(capsys):
    code, _, err = run(capsys, "--threads", "0", "priors", "normalization", "fisher")
    assert code == 2


def test_selftest_subset(capsys):
    code, out, _ = run(capsys, "selftest", "--criteria", "11")
    assert code == 0 and "PASS criterion 11" in out


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out
