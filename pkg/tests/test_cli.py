import json
import subprocess
import sys

import numpy as np
import pytest

from covsel.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main, read_matrix_csv
from covsel.counts import exact_table


@pytest.fixture
def data_csv(tmp_path):
    rng = np.random.default_rng(0)
    y = rng.normal(size=(30, 4))
    y[:, 1] += y[:, 0]
    path = tmp_path / "y.csv"
    with open(path, "w") as fh:
        fh.write("a,b,c,d\n")
        np.savetxt(fh, y, delimiter=",")
    return path


class TestIO:
    def test_header_optional(self, tmp_path, data_csv):
        a = read_matrix_csv(data_csv)
        assert a.shape == (30, 4)
        bare = tmp_path / "bare.csv"
        np.savetxt(bare, a, delimiter=",")
        np.testing.assert_allclose(read_matrix_csv(bare), a)


class TestFit:
    def test_fit_writes_chain(self, tmp_path, data_csv):
        out = tmp_path / "chain.json"
        argv = ["fit", "--data", str(data_csv), "--prior", "size", "--phi-form", "equi",
                "--burnin", "20", "--iters", "200", "--thin", "2", "--seed", "7", "--out", str(out)]
        assert main(argv) == EXIT_OK
        obj = json.loads(out.read_text())
        assert obj["config"]["prior"] == "size" and obj["config"]["phi_form"] == "equi"
        assert obj["n_kept"] == 100 and len(obj["size_trace"]) == 100
        assert np.array(obj["edge_inclusion"]).shape == (4, 4)
        assert np.array(obj["omega_mixture"]).shape == (4, 4)
        assert set(obj["acceptance"]) == {"edge", "tau", "rho"}
        assert obj["ess_size"] > 0
        # same seed, same bytes
        out2 = tmp_path / "chain2.json"
        main(argv[:-1] + [str(out2)])
        assert out.read_text() == out2.read_text()

    def test_missing_counts_is_config_error(self, tmp_path):
        y = np.random.default_rng(1).normal(size=(20, 12))
        path = tmp_path / "wide.csv"
        np.savetxt(path, y, delimiter=",")
        assert main(["fit", "--data", str(path), "--prior", "size", "--iters", "5"]) == EXIT_CONFIG

    def test_bad_arguments(self, data_csv):
        assert main(["fit", "--data", str(data_csv), "--phi-form", "diag"]) == EXIT_CONFIG
        assert main(["fit", "--data", "/nonexistent.csv"]) == EXIT_CONFIG
        assert main(["fit", "--data", str(data_csv), "--thin", "0"]) == EXIT_CONFIG

    def test_numeric_failure(self, tmp_path):
        # a constant column makes S_y singular and tauS gives a singular Phi
        y = np.ones((10, 3))
        y[:, 0] = np.arange(10)
        path = tmp_path / "flat.csv"
        np.savetxt(path, y, delimiter=",")
        assert main(["fit", "--data", str(path), "--phi-form", "tauS", "--iters", "5"]) == EXIT_NUMERIC


class TestOtherCommands:
    def test_count_and_verify(self, tmp_path, capsys):
        table = tmp_path / "p5.json"
        assert main(["count", "--p", "5", "--burnin", "50", "--samples", "300", "--seed", "1", "--out", str(table)]) == EXIT_OK
        obj = json.loads(table.read_text())
        assert [e["provenance"] for e in obj["entries"]][6:8] == ["estimated", "estimated"]
        report = tmp_path / "u.json"
        assert main(["verify-counts", "--table", str(table), "--samples", "200", "--thin", "5", "--burnin", "20",
                     "--seed", "2", "--out", str(report)]) == EXIT_OK
        rep = json.loads(report.read_text())
        assert rep["J"] == 40 and len(rep["sizes"]) == 11

    def test_verify_exact_by_p(self, capsys):
        assert main(["verify-counts", "--p", "4", "--samples", "100", "--burnin", "10", "--thin", "2", "--seed", "0"]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["p"] == 4

    def test_ess(self, tmp_path, capsys):
        x = np.random.default_rng(0).standard_normal((2000, 2))
        path = tmp_path / "x.csv"
        np.savetxt(path, x, delimiter=",")
        assert main(["ess", "--input", str(path), "--column", "1"]) == EXIT_OK
        res = json.loads(capsys.readouterr().out)
        assert res["n"] == 2000 and 1500 < res["ess"] <= 2000

    def test_threshold(self, tmp_path, capsys):
        j = np.eye(4)
        for a, b in [(0, 1), (1, 2), (2, 3), (0, 3)]:
            j[a, b] = j[b, a] = 0.8
        path = tmp_path / "j.csv"
        np.savetxt(path, j, delimiter=",")
        assert main(["threshold", "--matrix", str(path), "--t", "0.7"]) == EXIT_OK
        res = json.loads(capsys.readouterr().out)
        assert res["decomposable"] is False
        assert res["graph"]["edges"] == [[1, 2], [1, 4], [2, 3], [3, 4]]

    def test_threshold_from_chain(self, tmp_path, data_csv, capsys):
        chain = tmp_path / "c.json"
        main(["fit", "--data", str(data_csv), "--iters", "50", "--burnin", "0", "--seed", "1", "--out", str(chain)])
        assert main(["threshold", "--chain", str(chain)]) == EXIT_OK
        assert "graph" in json.loads(capsys.readouterr().out)

    def test_simulate(self, tmp_path):
        csv_path, json_path = tmp_path / "r.csv", tmp_path / "r.json"
        argv = ["simulate", "--structures", "identity", "--p", "5", "--n", "30", "--reps", "2",
                "--burnin", "10", "--iters", "50", "--out-csv", str(csv_path), "--out-json", str(json_path)]
        assert main(argv) == EXIT_OK
        assert len(csv_path.read_text().strip().splitlines()) == 3
        assert json.loads(json_path.read_text())[0]["replications"] == 2

    def test_console_script(self):
        res = subprocess.run([sys.executable, "-m", "covsel.cli", "--help"], capture_output=True, text=True)
        assert res.returncode == 0 and "verify-counts" in res.stdout
