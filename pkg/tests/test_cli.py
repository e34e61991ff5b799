import hashlib
import json
import math

import pytest

from wignerscope import fockspace as fs
from wignerscope import sampler as sp
from wignerscope.cli import parse_state, run
from wignerscope.errors import ValidationError


def sha(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


class TestParseState:
    def test_fock(self):
        assert parse_state("fock:2") == fs.StateSpec.fock(2)

    def test_coherent(self):
        assert parse_state("coherent:3,0") == fs.StateSpec.coherent(3.0, 0.0)

    def test_squeezed(self):
        assert parse_state("squeezed:0.5") == fs.StateSpec.squeezed(0.5)

    def test_cat_with_axis(self):
        assert parse_state("cat:3,axis=p") == fs.StateSpec.cat(3.0, axis="p")

    def test_file(self, tmp_path):
        rho = fs.materialize(fs.StateSpec.fock(1))
        path = tmp_path / "rho.json"
        path.write_text(json.dumps(rho.to_json_dict()))
        spec = parse_state(f"file:{path}")
        assert spec.kind == "custom"
        assert spec.params["matrix"].dim == rho.dim

    def test_bad_kind(self):
        with pytest.raises(ValidationError):
            parse_state("thermal:1")


class TestSimulate:
    def test_writes_dataset_and_manifest(self, tmp_path):
        out = tmp_path / "d.csv"
        rc = run(["simulate", "--state", "fock:1", "--n", "5000", "--eta", "0.9",
                  "--seed", "7", "--out", str(out)])
        assert rc == 0
        ds = sp.read_dataset(out)
        assert ds.n == 5000
        manifest = json.loads((tmp_path / "d.csv.manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert manifest["outputs"][str(out)] == sha(out)

    def test_manifest_replay_byte_identical(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        argv = ["simulate", "--state", "cat:3", "--n", "2000", "--eta", "0.95",
                "--seed", "123"]
        assert run(argv + ["--out", str(a)]) == 0
        assert run(argv + ["--out", str(b)]) == 0
        assert sha(a) == sha(b)

    def test_eta_validation_exit_1(self, tmp_path):
        rc = run(["simulate", "--state", "fock:0", "--n", "10", "--eta", "1.5",
                  "--seed", "1", "--out", str(tmp_path / "x.csv")])
        assert rc == 1

    def test_unknown_flag_exit_1(self, tmp_path):
        rc = run(["simulate", "--state", "fock:0", "--n", "10", "--eta", "0.9",
                  "--seed", "1", "--frobnicate", "1", "--out", str(tmp_path / "x.csv")])
        assert rc == 1

    def test_missing_file_exit_1(self, tmp_path):
        rc = run(["estimate", "--data", str(tmp_path / "absent.csv"), "--h", "0.4",
                  "--grid", "0:1:2,0:1:2", "--out", str(tmp_path / "o.csv")])
        assert rc == 1


class TestEstimateAndCut:
    @pytest.fixture()
    def dataset(self, tmp_path):
        out = tmp_path / "d.csv"
        assert run(["simulate", "--state", "fock:1", "--n", "4000", "--eta", "0.9",
                    "--seed", "7", "--out", str(out)]) == 0
        return out

    def test_estimate_grid_csv(self, dataset, tmp_path):
        out = tmp_path / "grid.csv"
        rc = run(["estimate", "--data", str(dataset), "--h", "0.35",
                  "--grid=-2:2:5,-1:1:3", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "q,p,west"
        assert len(lines) == 1 + 5 * 3

    def test_estimate_with_rule(self, dataset, tmp_path):
        out = tmp_path / "grid.csv"
        rc = run(["estimate", "--data", str(dataset), "--h", "r2", "--beta", "0.2",
                  "--r", "2", "--L", "1.0", "--grid=0:1:2,0:1:2", "--out", str(out)])
        assert rc == 0

    def test_rule_requires_class_params(self, dataset, tmp_path):
        rc = run(["estimate", "--data", str(dataset), "--h", "opt",
                  "--grid=0:1:2,0:1:2", "--out", str(tmp_path / "o.csv")])
        assert rc == 1

    def test_invalid_r_exit_1(self, dataset, tmp_path):
        rc = run(["estimate", "--data", str(dataset), "--h", "opt", "--beta", "0.2",
                  "--r", "2.5", "--L", "1.0", "--grid=0:1:2,0:1:2",
                  "--out", str(tmp_path / "o.csv")])
        assert rc == 1

    def test_cut_columns_and_truth(self, dataset, tmp_path):
        out = tmp_path / "cut.csv"
        rc = run(["cut", "--data", str(dataset), "--p", "0", "--qmin=-4",
                  "--qmax", "4", "--steps", "17", "--h", "0.35", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "q,west,wtrue"
        rho = fs.materialize(fs.StateSpec.fock(1))
        q0, west0, wtrue0 = map(float, lines[1].split(","))
        assert q0 == -4.0
        assert wtrue0 == pytest.approx(fs.wigner_eval(rho, (-4.0, 0.0)), rel=1e-12)

    def test_numeric_guard_exit_2(self, dataset, tmp_path):
        rc = run(["estimate", "--data", str(dataset), "--h", "0.002",
                  "--grid=0:1:2,0:1:2", "--out", str(tmp_path / "o.csv")])
        assert rc == 2


class TestRisk:
    def test_risk_report(self, tmp_path):
        out = tmp_path / "risk.json"
        rc = run(["risk", "--state", "fock:0", "--eta", "0.9", "--n", "1000",
                  "--reps", "3", "--points", "0,0;1,0", "--rule", "r2",
                  "--beta", "0.2", "--r", "2", "--L", "1", "--seed", "5",
                  "--out", str(out)])
        assert rc == 0
        report = json.loads(out.read_text())
        assert len(report["per_point_mse"]) == 2
        assert len(report["per_rep_losses"]) == 3
        assert report["meta"]["seed"] == 5

    def test_risk_threads_identical_output(self, tmp_path):
        outs = []
        for name, threads in (("r1.json", "1"), ("r2.json", "4")):
            out = tmp_path / name
            rc = run(["risk", "--state", "fock:1", "--eta", "0.9", "--n", "500",
                      "--reps", "4", "--points", "0,0", "--rule", "fixed",
                      "--hfixed", "0.4", "--seed", "5", "--threads", threads,
                      "--out", str(out)])
            assert rc == 0
            outs.append(json.loads(out.read_text())["per_rep_losses"])
        assert outs[0] == outs[1]

    def test_threads_env_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("WIGNERSCOPE_THREADS", "3")
        out = tmp_path / "env.json"
        rc = run(["risk", "--state", "fock:1", "--eta", "0.9", "--n", "500",
                  "--reps", "4", "--points", "0,0", "--rule", "fixed",
                  "--hfixed", "0.4", "--seed", "5", "--out", str(out)])
        assert rc == 0
        ref = tmp_path / "ref.json"
        monkeypatch.delenv("WIGNERSCOPE_THREADS")
        assert run(["risk", "--state", "fock:1", "--eta", "0.9", "--n", "500",
                    "--reps", "4", "--points", "0,0", "--rule", "fixed",
                    "--hfixed", "0.4", "--seed", "5", "--out", str(ref)]) == 0
        assert (json.loads(out.read_text())["per_rep_losses"]
                == json.loads(ref.read_text())["per_rep_losses"])


class TestKernelTableCli:
    def test_csv_output(self, tmp_path):
        out = tmp_path / "kt.csv"
        rc = run(["kernel-table", "--h", "0.5", "--eta", "0.9", "--variant",
                  "sharp", "--umax", "5", "--step", "0.0625", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "u,value"
        u0, v0 = map(float, lines[1].split(","))
        assert u0 == 0.0
        gamma = 0.1 / 3.6
        assert v0 == pytest.approx(
            math.expm1(gamma / 0.25) / (4 * math.pi * gamma), rel=1e-6
        )

    def test_guard_exit_2(self, tmp_path):
        rc = run(["kernel-table", "--h", "0.003", "--eta", "0.5", "--umax", "1",
                  "--step", "0.0001", "--out", str(tmp_path / "kt.csv")])
        assert rc == 2


class TestLbVerify:
    def test_fixture_report(self, tmp_path):
        from wignerscope.lowerbound import FROZEN_FIXTURE as fx

        out = tmp_path / "lb.json"
        rc = run(["lb-verify", "--alpha", str(fx["alpha"]), "--xi", str(fx["xi"]),
                  "--beta", str(fx["beta"]), "--r", str(fx["r"]), "--L", str(fx["L"]),
                  "--eta", str(fx["eta"]), "--n", "1e120", "--delta", str(fx["delta"]),
                  "--bigD", str(fx["big_d"]), "--kmax", "500", "--out", str(out)])
        assert rc == 0
        report = json.loads(out.read_text())
        assert set(report["verdicts"]) == {"positivity", "class", "separation", "chi2"}

    def test_invalid_alpha_exit_1(self, tmp_path):
        rc = run(["lb-verify", "--alpha", "1.5", "--xi", "0.9", "--beta", "0.1",
                  "--r", "2", "--L", "1", "--eta", "0.9", "--n", "1e6",
                  "--out", str(tmp_path / "lb.json")])
        assert rc == 1
