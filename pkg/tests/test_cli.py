import json

import numpy as np
import pytest
import scipy.sparse as sps

from ricsolve.cli import RunConfig, main
from ricsolve.problem_io import save_matrix_market


def _run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path), "--no-figures"])


def test_solve_table_cell(tmp_path, capsys):
    code = _run(tmp_path, "solve", "--problem", "laplacian", "--n0", "30", "--t", "1e3",
                "--shift-mode", "closed-loop", "--tol", "1e-9")
    assert code == 0
    meta = json.loads((tmp_path / "run.json").read_text())
    assert meta["final_dim"] == 3 and meta["converged"]
    assert np.load(tmp_path / "V.npy").shape == (900, 3)
    rows = (tmp_path / "convergence.csv").read_text().strip().splitlines()[1:]
    assert len(rows) == meta["iterations"] == len(meta["rows"])
    assert meta["oracle"]["x_norm"] == pytest.approx(4.9999e-3, rel=1e-4)


def test_solve_max_dim_stop(tmp_path):
    code = _run(tmp_path, "solve", "--n0", "30", "--t", "1e3", "--shift-mode", "closed-loop",
                "--max-dim", "2", "--oracle", "off")
    assert code == 2
    assert np.load(tmp_path / "Y.npy").shape == (2, 2)
    assert not json.loads((tmp_path / "run.json").read_text())["converged"]


def test_missing_matrix_file(tmp_path, capsys):
    code = _run(tmp_path, "solve", "--A", str(tmp_path / "nope.mtx"), "--B", "b.txt", "--C", "c.txt")
    assert code == 1
    assert "nope.mtx" in capsys.readouterr().err


def test_bad_matrix_file_reports_line(tmp_path, capsys):
    (tmp_path / "A.mtx").write_text("%%MatrixMarket matrix coordinate real general\n2 2 1\n9 9 1\n")
    (tmp_path / "B.txt").write_text("1\n1\n")
    (tmp_path / "C.txt").write_text("1 1\n")
    code = _run(tmp_path, "solve", "--A", str(tmp_path / "A.mtx"), "--B", str(tmp_path / "B.txt"),
                "--C", str(tmp_path / "C.txt"))
    assert code == 1 and "line 3" in capsys.readouterr().err


def test_solve_from_files_and_fixed_shifts(tmp_path):
    save_matrix_market(tmp_path / "A.mtx", sps.diags(-np.arange(1.0, 21.0)).tocsr())
    np.savetxt(tmp_path / "B.txt", np.ones((20, 1)))
    np.savetxt(tmp_path / "C.txt", np.ones((1, 20)))
    code = _run(tmp_path, "solve", "--A", str(tmp_path / "A.mtx"), "--B", str(tmp_path / "B.txt"),
                "--C", str(tmp_path / "C.txt"), "--shift-mode", "fixed:1,5,15", "--tol", "1e-8")
    assert code == 0
    meta = json.loads((tmp_path / "run.json").read_text())
    assert {r["shift"][0] for r in meta["rows"][1:]} <= {1.0, 5.0, 15.0}


def test_determinism(tmp_path):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        main(["solve", "--problem", "toeplitz", "--n", "200", "--t", "0.05", "--out", str(d),
              "--no-figures", "--oracle", "off"])
        outs.append((d / "convergence.csv").read_bytes())
    assert outs[0] == outs[1]


def test_config_roundtrip_and_override(tmp_path):
    cfg = RunConfig(problem="random", params={"n": 30, "q": 1, "p": 1},
                    solver={"tol": 1e-8, "max_dim": 40}, out=str(tmp_path), seed=3)
    assert RunConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(ValueError, match="unknown"):
        RunConfig.from_dict({"problem": "random", "speed": 1})
    with pytest.raises(ValueError, match="unknown"):
        RunConfig(solver={"tolerance": 1})
    path = tmp_path / "cfg.json"
    path.write_text(cfg.to_json())
    assert main(["solve", "--config", str(path), "--tol", "1e-10", "--no-figures"]) == 0
    meta = json.loads((tmp_path / "run.json").read_text())
    assert meta["config"]["solver"]["tol"] == 1e-10 and meta["config"]["seed"] == 3


def test_figures_written(tmp_path):
    assert main(["solve", "--n0", "10", "--t", "10", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "convergence.png").stat().st_size > 0


def test_certify_exit_codes(tmp_path, capsys):
    assert _run(tmp_path, "certify", "--problem", "random", "--n", "40") == 0
    data = json.loads((tmp_path / "certify.json").read_text())
    assert data["passed"] and data["violations"] == 0
    assert (tmp_path / "certify_reports.csv").exists()

    cfg = RunConfig(problem="random", params={"n": 30, "q": 1, "p": 1, "b_scale": 0.0})
    (tmp_path / "lyap.json").write_text(cfg.to_json())
    assert _run(tmp_path, "certify", "--config", str(tmp_path / "lyap.json")) == 0

    A = sps.diags(np.r_[0.5, -np.arange(1.0, 10.0)]).tocsr()
    save_matrix_market(tmp_path / "A.mtx", A)
    np.savetxt(tmp_path / "B.txt", np.ones((10, 1)))
    np.savetxt(tmp_path / "C.txt", np.ones((1, 10)))
    code = _run(tmp_path, "certify", "--A", str(tmp_path / "A.mtx"), "--B", str(tmp_path / "B.txt"),
                "--C", str(tmp_path / "C.txt"))
    assert code == 1 and "not stable" in capsys.readouterr().err


def test_bench_toeplitz_outputs(tmp_path, monkeypatch):
    monkeypatch.setenv("RICSOLVE_THREADS", "2")
    code = main(["bench-toeplitz", "--n", "700", "--out", str(tmp_path)])
    assert code == 0
    rows = (tmp_path / "toeplitz.csv").read_text().strip().splitlines()
    assert len(rows) == 7
    hulls = (tmp_path / "toeplitz_hulls.csv").read_text().splitlines()
    assert hulls[0] == "run,k,vertex,re,im" and len(hulls) > 10
    assert (tmp_path / "toeplitz_hull.png").exists()
    summary = json.loads((tmp_path / "toeplitz_summary.json").read_text())
    assert summary["passed"] and summary["closed_loop_outlier_ratio"] > 10
    for f in tmp_path.glob("convergence_*.csv"):
        assert f.read_text().count("\n") >= 2


def test_bench_table1_downscaled(tmp_path):
    # the acceptance thresholds only apply at n0 = 30; here just the artifact layout
    code = main(["bench-table1", "--n0", "8", "--out", str(tmp_path), "--no-figures"])
    assert code == 0
    header = (tmp_path / "table1.csv").read_text().splitlines()[0]
    assert header == "t,mode,dim,iterations,res_norm,err_norm,x_norm,converged"


def test_shift_mode_parsing_rejects_garbage(tmp_path):
    with pytest.raises(SystemExit):
        main(["solve", "--shift-mode", "sideways", "--out", str(tmp_path)])
