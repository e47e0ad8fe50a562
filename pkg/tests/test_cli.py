"""Command line driver: exit codes, output files, overrides, and the sweep
index, exercised in-process through main(argv)."""

import subprocess
import sys

import numpy as np
import pytest

from ictm_heat import read_field_snapshot, read_iteration_log
from ictm_heat.cli import EXIT_ERROR, EXIT_MAX_ITERS, EXIT_OK, main

# identical materials converge in a handful of iterations at 16^2
_FAST_CONFIG = """
case.name = area_to_sides
case.cells = 16
case.kappa1 = 2.0
case.kappa2 = 2.0
case.q1 = 1.0
case.q2 = 1.0
case.beta = 0.3
init.kind = block
ictm.tau = 0.015625
ictm.gamma = 1.0
ictm.xi = 0.0
ictm.max_outer_iters = 50
solver.preconditioner = direct
"""

_CONTRAST_CONFIG = """
case.name = area_to_point
case.cells = 20
ictm.tau = 1e-3
ictm.gamma = 5.0
ictm.xi = 1e-5
ictm.max_outer_iters = 3
solver.preconditioner = direct
"""


@pytest.fixture
def fast_cfg(tmp_path):
    p = tmp_path / "fast.cfg"
    p.write_text(_FAST_CONFIG)
    return p


@pytest.fixture
def contrast_cfg(tmp_path):
    p = tmp_path / "contrast.cfg"
    p.write_text(_CONTRAST_CONFIG)
    return p


def test_run_converged_exit_and_outputs(fast_cfg, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", "--config", str(fast_cfg), "--out", str(out)])
    assert code == EXIT_OK
    records = read_iteration_log(out / "iterations.csv")
    assert records[0].k == 0
    assert [r.k for r in records] == list(range(len(records)))
    jt = [r.J_tau for r in records]
    assert all(b < a for a, b in zip(jt, jt[1:]))
    chi = read_field_snapshot(out / "chi_final.vtk")
    assert set(np.unique(chi.values)) <= {0.0, 1.0}
    summary = (out / "summary.txt").read_text()
    assert "termination = " in summary
    assert "final_J_tau = " in summary
    assert "k=" in capsys.readouterr().out


def test_run_hitting_iteration_cap_exits_2(contrast_cfg, tmp_path):
    out = tmp_path / "out"
    code = main(["run", "--config", str(contrast_cfg), "--out", str(out)])
    assert code == EXIT_MAX_ITERS
    records = read_iteration_log(out / "iterations.csv")
    assert records[-1].k == 3
    assert "termination = max_iters" in (out / "summary.txt").read_text()


def test_run_snapshot_cadence_and_raw_format(tmp_path):
    cfg = tmp_path / "snap.cfg"
    cfg.write_text(_CONTRAST_CONFIG + "output.snapshot_every = 2\noutput.format = raw_with_header\n")
    out = tmp_path / "out"
    main(["run", "--config", str(cfg), "--out", str(out)])
    # records k = 0..3, cadence 2 -> snapshots at k = 0 and 2, plus the final
    assert sorted(p.name for p in out.glob("chi_*.txt")) == [
        "chi_000000.txt", "chi_000002.txt", "chi_final.txt",
    ]
    snap = read_field_snapshot(out / "chi_000002.txt")
    assert snap.grid.cells == (20, 20)


def test_run_cli_overrides(fast_cfg, tmp_path):
    out = tmp_path / "out"
    code = main(["run", "--config", str(fast_cfg), "--out", str(out),
                 "--variant", "classical", "--snapshot-every", "1"])
    assert code == EXIT_OK
    assert "variant = classical" in (out / "summary.txt").read_text()
    assert (out / "chi_000000.vtk").exists()
    records = read_iteration_log(out / "iterations.csv")
    assert all(r.correction_depth == 0 for r in records)


def test_run_seed_override_changes_random_init(tmp_path):
    cfg = tmp_path / "rand.cfg"
    cfg.write_text(_CONTRAST_CONFIG + "init.kind = random\n")
    outs = {}
    for seed in ("1", "2"):
        out = tmp_path / f"out{seed}"
        main(["run", "--config", str(cfg), "--out", str(out), "--seed", seed])
        outs[seed] = read_iteration_log(out / "iterations.csv")
    assert outs["1"][0].J != outs["2"][0].J


def test_compare_writes_both_variants(contrast_cfg, tmp_path, capsys):
    out = tmp_path / "cmp"
    code = main(["compare", "--config", str(contrast_cfg), "--out", str(out)])
    # classical always runs into the tiny iteration cap here
    assert code == EXIT_MAX_ITERS
    for variant in ("classical", "prediction_correction"):
        assert (out / variant / "iterations.csv").exists()
        assert (out / variant / "summary.txt").exists()
    assert "final J_tau difference" in capsys.readouterr().out


def test_sweep_runs_cross_product(fast_cfg, tmp_path, capsys):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text(_FAST_CONFIG + "sweep.gamma = 0.5, 1\nsweep.seed = 1, 2\n")
    out = tmp_path / "sw"
    code = main(["sweep", "--config", str(cfg), "--out", str(out), "--jobs", "1"])
    assert code == EXIT_OK
    lines = (out / "sweep_index.csv").read_text().splitlines()
    assert lines[0] == "label,termination,iterations,final_J,final_J_tau,wall_time_s"
    assert len(lines) == 5
    labels = [ln.split(",")[0] for ln in lines[1:]]
    assert labels == ["gamma=0.5_seed=1", "gamma=0.5_seed=2",
                      "gamma=1_seed=1", "gamma=1_seed=2"]
    for label in labels:
        assert (out / label / "iterations.csv").exists()


def test_bad_config_exits_1(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("case.wat = 1\n")
    code = main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == EXIT_ERROR
    assert "error:" in capsys.readouterr().err


def test_missing_config_exits_1(tmp_path, capsys):
    code = main(["run", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "o")])
    assert code == EXIT_ERROR
    assert "error:" in capsys.readouterr().err


def test_missing_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_module_entry_point(fast_cfg, tmp_path):
    out = tmp_path / "out"
    proc = subprocess.run(
        [sys.executable, "-m", "ictm_heat", "run", "--config", str(fast_cfg),
         "--out", str(out)],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == EXIT_OK, proc.stderr
    assert (out / "iterations.csv").exists()
