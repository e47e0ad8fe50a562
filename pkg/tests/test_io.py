"""File formats: bit-exact log round-trips, snapshot grammar and recovery,
and the config grammar including its rejection paths."""

import numpy as np
import pytest

from ictm_heat import (
    ConfigError,
    IndicatorField,
    IterationLogWriter,
    IterationRecord,
    LOG_HEADER,
    RunManifest,
    ScalarField,
    build_case,
    build_config,
    expand_sweep,
    load_config,
    make_grid,
    parse_config,
    read_field_snapshot,
    read_iteration_log,
    write_field_snapshot,
    write_iteration_log,
)


def _random_records(n, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        out.append(
            IterationRecord(
                k=k,
                J=float(rng.normal() * 10.0 ** float(rng.integers(-8, 8))),
                J_tau=float(rng.normal()),
                volume_fraction=float(rng.random()),
                flipped_nodes=int(rng.integers(0, 10_000)),
                correction_depth=int(rng.integers(0, 6)),
                wall_time_ms=float(rng.random() * 1e4),
            )
        )
    return out


def test_iteration_log_round_trip_is_bit_exact(tmp_path):
    records = _random_records(25)
    path = tmp_path / "iterations.csv"
    write_iteration_log(records, path)
    back = read_iteration_log(path)
    assert list(back) == records
    with open(path) as fh:
        assert fh.readline().rstrip("\n") == LOG_HEADER


def test_iteration_log_writer_flushes_each_row(tmp_path):
    path = tmp_path / "log.csv"
    records = _random_records(3, seed=1)
    with IterationLogWriter(path) as w:
        w.append(records[0])
        w.append(records[1])
        # readable mid-run without closing
        assert list(read_iteration_log(path)) == records[:2]
        w.append(records[2])
    assert list(read_iteration_log(path)) == records


def test_iteration_log_rejects_bad_header_and_rows(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("k,J\n1,2\n")
    with pytest.raises(ValueError):
        read_iteration_log(path)
    path.write_text(LOG_HEADER + "\n1,2,3\n")
    with pytest.raises(ValueError):
        read_iteration_log(path)


@pytest.mark.parametrize("fmt", ["vtk_structured_points", "raw_with_header"])
@pytest.mark.parametrize("dim", [2, 3])
def test_snapshot_round_trip(tmp_path, fmt, dim):
    grid = make_grid(dim, (6, 8, 5)[:dim], lengths=(1.0, 1.5, 0.75)[:dim])
    rng = np.random.default_rng(3)
    field = ScalarField(grid, rng.normal(size=grid.n_nodes))
    path = tmp_path / "snap"
    write_field_snapshot(field, path, fmt)
    back = read_field_snapshot(path)
    assert np.array_equal(back.values, field.values)
    assert back.grid.dim == dim
    assert back.grid.cells == grid.cells
    for got, want in zip(back.grid.spacing, grid.spacing):
        assert got == pytest.approx(want, rel=1e-15)


def test_snapshot_round_trip_indicator(tmp_path):
    grid = make_grid(2, 8)
    rng = np.random.default_rng(4)
    chi = IndicatorField(grid, (rng.random(grid.n_nodes) < 0.5).astype(np.uint8))
    path = tmp_path / "chi.vtk"
    write_field_snapshot(chi, path)
    back = read_field_snapshot(path)
    assert np.array_equal(back.values, chi.values.astype(float))


def test_vtk_grammar(tmp_path):
    grid = make_grid(2, (6, 8), lengths=(1.0, 1.5))
    field = ScalarField(grid, np.arange(grid.n_nodes, dtype=float))
    path = tmp_path / "snap.vtk"
    write_field_snapshot(field, path, "vtk_structured_points", name="design")
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2] == "ASCII"
    assert lines[3] == "DATASET STRUCTURED_POINTS"
    dims = lines[4].split()
    assert dims[0] == "DIMENSIONS"
    nx, ny, nz = (int(v) for v in dims[1:])
    assert (nx, ny, nz) == (7, 9, 1)  # 2-D files carry a unit z layer
    assert lines[5].split()[0] == "ORIGIN"
    spacing = [float(v) for v in lines[6].split()[1:]]
    assert spacing[0] == pytest.approx(1.0 / 6.0, rel=1e-16)
    assert spacing[2] == 1.0
    assert lines[7] == f"POINT_DATA {grid.n_nodes}"
    assert lines[8] == "SCALARS design double 1"
    assert lines[9] == "LOOKUP_TABLE default"
    values = lines[10:]
    assert len(values) == nx * ny * nz == grid.n_nodes


def test_raw_header_layout(tmp_path):
    grid = make_grid(3, (4, 5, 6))
    field = ScalarField(grid, np.zeros(grid.n_nodes))
    path = tmp_path / "snap.txt"
    write_field_snapshot(field, path, "raw_with_header")
    head = path.read_text().splitlines()[0].split()
    assert head[0] == "3"
    assert [int(v) for v in head[1:4]] == [4, 5, 6]
    assert len(head) == 7  # dim + cells + spacings


def test_snapshot_errors(tmp_path):
    grid = make_grid(2, 4)
    field = ScalarField(grid, np.zeros(grid.n_nodes))
    with pytest.raises(ValueError):
        write_field_snapshot(field, tmp_path / "x", fmt="hdf5")
    # truncated data
    path = tmp_path / "snap.vtk"
    write_field_snapshot(field, path)
    lines = path.read_text().splitlines()
    (tmp_path / "trunc.vtk").write_text("\n".join(lines[:-3]) + "\n")
    with pytest.raises(ValueError):
        read_field_snapshot(tmp_path / "trunc.vtk")
    (tmp_path / "empty").write_text("")
    with pytest.raises(ValueError):
        read_field_snapshot(tmp_path / "empty")


def test_parse_config_defaults_and_full_file():
    assert parse_config("") == RunManifest()
    text = """
    # full configuration
    case.name = area_to_sides
    case.cells = 48, 32
    case.kappa1 = 5.0
    case.kappa2 = 0.5
    case.q1 = 2.0
    case.q2 = 50.0       # matrix source
    case.beta = 0.25
    init.kind = block
    ictm.tau = 2e-4
    ictm.gamma = 12
    ictm.xi = 1e-6
    ictm.theta = 0.25
    ictm.tol = 1e-7
    ictm.max_outer_iters = 40
    ictm.variant = pc
    ictm.seed = 3
    ictm.extension = periodic
    solver.rel_tol = 1e-9
    solver.max_cg_iters = 500
    solver.preconditioner = amg
    output.snapshot_every = 10
    output.format = raw_with_header
    """
    man = parse_config(text)
    assert man.case_name == "area_to_sides"
    assert man.cells == (48, 32)
    assert man.kappa1 == 5.0 and man.kappa2 == 0.5
    assert man.q1 == 2.0 and man.q2 == 50.0
    assert man.beta == 0.25
    assert man.init_kind == "block"
    assert man.tau == 2e-4 and man.gamma == 12 and man.xi == 1e-6
    assert man.theta == 0.25 and man.tol == 1e-7
    assert man.max_outer_iters == 40
    assert man.variant == "prediction_correction"  # alias resolved
    assert man.seed == 3 and man.extension == "periodic"
    assert man.rel_tol == 1e-9 and man.max_cg_iters == 500
    assert man.preconditioner == "amg"
    assert man.snapshot_every == 10 and man.snapshot_format == "raw_with_header"


def test_build_case_and_config_from_manifest():
    man = parse_config("case.cells = 64\nictm.gamma = 7.5\nsolver.preconditioner = direct\n")
    case = build_case(man)
    assert case.grid.cells == (64, 64)  # single value expands per axis
    assert case.name == "area_to_point"
    cfg = build_config(man)
    assert cfg.gamma == 7.5
    assert cfg.solver.preconditioner == "direct"
    man3 = parse_config("case.name = volume_to_surface\ncase.cells = 12\n")
    assert build_case(man3).grid.dim == 3
    assert build_case(man3).grid.cells == (12, 12, 12)


@pytest.mark.parametrize(
    "text,needle",
    [
        ("case.wat = 1", "case.wat"),
        ("ictm.tau 1e-4", "section.key"),
        ("ictm.tau =", "empty value"),
        ("sweep.theta = 0.5", "sweep axis"),
        ("case.cells = 8.5", "integers"),
        ("ictm.variant = annealed", "variant"),
        ("case.name = bridge", "case.name"),
        ("solver.preconditioner = ilu", "preconditioner"),
        ("init.kind = blobs", "init.kind"),
        ("output.format = hdf5", "output.format"),
        ("output.snapshot_every = -2", "snapshot_every"),
        ("case.beta = 1.5", "beta"),
        ("ictm.theta = 1.0", "theta"),
        ("ictm.tau = 0", "tau"),
        ("case.cells = 8, 8, 8", "cells"),
    ],
)
def test_parse_config_rejects_bad_input(text, needle):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert needle in str(err.value)


def test_bad_config_reports_line_number():
    with pytest.raises(ConfigError) as err:
        parse_config("ictm.tau = 1e-4\n\ncase.nope = 3\n")
    assert "line 3" in str(err.value)


def test_expand_sweep_cross_product_and_labels():
    man = parse_config(
        "sweep.gamma = 10, 20, 30\nsweep.seed = 1, 2\nsolver.preconditioner = direct\n"
    )
    entries = expand_sweep(man)
    assert len(entries) == 6
    labels = [label for label, _ in entries]
    assert labels[0] == "gamma=10_seed=1"
    assert labels[1] == "gamma=10_seed=2"
    assert labels[-1] == "gamma=30_seed=2"
    assert len(set(labels)) == 6
    for label, entry in entries:
        assert entry.sweep == ()
        g, s = (tok.split("=")[1] for tok in label.split("_"))
        assert entry.gamma == float(g)
        assert entry.seed == int(s)


def test_expand_sweep_without_axes():
    entries = expand_sweep(RunManifest())
    assert len(entries) == 1
    assert entries[0][0] == "run"


def test_sweep_cap_enforced():
    with pytest.raises(ConfigError) as err:
        parse_config("sweep.seed = 1,2,3,4,5,6,7,8,9\nsweep.max_runs = 8\n")
    assert "max_runs" in str(err.value)
    man = parse_config("sweep.seed = 1,2,3,4,5,6,7,8\nsweep.max_runs = 8\n")
    assert len(expand_sweep(man)) == 8
    with pytest.raises(ConfigError):
        parse_config("sweep.gamma =  \n")


def test_load_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("ictm.gamma = 4.0\n")
    assert load_config(path).gamma == 4.0
