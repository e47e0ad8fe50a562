"""File formats: iteration logs, field snapshots, and run configs.

* iteration log: CSV with the exact header
  ``k,J,J_tau,volume_fraction,flipped_nodes,correction_depth,wall_time_ms``;
  floats are written with repr so a read-back reproduces them bit for bit.
* snapshots: legacy ASCII VTK structured points, or a raw text format
  whose first line is ``dim m1 m2 [m3] h1 h2 [h3]`` followed by one nodal
  value per line in flat (x fastest) order.
* configs: line-oriented ``section.key = value`` text with ``#``
  comments; unknown keys are rejected by name.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import product

import numpy as np

from .cases import CASE_BUILDERS, ProblemCase
from .fem import PRECONDITIONERS, SolverSettings
from .fields import ScalarField, make_grid
from .optimizer import IctmConfig, IterationRecord

__all__ = [
    "ConfigError",
    "LOG_HEADER",
    "write_iteration_log",
    "read_iteration_log",
    "IterationLogWriter",
    "write_field_snapshot",
    "read_field_snapshot",
    "SNAPSHOT_FORMATS",
    "RunManifest",
    "parse_config",
    "load_config",
    "build_case",
    "build_config",
    "expand_sweep",
]

LOG_HEADER = "k,J,J_tau,volume_fraction,flipped_nodes,correction_depth,wall_time_ms"
SNAPSHOT_FORMATS = ("vtk_structured_points", "raw_with_header")


class ConfigError(ValueError):
    """Malformed or out-of-range run configuration."""


# ---------------------------------------------------------------- iteration log

def _format_record(rec: IterationRecord) -> str:
    return (
        f"{rec.k},{rec.J!r},{rec.J_tau!r},{rec.volume_fraction!r},"
        f"{rec.flipped_nodes},{rec.correction_depth},{rec.wall_time_ms!r}"
    )


class IterationLogWriter:
    """Appends one CSV row per iteration, flushing so partial runs stay readable."""

    def __init__(self, path):
        self._fh = open(path, "w")
        self._fh.write(LOG_HEADER + "\n")
        self._fh.flush()

    def append(self, rec: IterationRecord):
        self._fh.write(_format_record(rec) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_iteration_log(records, path):
    with IterationLogWriter(path) as w:
        for rec in records:
            w.append(rec)


def read_iteration_log(path):
    """Parse a log written by write_iteration_log; returns a tuple of records."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != LOG_HEADER:
        raise ValueError(f"iteration log must start with header {LOG_HEADER!r}")
    records = []
    for ln in lines[1:]:
        if not ln:
            continue
        parts = ln.split(",")
        if len(parts) != 7:
            raise ValueError(f"malformed iteration log row: {ln!r}")
        records.append(
            IterationRecord(
                k=int(parts[0]),
                J=float(parts[1]),
                J_tau=float(parts[2]),
                volume_fraction=float(parts[3]),
                flipped_nodes=int(parts[4]),
                correction_depth=int(parts[5]),
                wall_time_ms=float(parts[6]),
            )
        )
    return tuple(records)


# ------------------------------------------------------------------- snapshots

def _write_vtk(field, path, name):
    grid = field.grid
    shape = grid.shape
    spacing = grid.spacing
    nx, ny = shape[0], shape[1]
    nz = shape[2] if grid.dim == 3 else 1
    hx, hy = spacing[0], spacing[1]
    hz = spacing[2] if grid.dim == 3 else 1.0
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{name} field snapshot\n")
        fh.write("ASCII\n")
        fh.write("DATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {nx} {ny} {nz}\n")
        fh.write("ORIGIN 0.0 0.0 0.0\n")
        fh.write(f"SPACING {hx!r} {hy!r} {hz!r}\n")
        fh.write(f"POINT_DATA {grid.n_nodes}\n")
        fh.write(f"SCALARS {name} double 1\n")
        fh.write("LOOKUP_TABLE default\n")
        for v in field.values:
            fh.write(f"{float(v)!r}\n")


def _write_raw(field, path):
    grid = field.grid
    head = [str(grid.dim)] + [str(m) for m in grid.cells] + [repr(h) for h in grid.spacing]
    with open(path, "w") as fh:
        fh.write(" ".join(head) + "\n")
        for v in field.values:
            fh.write(f"{float(v)!r}\n")


def write_field_snapshot(field, path, fmt: str = "vtk_structured_points", name: str = "chi"):
    """Write a nodal field; fmt is one of SNAPSHOT_FORMATS."""
    if fmt == "vtk_structured_points":
        _write_vtk(field, path, name)
    elif fmt == "raw_with_header":
        _write_raw(field, path)
    else:
        raise ValueError(f"snapshot format must be one of {SNAPSHOT_FORMATS}, got {fmt!r}")


def _read_vtk(lines):
    if len(lines) < 10 or not lines[0].startswith("# vtk DataFile"):
        raise ValueError("not a legacy VTK file")
    if lines[2].strip() != "ASCII" or lines[3].strip() != "DATASET STRUCTURED_POINTS":
        raise ValueError("snapshot reader supports ASCII structured points only")
    fields = {}
    idx = 4
    while idx < len(lines) and not lines[idx].startswith("LOOKUP_TABLE"):
        key = lines[idx].split()[0]
        fields[key] = lines[idx].split()[1:]
        idx += 1
    idx += 1  # past LOOKUP_TABLE
    nx, ny, nz = (int(v) for v in fields["DIMENSIONS"])
    hx, hy, hz = (float(v) for v in fields["SPACING"])
    n_pts = int(fields["POINT_DATA"][0])
    values = np.array([float(v) for v in lines[idx: idx + n_pts]])
    if values.size != n_pts:
        raise ValueError("snapshot data is truncated")
    if nz == 1:
        grid = make_grid(2, (nx - 1, ny - 1), lengths=((nx - 1) * hx, (ny - 1) * hy))
    else:
        grid = make_grid(
            3, (nx - 1, ny - 1, nz - 1),
            lengths=((nx - 1) * hx, (ny - 1) * hy, (nz - 1) * hz),
        )
    return ScalarField(grid, values)


def _read_raw(lines):
    head = lines[0].split()
    dim = int(head[0])
    cells = [int(v) for v in head[1: 1 + dim]]
    spacing = [float(v) for v in head[1 + dim: 1 + 2 * dim]]
    grid = make_grid(dim, cells, lengths=[m * h for m, h in zip(cells, spacing)])
    values = np.array([float(v) for v in lines[1: 1 + grid.n_nodes]])
    if values.size != grid.n_nodes:
        raise ValueError("snapshot data is truncated")
    return ScalarField(grid, values)


def read_field_snapshot(path) -> ScalarField:
    """Read either snapshot format back (format detected from the first line)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines:
        raise ValueError("empty snapshot file")
    if lines[0].startswith("# vtk"):
        return _read_vtk(lines)
    return _read_raw(lines)


# --------------------------------------------------------------------- configs

_SWEEP_KEYS = ("kappa1", "kappa2", "q1", "q2", "beta", "gamma", "tau", "seed")
_VARIANT_ALIASES = {"pc": "prediction_correction"}


@dataclass(frozen=True)
class RunManifest:
    """Fully resolved run description (one concrete case + config + output)."""

    case_name: str = "area_to_point"
    cells: tuple = (200, 200)
    lengths: tuple | None = None
    kappa1: float = 10.0
    kappa2: float = 1.0
    q1: float = 1.0
    q2: float = 100.0
    beta: float = 0.2
    init_kind: str = "stripes"
    tau: float = 1e-4
    gamma: float = 30.0
    xi: float = 1e-5
    theta: float = 0.5
    tol: float = 1e-6
    max_outer_iters: int = 500
    variant: str = "prediction_correction"
    seed: int = 0
    extension: str = "mirror"
    rel_tol: float = 1e-10
    max_cg_iters: int | None = None
    preconditioner: str = "jacobi"
    snapshot_every: int = 0
    snapshot_format: str = "vtk_structured_points"
    sweep: tuple = ()  # ((key, (values...)), ...) in declaration order
    sweep_max_runs: int = 64


def _parse_scalar(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _parse_list(text: str):
    return tuple(_parse_scalar(tok.strip()) for tok in text.split(",") if tok.strip())


def _manifest_dim(name: str) -> int:
    return 3 if name == "volume_to_surface" else 2


def parse_config(text: str) -> RunManifest:
    """Parse `section.key = value` lines into a RunManifest."""
    values = {}
    sweep = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if val == "":
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        if key.startswith("sweep."):
            sub = key[len("sweep."):]
            if sub == "max_runs":
                values["sweep_max_runs"] = int(val)
            elif sub in _SWEEP_KEYS:
                sweep.append((sub, _parse_list(val)))
            else:
                raise ConfigError(f"line {lineno}: unknown sweep axis {sub!r} (allowed: {_SWEEP_KEYS})")
            continue
        handler = _CONFIG_KEYS.get(key)
        if handler is None:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        field_name, conv = handler
        try:
            values[field_name] = conv(val)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc

    manifest = RunManifest(**values, sweep=tuple(sweep))
    _validate_manifest(manifest)
    return manifest


def _conv_variant(val: str) -> str:
    val = _VARIANT_ALIASES.get(val, val)
    if val not in ("classical", "prediction_correction"):
        raise ConfigError(f"variant must be classical or pc, got {val!r}")
    return val


def _conv_cells(val: str) -> tuple:
    cells = _parse_list(val)
    if not all(isinstance(c, int) for c in cells):
        raise ConfigError(f"cells must be integers, got {val!r}")
    return cells


def _conv_opt_int(val: str):
    if val.lower() in ("none", "auto"):
        return None
    return int(val)


_CONFIG_KEYS = {
    "case.name": ("case_name", str),
    "case.cells": ("cells", _conv_cells),
    "case.lengths": ("lengths", _parse_list),
    "case.kappa1": ("kappa1", float),
    "case.kappa2": ("kappa2", float),
    "case.q1": ("q1", float),
    "case.q2": ("q2", float),
    "case.beta": ("beta", float),
    "init.kind": ("init_kind", str),
    "ictm.tau": ("tau", float),
    "ictm.gamma": ("gamma", float),
    "ictm.xi": ("xi", float),
    "ictm.theta": ("theta", float),
    "ictm.tol": ("tol", float),
    "ictm.max_outer_iters": ("max_outer_iters", int),
    "ictm.variant": ("variant", _conv_variant),
    "ictm.seed": ("seed", int),
    "ictm.extension": ("extension", str),
    "solver.rel_tol": ("rel_tol", float),
    "solver.max_cg_iters": ("max_cg_iters", _conv_opt_int),
    "solver.preconditioner": ("preconditioner", str),
    "output.snapshot_every": ("snapshot_every", int),
    "output.format": ("snapshot_format", str),
}


def _validate_manifest(man: RunManifest):
    if man.case_name not in CASE_BUILDERS:
        raise ConfigError(f"case.name must be one of {tuple(CASE_BUILDERS)}, got {man.case_name!r}")
    dim = _manifest_dim(man.case_name)
    cells = man.cells
    if len(cells) == 1:
        cells = cells * dim
    if len(cells) != dim:
        raise ConfigError(f"case.cells needs 1 or {dim} entries for {man.case_name}, got {man.cells}")
    if man.init_kind not in ("stripes", "block", "random"):
        raise ConfigError(f"init.kind must be stripes, block or random, got {man.init_kind!r}")
    if man.preconditioner not in PRECONDITIONERS:
        raise ConfigError(
            f"solver.preconditioner must be one of {PRECONDITIONERS}, got {man.preconditioner!r}"
        )
    if man.snapshot_format not in SNAPSHOT_FORMATS:
        raise ConfigError(
            f"output.format must be one of {SNAPSHOT_FORMATS}, got {man.snapshot_format!r}"
        )
    if man.snapshot_every < 0:
        raise ConfigError("output.snapshot_every must be non-negative")
    # range checks on numerics go through the dataclass validators
    try:
        build_case(man)
        build_config(man)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    n_runs = 1
    for _, vals in man.sweep:
        if not vals:
            raise ConfigError("sweep axes must carry at least one value")
        n_runs *= len(vals)
    if n_runs > man.sweep_max_runs:
        raise ConfigError(
            f"sweep would launch {n_runs} runs, above the cap sweep.max_runs = {man.sweep_max_runs}"
        )


def load_config(path) -> RunManifest:
    with open(path) as fh:
        return parse_config(fh.read())


def build_case(man: RunManifest) -> ProblemCase:
    dim = _manifest_dim(man.case_name)
    cells = man.cells if len(man.cells) == dim else man.cells * dim
    grid = make_grid(dim, cells, lengths=man.lengths)
    builder = CASE_BUILDERS[man.case_name]
    return builder(grid, kappa1=man.kappa1, kappa2=man.kappa2, q1=man.q1, q2=man.q2, beta=man.beta)


def build_config(man: RunManifest) -> IctmConfig:
    solver = SolverSettings(
        rel_tol=man.rel_tol, max_cg_iters=man.max_cg_iters, preconditioner=man.preconditioner
    )
    return IctmConfig(
        tau=man.tau, gamma=man.gamma, xi=man.xi, theta=man.theta, tol=man.tol,
        max_outer_iters=man.max_outer_iters, variant=man.variant, seed=man.seed,
        solver=solver, extension=man.extension,
    )


def _format_value(v) -> str:
    if isinstance(v, float):
        return f"{v:g}"
    return str(v)


def expand_sweep(man: RunManifest):
    """Cross product of the sweep axes as (label, concrete manifest) pairs.

    Without sweep axes a single entry labeled "run" is returned. Labels
    are filesystem-safe, e.g. "kappa1=5_seed=1".
    """
    if not man.sweep:
        return [("run", replace(man, sweep=()))]
    keys = [k for k, _ in man.sweep]
    axes = [vals for _, vals in man.sweep]
    entries = []
    for combo in product(*axes):
        label = "_".join(f"{k}={_format_value(v)}" for k, v in zip(keys, combo))
        overrides = dict(zip(keys, combo))
        entries.append((label, replace(man, sweep=(), **overrides)))
    return entries
