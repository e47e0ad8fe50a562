"""Command line driver.

Subcommands:

* ``run``     one optimization run from a config file;
* ``compare`` the same problem under both variants, side by side;
* ``sweep``   the cross product of the config's sweep axes.

Exit codes: 0 when every run terminates via tol_reached or
correction_exhausted, 2 when any run stops at max_outer_iters, 1 on
errors. Iteration logs are flushed per iteration so interrupted runs
remain inspectable.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .cases import initial_guess, volume_target
from .fem import SolverError
from .io import (
    ConfigError,
    IterationLogWriter,
    RunManifest,
    build_case,
    build_config,
    expand_sweep,
    load_config,
    write_field_snapshot,
)
from .optimizer import run as run_variant

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MAX_ITERS = 2

_SNAPSHOT_EXT = {"vtk_structured_points": ".vtk", "raw_with_header": ".txt"}


def _termination_code(termination: str) -> int:
    return EXIT_OK if termination in ("tol_reached", "correction_exhausted") else EXIT_MAX_ITERS


def execute_run(man: RunManifest, out_dir: Path, echo: bool = True) -> dict:
    """Run one manifest into out_dir; returns a plain summary dict."""
    case = build_case(man)
    cfg = build_config(man)
    chi0 = initial_guess(man.init_kind, case.grid, volume_target(case), seed=man.seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    ext = _SNAPSHOT_EXT[man.snapshot_format]

    every = man.snapshot_every
    writer = IterationLogWriter(out_dir / "iterations.csv")
    t0 = time.perf_counter()

    def on_iteration(rec, chi, breakdown):
        writer.append(rec)
        if every > 0 and rec.k % every == 0:
            write_field_snapshot(chi, out_dir / f"chi_{rec.k:06d}{ext}", man.snapshot_format)
        if echo and (rec.k % 25 == 0):
            print(f"  k={rec.k:4d}  J_tau={rec.J_tau:.6e}  flips={rec.flipped_nodes}")

    try:
        result = run_variant(case, cfg, chi0, on_iteration=on_iteration)
    finally:
        writer.close()
    elapsed = time.perf_counter() - t0

    write_field_snapshot(result.chi_final, out_dir / f"chi_final{ext}", man.snapshot_format)
    final = result.records[-1]
    summary = {
        "case": man.case_name,
        "cells": "x".join(str(c) for c in case.grid.cells),
        "variant": cfg.variant,
        "seed": man.seed,
        "termination": result.termination,
        "iterations": final.k,
        "final_J": final.J,
        "final_J_tau": final.J_tau,
        "wall_time_s": round(elapsed, 3),
    }
    with open(out_dir / "summary.txt", "w") as fh:
        for key, val in summary.items():
            fh.write(f"{key} = {val}\n")
    if echo:
        print(
            f"[{summary['case']} {summary['cells']} {cfg.variant} seed={man.seed}] "
            f"{result.termination} after {final.k} iterations, "
            f"J_tau = {final.J_tau:.6e} ({elapsed:.1f} s)"
        )
    return summary


def _cmd_run(args) -> int:
    man = load_config(args.config)
    overrides = {}
    if args.variant is not None:
        overrides["variant"] = {"pc": "prediction_correction"}.get(args.variant, args.variant)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.snapshot_every is not None:
        overrides["snapshot_every"] = args.snapshot_every
    if overrides:
        man = replace(man, **overrides)
    summary = execute_run(man, Path(args.out))
    return _termination_code(summary["termination"])


def _cmd_compare(args) -> int:
    man = load_config(args.config)
    out = Path(args.out)
    code = EXIT_OK
    finals = {}
    for variant in ("classical", "prediction_correction"):
        summary = execute_run(replace(man, variant=variant), out / variant)
        finals[variant] = summary
        code = max(code, _termination_code(summary["termination"]))
    d = finals["classical"]["final_J_tau"] - finals["prediction_correction"]["final_J_tau"]
    print(f"final J_tau difference (classical - prediction_correction) = {d:.6e}")
    return code


def _run_entry(payload):
    man, out_str, label = payload
    summary = execute_run(man, Path(out_str), echo=False)
    summary["label"] = label
    return summary


def _cmd_sweep(args) -> int:
    man = load_config(args.config)
    entries = expand_sweep(man)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = args.jobs if args.jobs is not None else int(os.environ.get("ICTM_JOBS", "1"))
    jobs = max(1, jobs)
    payloads = [(entry_man, str(out / label), label) for label, entry_man in entries]

    if jobs == 1:
        summaries = []
        for payload in payloads:
            print(f"sweep entry {payload[2]}")
            summaries.append(_run_entry(payload))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_run_entry, payloads))

    code = EXIT_OK
    index_path = out / "sweep_index.csv"
    with open(index_path, "w") as fh:
        fh.write("label,termination,iterations,final_J,final_J_tau,wall_time_s\n")
        for s in summaries:
            fh.write(
                f"{s['label']},{s['termination']},{s['iterations']},"
                f"{s['final_J']!r},{s['final_J_tau']!r},{s['wall_time_s']}\n"
            )
            code = max(code, _termination_code(s["termination"]))
    print(f"sweep finished: {len(summaries)} runs, index at {index_path}")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ictm-heat",
        description="Convolution-thresholding topology optimization of heat conduction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one optimization run")
    p_run.add_argument("--config", required=True, help="path to a run config file")
    p_run.add_argument("--out", default="ictm_out", help="output directory")
    p_run.add_argument("--variant", choices=("classical", "pc"), default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--snapshot-every", type=int, default=None, dest="snapshot_every")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="run both variants on the same problem")
    p_cmp.add_argument("--config", required=True)
    p_cmp.add_argument("--out", default="ictm_compare")
    p_cmp.set_defaults(func=_cmd_compare)

    p_sweep = sub.add_parser("sweep", help="run the config's sweep cross product")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", default="ictm_sweep")
    p_sweep.add_argument("--jobs", type=int, default=None,
                         help="parallel workers (default: ICTM_JOBS or 1)")
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SolverError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
