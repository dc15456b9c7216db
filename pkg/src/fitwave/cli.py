"""Command-line front end: solve, sweep, eig, and stats subcommands.

Results go to CSV (``--out``); the sweep's report path also renders PNG
figures next to the CSV unless ``--no-figures`` is given.  Progress lines go
to standard error.  Exit codes: 0 — all requested solves converged; 1 — at
least one solve failed to converge; 2 — scene/usage validation errors.

The CSV schema is one row per frequency::

    freq_hz,re_Z11,im_Z11,...,re_S11,im_S11,...,iters,resid,wall_s

with Z (and S) entries in probe-major order and 1-based indices.  All
numbers are written with 17 significant digits, so re-parsing reproduces
the computed doubles bit for bit.  Superposed-excitation runs replace the
Z/S pairs with probe voltage pairs ``re_U<m>,im_U<m>``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .krylov import METHODS
from .materials import build_material_diagonals, scale_curl
from .operator import VARIANTS, assemble_sparse_A, build_operator
from .oracle import MAX_DENSE, dense_assemble
from .scene import Scene, parse_scene
from .sweep import SweepConfig, SweepResult, run_sweep
from .topology import build_curl, write_matrix_market

__all__ = ["main", "write_results", "read_results"]

ENV_WORKERS = "FITWAVE_WORKERS"

_FMT = "%.17e"


# --------------------------------------------------------------------------- #
# result serialization
# --------------------------------------------------------------------------- #


def _result_header(result: SweepResult) -> list[str]:
    cols = ["freq_hz"]
    m = len(result.probe_names)
    n = len(result.port_names)
    if result.config.superpose:
        for mi in range(m):
            cols += [f"re_U{mi + 1}", f"im_U{mi + 1}"]
    else:
        for mi in range(m):
            for ni in range(n):
                cols += [f"re_Z{mi + 1}{ni + 1}", f"im_Z{mi + 1}{ni + 1}"]
        if _s_columns(result):
            for mi in range(m):
                for ni in range(n):
                    cols += [f"re_S{mi + 1}{ni + 1}", f"im_S{mi + 1}{ni + 1}"]
    cols += ["iters", "resid", "wall_s"]
    return cols


def _s_columns(result: SweepResult) -> bool:
    if result.config.superpose:
        return False
    if result.results:
        return result.results[0].s is not None
    return result.probe_names == result.port_names


def _write_rows(result: SweepResult, handle) -> None:
    with_s = _s_columns(result)
    for r in result.results:
        fields = [_FMT % r.freq_hz]
        if result.config.superpose:
            for value in r.voltages if r.voltages is not None else ():
                fields += [_FMT % value.real, _FMT % value.imag]
        else:
            for value in r.z.reshape(-1):
                fields += [_FMT % value.real, _FMT % value.imag]
            if with_s:
                s = r.s if r.s is not None else np.full_like(r.z, np.nan)
                for value in s.reshape(-1):
                    fields += [_FMT % value.real, _FMT % value.imag]
        fields += ["%d" % r.iterations, _FMT % r.residual, _FMT % r.wall_s]
        handle.write(",".join(fields) + "\n")


def write_results(result: SweepResult, path) -> None:
    """Write the sweep table as CSV with full double precision."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        handle.write(",".join(_result_header(result)) + "\n")
        _write_rows(result, handle)


def read_results(path) -> dict[str, np.ndarray]:
    """Parse a results CSV back into named float64 columns."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


# --------------------------------------------------------------------------- #
# helpers
# --------------------------------------------------------------------------- #


def _resolve_workers(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get(ENV_WORKERS)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ValueError(
                f"environment variable {ENV_WORKERS}={env!r} is not an integer"
            ) from None
    return 1


def _load_scene(args, log) -> Scene:
    scene = parse_scene(args.scene)
    if log is not None:
        for bi, dist in enumerate(scene.snap_distances):
            if dist > 0.0:
                print(
                    f"scene.materials[{bi}]: box corners snapped to grid "
                    f"planes (largest move {dist:.3e} m)",
                    file=log,
                )
    return scene


def _build_config(args, f_min: float, f_max: float, n_f: int) -> SweepConfig:
    return SweepConfig(
        f_min=f_min,
        f_max=f_max,
        n_f=n_f,
        solver=args.solver,
        variant=args.variant,
        tol=args.tol,
        max_iter=args.max_iter,
        restart=args.restart,
        workers=_resolve_workers(args.workers),
        parallel_mode=args.parallel_mode,
        enable_cgs=args.enable_cgs,
        superpose=getattr(args, "superpose", False),
    )


def _export_matrix(scene: Scene, variant: str, path, omega: float | None) -> None:
    """Write the variant's stored sparse factor in Matrix Market form.

    ``e2t`` exports the topological curl, ``e2tt`` the pre-scaled half
    operator, ``e2s`` the assembled wave matrix.  The frequency shift is not
    part of the stored matrix; for conductive scenes the material scaling is
    evaluated at ``omega``.
    """
    grid = scene.grid
    curl = build_curl(grid)
    if variant == "e2t":
        write_matrix_market(
            curl, path, comment=f"curl incidence factor, n_e={grid.n_edges}"
        )
        return
    diagonals = build_material_diagonals(
        grid, scene.materials, scene.walls,
        omega=None if scene.is_lossless else omega,
    )
    scaled = scale_curl(curl, diagonals)
    if variant == "e2tt":
        write_matrix_market(
            scaled, path, comment=f"scaled half-operator factor, n_e={grid.n_edges}"
        )
    else:
        write_matrix_market(
            assemble_sparse_A(scaled), path,
            comment=f"assembled wave matrix, n_e={grid.n_edges}",
        )


def _print_network(result: SweepResult, out=None) -> None:
    out = out if out is not None else sys.stdout
    for r in result.results:
        print(f"f = {r.freq_hz:.9e} Hz", file=out)
        if r.z is not None:
            for mi in range(r.z.shape[0]):
                for ni in range(r.z.shape[1]):
                    v = r.z[mi, ni]
                    print(f"  Z{mi + 1}{ni + 1} = {v.real:+.9e} {v.imag:+.9e}j Ohm", file=out)
        if r.s is not None:
            for mi in range(r.s.shape[0]):
                for ni in range(r.s.shape[1]):
                    v = r.s[mi, ni]
                    print(f"  S{mi + 1}{ni + 1} = {v.real:+.9e} {v.imag:+.9e}j", file=out)
        if r.voltages is not None:
            for mi, v in enumerate(r.voltages):
                print(f"  U{mi + 1} = {v.real:+.9e} {v.imag:+.9e}j V", file=out)
        state = "converged" if r.converged else "NOT CONVERGED"
        print(
            f"  {state}: iters={r.iterations} resid={r.residual:.3e} "
            f"wall={r.wall_s:.2f}s",
            file=out,
        )


def _render_figures_for(result: SweepResult, csv_path: Path, figures_dir, log) -> None:
    from .figures import render_figures

    out_dir = Path(figures_dir) if figures_dir else csv_path.parent
    paths = render_figures(result, out_dir, stem=csv_path.stem)
    if log is not None:
        for p in paths:
            print(f"wrote {p}", file=log)


# --------------------------------------------------------------------------- #
# subcommands
# --------------------------------------------------------------------------- #


def _cmd_solve(args) -> int:
    log = None if args.quiet else sys.stderr
    scene = _load_scene(args, log)
    config = _build_config(args, args.freq, args.freq, 1)
    result = run_sweep(scene, config, log=log)
    if args.export_matrix:
        _export_matrix(scene, args.variant, args.export_matrix,
                       omega=2.0 * np.pi * args.freq)
    _print_network(result)
    if args.out:
        write_results(result, args.out)
        if log is not None:
            print(f"wrote {args.out}", file=log)
    return 0 if result.converged else 1


def _cmd_sweep(args) -> int:
    log = None if args.quiet else sys.stderr
    scene = _load_scene(args, log)
    defaults = scene.sweep or {}
    f_min = args.fmin if args.fmin is not None else defaults.get("f_min")
    f_max = args.fmax if args.fmax is not None else defaults.get("f_max")
    n_f = args.nf if args.nf is not None else defaults.get("n_f")
    missing = [
        flag
        for flag, value in (("--fmin", f_min), ("--fmax", f_max), ("--nf", n_f))
        if value is None
    ]
    if missing:
        raise ValueError(
            f"sweep range incomplete: pass {' '.join(missing)} or add a "
            "'sweep' section to the scene"
        )
    config = _build_config(args, float(f_min), float(f_max), int(n_f))
    result = run_sweep(scene, config, log=log)
    if args.export_matrix:
        _export_matrix(scene, args.variant, args.export_matrix,
                       omega=2.0 * np.pi * float(f_min))
    if args.out:
        out_path = Path(args.out)
        write_results(result, out_path)
        if log is not None:
            print(f"wrote {out_path}", file=log)
        if not args.no_figures:
            _render_figures_for(result, out_path, args.figures_dir, log)
    else:
        sys.stdout.write(",".join(_result_header(result)) + "\n")
        _write_rows(result, sys.stdout)
        if args.figures_dir:
            _render_figures_for(result, Path(args.figures_dir) / "sweep.csv",
                                args.figures_dir, log)
    return 0 if result.converged else 1


def _cmd_eig(args) -> int:
    log = None if args.quiet else sys.stderr
    scene = _load_scene(args, log)
    if not scene.is_lossless:
        raise ValueError("eig requires a lossless scene (real symmetric matrix)")
    if args.export_matrix:
        _export_matrix(scene, args.variant, args.export_matrix, omega=None)
    diagonals = build_material_diagonals(scene.grid, scene.materials, scene.walls)
    system = dense_assemble(scene.grid, diagonals, max_dense=args.max_dense)
    if system.n_active == 0:
        print("no active unknowns: every edge is masked", file=sys.stdout)
        return 0
    values = system.eigenvalues()
    cutoff = max(values[-1], 0.0) * 1e-8
    zero_count = int(np.count_nonzero(values <= cutoff))
    resonant = values[values > cutoff]
    print(
        f"n_active={system.n_active} zero_modes={zero_count} "
        f"resonances={resonant.size}",
        file=sys.stdout,
    )
    for w2 in resonant[: args.count]:
        f_hz = np.sqrt(w2) / (2.0 * np.pi)
        print(f"f = {f_hz:.9e} Hz  (omega^2 = {w2:.9e})", file=sys.stdout)
    return 0


def _cmd_stats(args) -> int:
    log = None if args.quiet else sys.stderr
    scene = _load_scene(args, log)
    omega = None
    if not scene.is_lossless:
        if scene.sweep:
            omega = 2.0 * np.pi * scene.sweep["f_min"]
        else:
            raise ValueError(
                "stats on a conductive scene needs a frequency: add a 'sweep' "
                "section to the scene"
            )
    diagonals = build_material_diagonals(
        scene.grid, scene.materials, scene.walls, omega=omega
    )
    curl = build_curl(scene.grid)
    op = build_operator(
        scene.grid, curl, diagonals, args.variant,
        workers=_resolve_workers(args.workers),
    )
    op.jacobi_diagonal()  # realize the cached diagonal so stats include it
    stats = op.stats()
    if args.export_matrix:
        _export_matrix(scene, args.variant, args.export_matrix,
                       omega=omega if omega else None)
    if args.json:
        print(json.dumps(stats.as_dict(), indent=2))
    else:
        for key, value in stats.as_dict().items():
            print(f"{key}={value}")
    return 0


# --------------------------------------------------------------------------- #
# parser
# --------------------------------------------------------------------------- #


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fitwave",
        description="Frequency-domain electromagnetic field solver on "
        "structured staggered grids",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scene", help="scene JSON file")
    common.add_argument("--variant", choices=VARIANTS, default="e2tt",
                        help="operator realization (default: %(default)s)")
    common.add_argument("--workers", type=int, default=None,
                        help=f"worker threads (default: ${ENV_WORKERS} or 1)")
    common.add_argument("--quiet", action="store_true",
                        help="suppress progress output")
    common.add_argument("--export-matrix", metavar="PATH",
                        help="write the variant's sparse factor in Matrix "
                             "Market form")

    solver_opts = argparse.ArgumentParser(add_help=False)
    solver_opts.add_argument("--solver", choices=METHODS, default="bcgs",
                             help="Krylov method (default: %(default)s)")
    solver_opts.add_argument("--tol", type=float, default=1e-12,
                             help="relative residual tolerance (default: %(default)s)")
    solver_opts.add_argument("--max-iter", type=int, default=10000,
                             help="iteration cap per solve (default: %(default)s)")
    solver_opts.add_argument("--restart", type=int, default=30,
                             help="gmres restart depth (default: %(default)s)")
    solver_opts.add_argument("--parallel-mode", choices=("slice", "solves"),
                             default="slice",
                             help="parallelize inside each solve (slice) or "
                                  "across whole solves (default: %(default)s)")
    solver_opts.add_argument("--enable-cgs", action="store_true",
                             help="unlock the cgs method (irregular convergence)")
    solver_opts.add_argument("--superpose", action="store_true",
                             help="drive all source ports in one right-hand "
                                  "side; report probe voltages instead of Z")

    p_solve = sub.add_parser("solve", parents=[common, solver_opts],
                             help="solve at a single frequency")
    p_solve.add_argument("--freq", type=float, required=True, help="frequency in Hz")
    p_solve.add_argument("--out", metavar="PATH", help="write the result row as CSV")
    p_solve.set_defaults(func=_cmd_solve)

    p_sweep = sub.add_parser("sweep", parents=[common, solver_opts],
                             help="sweep a frequency range")
    p_sweep.add_argument("--fmin", type=float, default=None, help="start frequency in Hz")
    p_sweep.add_argument("--fmax", type=float, default=None, help="end frequency in Hz")
    p_sweep.add_argument("--nf", type=int, default=None, help="number of samples")
    p_sweep.add_argument("--out", metavar="PATH", help="write the table as CSV "
                         "(default: print to stdout)")
    p_sweep.add_argument("--no-figures", action="store_true",
                         help="skip the PNG report next to the CSV")
    p_sweep.add_argument("--figures-dir", metavar="DIR", default=None,
                         help="directory for the PNG report (default: the CSV's)")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_eig = sub.add_parser("eig", parents=[common],
                           help="dense resonance reference (small grids)")
    p_eig.add_argument("--count", type=int, default=10,
                       help="resonances to print (default: %(default)s)")
    p_eig.add_argument("--max-dense", type=int, default=MAX_DENSE,
                       help="active-unknown guard (default: %(default)s)")
    p_eig.set_defaults(func=_cmd_eig)

    p_stats = sub.add_parser("stats", parents=[common],
                             help="operator work/memory model")
    p_stats.add_argument("--json", action="store_true", help="machine-readable output")
    p_stats.set_defaults(func=_cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
