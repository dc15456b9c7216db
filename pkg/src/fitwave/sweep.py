"""Frequency sweeps: per-sample solves, network parameters, peak finding.

The sweep builds every frequency-independent object exactly once — the curl,
the material diagonals (lossless scenes), the operator and its Jacobi
diagonal — and reseats only the ``-omega^2`` shift per sample;
``build_counts`` records those constructions so the single-build contract is
testable.  Scenes with conductivity get their material diagonals rebuilt per
frequency (the loss term is frequency dependent) and that, too, shows up in
``build_counts``.

Lossless scenes use a real fast path: with a path-signed unit pattern ``v_n``
per source port, the real system ``(A - omega^2 I) x_n = v_n`` is solved once
per port and every network quantity follows by scaling:
``Z[m, n] = -j omega (v_m . x_n)``.  Lossy scenes solve the complex system
with the full right-hand side.

Two parallel modes share one determinism contract (results bitwise equal for
any worker count):

* ``slice``   — workers cooperate inside each apply/reduction (z-slabs);
* ``solves``  — whole (frequency, port) solves run concurrently on cloned
  operators with serial engines.

Both reduce dot products over the same fixed z-layer partials, so the mode
switch does not change results either.
"""

from __future__ import annotations

import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .krylov import METHODS, JacobiPreconditioner, solve
from .materials import build_material_diagonals
from .operator import VARIANTS, build_operator
from .parallel import Engine
from .ports import s_from_z, unit_pattern
from .scene import Scene
from .topology import build_curl

__all__ = ["SweepConfig", "FrequencyResult", "SweepResult", "run_sweep", "find_peaks"]

_PARALLEL_MODES = ("slice", "solves")


@dataclass
class SweepConfig:
    """Sampling plan plus solver/operator/parallel selections."""

    f_min: float
    f_max: float
    n_f: int
    solver: str = "bcgs"
    variant: str = "e2tt"
    tol: float = 1e-12
    max_iter: int = 10000
    restart: int = 30
    workers: int = 1
    parallel_mode: str = "slice"
    enable_cgs: bool = False
    superpose: bool = False

    def __post_init__(self):
        if self.f_min <= 0:
            raise ValueError(f"f_min must be > 0 (got {self.f_min}); "
                             "omega = 0 makes the system singular")
        if self.f_max < self.f_min:
            raise ValueError(f"f_max ({self.f_max}) must be >= f_min ({self.f_min})")
        if self.n_f < 1:
            raise ValueError(f"n_f must be >= 1, got {self.n_f}")
        if self.solver not in METHODS:
            raise ValueError(f"solver must be one of {METHODS}, got {self.solver!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.parallel_mode not in _PARALLEL_MODES:
            raise ValueError(
                f"parallel_mode must be one of {_PARALLEL_MODES}, got {self.parallel_mode!r}"
            )

    @property
    def frequencies(self) -> np.ndarray:
        if self.n_f == 1:
            return np.asarray([self.f_min])
        return np.linspace(self.f_min, self.f_max, self.n_f)


@dataclass
class FrequencyResult:
    """One sweep row: network parameters and solver bookkeeping."""

    freq_hz: float
    z: np.ndarray | None            # (n_probes, n_sources); None in superpose mode
    s: np.ndarray | None            # square scenes with probe set == source set
    voltages: np.ndarray | None     # superposed-mode probe voltages
    iterations: int
    residual: float
    converged: bool
    wall_s: float


@dataclass
class SweepResult:
    """All rows plus construction/work bookkeeping for the whole sweep."""

    config: SweepConfig
    frequencies: np.ndarray
    results: list[FrequencyResult]
    port_names: list[str]
    probe_names: list[str]
    build_counts: dict = field(default_factory=dict)
    applies: int = 0
    mults: int = 0

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.results)

    @property
    def z(self) -> np.ndarray:
        """(n_f, n_probes, n_sources) impedance array (NaN where absent)."""
        m, n = len(self.probe_names), len(self.port_names)
        out = np.full((len(self.results), m, n), np.nan, dtype=np.complex128)
        for i, r in enumerate(self.results):
            if r.z is not None:
                out[i] = r.z
        return out

    @property
    def s(self) -> np.ndarray:
        m, n = len(self.probe_names), len(self.port_names)
        out = np.full((len(self.results), m, n), np.nan, dtype=np.complex128)
        for i, r in enumerate(self.results):
            if r.s is not None:
                out[i] = r.s
        return out


def _solve_real_fast(op, pattern, precond, config):
    """Lossless path: one real solve of the shifted system per pattern."""
    return solve(
        op, pattern, method=config.solver, precond=precond, tol=config.tol,
        max_iter=config.max_iter, restart=config.restart, enable_cgs=config.enable_cgs,
    )


def run_sweep(scene: Scene, config: SweepConfig, log=sys.stderr) -> SweepResult:
    """Solve the scene across the sweep and collect network parameters.

    Solver failures do not abort the sweep: the row keeps the attempted
    result with ``converged=False`` and the sweep continues.  Pass
    ``log=None`` to silence the per-frequency progress lines.
    """
    sources = scene.source_ports
    probes = scene.probe_ports
    if not sources:
        raise ValueError("scene declares no source ports; nothing to excite")
    if not probes:
        raise ValueError("scene declares no probe paths; nothing to measure")

    grid = scene.grid
    freqs = config.frequencies
    lossless = scene.is_lossless
    build_counts = {"curl": 0, "diagonals": 0, "operator": 0}

    curl = build_curl(grid)
    build_counts["curl"] += 1

    slice_workers = config.workers if config.parallel_mode == "slice" else 1
    engine = Engine.for_grid(grid, slice_workers)

    diagonals = None
    op = None
    jacobi = None
    if lossless:
        diagonals = build_material_diagonals(grid, scene.materials, scene.walls)
        build_counts["diagonals"] += 1
        op = build_operator(grid, curl, diagonals, config.variant, engine=engine)
        build_counts["operator"] += 1
        jacobi = op.jacobi_diagonal()

    # the frequency-independent port patterns (real for lossless scenes)
    def patterns(diag):
        src = [unit_pattern(grid, diag, p) for p in sources]
        prb = [unit_pattern(grid, diag, p) for p in probes]
        return src, prb

    if lossless:
        src_patterns, prb_patterns = patterns(diagonals)

    s_wanted = not config.superpose and list(probes) == list(sources)

    def assemble_for(omega):
        """Operator (+ patterns) for one frequency; cheap for lossless."""
        nonlocal diagonals
        if lossless:
            return op, jacobi, src_patterns, prb_patterns
        diag = build_material_diagonals(grid, scene.materials, scene.walls, omega=omega)
        build_counts["diagonals"] += 1
        local_op = build_operator(grid, curl, diag, config.variant, engine=engine)
        build_counts["operator"] += 1
        src, prb = patterns(diag)
        return local_op, local_op.jacobi_diagonal(), src, prb

    def solve_one(local_op, precond, pattern, amplitude, omega):
        """One excitation at one frequency; returns (e-prime-like, report).

        On the real path the solution is the unscaled pattern response x with
        e' = -j omega amplitude x; the complex path returns e' directly.
        """
        if local_op.dtype.kind == "f":
            report = _solve_real_fast(local_op, pattern, precond, config)
            return report.x, report
        b = (-1j * omega * amplitude) * pattern.astype(np.complex128)
        report = solve(
            local_op, b, method=config.solver, precond=precond, tol=config.tol,
            max_iter=config.max_iter, restart=config.restart,
            enable_cgs=config.enable_cgs,
        )
        return report.x, report

    def row_from_solves(omega, solves, prb, amps):
        """Build the Z (or voltage) row out of per-source solutions."""
        m = len(prb)
        n = len(solves)
        z = np.empty((m, n), dtype=np.complex128)
        for ni, (x, report, amp) in enumerate(solves):
            for mi, vp in enumerate(prb):
                u = np.dot(vp, x)
                if report.x.dtype.kind == "f":
                    # real fast path: e' = -j omega amp x, then u_m / amp
                    z[mi, ni] = -1j * omega * u
                else:
                    z[mi, ni] = u / amps[ni]
        return z

    results: list[FrequencyResult] = []
    total_applies = 0
    total_mults = 0

    if config.parallel_mode == "solves" and config.workers > 1:
        pool = ThreadPoolExecutor(max_workers=config.workers)
    else:
        pool = None

    try:
        for fi, f in enumerate(freqs):
            t0 = time.perf_counter()
            omega = 2.0 * np.pi * float(f)
            local_op, local_jacobi, src, prb = assemble_for(omega)
            local_op.set_omega(omega)
            precond = JacobiPreconditioner(local_jacobi, omega, engine=local_op.engine)
            amps = [complex(p.amplitude) for p in sources]

            if config.superpose:
                row = _superposed_row(
                    local_op, precond, src, prb, amps, omega, config)
                z = s = None
                voltages, reports = row
            else:
                if pool is not None:
                    def task(pattern, amp):
                        cl = local_op.clone(workers=1)
                        cl._jacobi = local_jacobi
                        pc = JacobiPreconditioner(local_jacobi, omega, engine=cl.engine)
                        return solve_one(cl, pc, pattern, amp, omega)
                    futures = [pool.submit(task, v, a) for v, a in zip(src, amps)]
                    pairs = [fu.result() for fu in futures]
                else:
                    pairs = [solve_one(local_op, precond, v, a, omega)
                             for v, a in zip(src, amps)]
                solves = [(x, rep, amp) for (x, rep), amp in zip(pairs, amps)]
                z = row_from_solves(omega, solves, prb, amps)
                reports = [rep for _, rep, _ in solves]
                voltages = None
                s = None
                if s_wanted:
                    try:
                        s = s_from_z(z, scene.z0)
                    except ValueError as exc:
                        if log is not None:
                            print(f"f={f:.6g} Hz: {exc}", file=log)
                        s = np.full_like(z, np.nan)

            iters = sum(r.iterations for r in reports)
            resid = max((r.final_residual for r in reports), default=0.0)
            converged = all(r.converged for r in reports)
            total_applies += sum(r.applies for r in reports)
            total_mults += sum(r.mults_consumed for r in reports)
            wall = time.perf_counter() - t0
            results.append(
                FrequencyResult(
                    freq_hz=float(f), z=z, s=s, voltages=voltages,
                    iterations=iters, residual=float(resid),
                    converged=converged, wall_s=wall,
                )
            )
            if log is not None:
                state = "ok" if converged else "FAILED"
                print(
                    f"[{fi + 1}/{len(freqs)}] f={f:.6g} Hz {state} "
                    f"iters={iters} resid={resid:.3e} {wall:.2f}s",
                    file=log,
                )
    finally:
        if pool is not None:
            pool.shutdown()
        engine.close()

    return SweepResult(
        config=config,
        frequencies=freqs,
        results=results,
        port_names=[p.name for p in sources],
        probe_names=[p.name for p in probes],
        build_counts=build_counts,
        applies=total_applies,
        mults=total_mults,
    )


def _superposed_row(op, precond, src, prb, amps, omega, config):
    """All sources active in a single right-hand side; probe voltages only.

    On the real path a complex amplitude mix needs two real solves (real and
    imaginary parts of the combined pattern); a single solve otherwise.
    """
    reports = []
    if op.dtype.kind == "f":
        combined = np.zeros(op.n, dtype=np.complex128)
        for v, a in zip(src, amps):
            combined += a * v
        xs = []
        for part in (combined.real, combined.imag):
            if np.any(part != 0):
                rep = _solve_real_fast(op, np.ascontiguousarray(part), precond, config)
                reports.append(rep)
                xs.append(rep.x)
            else:
                xs.append(np.zeros(op.n))
        e_prime = -1j * omega * (xs[0] + 1j * xs[1])
    else:
        b = np.zeros(op.n, dtype=np.complex128)
        for v, a in zip(src, amps):
            b += (-1j * omega * a) * v.astype(np.complex128)
        rep = solve(
            op, b, method=config.solver, precond=precond, tol=config.tol,
            max_iter=config.max_iter, restart=config.restart,
            enable_cgs=config.enable_cgs,
        )
        reports.append(rep)
        e_prime = rep.x
    voltages = np.asarray([np.dot(vp, e_prime) for vp in prb], dtype=np.complex128)
    return voltages, reports


def find_peaks(frequencies, values) -> list[tuple[float, float]]:
    """Strict interior maxima of a sampled column, parabolically refined.

    Fits the quadratic through each maximum and its two neighbours and
    returns the vertex; falls back to the raw sample where the fit
    degenerates.  Requires at least three samples.
    """
    f = np.asarray(frequencies, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if f.size != v.size:
        raise ValueError(f"lengths differ: {f.size} frequencies, {v.size} values")
    if f.size < 3:
        raise ValueError(f"need at least 3 samples to locate peaks, got {f.size}")
    peaks = []
    for i in range(1, f.size - 1):
        if not (v[i] > v[i - 1] and v[i] > v[i + 1]):
            continue
        (a, b, c) = np.polyfit(f[i - 1 : i + 2] - f[i], v[i - 1 : i + 2], 2)
        if a < 0:
            dx = -b / (2.0 * a)
            peaks.append((float(f[i] + dx), float(a * dx * dx + b * dx + c)))
        else:
            peaks.append((float(f[i]), float(v[i])))
    return peaks
