"""Slice decomposition and the deterministic in-process worker engine.

The domain is cut into contiguous z *node layers* (each layer holds
``3*Nx*Ny`` consecutive unknowns in the interleaved layout).  Workers own
disjoint layer ranges; the curl stencil only couples adjacent layers, so each
worker reads at most one halo layer on each side of its range and writes only
its own rows.  Results are bitwise independent of the worker count:

* elementwise/matvec work writes every output slot from exactly one ordered
  loop, so the partition cannot affect rounding;
* reductions are accumulated per layer (a partition that depends only on the
  grid, never on the worker count) and the layer partials are added in fixed
  order afterwards.

The engine runs workers as threads; the kernels in :mod:`fitwave._kernels`
release the GIL, so slices execute concurrently on multi-core hosts while a
single-core host simply serializes them with identical results.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .grid import Grid

__all__ = ["SlicePlan", "plan_slices", "Engine"]


@dataclass(frozen=True)
class SlicePlan:
    """Per-worker contiguous z-layer ranges and induced unknown ranges.

    Attributes
    ----------
    n_layers : int
        Total number of node layers being partitioned.
    layer_size : int
        Unknowns per layer; layer ``l`` covers indices
        ``[l*layer_size, (l+1)*layer_size)``.
    layer_ranges : tuple of (int, int)
        Half-open layer range per worker; disjoint, consecutive, covering
        ``[0, n_layers)``; sizes differ by at most one (larger slices first).
        Workers beyond the layer count receive empty ranges.
    halo : int
        Layers of neighbour data a worker's sparse product may read beyond
        its own range (1: the stencil couples adjacent layers only).
    """

    n_layers: int
    layer_size: int
    layer_ranges: tuple[tuple[int, int], ...]
    halo: int = 1

    @property
    def index_ranges(self) -> tuple[tuple[int, int], ...]:
        """Unknown-index range per worker."""
        ls = self.layer_size
        return tuple((k0 * ls, k1 * ls) for k0, k1 in self.layer_ranges)

    @property
    def n_workers(self) -> int:
        return len(self.layer_ranges)


def plan_slices(grid: Grid | int, n_workers: int, layer_size: int | None = None) -> SlicePlan:
    """Balanced contiguous partition of the z node layers over workers.

    Parameters
    ----------
    grid : Grid or int
        The grid whose layers are partitioned, or directly the layer count
        (then ``layer_size`` must be given).
    n_workers : int
        Number of workers; must be >= 1.  Workers in excess of the layer
        count get empty ranges.
    """
    if n_workers < 1:
        raise ValueError(f"n_workers must be >= 1, got {n_workers}")
    if isinstance(grid, Grid):
        n_layers = grid.n_nodes_axis[2]
        layer_size = grid.layer_size
    else:
        n_layers = int(grid)
        if layer_size is None:
            raise ValueError("layer_size is required when passing a raw layer count")
    base, extra = divmod(n_layers, n_workers)
    ranges = []
    k0 = 0
    for w in range(n_workers):
        size = base + (1 if w < extra else 0)
        ranges.append((k0, k0 + size))
        k0 += size
    assert k0 == n_layers
    return SlicePlan(n_layers=n_layers, layer_size=layer_size, layer_ranges=tuple(ranges))


class Engine:
    """Executes kernels over a :class:`SlicePlan`, serially or threaded.

    All vector arguments must have length ``n_layers * layer_size`` and a
    uniform dtype (float64 or complex128).  With ``workers == 1`` kernels run
    inline; otherwise each worker executes its slice on a pool thread.
    """

    def __init__(self, plan: SlicePlan, workers: int | None = None):
        self.plan = plan
        self.workers = plan.n_workers if workers is None else workers
        self.n = plan.n_layers * plan.layer_size
        self._pool: ThreadPoolExecutor | None = None
        if self.workers > 1:
            self._pool = ThreadPoolExecutor(max_workers=self.workers)

    # -- construction helpers ------------------------------------------------

    @classmethod
    def for_grid(cls, grid: Grid, workers: int = 1) -> "Engine":
        return cls(plan_slices(grid, workers), workers)

    @classmethod
    def serial(cls, n: int) -> "Engine":
        """Engine over a single layer covering the whole vector (serial)."""
        return cls(SlicePlan(n_layers=1, layer_size=n, layer_ranges=((0, 1),)), 1)

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- dispatch ------------------------------------------------------------

    def _run(self, fn, args, ranges) -> None:
        """Run fn(*args, lo, hi) once per non-empty range, possibly threaded."""
        live = [(lo, hi) for lo, hi in ranges if hi > lo]
        if self._pool is None or len(live) <= 1:
            for lo, hi in live:
                fn(*args, lo, hi)
            return
        futures = [self._pool.submit(fn, *args, lo, hi) for lo, hi in live]
        for fut in futures:
            fut.result()

    def _row_ranges(self):
        return self.plan.index_ranges

    # -- vector ops ----------------------------------------------------------

    def spmv(self, op, x: np.ndarray, out: np.ndarray) -> np.ndarray:
        """out = op @ x over the plan's row ranges."""
        self._run(
            _k.csr_matvec, (op.row_ptr, op.col_idx, op.values, x, out), self._row_ranges()
        )
        return out

    def spmv_minus_w2(self, op, x: np.ndarray, w2, out: np.ndarray) -> np.ndarray:
        """out = op @ x - w2 * x, fused."""
        self._run(
            _k.csr_matvec_minus_w2,
            (op.row_ptr, op.col_idx, op.values, x, w2, out),
            self._row_ranges(),
        )
        return out

    def diag_mult(self, d: np.ndarray, x: np.ndarray, out: np.ndarray) -> np.ndarray:
        self._run(_k.diag_mult, (d, x, out), self._row_ranges())
        return out

    def diag_mult_minus_w2(self, d, s, w2, x, out) -> np.ndarray:
        """out = d*s - w2*x elementwise."""
        self._run(_k.diag_mult_minus_w2, (d, s, w2, x, out), self._row_ranges())
        return out

    def axpby(self, a, x: np.ndarray, b, y: np.ndarray, out: np.ndarray) -> np.ndarray:
        """out = a*x + b*y elementwise (out may alias x or y)."""
        a = x.dtype.type(a)
        b = y.dtype.type(b)
        self._run(_k.axpby, (a, x, b, y, out), self._row_ranges())
        return out

    # -- deterministic reductions ---------------------------------------------

    def dot(self, x: np.ndarray, y: np.ndarray, conjugate: bool = True):
        """Deterministic dot product via fixed per-layer partial sums.

        ``conjugate=True`` gives the sesquilinear product conj(x)·y (used for
        norms and the general nonsymmetric methods); ``conjugate=False`` the
        bilinear product x·y (used by the symmetric methods on complex-
        symmetric systems).  For real data the two coincide.
        """
        plan = self.plan
        partials = np.zeros(plan.n_layers, dtype=np.result_type(x.dtype, y.dtype))
        kern = _k.dotc_partials if conjugate else _k.dot_partials
        self._run(kern, (x, y, partials, plan.layer_size), plan.layer_ranges)
        total = np.sum(partials)  # fixed layer order; worker-count independent
        return total.item()

    def norm(self, x: np.ndarray) -> float:
        return float(np.sqrt(abs(self.dot(x, x, conjugate=True).real)))
