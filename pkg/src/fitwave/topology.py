"""Discrete curl/gradient topology and the CSR operator container.

The curl matrix is purely combinatorial (entries are +/-1): all metric and
material information lives in the diagonal matrices built by
:mod:`fitwave.materials`.  Rows and columns share the interleaved edge/facet
index space of :mod:`fitwave.grid`, so the curl is square even on grids with
degenerate boundary slots.

Orientation: the facet normal to ``w`` at node ``n`` is circulated with the
right-hand rule about +w.  With ``(w, u, v)`` a cyclic axis triple the row
holds ``+e_u(n)``, ``+e_v(n + du)``, ``-e_u(n + dv)``, ``-e_v(n)``; entries
whose base node would fall outside the grid are dropped (2-3 entries on the
maximal boundary).

The nodal gradient maps node potentials to edge voltage differences,
``+1`` at the head node and ``-1`` at the tail.  For a degenerate edge the
head node does not exist and is treated as a ghost node at zero potential,
leaving only the ``-1`` tail entry.  That convention is what makes
``C @ G == 0`` hold *exactly* on the full index space, boundary rows
included.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .grid import Grid, _TRANSVERSE

__all__ = [
    "SparseOperator",
    "build_curl",
    "build_gradient",
    "spmv",
    "spmv_transpose",
    "write_matrix_market",
]

_INT32_MAX = 2**31 - 1


@dataclass
class SparseOperator:
    """Minimal CSR matrix: 32-bit structure, float64/complex128 values.

    Rows are kept in canonical form: ``row_ptr`` non-decreasing with
    ``row_ptr[0] == 0`` and strictly increasing column indices inside each
    row.  The transpose needed by the gather-style transpose product is
    materialized lazily and cached (scatter into shared rows would race under
    row-partitioned workers; gathering from an explicit transpose is
    deterministic by construction).
    """

    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    _transpose: "SparseOperator | None" = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.row_ptr = np.ascontiguousarray(self.row_ptr, dtype=np.int32)
        self.col_idx = np.ascontiguousarray(self.col_idx, dtype=np.int32)
        self.values = np.ascontiguousarray(self.values)
        if self.values.dtype not in (np.float64, np.complex128):
            self.values = self.values.astype(np.float64)
        if self.row_ptr.size != self.n_rows + 1:
            raise ValueError("row_ptr length must be n_rows + 1")
        if self.nnz > _INT32_MAX:
            raise ValueError(f"nnz={self.nnz} exceeds the 32-bit index space")

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def dtype(self):
        return self.values.dtype

    # -- products ----------------------------------------------------------

    def matvec(self, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """y = self @ x (serial; workers go through parallel.Engine)."""
        x = np.ascontiguousarray(x, dtype=self.values.dtype)
        if x.shape != (self.n_cols,):
            raise ValueError(f"x has shape {x.shape}, expected ({self.n_cols},)")
        if out is None:
            out = np.empty(self.n_rows, dtype=self.values.dtype)
        _k.csr_matvec(self.row_ptr, self.col_idx, self.values, x, out, 0, self.n_rows)
        return out

    def rmatvec(self, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """y = self.T @ x via the cached explicit transpose (gather-style)."""
        return self.transpose().matvec(x, out)

    def transpose(self) -> "SparseOperator":
        """Explicit transpose in canonical CSR form (cached)."""
        if self._transpose is None:
            nnz_rows = np.repeat(
                np.arange(self.n_rows, dtype=np.int32), np.diff(self.row_ptr)
            )
            order = np.argsort(self.col_idx, kind="stable")
            counts = np.bincount(self.col_idx, minlength=self.n_cols)
            t_ptr = np.zeros(self.n_cols + 1, dtype=np.int64)
            np.cumsum(counts, out=t_ptr[1:])
            self._transpose = SparseOperator(
                n_rows=self.n_cols,
                n_cols=self.n_rows,
                row_ptr=t_ptr,
                col_idx=nnz_rows[order],
                values=self.values[order],
            )
        return self._transpose

    def scaled(self, row_scale: np.ndarray | None, col_scale: np.ndarray | None) -> "SparseOperator":
        """New operator with values ``row_scale[i] * v * col_scale[j]``.

        The index structure is shared with ``self`` (the sparsity pattern is
        unchanged by diagonal scaling); only the value array is new.
        """
        vals = self.values
        if col_scale is not None:
            vals = vals * col_scale[self.col_idx]
        if row_scale is not None:
            vals = vals * np.repeat(row_scale, np.diff(self.row_ptr))
        return SparseOperator(self.n_rows, self.n_cols, self.row_ptr, self.col_idx, vals)

    # -- bookkeeping ---------------------------------------------------------

    def model_memory_bytes(self) -> int:
        """CSR memory model: (4+8) bytes per nonzero + 4*(n_rows+1) pointer."""
        return 12 * self.nnz + 4 * (self.n_rows + 1)

    def actual_memory_bytes(self, include_transpose: bool = True) -> int:
        total = self.row_ptr.nbytes + self.col_idx.nbytes + self.values.nbytes
        if include_transpose and self._transpose is not None:
            total += self._transpose.actual_memory_bytes(include_transpose=False)
        return total

    @property
    def transpose_materialized(self) -> bool:
        return self._transpose is not None

    def toarray(self) -> np.ndarray:
        """Dense copy (debug/small problems only)."""
        out = np.zeros(self.shape, dtype=self.values.dtype)
        for i in range(self.n_rows):
            sl = slice(self.row_ptr[i], self.row_ptr[i + 1])
            out[i, self.col_idx[sl]] = self.values[sl]
        return out


def spmv(op: SparseOperator, x: np.ndarray) -> np.ndarray:
    """y = op @ x."""
    return op.matvec(x)


def spmv_transpose(op: SparseOperator, x: np.ndarray) -> np.ndarray:
    """y = op.T @ x (unconjugated transpose; gather over the cached Ct)."""
    return op.rmatvec(x)


def _compact_rows(cols: np.ndarray, vals: np.ndarray, valid: np.ndarray, n_cols: int) -> SparseOperator:
    """Assemble per-row candidate entries (n_rows, k) into canonical CSR."""
    n_rows = cols.shape[0]
    sentinel = np.iinfo(np.int64).max
    keyed = np.where(valid, cols, sentinel)
    order = np.argsort(keyed, axis=1, kind="stable")
    cols_sorted = np.take_along_axis(keyed, order, axis=1)
    vals_sorted = np.take_along_axis(vals, order, axis=1)
    keep = cols_sorted != sentinel
    counts = keep.sum(axis=1)
    row_ptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=row_ptr[1:])
    return SparseOperator(
        n_rows=n_rows,
        n_cols=n_cols,
        row_ptr=row_ptr,
        col_idx=cols_sorted[keep],
        values=vals_sorted[keep],
    )


def build_curl(grid: Grid) -> SparseOperator:
    """Square (n_e x n_e) discrete curl with entries +/-1.

    Row ``3*node+w`` circulates the facet normal to ``w`` anchored at
    ``node``; interior rows have 4 entries, maximal-boundary rows 2-3.
    """
    Nx, Ny, Nz = grid.n_nodes_axis
    n_e = grid.n_edges
    node = np.arange(grid.n_nodes, dtype=np.int64)
    coords = (node % Nx, (node // Nx) % Ny, node // (Nx * Ny))
    step = (1, Nx, Nx * Ny)

    cols = np.empty((grid.n_nodes, 3, 4), dtype=np.int64)
    vals = np.empty((grid.n_nodes, 3, 4), dtype=np.float64)
    valid = np.empty((grid.n_nodes, 3, 4), dtype=bool)
    for w in range(3):
        u, v = _TRANSVERSE[w]
        has_u = coords[u] < grid.n_nodes_axis[u] - 1
        has_v = coords[v] < grid.n_nodes_axis[v] - 1
        cols[:, w, 0] = 3 * node + u
        vals[:, w, 0] = 1.0
        valid[:, w, 0] = True
        cols[:, w, 1] = 3 * node + v
        vals[:, w, 1] = -1.0
        valid[:, w, 1] = True
        cols[:, w, 2] = 3 * (node + step[u]) + v
        vals[:, w, 2] = 1.0
        valid[:, w, 2] = has_u
        cols[:, w, 3] = 3 * (node + step[v]) + u
        vals[:, w, 3] = -1.0
        valid[:, w, 3] = has_v
    return _compact_rows(
        cols.reshape(n_e, 4), vals.reshape(n_e, 4), valid.reshape(n_e, 4), n_e
    )


def build_gradient(grid: Grid) -> SparseOperator:
    """(n_e x Np) nodal gradient: +1 at head node, -1 at tail node.

    Degenerate edges keep only the -1 tail entry (ghost head at zero
    potential), which preserves ``curl @ grad == 0`` exactly everywhere.
    """
    Nx, Ny, Nz = grid.n_nodes_axis
    node = np.arange(grid.n_nodes, dtype=np.int64)
    coords = (node % Nx, (node // Nx) % Ny, node // (Nx * Ny))
    step = (1, Nx, Nx * Ny)

    cols = np.empty((grid.n_nodes, 3, 2), dtype=np.int64)
    vals = np.empty((grid.n_nodes, 3, 2), dtype=np.float64)
    valid = np.empty((grid.n_nodes, 3, 2), dtype=bool)
    for w in range(3):
        has_head = coords[w] < grid.n_nodes_axis[w] - 1
        cols[:, w, 0] = node
        vals[:, w, 0] = -1.0
        valid[:, w, 0] = True
        cols[:, w, 1] = node + step[w]
        vals[:, w, 1] = 1.0
        valid[:, w, 1] = has_head
    return _compact_rows(
        cols.reshape(grid.n_edges, 2),
        vals.reshape(grid.n_edges, 2),
        valid.reshape(grid.n_edges, 2),
        grid.n_nodes,
    )


def write_matrix_market(op: SparseOperator, path, comment: str | None = None) -> None:
    """Write the operator in Matrix Market coordinate format (1-based)."""
    complex_field = np.iscomplexobj(op.values)
    field_name = "complex" if complex_field else "real"
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate {field_name} general\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{op.n_rows} {op.n_cols} {op.nnz}\n")
        rows = np.repeat(np.arange(op.n_rows), np.diff(op.row_ptr))
        if complex_field:
            for r, c, v in zip(rows, op.col_idx, op.values):
                fh.write(f"{r + 1} {c + 1} {v.real:.17e} {v.imag:.17e}\n")
        else:
            for r, c, v in zip(rows, op.col_idx, op.values):
                fh.write(f"{r + 1} {c + 1} {v:.17e}\n")
