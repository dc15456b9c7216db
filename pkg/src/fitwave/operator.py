"""The symmetrized wave operator ``x -> (A - omega^2 I) x`` in three variants.

``A`` couples the square-root permittivity scaling, the curl, the averaged
inverse permeability, the transposed curl, and the square-root permittivity
scaling again.  The three interchangeable realizations trade memory for
multiplies per apply (n = number of unknowns):

=========  =======================  ==============  =====================
variant    storage                  model memory    model multiplies
=========  =======================  ==============  =====================
``e2s``    assembled sparse A       164 n bytes     13 n (+ n for -w^2 x)
``e2t``    curl + two diagonals      80 n bytes     12 n
``e2tt``   pre-scaled half operator  72 n bytes      9 n
=========  =======================  ==============  =====================

The model numbers charge 4-byte indices, 8-byte values, 4 entries per sparse
row and 13 entries per assembled row regardless of shorter boundary rows;
they are the figures ``op_stats`` reports as the *model*, next to the actual
allocation and the nnz-exact multiply count of this implementation, so the
boundary-row discrepancy is visible rather than hidden.  Operation counters
advance by the same convention: 12 n (``e2t``), 9 n (``e2tt``) and
(13+1) n (``e2s``, where the shift update is counted on top of the product)
per apply, exactly, so counter assertions are reproducible.

All variants act identically (to rounding) on identical inputs, including on
masked slots, which every variant maps to exact zeros.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .materials import MaterialDiagonals, scale_curl
from .parallel import Engine
from .topology import SparseOperator

__all__ = [
    "VARIANTS",
    "WaveOperator",
    "AssembledOperator",
    "FiveStageOperator",
    "TwoStageOperator",
    "build_operator",
    "assemble_sparse_A",
    "jacobi_diagonal",
    "op_stats",
    "OperatorStats",
]

VARIANTS = ("e2s", "e2t", "e2tt")

#: multiplies per apply as reported by the memory/work model
_MULT_MODEL = {"e2s": 13, "e2t": 12, "e2tt": 9}
#: multiplies per apply as advanced by the counters (the assembled variant
#: counts its shift update on top of the 13-entry product)
_MULT_COUNTED = {"e2s": 14, "e2t": 12, "e2tt": 9}
#: additions per apply under the same idealized convention
_ADD_COUNTED = {"e2s": 13, "e2t": 7, "e2tt": 7}


@dataclass
class Counters:
    applies: int = 0
    mults: int = 0
    adds: int = 0

    def reset(self) -> None:
        self.applies = self.mults = self.adds = 0


@dataclass(frozen=True)
class OperatorStats:
    """Work/memory bookkeeping of one operator instance."""

    variant: str
    n_e: int
    nnz: int
    mults_per_apply: int          # model: {13, 12, 9} * n_e
    counted_mults_per_apply: int  # counter advance per apply
    actual_mults_per_apply: int   # nnz-exact multiplies of this grid
    model_memory_bytes: int       # {164, 80, 72} * n_e
    actual_memory_bytes: int      # arrays actually held (transposes, scratch)
    applies: int
    mults: int
    adds: int

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


class WaveOperator:
    """Base class: counters, omega handling, Jacobi diagonal, stats."""

    variant: str = ""

    def __init__(self, grid: Grid, diagonals: MaterialDiagonals, omega: float,
                 engine: Engine | None, workers: int):
        self.grid = grid
        self.diagonals = diagonals
        self.engine = engine if engine is not None else Engine.for_grid(grid, workers)
        self.n = grid.n_edges
        self.counters = Counters()
        self.omega = float(omega)
        self._jacobi: np.ndarray | None = None
        dtype = np.complex128 if not diagonals.is_real else np.float64
        self.dtype = np.dtype(dtype)
        self.inv_sqrt_eps = diagonals.inv_sqrt_eps.astype(self.dtype, copy=False)
        self._s1 = np.empty(self.n, dtype=self.dtype)
        self._s2 = np.empty(self.n, dtype=self.dtype)

    # -- the product ---------------------------------------------------------

    def apply(self, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """out = (A - omega^2 I) @ x."""
        if x.shape != (self.n,):
            raise ValueError(f"x has shape {x.shape}, expected ({self.n},)")
        if x.dtype != self.dtype:
            raise TypeError(
                f"operator is {self.dtype.name}, got {x.dtype.name} input; "
                "build the operator with matching materials or cast explicitly"
            )
        if out is None:
            out = np.empty(self.n, dtype=self.dtype)
        self._apply(x, out)
        c = self.counters
        c.applies += 1
        c.mults += _MULT_COUNTED[self.variant] * self.n
        c.adds += _ADD_COUNTED[self.variant] * self.n
        return out

    def _apply(self, x, out):  # pragma: no cover - abstract
        raise NotImplementedError

    def __call__(self, x, out=None):
        return self.apply(x, out)

    # -- omega ----------------------------------------------------------------

    def set_omega(self, omega: float) -> None:
        """Reseat the frequency shift; all stored arrays are reused."""
        self.omega = float(omega)

    @property
    def _w2(self) -> float:
        return self.omega * self.omega

    # -- Jacobi diagonal -------------------------------------------------------

    def jacobi_diagonal(self) -> np.ndarray:
        """diag(A): column sums of squares of the scaled half operator.

        One pass over the stored nonzeros, no matrix-vector product; exact
        zeros on masked slots.  Cached (frequency independent).
        """
        if self._jacobi is None:
            self._jacobi = self._compute_jacobi()
        return self._jacobi

    def _compute_jacobi(self) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    # -- bookkeeping -----------------------------------------------------------

    def _main_matrix(self) -> SparseOperator:  # pragma: no cover - abstract
        raise NotImplementedError

    def _model_memory(self) -> int:  # pragma: no cover - abstract
        raise NotImplementedError

    def _actual_mults(self) -> int:  # pragma: no cover - abstract
        raise NotImplementedError

    def _held_arrays(self) -> list[np.ndarray]:
        arrays = [self.inv_sqrt_eps, self._s1, self._s2]
        if self._jacobi is not None:
            arrays.append(self._jacobi)
        return arrays

    def stats(self) -> OperatorStats:
        m = self._main_matrix()
        actual = m.actual_memory_bytes(include_transpose=True)
        seen = {id(m.row_ptr), id(m.col_idx), id(m.values)}
        if m.transpose_materialized:
            t = m.transpose()
            seen |= {id(t.row_ptr), id(t.col_idx), id(t.values)}
        for arr in self._held_arrays():
            if id(arr) not in seen:
                actual += arr.nbytes
                seen.add(id(arr))
        c = self.counters
        return OperatorStats(
            variant=self.variant,
            n_e=self.n,
            nnz=m.nnz,
            mults_per_apply=_MULT_MODEL[self.variant] * self.n,
            counted_mults_per_apply=_MULT_COUNTED[self.variant] * self.n,
            actual_mults_per_apply=self._actual_mults(),
            model_memory_bytes=self._model_memory(),
            actual_memory_bytes=actual,
            applies=c.applies,
            mults=c.mults,
            adds=c.adds,
        )

    def clone(self, workers: int = 1) -> "WaveOperator":  # pragma: no cover - abstract
        """Operator sharing all immutable arrays, with fresh scratch,
        counters and engine (for concurrent solves)."""
        raise NotImplementedError


class FiveStageOperator(WaveOperator):
    """Pointwise, curl, pointwise, transposed curl, pointwise, shift.

    Holds the topological curl (values +/-1) and two diagonal arrays; the
    scaled half operator is never materialized.  Exactly two scratch vectors.
    """

    variant = "e2t"

    def __init__(self, grid, curl: SparseOperator, diagonals, omega=0.0,
                 engine=None, workers=1):
        super().__init__(grid, diagonals, omega, engine, workers)
        self._curl = curl
        self._curl_t = curl.transpose()
        self.inv_mu = diagonals.inv_mu.astype(
            np.complex128 if np.iscomplexobj(diagonals.inv_sqrt_mu) else np.float64,
            copy=False,
        )

    def _apply(self, x, out):
        e = self.engine
        e.diag_mult(self.inv_sqrt_eps, x, self._s1)
        e.spmv(self._curl, self._s1, self._s2)
        e.diag_mult(self.inv_mu, self._s2, self._s2)
        e.spmv(self._curl_t, self._s2, self._s1)
        e.diag_mult_minus_w2(self.inv_sqrt_eps, self._s1, self._w2, x, out)

    def _compute_jacobi(self):
        C = self._curl
        inv_eps = self.inv_sqrt_eps * self.inv_sqrt_eps
        contrib = (C.values * C.values) * np.repeat(self.inv_mu, np.diff(C.row_ptr))
        P = np.zeros(self.n, dtype=contrib.dtype)
        np.add.at(P, C.col_idx, contrib)
        return P * inv_eps

    def _main_matrix(self):
        return self._curl

    def _model_memory(self):
        # one diagonal + CSR curl at 4 entries/row + one more diagonal
        return 8 * self.n + (4 + 4 + 8) * 4 * self.n + 8 * self.n

    def _actual_mults(self):
        return 3 * self.n + 2 * self._curl.nnz + 2 * self.n

    def _held_arrays(self):
        return super()._held_arrays() + [self.inv_mu]

    def clone(self, workers: int = 1):
        return FiveStageOperator(
            self.grid, self._curl, self.diagonals, self.omega,
            engine=Engine(self.engine.plan, workers), workers=workers,
        )


class TwoStageOperator(WaveOperator):
    """Half-operator product, transposed half-operator product, shift.

    Holds only the pre-scaled half operator (and the permittivity factor for
    voltage scaling at the ports).  Exactly two scratch vectors.
    """

    variant = "e2tt"

    def __init__(self, grid, scaled: SparseOperator, diagonals, omega=0.0,
                 engine=None, workers=1):
        super().__init__(grid, diagonals, omega, engine, workers)
        self._scaled = scaled
        self._scaled_t = scaled.transpose()

    def _apply(self, x, out):
        e = self.engine
        e.spmv(self._scaled, x, self._s1)
        e.spmv(self._scaled_t, self._s1, self._s2)
        e.axpby(1.0, self._s2, -self._w2, x, out)

    def _compute_jacobi(self):
        S = self._scaled
        P = np.zeros(self.n, dtype=S.values.dtype)
        np.add.at(P, S.col_idx, S.values * S.values)
        return P

    def _main_matrix(self):
        return self._scaled

    def _model_memory(self):
        return (4 + 4 + 8) * 4 * self.n + 8 * self.n

    def _actual_mults(self):
        return 2 * self._scaled.nnz + self.n

    def clone(self, workers: int = 1):
        return TwoStageOperator(
            self.grid, self._scaled, self.diagonals, self.omega,
            engine=Engine(self.engine.plan, workers), workers=workers,
        )


class AssembledOperator(WaveOperator):
    """Classical assembled sparse product with fused shift update."""

    variant = "e2s"

    def __init__(self, grid, assembled: SparseOperator, diagonals, omega=0.0,
                 engine=None, workers=1, jacobi: np.ndarray | None = None):
        super().__init__(grid, diagonals, omega, engine, workers)
        self._assembled = assembled
        self._jacobi = jacobi

    def _apply(self, x, out):
        self.engine.spmv_minus_w2(self._assembled, x, self._w2, out)

    def _compute_jacobi(self):
        # fall back to extracting the stored diagonal (equals the one-pass
        # column-sum over the scaled half operator to rounding)
        A = self._assembled
        P = np.zeros(self.n, dtype=A.values.dtype)
        for i in range(self.n):
            sl = slice(A.row_ptr[i], A.row_ptr[i + 1])
            cols = A.col_idx[sl]
            hit = np.searchsorted(cols, i)
            if hit < cols.size and cols[hit] == i:
                P[i] = A.values[sl][hit]
        return P

    def _main_matrix(self):
        return self._assembled

    def _model_memory(self):
        return (4 + 8) * 13 * self.n + 8 * self.n

    def _actual_mults(self):
        return self._assembled.nnz + self.n

    def clone(self, workers: int = 1):
        return AssembledOperator(
            self.grid, self._assembled, self.diagonals, self.omega,
            engine=Engine(self.engine.plan, workers), workers=workers,
            jacobi=self._jacobi,
        )


def assemble_sparse_A(scaled: SparseOperator) -> SparseOperator:
    """Explicit sparse product of the transposed half operator with itself.

    Interior rows have exactly 13 nonzeros (the edge itself, 4 parallel
    neighbours, 8 cross-direction neighbours); boundary/masked rows fewer.
    Uses scipy for the one-time sparse-sparse product, then converts back to
    the canonical container with explicit zeros pruned.
    """
    import scipy.sparse as sp

    m = sp.csr_matrix(
        (scaled.values, scaled.col_idx, scaled.row_ptr), shape=scaled.shape
    )
    a = (m.T @ m).tocsr()
    a.sum_duplicates()
    a.eliminate_zeros()
    a.sort_indices()
    return SparseOperator(a.shape[0], a.shape[1], a.indptr, a.indices, a.data)


def jacobi_diagonal(op: WaveOperator) -> np.ndarray:
    """diag(A) of the unshifted operator (module-level convenience)."""
    return op.jacobi_diagonal()


def op_stats(op: WaveOperator) -> OperatorStats:
    return op.stats()


def build_operator(
    grid: Grid,
    curl: SparseOperator,
    diagonals: MaterialDiagonals,
    variant: str = "e2tt",
    omega: float = 0.0,
    engine: Engine | None = None,
    workers: int = 1,
) -> WaveOperator:
    """Construct one of the three operator variants from shared parts."""
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if variant == "e2t":
        return FiveStageOperator(grid, curl, diagonals, omega, engine, workers)
    scaled = scale_curl(curl, diagonals)
    if variant == "e2tt":
        return TwoStageOperator(grid, scaled, diagonals, omega, engine, workers)
    # assembled: compute the Jacobi diagonal from the transient half operator
    P = np.zeros(grid.n_edges, dtype=scaled.values.dtype)
    np.add.at(P, scaled.col_idx, scaled.values * scaled.values)
    assembled = assemble_sparse_A(scaled)
    return AssembledOperator(grid, assembled, diagonals, omega, engine, workers, jacobi=P)
