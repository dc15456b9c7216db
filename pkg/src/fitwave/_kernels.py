"""Numba kernels behind the sparse products, pointwise stages and reductions.

Every kernel operates on a half-open row range ``[r0, r1)`` so the same code
serves the serial path (full range) and the slice-parallel path (one call per
worker with its own range).  All kernels are gather-style: each output slot is
written by exactly one call site, so partitioning the rows over threads can
never change the result.  The kernels release the GIL, which is what makes
thread-based workers effective.

Determinism notes
-----------------
* matvec/pointwise kernels: one ordered loop per output element; bitwise
  reproducible for any row partition.
* reduction kernels accumulate one partial sum per *layer* (a fixed block
  structure independent of the worker count); the caller adds the partials in
  fixed order.  This is what makes dot products bitwise identical for 1, 2 or
  4 workers.
"""

from __future__ import annotations

import numba as nb
import numpy as np

_JIT = dict(nogil=True, cache=True)


@nb.njit(**_JIT)
def csr_matvec(indptr, indices, data, x, out, r0, r1):  # pragma: no cover - jit
    """out[r0:r1] = (A @ x)[r0:r1] for CSR (indptr, indices, data)."""
    zero = data[0] * x[0] * 0
    for i in range(r0, r1):
        acc = zero
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        out[i] = acc


@nb.njit(**_JIT)
def csr_matvec_minus_w2(indptr, indices, data, x, w2, out, r0, r1):  # pragma: no cover
    """out[r0:r1] = (A @ x - w2 * x)[r0:r1], fused single pass."""
    zero = data[0] * x[0] * 0
    for i in range(r0, r1):
        acc = zero
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        out[i] = acc - w2 * x[i]


@nb.njit(**_JIT)
def diag_mult(d, x, out, r0, r1):  # pragma: no cover - jit
    """out[r0:r1] = d[r0:r1] * x[r0:r1] (aliasing x/out is safe)."""
    for i in range(r0, r1):
        out[i] = d[i] * x[i]


@nb.njit(**_JIT)
def diag_mult_minus_w2(d, s, w2, x, out, r0, r1):  # pragma: no cover - jit
    """out[r0:r1] = d[r0:r1]*s[r0:r1] - w2*x[r0:r1] (aliasing x/out is safe)."""
    for i in range(r0, r1):
        out[i] = d[i] * s[i] - w2 * x[i]


@nb.njit(**_JIT)
def axpby(a, x, b, y, out, r0, r1):  # pragma: no cover - jit
    """out[r0:r1] = a*x[r0:r1] + b*y[r0:r1] (aliasing with x or y is safe)."""
    for i in range(r0, r1):
        out[i] = a * x[i] + b * y[i]


@nb.njit(**_JIT)
def dot_partials(x, y, partials, layer_size, l0, l1):  # pragma: no cover - jit
    """Unconjugated bilinear partial sums: partials[l] = sum over layer l of x*y."""
    zero = x[0] * y[0] * 0
    for l in range(l0, l1):
        acc = zero
        for i in range(l * layer_size, (l + 1) * layer_size):
            acc += x[i] * y[i]
        partials[l] = acc


@nb.njit(**_JIT)
def dotc_partials(x, y, partials, layer_size, l0, l1):  # pragma: no cover - jit
    """Conjugated partial sums: partials[l] = sum over layer l of conj(x)*y."""
    zero = x[0] * y[0] * 0
    for l in range(l0, l1):
        acc = zero
        for i in range(l * layer_size, (l + 1) * layer_size):
            acc += np.conj(x[i]) * y[i]
        partials[l] = acc
