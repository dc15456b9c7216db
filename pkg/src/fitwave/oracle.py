"""Dense reference implementations for validating the sparse fast paths.

Everything here is deliberately written the slow, obvious way — explicit
loops over grid entities, dense matrices, closed-form mode frequencies — and
shares no assembly code with the production operators.  Agreement between
the two paths is therefore meaningful evidence, not a tautology.

Size guard: dense work is refused above ``max_dense`` unknowns (default
8192, i.e. 1 GiB of complex entries) so a typo in a test does not take the
host down.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import C0
from .grid import Grid, _TRANSVERSE
from .materials import MaterialDiagonals

__all__ = [
    "MAX_DENSE",
    "DenseSystem",
    "dense_assemble",
    "dense_curl",
    "dense_gradient",
    "dense_operator_matrix",
    "dense_shifted_matrix",
    "dense_eigenvalues",
    "analytic_cavity_eigenvalues",
    "cavity_omega2_continuous",
    "cavity_omega2_discrete",
    "cavity_spectrum_discrete",
    "uniform_spacing",
]

#: refusal threshold for dense work, in active (unmasked) unknowns
MAX_DENSE = 4000

_DELTA = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


def _guard(n: int, max_dense: int) -> None:
    if n > max_dense:
        raise ValueError(
            f"dense reference refused for {n} unknowns (limit {max_dense}); "
            "pass a larger max_dense explicitly if this is intentional"
        )


def dense_curl(grid: Grid, max_dense: int = MAX_DENSE) -> np.ndarray:
    """(n_e, n_e) circulation matrix, one facet row at a time.

    Row (i,j,k,w) collects the boundary circulation of the facet normal to
    ``w`` anchored at node (i,j,k), with (w,u,v) a cyclic triple:
    ``+e_u`` at the anchor, ``+e_v`` shifted one step along u, ``-e_u``
    shifted one step along v, ``-e_v`` at the anchor.  Entries whose node
    would fall outside the grid are simply absent; degenerate facet rows
    still carry the entries of their existing boundary edges (the material
    factors remove them later).
    """
    _guard(grid.n_edges, max_dense)
    Nx, Ny, Nz = grid.n_nodes_axis
    C = np.zeros((grid.n_edges, grid.n_edges), dtype=np.float64)
    for k in range(Nz):
        for j in range(Ny):
            for i in range(Nx):
                for w in range(3):
                    u, v = _TRANSVERSE[w]
                    row = grid.edge_index(i, j, k, w)
                    node = (i, j, k)
                    C[row, grid.edge_index(i, j, k, u)] += 1.0
                    C[row, grid.edge_index(i, j, k, v)] -= 1.0
                    shifted_u = tuple(node[a] + _DELTA[u][a] for a in range(3))
                    if shifted_u[u] < grid.n_nodes_axis[u]:
                        C[row, grid.edge_index(*shifted_u, v)] += 1.0
                    shifted_v = tuple(node[a] + _DELTA[v][a] for a in range(3))
                    if shifted_v[v] < grid.n_nodes_axis[v]:
                        C[row, grid.edge_index(*shifted_v, u)] -= 1.0
    return C


def dense_gradient(grid: Grid, max_dense: int = MAX_DENSE) -> np.ndarray:
    """(n_e, n_nodes) discrete gradient: -1 at the tail node, +1 at the head.

    Degenerate edges keep only their tail entry (the head would be a ghost
    node at zero potential), which is exactly what makes the circulation of
    any gradient vanish row by row, boundary rows included.
    """
    _guard(grid.n_edges, max_dense)
    Nx, Ny, Nz = grid.n_nodes_axis
    G = np.zeros((grid.n_edges, grid.n_nodes), dtype=np.float64)
    for k in range(Nz):
        for j in range(Ny):
            for i in range(Nx):
                for w in range(3):
                    row = grid.edge_index(i, j, k, w)
                    G[row, grid.node_index(i, j, k)] -= 1.0
                    head = tuple((i, j, k)[a] + _DELTA[w][a] for a in range(3))
                    if head[w] < grid.n_nodes_axis[w]:
                        G[row, grid.node_index(*head)] += 1.0
    return G


def dense_operator_matrix(
    grid: Grid, diagonals: MaterialDiagonals, max_dense: int = MAX_DENSE
) -> np.ndarray:
    """Dense unshifted wave matrix, assembled literally from its definition:
    permittivity scaling, transposed circulation, inverse permeability,
    circulation, permittivity scaling."""
    _guard(grid.n_edges, max_dense)
    C = dense_curl(grid, max_dense)
    e = diagonals.inv_sqrt_eps
    m = diagonals.inv_mu
    inner = m[:, None] * (C * e[None, :])
    return e[:, None] * (C.T @ inner)


def dense_shifted_matrix(
    grid: Grid,
    diagonals: MaterialDiagonals,
    omega: float,
    max_dense: int = MAX_DENSE,
) -> np.ndarray:
    """Dense ``A - omega^2 I`` (the system every solver works on)."""
    A = dense_operator_matrix(grid, diagonals, max_dense)
    A[np.diag_indices_from(A)] -= omega * omega
    return A


@dataclass
class DenseSystem:
    """The wave matrix restricted to the active (unmasked) unknowns.

    ``index_map[r]`` is the full-space index of restricted row/column ``r``;
    masked slots are exact zero rows/columns of the full matrix and carry no
    information, so dropping them keeps the factorizations honest and small.
    """

    matrix: np.ndarray
    index_map: np.ndarray
    n_full: int

    @property
    def n_active(self) -> int:
        return self.matrix.shape[0]

    def expand(self, x_active: np.ndarray) -> np.ndarray:
        """Scatter a restricted vector back to the full index space."""
        full = np.zeros(self.n_full, dtype=x_active.dtype)
        full[self.index_map] = x_active
        return full

    def solve(self, b_full: np.ndarray, omega: float = 0.0) -> np.ndarray:
        """Direct dense solve of ``(A - omega^2 I) x = b`` on the active set.

        Entries of ``b`` on masked slots must be zero (they have no
        equation); the returned vector is zero there as well.
        """
        off = np.delete(np.arange(self.n_full), self.index_map)
        if np.any(b_full[off] != 0):
            raise ValueError("right-hand side has nonzero entries on masked slots")
        shifted = self.matrix.copy()
        shifted[np.diag_indices_from(shifted)] -= omega * omega
        return self.expand(np.linalg.solve(shifted, b_full[self.index_map]))

    def eigenvalues(self) -> np.ndarray:
        """Ascending eigenvalues of the active block (real symmetric only)."""
        if np.iscomplexobj(self.matrix):
            raise ValueError("dense eigenvalue reference requires a lossless scene")
        return np.linalg.eigvalsh(self.matrix)


def dense_assemble(
    grid: Grid, diagonals: MaterialDiagonals, max_dense: int = MAX_DENSE
) -> DenseSystem:
    """Dense wave matrix on the active subspace, with its full-space map."""
    index_map = np.flatnonzero(diagonals.edge_mask)
    _guard(index_map.size, max_dense)
    _guard(grid.n_edges, max(max_dense, 4096))
    A = dense_operator_matrix(grid, diagonals, max_dense=max(max_dense, 4096))
    return DenseSystem(
        matrix=A[np.ix_(index_map, index_map)],
        index_map=index_map,
        n_full=grid.n_edges,
    )


def dense_eigenvalues(
    grid: Grid,
    diagonals: MaterialDiagonals,
    max_dense: int = MAX_DENSE,
) -> np.ndarray:
    """Ascending eigenvalues (omega^2) of the active dense wave matrix.

    Lossless scenes only — the matrix must be real symmetric for the
    spectral reference to be meaningful.  Masked rows/columns (exact zeros)
    are removed first, which drops their trivial zero eigenvalues and
    shrinks the factorization.
    """
    if not diagonals.is_real:
        raise ValueError("dense eigenvalue reference requires a lossless scene")
    return dense_assemble(grid, diagonals, max_dense).eigenvalues()


# --------------------------------------------------------------------------- #
# closed-form rectangular cavity references
# --------------------------------------------------------------------------- #


def uniform_spacing(grid: Grid) -> tuple[float, float, float]:
    """The per-axis cell size of a uniform grid (raises if nonuniform)."""
    out = []
    for w, d in enumerate(grid.spacing):
        if not np.allclose(d, d[0], rtol=1e-12, atol=0.0):
            raise ValueError(f"axis {w} spacing is not uniform")
        out.append(float(d[0]))
    return tuple(out)


def cavity_omega2_continuous(extent, mode) -> float:
    """omega^2 of cavity mode (m,n,p) in a vacuum PEC box, exact physics:
    omega^2 = c0^2 * sum_w (m_w * pi / a_w)^2."""
    return C0 * C0 * sum(
        (int(m) * np.pi / float(a)) ** 2 for m, a in zip(mode, extent)
    )


def cavity_omega2_discrete(extent, spacing, mode) -> float:
    """omega^2 the uniformly discretized vacuum PEC box actually resonates
    at: each continuous wavenumber k_w = m_w*pi/a_w is replaced by its grid
    counterpart (2/delta_w) * sin(k_w * delta_w / 2)."""
    total = 0.0
    for m, a, d in zip(mode, extent, spacing):
        kw = int(m) * np.pi / float(a)
        total += (2.0 / d * np.sin(0.5 * kw * d)) ** 2
    return C0 * C0 * total


def analytic_cavity_eigenvalues(extent, spacing, modes) -> list[tuple[float, float]]:
    """(continuous, discrete) omega^2 pairs for a list of cavity mode triples.

    Vacuum box with metallic walls, uniformly discretized with cell sizes
    ``spacing``.  A valid triple has nonnegative indices with at least two
    nonzero (a single nonzero index leaves no transverse field).
    """
    out = []
    for mode in modes:
        mode = tuple(int(m) for m in mode)
        if len(mode) != 3 or any(m < 0 for m in mode) or sum(m > 0 for m in mode) < 2:
            raise ValueError(
                f"invalid cavity mode triple {mode}: need three nonnegative "
                "indices, at least two nonzero"
            )
        out.append(
            (
                cavity_omega2_continuous(extent, mode),
                cavity_omega2_discrete(extent, spacing, mode),
            )
        )
    return out


def cavity_spectrum_discrete(grid: Grid) -> np.ndarray:
    """All nonzero eigenvalues (omega^2, ascending, multiplicities included)
    of the uniformly discretized vacuum box with metallic walls.

    Modes are indexed by (m,n,p) with m < nx, n < ny, p < nz; at least two
    indices must be nonzero, and a mode with all three nonzero carries two
    independent polarizations.  For an n^3 grid that is 2*(n-1)^3 +
    3*(n-1)^2 eigenvalues, matching the active unknown count minus the
    gradient null space.
    """
    extent = grid.extent
    spacing = uniform_spacing(grid)
    nx, ny, nz = grid.n_cells
    values = []
    for m in range(nx):
        for n in range(ny):
            for p in range(nz):
                nonzero = (m > 0) + (n > 0) + (p > 0)
                if nonzero < 2:
                    continue
                w2 = cavity_omega2_discrete(extent, spacing, (m, n, p))
                values.append(w2)
                if nonzero == 3:
                    values.append(w2)
    return np.sort(np.asarray(values))
