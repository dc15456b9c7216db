"""Staggered structured hexahedral grid.

The primal grid is the tensor product of three strictly increasing plane
coordinate lists.  State variables (electric grid voltages) live on primal
edges; magnetic fluxes live on primal facets.  The dual grid places its nodes
at the barycenters of the primal cells, so dual edge lengths are half-sums of
the adjacent primal cell extents (and half a single extent at the domain
boundary).

Indexing convention
-------------------
Nodes are numbered x-fastest, z-slowest::

    node(i, j, k) = i + Nx*j + Nx*Ny*k          0 <= i < Nx, ...

and edges/facets interleave the direction as the fastest axis::

    index(i, j, k, w) = 3*node(i, j, k) + w     w in {0: x, 1: y, 2: z}

With ``Nw = nw + 1`` nodes per axis (``nw`` cells) every node carries one
edge per direction, so the index space has ``n_e = 3*Nx*Ny*Nz`` slots.  Edges
whose head node would fall outside the grid (e.g. an x edge at ``i = nx``)
are *degenerate*: they stay in the index space to keep all operators square
and aligned, and are removed physically by zeroed material entries, never by
renumbering.  The layout keeps each z slab of unknowns contiguous, which is
what the slice-parallel apply and the deterministic reductions rely on.

Arrays that hold one scalar per node are shaped ``(Nz, Ny, Nx)`` so that
``arr.ravel()`` enumerates nodes in exactly the order above; per-edge arrays
of shape ``(Nz, Ny, Nx, 3)`` ravel to the interleaved edge ordering.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Grid", "build_grid", "AXES"]

#: Accepted spellings for the direction argument.
AXES = {0: 0, 1: 1, 2: 2, "x": 0, "y": 1, "z": 2}

_INT32_MAX = 2**31 - 1


def _axis(direction) -> int:
    try:
        return AXES[direction]
    except (KeyError, TypeError):
        raise ValueError(f"direction must be one of 0,1,2,'x','y','z'; got {direction!r}") from None


def _check_planes(name: str, planes) -> np.ndarray:
    arr = np.asarray(planes, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError(f"{name}: need at least two plane coordinates, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: plane coordinates must be finite")
    if not np.all(np.diff(arr) > 0.0):
        raise ValueError(f"{name}: plane coordinates must be strictly increasing")
    return arr


class Grid:
    """Geometry and metric of one staggered structured grid.

    Parameters
    ----------
    x_planes, y_planes, z_planes : array_like
        Strictly increasing plane coordinates per axis, at least two each
        (i.e. at least one cell per axis).  SI meters.

    Attributes
    ----------
    planes : tuple of ndarray
        The validated plane coordinates, one array per axis.
    spacing : tuple of ndarray
        Primal cell extents per axis (``spacing[w][c] = planes[w][c+1] -
        planes[w][c]``), all strictly positive.
    dual_spacing : tuple of ndarray
        Dual edge extents per axis, one value per *node*: half-sum of the two
        adjacent cell extents in the interior, half the single adjacent
        extent at the boundary.
    n_cells, n_nodes_axis : tuple of int
        Cells ``(nx, ny, nz)`` and nodes ``(Nx, Ny, Nz)`` per axis.
    n_nodes, n_edges : int
        Total node count ``Np = Nx*Ny*Nz`` and unknown count ``n_e = 3*Np``
        (degenerate slots included).
    layer_size : int
        Unknowns per z node layer, ``3*Nx*Ny``; layer ``k`` occupies the
        contiguous index range ``[k*layer_size, (k+1)*layer_size)``.
    """

    def __init__(self, x_planes, y_planes, z_planes):
        self.planes = (
            _check_planes("x_planes", x_planes),
            _check_planes("y_planes", y_planes),
            _check_planes("z_planes", z_planes),
        )
        self.spacing = tuple(np.diff(p) for p in self.planes)
        self.n_cells = tuple(int(s.size) for s in self.spacing)
        self.n_nodes_axis = tuple(n + 1 for n in self.n_cells)

        dual = []
        for d in self.spacing:
            dd = np.empty(d.size + 1, dtype=np.float64)
            dd[0] = 0.5 * d[0]
            dd[-1] = 0.5 * d[-1]
            dd[1:-1] = 0.5 * (d[:-1] + d[1:])
            dual.append(dd)
        self.dual_spacing = tuple(dual)

        Nx, Ny, Nz = self.n_nodes_axis
        self.n_nodes = Nx * Ny * Nz
        self.n_edges = 3 * self.n_nodes
        if self.n_edges > _INT32_MAX:
            raise ValueError(
                f"grid has {self.n_edges} unknowns, beyond the 32-bit index space"
            )
        self.layer_size = 3 * Nx * Ny
        #: node-array shape, z slowest (C order ravel == node numbering)
        self.node_shape = (Nz, Ny, Nx)
        self.cell_shape = (self.n_cells[2], self.n_cells[1], self.n_cells[0])

    # ------------------------------------------------------------------ #
    # indexing
    # ------------------------------------------------------------------ #

    def node_index(self, i: int, j: int, k: int) -> int:
        Nx, Ny, Nz = self.n_nodes_axis
        if not (0 <= i < Nx and 0 <= j < Ny and 0 <= k < Nz):
            raise IndexError(f"node ({i},{j},{k}) outside grid {self.n_nodes_axis}")
        return i + Nx * (j + Ny * k)

    def edge_index(self, i: int, j: int, k: int, direction) -> int:
        """Interleaved unknown index of edge/facet ``direction`` at node (i,j,k)."""
        return 3 * self.node_index(i, j, k) + _axis(direction)

    def edge_of_index(self, index: int) -> tuple[int, int, int, int]:
        """Inverse of :meth:`edge_index`: returns ``(i, j, k, direction)``."""
        if not (0 <= index < self.n_edges):
            raise IndexError(f"edge index {index} outside [0, {self.n_edges})")
        node, direction = divmod(index, 3)
        Nx, Ny, _ = self.n_nodes_axis
        rest, i = divmod(node, Nx)
        k, j = divmod(rest, Ny)
        return i, j, k, direction

    def is_degenerate_edge(self, i: int, j: int, k: int, direction) -> bool:
        w = _axis(direction)
        idx = (i, j, k)[w]
        return idx == self.n_cells[w]

    # ------------------------------------------------------------------ #
    # scalar metric accessors (convenience / oracle-facing)
    # ------------------------------------------------------------------ #

    def primal_edge_len(self, direction, i: int, j: int, k: int) -> float:
        """Length of the primal edge; 0.0 for a degenerate max-boundary slot."""
        w = _axis(direction)
        self.node_index(i, j, k)
        idx = (i, j, k)[w]
        if idx == self.n_cells[w]:
            return 0.0
        return float(self.spacing[w][idx])

    def primal_facet_area(self, direction, i: int, j: int, k: int) -> float:
        """Area of the primal facet normal to ``direction``; 0.0 if degenerate."""
        w = _axis(direction)
        self.node_index(i, j, k)
        u, v = _TRANSVERSE[w]
        iu, iv = (i, j, k)[u], (i, j, k)[v]
        if iu == self.n_cells[u] or iv == self.n_cells[v]:
            return 0.0
        return float(self.spacing[u][iu] * self.spacing[v][iv])

    def dual_edge_len(self, direction, i: int, j: int, k: int) -> float:
        """Length of the dual edge crossing the primal facet at (i,j,k)."""
        w = _axis(direction)
        self.node_index(i, j, k)
        return float(self.dual_spacing[w][(i, j, k)[w]])

    def dual_facet_area(self, direction, i: int, j: int, k: int) -> float:
        """Area of the dual facet crossed by the primal edge at (i,j,k)."""
        w = _axis(direction)
        self.node_index(i, j, k)
        u, v = _TRANSVERSE[w]
        return float(self.dual_spacing[u][(i, j, k)[u]] * self.dual_spacing[v][(i, j, k)[v]])

    # ------------------------------------------------------------------ #
    # vectorized per-slot arrays (builder-facing)
    # ------------------------------------------------------------------ #

    def _axis_profile(self, w: int, values: np.ndarray, pad_value: float) -> np.ndarray:
        """Broadcast a per-axis profile to a full (Nz,Ny,Nx) node array."""
        Nx, Ny, Nz = self.n_nodes_axis
        prof = values
        if prof.size == self.n_cells[w]:  # cell-based => pad the degenerate tail slot
            prof = np.concatenate([prof, [pad_value]])
        shape = [1, 1, 1]
        shape[2 - w] = prof.size
        out = np.broadcast_to(prof.reshape(shape), (Nz, Ny, Nx))
        return out

    def edge_lengths(self) -> np.ndarray:
        """(n_e,) primal edge lengths, 0.0 on degenerate slots."""
        comps = [self._axis_profile(w, self.spacing[w], 0.0) for w in range(3)]
        return self.interleave(*comps)

    def dual_facet_areas(self) -> np.ndarray:
        """(n_e,) dual facet areas crossed by each primal edge."""
        comps = []
        for w in range(3):
            u, v = _TRANSVERSE[w]
            comps.append(
                self._axis_profile(u, self.dual_spacing[u], 0.0)
                * self._axis_profile(v, self.dual_spacing[v], 0.0)
            )
        return self.interleave(*comps)

    def facet_areas(self) -> np.ndarray:
        """(n_e,) primal facet areas, 0.0 on degenerate slots."""
        comps = []
        for w in range(3):
            u, v = _TRANSVERSE[w]
            comps.append(
                self._axis_profile(u, self.spacing[u], 0.0)
                * self._axis_profile(v, self.spacing[v], 0.0)
            )
        return self.interleave(*comps)

    def dual_edge_lengths(self) -> np.ndarray:
        """(n_e,) dual edge lengths crossing each primal facet."""
        comps = [self._axis_profile(w, self.dual_spacing[w], 0.0) for w in range(3)]
        return self.interleave(*comps)

    def interleave(self, ax: np.ndarray, ay: np.ndarray, az: np.ndarray) -> np.ndarray:
        """Merge three (Nz,Ny,Nx) component arrays into one (n_e,) vector."""
        out = np.stack(
            [np.ascontiguousarray(a) for a in (ax, ay, az)], axis=-1
        )
        return out.reshape(self.n_edges)

    def components(self, vec: np.ndarray) -> np.ndarray:
        """View an (n_e,) vector as (Nz, Ny, Nx, 3) components."""
        Nx, Ny, Nz = self.n_nodes_axis
        return vec.reshape(Nz, Ny, Nx, 3)

    # ------------------------------------------------------------------ #

    @property
    def extent(self) -> tuple[float, float, float]:
        """Domain size per axis in meters."""
        return tuple(float(p[-1] - p[0]) for p in self.planes)

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        nx, ny, nz = self.n_cells
        return f"Grid({nx}x{ny}x{nz} cells, n_e={self.n_edges})"


#: transverse axis pair (u, v) for each direction w, with (w, u, v) cyclic
_TRANSVERSE = {0: (1, 2), 1: (2, 0), 2: (0, 1)}


def build_grid(x_planes, y_planes, z_planes) -> Grid:
    """Validate plane lists and construct a :class:`Grid`."""
    return Grid(x_planes, y_planes, z_planes)
