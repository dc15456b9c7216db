"""Cell materials, staggered-grid averaging and boundary masking.

Materials are constant per primal cell.  The permittivity matrix couples an
edge voltage to the electric flux through its dual facet, so its diagonal
entry averages the ≤4 cells around the edge, weighted by the quarter-facet
areas the dual facet cuts out of each cell.  The inverse-permeability matrix
couples a facet flux to the magnetomotive force along its dual edge, so its
entry averages the 2 cells pierced by the dual edge, weighted by half-edge
lengths.

Perfect electric conductors are handled by masking: an edge is removed (its
``inv_sqrt_eps`` zeroed) when it lies tangentially in a PEC wall, touches a
PEC cell, or is a degenerate max-boundary slot.  Masking keeps the operators
square and aligned; masked slots carry exact zeros through every product.
PMC walls are the natural boundary of the scheme and need no modification.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import EPS0, MU0
from .grid import Grid, _TRANSVERSE

__all__ = [
    "MaterialMap",
    "WallBC",
    "MaterialDiagonals",
    "average_permittivity",
    "average_permeability",
    "compute_edge_mask",
    "apply_boundary_mask",
    "build_material_diagonals",
    "scale_curl",
]

_WALL_NAMES = ("xmin", "xmax", "ymin", "ymax", "zmin", "zmax")


@dataclass
class MaterialMap:
    """Per-cell relative material data, arrays shaped (nz, ny, nx).

    ``eps_r`` and ``mu_r`` may be complex (lossy dielectrics); ``sigma`` is
    the electric conductivity in S/m and is folded into a complex
    permittivity at a given angular frequency; ``pec`` flags metal cells.
    """

    eps_r: np.ndarray
    mu_r: np.ndarray
    sigma: np.ndarray
    pec: np.ndarray

    @classmethod
    def vacuum(cls, grid: Grid) -> "MaterialMap":
        shape = grid.cell_shape
        return cls(
            eps_r=np.ones(shape, dtype=np.float64),
            mu_r=np.ones(shape, dtype=np.float64),
            sigma=np.zeros(shape, dtype=np.float64),
            pec=np.zeros(shape, dtype=bool),
        )

    @property
    def is_lossless(self) -> bool:
        return (
            not np.iscomplexobj(self.eps_r)
            and not np.iscomplexobj(self.mu_r)
            and not np.any(self.sigma != 0.0)
        )


@dataclass(frozen=True)
class WallBC:
    """Boundary condition per domain face: ``"pec"`` or ``"pmc"``."""

    xmin: str = "pec"
    xmax: str = "pec"
    ymin: str = "pec"
    ymax: str = "pec"
    zmin: str = "pec"
    zmax: str = "pec"

    def __post_init__(self):
        for name in _WALL_NAMES:
            value = getattr(self, name)
            if value not in ("pec", "pmc"):
                raise ValueError(f"walls.{name}: expected 'pec' or 'pmc', got {value!r}")

    def as_dict(self) -> dict[str, str]:
        return {name: getattr(self, name) for name in _WALL_NAMES}


@dataclass
class MaterialDiagonals:
    """The diagonal factors of the symmetrized wave operator.

    Attributes
    ----------
    inv_sqrt_eps : ndarray (n_e,)
        Permittivity factor per edge: 1/sqrt of the averaged permittivity
        diagonal, exactly 0.0 on masked slots.
    inv_sqrt_mu : ndarray (n_e,)
        sqrt of the averaged inverse-permeability diagonal per facet,
        exactly 0.0 on degenerate facet slots.
    edge_mask : ndarray of bool (n_e,)
        True where the edge carries an unknown.
    """

    inv_sqrt_eps: np.ndarray
    inv_sqrt_mu: np.ndarray
    edge_mask: np.ndarray

    @property
    def is_real(self) -> bool:
        return not (
            np.iscomplexobj(self.inv_sqrt_eps) or np.iscomplexobj(self.inv_sqrt_mu)
        )

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.edge_mask))

    @property
    def inv_mu(self) -> np.ndarray:
        """Averaged inverse-permeability diagonal (the five-stage pipeline's
        middle factor)."""
        return self.inv_sqrt_mu * self.inv_sqrt_mu


def _half_profile(grid: Grid, axis: int) -> np.ndarray:
    """Half cell extents along an axis, shaped for cell-array broadcasting."""
    shape = [1, 1, 1]
    shape[2 - axis] = grid.n_cells[axis]
    return (0.5 * grid.spacing[axis]).reshape(shape)


def _transverse_quarter_sum(grid: Grid, cell_field: np.ndarray, w: int) -> np.ndarray:
    """Sum cell values times transverse quarter-facet areas onto edge slots.

    Returns an (Nz, Ny, Nx) array for direction-``w`` edges: transverse axes
    are node-accumulated over the ≤4 adjacent cells with quarter weights, the
    along-``w`` axis keeps cell indexing and is zero-padded at the degenerate
    tail slot.
    """
    u, v = _TRANSVERSE[w]
    weighted = cell_field * _half_profile(grid, u) * _half_profile(grid, v)
    pad = [(0, 0), (0, 0), (0, 0)]
    pad[2 - u] = (1, 1)
    pad[2 - v] = (1, 1)
    padded = np.pad(weighted, pad)

    def windows(arr, axis_letter):
        ax = 2 - axis_letter
        n_nodes = grid.n_nodes_axis[axis_letter]
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[ax] = slice(0, n_nodes)
        hi[ax] = slice(1, n_nodes + 1)
        return arr[tuple(lo)] + arr[tuple(hi)]

    acc = windows(windows(padded, u), v)
    tail = [(0, 0), (0, 0), (0, 0)]
    tail[2 - w] = (0, 1)
    return np.pad(acc, tail)


def _axial_half_sum(grid: Grid, cell_field: np.ndarray, w: int) -> np.ndarray:
    """Sum cell values times along-``w`` half extents onto facet slots.

    Returns an array node-indexed along ``w`` (both adjacent half cells, one
    at the domain boundary) and cell-indexed transversally.
    """
    weighted = cell_field * _half_profile(grid, w)
    pad = [(0, 0), (0, 0), (0, 0)]
    pad[2 - w] = (1, 1)
    padded = np.pad(weighted, pad)
    ax = 2 - w
    n_nodes = grid.n_nodes_axis[w]
    lo = [slice(None)] * 3
    hi = [slice(None)] * 3
    lo[ax] = slice(0, n_nodes)
    hi[ax] = slice(1, n_nodes + 1)
    return padded[tuple(lo)] + padded[tuple(hi)]


def _complex_eps(mat: MaterialMap, omega: float | None) -> np.ndarray:
    """Absolute permittivity per cell, conductivity folded in if present."""
    eps = EPS0 * mat.eps_r
    if np.any(mat.sigma != 0.0):
        if omega is None or omega <= 0.0:
            raise ValueError(
                "scene has nonzero conductivity: an angular frequency is "
                "required to fold sigma into the complex permittivity"
            )
        eps = eps.astype(np.complex128) - 1j * mat.sigma / omega
    return eps


def average_permittivity(grid: Grid, mat: MaterialMap, omega: float | None = None) -> np.ndarray:
    """Permittivity diagonal per edge: averaged eps times dual-facet area
    over primal edge length; 0.0 on degenerate (zero-length) slots."""
    eps_cell = _complex_eps(mat, omega)
    comps = []
    for w in range(3):
        num = _transverse_quarter_sum(grid, eps_cell, w)
        length = grid._axis_profile(w, grid.spacing[w], np.inf)
        comps.append(num / length)
    return grid.interleave(*comps)


def average_permeability(grid: Grid, mat: MaterialMap) -> np.ndarray:
    """Inverse-permeability diagonal per facet: dual edge length over
    (length-averaged mu times facet area); 0.0 on degenerate facet slots."""
    mu_cell = MU0 * mat.mu_r
    comps = []
    for w in range(3):
        u, v = _TRANSVERSE[w]
        mu_len = _axial_half_sum(grid, mu_cell, w)  # sum of mu * half-extents
        dual_len = grid._axis_profile(w, grid.dual_spacing[w], 0.0)
        area_u = grid._axis_profile(u, grid.spacing[u], np.inf)
        area_v = grid._axis_profile(v, grid.spacing[v], np.inf)
        # pad the transverse cell axes up to node size with zeros (degenerate)
        padded = mu_len
        for a in (u, v):
            tail = [(0, 0), (0, 0), (0, 0)]
            tail[2 - a] = (0, 1)
            padded = np.pad(padded, tail)
        entry = dual_len * dual_len / (area_u * area_v * np.where(padded == 0, np.inf, padded))
        comps.append(entry)
    return grid.interleave(*comps)


def _transverse_any(grid: Grid, cell_flags: np.ndarray, w: int) -> np.ndarray:
    """True on direction-``w`` edge slots with any flagged adjacent cell."""
    u, v = _TRANSVERSE[w]
    padded = cell_flags.astype(np.int8)
    pad = [(0, 0), (0, 0), (0, 0)]
    pad[2 - u] = (1, 1)
    pad[2 - v] = (1, 1)
    padded = np.pad(padded, pad)

    def windows(arr, axis_letter):
        ax = 2 - axis_letter
        n_nodes = grid.n_nodes_axis[axis_letter]
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[ax] = slice(0, n_nodes)
        hi[ax] = slice(1, n_nodes + 1)
        return arr[tuple(lo)] | arr[tuple(hi)]

    acc = windows(windows(padded, u), v)
    tail = [(0, 0), (0, 0), (0, 0)]
    tail[2 - w] = (0, 1)
    return np.pad(acc, tail).astype(bool)


def compute_edge_mask(grid: Grid, mat: MaterialMap, walls: WallBC | None = None) -> np.ndarray:
    """Boolean (n_e,) mask, True where the edge carries an unknown.

    Masked: degenerate max-boundary slots, edges tangential to a PEC wall,
    and edges adjacent to at least one PEC cell (staircase metal).
    """
    walls = walls or WallBC()
    Nx, Ny, Nz = grid.n_nodes_axis
    mask = np.ones((Nz, Ny, Nx, 3), dtype=bool)

    # degenerate slots
    mask[:, :, Nx - 1, 0] = False
    mask[:, Ny - 1, :, 1] = False
    mask[Nz - 1, :, :, 2] = False

    # PEC walls: tangential edges in the wall plane
    if walls.xmin == "pec":
        mask[:, :, 0, 1] = False
        mask[:, :, 0, 2] = False
    if walls.xmax == "pec":
        mask[:, :, Nx - 1, 1] = False
        mask[:, :, Nx - 1, 2] = False
    if walls.ymin == "pec":
        mask[:, 0, :, 0] = False
        mask[:, 0, :, 2] = False
    if walls.ymax == "pec":
        mask[:, Ny - 1, :, 0] = False
        mask[:, Ny - 1, :, 2] = False
    if walls.zmin == "pec":
        mask[0, :, :, 0] = False
        mask[0, :, :, 1] = False
    if walls.zmax == "pec":
        mask[Nz - 1, :, :, 0] = False
        mask[Nz - 1, :, :, 1] = False

    if np.any(mat.pec):
        for w in range(3):
            touched = _transverse_any(grid, mat.pec, w)
            mask[..., w] &= ~touched

    return mask.reshape(grid.n_edges)


def apply_boundary_mask(
    eps_diag: np.ndarray, muinv_diag: np.ndarray, mask: np.ndarray
) -> MaterialDiagonals:
    """Combine averaged diagonals and the mask into the operator factors."""
    inv_sqrt_eps = np.zeros_like(eps_diag)
    np.divide(1.0, np.sqrt(eps_diag, where=mask, out=np.ones_like(eps_diag)),
              where=mask, out=inv_sqrt_eps)
    inv_sqrt_mu = np.sqrt(muinv_diag)
    return MaterialDiagonals(
        inv_sqrt_eps=inv_sqrt_eps, inv_sqrt_mu=inv_sqrt_mu, edge_mask=mask.copy()
    )


def build_material_diagonals(
    grid: Grid,
    mat: MaterialMap,
    walls: WallBC | None = None,
    omega: float | None = None,
) -> MaterialDiagonals:
    """One-stop construction of the masked diagonal factors."""
    eps_diag = average_permittivity(grid, mat, omega)
    muinv_diag = average_permeability(grid, mat)
    mask = compute_edge_mask(grid, mat, walls)
    return apply_boundary_mask(eps_diag, muinv_diag, mask)


def scale_curl(curl, diagonals: MaterialDiagonals):
    """Scaled half operator: rows by sqrt(inverse permeability), columns by
    1/sqrt(permittivity).  Shares the curl's index structure."""
    return curl.scaled(diagonals.inv_sqrt_mu, diagonals.inv_sqrt_eps)
