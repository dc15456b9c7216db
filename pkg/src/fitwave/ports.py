"""Discrete ports: filamentary edge-path currents, probe voltages, Z and S.

A port is an ordered path of grid nodes; each consecutive pair must span
exactly one grid edge.  Driving the port impresses its current amplitude on
those edges with the sign of the traversal direction; probing it sums the
edge voltages along the same path with the same signs.  Both operations act
on the symmetrized unknowns, so the permittivity square-root factor appears
once in the excitation and once in the probe.

Conventions (the external contract of this module):

* excitation: ``b = -j omega * inv_sqrt_eps * j_vec``;
* probe: ``u = sum of path-signed entries of inv_sqrt_eps * e_prime``;
* impedance: ``Z[m, n] = u_m / i_n`` with only port ``n`` driven;
* scattering: ``S = (Z - z0 I) (Z + z0 I)^{-1}``, ``z0 = 50`` ohms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .materials import MaterialDiagonals

__all__ = [
    "Port",
    "port_edges",
    "validate_port",
    "current_vector",
    "unit_pattern",
    "build_rhs",
    "probe_voltage",
    "z_parameters",
    "s_from_z",
    "z_from_s",
]

_ROLES = ("source", "probe", "both")


@dataclass(frozen=True)
class Port:
    """An edge-path port.

    ``nodes`` is the ordered (i, j, k) path; ``amplitude`` the impressed
    current in amperes (may be complex); ``role`` selects whether the port
    is driven, probed, or (default) both.
    """

    nodes: tuple[tuple[int, int, int], ...]
    amplitude: complex = 1.0
    role: str = "both"
    name: str = ""

    def __post_init__(self):
        object.__setattr__(
            self, "nodes", tuple(tuple(int(c) for c in nd) for nd in self.nodes)
        )
        if len(self.nodes) < 2:
            raise ValueError(f"port {self.name!r}: need at least two nodes, got {len(self.nodes)}")
        if self.role not in _ROLES:
            raise ValueError(f"port {self.name!r}: role must be one of {_ROLES}, got {self.role!r}")
        if self.amplitude == 0:
            raise ValueError(f"port {self.name!r}: impressed current amplitude must be nonzero")

    @property
    def is_source(self) -> bool:
        return self.role in ("source", "both")

    @property
    def is_probe(self) -> bool:
        return self.role in ("probe", "both")


def port_edges(grid: Grid, port: Port) -> list[tuple[int, int]]:
    """Resolve the node path to ``(edge_index, sign)`` pairs.

    Each step must move to an adjacent node along exactly one axis; the edge
    is anchored at the lower node of the pair and the sign records whether
    the path traverses it along (+1) or against (-1) the axis.
    """
    edges = []
    for s, (a, b) in enumerate(zip(port.nodes[:-1], port.nodes[1:])):
        diff = [b[ax] - a[ax] for ax in range(3)]
        moved = [ax for ax in range(3) if diff[ax] != 0]
        if len(moved) != 1 or abs(diff[moved[0]]) != 1:
            raise ValueError(
                f"port {port.name!r}: segment {s} from {a} to {b} is not a "
                "single grid-edge step"
            )
        w = moved[0]
        sign = diff[w]
        anchor = a if sign > 0 else b
        try:
            idx = grid.edge_index(*anchor, w)
        except IndexError as exc:
            raise ValueError(f"port {port.name!r}: segment {s}: {exc}") from None
        if grid.is_degenerate_edge(*anchor, w):
            raise ValueError(
                f"port {port.name!r}: segment {s} from {a} to {b} runs outside the grid"
            )
        edges.append((idx, sign))
    return edges


def validate_port(grid: Grid, port: Port, edge_mask: np.ndarray) -> list[tuple[int, int]]:
    """Resolve the path and reject edges that carry no unknown.

    A port edge removed by the mask (inside/"on" metal, or a wall-tangential
    edge under a metallic wall condition) would silently inject no current,
    so it is a scene error, reported with the offending segment.
    """
    edges = port_edges(grid, port)
    for s, (idx, _) in enumerate(edges):
        if not edge_mask[idx]:
            i, j, k, w = grid.edge_of_index(idx)
            raise ValueError(
                f"port {port.name!r}: segment {s} uses edge ({i},{j},{k},"
                f"{'xyz'[w]}) which is masked (metal or boundary); ports must "
                "lie on edges that carry unknowns"
            )
    return edges


def current_vector(grid: Grid, port: Port, dtype=None) -> np.ndarray:
    """(n_e,) impressed current: path-signed amplitude on the port edges."""
    if dtype is None:
        dtype = np.complex128 if np.iscomplexobj(np.asarray(port.amplitude)) else np.float64
    j = np.zeros(grid.n_edges, dtype=dtype)
    for idx, sign in port_edges(grid, port):
        j[idx] += sign * port.amplitude
    return j


def unit_pattern(grid: Grid, diagonals: MaterialDiagonals, port: Port) -> np.ndarray:
    """Path-signed unit pattern through the permittivity factor.

    This is the frequency-independent part shared by the excitation
    (``b = -j omega amplitude * pattern``) and the probe functional
    (``u = pattern . e_prime``); real for lossless scenes.
    """
    pattern = np.zeros(grid.n_edges, dtype=diagonals.inv_sqrt_eps.dtype)
    for idx, sign in port_edges(grid, port):
        pattern[idx] += sign * diagonals.inv_sqrt_eps[idx]
    return pattern


def build_rhs(grid: Grid, diagonals: MaterialDiagonals, ports, omega: float) -> np.ndarray:
    """Right-hand side for one or several simultaneously driven ports."""
    if omega <= 0.0:
        raise ValueError(f"excitation requires omega > 0, got {omega}")
    if isinstance(ports, Port):
        ports = [ports]
    b = np.zeros(grid.n_edges, dtype=np.complex128)
    for port in ports:
        b += (-1j * omega * port.amplitude) * unit_pattern(grid, diagonals, port)
    return b


def probe_voltage(grid: Grid, diagonals: MaterialDiagonals, port: Port, e_prime: np.ndarray):
    """Signed sum of physical edge voltages along the port path."""
    u = unit_pattern(grid, diagonals, port)
    total = np.dot(u, e_prime)
    return complex(total) if np.iscomplexobj(e_prime) or np.iscomplexobj(u) else float(total)


def z_parameters(voltages: np.ndarray, currents: np.ndarray) -> np.ndarray:
    """Z[m, n] = u_m / i_n from the per-excitation probe voltage columns."""
    voltages = np.asarray(voltages, dtype=np.complex128)
    currents = np.asarray(currents, dtype=np.complex128)
    if voltages.ndim != 2 or voltages.shape[1] != currents.size:
        raise ValueError(
            f"voltage matrix {voltages.shape} does not match {currents.size} excitations"
        )
    return voltages / currents[None, :]


def s_from_z(Z: np.ndarray, z0: float = 50.0) -> np.ndarray:
    """Scattering matrix of an impedance matrix, all ports referenced to z0."""
    Z = np.asarray(Z, dtype=np.complex128)
    if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
        raise ValueError(f"Z must be square, got {Z.shape}")
    eye = np.eye(Z.shape[0])
    denom = Z + z0 * eye
    try:
        # S (Z + z0 I) = (Z - z0 I), solved via the transposed system
        return np.linalg.solve(denom.T, (Z - z0 * eye).T).T
    except np.linalg.LinAlgError:
        cond = np.linalg.cond(denom)
        raise ValueError(
            f"Z + z0 I is singular (condition number {cond:.3e}); "
            "scattering parameters are undefined at this frequency"
        ) from None


def z_from_s(S: np.ndarray, z0: float = 50.0) -> np.ndarray:
    """Inverse map of :func:`s_from_z`: Z = z0 (I + S)(I - S)^{-1}."""
    S = np.asarray(S, dtype=np.complex128)
    eye = np.eye(S.shape[0])
    try:
        return z0 * np.linalg.solve((eye - S).T, (eye + S).T).T
    except np.linalg.LinAlgError:
        cond = np.linalg.cond(eye - S)
        raise ValueError(
            f"I - S is singular (condition number {cond:.3e}); "
            "the network has no impedance representation"
        ) from None
