"""Scene files: JSON description of grid, materials, walls, ports, sweep.

Schema (all physical quantities in SI base units, frequencies in Hz)::

    {
      "name": "optional title",
      "grid": {"x_planes": [...], "y_planes": [...], "z_planes": [...]},
      "materials": [
        {"box": [[x0,y0,z0], [x1,y1,z1]],
         "eps_r": 2.7,            // or [re, im]
         "mu_r": 1.0,             // or [re, im]
         "sigma": 0.0,            // S/m
         "pec": false}
      ],
      "walls": {"xmin": "pec", ... },        // defaults: all "pec"
      "ports":  [{"name": "p1", "nodes": [[i,j,k], ...],
                  "amplitude": 1.0,          // or [re, im], amperes
                  "role": "both"}],          // "source" | "probe" | "both"
      "probes": [{"name": "v1", "nodes": [[i,j,k], ...]}],
      "sweep": {"f_min": 5e8, "f_max": 3e9, "n_f": 11},
      "z0": 50.0
    }

Material blocks paint over a vacuum background in declaration order (later
blocks override earlier ones completely).  Box corners are snapped to the
nearest grid planes; the per-block snap distances are kept on the parsed
scene so callers can report grid/geometry mismatches.  A box that collapses
to zero cells after snapping is an error, as is a port that touches an edge
carrying no unknown.

``parse_scene(write_scene(scene))`` reproduces the same normal form: the
normal form stores the snapped box coordinates, explicit defaults, and all
six wall entries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Grid
from .materials import MaterialMap, WallBC, compute_edge_mask
from .ports import Port, validate_port

__all__ = ["Scene", "parse_scene", "write_scene", "scene_to_dict"]

_SCENE_KEYS = {"name", "grid", "materials", "walls", "ports", "probes", "sweep", "z0"}
_GRID_KEYS = {"x_planes", "y_planes", "z_planes"}
_BLOCK_KEYS = {"box", "eps_r", "mu_r", "sigma", "pec"}
_PORT_KEYS = {"name", "nodes", "amplitude", "role"}
_PROBE_KEYS = {"name", "nodes"}
_SWEEP_KEYS = {"f_min", "f_max", "n_f"}
_WALL_KEYS = {"xmin", "xmax", "ymin", "ymax", "zmin", "zmax"}


def _fail(path: str, message: str):
    raise ValueError(f"{path}: {message}")


def _check_keys(obj: dict, allowed: set, path: str):
    if not isinstance(obj, dict):
        _fail(path, f"expected an object, got {type(obj).__name__}")
    unknown = set(obj) - allowed
    if unknown:
        _fail(path, f"unknown key(s) {sorted(unknown)}; allowed: {sorted(allowed)}")


def _number(value, path: str, allow_complex: bool = False):
    if isinstance(value, bool):
        _fail(path, "expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if allow_complex and isinstance(value, (list, tuple)) and len(value) == 2:
        re, im = value
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in (re, im)):
            return complex(float(re), float(im))
    kinds = "a number or [re, im]" if allow_complex else "a number"
    _fail(path, f"expected {kinds}, got {value!r}")


@dataclass
class Scene:
    """A parsed, validated scene plus its serialization normal form."""

    grid: Grid
    materials: MaterialMap
    walls: WallBC
    ports: list[Port]
    probes: list[Port]
    sweep: dict | None
    z0: float
    name: str = ""
    snap_distances: list[float] = field(default_factory=list)
    _normal: dict = field(default_factory=dict, repr=False)

    @property
    def source_ports(self) -> list[Port]:
        return [p for p in self.ports if p.is_source]

    @property
    def probe_ports(self) -> list[Port]:
        """Probing paths: explicit probes if declared, else the ports."""
        if self.probes:
            return list(self.probes)
        return [p for p in self.ports if p.is_probe]

    @property
    def is_lossless(self) -> bool:
        return self.materials.is_lossless

    def to_dict(self) -> dict:
        return json.loads(json.dumps(self._normal))  # deep copy, JSON types only


def _snap_index(planes: np.ndarray, value: float) -> tuple[int, float]:
    idx = int(np.argmin(np.abs(planes - value)))
    return idx, float(abs(planes[idx] - value))


def _parse_grid(obj, path: str) -> Grid:
    _check_keys(obj, _GRID_KEYS, path)
    for key in _GRID_KEYS:
        if key not in obj:
            _fail(path, f"missing key {key!r}")
        if not isinstance(obj[key], list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj[key]
        ):
            _fail(f"{path}.{key}", "expected a list of numbers")
    try:
        return Grid(obj["x_planes"], obj["y_planes"], obj["z_planes"])
    except ValueError as exc:
        _fail(path, str(exc))


def _parse_blocks(blocks, grid: Grid, path: str):
    if not isinstance(blocks, list):
        _fail(path, f"expected a list, got {type(blocks).__name__}")
    mat = MaterialMap.vacuum(grid)
    if any(
        isinstance(b, dict) and isinstance(b.get(k), (list, tuple))
        for b in blocks
        for k in ("eps_r", "mu_r")
    ):
        mat.eps_r = mat.eps_r.astype(np.complex128)
        mat.mu_r = mat.mu_r.astype(np.complex128)
    snap_distances = []
    normal_blocks = []
    for bi, block in enumerate(blocks):
        bpath = f"{path}[{bi}]"
        _check_keys(block, _BLOCK_KEYS, bpath)
        if "box" not in block:
            _fail(bpath, "missing key 'box'")
        box = block["box"]
        if (
            not isinstance(box, list)
            or len(box) != 2
            or any(not isinstance(c, list) or len(c) != 3 for c in box)
        ):
            _fail(f"{bpath}.box", "expected [[x0,y0,z0], [x1,y1,z1]]")
        lo_idx, hi_idx, snapped_lo, snapped_hi, worst = [], [], [], [], 0.0
        for ax in range(3):
            a = _number(box[0][ax], f"{bpath}.box[0][{ax}]")
            b = _number(box[1][ax], f"{bpath}.box[1][{ax}]")
            if b < a:
                a, b = b, a
            planes = grid.planes[ax]
            i0, d0 = _snap_index(planes, a)
            i1, d1 = _snap_index(planes, b)
            worst = max(worst, d0, d1)
            if i0 == i1:
                _fail(
                    f"{bpath}.box",
                    f"collapses to zero cells on axis {'xyz'[ax]} after snapping "
                    f"({a!r} and {b!r} both snap to plane {float(planes[i0])!r})",
                )
            lo_idx.append(i0)
            hi_idx.append(i1)
            snapped_lo.append(float(planes[i0]))
            snapped_hi.append(float(planes[i1]))
        eps = _number(block.get("eps_r", 1.0), f"{bpath}.eps_r", allow_complex=True)
        mu = _number(block.get("mu_r", 1.0), f"{bpath}.mu_r", allow_complex=True)
        sigma = _number(block.get("sigma", 0.0), f"{bpath}.sigma")
        pec = block.get("pec", False)
        if not isinstance(pec, bool):
            _fail(f"{bpath}.pec", f"expected a boolean, got {pec!r}")
        if isinstance(eps, complex) and eps.imag > 0:
            _fail(f"{bpath}.eps_r", "a passive dielectric needs Im(eps_r) <= 0")
        if isinstance(mu, complex) and mu.imag > 0:
            _fail(f"{bpath}.mu_r", "a passive magnetic material needs Im(mu_r) <= 0")
        if (eps.real if isinstance(eps, complex) else eps) <= 0:
            _fail(f"{bpath}.eps_r", "Re(eps_r) must be positive")
        if (mu.real if isinstance(mu, complex) else mu) <= 0:
            _fail(f"{bpath}.mu_r", "Re(mu_r) must be positive")
        if sigma < 0:
            _fail(f"{bpath}.sigma", "conductivity must be nonnegative")
        # paint (cell arrays are (nz, ny, nx): reverse the axis order)
        sel = (
            slice(lo_idx[2], hi_idx[2]),
            slice(lo_idx[1], hi_idx[1]),
            slice(lo_idx[0], hi_idx[0]),
        )
        mat.eps_r[sel] = eps
        mat.mu_r[sel] = mu
        mat.sigma[sel] = sigma
        mat.pec[sel] = pec
        snap_distances.append(worst)
        normal_blocks.append(
            {
                "box": [snapped_lo, snapped_hi],
                "eps_r": _emit_number(eps),
                "mu_r": _emit_number(mu),
                "sigma": sigma,
                "pec": pec,
            }
        )
    if np.iscomplexobj(mat.eps_r) and np.all(mat.eps_r.imag == 0) and np.all(mat.mu_r.imag == 0):
        mat.eps_r = mat.eps_r.real.copy()
        mat.mu_r = mat.mu_r.real.copy()
    return mat, snap_distances, normal_blocks


def _emit_number(value):
    if isinstance(value, complex):
        return value.real if value.imag == 0 else [value.real, value.imag]
    return value


def _parse_walls(obj, path: str) -> WallBC:
    if obj is None:
        return WallBC()
    _check_keys(obj, _WALL_KEYS, path)
    for key, value in obj.items():
        if value not in ("pec", "pmc"):
            _fail(f"{path}.{key}", f"expected 'pec' or 'pmc', got {value!r}")
    return WallBC(**obj)


def _parse_nodes(nodes, path: str):
    if not isinstance(nodes, list) or len(nodes) < 2:
        _fail(path, "expected a list of at least two [i,j,k] node triples")
    out = []
    for ni, nd in enumerate(nodes):
        if (
            not isinstance(nd, list)
            or len(nd) != 3
            or any(not isinstance(c, int) or isinstance(c, bool) for c in nd)
        ):
            _fail(f"{path}[{ni}]", f"expected an [i,j,k] integer triple, got {nd!r}")
        out.append(tuple(nd))
    return tuple(out)


def _parse_ports(items, path: str, probe_only: bool) -> list[Port]:
    if not isinstance(items, list):
        _fail(path, f"expected a list, got {type(items).__name__}")
    ports = []
    allowed = _PROBE_KEYS if probe_only else _PORT_KEYS
    for pi, item in enumerate(items):
        ppath = f"{path}[{pi}]"
        _check_keys(item, allowed, ppath)
        if "nodes" not in item:
            _fail(ppath, "missing key 'nodes'")
        nodes = _parse_nodes(item["nodes"], f"{ppath}.nodes")
        name = item.get("name", f"{'probe' if probe_only else 'port'}{pi + 1}")
        if not isinstance(name, str):
            _fail(f"{ppath}.name", f"expected a string, got {item['name']!r}")
        if probe_only:
            port = Port(nodes=nodes, amplitude=1.0, role="probe", name=name)
        else:
            amplitude = _number(
                item.get("amplitude", 1.0), f"{ppath}.amplitude", allow_complex=True
            )
            role = item.get("role", "both")
            try:
                port = Port(nodes=nodes, amplitude=amplitude, role=role, name=name)
            except ValueError as exc:
                _fail(ppath, str(exc))
        ports.append(port)
    return ports


def _parse_sweep(obj, path: str) -> dict | None:
    if obj is None:
        return None
    _check_keys(obj, _SWEEP_KEYS, path)
    for key in _SWEEP_KEYS:
        if key not in obj:
            _fail(path, f"missing key {key!r}")
    f_min = _number(obj["f_min"], f"{path}.f_min")
    f_max = _number(obj["f_max"], f"{path}.f_max")
    n_f = obj["n_f"]
    if not isinstance(n_f, int) or isinstance(n_f, bool) or n_f < 1:
        _fail(f"{path}.n_f", f"expected a positive integer, got {n_f!r}")
    if f_min <= 0:
        _fail(f"{path}.f_min", "must be > 0 (a zero frequency makes the system singular)")
    if f_max < f_min:
        _fail(f"{path}.f_max", "must be >= f_min")
    return {"f_min": f_min, "f_max": f_max, "n_f": n_f}


def parse_scene(source) -> Scene:
    """Parse and validate a scene from a file path, JSON text, or dict."""
    if isinstance(source, dict):
        raw = source
    elif isinstance(source, str) and source.lstrip().startswith("{"):
        try:
            raw = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ValueError(f"scene: not valid JSON: {exc}") from None
    elif isinstance(source, (str, Path)):
        try:
            raw = json.loads(Path(source).read_text())
        except OSError as exc:
            raise ValueError(f"scene: cannot read {source}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ValueError(f"scene: {source} is not valid JSON: {exc}") from None
    else:
        raise TypeError(f"scene source must be a path, JSON text, or dict, got {type(source)}")

    _check_keys(raw, _SCENE_KEYS, "scene")
    if "grid" not in raw:
        _fail("scene", "missing key 'grid'")
    grid = _parse_grid(raw["grid"], "scene.grid")
    materials, snaps, normal_blocks = _parse_blocks(
        raw.get("materials", []), grid, "scene.materials"
    )
    walls = _parse_walls(raw.get("walls"), "scene.walls")
    ports = _parse_ports(raw.get("ports", []), "scene.ports", probe_only=False)
    probes = _parse_ports(raw.get("probes", []), "scene.probes", probe_only=True)
    sweep = _parse_sweep(raw.get("sweep"), "scene.sweep")
    z0 = _number(raw.get("z0", 50.0), "scene.z0")
    if z0 <= 0:
        _fail("scene.z0", "reference impedance must be positive")
    name = raw.get("name", "")
    if not isinstance(name, str):
        _fail("scene.name", f"expected a string, got {name!r}")

    # ports must sit on edges that carry unknowns
    mask = compute_edge_mask(grid, materials, walls)
    for kind, plist in (("ports", ports), ("probes", probes)):
        for pi, port in enumerate(plist):
            try:
                validate_port(grid, port, mask)
            except ValueError as exc:
                _fail(f"scene.{kind}[{pi}]", str(exc))

    normal: dict = {}
    if name:
        normal["name"] = name
    normal["grid"] = {
        "x_planes": [float(v) for v in grid.planes[0]],
        "y_planes": [float(v) for v in grid.planes[1]],
        "z_planes": [float(v) for v in grid.planes[2]],
    }
    normal["materials"] = normal_blocks
    normal["walls"] = walls.as_dict()
    normal["ports"] = [
        {
            "name": p.name,
            "nodes": [list(nd) for nd in p.nodes],
            "amplitude": _emit_number(
                complex(p.amplitude) if np.iscomplexobj(np.asarray(p.amplitude)) else float(p.amplitude)
            ),
            "role": p.role,
        }
        for p in ports
    ]
    if probes:
        normal["probes"] = [
            {"name": p.name, "nodes": [list(nd) for nd in p.nodes]} for p in probes
        ]
    if sweep is not None:
        normal["sweep"] = dict(sweep)
    normal["z0"] = z0

    return Scene(
        grid=grid,
        materials=materials,
        walls=walls,
        ports=ports,
        probes=probes,
        sweep=sweep,
        z0=z0,
        name=name,
        snap_distances=snaps,
        _normal=normal,
    )


def scene_to_dict(scene: Scene) -> dict:
    """The scene's serialization normal form (snapped geometry, explicit
    defaults)."""
    return scene.to_dict()


def write_scene(scene: Scene, path) -> None:
    """Write the normal form; re-parsing reproduces it exactly."""
    Path(path).write_text(json.dumps(scene.to_dict(), indent=2) + "\n")
