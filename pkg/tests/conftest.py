"""Shared fixtures: deterministic scene builders used across the suite."""

import numpy as np
import pytest

from fitwave import MaterialMap, build_grid


def random_grid(rng, max_cells=4, lo=0.004, hi=0.02):
    """Grid with random cell counts (2..max_cells per axis) and random spacings."""
    def planes(n):
        steps = rng.uniform(lo, hi, size=n)
        return np.concatenate([[0.0], np.cumsum(steps)])

    nx, ny, nz = (int(v) for v in rng.integers(2, max_cells + 1, size=3))
    return build_grid(planes(nx), planes(ny), planes(nz))


def random_materials(rng, grid, pec_ok=False):
    """Lossless material map with 1-3 random eps_r boxes (optionally a PEC box)."""
    mat = MaterialMap.vacuum(grid)
    nz, ny, nx = grid.cell_shape
    for _ in range(int(rng.integers(1, 4))):
        i0, j0, k0 = rng.integers(0, nx), rng.integers(0, ny), rng.integers(0, nz)
        i1 = rng.integers(i0 + 1, nx + 1)
        j1 = rng.integers(j0 + 1, ny + 1)
        k1 = rng.integers(k0 + 1, nz + 1)
        mat.eps_r[k0:k1, j0:j1, i0:i1] = rng.choice([1.0, 2.7, 12.3])
    if pec_ok and rng.random() < 0.3 and min(nx, ny, nz) >= 3:
        mat.pec[0:1, 0:1, 0:1] = True
    return mat


@pytest.fixture
def make_random_scene():
    """Factory: seed -> (grid, materials); deterministic per seed."""
    def _make(seed, max_cells=4, pec_ok=False):
        rng = np.random.default_rng(seed)
        grid = random_grid(rng, max_cells=max_cells)
        return grid, random_materials(rng, grid, pec_ok=pec_ok)

    return _make


def two_port_box_dict():
    """Small two-port scene: 8x5x6-cell PEC box with an eps_r=2.7 slab.

    Two vertical two-segment ports reach from the floor into the slab; runs
    in well under a second per frequency, used wherever a cheap end-to-end
    scene is needed.
    """
    return {
        "name": "two-port box",
        "grid": {
            "x_planes": [0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08],
            "y_planes": [0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
            "z_planes": [0.0, 0.005, 0.01, 0.015, 0.02, 0.025, 0.03],
        },
        "materials": [
            {"box": [[0.02, 0.0, 0.0], [0.06, 0.05, 0.01]], "eps_r": 2.7},
        ],
        "ports": [
            {"name": "in", "nodes": [[2, 2, 0], [2, 2, 1], [2, 2, 2]]},
            {"name": "out", "nodes": [[6, 2, 0], [6, 2, 1], [6, 2, 2]]},
        ],
        "sweep": {"f_min": 5.0e8, "f_max": 2.5e9, "n_f": 5},
    }


def microstrip_dict():
    """Two-port microstrip-like scene, 53 703 unknowns (42 777 active).

    20 x 12 x 8 mm PEC box; 1 mm eps_r=2.7 substrate (2 cells); one-cell-thick
    metal strip on top of it running along y; vertical two-segment ports
    through the substrate under both strip ends.  z spacing is graded above
    the strip.  First resonance sits near 8.7-9 GHz (|Z11| pole).
    """
    x = np.linspace(0.0, 0.020, 27)
    y = np.linspace(0.0, 0.012, 39)
    z = np.concatenate([np.linspace(0.0, 0.0015, 4), np.geomspace(0.0015, 0.008, 14)[1:]])
    return {
        "name": "microstrip two-port",
        "grid": {"x_planes": x.tolist(), "y_planes": y.tolist(), "z_planes": z.tolist()},
        "materials": [
            {"box": [[0.0, 0.0, 0.0], [0.020, 0.012, float(z[2])]], "eps_r": 2.7},
            {
                "box": [
                    [float(x[11]), float(y[4]), float(z[2])],
                    [float(x[15]), float(y[34]), float(z[3])],
                ],
                "pec": True,
            },
        ],
        "ports": [
            {"name": "p1", "nodes": [[13, 5, 0], [13, 5, 1], [13, 5, 2]]},
            {"name": "p2", "nodes": [[13, 33, 0], [13, 33, 1], [13, 33, 2]]},
        ],
        "sweep": {"f_min": 5.0e8, "f_max": 3.0e9, "n_f": 10},
    }


@pytest.fixture
def two_port_scene_dict():
    return two_port_box_dict()


@pytest.fixture(scope="session")
def microstrip_scene_dict():
    return microstrip_dict()
