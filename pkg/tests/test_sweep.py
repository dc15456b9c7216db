"""Sweep behavior: single-build contract, determinism, correctness vs dense."""

import numpy as np
import pytest

from fitwave import (
    SweepConfig,
    build_material_diagonals,
    find_peaks,
    oracle,
    parse_scene,
    run_sweep,
)
from fitwave.ports import build_rhs, probe_voltage


def scene_dict(lossy=False):
    d = {
        "grid": {
            "x_planes": [0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
            "y_planes": [0.0, 0.01, 0.02, 0.03],
            "z_planes": [0.0, 0.012, 0.02, 0.03],
        },
        "materials": [
            {"box": [[0.0, 0.0, 0.0], [0.05, 0.03, 0.012]], "eps_r": 2.7}
        ],
        "ports": [
            {"name": "p1", "nodes": [[1, 1, 1], [1, 1, 2]]},
            {"name": "p2", "nodes": [[3, 1, 1], [3, 1, 2]]},
        ],
    }
    if lossy:
        d["materials"].append(
            {"box": [[0.02, 0.0, 0.0], [0.04, 0.03, 0.02]], "eps_r": 2.0, "sigma": 0.05}
        )
    return d


def config(**kw):
    kw.setdefault("f_min", 1.0e9)
    kw.setdefault("f_max", 2.0e9)
    kw.setdefault("n_f", 3)
    kw.setdefault("solver", "cg")
    kw.setdefault("tol", 1e-12)
    return SweepConfig(**kw)


class TestConfig:
    @pytest.mark.parametrize(
        "patch,msg",
        [
            ({"f_min": 0.0}, "f_min"),
            ({"f_min": 2e9, "f_max": 1e9}, "f_max"),
            ({"n_f": 0}, "n_f"),
            ({"solver": "sor"}, "solver"),
            ({"variant": "dense"}, "variant"),
            ({"workers": 0}, "workers"),
            ({"parallel_mode": "mpi"}, "parallel_mode"),
        ],
    )
    def test_validation(self, patch, msg):
        with pytest.raises(ValueError, match=msg):
            config(**patch)

    def test_frequencies(self):
        np.testing.assert_array_equal(
            config(n_f=3).frequencies, [1.0e9, 1.5e9, 2.0e9]
        )
        np.testing.assert_array_equal(config(n_f=1).frequencies, [1.0e9])


class TestBuildCounts:
    def test_lossless_builds_once(self):
        scene = parse_scene(scene_dict())
        res = run_sweep(scene, config(n_f=4), log=None)
        assert res.build_counts == {"curl": 1, "diagonals": 1, "operator": 1}

    def test_lossy_rebuilds_per_frequency(self):
        scene = parse_scene(scene_dict(lossy=True))
        res = run_sweep(scene, config(n_f=3), log=None)
        assert res.build_counts == {"curl": 1, "diagonals": 3, "operator": 3}


class TestAgainstDense:
    def dense_z(self, scene, freqs):
        g = scene.grid
        rows = []
        for f in freqs:
            omega = 2 * np.pi * f
            diag = build_material_diagonals(
                g, scene.materials, scene.walls,
                omega=omega if not scene.is_lossless else None,
            )
            system = oracle.dense_assemble(g, diag)
            z = np.empty((2, 2), dtype=np.complex128)
            for n, src in enumerate(scene.ports):
                b = build_rhs(g, diag, src, omega)
                e = system.solve(b, omega=omega)
                for m, prb in enumerate(scene.ports):
                    z[m, n] = probe_voltage(g, diag, prb, e) / src.amplitude
            rows.append(z)
        return np.asarray(rows)

    @pytest.mark.parametrize("lossy", [False, True], ids=["lossless", "lossy"])
    def test_z_matches_dense(self, lossy):
        scene = parse_scene(scene_dict(lossy=lossy))
        cfg = config(n_f=3)
        res = run_sweep(scene, cfg, log=None)
        assert res.converged
        want = self.dense_z(scene, cfg.frequencies)
        np.testing.assert_allclose(res.z, want, rtol=1e-8)

    def test_reciprocity_and_reactance(self):
        scene = parse_scene(scene_dict())
        res = run_sweep(scene, config(n_f=3), log=None)
        z = res.z
        scale = np.abs(z).max()
        assert np.max(np.abs(z[:, 0, 1] - z[:, 1, 0])) <= 1e-9 * scale
        assert np.max(np.abs(z.real)) <= 1e-9 * scale  # lossless => reactive

    def test_bookkeeping_totals(self):
        scene = parse_scene(scene_dict())
        res = run_sweep(scene, config(n_f=2), log=None)
        assert res.applies > 0
        assert res.mults == res.applies * 9 * scene.grid.n_edges  # e2tt
        for row in res.results:
            assert row.iterations > 0
            assert row.residual < 1e-12
            assert row.wall_s > 0.0


class TestSParameters:
    def test_s_present_when_probes_equal_sources(self):
        scene = parse_scene(scene_dict())
        res = run_sweep(scene, config(n_f=2), log=None)
        assert res.results[0].s is not None
        assert not np.isnan(res.s).any()
        assert res.port_names == res.probe_names == ["p1", "p2"]

    def test_explicit_probes_suppress_s(self):
        d = scene_dict()
        d["probes"] = [{"name": "v1", "nodes": [[2, 2, 1], [2, 2, 2]]}]
        scene = parse_scene(d)
        res = run_sweep(scene, config(n_f=2), log=None)
        row = res.results[0]
        assert row.z.shape == (1, 2)
        assert row.s is None
        assert np.isnan(res.s).all()
        assert res.probe_names == ["v1"]


class TestDeterminism:
    def test_worker_count_and_mode_do_not_change_results(self):
        scene = parse_scene(scene_dict())
        base = run_sweep(scene, config(n_f=2, workers=1), log=None)
        for workers, mode in [(2, "slice"), (4, "slice"), (2, "solves")]:
            other = run_sweep(
                scene, config(n_f=2, workers=workers, parallel_mode=mode), log=None
            )
            for a, b in zip(base.results, other.results):
                np.testing.assert_array_equal(a.z, b.z)
                np.testing.assert_array_equal(a.s, b.s)
                assert a.iterations == b.iterations
                assert a.residual == b.residual
            assert base.applies == other.applies

    def test_lossy_solves_mode_matches(self):
        scene = parse_scene(scene_dict(lossy=True))
        base = run_sweep(scene, config(n_f=2, workers=1), log=None)
        other = run_sweep(
            scene, config(n_f=2, workers=2, parallel_mode="solves"), log=None
        )
        for a, b in zip(base.results, other.results):
            np.testing.assert_array_equal(a.z, b.z)


class TestSuperpose:
    @pytest.mark.parametrize("lossy", [False, True], ids=["lossless", "lossy"])
    def test_voltages_are_linear_combination(self, lossy):
        d = scene_dict(lossy=lossy)
        d["ports"][0]["amplitude"] = 2.0
        d["ports"][1]["amplitude"] = [0.5, -1.0]  # complex drive
        scene = parse_scene(d)
        plain = run_sweep(scene, config(n_f=2), log=None)
        sup = run_sweep(scene, config(n_f=2, superpose=True), log=None)
        amps = np.array([complex(p.amplitude) for p in scene.ports])
        for row_plain, row_sup in zip(plain.results, sup.results):
            assert row_sup.z is None and row_sup.s is None
            want = row_plain.z @ amps
            np.testing.assert_allclose(row_sup.voltages, want, rtol=1e-8)
        assert np.isnan(sup.z).all() and np.isnan(sup.s).all()


class TestFailureTolerance:
    def test_sweep_survives_nonconvergence(self):
        scene = parse_scene(scene_dict())
        res = run_sweep(scene, config(n_f=3, max_iter=1), log=None)
        assert len(res.results) == 3
        assert not res.converged
        for row in res.results:
            assert not row.converged
            assert row.residual > 1e-12
            assert row.z is not None  # attempted result is kept


class TestSceneGuards:
    def test_no_sources(self):
        d = scene_dict()
        d["ports"] = []
        with pytest.raises(ValueError, match="no source ports"):
            run_sweep(parse_scene(d), config(), log=None)

    def test_no_probes(self):
        d = scene_dict()
        for p in d["ports"]:
            p["role"] = "source"
        with pytest.raises(ValueError, match="no probe paths"):
            run_sweep(parse_scene(d), config(), log=None)


class TestLogging:
    def test_progress_lines_and_silence(self, capfd):
        scene = parse_scene(scene_dict())
        import sys

        run_sweep(scene, config(n_f=2), log=sys.stderr)
        err = capfd.readouterr().err
        assert "[1/2]" in err and "[2/2]" in err and "ok" in err
        run_sweep(scene, config(n_f=2), log=None)
        assert capfd.readouterr().err == ""


class TestFindPeaks:
    def test_quadratic_vertex_recovered(self):
        f = np.linspace(1.0e9, 2.0e9, 11)
        f0, peak = 1.43e9, 5.0
        v = peak - 3e-18 * (f - f0) ** 2
        [(fp, vp)] = find_peaks(f, v)
        assert fp == pytest.approx(f0, rel=1e-12)
        assert vp == pytest.approx(peak, rel=1e-12)

    def test_multiple_and_boundary_maxima(self):
        f = np.arange(7, dtype=float)
        v = np.array([9.0, 1.0, 5.0, 1.0, 7.0, 1.0, 9.0])  # ends are not peaks
        got = find_peaks(f, v)
        assert [round(fp) for fp, _ in got] == [2, 4]

    def test_monotone_has_no_peaks(self):
        f = np.linspace(1.0, 2.0, 8)
        assert find_peaks(f, np.exp(f)) == []

    def test_plateau_is_not_strict(self):
        assert find_peaks([1.0, 2.0, 3.0, 4.0], [0.0, 1.0, 1.0, 0.0]) == []

    def test_guards(self):
        with pytest.raises(ValueError, match="at least 3"):
            find_peaks([1.0, 2.0], [0.0, 1.0])
        with pytest.raises(ValueError, match="lengths differ"):
            find_peaks([1.0, 2.0, 3.0], [0.0, 1.0])

    def test_locates_cavity_resonance(self):
        d = {
            "grid": {
                "x_planes": [0.0, 0.01, 0.02, 0.03],
                "y_planes": [0.0, 0.01, 0.02, 0.03],
                "z_planes": [0.0, 0.01, 0.02, 0.03],
            },
            "ports": [{"name": "p1", "nodes": [[1, 1, 1], [1, 1, 2]]}],
        }
        scene = parse_scene(d)
        diag = build_material_diagonals(scene.grid, scene.materials, scene.walls)
        ev = oracle.dense_assemble(scene.grid, diag).eigenvalues()
        f0 = np.sqrt(ev[ev > ev.max() * 1e-8].min()) / (2 * np.pi)
        # asymmetric window so no sample hits the pole exactly
        cfg = config(f_min=0.9 * f0, f_max=1.08 * f0, n_f=7, max_iter=50000, tol=1e-10)
        res = run_sweep(scene, cfg, log=None)
        assert res.converged
        peaks = find_peaks(cfg.frequencies, np.abs(res.z[:, 0, 0]))
        assert peaks, "no interior maximum found near the resonance"
        nearest = min(peaks, key=lambda p: abs(p[0] - f0))[0]
        spacing = (cfg.f_max - cfg.f_min) / (cfg.n_f - 1)
        assert abs(nearest - f0) <= spacing
