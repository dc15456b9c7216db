"""Reference-path checks: frozen analytic constants and guard behavior.

Frozen values (computed independently of the code under test):

* 1 m cube, TE101: f = c0 / sqrt(2) = 211 985 280.000383... Hz
* same cavity on a 10^3 uniform mesh, discrete dispersion:
  f_h = 211 114 600.331 Hz (0.41% below continuum, second-order accurate)
* rectangular resonator mode count with n cells per axis, PEC walls:
  2 (n-1)^3 + 3 (n-1)^2 nonzero modes (TE+TM double count when all three
  indices are nonzero).
"""

import numpy as np
import pytest

from fitwave import (
    MaterialMap,
    build_curl,
    build_grid,
    build_gradient,
    build_material_diagonals,
)
from fitwave.constants import C0
from fitwave import oracle

from conftest import random_grid, random_materials

TE101_HZ = 211_985_280.00038323
TE101_DISCRETE_HZ = 211_114_600.3309539


def to_f(omega2):
    return np.sqrt(omega2) / (2 * np.pi)


def test_te101_continuous_frequency():
    w2 = oracle.cavity_omega2_continuous((1.0, 1.0, 1.0), (1, 0, 1))
    assert to_f(w2) == pytest.approx(TE101_HZ, rel=1e-12)
    assert to_f(w2) == pytest.approx(C0 / np.sqrt(2.0), rel=1e-15)


def test_continuous_dispersion_hand_value():
    # mode (2,1,3) in a 0.5 x 0.4 x 0.25 m box: w^2 = c0^2 pi^2 (16 + 6.25 + 144)
    w2 = oracle.cavity_omega2_continuous((0.5, 0.4, 0.25), (2, 1, 3))
    assert w2 == pytest.approx(C0**2 * np.pi**2 * 166.25, rel=1e-14)


def test_discrete_dispersion_hand_value():
    w2 = oracle.cavity_omega2_discrete((1.0, 1.0, 1.0), (0.1, 0.1, 0.1), (1, 0, 1))
    assert to_f(w2) == pytest.approx(TE101_DISCRETE_HZ, rel=1e-12)
    # independent evaluation of the same formula
    term = (2.0 / 0.1) * np.sin(np.pi * 0.1 / 2.0)
    assert w2 == pytest.approx(C0**2 * 2.0 * term**2, rel=1e-14)
    # second-order convergence: halving the step quarters the defect
    w2h = oracle.cavity_omega2_discrete((1.0, 1.0, 1.0), (0.05, 0.05, 0.05), (1, 0, 1))
    exact = oracle.cavity_omega2_continuous((1.0, 1.0, 1.0), (1, 0, 1))
    ratio = (exact - w2) / (exact - w2h)
    assert ratio == pytest.approx(4.0, rel=0.02)


@pytest.mark.parametrize("mode", [(0, 0, 0), (1, 0, 0), (0, 2, 0), (-1, 1, 1)])
def test_invalid_mode_triples_rejected(mode):
    with pytest.raises(ValueError):
        oracle.analytic_cavity_eigenvalues((1.0, 1.0, 1.0), (0.5, 0.5, 0.5), [mode])


def test_analytic_pairs():
    pairs = oracle.analytic_cavity_eigenvalues(
        (1.0, 1.0, 1.0), (0.1, 0.1, 0.1), [(1, 0, 1), (1, 1, 1)]
    )
    assert len(pairs) == 2
    cont, disc = pairs[0]
    assert to_f(cont) == pytest.approx(TE101_HZ, rel=1e-12)
    assert to_f(disc) == pytest.approx(TE101_DISCRETE_HZ, rel=1e-12)
    assert disc < cont  # discrete eigenvalues sit below the continuum


@pytest.mark.parametrize("n,count", [(2, 5), (3, 28), (4, 81), (10, 1701)])
def test_spectrum_count_formula(n, count):
    g = build_grid(*[np.linspace(0.0, 1.0, n + 1)] * 3)
    spec = oracle.cavity_spectrum_discrete(g)
    assert spec.size == count == 2 * (n - 1) ** 3 + 3 * (n - 1) ** 2
    assert np.all(np.diff(spec) >= 0)
    assert np.all(spec > 0)


def test_spectrum_multiplicity_by_brute_enumeration():
    n = 3
    g = build_grid(*[np.linspace(0.0, 0.5, n + 1)] * 3)
    spec = oracle.cavity_spectrum_discrete(g)
    values = []
    for m in range(n):
        for p in range(n):
            for q in range(n):
                nonzero = (m != 0) + (p != 0) + (q != 0)
                if nonzero < 2:
                    continue
                w2 = oracle.cavity_omega2_discrete(
                    (0.5, 0.5, 0.5), (0.5 / n,) * 3, (m, p, q)
                )
                values.extend([w2] * (2 if nonzero == 3 else 1))
    np.testing.assert_allclose(spec, np.sort(values), rtol=1e-14)


def test_dense_builders_match_sparse_operators():
    for seed in range(3):
        g = random_grid(np.random.default_rng(seed))
        np.testing.assert_array_equal(oracle.dense_curl(g), build_curl(g).toarray())
        np.testing.assert_array_equal(
            oracle.dense_gradient(g), build_gradient(g).toarray()
        )


def test_dense_system_solve_and_expand():
    rng = np.random.default_rng(12)
    g = random_grid(rng)
    mat = random_materials(rng, g)
    diag = build_material_diagonals(g, mat)
    system = oracle.dense_assemble(g, diag)
    assert system.n_full == g.n_edges
    assert system.n_active == diag.n_active
    b = rng.standard_normal(g.n_edges)
    b[~diag.edge_mask] = 0.0
    omega = 1.0e9
    x = system.solve(b, omega=omega)
    A = oracle.dense_shifted_matrix(g, diag, omega)
    act = diag.edge_mask
    np.testing.assert_allclose((A @ x)[act], b[act], rtol=0, atol=1e-10 * np.abs(b).max())
    assert not x[~act].any()


def test_dense_system_rejects_rhs_on_masked_slots():
    g = build_grid(*[[0.0, 0.01, 0.02]] * 3)
    diag = build_material_diagonals(g, MaterialMap.vacuum(g))
    system = oracle.dense_assemble(g, diag)
    bad = np.ones(g.n_edges)
    with pytest.raises(ValueError):
        system.solve(bad, omega=0.0)


def test_shifted_matrix_is_plain_diagonal_shift():
    rng = np.random.default_rng(4)
    g = random_grid(rng)
    diag = build_material_diagonals(g, random_materials(rng, g))
    A0 = oracle.dense_operator_matrix(g, diag)
    w = 2 * np.pi * 1e9
    np.testing.assert_array_equal(
        oracle.dense_shifted_matrix(g, diag, w), A0 - w * w * np.eye(g.n_edges)
    )
    # symmetric and PSD at omega = 0
    assert np.max(np.abs(A0 - A0.T)) <= 1e-12 * np.max(np.abs(A0))
    ev = np.linalg.eigvalsh(0.5 * (A0 + A0.T))
    assert ev.min() >= -1e-12 * ev.max()


def test_eigenvalue_zero_space_equals_gradient_dimension():
    """Zero modes of A == gradients that vanish on every masked (PEC) edge."""
    g = build_grid(*[np.linspace(0.0, 0.3, 4)] * 3)
    diag = build_material_diagonals(g, MaterialMap.vacuum(g))
    ev = oracle.dense_assemble(g, diag).eigenvalues()
    zeros = int(np.sum(ev <= np.max(ev) * 1e-8))
    # potentials whose gradient is supported on active edges: the masked rows
    # force phi = 0 on the whole boundary (degenerate-edge rows keep a -1 tail
    # against a zero ghost head), leaving one degree of freedom per interior
    # node and an injective gradient on that space
    G = build_gradient(g).toarray()
    n_nodes = G.shape[1]
    grad_dim = n_nodes - np.linalg.matrix_rank(G[~diag.edge_mask, :])
    assert zeros == grad_dim == 2**3  # interior nodes of a 3^3 PEC box


def test_size_guards():
    g = build_grid(*[np.linspace(0.0, 1.0, 6)] * 3)
    with pytest.raises(ValueError, match="dense"):
        oracle.dense_curl(g, max_dense=100)
    diag = build_material_diagonals(g, MaterialMap.vacuum(g))
    with pytest.raises(ValueError):
        oracle.dense_assemble(g, diag, max_dense=10)


def test_uniform_spacing_guard():
    g = build_grid([0.0, 0.1, 0.3], [0.0, 0.1], [0.0, 0.1])
    with pytest.raises(ValueError):
        oracle.uniform_spacing(g)
    g2 = build_grid([0.0, 0.1, 0.2], [0.0, 0.1], [0.0, 0.1])
    assert oracle.uniform_spacing(g2) == (pytest.approx(0.1),) * 3
