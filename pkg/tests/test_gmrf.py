import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vpmap.errors import ConstraintViolationError, DegenerateStructureError, SizeError, ValidationError
from vpmap.gmrf import (
    StructureMatrix,
    generalized_variance,
    icar_structure,
    identity_structure,
    igmrf_logdensity,
    kronecker_spectral,
    rw_structure,
    sample_igmrf,
    scale_structure,
    spectral,
)
from vpmap.graph import AdjacencyGraph, lattice_graph, parse_graph

from conftest import random_connected_graph

GV_RW1_3 = 0.4093368331822652  # (50/729)^(1/3); pinv diagonal is (5/9, 2/9, 5/9)


def test_rw1_entries():
    R = rw_structure(4, 1).entries
    expected = np.array([[1, -1, 0, 0], [-1, 2, -1, 0], [0, -1, 2, -1], [0, 0, -1, 1]], float)
    np.testing.assert_array_equal(R, expected)


def test_rw2_entries_and_null_space():
    R = rw_structure(5, 2)
    assert R.entries[0, :3].tolist() == [1, -2, 1]
    assert R.entries[2, :].tolist() == [1, -4, 6, -4, 1]
    t = np.arange(5.0)
    np.testing.assert_allclose(R.entries @ np.ones(5), 0, atol=1e-12)
    np.testing.assert_allclose(R.entries @ t, 0, atol=1e-12)


@pytest.mark.parametrize("n, order", [(1, 1), (2, 2), (0, 1)])
def test_rw_too_short(n, order):
    with pytest.raises(SizeError):
        rw_structure(n, order)


def test_rw_bad_order():
    with pytest.raises(ValidationError):
        rw_structure(5, 3)


def test_pinv_diagonal_rw1_3():
    np.testing.assert_allclose(np.diag(rw_structure(3, 1).spectrum.pinv), [5 / 9, 2 / 9, 5 / 9], atol=1e-14)


def test_gv_rw1_3_closed_form():
    assert math.isclose(GV_RW1_3, (50 / 729) ** (1 / 3), rel_tol=0, abs_tol=1e-15)
    assert abs(generalized_variance(rw_structure(3, 1)) - GV_RW1_3) < 1e-12


def test_scale_rw1_3():
    R = rw_structure(3, 1)
    S = scale_structure(R)
    assert S.scaled
    np.testing.assert_allclose(S.entries, GV_RW1_3 * R.entries, rtol=1e-13)
    assert abs(generalized_variance(S) - 1) < 1e-10


def test_scaling_is_fixed_point():
    S = scale_structure(rw_structure(7, 2))
    S2 = scale_structure(S)
    np.testing.assert_allclose(S2.entries, S.entries, rtol=1e-10)


def test_icar_two_disjoint_paths_scaled_per_block():
    g = parse_graph("6\n1 1 2\n2 2 1 3\n3 1 2\n4 1 5\n5 2 4 6\n6 1 5\n")
    R = icar_structure(g)
    S = scale_structure(R)
    for b in (slice(0, 3), slice(3, 6)):
        np.testing.assert_allclose(S.entries[b, b], GV_RW1_3 * R.entries[b, b], rtol=1e-13)
    assert np.all(S.entries[:3, 3:] == 0)
    assert R.rank == 4


def test_icar_singleton_keeps_zero_row():
    g = parse_graph("4\n1 1 2\n2 2 1 3\n3 1 2\n4 0\n")
    S = scale_structure(icar_structure(g))
    assert np.all(S.entries[3] == 0) and np.all(S.entries[:, 3] == 0)
    with pytest.raises(DegenerateStructureError):
        generalized_variance(icar_structure(g))


def test_icar_without_edges():
    with pytest.raises(DegenerateStructureError):
        icar_structure(AdjacencyGraph.from_edges(3, []))


def test_icar_is_path_rw1():
    np.testing.assert_array_equal(icar_structure(lattice_graph(1, 5)).entries, rw_structure(5, 1).entries)


def test_nonsymmetric_rejected():
    with pytest.raises(ValidationError):
        spectral(np.array([[1.0, 0.5], [0.0, 1.0]]))


@pytest.mark.parametrize("n", range(3, 31))
def test_ranks_rw(n):
    assert rw_structure(n, 1).rank == n - 1
    assert rw_structure(n, 2).rank == n - 2


@given(st.integers(3, 30), st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_rank_icar_random_graphs(n, seed, parts):
    rng = np.random.default_rng(seed)
    sizes = [n] + [int(rng.integers(2, 5)) for _ in range(parts - 1)]
    edges, offset = [], 0
    for s in sizes:
        g = random_connected_graph(s, rng)
        edges += [(a + offset, b + offset) for a, b in g.edges]
        offset += s
    g = AdjacencyGraph.from_edges(offset, edges)
    R = icar_structure(g)
    assert R.rank == offset - g.n_components
    w = R.spectrum.eigenvalues
    assert w.min() >= -1e-9 * w.max()
    assert np.array_equal(R.entries, R.entries.T)
    S = scale_structure(R).entries
    for comp in g.components:
        idx = np.array(comp)
        assert abs(generalized_variance(S[np.ix_(idx, idx)]) - 1) < 1e-10


def test_sample_rw1_sums_to_zero(rng):
    spec = scale_structure(rw_structure(3, 1)).spectrum
    for _ in range(20):
        assert abs(sample_igmrf(spec, rng).sum()) < 1e-12


def test_sample_rw2_constraints(rng):
    spec = scale_structure(rw_structure(5, 2)).spectrum
    x = sample_igmrf(spec, rng, size=50)
    np.testing.assert_allclose(x.sum(axis=1), 0, atol=1e-12)
    np.testing.assert_allclose(x @ np.arange(1, 6), 0, atol=1e-12)


def test_sample_covariance_matches_pinv(rng):
    spec = scale_structure(rw_structure(6, 1)).spectrum
    x = sample_igmrf(spec, rng, size=100_000)
    emp = x.T @ x / x.shape[0]
    scale = np.sqrt(np.outer(np.diag(spec.pinv), np.diag(spec.pinv)))
    assert np.max(np.abs(emp - spec.pinv) / scale) < 0.05


def test_logdensity_at_zero():
    spec = scale_structure(rw_structure(4, 1)).spectrum
    expected = -0.5 * 3 * math.log(2 * math.pi) + 0.5 * spec.log_gdet
    assert math.isclose(igmrf_logdensity(np.zeros(4), spec), expected, rel_tol=1e-14)


def test_logdensity_standard_bivariate():
    spec = identity_structure(2).spectrum
    assert math.isclose(igmrf_logdensity(np.array([1.0, 0.0]), spec), -math.log(2 * math.pi) - 0.5, rel_tol=1e-14)


def test_logdensity_eigencoordinates(rng):
    spec = scale_structure(rw_structure(3, 1)).spectrum
    x = sample_igmrf(spec, rng)
    c = spec.row_basis.T @ x
    lam = spec.positive_eigenvalues
    direct = float(np.sum(-0.5 * np.log(2 * np.pi / lam) - 0.5 * lam * c**2))
    assert math.isclose(igmrf_logdensity(x, spec), direct, rel_tol=1e-12)


def test_logdensity_null_component(rng):
    spec = scale_structure(rw_structure(5, 1)).spectrum
    x = sample_igmrf(spec, rng)
    with pytest.raises(ConstraintViolationError):
        igmrf_logdensity(x + 1.0, spec)
    assert math.isclose(igmrf_logdensity(x + 1.0, spec, project=True), igmrf_logdensity(x, spec), rel_tol=1e-12)


def test_kronecker_spectrum_matches_dense():
    A = scale_structure(rw_structure(4, 1))
    B = scale_structure(icar_structure(lattice_graph(2, 2)))
    ks = kronecker_spectral(B.spectrum, A.spectrum)
    dense = spectral(np.kron(B.entries, A.entries))
    assert ks.rank == dense.rank == 9
    np.testing.assert_allclose(ks.eigenvalues, dense.eigenvalues, atol=1e-12)
    np.testing.assert_allclose(ks.pinv, np.linalg.pinv(np.kron(B.entries, A.entries)), atol=1e-10)


def test_structure_is_read_only():
    R = rw_structure(4, 1)
    with pytest.raises(ValueError):
        R.entries[0, 0] = 5.0


def test_structure_multiplication():
    R = rw_structure(4, 1)
    np.testing.assert_array_equal((2 * R).entries, 2 * R.entries)
    assert isinstance(R * 2, StructureMatrix)
