import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from a2gnn.linalg import CsrMatrix
from a2gnn.spectral import operator_norm
from a2gnn.transition import TransitionScheme, build_transition, propagate
from oracles import dense_sigma_max, dense_transition, random_adjacency


def csr(a):
    return CsrMatrix.from_dense(np.asarray(a, dtype=np.float32))


def test_two_node_path_sym():
    P = build_transition(csr([[0, 1], [1, 0]]), "sym")
    np.testing.assert_allclose(P.to_dense(), [[0.5, 0.5], [0.5, 0.5]], atol=1e-7)


def test_triangle_rw():
    P = build_transition(csr(np.ones((3, 3)) - np.eye(3)), "rw")
    np.testing.assert_allclose(P.to_dense(), np.full((3, 3), 1 / 3), atol=1e-7)


def test_isolated_node_no_loop():
    P = build_transition(CsrMatrix.zeros(1, 1), "no_loop")
    assert P.shape == (1, 1) and P.nnz == 0


@pytest.mark.parametrize("kind", ["sym", "rw", "diff"])
def test_isolated_nodes_safe_with_self_loops(kind):
    P = build_transition(CsrMatrix.zeros(3, 3), kind)
    assert np.all(np.isfinite(P.values))


def test_scheme_validation():
    assert TransitionScheme("no-loop").kind == "no_loop"
    with pytest.raises(ValueError):
        TransitionScheme("ppr")
    with pytest.raises(ValueError):
        TransitionScheme("diff", 0)


@pytest.mark.parametrize("kind", ["sym", "no_loop", "rw", "diff"])
def test_matches_dense_oracle(rng, kind):
    for n in (1, 2, 5, 17, 40, 64):
        A = random_adjacency(rng, n)
        P = build_transition(csr(A), TransitionScheme(kind, 10))
        np.testing.assert_allclose(P.to_dense(np.float64), dense_transition(A, kind), atol=1e-6)


def test_diffusion_truncation_parameter(rng):
    A = random_adjacency(rng, 12, 0.3)
    for p in (1, 3):
        P = build_transition(csr(A), TransitionScheme("diff", p))
        np.testing.assert_allclose(P.to_dense(np.float64), dense_transition(A, "diff", p), atol=1e-6)


def test_rw_rows_sum_to_one(rng):
    A = random_adjacency(rng, 30)
    P = build_transition(csr(A), "rw")
    np.testing.assert_allclose(P.row_sums(), 1.0, atol=1e-6)


@pytest.mark.parametrize("kind", ["sym", "no_loop"])
def test_symmetric_schemes_are_symmetric(rng, kind):
    P = build_transition(csr(random_adjacency(rng, 25)), kind)
    D = P.to_dense(np.float64)
    np.testing.assert_allclose(D, D.T, atol=1e-6)


def test_sym_operator_norm_at_most_one(rng):
    for _ in range(10):
        n = int(rng.integers(2, 65))
        P = build_transition(csr(random_adjacency(rng, n)), "sym")
        assert operator_norm(P) <= 1 + 1e-4
        assert dense_sigma_max(P.to_dense(np.float64)) <= 1 + 1e-4


# -- propagate -------------------------------------------------------------


def test_propagate_k0_returns_x(rng):
    X = rng.standard_normal((4, 3)).astype(np.float32)
    out = propagate(CsrMatrix.identity(4), X, 0)
    np.testing.assert_array_equal(out, X)
    assert out is not X


def test_propagate_idempotent_matrix():
    P = csr(np.full((2, 2), 0.5))
    np.testing.assert_allclose(propagate(P, np.eye(2), 5), [[0.5, 0.5], [0.5, 0.5]], atol=1e-7)


def test_propagate_matches_dense_power(rng):
    A = random_adjacency(rng, 20)
    P = build_transition(csr(A), "sym")
    X = rng.standard_normal((20, 3))
    Pd = P.to_dense(np.float64)
    np.testing.assert_allclose(propagate(P, X, 4), np.linalg.matrix_power(Pd, 4) @ X, atol=1e-5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 4), st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_propagate_composes(a, b, seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(1, 30))
    P = build_transition(csr(random_adjacency(r, n)), "rw")
    X = r.standard_normal((n, 2)).astype(np.float32)
    np.testing.assert_allclose(propagate(P, X, a + b), propagate(P, propagate(P, X, b), a),
                               atol=1e-5)


def test_propagate_shape_error():
    with pytest.raises(ValueError):
        propagate(CsrMatrix.identity(3), np.zeros((2, 2)), 1)
