import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fcopt.errors import DimensionError, NotSPDError
from fcopt.linalg import NormOperator, cholesky, dual_norm, norm, spd_solve


@pytest.mark.parametrize(
    "B, x, expected",
    [
        (NormOperator.identity(2), [3.0, 4.0], 5.0),
        (NormOperator("diagonal", [4.0, 1.0]), [0.0, 0.0], 0.0),
        (NormOperator("diagonal", [4.0, 1.0]), [1.0, 2.0], np.sqrt(8.0)),
        (NormOperator("dense", [[4.0, 0.0], [0.0, 1.0]]), [1.0, 2.0], np.sqrt(8.0)),
    ],
)
def test_norm_examples(B, x, expected):
    assert norm(B, x) == pytest.approx(expected, rel=1e-15, abs=0)


@pytest.mark.parametrize(
    "B, g, expected",
    [
        (NormOperator.identity(2), [0.0, 2.0], 2.0),
        (NormOperator("diagonal", [4.0, 1.0]), [2.0, 0.0], 1.0),
        (NormOperator("dense", [[4.0, 0.0], [0.0, 1.0]]), [0.0, 0.0], 0.0),
    ],
)
def test_dual_norm_examples(B, g, expected):
    assert dual_norm(B, g) == pytest.approx(expected, rel=1e-15, abs=0)


@pytest.mark.parametrize(
    "A, rhs, expected",
    [
        (np.eye(2), [0.3, -1.2], [0.3, -1.2]),
        (np.diag([2.0, 4.0]), [2.0, 4.0], [1.0, 1.0]),
        (np.array([[2.0, 1.0], [1.0, 2.0]]), [3.0, 3.0], [1.0, 1.0]),
    ],
)
def test_spd_solve_examples(A, rhs, expected):
    out = spd_solve(A, rhs)
    np.testing.assert_allclose(out, expected, rtol=1e-14)
    assert np.linalg.norm(A @ out - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_non_spd_rejected():
    with pytest.raises(NotSPDError):
        cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(NotSPDError):
        NormOperator("dense", [[1.0, 0.0], [0.0, -1.0]])


def test_dimension_mismatch():
    B = NormOperator.identity(3)
    with pytest.raises(DimensionError):
        B.norm(np.ones(2))
    with pytest.raises(DimensionError):
        B.dual_norm(np.ones(4))


def _random_spd(rng, n):
    M = rng.normal(size=(n, n))
    return M @ M.T + 0.5 * np.eye(n)


@pytest.mark.parametrize("kind", ["identity", "diagonal", "dense"])
def test_cauchy_schwarz_and_consistency(kind):
    rng = np.random.default_rng(7)
    n = 4
    data = {"identity": None, "diagonal": rng.uniform(0.2, 3.0, n),
            "dense": _random_spd(rng, n)}[kind]
    B = NormOperator(kind, data, n=n)
    X = rng.normal(size=(1000, n))
    G = rng.normal(size=(1000, n))
    for x, g in zip(X, G):
        assert abs(g @ x) <= B.dual_norm(g) * B.norm(x) * (1 + 1e-10)
        # ||x|| = ||Bx||_* and the solve round trip
        assert B.norm(x) == pytest.approx(B.dual_norm(B.apply(x)), rel=1e-10)
        np.testing.assert_allclose(B.apply(B.solve(g)), g, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(B.norms(X), [B.norm(x) for x in X], rtol=1e-12)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 3, elements=st.floats(-1e3, 1e3)),
       arrays(np.float64, 3, elements=st.floats(0.01, 100.0)))
def test_norm_zero_iff_zero(x, d):
    B = NormOperator("diagonal", d)
    v = B.norm(x)
    assert v >= 0
    assert (v == 0) == bool(np.all(x == 0))
