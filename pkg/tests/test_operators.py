import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from convsemi.operators import (
    DenseMatrix,
    DiagonalSequence,
    DirichletLaplacianSpectral,
    build_lsquare_sequence,
    generator_apply,
    generator_from_spec,
    lsquare_eigenvalue,
    parse_matrix,
    semigroup_apply,
)

FAST = settings(max_examples=25, deadline=None)
matrices = arrays(np.float64, (3, 3), elements=st.floats(-2, 2))
times = st.floats(0.0, 1.5)


@FAST
@given(a=matrices, t=times, s=times)
def test_semigroup_law(a, t, s):
    A = DenseMatrix(a)
    assert np.allclose(A.expm(t + s), A.expm(t) @ A.expm(s), rtol=1e-10, atol=1e-10)


@FAST
@given(a=matrices, t=st.floats(0.1, 1.0))
def test_derivative_is_generator(a, t):
    A = DenseMatrix(a)
    h = 1e-5
    fd = (A.expm(t + h) - A.expm(t - h)) / (2 * h)
    assert np.allclose(fd, a @ A.expm(t), rtol=1e-6, atol=1e-6)


@FAST
@given(vals=st.lists(st.floats(-3, 3), min_size=1, max_size=5), t=times)
def test_diagonal_matches_dense(vals, t):
    D = DiagonalSequence(vals)
    assert np.allclose(np.diag(D.expm(t)), DenseMatrix(np.diag(vals)).expm(t), rtol=1e-12, atol=1e-12)


def test_expm_stack_shapes():
    t = np.linspace(0, 1, 7)
    assert DenseMatrix(np.eye(2)).expm(t).shape == (7, 2, 2)
    assert DiagonalSequence([1.0, 2.0, 3.0]).expm(t).shape == (7, 3)


@pytest.mark.parametrize("m", range(1, 9))
def test_lsquare_modulus(m):
    a = lsquare_eigenvalue(m, 1.0)
    for t in (0.1, 0.5, 0.9):
        assert abs(np.exp(a * t)) == pytest.approx(math.exp(m * t), rel=1e-12)
    assert abs(a) == pytest.approx(math.exp(m) / m, rel=1e-14)


def test_lsquare_second_mode():
    a2 = lsquare_eigenvalue(2, 1.0)
    assert a2.real == 2.0
    assert a2.imag == pytest.approx(math.sqrt(math.exp(4) / 4 - 4), rel=1e-15)


def test_lsquare_rejects_small_modulus():
    with pytest.raises(ValueError):
        lsquare_eigenvalue(1, 0.1)
    assert build_lsquare_sequence(1.0, 8).dim == 8


def test_dirichlet_eigenvalues():
    assert np.array_equal(DirichletLaplacianSpectral(3).eigenvalues(), [1, 4, 9])
    assert np.array_equal(DirichletLaplacianSpectral(2, -1).eigenvalues(), [-1, -4])
    with pytest.raises(ValueError):
        DirichletLaplacianSpectral(2, 0)


def test_apply_helpers():
    A = DenseMatrix([[0, 1], [0, 0]])
    assert np.allclose(semigroup_apply(A, 2.0, [0, 1]), [2, 1])
    assert np.allclose(generator_apply(A, [0, 1]), [1, 0])
    D = DiagonalSequence([-1.0])
    assert semigroup_apply(D, 1.0, [1.0])[0] == pytest.approx(math.exp(-1))
    with pytest.raises(ValueError, match="non-negative"):
        semigroup_apply(A, -1.0, [1, 0])
    with pytest.raises(ValueError, match="dimension"):
        generator_apply(A, [1, 0, 0])


def test_parse_matrix():
    m = parse_matrix("[[1, [0, 2]], [3.5, -1]]")
    assert m[0, 1] == 2j and m[1, 0] == 3.5
    for bad in ("[[1, 2]", "[1, 2]", "[[1, [1, 2, 3]]]"):
        with pytest.raises(ValueError):
            parse_matrix(bad)


def test_generator_from_spec():
    assert isinstance(generator_from_spec({"type": "dense", "matrix": "[[0, 1], [0, 0]]"}), DenseMatrix)
    d = generator_from_spec({"type": "diag", "values": "-1, [0, 1]"})
    assert np.array_equal(d.eigenvalues(), [-1, 1j])
    assert generator_from_spec({"TYPE": "lsquare", "T": "1", "M": "4"}).dim == 4
    assert generator_from_spec({"type": "dirichlet", "m": "3", "sign": "-1"}).eigenvalues()[2] == -9
    with pytest.raises(ValueError, match="unknown generator"):
        generator_from_spec({"type": "sparse"})
    with pytest.raises(ValueError, match="matrix"):
        generator_from_spec({"type": "dense"})


def test_dense_validation():
    with pytest.raises(ValueError, match="square"):
        DenseMatrix(np.zeros((2, 3)))
    with pytest.raises(ValueError, match="finite"):
        DenseMatrix([[np.inf]])
