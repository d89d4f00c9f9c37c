import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from lopa.errors import (DegenerateSplitting, Infeasible, NotNegativeOnKernel, RankDeficient,
                         WrongBoundaryCount)
from lopa.symmetrizer import (Symmetrizer, adjoint_bc, adjoint_forward_form,
                              build_dissipative_bc, check_maximal_dissipativity,
                              find_symmetrizer, symmetrizer_residual)
from lopa.system import FirstOrderSystem

from oracles import random_symmetrizable

WAVE = np.array([[0.0, 1.0], [1.0, 0.0]])
I2 = Symmetrizer.from_matrix(np.eye(2))


def sys1(a):
    return FirstOrderSystem((np.asarray(a, dtype=float),))


def test_symmetric_input_gives_zero_residual():
    S = find_symmetrizer(FirstOrderSystem((WAVE, np.diag([1.0, 2.0]))))
    assert S.residual <= 1e-12
    assert S.lambda_min > 0


def test_diagonalizable_nonsymmetric():
    A = np.array([[1.0, 1.0], [0.0, 2.0]])
    witness = np.array([[1.0, -1.0], [-1.0, 2.0]])
    assert np.allclose(witness @ A, (witness @ A).T)
    S = find_symmetrizer(sys1(A))
    assert S.residual <= 1e-10
    assert S.lambda_min > 1e-6
    # admissible matrices are T^{-T} D T^{-1} with D diagonal positive
    T = np.array([[1.0, 1.0], [0.0, 1.0]])
    D = T.T @ S.S @ T
    assert abs(D[0, 1]) <= 1e-10 and np.all(np.diag(D) > 0)


def test_jordan_block_infeasible():
    with pytest.raises(Infeasible):
        find_symmetrizer(sys1([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(Infeasible):
        find_symmetrizer(sys1([[1.0, 1.0], [0.0, 1.0]]))


@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(1, 2),
       st.sampled_from([0.01, 0.5, 7.0, 300.0]))
def test_symmetrizer_found_and_scale_equivariant(seed, n, d, s):
    rng = np.random.default_rng(seed)
    _, A = random_symmetrizable(rng, n, d)
    sys = FirstOrderSystem(tuple(A))
    S = find_symmetrizer(sys)
    assert np.array_equal(S.S, S.S.T)
    assert S.lambda_min > 1e-6
    assert symmetrizer_residual(S.S, sys) <= 1e-6 * np.linalg.norm(S.S, 2) * max(
        np.linalg.norm(a, 2) for a in A)
    S2 = find_symmetrizer(sys.scaled(s))
    assert S2.lambda_min > 1e-6


def test_certificate_diagonal():
    sys = sys1(np.diag([1.0, -1.0]))
    cert = check_maximal_dissipativity(I2, sys, [[1.0, 0.0]])
    assert cert.valid
    assert cert.c == pytest.approx(1.0)
    assert cert.kernel_value == pytest.approx(-1.0)


def test_certificate_wave():
    cert = check_maximal_dissipativity(I2, sys1(WAVE), [[1 / math.sqrt(2), 1 / math.sqrt(2)]])
    assert cert.valid
    assert cert.c == pytest.approx(1.0)
    assert cert.C == pytest.approx(2.0)


def test_certificate_c_is_sharp_for_wave():
    # with c = 1 no C below 2 works: h = (1, 0) gives -(A h, h) = 0 and |Gamma h|^2 = 1/2
    h = np.array([1.0, 0.0])
    g = np.array([1.0, 1.0]) / math.sqrt(2)
    assert -(h @ WAVE @ h) - 1.0 + 2.0 * (g @ h) ** 2 == pytest.approx(0.0)


def test_not_negative_on_kernel():
    with pytest.raises(NotNegativeOnKernel):
        check_maximal_dissipativity(I2, sys1(np.diag([1.0, -1.0])), [[0.0, 1.0]])


def test_wrong_count_and_rank():
    with pytest.raises(WrongBoundaryCount):
        check_maximal_dissipativity(I2, sys1(np.diag([1.0, -1.0])), np.eye(2))
    with pytest.raises(RankDeficient):
        check_maximal_dissipativity(I2, sys1(np.diag([1.0, 1.0])), [[1.0, 1.0], [2.0, 2.0]])


def test_build_bc_examples():
    assert np.allclose(build_dissipative_bc(I2, sys1(np.diag([1.0, -1.0]))), [[1.0, 0.0]])
    tg = build_dissipative_bc(I2, sys1(WAVE))
    assert np.allclose(tg, [[1 / math.sqrt(2), 1 / math.sqrt(2)]])
    empty = build_dissipative_bc(I2, sys1(-np.eye(2)))
    assert empty.shape == (0, 2)
    cert = check_maximal_dissipativity(I2, sys1(-np.eye(2)), empty)
    assert cert.valid and cert.n_plus == 0


def test_build_bc_degenerate():
    S = Symmetrizer.from_matrix(np.eye(2))
    # S A_d singular cannot come from a validated system, but the splitting guards it
    sys = FirstOrderSystem((np.diag([1.0, 1e-14]),))
    with pytest.raises(DegenerateSplitting):
        build_dissipative_bc(S, sys)


@given(st.integers(0, 10_000), st.integers(1, 6), st.integers(1, 2))
def test_built_bc_certificate(seed, n, d):
    rng = np.random.default_rng(seed)
    Sm, A = random_symmetrizable(rng, n, d)
    sys = FirstOrderSystem(tuple(A))
    S = Symmetrizer.from_matrix(Sm, sys)
    tg = build_dissipative_bc(S, sys)
    cert = check_maximal_dissipativity(S, sys, tg, samples=300)
    assert cert.valid
    M = Sm @ A[-1]
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    # the kernel of the built matrix is the negative eigenspace, so c is the
    # smallest positive eigenvalue of -S A_d
    neg = -w[w < 0]
    if neg.size:
        assert cert.c == pytest.approx(neg.min(), rel=1e-10, abs=1e-10)


def test_adjoint_examples():
    assert np.allclose(adjoint_bc(sys1(np.diag([1.0, -1.0])), [[1.0, 0.0]]), [[0.0, 1.0]])
    assert np.allclose(adjoint_bc(sys1(WAVE), [[1.0, 0.0]]), [[1.0, 0.0]])
    assert adjoint_bc(sys1(WAVE), np.eye(2)).shape == (0, 2)
    star, gs = adjoint_forward_form(sys1(WAVE), [[1.0, 0.0]])
    assert np.array_equal(star.normal, -WAVE)
    assert np.allclose(gs, [[1.0, 0.0]])


@given(st.integers(0, 10_000), st.integers(2, 6), st.integers(1, 3))
def test_adjoint_properties(seed, n, d):
    rng = np.random.default_rng(seed)
    A = [rng.standard_normal((n, n)) for _ in range(d)]
    sys = FirstOrderSystem(tuple(A))
    k = int(rng.integers(0, n + 1))
    gm = rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))
    gs = adjoint_bc(sys, gm)
    assert gs.shape == (n - k, n)
    if n - k:
        assert np.linalg.matrix_rank(gs) == n - k
        # Gamma* (A_d ker Gamma) fills C^{n-k}
        Q = sla.null_space(gm) if k else np.eye(n)
        assert np.linalg.matrix_rank(gs @ A[-1] @ Q, tol=1e-8) == n - k
    star, _ = adjoint_forward_form(sys, gm)
    back, _ = adjoint_forward_form(star, gs)
    for a, b in zip(sys.A, back.A):
        assert np.array_equal(a, b)


def test_symmetrizer_inverse():
    S = Symmetrizer.from_matrix([[2.0, 1.0], [1.0, 3.0]])
    assert np.allclose(S.inverse().S @ S.S, np.eye(2))
