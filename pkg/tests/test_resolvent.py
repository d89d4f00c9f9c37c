import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lopa.errors import LopatinskiSingular, NearImaginaryEigenvalue, ResonantMode
from lopa.oracle import green_solution
from lopa.profile import ExponentialProfile
from lopa.resolvent import (ResolventMatrix, check_hersch, homogeneous_profile, propagate,
                            resolvent_matrix, solve_resolvent, stable_subspace)
from lopa.system import FirstOrderSystem, Frequency

from oracles import random_symmetrizable, resolvent_direct

WAVE = np.array([[0.0, 1.0], [1.0, 0.0]])


def wave_G(tau=0.0, gamma=1.0):
    return resolvent_matrix(FirstOrderSystem((WAVE,)), Frequency(tau, (), gamma))


def test_scalar_resolvent():
    G = resolvent_matrix(FirstOrderSystem(([[2.0]],)), Frequency(0.0, (), 1.0))
    assert np.allclose(G.G, [[-0.5]])


@pytest.mark.parametrize("tau,gamma", [(0.0, 1.0), (2.5, 0.1), (-3.0, 4.0)])
def test_wave_resolvent(tau, gamma):
    assert np.allclose(wave_G(tau, gamma).G, -(gamma + 1j * tau) * WAVE)


def test_two_dimensional_resolvent():
    # A^1 = I tangential, A^2 = diag(1, -1) normal
    sys = FirstOrderSystem((np.eye(2), np.diag([1.0, -1.0])))
    G = resolvent_matrix(sys, Frequency(1.0, (1.0,), 1.0))
    assert np.allclose(G.G, [[-1 - 2j, 0], [0, 1 + 2j]])
    # the other labeling (A^1 tangential = diag(1,-1), A^2 = I normal)
    sys2 = FirstOrderSystem((np.diag([1.0, -1.0]), np.eye(2)))
    G2 = resolvent_matrix(sys2, Frequency(1.0, (1.0,), 1.0))
    assert np.allclose(G2.G, [[-1 - 2j, 0], [0, -1]])


@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(1, 3))
def test_resolvent_matches_explicit_inverse(seed, n, d):
    rng = np.random.default_rng(seed)
    _, A = random_symmetrizable(rng, n, d)
    tau, gamma = rng.normal(), rng.uniform(0.01, 5)
    eta = tuple(rng.normal(size=d - 1))
    G = resolvent_matrix(FirstOrderSystem(tuple(A)), Frequency(tau, eta, gamma))
    ref = resolvent_direct(A, tau, eta, gamma)
    assert np.allclose(G.G, ref, rtol=1e-10, atol=1e-10 * np.abs(ref).max())


def test_hersch_examples():
    rep = check_hersch(wave_G())
    assert rep.passed
    assert sorted(np.linalg.eigvals(wave_G().G).real) == pytest.approx([-1, 1])
    bad = check_hersch(ResolventMatrix(np.diag([1j, -1.0])), tol=1e-8)
    assert not bad.passed and bad.worst_eigenvalue == 1j
    assert check_hersch(ResolventMatrix([[-0.5 / 3.0]])).passed


def test_stable_subspace_examples():
    s, u = stable_subspace(ResolventMatrix(np.diag([-1.0, 2.0])))
    assert s.dim == 1 and abs(abs(s.V[0, 0]) - 1) < 1e-14
    s, _ = stable_subspace(wave_G())
    v = s.V[:, 0]
    assert abs(abs(np.vdot(v, np.array([1, 1]) / math.sqrt(2))) - 1) < 1e-12
    with pytest.raises(NearImaginaryEigenvalue):
        stable_subspace(ResolventMatrix(np.diag([1j, -1.0])))


def test_propagate_examples():
    Gm = ResolventMatrix(np.diag([-1.0, 2.0]))
    s, _ = stable_subspace(Gm)
    c = s.V.conj().T @ np.array([1.0, 0.0])
    assert np.allclose(propagate(Gm, s, c, 1.0), [math.exp(-1), 0])
    assert np.allclose(propagate(Gm, s, c, 0.0), [1, 0])
    Gw = wave_G()
    sw, _ = stable_subspace(Gw)
    u0 = np.array([1.0, 1.0]) / math.sqrt(2)
    cw = sw.V.conj().T @ u0
    assert np.allclose(propagate(Gw, sw, cw, 2.0), math.exp(-2) * u0)


def random_G(seed, n):
    rng = np.random.default_rng(seed)
    _, A = random_symmetrizable(rng, n, 2)
    freq = Frequency(rng.normal(), (rng.normal(),), rng.uniform(0.05, 3))
    return resolvent_matrix(FirstOrderSystem(tuple(A)), freq), rng


@given(st.integers(0, 10_000), st.integers(1, 6), st.floats(0, 3), st.floats(0, 3))
def test_basis_invariance_and_semigroup(seed, n, x1, x2):
    Gm, rng = random_G(seed, n)
    s, u = stable_subspace(Gm)
    assert s.dim + u.dim == n
    for b in (s, u):
        if b.dim:
            assert np.allclose(b.V.conj().T @ b.V, np.eye(b.dim), atol=1e-12)
            assert np.linalg.norm(Gm.G @ b.V - b.V @ (b.V.conj().T @ Gm.G @ b.V)) <= \
                1e-10 * Gm.norm
    c = rng.normal(size=s.dim) + 1j * rng.normal(size=s.dim)
    one = propagate(Gm, s, c, x1 + x2)
    mid = propagate(Gm, s, c, x1)
    two = propagate(Gm, s, s.V.conj().T @ mid, x2)
    assert np.allclose(one, two, atol=1e-10 * (1 + np.linalg.norm(c)))
    # the exponential-profile form agrees with the matrix exponential
    h = homogeneous_profile(s, c)
    assert np.allclose(h(x1), mid, atol=1e-9 * (1 + np.linalg.norm(c)))


@given(st.integers(0, 10_000), st.integers(1, 5), st.sampled_from([1e-3, 0.1, 10.0, 1e3]))
def test_homogeneity(seed, n, s):
    rng = np.random.default_rng(seed)
    _, A = random_symmetrizable(rng, n, 2)
    sys = FirstOrderSystem(tuple(A))
    f = Frequency(rng.normal(), (rng.normal(),), rng.uniform(0.1, 2))
    G1, G2 = resolvent_matrix(sys, f), resolvent_matrix(sys, f.scaled(s))
    assert np.allclose(G2.G, s * G1.G, rtol=1e-12, atol=1e-12 * s * G1.norm)
    V1, V2 = stable_subspace(G1)[0].V, stable_subspace(G2)[0].V
    if V1.shape[1]:
        cosines = np.linalg.svd(V1.conj().T @ V2, compute_uv=False)
        assert np.all(np.arccos(np.clip(cosines, -1, 1)) <= 1e-6)


def test_scalar_solve_example():
    Gm = ResolventMatrix([[-1.0]])
    f = ExponentialProfile(1, [([1.0], -2.0, 0)])
    sol = solve_resolvent(Gm, [[1.0]], f, [0.0])
    x = np.linspace(0, 4, 9)
    assert np.allclose(sol.u(x)[:, 0], -np.exp(-2 * x) + np.exp(-x))
    assert sol.equation_residual().norm() == 0.0


def test_zero_data_zero_solution():
    sol = solve_resolvent(wave_G(), [[1.0, 0.0]], None, [0.0])
    assert len(sol.u) == 0


def test_resonant_forcing():
    with pytest.raises(ResonantMode):
        solve_resolvent(ResolventMatrix([[-1.0]]), [[1.0]],
                        ExponentialProfile(1, [([1.0], -1.0, 0)]), [0.0])


def test_singular_boundary():
    with pytest.raises(LopatinskiSingular) as info:
        solve_resolvent(wave_G(), [[1.0, -1.0]], None, [1.0])
    assert info.value.sigma < 1e-12


def test_repeated_eigenvalue_jordan_chain():
    # a non-diagonalizable stable block exercises polynomial terms
    Gm = ResolventMatrix([[-1.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 2.0]])
    f = ExponentialProfile(3, [([1.0, 2.0, 3.0], -0.5 + 1j, 1)])
    sol = solve_resolvent(Gm, np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]]), f, [1.0, -1.0])
    assert sol.relative_equation_residual() <= 1e-14
    assert sol.boundary_residual <= 1e-13
    assert any(t.m == 1 and abs(t.mu + 1) < 1e-12 for t in sol.u.terms)


@pytest.mark.parametrize("seed", range(3))
def test_green_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    n = 4
    G = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    Gm = ResolventMatrix(G)
    s, _ = stable_subspace(Gm)
    k = s.dim
    gm = rng.normal(size=(k, n)) + 1j * rng.normal(size=(k, n))
    f = ExponentialProfile(n, [(rng.normal(size=n), complex(-0.7, 0.3), 0),
                               (rng.normal(size=n) * 1j, complex(-1.3, -0.8), 1)])
    g = rng.normal(size=k)
    sol = solve_resolvent(Gm, gm, f, g, s)
    xs = np.linspace(0, 10, 21)
    ref = green_solution(G, gm, lambda x: f(x), g, xs)
    err = np.linalg.norm(sol.u(xs) - ref) / np.linalg.norm(ref)
    assert err <= 1e-6
