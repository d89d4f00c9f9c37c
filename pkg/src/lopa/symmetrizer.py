"""Friedrichs symmetrizers, maximally dissipative boundary matrices, adjoints."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (DegenerateSplitting, Infeasible, NotNegativeOnKernel,
                     RankDeficient, WrongBoundaryCount)
from .system import BoundarySymbol, FirstOrderSystem

RANK_TOL = 1e-10
SYMMETRIZER_SUCCESS = 1e-6


@dataclass(frozen=True)
class Symmetrizer:
    """Positive symmetric ``S`` with every ``S A^j`` symmetric."""

    S: np.ndarray
    residual: float
    lambda_min: float

    @classmethod
    def from_matrix(cls, S, sys: FirstOrderSystem | None = None) -> "Symmetrizer":
        S = np.asarray(S, dtype=float)
        S = 0.5 * (S + S.T)
        lam = float(np.linalg.eigvalsh(S)[0])
        res = symmetrizer_residual(S, sys) if sys is not None else 0.0
        S.setflags(write=False)
        return cls(S, res, lam)

    def inverse(self) -> "Symmetrizer":
        """``S^{-1}``, which symmetrizes the time-reversed adjoint operator."""
        Si = np.linalg.inv(self.S)
        return Symmetrizer.from_matrix(Si)


def symmetrizer_residual(S, sys: FirstOrderSystem) -> float:
    return max(float(np.linalg.norm(S @ a - (S @ a).T, 2)) for a in sys.A)


def canonical_columns(B):
    """Fix the phase of each column so its largest-magnitude entry is positive real."""
    B = np.array(B, copy=True)
    for j in range(B.shape[1]):
        col = B[:, j]
        i = int(np.argmax(np.abs(col) > np.max(np.abs(col)) * (1 - 1e-9)))
        if col[i] != 0:
            B[:, j] = col * (abs(col[i]) / col[i])
    if np.iscomplexobj(B) and np.all(B.imag == 0):
        B = B.real.copy()
    return B


def _symmetric_basis(n):
    basis = []
    for a in range(n):
        for b in range(a, n):
            E = np.zeros((n, n))
            if a == b:
                E[a, a] = 1.0
            else:
                E[a, b] = E[b, a] = 1.0 / np.sqrt(2.0)
            basis.append(E)
    return basis


def symmetrizer_subspace(sys: FirstOrderSystem, rcond: float = 1e-9):
    """Frobenius-orthonormal basis of ``{S = S^T : S A^j = (A^j)^T S for all j}``."""
    E = _symmetric_basis(sys.n)
    cols = [np.concatenate([(e @ a - a.T @ e).ravel() for a in sys.A]) for e in E]
    K = np.column_stack(cols)
    scale = max(1.0, max(np.linalg.norm(a, 2) for a in sys.A))
    K = K / scale
    null = sla.null_space(K, rcond=rcond)
    return [np.tensordot(null[:, i], np.array(E), axes=1) for i in range(null.shape[1])]


def find_symmetrizer(sys: FirstOrderSystem, iterations: int = 500) -> Symmetrizer:
    """Search for a Friedrichs symmetrizer, normalized to trace ``n``.

    The admissible matrices form a linear subspace.  On its trace-``n`` slice
    the smallest eigenvalue is concave, and it is maximized by projected
    subgradient ascent with a ``1/k`` step.  Raises :class:`Infeasible` when the
    best value found is not above ``1e-6``.
    """
    n = sys.n
    basis = symmetrizer_subspace(sys)
    if not basis:
        raise Infeasible("only S = 0 symmetrizes the coefficients", best_lambda_min=0.0)
    Sb = np.array(basis)
    t = np.array([np.trace(s) for s in basis])
    tt = float(t @ t)
    if tt < 1e-20:
        raise Infeasible("every symmetrizing matrix is traceless", best_lambda_min=0.0)

    def lam_min(c):
        w, V = np.linalg.eigh(np.tensordot(c, Sb, axes=1))
        return w[0], V[:, 0]

    c = t * (n / tt)
    best_c, (best, v) = c, lam_min(c)
    step0 = 0.5 * np.sqrt(n)
    for k in range(1, iterations + 1):
        val, v = lam_min(c)
        if val > best:
            best, best_c = val, c
        g = np.einsum("i,kij,j->k", v, Sb, v)
        g = g - (t @ g / tt) * t
        gn = np.linalg.norm(g)
        if gn < 1e-14:
            break
        c = c + (step0 / k) * g / gn
    val, _ = lam_min(c)
    if val > best:
        best, best_c = val, c
    S = np.tensordot(best_c, Sb, axes=1)
    S = 0.5 * (S + S.T)
    res = symmetrizer_residual(S, sys)
    scale = np.linalg.norm(S, 2) * max(np.linalg.norm(a, 2) for a in sys.A)
    if best <= SYMMETRIZER_SUCCESS or res > 1e-6 * max(scale, 1e-300):
        raise Infeasible(
            f"no positive definite symmetrizer found (best lambda_min = {best:.3e})",
            best_lambda_min=float(best))
    S.setflags(write=False)
    return Symmetrizer(S, res, float(best))


@dataclass
class DissipativityCertificate:
    """Constants with ``-(S A_d h, h) >= c|h|^2 - C|Gamma h|^2`` for all ``h``."""

    c: float
    C: float
    kernel_value: float
    n_plus: int
    min_sample_residual: float
    valid: bool

    def to_json(self):
        return {"c": self.c, "C": self.C, "kernel_value": self.kernel_value,
                "n_plus": self.n_plus, "min_sample_residual": self.min_sample_residual,
                "valid": self.valid}


def _as_matrix(gamma, n):
    if isinstance(gamma, BoundarySymbol):
        return gamma.matrix
    g = np.asarray(gamma, dtype=complex)
    if g.size == 0:
        return np.zeros((0, n), dtype=complex)
    return np.atleast_2d(g)


def _rank(m):
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s > RANK_TOL * s[0])) if s[0] > 0 else 0


def _smallest_C(Msym, Gm, c, Q, R, tol):
    """Least ``C`` with ``(M + cI)h.h <= C|Gm h|^2`` for all ``h``; ``None`` if infinite."""
    n = Msym.shape[0]
    N = Msym + c * np.eye(n)
    if R.shape[1] == 0:
        return 0.0
    NRR = R.conj().T @ N @ R
    if Q.shape[1]:
        NQQ = Q.conj().T @ N @ Q
        NQR = Q.conj().T @ N @ R
        w, Z = np.linalg.eigh(NQQ)
        scale = max(np.linalg.norm(N, 2), 1.0)
        zero = w > -tol * scale
        if np.any(zero) and np.linalg.norm(Z[:, zero].conj().T @ NQR) > 1e-9 * scale:
            return None
        inv_w = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, w))
        pinv = (Z * inv_w) @ Z.conj().T
        K = NRR - NQR.conj().T @ pinv @ NQR
    else:
        K = NRR
    K = 0.5 * (K + K.conj().T)
    GR = Gm @ R
    W = GR.conj().T @ GR
    top = sla.eigh(K, 0.5 * (W + W.conj().T), eigvals_only=True)[-1]
    return max(float(top), 0.0)


def check_maximal_dissipativity(S: Symmetrizer, sys: FirstOrderSystem, gamma,
                                samples: int = 2000, seed: int = 0) -> DissipativityCertificate:
    """Certify that a constant boundary matrix is maximally dissipative for ``S``.

    ``c`` is the coercivity on ``ker Gamma`` (minus the largest eigenvalue of
    the compression of ``S A_d``); when the exact smallest ``C`` for that ``c``
    is infinite, ``c`` is halved.  The inequality is then checked on random
    unit vectors.
    """
    n = sys.n
    Gm = _as_matrix(gamma, n)
    k = Gm.shape[0]
    if _rank(Gm) != k:
        raise RankDeficient(f"boundary matrix has rank {_rank(Gm)} < k = {k}")
    M = S.S @ sys.normal
    M = 0.5 * (M + M.T)
    eig = np.linalg.eigvalsh(M)
    scale = max(float(np.max(np.abs(eig))), 1e-300)
    n_plus = int(np.sum(eig > RANK_TOL * scale))
    if k != n_plus:
        raise WrongBoundaryCount(f"k = {k} boundary rows but S A_d has {n_plus} positive eigenvalues")
    if k:
        _, sv, Vh = np.linalg.svd(Gm)
        R = Vh[:k].conj().T
        Q = Vh[k:].conj().T
    else:
        R = np.zeros((n, 0), dtype=complex)
        Q = np.eye(n, dtype=complex)
    if Q.shape[1]:
        kernel_value = float(np.linalg.eigvalsh(Q.conj().T @ M @ Q)[-1])
        if kernel_value >= -RANK_TOL * scale:
            raise NotNegativeOnKernel(
                f"S A_d is not negative definite on ker Gamma (max value {kernel_value:.3e})")
        c = -kernel_value
    else:
        kernel_value = float("-inf")
        c = float(np.min(np.abs(eig)))
    C = _smallest_C(M, Gm, c, Q, R, RANK_TOL)
    if C is None:
        c *= 0.5
        C = _smallest_C(M, Gm, c, Q, R, RANK_TOL)

    rng = np.random.default_rng(seed)
    H = rng.standard_normal((samples, n)) + 1j * rng.standard_normal((samples, n))
    H = np.vstack([H, np.eye(n), (Q.T if Q.size else np.zeros((0, n))),
                   (R.T if R.size else np.zeros((0, n)))])
    H /= np.linalg.norm(H, axis=1, keepdims=True)
    quad = np.real(np.einsum("si,ij,sj->s", H.conj(), M, H))
    gh = np.linalg.norm(H @ Gm.T, axis=1) ** 2 if k else np.zeros(len(H))
    resid = -quad - c + C * gh
    min_res = float(np.min(resid))
    valid = min_res >= -1e-10 * max(1.0, scale, C)
    return DissipativityCertificate(float(c), float(C), kernel_value, n_plus, min_res, bool(valid))


def build_dissipative_bc(S: Symmetrizer, sys: FirstOrderSystem) -> np.ndarray:
    """Boundary matrix ``B^T`` with ``B`` an orthonormal basis of the positive
    eigenspace of ``S A_d``; its kernel is the negative eigenspace."""
    M = S.S @ sys.normal
    M = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(M)
    scale = max(float(np.max(np.abs(w))), 1e-300)
    if np.min(np.abs(w)) <= RANK_TOL * scale:
        raise DegenerateSplitting("S A_d has an eigenvalue at zero")
    pos = w > 0
    order = np.argsort(-w[pos], kind="stable")
    B = canonical_columns(V[:, pos][:, order])
    if B.shape[1] == 0:
        return np.zeros((0, sys.n))
    return B.T.copy()


def _orthonormal_range(W):
    if W.shape[1] == 0:
        return W
    U, s, _ = np.linalg.svd(W, full_matrices=False)
    r = int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
    return U[:, :r]


def adjoint_bc(sys: FirstOrderSystem, gamma) -> np.ndarray:
    """``(n-k) x n`` matrix whose kernel is the orthogonal complement of ``A_d ker Gamma``."""
    n = sys.n
    Gm = _as_matrix(gamma, n)
    k = Gm.shape[0]
    if _rank(Gm) != k:
        raise RankDeficient(f"boundary matrix has rank {_rank(Gm)} < k = {k}")
    Q = sla.null_space(Gm) if k else np.eye(n)
    U = canonical_columns(_orthonormal_range(sys.normal @ Q))
    if U.shape[1] == 0:
        return np.zeros((0, n))
    gstar = U.conj().T
    if np.iscomplexobj(gstar) and np.all(gstar.imag == 0):
        gstar = gstar.real.copy()
    return gstar


def adjoint_forward_form(sys: FirstOrderSystem, gamma):
    """Time-reversed adjoint problem in forward form.

    Returns ``(system with matrices -(A^j)^T, adjoint boundary matrix)``.
    """
    star = FirstOrderSystem(tuple(-a.T for a in sys.A),
                            (sys.name + "-adjoint") if sys.name else "")
    return star, adjoint_bc(sys, gamma)
