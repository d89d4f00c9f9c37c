"""The resolvent matrix ``G(Lambda)`` and the half-line problem ``u' - G u = f``.

Only the stable invariant subspace is ever exponentiated.  Solutions are
returned as :class:`~lopa.profile.ExponentialProfile` objects, so their norms
and traces are exact up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg.lapack import ztrsen

from .errors import (DimensionAnomaly, LopatinskiSingular, NearImaginaryEigenvalue,
                     ResonantMode)
from .profile import ExponentialProfile
from .system import FirstOrderSystem, Frequency, cluster_values, validate_system

HERSCH_TOL = 1e-10
CLUSTER_TOL = 1e-10
RESONANCE_TOL = 1e-8
SINGULAR_TOL = 1e-10


@dataclass(frozen=True)
class ResolventMatrix:
    G: np.ndarray
    freq: Frequency | None = None
    eigenvalues: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        G = np.array(self.G, dtype=complex)
        G.setflags(write=False)
        object.__setattr__(self, "G", G)
        if self.eigenvalues is None:
            object.__setattr__(self, "eigenvalues", np.linalg.eigvals(G))

    @property
    def n(self) -> int:
        return self.G.shape[0]

    @property
    def gap(self) -> float:
        """Smallest ``|Re mu|`` over the spectrum."""
        return float(np.min(np.abs(self.eigenvalues.real))) if self.n else math.inf

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.G, 2))


def resolvent_matrix(sys: FirstOrderSystem, freq: Frequency) -> ResolventMatrix:
    """``G = -A_d^{-1} ((gamma + i tau) I + i sum_j eta_j A^j)``."""
    if len(freq.eta) != sys.d - 1:
        raise ValueError(f"frequency has {len(freq.eta)} tangential components, expected {sys.d - 1}")
    validate_system(sys)
    rhs = freq.lam * np.eye(sys.n, dtype=complex)
    for eta_j, a in zip(freq.eta, sys.tangential):
        rhs = rhs + 1j * eta_j * a
    lu = sla.lu_factor(sys.normal)
    G = -sla.lu_solve(lu, rhs)
    return ResolventMatrix(G, freq)


@dataclass
class HerschReport:
    passed: bool
    worst_eigenvalue: complex
    threshold: float


def check_hersch(Gm: ResolventMatrix, tol: float = HERSCH_TOL) -> HerschReport:
    """Pass iff every eigenvalue has ``|Re mu| > tol (1 + ||G||)``."""
    thr = tol * (1.0 + Gm.norm)
    ev = Gm.eigenvalues
    if ev.size == 0:
        return HerschReport(True, complex("nan"), thr)
    i = int(np.argmin(np.abs(ev.real)))
    return HerschReport(bool(abs(ev[i].real) > thr), complex(ev[i]), thr)


class SubspaceBasis:
    """Orthonormal basis ``V`` of an invariant subspace, with ``T = V^H G V``.

    For the stable subspace, ``T`` is upper triangular and its modal
    decomposition (clusters of nearly equal eigenvalues, each a shifted
    nilpotent block) is computed on first use.
    """

    def __init__(self, V, kind, T):
        self.V = V
        self.kind = kind
        self.T = T
        self._modal = None

    @property
    def dim(self) -> int:
        return self.V.shape[1]

    def modal(self):
        if self._modal is None:
            self._modal = _modal_decomposition(self.T)
        return self._modal


def _modal_decomposition(T):
    """Return ``(W, Winv, blocks)`` with ``T = W diag(mu_b I + N_b) Winv``.

    ``blocks`` is a list of ``(start, stop, mu_b, N_b)`` with ``N_b`` strictly
    upper triangular.
    """
    m = T.shape[0]
    if m == 0:
        return np.zeros((0, 0), complex), np.zeros((0, 0), complex), []
    tol = CLUSTER_TOL * (1.0 + np.linalg.norm(T, 2))
    ev = np.diag(T).copy()
    groups = cluster_values(ev, tol)
    centers = [ev[g].mean() for g in groups]
    Tw = np.array(T, dtype=complex)
    Qw = np.eye(m, dtype=complex)
    bounds, pos = [], 0
    for ci in range(len(centers)):
        diag = np.diag(Tw)
        member = np.array([int(np.argmin([abs(z - c) for c in centers])) == ci for z in diag])
        select = member.copy()
        select[:pos] = True
        size = int(member[pos:].sum())
        if len(centers) > 1:
            Tw, Qw, _, _, _, _, info = ztrsen(select.astype(np.int32), Tw, Qw, job="N")
            if info != 0:
                raise NearImaginaryEigenvalue("Schur reordering failed")
        bounds.append((pos, pos + size))
        pos += size
    P = np.eye(m, dtype=complex)
    for s, e in bounds[:-1]:
        A = Tw[s:e, s:e]
        B = Tw[e:, e:]
        C = Tw[s:e, e:]
        X = sla.solve_sylvester(A, -B, -C)
        Y = np.eye(m, dtype=complex)
        Y[s:e, e:] = X
        Yi = np.eye(m, dtype=complex)
        Yi[s:e, e:] = -X
        Tw = Yi @ Tw @ Y
        P = P @ Y
    W = Qw @ P
    Winv = np.linalg.solve(P, Qw.conj().T)
    blocks = []
    for s, e in bounds:
        D = Tw[s:e, s:e]
        mu = complex(np.mean(np.diag(D)))
        N = np.triu(D - mu * np.eye(e - s), 1)
        blocks.append((s, e, mu, N))
    return W, Winv, blocks


def _ordered_schur(G, stable: bool):
    T, Z, sdim = sla.schur(G, output="complex", sort="lhp" if stable else "rhp")
    return T[:sdim, :sdim], Z[:, :sdim]


def stable_subspace(Gm: ResolventMatrix, expected_dim: int | None = None,
                    tol: float = HERSCH_TOL):
    """Orthonormal bases of the stable and unstable invariant subspaces of ``G``."""
    h = check_hersch(Gm, tol)
    if not h.passed:
        raise NearImaginaryEigenvalue(
            f"eigenvalue {h.worst_eigenvalue} is within {h.threshold:.2e} of the imaginary axis",
            eigenvalue=h.worst_eigenvalue)
    G = Gm.G
    Ts, Vs = _ordered_schur(G, True)
    Tu, Vu = _ordered_schur(G, False)
    if Vs.shape[1] + Vu.shape[1] != Gm.n:
        raise NearImaginaryEigenvalue("stable and unstable dimensions do not add up")
    if expected_dim is not None and Vs.shape[1] != expected_dim:
        raise DimensionAnomaly(
            f"stable subspace has dimension {Vs.shape[1]}, expected {expected_dim}")
    return SubspaceBasis(Vs, "stable", Ts), SubspaceBasis(Vu, "unstable", Tu)


def propagate(Gm: ResolventMatrix, Vs: SubspaceBasis, coeffs, x: float) -> np.ndarray:
    """``exp(x G) V c`` computed on the stable block only."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    c = np.asarray(coeffs, dtype=complex)
    if x == 0:
        return Vs.V @ c
    return Vs.V @ (sla.expm(x * Vs.T) @ c)


def homogeneous_profile(Vs: SubspaceBasis, coeffs) -> ExponentialProfile:
    """``x -> exp(x G) V c`` written as an exponential profile."""
    n = Vs.V.shape[0]
    c = np.asarray(coeffs, dtype=complex)
    if Vs.dim == 0:
        return ExponentialProfile.zero(n)
    W, Winv, blocks = Vs.modal()
    z = Winv @ c
    VW = Vs.V @ W
    terms = []
    for s, e, mu, N in blocks:
        acc = z[s:e]
        for p in range(e - s):
            if not np.any(acc):
                break
            terms.append((VW[:, s:e] @ acc / math.factorial(p), mu, p))
            acc = N @ acc
    return ExponentialProfile(n, terms)


def particular_profile(Gm: ResolventMatrix, f: ExponentialProfile) -> ExponentialProfile:
    """Decaying solution of ``w' - G w = f`` built term by term.

    For a forcing term ``x^m e^{mu x} v`` the ansatz ``sum_{j<=m} x^j e^{mu x}
    w_j`` gives ``(mu - G) w_m = v`` and ``(mu - G) w_j = -(j + 1) w_{j+1}``.
    """
    n = Gm.n
    G = Gm.G
    thr = RESONANCE_TOL * (1.0 + Gm.norm)
    by_mu = {}
    for t in f.terms:
        by_mu.setdefault(t.mu, []).append(t)
    out = []
    for mu, ts in by_mu.items():
        dist = np.min(np.abs(Gm.eigenvalues - mu)) if n else math.inf
        if dist <= thr:
            raise ResonantMode(f"forcing exponent {mu} is an eigenvalue of G (distance {dist:.2e})")
        lu = sla.lu_factor(mu * np.eye(n) - G)
        for t in ts:
            w = sla.lu_solve(lu, t.v)
            out.append((w, mu, t.m))
            for j in range(t.m - 1, -1, -1):
                w = sla.lu_solve(lu, -(j + 1) * w)
                out.append((w, mu, j))
    return ExponentialProfile(n, out)


@dataclass
class ResolventSolution:
    u: ExponentialProfile
    coefficients: np.ndarray
    sigma: float
    boundary_residual: float
    G: ResolventMatrix = field(repr=False)
    f: ExponentialProfile = field(repr=False)

    def equation_residual(self) -> ExponentialProfile:
        """``u' - G u - f`` in the profile algebra (canonicalized)."""
        return self.u.derivative() - self.u.apply(self.G.G) - self.f

    def relative_equation_residual(self) -> float:
        r = self.equation_residual()
        scale = self.u.derivative().norm() + self.u.apply(self.G.G).norm() + self.f.norm()
        return r.norm() / scale if scale > 0 else r.norm()


def boundary_sigma(gamma, V) -> float:
    """Smallest singular value of ``Gamma`` restricted to ``range(V)``."""
    k, m = gamma.shape[0], V.shape[1]
    if m == 0:
        return math.inf
    if k < m:
        return 0.0
    s = np.linalg.svd(gamma @ V, compute_uv=False)
    return float(s[m - 1])


def solve_resolvent(Gm: ResolventMatrix, gamma, f: ExponentialProfile | None, g,
                    stable: SubspaceBasis | None = None,
                    singular_tol: float = SINGULAR_TOL) -> ResolventSolution:
    """Unique ``L^2`` solution of ``u' - G u = f``, ``Gamma u(0) = g``."""
    n = Gm.n
    gamma = np.asarray(gamma, dtype=complex).reshape(-1, n)
    k = gamma.shape[0]
    g = np.asarray(g, dtype=complex).reshape(k)
    if f is None:
        f = ExponentialProfile.zero(n)
    if stable is None:
        stable, _ = stable_subspace(Gm)
    up = particular_profile(Gm, f)
    m = stable.dim
    sigma = boundary_sigma(gamma, stable.V)
    gnorm = float(np.linalg.norm(gamma, 2)) if gamma.size else 0.0
    if k != m or sigma <= singular_tol * max(gnorm, 1e-300):
        raise LopatinskiSingular(
            f"boundary matrix restricted to the stable subspace is singular "
            f"(k = {k}, dim E_- = {m}, sigma = {sigma:.3e})", sigma=sigma)
    rhs = g - gamma @ up.trace()
    c = np.linalg.solve(gamma @ stable.V, rhs) if m else np.zeros(0, complex)
    u = up + homogeneous_profile(stable, c)
    bres = float(np.linalg.norm(gamma @ u.trace() - g)) if k else 0.0
    return ResolventSolution(u, c, sigma, bres, Gm, f)
