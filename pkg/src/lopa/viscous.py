"""Partially parabolic systems at bounded frequencies.

The system is ``A0 u_t + sum_j A^j u_{x_j} - sum_{jk} B^{jk} u_{x_j x_k} = f``
with ``u = (u1, u2)`` and viscosity acting on ``u2`` only.  After the
Laplace-Fourier transform it is rewritten as a first-order system for
``U = (u1, u2, u2')``, to which the Lopatinski and stability machinery of the
hyperbolic modules applies unchanged.

The normal-tangential coupling term is ``-i sum_{j<d} eta_j (B^{jd} + B^{dj}) u'``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import (CharacteristicBoundary, EllipticityFailure, HyperbolicBlockCharacteristic,
                     InvalidGrid, InvalidWeights, SchemaError, StructuralFailure)
from .lopatinski import ScanResult, scan_frequencies
from .profile import ExponentialProfile
from .resolvent import ResolventMatrix
from .sampling import sphere_points
from .stability import StabilityReport, WeightedProblem, _collect, _map, evaluate_point
from .symmetrizer import Symmetrizer, check_maximal_dissipativity
from .system import (BoundarySymbol, FirstOrderSystem, Frequency, decode_matrix, encode_matrix,
                     parse_boundary, serialize_boundary)

STRUCT_TOL = 1e-12


@dataclass(frozen=True)
class SecondOrderSystem:
    n1: int
    n2: int
    A0: np.ndarray
    A: tuple
    B: tuple
    theta: float
    name: str = ""

    def __post_init__(self):
        n = self.n1 + self.n2
        A0 = np.array(self.A0, dtype=float)
        A = tuple(np.array(a, dtype=float) for a in self.A)
        d = len(A)
        B = tuple(tuple(np.array(b, dtype=float) for b in row) for row in self.B)
        if A0.shape != (n, n) or any(a.shape != (n, n) for a in A):
            raise StructuralFailure(f"coefficient matrices must be {n}x{n}")
        if len(B) != d or any(len(row) != d for row in B) or any(
                b.shape != (n, n) for row in B for b in row):
            raise StructuralFailure(f"B must be a {d}x{d} array of {n}x{n} matrices")
        for arr in (A0, *A, *(b for row in B for b in row)):
            arr.setflags(write=False)
        object.__setattr__(self, "A0", A0)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def d(self) -> int:
        return len(self.A)

    @property
    def reduced_dim(self) -> int:
        return self.n1 + 2 * self.n2

    def hyperbolic_block(self) -> tuple[FirstOrderSystem, Symmetrizer]:
        """``A0_11 v_t + sum_j A^j_11 v_{x_j}`` in normalized form with its symmetrizer."""
        n1 = self.n1
        a0 = self.A0[:n1, :n1]
        mats = tuple(np.linalg.solve(a0, a[:n1, :n1]) for a in self.A)
        return FirstOrderSystem(mats), Symmetrizer.from_matrix(a0)


@dataclass
class ViscousValidation:
    passed: bool
    theta_measured: float
    checks: dict

    def to_json(self):
        return {"verdict": "pass" if self.passed else "fail",
                "theta_measured": self.theta_measured, "checks": self.checks}


def measured_theta(sys2: SecondOrderSystem, samples: int = 200) -> float:
    n1 = sys2.n1
    worst = math.inf
    for xi in sphere_points(sys2.d, samples):
        M = sum(xi[j] * xi[k] * sys2.B[j][k][n1:, n1:] for j in range(sys2.d) for k in range(sys2.d))
        M = 0.5 * (M + M.T)
        worst = min(worst, float(np.linalg.eigvalsh(M)[0]))
    return worst


def validate_second_order(sys2: SecondOrderSystem, samples: int = 200) -> ViscousValidation:
    """Check block structure, symmetry, noncharacteristic boundary and ellipticity."""
    n, n1 = sys2.n, sys2.n1
    if sys2.n2 == 0:
        raise StructuralFailure("no parabolic block; use the hyperbolic modules")
    A0 = sys2.A0
    if np.max(np.abs(A0 - A0.T)) > STRUCT_TOL * max(1, np.max(np.abs(A0))) or \
            np.linalg.eigvalsh(0.5 * (A0 + A0.T))[0] <= 0:
        raise StructuralFailure("A0 must be symmetric positive definite")
    for j, a in enumerate(sys2.A):
        if np.max(np.abs(a - a.T)) > STRUCT_TOL * max(1, np.max(np.abs(a))):
            raise StructuralFailure(f"A[{j}] is not symmetric")
    for j, row in enumerate(sys2.B):
        for k, b in enumerate(row):
            mask = np.ones((n, n), bool)
            mask[n1:, n1:] = False
            if np.any(np.abs(b[mask]) > STRUCT_TOL * max(1, np.max(np.abs(b)))):
                raise StructuralFailure(f"B[{j}][{k}] has nonzero entries outside the (2,2) block")
    Ad = sys2.A[-1]
    s = np.linalg.svd(Ad, compute_uv=False)
    if s[-1] <= 1e-10 * max(s[0], 1.0):
        raise CharacteristicBoundary("det A_d = 0", sigma_min=float(s[-1]))
    if n1:
        s1 = np.linalg.svd(Ad[:n1, :n1], compute_uv=False)
        if s1[-1] <= 1e-10 * max(s1[0], 1.0):
            raise HyperbolicBlockCharacteristic("the hyperbolic block of A_d is singular")
    theta = measured_theta(sys2, samples)
    if theta <= 0 or theta < sys2.theta * (1 - 1e-12) - 1e-15:
        raise EllipticityFailure(
            f"measured ellipticity {theta:.3e} is below the declared theta {sys2.theta:.3e}")
    checks = {"structure": "pass", "symmetry": "pass", "noncharacteristic": "pass",
              "hyperbolic_block": "pass" if n1 else "n/a", "ellipticity": "pass"}
    return ViscousValidation(True, theta, checks)


@dataclass
class ReducedResolvent:
    """First-order form ``U' - GG U = P f`` for ``U = (u1, u2, u2')``."""

    GG: ResolventMatrix
    forcing_map: np.ndarray
    freq: Frequency
    n1: int
    n2: int

    def lift_boundary(self, gamma) -> np.ndarray:
        """Boundary matrix on ``U`` from one acting on ``u`` (or on ``U`` already)."""
        gm = np.asarray(gamma, dtype=complex)
        N = self.n1 + 2 * self.n2
        n = self.n1 + self.n2
        if gm.size == 0:
            return np.zeros((0, N), dtype=complex)
        gm = np.atleast_2d(gm)
        if gm.shape[1] == N:
            return gm
        if gm.shape[1] == n:
            return np.hstack([gm, np.zeros((gm.shape[0], self.n2))])
        raise ValueError(f"boundary matrix must have {n} or {N} columns")


def _coefficients(sys2: SecondOrderSystem, freq: Frequency):
    d = sys2.d
    if len(freq.eta) != d - 1:
        raise ValueError(f"frequency needs {d - 1} tangential components")
    lam = freq.lam
    M = lam * sys2.A0.astype(complex)
    E = np.zeros((sys2.n, sys2.n), dtype=complex)
    for j, eta in enumerate(freq.eta):
        M = M + 1j * eta * sys2.A[j]
        E = E + 1j * eta * (sys2.B[j][d - 1] + sys2.B[d - 1][j])
        for k, eta_k in enumerate(freq.eta):
            M = M + eta * eta_k * sys2.B[j][k]
    first = sys2.A[-1] - E
    second = sys2.B[d - 1][d - 1]
    return M, first, second


def apply_operator(sys2: SecondOrderSystem, freq: Frequency, u: ExponentialProfile):
    """The transformed second-order operator applied to a profile ``u``."""
    M, first, second = _coefficients(sys2, freq)
    du = u.derivative()
    return u.apply(M) + du.apply(first) - du.derivative().apply(second)


def reduce(sys2: SecondOrderSystem, freq: Frequency) -> ReducedResolvent:
    """Eliminate ``u1'`` with ``A^d_11`` and ``u2''`` with ``B^{dd}_22``."""
    if sys2.n2 == 0:
        raise StructuralFailure("no parabolic block; use the hyperbolic modules")
    n1, n2 = sys2.n1, sys2.n2
    M, first, second = _coefficients(sys2, freq)
    s1, s2 = slice(0, n1), slice(n1, n1 + n2)
    B22 = second[s2, s2]
    A11, A12 = first[s1, s1], first[s1, s2]
    A21, A22 = first[s2, s1], first[s2, s2]
    M11, M12, M21, M22 = M[s1, s1], M[s1, s2], M[s2, s1], M[s2, s2]
    N = n1 + 2 * n2
    GG = np.zeros((N, N), dtype=complex)
    P = np.zeros((N, n1 + n2), dtype=complex)
    lu_b = sla.lu_factor(B22)
    r1, r2, r3 = slice(0, n1), slice(n1, n1 + n2), slice(n1 + n2, N)
    if n1:
        lu_a = sla.lu_factor(A11)
        inv_a = lambda X: sla.lu_solve(lu_a, X)  # noqa: E731
        K11, K12, K13 = inv_a(M11), inv_a(M12), inv_a(A12)
        GG[r1, r1], GG[r1, r2], GG[r1, r3] = -K11, -K12, -K13
        GG[r3, r1] = sla.lu_solve(lu_b, M21 - A21 @ K11)
        GG[r3, r2] = sla.lu_solve(lu_b, M22 - A21 @ K12)
        GG[r3, r3] = sla.lu_solve(lu_b, A22 - A21 @ K13)
        P[r1, s1] = inv_a(np.eye(n1))
        P[r3, s1] = sla.lu_solve(lu_b, A21 @ P[r1, s1])
    else:
        GG[r3, r2] = sla.lu_solve(lu_b, M22)
        GG[r3, r3] = sla.lu_solve(lu_b, A22)
    GG[r2, r3] = np.eye(n2)
    P[r3, s2] = -sla.lu_solve(lu_b, np.eye(n2))
    return ReducedResolvent(ResolventMatrix(GG, freq), P, freq, n1, n2)


def lift_profile(u: ExponentialProfile, n1: int, n2: int) -> ExponentialProfile:
    """``U = (u1, u2, u2')`` from ``u = (u1, u2)``."""
    du2 = u.derivative().block(n1, n1 + n2)
    return ExponentialProfile.stack([u, du2])


def reduction_residual(sys2: SecondOrderSystem, freq: Frequency, u: ExponentialProfile) -> float:
    """Relative mismatch between the direct operator and the reduced system on ``u``."""
    red = reduce(sys2, freq)
    f = apply_operator(sys2, freq, u)
    U = lift_profile(u, sys2.n1, sys2.n2)
    lhs = U.derivative() - U.apply(red.GG.G)
    rhs = f.apply(red.forcing_map)
    scale = lhs.norm() + rhs.norm()
    return (lhs - rhs).norm() / scale if scale > 0 else 0.0


def rousset_bc(sys2: SecondOrderSystem, gamma1) -> np.ndarray:
    """Boundary matrix on ``U`` selecting ``(Gamma_1 u1, u2)``.

    ``gamma1`` must be maximally dissipative for the hyperbolic block.
    """
    n1, n2 = sys2.n1, sys2.n2
    g1 = np.asarray(gamma1, dtype=complex)
    g1 = g1.reshape(-1, n1) if n1 else np.zeros((0, 0), dtype=complex)
    if n1:
        block, S = sys2.hyperbolic_block()
        check_maximal_dissipativity(S, block, g1)
    k1 = g1.shape[0]
    N = n1 + 2 * n2
    out = np.zeros((k1 + n2, N), dtype=complex)
    if k1:
        out[:k1, :n1] = g1
    out[k1:, n1:n1 + n2] = np.eye(n2)
    return out


def evans_scan(sys2: SecondOrderSystem, boundary, freqs: Sequence[Frequency],
               tol: float = 1e-8, workers: int = 1) -> ScanResult:
    """Lopatinski scan of the reduced system over a bounded frequency set."""
    freqs = list(freqs)
    if not freqs:
        raise InvalidGrid("empty frequency set")
    if isinstance(boundary, BoundarySymbol):
        bfun = boundary
    else:
        bm = np.asarray(boundary, dtype=complex)
        bfun = lambda f: bm  # noqa: E731
    lift = lambda f: reduce(sys2, f).lift_boundary(bfun(f))  # noqa: E731
    mags = [f.magnitude for f in freqs]
    grid = {"kind": "bounded set", "points": len(freqs), "max_magnitude": max(mags),
            "min_gamma": min(f.gamma for f in freqs)}
    return scan_frequencies(lambda f: reduce(sys2, f).GG, lift, freqs, grid, tol, workers)


# -- weights ----------------------------------------------------------------

def _weight_fn(spec, label):
    if isinstance(spec, bool):
        raise InvalidWeights(f"weight {label}: invalid value {spec!r}")
    if isinstance(spec, (int, float)):
        c = float(spec)
        fn = lambda f: c  # noqa: E731
    elif spec == "gamma":
        fn = lambda f: f.gamma  # noqa: E731
    elif isinstance(spec, Mapping) and set(spec) <= {"coef", "gamma_power"}:
        c = float(spec.get("coef", 1.0))
        p = float(spec.get("gamma_power", 0.0))
        fn = lambda f: c * f.gamma**p  # noqa: E731
    else:
        raise InvalidWeights(f"weight {label}: unsupported value {spec!r}")
    return fn


@dataclass
class Weights:
    """Weights on the ``u`` and ``u2'`` coordinates; defaults ``(gamma, 1)``."""

    u: object = "gamma"
    der: object = 1.0

    def __post_init__(self):
        self._fu = _weight_fn(self.u, "u")
        self._fd = _weight_fn(self.der, "der")

    def evaluate(self, freq: Frequency):
        wu, wd = float(self._fu(freq)), float(self._fd(freq))
        for val, lab in ((wu, "u"), (wd, "der")):
            if not (val > 0 and math.isfinite(val)):
                raise InvalidWeights(f"weight {lab} evaluates to {val} at {freq}")
        return wu, wd

    def to_json(self):
        return {"u": self.u, "der": self.der}

    @classmethod
    def from_json(cls, doc):
        if isinstance(doc, str):
            doc = json.loads(doc)
        if not isinstance(doc, Mapping) or set(doc) - {"u", "der"}:
            raise InvalidWeights("weights must be an object with keys 'u' and 'der'")
        return cls(doc.get("u", "gamma"), doc.get("der", 1.0))


def weighted_problem(sys2: SecondOrderSystem, freq: Frequency,
                     weights: Weights | None = None) -> tuple[WeightedProblem, ReducedResolvent]:
    weights = weights or Weights()
    wu, wd = weights.evaluate(freq)
    red = reduce(sys2, freq)
    state = np.concatenate([np.full(sys2.n, wu), np.full(sys2.n2, wd)])
    return WeightedProblem(red.GG, state, wu, red.forcing_map), red


def viscous_stability_check(sys2: SecondOrderSystem, boundary, freqs: Sequence[Frequency],
                            trials: int = 20, seed: int = 0, weights: Weights | None = None,
                            cap: float = 1e6, workers: int = 1) -> StabilityReport:
    """Weighted stability ratios of the reduced problem on a bounded frequency set."""
    freqs = list(freqs)
    if not freqs:
        raise InvalidGrid("empty frequency set")
    weights = weights or Weights()

    def one(freq):
        problem, red = weighted_problem(sys2, freq, weights)
        return evaluate_point(problem, red.lift_boundary(boundary), trials, seed)

    results = _map(one, freqs, workers)
    return _collect(results, cap, "weighted", trials, seed, {"points": len(freqs)},
                    weights.to_json())


# -- documents and frequency sets -------------------------------------------

VISCOUS_KEYS = {"n1", "n2", "A0", "A", "B", "theta", "d", "n", "boundary", "name", "description",
                "gamma1"}


def parse_second_order(document):
    """Parse the extended system document; returns ``(system, boundary or None)``."""
    if isinstance(document, (str, bytes)):
        document = json.loads(document)
    if not isinstance(document, Mapping):
        raise SchemaError("document must be a JSON object")
    extra = set(document) - VISCOUS_KEYS
    if extra:
        raise SchemaError(f"unknown fields {sorted(extra)}")
    for key in ("n1", "n2", "A0", "A", "B", "theta", "d"):
        if key not in document:
            raise SchemaError(f"missing field {key!r}")
    n1, n2, d = document["n1"], document["n2"], document["d"]
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in (n1, n2, d)):
        raise SchemaError("n1, n2 and d must be integers")
    n = n1 + n2
    if "n" in document and document["n"] != n:
        raise SchemaError("n must equal n1 + n2")
    A = document["A"]
    if not isinstance(A, list) or len(A) != d:
        raise SchemaError(f"'A' must hold d = {d} matrices")
    B = document["B"]
    if not isinstance(B, list) or len(B) != d or any(not isinstance(r, list) or len(r) != d for r in B):
        raise SchemaError(f"'B' must be a {d}x{d} array of matrices")
    sys2 = SecondOrderSystem(
        n1, n2, decode_matrix(document["A0"], (n, n), "A0", real=True),
        tuple(decode_matrix(a, (n, n), f"A[{j}]", real=True) for j, a in enumerate(A)),
        tuple(tuple(decode_matrix(b, (n, n), f"B[{j}][{k}]", real=True) for k, b in enumerate(row))
              for j, row in enumerate(B)),
        float(document["theta"]), str(document.get("name", "")))
    boundary = None
    if "boundary" in document:
        bdoc = document["boundary"]
        cols = n + n2 if isinstance(bdoc, Mapping) and _matrix_cols(bdoc) == n + n2 else n
        boundary = parse_boundary(bdoc, cols)
    return sys2, boundary


def _matrix_cols(bdoc):
    m = bdoc.get("matrix")
    if isinstance(m, list) and m and isinstance(m[0], list):
        return len(m[0])
    return None


def is_viscous_document(document) -> bool:
    return isinstance(document, Mapping) and "B" in document


def serialize_second_order(sys2: SecondOrderSystem, boundary: BoundarySymbol | None = None) -> dict:
    doc = {"n1": sys2.n1, "n2": sys2.n2, "d": sys2.d, "theta": sys2.theta,
           "A0": encode_matrix(sys2.A0), "A": [encode_matrix(a) for a in sys2.A],
           "B": [[encode_matrix(b) for b in row] for row in sys2.B]}
    if sys2.name:
        doc["name"] = sys2.name
    if boundary is not None:
        doc["boundary"] = serialize_boundary(boundary)
    return doc


def frequency_set(spec, d: int) -> list:
    """Frequencies from an explicit list or a box description.

    Accepted forms: ``[{"tau":..,"eta":[..],"gamma":..}, ...]`` or
    ``{"gamma": [lo, hi, n], "tau": [lo, hi, n], "eta": [lo, hi, n]}`` (gamma
    geometric, tau/eta linear; ``eta`` is applied to every tangential
    component).
    """
    if isinstance(spec, (str, bytes)):
        spec = json.loads(spec)
    if isinstance(spec, list):
        out = []
        for i, it in enumerate(spec):
            if not isinstance(it, Mapping) or "gamma" not in it:
                raise InvalidGrid(f"entry {i} needs at least 'gamma'")
            eta = it.get("eta", [0.0] * (d - 1))
            if len(eta) != d - 1:
                raise InvalidGrid(f"entry {i}: eta must have {d - 1} components")
            if not it["gamma"] > 0:
                raise InvalidGrid(f"entry {i}: gamma must be positive")
            out.append(Frequency(it.get("tau", 0.0), tuple(eta), it["gamma"]))
        if not out:
            raise InvalidGrid("empty frequency set")
        return out
    if isinstance(spec, Mapping):
        try:
            glo, ghi, gn = spec["gamma"]
        except (KeyError, ValueError, TypeError):
            raise InvalidGrid("box needs 'gamma': [lo, hi, n]") from None
        if not (0 < glo <= ghi) or gn < 1:
            raise InvalidGrid("gamma range must be positive and nonempty")
        tlo, thi, tn = spec.get("tau", [0.0, 0.0, 1])
        elo, ehi, en = spec.get("eta", [0.0, 0.0, 1])
        gammas = np.geomspace(glo, ghi, gn)
        taus = np.linspace(tlo, thi, tn)
        etas = np.linspace(elo, ehi, en) if d > 1 else [None]
        out = []
        for g in gammas:
            for t in taus:
                for e in etas:
                    out.append(Frequency(t, () if e is None else (e,) * (d - 1), g))
        if not out:
            raise InvalidGrid("empty frequency set")
        return out
    raise InvalidGrid("unrecognized frequency set")
