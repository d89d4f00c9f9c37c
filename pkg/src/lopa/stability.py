"""Uniform stability constants and the auxiliary/residual decomposition.

All ratios have the form

    (weighted ||u||^2 + |u(0)|^2) / (||f||^2 / alpha + |g|^2)

with ``alpha = gamma`` for first-order hyperbolic problems.  Besides random
trials, every frequency gets one optimized trial: the supremum of the ratio
over the span of all trial forcings and all boundary data, computed as a
generalized eigenvalue problem.  Enlarging the trial set therefore never
lowers the reported maximum.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ChainViolation, LopatinskiSingular
from .profile import ExponentialProfile, gram_of
from .resolvent import (ResolventMatrix, SubspaceBasis, boundary_sigma, resolvent_matrix,
                        solve_resolvent, stable_subspace)
from .sampling import hemisphere_grid
from .symmetrizer import Symmetrizer, check_maximal_dissipativity
from .system import BoundarySymbol, FirstOrderSystem, Frequency

CHAIN_TOL = 1e-8


@dataclass
class WeightedProblem:
    """A resolvent problem together with the norms used to measure it.

    ``state_weight`` multiplies ``|u_i|^2`` componentwise; the forcing ``f``
    enters the first-order system as ``forcing_map @ f`` and is measured by
    ``||f||^2 / forcing_weight``.
    """

    G: ResolventMatrix
    state_weight: np.ndarray
    forcing_weight: float
    forcing_map: np.ndarray
    stable: SubspaceBasis = None

    def __post_init__(self):
        if self.stable is None:
            self.stable, _ = stable_subspace(self.G)

    @property
    def forcing_dim(self) -> int:
        return self.forcing_map.shape[1]

    @classmethod
    def hyperbolic(cls, Gm: ResolventMatrix, expected_dim=None) -> "WeightedProblem":
        gamma = Gm.freq.gamma
        stable, _ = stable_subspace(Gm, expected_dim)
        return cls(Gm, np.full(Gm.n, gamma), gamma, np.eye(Gm.n), stable)

    def solve(self, gamma_matrix, f: ExponentialProfile | None, g):
        F = f.apply(self.forcing_map) if f is not None else None
        return solve_resolvent(self.G, gamma_matrix, F, g, self.stable)

    def state_norm_sq(self, u: ExponentialProfile) -> float:
        return u.apply(np.diag(np.sqrt(self.state_weight))).norm_sq()

    def numerator(self, u: ExponentialProfile) -> float:
        return self.state_norm_sq(u) + float(np.linalg.norm(u.trace()) ** 2)

    def denominator(self, f: ExponentialProfile | None, g) -> float:
        fn = f.norm_sq() if f is not None else 0.0
        return fn / self.forcing_weight + float(np.linalg.norm(g) ** 2)


# -- trials ------------------------------------------------------------------

@dataclass
class Trial:
    f: ExponentialProfile
    g: np.ndarray


def random_trial(problem: WeightedProblem, k: int, seed: int, index: int,
                 max_terms: int = 2) -> Trial:
    """One reproducible random ``(f, g)`` pair.

    Exponents are drawn with ``Re mu`` in ``[-2 ||G||, -0.1 gap]`` and kept at
    distance at least ``0.1 gap`` from the spectrum of ``G``.
    """
    rng = np.random.default_rng([seed, index])
    Gm = problem.G
    gap = max(Gm.gap, 1e-12)
    scale = max(Gm.norm, gap)
    p = problem.forcing_dim
    terms = []
    for _ in range(int(rng.integers(1, max_terms + 1))):
        for _attempt in range(50):
            mu = complex(-rng.uniform(0.1 * gap, 2.0 * scale), rng.uniform(-scale, scale))
            if np.min(np.abs(Gm.eigenvalues - mu)) >= 0.1 * gap:
                break
        v = rng.standard_normal(p) + 1j * rng.standard_normal(p)
        terms.append((v, mu, int(rng.integers(0, 2))))
    g = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    return Trial(ExponentialProfile(p, terms), g)


def _basis_forcings(trials, p):
    keys = []
    seen = set()
    for t in trials:
        for term in t.f.terms:
            key = (term.mu, term.m)
            if key not in seen:
                seen.add(key)
                keys.append(key)
    out = []
    for mu, m in keys:
        for j in range(p):
            e = np.zeros(p, dtype=complex)
            e[j] = 1.0
            out.append(ExponentialProfile(p, [(e, mu, m)]))
    return out


def optimized_ratio(problem: WeightedProblem, gamma_matrix, forcings: Sequence[ExponentialProfile],
                    include_boundary: bool = True, rel_cut: float = 1e-12):
    """Supremum of the ratio over ``span(forcings) x C^k`` (or ``x {0}``).

    Returns ``(ratio, f, g)`` for a maximizing pair.
    """
    k = gamma_matrix.shape[0]
    n = problem.G.n
    p = problem.forcing_dim
    sols, fs, gs = [], [], []
    for f in forcings:
        sols.append(problem.solve(gamma_matrix, f, np.zeros(k)).u)
        fs.append(f)
        gs.append(np.zeros(k, dtype=complex))
    if include_boundary:
        for j in range(k):
            e = np.zeros(k, dtype=complex)
            e[j] = 1.0
            sols.append(problem.solve(gamma_matrix, None, e).u)
            fs.append(ExponentialProfile.zero(p))
            gs.append(e)
    if not sols:
        return 0.0, ExponentialProfile.zero(p), np.zeros(k, dtype=complex)
    W = np.diag(np.sqrt(problem.state_weight))
    N = gram_of([u.apply(W) for u in sols])
    T = np.array([u.trace() for u in sols]).reshape(len(sols), n)
    N = N + T.conj() @ T.T
    D = gram_of(fs) / problem.forcing_weight
    Gg = np.array(gs).reshape(len(sols), k)
    D = D + Gg.conj() @ Gg.T
    D = 0.5 * (D + D.conj().T)
    N = 0.5 * (N + N.conj().T)
    w, Q = np.linalg.eigh(D)
    keep = w > rel_cut * w[-1]
    Z = Q[:, keep] / np.sqrt(w[keep])
    M = Z.conj().T @ N @ Z
    lam, vec = np.linalg.eigh(0.5 * (M + M.conj().T))
    a = Z @ vec[:, -1]
    f_opt = ExponentialProfile(p, [t for ai, f in zip(a, fs) for t in f.scale(ai).terms])
    g_opt = sum((ai * gi for ai, gi in zip(a, gs)), np.zeros(k, dtype=complex))
    return max(float(lam[-1]), 0.0), f_opt, g_opt


def trial_ratio(problem: WeightedProblem, gamma_matrix, trial: Trial) -> float:
    den = problem.denominator(trial.f, trial.g)
    if den == 0:
        return 0.0
    try:
        sol = problem.solve(gamma_matrix, trial.f, trial.g)
    except LopatinskiSingular:
        return math.inf
    return problem.numerator(sol.u) / den


def homogeneous_sup(problem: WeightedProblem, gamma_matrix) -> float:
    """Exact sup of ``(weighted ||e||^2 + |e(0)|^2) / |Gamma e(0)|^2`` over
    decaying homogeneous solutions."""
    r, _, _ = optimized_ratio(problem, gamma_matrix, [], include_boundary=True)
    return r


# -- reports -------------------------------------------------------------------

@dataclass
class PointResult:
    freq: Frequency
    max_ratio: float
    random_max: float
    optimized: float
    trials: int
    singular: bool = False
    predicted: float | None = None

    def to_json(self):
        return {"freq": self.freq.to_json(), "max_ratio": _num(self.max_ratio),
                "random_max": _num(self.random_max), "optimized": _num(self.optimized),
                "trials": self.trials, "singular": self.singular,
                "predicted": _num(self.predicted) if self.predicted is not None else None}


def _num(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else "nan"
    return x


@dataclass
class StabilityReport:
    alpha: str
    max_ratio: float
    worst: Frequency | None
    verdict: str
    cap: float
    trials: int
    seed: int
    points: list = field(default_factory=list)
    grid: dict = field(default_factory=dict)
    predicted_bound: float | None = None
    weights: dict | None = None

    def to_json(self):
        out = {"verdict": self.verdict, "alpha": self.alpha, "max_ratio": _num(self.max_ratio),
               "worst_frequency": self.worst.to_json() if self.worst else None,
               "cap": self.cap, "trials": self.trials, "seed": self.seed, "grid": self.grid,
               "predicted_bound": _num(self.predicted_bound) if self.predicted_bound is not None else None,
               "label": "empirical maximum on grid/trials",
               "points": [p.to_json() for p in self.points]}
        if self.weights is not None:
            out["weights"] = self.weights
        return out


def evaluate_point(problem: WeightedProblem, gamma_matrix, trials: int, seed: int,
                   optimize: bool = True) -> PointResult:
    k = gamma_matrix.shape[0]
    freq = problem.G.freq
    sample = [random_trial(problem, k, seed, i) for i in range(trials)]
    try:
        sol_check = boundary_sigma(gamma_matrix, problem.stable.V)
        if k != problem.stable.dim or sol_check <= 1e-10 * max(np.linalg.norm(gamma_matrix, 2), 1e-300):
            raise LopatinskiSingular("singular", sigma=sol_check)
        random_max = max((trial_ratio(problem, gamma_matrix, t) for t in sample), default=0.0)
        opt = 0.0
        if optimize:
            opt, _, _ = optimized_ratio(problem, gamma_matrix,
                                        _basis_forcings(sample, problem.forcing_dim))
        return PointResult(freq, max(random_max, opt), random_max, opt, trials)
    except LopatinskiSingular:
        return PointResult(freq, math.inf, math.inf, math.inf, trials, singular=True)


def _collect(results, cap, alpha, trials, seed, grid, weights=None):
    worst, best = None, -1.0
    for r in results:
        if r.max_ratio > best:
            best, worst = r.max_ratio, r.freq
    verdict = "uniformly stable on grid" if best < cap else "fails"
    preds = [r.predicted for r in results if r.predicted is not None]
    return StabilityReport(alpha, best, worst, verdict, cap, trials, seed, list(results), grid,
                           max(preds) if preds else None, weights)


def _map(fn, items, workers):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def stability_grid(d: int, gamma_range=(1e-3, 1e3), n_gamma: int = 7, resolution: int = 3,
                   direction_gamma_min: float = 0.05):
    """Frequencies with ``gamma`` geometric in ``gamma_range`` crossed with
    hemisphere directions (each direction rescaled so its gamma matches)."""
    gammas = np.geomspace(gamma_range[0], gamma_range[1], n_gamma)
    dirs = hemisphere_grid(d, direction_gamma_min, resolution)
    return [Frequency.from_vector(g / p[-1] * p) for g in gammas for p in dirs]


def kreiss_constant(sys: FirstOrderSystem, boundary: BoundarySymbol, freqs: Sequence[Frequency],
                    trials: int = 20, seed: int = 0, cap: float = 1e6, workers: int = 1,
                    grid: dict | None = None) -> StabilityReport:
    """Empirical uniform-stability constant with ``alpha = gamma``."""
    n_plus = sys.n_plus()

    def one(freq):
        problem = WeightedProblem.hyperbolic(resolvent_matrix(sys, freq), n_plus)
        return evaluate_point(problem, boundary(freq), trials, seed)

    results = _map(one, list(freqs), workers)
    return _collect(results, cap, "gamma", trials, seed, grid or {"points": len(freqs)})


@dataclass
class DissipativeConstant:
    tilde_C: float
    certified: float | None
    points: list
    trials: int
    seed: int

    def to_json(self):
        return {"tilde_C": self.tilde_C, "certified_bound": self.certified,
                "trials": self.trials, "seed": self.seed,
                "points": [p.to_json() for p in self.points]}


def energy_constant(S: Symmetrizer, sys: FirstOrderSystem, tilde_gamma) -> float:
    """Constant from the integration-by-parts energy estimate.

    With ``-(S A_d h, h) >= c|h|^2 - C|tilde_gamma h|^2``, every solution satisfies
    ``gamma ||u||^2 + |u(0)|^2 <= K (||f||^2 / gamma + |g|^2)`` with
    ``K = max(||S A_d||^2 / lam_min(S), C) / min(lam_min(S), c)``.
    """
    cert = check_maximal_dissipativity(S, sys, tilde_gamma)
    lam = float(np.linalg.eigvalsh(S.S)[0])
    sad = float(np.linalg.norm(S.S @ sys.normal, 2))
    return max(sad**2 / lam, cert.C) / min(lam, cert.c)


def measure_dissipative_constant(sys: FirstOrderSystem, S: Symmetrizer | None, tilde_gamma,
                                 freqs: Sequence[Frequency], trials: int = 20, seed: int = 0,
                                 workers: int = 1) -> DissipativeConstant:
    """Largest observed ratio for a reference (maximally dissipative) boundary matrix."""
    tg = np.asarray(tilde_gamma, dtype=complex).reshape(-1, sys.n)
    rep = kreiss_constant(sys, BoundarySymbol.from_matrix(tg, sys.n), freqs, trials, seed,
                          cap=math.inf, workers=workers)
    certified = energy_constant(S, sys, tg) if S is not None else None
    return DissipativeConstant(rep.max_ratio, certified, rep.points, trials, seed)


# -- the auxiliary/residual decomposition ---------------------------------------

@dataclass
class Inequality:
    name: str
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return self.rhs - self.lhs

    def holds(self, tol=CHAIN_TOL) -> bool:
        return self.residual >= -tol * max(1.0, abs(self.rhs), abs(self.lhs))

    def to_json(self):
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "residual": self.residual}


@dataclass
class DecompositionTrace:
    w: ExponentialProfile
    e: ExponentialProfile
    u: ExponentialProfile
    constants: dict
    inequalities: list
    invariants: dict
    predicted_constant: float
    ratio: float

    def to_json(self):
        return {"verdict": "pass" if all(i.holds() for i in self.inequalities) else "fail",
                "constants": self.constants,
                "inequalities": [i.to_json() for i in self.inequalities],
                "invariants": self.invariants, "predicted_constant": self.predicted_constant,
                "ratio": self.ratio, "w": self.w.to_json(), "e": self.e.to_json(),
                "u": self.u.to_json()}


def decompose(problem: WeightedProblem, gamma_matrix, tilde_gamma, f: ExponentialProfile, g,
              tilde_C: float | None = None, lopatinski_C: float | None = None,
              extra_forcings: Sequence[ExponentialProfile] = (),
              check: bool = True) -> DecompositionTrace:
    """Split the solution as ``u = w + e`` and evaluate every estimate.

    ``w`` solves the problem with the reference boundary matrix and zero
    boundary datum; ``e = u - w`` solves the homogeneous equation.  When
    ``tilde_C`` is not given it is measured as the supremum of the reference
    ratio over the forcing span that contains ``f`` (plus the exact supremum
    over homogeneous solutions), so it dominates this instance.
    """
    gm = np.asarray(gamma_matrix, dtype=complex)
    tg = np.asarray(tilde_gamma, dtype=complex)
    g = np.asarray(g, dtype=complex).reshape(gm.shape[0])
    alpha_f = problem.forcing_weight

    sigma = boundary_sigma(gm, problem.stable.V)
    if gm.shape[0] != problem.stable.dim or sigma <= 1e-10 * max(np.linalg.norm(gm, 2), 1e-300):
        raise LopatinskiSingular("Lopatinski condition fails at this frequency", sigma=sigma)
    C = lopatinski_C if lopatinski_C is not None else 1.0 / sigma**2

    F = f.apply(problem.forcing_map)
    w_sol = solve_resolvent(problem.G, tg, F, np.zeros(tg.shape[0]), problem.stable)
    w = w_sol.u
    datum = g - gm @ w.trace()
    e_sol = solve_resolvent(problem.G, gm, None, datum, problem.stable)
    e = e_sol.u
    u = w + e

    if tilde_C is None:
        forcings = _basis_forcings([Trial(f, g)], problem.forcing_dim) + list(extra_forcings)
        sup_f, _, _ = optimized_ratio(problem, tg, forcings, include_boundary=False)
        sup_h = homogeneous_sup(problem, tg)
        tilde_C = max(sup_f, sup_h)

    C1 = float(np.linalg.norm(gm, 2))
    C2 = float(np.linalg.norm(tg, 2))
    fn = f.norm_sq() / alpha_f
    w0, e0 = w.trace(), e.trace()
    nw = problem.state_norm_sq(w) + float(np.vdot(w0, w0).real)
    ne = problem.state_norm_sq(e) + float(np.vdot(e0, e0).real)
    nu = problem.numerator(u)
    ag = float(np.linalg.norm(g))
    agw = float(np.linalg.norm(gm @ w0))
    age = float(np.linalg.norm(gm @ e0))
    tge = float(np.linalg.norm(tg @ e0))
    e0n = float(np.vdot(e0, e0).real)
    rhs3 = tilde_C * fn
    rhs9 = 2 * tilde_C * C2**2 * C * (ag**2 + C1**2 * tilde_C * fn)
    ineqs = [
        Inequality("auxiliary estimate", nw, rhs3),
        Inequality("trace estimate", e0n, C * age**2),
        Inequality("boundary datum", C * age**2, C * (ag + agw) ** 2),
        Inequality("bound on datum", C * (ag + agw) ** 2,
                   2 * C * (ag**2 + C1**2 * tilde_C * fn)),
        Inequality("reference estimate for e", ne, tilde_C * tge**2),
        Inequality("reference datum", tilde_C * tge**2, tilde_C * C2**2 * e0n),
        Inequality("residual estimate", ne, rhs9),
        Inequality("final estimate", nu, 2 * (rhs3 + rhs9)),
    ]
    predicted = 2 * (tilde_C + 2 * tilde_C * C2**2 * C * (1 + C1**2 * tilde_C))
    den = problem.denominator(f, g)
    ratio = nu / den if den > 0 else 0.0

    le = e.derivative() - e.apply(problem.G.G)
    lw = w.derivative() - w.apply(problem.G.G) - F
    lu = u.derivative() - u.apply(problem.G.G) - F
    scale = 1.0 + F.norm()
    invariants = {
        "tilde_gamma_w0": float(np.linalg.norm(tg @ w0)),
        "L_w_minus_f": lw.norm() / scale,
        "L_e": le.norm() / (1.0 + e.derivative().norm()),
        "gamma_e0_minus_datum": float(np.linalg.norm(gm @ e0 - datum)),
        "L_u_minus_f": lu.norm() / scale,
        "gamma_u0_minus_g": float(np.linalg.norm(gm @ u.trace() - g)),
    }
    consts = {"tilde_C": tilde_C, "C": C, "C1": C1, "C2": C2, "sigma": sigma,
              "alpha": alpha_f}
    trace = DecompositionTrace(w, e, u, consts, ineqs, invariants, predicted, ratio)
    if check:
        bad = [i for i in ineqs if not i.holds()]
        if bad:
            raise ChainViolation("; ".join(f"{i.name}: residual {i.residual:.3e}" for i in bad))
    return trace


def proposition_main_decompose(sys: FirstOrderSystem, S: Symmetrizer, boundary, f, g,
                               freq: Frequency, tilde_gamma=None, **kwargs) -> DecompositionTrace:
    """Decomposition for a hyperbolic system; the reference boundary matrix is
    built from ``S`` when not supplied."""
    from .symmetrizer import build_dissipative_bc

    if tilde_gamma is None:
        tilde_gamma = build_dissipative_bc(S, sys)
    Gm = resolvent_matrix(sys, freq)
    problem = WeightedProblem.hyperbolic(Gm, sys.n_plus())
    gm = boundary(freq) if callable(boundary) else np.asarray(boundary, dtype=complex)
    return decompose(problem, gm, tilde_gamma, f, g, **kwargs)


@dataclass
class Comparison:
    relative_error: float
    direct_norm: float

    def to_json(self):
        return {"relative_error": self.relative_error, "direct_norm": self.direct_norm}


def direct_vs_decomposed(sys: FirstOrderSystem, S: Symmetrizer, boundary, f, g,
                         freq: Frequency, tilde_gamma=None) -> Comparison:
    """Compare the direct solve with ``w + e``; both raise when the boundary
    matrix is singular on the stable subspace."""
    Gm = resolvent_matrix(sys, freq)
    problem = WeightedProblem.hyperbolic(Gm, sys.n_plus())
    gm = boundary(freq) if callable(boundary) else np.asarray(boundary, dtype=complex)
    direct = problem.solve(gm, f, g).u
    trace = proposition_main_decompose(sys, S, gm, f, g, freq, tilde_gamma, check=False)
    diff = (direct - trace.u).norm()
    dn = direct.norm()
    return Comparison(diff / dn if dn > 0 else diff, dn)
