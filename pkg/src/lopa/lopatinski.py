"""Pointwise and uniform evaluation of the Lopatinski condition.

The primitive is ``sigma(Lambda)``, the smallest singular value of the
boundary matrix restricted to the stable subspace of ``G(Lambda)``.  It does
not depend on the orthonormal basis chosen for that subspace, and ``1/sigma``
is the best constant in ``|v| <= C |Gamma v|`` on the stable subspace.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidGrid, NearImaginaryEigenvalue, RankMismatch
from .resolvent import ResolventMatrix, boundary_sigma, resolvent_matrix, stable_subspace
from .sampling import hemisphere_grid
from .system import BoundarySymbol, FirstOrderSystem, Frequency

RANK_TOL = 1e-10
SIGMA_TOL = 1e-8


@dataclass
class LopatinskiValue:
    freq: Frequency
    sigma: float
    rank_ok: bool
    k: int
    rank_gamma: int
    dim_stable: int
    gamma_norm: float

    @property
    def trace_constant(self) -> float:
        """Best ``C`` in ``|u(0)|^2 <= C |Gamma u(0)|^2``, i.e. ``1/sigma^2``."""
        if self.sigma == 0:
            return math.inf
        return 1.0 / self.sigma**2

    @property
    def mismatch(self) -> str:
        if self.rank_ok:
            return ""
        parts = []
        if self.rank_gamma != self.k:
            parts.append(f"rank Gamma = {self.rank_gamma} != k = {self.k}")
        if self.dim_stable != self.k:
            parts.append(f"dim E_- = {self.dim_stable} != k = {self.k}")
        return "; ".join(parts)

    def to_json(self):
        return {"freq": self.freq.to_json(), "sigma": _num(self.sigma), "rank_ok": self.rank_ok,
                "k": self.k, "rank_gamma": self.rank_gamma, "dim_stable": self.dim_stable,
                "mismatch": self.mismatch}


def _num(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return x


def _rank(m, tol=RANK_TOL):
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s > tol * s[0])) if s[0] > 0 else 0


def lopatinski_from(Gm: ResolventMatrix, gamma_matrix, freq=None, strict=False,
                    expected_dim=None) -> LopatinskiValue:
    stable, _ = stable_subspace(Gm, expected_dim)
    gm = np.asarray(gamma_matrix, dtype=complex).reshape(-1, Gm.n)
    k = gm.shape[0]
    sigma = boundary_sigma(gm, stable.V)
    rank_gamma = _rank(gm)
    ok = rank_gamma == k == stable.dim
    value = LopatinskiValue(freq if freq is not None else Gm.freq, sigma, ok, k, rank_gamma,
                            stable.dim, float(np.linalg.norm(gm, 2)) if gm.size else 0.0)
    if strict and not ok:
        raise RankMismatch(value.mismatch)
    return value


def lopatinski_value(sys: FirstOrderSystem, boundary: BoundarySymbol, freq: Frequency,
                     strict: bool = False) -> LopatinskiValue:
    """Lopatinski value of a hyperbolic system at one frequency."""
    Gm = resolvent_matrix(sys, freq)
    return lopatinski_from(Gm, boundary(freq), freq, strict)


@dataclass
class ScanResult:
    inf_sigma: float
    worst: Frequency | None
    grid: dict
    verdict: str
    points: int
    rank_failures: list = field(default_factory=list)
    retried: list = field(default_factory=list)
    persistent: list = field(default_factory=list)
    steep_near_gamma_min: bool = False
    values: list = field(default_factory=list, repr=False)

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"

    def to_json(self):
        return {"verdict": self.verdict, "inf_sigma": _num(self.inf_sigma),
                "worst_frequency": self.worst.to_json() if self.worst else None,
                "grid": self.grid, "points": self.points,
                "rank_failures": [f.to_json() for f in self.rank_failures[:10]],
                "rank_failure_count": len(self.rank_failures),
                "retried": len(self.retried),
                "persistent_failures": [f.to_json() for f in self.persistent],
                "steep_near_gamma_min": self.steep_near_gamma_min}


def _jitter(freq: Frequency, attempt: int) -> Frequency:
    s = 1.0 + 1e-6 * (attempt + 1)
    return Frequency(freq.tau, freq.eta, freq.gamma * s)


def scan_frequencies(provider: Callable[[Frequency], ResolventMatrix],
                     boundary: Callable[[Frequency], np.ndarray],
                     freqs: Sequence[Frequency], grid: dict, tol: float = SIGMA_TOL,
                     workers: int = 1, retries: int = 2) -> ScanResult:
    """Evaluate ``sigma`` at each frequency and reduce deterministically."""
    if len(freqs) == 0:
        raise InvalidGrid("empty frequency set")

    def one(freq):
        tried = []
        for attempt in range(retries + 1):
            f = freq if attempt == 0 else _jitter(freq, attempt)
            try:
                return lopatinski_from(provider(f), boundary(f), f), tried
            except NearImaginaryEigenvalue:
                tried.append(f)
        return None, tried

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, freqs))
    else:
        results = [one(f) for f in freqs]

    values, retried, persistent, rank_fail = [], [], [], []
    inf_sigma, worst = math.inf, None
    for freq, (val, tried) in zip(freqs, results):
        if tried:
            retried.append(freq)
        if val is None:
            persistent.append(freq)
            continue
        values.append(val)
        if not val.rank_ok:
            rank_fail.append(val.freq)
        if worst is None or val.sigma < inf_sigma:
            inf_sigma, worst = val.sigma, val.freq
    if rank_fail:
        verdict = "rank-failure"
    elif persistent:
        verdict = "inconclusive"
    elif inf_sigma > tol:
        verdict = "holds"
    else:
        verdict = "fails"
    res = ScanResult(inf_sigma, worst, dict(grid, tolerance=tol), verdict, len(freqs),
                     rank_fail, retried, persistent, _steep(values), values)
    return res


def _steep(values, factor=0.5):
    """True when the minimum of sigma over the smallest gamma level drops by more
    than ``factor`` relative to the next level."""
    by_gamma = {}
    for v in values:
        by_gamma.setdefault(round(v.freq.gamma / v.freq.magnitude, 12), []).append(v.sigma)
    levels = sorted(by_gamma)
    if len(levels) < 2:
        return False
    low = min(by_gamma[levels[0]])
    nxt = min(by_gamma[levels[1]])
    return bool(math.isfinite(nxt) and nxt > 0 and low < factor * nxt)


def uniform_scan(sys: FirstOrderSystem, boundary: BoundarySymbol, gamma_min: float = 1e-3,
                 resolution: int = 16, radial_cutoff: float = 1e3, radial_samples: int = 7,
                 tol: float = SIGMA_TOL, workers: int = 1) -> ScanResult:
    """Approximate ``inf sigma`` over the frequency set.

    A constant boundary matrix makes ``sigma`` homogeneous of degree zero, so
    only the unit hemisphere ``gamma >= gamma_min`` is scanned.  Otherwise the
    hemisphere is multiplied by geometric radii in ``[1/cutoff, cutoff]``.
    """
    if gamma_min <= 0:
        raise InvalidGrid("gamma_min must be positive")
    unit = hemisphere_grid(sys.d, gamma_min, resolution)
    grid = {"kind": "hemisphere", "gamma_min": gamma_min, "resolution": resolution}
    if boundary.constant:
        freqs = [Frequency.from_vector(p) for p in unit]
    else:
        radii = np.geomspace(1.0 / radial_cutoff, radial_cutoff, radial_samples)
        freqs = [Frequency.from_vector(r * p) for r in radii for p in unit]
        grid.update(kind="hemisphere x radii", radial_cutoff=radial_cutoff,
                    radial_samples=radial_samples)
    return scan_frequencies(lambda f: resolvent_matrix(sys, f), boundary, freqs, grid, tol,
                            workers)
