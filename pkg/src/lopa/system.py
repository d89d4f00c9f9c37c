"""First-order systems, frequencies and boundary symbols.

A constant-coefficient operator ``u_t + sum_j A^j u_{x_j}`` on the half-space
``x_d >= 0`` is stored as the list of its coefficient matrices; the last one
is the boundary-normal matrix.  Boundary conditions are ``k x n`` matrices,
possibly depending on the Laplace-Fourier frequency.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import CharacteristicBoundary, DimensionMismatch, SchemaError
from .sampling import sphere_points

#: relative tolerance for deciding that A_d is singular
CHARACTERISTIC_TOL = 1e-10
#: relative tolerance for eigenvalue clustering and nullity in the
#: semisimplicity test
SEMISIMPLE_TOL = 1e-8


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FirstOrderSystem:
    """Coefficients ``A[0..d-1]`` of ``u_t + sum_j A^j u_{x_j}``; ``A[-1]`` is normal."""

    A: tuple
    name: str = ""

    def __post_init__(self):
        mats = tuple(_frozen(a) for a in self.A)
        if not mats:
            raise DimensionMismatch("need at least one coefficient matrix")
        n = mats[0].shape[0] if mats[0].ndim == 2 else -1
        for j, a in enumerate(mats):
            if a.ndim != 2 or a.shape != (n, n) or n < 1:
                raise DimensionMismatch(
                    f"A[{j}] has shape {a.shape}, expected square {n}x{n}")
        object.__setattr__(self, "A", mats)

    @property
    def n(self) -> int:
        return self.A[0].shape[0]

    @property
    def d(self) -> int:
        return len(self.A)

    @property
    def normal(self) -> np.ndarray:
        return self.A[-1]

    @property
    def tangential(self) -> tuple:
        return self.A[:-1]

    def symbol(self, xi) -> np.ndarray:
        """Real symbol ``sum_j xi_j A^j``."""
        xi = np.asarray(xi, dtype=float)
        return np.tensordot(xi, np.array(self.A), axes=1)

    def scaled(self, s: float) -> "FirstOrderSystem":
        return FirstOrderSystem(tuple(s * a for a in self.A), self.name)

    def n_plus(self) -> int:
        """Number of positive eigenvalues of A_d (counted with multiplicity)."""
        ev = np.linalg.eigvals(self.normal)
        return int(np.sum(ev.real > 0))


@dataclass(frozen=True)
class Frequency:
    """Laplace-Fourier frequency ``(tau, eta, gamma)`` with ``gamma > 0``."""

    tau: float
    eta: tuple = ()
    gamma: float = 1.0

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "eta", tuple(float(e) for e in np.ravel(self.eta)))

    @property
    def lam(self) -> complex:
        return complex(self.gamma, self.tau)

    @property
    def d(self) -> int:
        return len(self.eta) + 1

    @property
    def magnitude(self) -> float:
        return math.sqrt(self.tau**2 + sum(e * e for e in self.eta) + self.gamma**2)

    def scaled(self, s: float) -> "Frequency":
        return Frequency(s * self.tau, tuple(s * e for e in self.eta), s * self.gamma)

    def as_vector(self) -> np.ndarray:
        return np.array([self.tau, *self.eta, self.gamma])

    @classmethod
    def from_vector(cls, v) -> "Frequency":
        v = np.asarray(v, dtype=float)
        return cls(v[0], tuple(v[1:-1]), v[-1])

    def to_json(self) -> dict:
        return {"tau": self.tau, "eta": list(self.eta), "gamma": self.gamma}


@dataclass(frozen=True)
class TangentialDirection:
    xi: tuple

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        if abs(np.linalg.norm(xi) - 1.0) > 1e-12:
            raise ValueError("direction must be a unit vector")
        object.__setattr__(self, "xi", tuple(xi))


@dataclass(frozen=True)
class BoundarySymbol:
    """A ``k x n`` boundary matrix, constant or a bounded function of frequency."""

    k: int
    n: int
    evaluate_fn: Callable = field(repr=False, compare=False)
    constant: bool = True
    bound: float = 0.0
    name: str = "matrix"
    params: Mapping = field(default_factory=dict, compare=False)

    def __call__(self, freq: Frequency | None = None) -> np.ndarray:
        m = np.asarray(self.evaluate_fn(freq), dtype=complex)
        if m.shape != (self.k, self.n):
            raise DimensionMismatch(
                f"boundary symbol evaluated to shape {m.shape}, expected {(self.k, self.n)}")
        return m

    @property
    def matrix(self) -> np.ndarray:
        if not self.constant:
            raise ValueError("boundary symbol depends on the frequency")
        return self(None)

    @classmethod
    def from_matrix(cls, matrix, n=None) -> "BoundarySymbol":
        m = np.array(matrix, dtype=complex)
        if m.size == 0:
            if n is None:
                raise DimensionMismatch("empty boundary matrix needs n")
            m = np.zeros((0, n), dtype=complex)
        if m.ndim != 2:
            raise DimensionMismatch("boundary matrix must be two-dimensional")
        if n is not None and m.shape[1] != n:
            raise DimensionMismatch(f"boundary matrix has {m.shape[1]} columns, expected {n}")
        m.setflags(write=False)
        bound = float(np.linalg.norm(m, 2)) if m.size else 0.0
        return cls(m.shape[0], m.shape[1], lambda _f, _m=m: _m, True, bound,
                   "matrix", {"matrix": m})

    def spot_check(self, frequencies: Sequence[Frequency]) -> float:
        """Largest evaluated norm over ``frequencies``; raises if it exceeds the bound."""
        worst = 0.0
        for f in frequencies:
            m = self(f)
            nrm = float(np.linalg.norm(m, 2)) if m.size else 0.0
            worst = max(worst, nrm)
        if worst > self.bound * (1 + 1e-12) + 1e-15:
            raise ValueError(f"boundary symbol norm {worst} exceeds declared bound {self.bound}")
        return worst


# -- named frequency-dependent symbols -------------------------------------

def _scaled_dirichlet(k, n, params):
    rows = decode_matrix(params.get("rows", np.eye(k, n).tolist()), (k, n), "params.rows")
    beta = float(params.get("beta", 1.0))
    if beta < 0:
        raise SchemaError("scaled-dirichlet needs beta >= 0")

    def ev(freq):
        if freq is None:
            raise ValueError("scaled-dirichlet needs a frequency")
        return rows / (1.0 + beta * freq.gamma / freq.magnitude)

    bound = float(np.linalg.norm(rows, 2)) if rows.size else 0.0
    return BoundarySymbol(k, n, ev, False, bound, "scaled-dirichlet",
                          {"rows": rows, "beta": beta})


def _frequency_mix(k, n, params):
    rows = decode_matrix(params["rows"], (k, n), "params.rows")
    mix = decode_matrix(params["mix"], (k, n), "params.mix")
    eps = float(params.get("eps", 0.1))

    def ev(freq):
        if freq is None:
            raise ValueError("frequency-mix needs a frequency")
        return rows + eps * complex(freq.tau, freq.gamma) / freq.magnitude * mix

    bound = float(np.linalg.norm(rows, 2) + abs(eps) * np.linalg.norm(mix, 2))
    return BoundarySymbol(k, n, ev, False, bound, "frequency-mix",
                          {"rows": rows, "mix": mix, "eps": eps})


SYMBOLS = {
    "scaled-dirichlet": _scaled_dirichlet,
    "frequency-mix": _frequency_mix,
}


def make_symbol(name, k, n, params=None) -> BoundarySymbol:
    try:
        factory = SYMBOLS[name]
    except KeyError:
        raise SchemaError(f"unknown boundary symbol {name!r}; known: {sorted(SYMBOLS)}") from None
    try:
        return factory(k, n, dict(params or {}))
    except KeyError as exc:
        raise SchemaError(f"boundary symbol {name!r} is missing parameter {exc}") from None


# -- validation ------------------------------------------------------------

@dataclass
class ValidationReport:
    passed: bool
    n: int
    d: int
    sigma_min_normal: float
    checks: dict

    def to_json(self):
        return {"verdict": "pass" if self.passed else "fail", "n": self.n, "d": self.d,
                "sigma_min_normal": self.sigma_min_normal, "checks": self.checks}


def validate_system(sys: FirstOrderSystem, tol: float = CHARACTERISTIC_TOL) -> ValidationReport:
    """Check shapes and that the boundary is noncharacteristic (``det A_d != 0``)."""
    if len(sys.A) != sys.d:
        raise DimensionMismatch("coefficient list length differs from d")
    s = np.linalg.svd(sys.normal, compute_uv=False)
    scale = max(s[0], 1.0) if s.size else 1.0
    smin = float(s[-1])
    if smin <= tol * scale:
        raise CharacteristicBoundary(
            f"boundary is characteristic: sigma_min(A_d) = {smin:.3e}", sigma_min=smin)
    return ValidationReport(True, sys.n, sys.d, smin,
                            {"shapes": "pass", "noncharacteristic": "pass"})


@dataclass
class HyperbolicityReport:
    passed: bool
    worst_xi: np.ndarray
    worst_defect: float
    samples: int
    non_semisimple: list

    def to_json(self):
        return {"verdict": "pass" if self.passed else "fail",
                "worst_xi": [float(x) for x in self.worst_xi],
                "worst_defect": self.worst_defect, "samples": self.samples,
                "non_semisimple_at": [[float(x) for x in xi] for xi in self.non_semisimple]}


def cluster_values(values, tol):
    """Group complex numbers by single linkage at distance ``tol``.

    Returns a list of index arrays.
    """
    values = np.asarray(values)
    m = len(values)
    parent = list(range(m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(m):
        for j in range(i + 1, m):
            if abs(values[i] - values[j]) <= tol:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(m):
        groups.setdefault(find(i), []).append(i)
    return [np.array(g) for g in groups.values()]


def semisimple_defect(M, tol=SEMISIMPLE_TOL):
    """Return ``(is_semisimple, relative imaginary defect)`` for a real matrix ``M``."""
    scale = np.linalg.norm(M, 2)
    if scale == 0.0:
        return True, 0.0
    ev = np.linalg.eigvals(M)
    imag_defect = float(np.max(np.abs(ev.imag)) / scale)
    n = M.shape[0]
    for idx in cluster_values(ev, tol * scale):
        if len(idx) == 1:
            continue
        center = ev[idx].mean()
        s = np.linalg.svd(M - center * np.eye(n), compute_uv=False)
        nullity = int(np.sum(s <= tol * scale))
        if nullity < len(idx):
            return False, imag_defect
    return True, imag_defect


def check_hyperbolicity(sys: FirstOrderSystem, sphere_samples: int = 200,
                        tol: float = 1e-8) -> HyperbolicityReport:
    """Sample unit ``xi`` and test that ``sum xi_j A^j`` has real semisimple spectrum."""
    points = sphere_points(sys.d, sphere_samples)
    worst, worst_xi, bad = -1.0, points[0], []
    for xi in points:
        ok, defect = semisimple_defect(sys.symbol(xi), SEMISIMPLE_TOL)
        if not ok:
            bad.append(xi)
        if defect > worst:
            worst, worst_xi = defect, xi
    passed = not bad and worst <= tol
    if bad:
        worst_xi = bad[0]
    return HyperbolicityReport(passed, np.array(worst_xi), float(worst), len(points), bad)


# -- JSON encoding ---------------------------------------------------------

def _decode_entry(x, where):
    if isinstance(x, bool):
        raise ValueError(f"{where}: boolean is not a number")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(
            isinstance(y, (int, float)) and not isinstance(y, bool) for y in x):
        return complex(x[0], x[1])
    raise ValueError(f"{where}: entry {x!r} is neither a number nor a [re, im] pair")


def decode_matrix(rows, shape, where="matrix", real=False):
    """Decode a row-major nested list into an array of the given shape."""
    if isinstance(rows, np.ndarray):
        arr = np.asarray(rows)
        if arr.shape != tuple(shape):
            raise SchemaError(f"{where}: shape {arr.shape}, expected {tuple(shape)}")
        return arr.astype(float if real else complex)
    r, c = shape
    if not isinstance(rows, list) or len(rows) != r:
        raise SchemaError(f"{where}: expected {r} rows")
    out = np.zeros((r, c), dtype=complex)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != c:
            raise SchemaError(f"{where}: row {i} must have {c} entries")
        for j, x in enumerate(row):
            out[i, j] = _decode_entry(x, f"{where}[{i}][{j}]")
    if real:
        if np.any(out.imag != 0):
            raise SchemaError(f"{where}: system matrices must be real")
        return out.real.copy()
    return out


def encode_matrix(m):
    m = np.asarray(m)
    if np.iscomplexobj(m) and np.any(m.imag != 0):
        return [[[float(x.real), float(x.imag)] for x in row] for row in m]
    return [[float(x) for x in np.real(row)] for row in m]


def encode_vector(v):
    v = np.asarray(v)
    if np.iscomplexobj(v) and np.any(v.imag != 0):
        return [[float(x.real), float(x.imag)] for x in v]
    return [float(x) for x in np.real(v)]


def decode_vector(items, length=None, where="vector"):
    if not isinstance(items, list):
        raise SchemaError(f"{where}: expected a list")
    if length is not None and len(items) != length:
        raise SchemaError(f"{where}: expected {length} entries, got {len(items)}")
    return np.array([_decode_entry(x, f"{where}[{i}]") for i, x in enumerate(items)],
                    dtype=complex)


FIRST_ORDER_KEYS = {"n", "d", "A", "boundary", "name", "description"}
BOUNDARY_KEYS = {"k", "matrix", "symbol", "params"}


def _require_int(doc, key, minimum=0):
    if key not in doc:
        raise SchemaError(f"missing field {key!r}")
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise SchemaError(f"field {key!r} must be an integer >= {minimum}")
    return v


def parse_boundary(bdoc, n) -> BoundarySymbol:
    if not isinstance(bdoc, Mapping):
        raise SchemaError("boundary must be an object")
    extra = set(bdoc) - BOUNDARY_KEYS
    if extra:
        raise SchemaError(f"unknown boundary fields {sorted(extra)}")
    k = _require_int(bdoc, "k", 0)
    if ("matrix" in bdoc) == ("symbol" in bdoc):
        raise SchemaError("boundary needs exactly one of 'matrix' or 'symbol'")
    if "matrix" in bdoc:
        if "params" in bdoc:
            raise SchemaError("'params' only applies to named symbols")
        if k == 0:
            if bdoc["matrix"] not in ([], [[]]):
                raise SchemaError("k = 0 requires an empty matrix")
            return BoundarySymbol.from_matrix(np.zeros((0, n)), n)
        return BoundarySymbol.from_matrix(decode_matrix(bdoc["matrix"], (k, n), "boundary.matrix"), n)
    return make_symbol(bdoc["symbol"], k, n, bdoc.get("params", {}))


def parse_system(document) -> tuple[FirstOrderSystem, BoundarySymbol | None]:
    """Build a validated system (and boundary, if present) from a JSON document.

    ``document`` may be a mapping or a JSON string.
    """
    if isinstance(document, (str, bytes)):
        document = json.loads(document)
    if not isinstance(document, Mapping):
        raise SchemaError("system document must be a JSON object")
    extra = set(document) - FIRST_ORDER_KEYS
    if extra:
        raise SchemaError(f"unknown fields {sorted(extra)}")
    n = _require_int(document, "n", 1)
    d = _require_int(document, "d", 1)
    if "A" not in document:
        raise SchemaError("missing field 'A'")
    A = document["A"]
    if not isinstance(A, list) or len(A) != d:
        raise SchemaError(f"'A' must be a list of d = {d} matrices")
    mats = tuple(decode_matrix(a, (n, n), f"A[{j}]", real=True) for j, a in enumerate(A))
    sys = FirstOrderSystem(mats, str(document.get("name", "")))
    validate_system(sys)
    boundary = None
    if "boundary" in document:
        boundary = parse_boundary(document["boundary"], n)
    return sys, boundary


def serialize_boundary(b: BoundarySymbol) -> dict:
    if b.name == "matrix":
        return {"k": b.k, "matrix": encode_matrix(b.params["matrix"])}
    params = {}
    for key, val in b.params.items():
        params[key] = encode_matrix(val) if isinstance(val, np.ndarray) else val
    return {"k": b.k, "symbol": b.name, "params": params}


def serialize_system(sys: FirstOrderSystem, boundary: BoundarySymbol | None = None) -> dict:
    doc = {"n": sys.n, "d": sys.d, "A": [encode_matrix(a) for a in sys.A]}
    if sys.name:
        doc["name"] = sys.name
    if boundary is not None:
        doc["boundary"] = serialize_boundary(boundary)
    return doc
