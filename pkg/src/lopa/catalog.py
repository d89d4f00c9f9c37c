"""Reference systems with good and failing boundary conditions.

Every entry records the verdicts it is expected to produce; the test suite
checks each of them.  Entries are addressed from the command line as
``@name`` or ``@name:boundary``; the random generator takes parameters, as in
``@random-symmetrizable:good,seed=7,n=5,d=2``.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError
from .system import encode_matrix

R2 = 1.0 / math.sqrt(2.0)


@dataclass
class CatalogEntry:
    name: str
    kind: str  # "hyperbolic" or "viscous"
    document: dict
    boundaries: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    description: str = ""

    def with_boundary(self, label: str | None = None) -> dict:
        doc = copy.deepcopy(self.document)
        if label is None:
            return doc
        try:
            doc["boundary"] = copy.deepcopy(self.boundaries[label])
        except KeyError:
            raise SchemaError(f"entry {self.name!r} has no boundary {label!r}; "
                              f"known: {sorted(self.boundaries)}") from None
        return doc

    def to_json(self):
        return {"name": self.name, "kind": self.kind, "description": self.description,
                "document": self.document, "boundaries": self.boundaries,
                "expected": self.expected}


def _bc(rows):
    return {"k": len(rows), "matrix": rows}


def scalar_transport(a: float = 1.0) -> CatalogEntry:
    return CatalogEntry(
        "scalar-transport", "hyperbolic",
        {"n": 1, "d": 1, "A": [[[a]]], "name": "scalar-transport"},
        {"good": _bc([[1.0]])},
        {"validate": "pass", "symmetrizer": "found", "lopatinski:good": "holds",
         "kreiss:good": "uniformly stable on grid", "dissipative:good": "valid"},
        "u_t + a u_x = f with a > 0; one incoming characteristic, Dirichlet data.")


def wave_1d() -> CatalogEntry:
    return CatalogEntry(
        "wave-1d", "hyperbolic",
        {"n": 2, "d": 1, "A": [[[0.0, 1.0], [1.0, 0.0]]], "name": "wave-1d"},
        {"good": _bc([[1.0, 0.0]]), "bad": _bc([[1.0, -1.0]]),
         "dissipative": _bc([[R2, R2]])},
        {"validate": "pass", "symmetrizer": "found", "lopatinski:good": "holds",
         "lopatinski:bad": "fails", "lopatinski:dissipative": "holds",
         "kreiss:good": "uniformly stable on grid", "kreiss:bad": "fails",
         "dissipative:dissipative": "valid"},
        "First-order wave system.  [1, 0] is conservative (zero energy flux on its "
        "kernel), [1, 1]/sqrt(2) is strictly dissipative and [1, -1] annihilates the "
        "incoming eigenvector.")


def acoustics_2d(u0: float = 0.3, v0: float = 0.5) -> CatalogEntry:
    A1 = [[u0, 1.0, 0.0], [1.0, u0, 0.0], [0.0, 0.0, u0]]
    A2 = [[v0, 0.0, 1.0], [0.0, v0, 0.0], [1.0, 0.0, v0]]
    return CatalogEntry(
        "acoustics-2d", "hyperbolic",
        {"n": 3, "d": 2, "A": [A1, A2], "name": "acoustics-2d"},
        {"good": _bc([[R2, 0.0, R2], [0.0, 1.0, 0.0]]),
         "bad": _bc([[1.0, 0.0, -1.0], [0.0, 1.0, 0.0]])},
        {"validate": "pass", "symmetrizer": "found", "lopatinski:good": "holds",
         "lopatinski:bad": "fails", "dissipative:good": "valid"},
        "Linearized acoustics (p, u, v) with subsonic mean flow; two incoming modes.")


def jordan_block() -> CatalogEntry:
    return CatalogEntry(
        "jordan-block", "hyperbolic",
        {"n": 2, "d": 1, "A": [[[1.0, 1.0], [0.0, 1.0]]], "name": "jordan-block"},
        {},
        {"validate": "pass", "hyperbolicity": "fail", "symmetrizer": "infeasible"},
        "Non-diagonalizable symbol; no Friedrichs symmetrizer exists.")


def random_symmetrizable(seed: int = 0, n: int = 3, d: int = 2) -> CatalogEntry:
    """``A^j = S^{-1} H_j`` with ``S`` SPD and ``H_j`` symmetric, all seeded.

    ``S`` is a Friedrichs symmetrizer by construction, and the "good" boundary
    is built from it (positive eigenspace of ``S A_d``).
    """
    if n < 1 or d < 1:
        raise SchemaError("random-symmetrizable needs n >= 1 and d >= 1")
    rng = np.random.default_rng([int(seed), int(n), int(d)])
    X = rng.standard_normal((n, n))
    S = X @ X.T + n * np.eye(n) * 0.5
    A = []
    for _ in range(d):
        H = rng.standard_normal((n, n))
        A.append(np.linalg.solve(S, H + H.T))
    w, V = np.linalg.eigh(S @ A[-1])
    pos = V[:, w > 0]
    good = pos.T
    doc = {"n": n, "d": d, "A": [encode_matrix(a) for a in A],
           "name": f"random-symmetrizable-{seed}-{n}-{d}"}
    bcs = {"good": {"k": good.shape[0], "matrix": encode_matrix(good) if good.size else []}}
    return CatalogEntry(
        "random-symmetrizable", "hyperbolic", doc, bcs,
        {"validate": "pass", "symmetrizer": "found", "lopatinski:good": "holds",
         "dissipative:good": "valid"},
        "Seeded S^{-1} H construction; parameters seed, n, d.")


def scalar_viscous(a: float = 1.0, b: float = 1.0) -> CatalogEntry:
    doc = {"n1": 0, "n2": 1, "d": 1, "A0": [[1.0]], "A": [[[a]]], "B": [[[[b]]]],
           "theta": b, "name": "scalar-viscous"}
    return CatalogEntry(
        "scalar-viscous", "viscous", doc,
        {"good": _bc([[1.0, 0.0]]), "neumann": _bc([[0.0, 1.0]])},
        {"validate": "pass", "evans:good": "holds",
         "viscous-kreiss:good": "uniformly stable on grid"},
        "u_t + a u_x - b u_xx = f; Dirichlet data on U = (u, u').")


_FACTORIES = {
    "scalar-transport": (scalar_transport, {"a": float}),
    "wave-1d": (wave_1d, {}),
    "acoustics-2d": (acoustics_2d, {"u0": float, "v0": float}),
    "jordan-block": (jordan_block, {}),
    "random-symmetrizable": (random_symmetrizable, {"seed": int, "n": int, "d": int}),
    "scalar-viscous": (scalar_viscous, {"a": float, "b": float}),
}


def catalog() -> list:
    """All entries with default parameters."""
    return [fn() for fn, _ in _FACTORIES.values()]


def entry(name: str, **params) -> CatalogEntry:
    try:
        fn, types = _FACTORIES[name]
    except KeyError:
        raise SchemaError(f"unknown catalog entry {name!r}; known: {sorted(_FACTORIES)}") from None
    extra = set(params) - set(types)
    if extra:
        raise SchemaError(f"entry {name!r} takes no parameters {sorted(extra)}")
    try:
        typed = {k: types[k](v) for k, v in params.items()}
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad parameter for {name!r}: {exc}") from None
    return fn(**typed)


def resolve_reference(ref: str) -> dict:
    """Document for ``@name[:boundary][,key=value...]``."""
    body = ref[1:] if ref.startswith("@") else ref
    head, *opts = body.split(",")
    name, _, label = head.partition(":")
    params = {}
    for opt in opts:
        key, eq, val = opt.partition("=")
        if not eq:
            raise SchemaError(f"catalog parameter {opt!r} must look like key=value")
        params[key.strip()] = val.strip()
    return entry(name, **params).with_boundary(label or None)
