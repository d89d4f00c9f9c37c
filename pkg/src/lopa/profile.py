"""Finite sums ``sum x^m exp(mu x) v`` with ``Re mu < 0``.

The set is closed under differentiation, constant matrix multiplication and
the half-line resolvent solve, and its ``L^2(0, inf)`` inner products have a
closed form, so norms and traces of solutions are computed without
quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .system import decode_vector, encode_vector
from .errors import SchemaError


@dataclass(frozen=True)
class Term:
    v: np.ndarray
    mu: complex
    m: int


class ExponentialProfile:
    """Immutable canonical sum of terms ``x^m e^{mu x} v``.

    Terms with identical ``(mu, m)`` are merged and zero vectors dropped.
    """

    __slots__ = ("dim", "terms", "delta")

    def __init__(self, dim: int, terms: Iterable = ()):
        merged = {}
        order = []
        for t in terms:
            if isinstance(t, Term):
                v, mu, m = t.v, t.mu, t.m
            else:
                v, mu, m = t
            v = np.asarray(v, dtype=complex).reshape(-1)
            mu = complex(mu)
            m = int(m)
            if v.shape != (dim,):
                raise ValueError(f"term vector has length {v.shape[0]}, expected {dim}")
            if m < 0:
                raise ValueError("polynomial degree must be nonnegative")
            if not mu.real < 0:
                raise ValueError(f"exponent {mu} does not decay")
            key = (mu, m)
            if key in merged:
                merged[key] = merged[key] + v
            else:
                merged[key] = v.copy()
                order.append(key)
        out = []
        for key in order:
            v = merged[key]
            if np.any(v != 0):
                v.setflags(write=False)
                out.append(Term(v, key[0], key[1]))
        self.dim = dim
        self.terms = tuple(out)
        self.delta = min((-t.mu.real for t in out), default=math.inf)

    @classmethod
    def zero(cls, dim):
        return cls(dim, ())

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        return f"ExponentialProfile(dim={self.dim}, terms={len(self.terms)})"

    # -- algebra ---------------------------------------------------------
    def __add__(self, other: "ExponentialProfile") -> "ExponentialProfile":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return ExponentialProfile(self.dim, self.terms + other.terms)

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s: complex) -> "ExponentialProfile":
        return ExponentialProfile(self.dim, [(s * t.v, t.mu, t.m) for t in self.terms])

    def apply(self, M) -> "ExponentialProfile":
        """Pointwise product with a constant matrix."""
        M = np.asarray(M)
        return ExponentialProfile(M.shape[0], [(M @ t.v, t.mu, t.m) for t in self.terms])

    def derivative(self) -> "ExponentialProfile":
        out = []
        for t in self.terms:
            out.append((t.mu * t.v, t.mu, t.m))
            if t.m:
                out.append((t.m * t.v, t.mu, t.m - 1))
        return ExponentialProfile(self.dim, out)

    def block(self, start, stop) -> "ExponentialProfile":
        return ExponentialProfile(stop - start, [(t.v[start:stop], t.mu, t.m) for t in self.terms])

    @staticmethod
    def stack(parts) -> "ExponentialProfile":
        """Concatenate component profiles into one vector profile."""
        dims = [p.dim for p in parts]
        total = sum(dims)
        out, off = [], 0
        for p, d in zip(parts, dims):
            for t in p.terms:
                v = np.zeros(total, dtype=complex)
                v[off:off + d] = t.v
                out.append((v, t.mu, t.m))
            off += d
        return ExponentialProfile(total, out)

    # -- evaluation --------------------------------------------------------
    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (self.dim,), dtype=complex)
        for t in self.terms:
            coef = x**t.m * np.exp(t.mu * x)
            out = out + coef[..., None] * t.v
        return out

    def trace(self) -> np.ndarray:
        """Value at ``x = 0``."""
        out = np.zeros(self.dim, dtype=complex)
        for t in self.terms:
            if t.m == 0:
                out = out + t.v
        return out

    def inner(self, other: "ExponentialProfile") -> complex:
        """``int_0^inf other(x)^H self(x) dx``."""
        total = 0j
        for a in self.terms:
            for b in other.terms:
                total += np.vdot(b.v, a.v) * _moment(a.m + b.m, a.mu + np.conj(b.mu))
        return total

    def norm_sq(self) -> float:
        return max(float(np.real(gram(self.terms).sum())), 0.0)

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())

    def max_abs_coefficient(self) -> float:
        return max((float(np.max(np.abs(t.v))) for t in self.terms), default=0.0)

    # -- JSON ----------------------------------------------------------------
    def to_json(self):
        return [{"v": encode_vector(t.v), "mu": [t.mu.real, t.mu.imag], "m": t.m}
                for t in self.terms]

    @classmethod
    def from_json(cls, items, dim) -> "ExponentialProfile":
        if not isinstance(items, list):
            raise SchemaError("profile must be a list of terms")
        terms = []
        for i, it in enumerate(items):
            if not isinstance(it, dict) or set(it) - {"v", "mu", "m"} or "v" not in it or "mu" not in it:
                raise SchemaError(f"term {i} must have fields v, mu and optional m")
            v = decode_vector(it["v"], dim, f"term[{i}].v")
            mu = it["mu"]
            mu = complex(mu[0], mu[1]) if isinstance(mu, list) else complex(mu)
            terms.append((v, mu, int(it.get("m", 0))))
        return cls(dim, terms)


def _moment(p, s):
    """``int_0^inf x^p e^{s x} dx`` for ``Re s < 0``."""
    return math.factorial(p) / (-s) ** (p + 1)


def _flatten(profiles):
    vs, mus, ms, owner = [], [], [], []
    for i, p in enumerate(profiles):
        for t in p.terms:
            vs.append(t.v)
            mus.append(t.mu)
            ms.append(t.m)
            owner.append(i)
    return vs, np.array(mus, dtype=complex), np.array(ms, dtype=int), np.array(owner, dtype=int)


_FACT = np.array([math.factorial(p) for p in range(64)], dtype=float)


def term_gram(vs, mus, ms) -> np.ndarray:
    """``[a, b] = int (x^{m_a} e^{mu_a x} v_a)^H (x^{m_b} e^{mu_b x} v_b) dx``."""
    if len(vs) == 0:
        return np.zeros((0, 0), dtype=complex)
    V = np.array(vs)
    s = np.conj(mus)[:, None] + mus[None, :]
    p = ms[:, None] + ms[None, :]
    return (V.conj() @ V.T) * _FACT[p] / (-s) ** (p + 1)


def gram(terms) -> np.ndarray:
    """Pairwise inner products of single terms."""
    return term_gram([t.v for t in terms], np.array([t.mu for t in terms], dtype=complex),
                     np.array([t.m for t in terms], dtype=int))


def gram_of(profiles) -> np.ndarray:
    """Gram matrix ``[i, j] = <p_j, p_i> = int p_i^H p_j`` (Hermitian)."""
    vs, mus, ms, owner = _flatten(profiles)
    k = len(profiles)
    if not vs:
        return np.zeros((k, k), dtype=complex)
    Mt = term_gram(vs, mus, ms)
    O = np.zeros((len(vs), k))
    O[np.arange(len(vs)), owner] = 1.0
    out = O.T @ Mt @ O
    return 0.5 * (out + out.conj().T)


def profile_norm(p: ExponentialProfile) -> float:
    return p.norm()


def profile_trace(p: ExponentialProfile) -> np.ndarray:
    return p.trace()
