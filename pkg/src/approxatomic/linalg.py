"""Finite-dimensional model spaces, dense operators, norms and pseudo-inverses.

Every Banach space in this package is modelled as R^n carrying an l^p-type
norm. Functionals on a space are represented by coefficient vectors and act
through the ordinary dot product, so the dual of ``Lp(p)`` is ``Lp(q)`` with
``1/p + 1/q = 1`` and the dual of ``LInf`` is ``Lp(1)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "NormTag",
    "ModelSpace",
    "LinearOperator",
    "PseudoInverseResult",
    "ProjectorPair",
    "NormValue",
    "vec_norm",
    "vec_norms",
    "op_norm",
    "operator_norm",
    "adjoint",
    "pseudo_inverse",
    "projections_from_pseudo",
    "numerical_rank",
]

# sign-vertex enumeration for LInf domains stays exact up to this dimension
_MAX_VERTEX_DIM = 16


@dataclass(frozen=True)
class NormTag:
    """Norm carried by a model space: ``lp`` (with ``p``), ``linf`` or ``c0``.

    ``c0`` evaluates exactly like ``linf`` on finite vectors; it only keeps
    the label of a truncated c_0 model.
    """

    kind: str
    p: float | None = None

    def __post_init__(self):
        if self.kind == "lp":
            if self.p is None or not math.isfinite(self.p) or self.p < 1:
                raise ValueError(f"lp norm needs finite p >= 1, got {self.p!r}")
            object.__setattr__(self, "p", float(self.p))
        elif self.kind in ("linf", "c0"):
            object.__setattr__(self, "p", None)
        else:
            raise ValueError(f"unknown norm kind {self.kind!r}")

    @classmethod
    def lp(cls, p: float) -> NormTag:
        if p == math.inf:
            return cls("linf")
        return cls("lp", p)

    @classmethod
    def linf(cls) -> NormTag:
        return cls("linf")

    @classmethod
    def c0(cls) -> NormTag:
        return cls("c0")

    @property
    def exponent(self) -> float:
        return math.inf if self.p is None else self.p

    @property
    def is_l2(self) -> bool:
        return self.p == 2.0

    def dual(self) -> NormTag:
        if self.p is None:
            return NormTag.lp(1.0)
        if self.p == 1.0:
            return NormTag.linf()
        return NormTag.lp(self.p / (self.p - 1.0))

    @property
    def label(self) -> str:
        if self.kind == "lp":
            p = self.p
            if p == 1.0:
                return "l1"
            if p == 2.0:
                return "l2"
            return f"lp:{p!r}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> NormTag:
        text = text.strip().lower()
        if text in ("l1", "l2"):
            return cls.lp(float(text[1]))
        if text in ("linf", "c0"):
            return cls(text)
        if text.startswith("lp:"):
            return cls.lp(float(text[3:]))
        raise ValueError(f"cannot parse norm tag {text!r}")


@dataclass(frozen=True)
class ModelSpace:
    dim: int
    norm: NormTag = field(default_factory=lambda: NormTag.lp(2.0))

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))

    def dual(self) -> ModelSpace:
        return ModelSpace(self.dim, self.norm.dual())


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """Dense matrix acting from ``domain`` to ``codomain``."""

    domain: ModelSpace
    codomain: ModelSpace
    entries: np.ndarray

    def __post_init__(self):
        m = _frozen(self.entries)
        if m.ndim != 2 or m.shape != (self.codomain.dim, self.domain.dim):
            raise ValueError(
                f"entries shape {m.shape} does not match "
                f"({self.codomain.dim}, {self.domain.dim})"
            )
        if not np.all(np.isfinite(m)):
            raise ValueError("operator entries must be finite")
        object.__setattr__(self, "entries", m)

    @classmethod
    def from_matrix(cls, matrix, norm: NormTag | None = None) -> LinearOperator:
        """Endomorphism-style helper: both sides share ``norm`` (default l2)."""
        m = np.asarray(matrix, dtype=float)
        norm = norm or NormTag.lp(2.0)
        return cls(ModelSpace(m.shape[1], norm), ModelSpace(m.shape[0], norm), m)

    @classmethod
    def identity(cls, space: ModelSpace) -> LinearOperator:
        return cls(space, space, np.eye(space.dim))

    @classmethod
    def zeros(cls, domain: ModelSpace, codomain: ModelSpace) -> LinearOperator:
        return cls(domain, codomain, np.zeros((codomain.dim, domain.dim)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.domain.dim:
            raise ValueError(f"vector of length {x.shape[0]} not in domain of dim {self.domain.dim}")
        return self.entries @ x

    def __matmul__(self, other: LinearOperator) -> LinearOperator:
        if not isinstance(other, LinearOperator):
            return NotImplemented
        if other.codomain.dim != self.domain.dim:
            raise ValueError("operator dimensions do not compose")
        return LinearOperator(other.domain, self.codomain, self.entries @ other.entries)

    def scaled(self, c: float) -> LinearOperator:
        return LinearOperator(self.domain, self.codomain, c * self.entries)

    def is_zero(self) -> bool:
        return not np.any(self.entries)

    def allclose(self, other: LinearOperator, atol: float = 1e-12) -> bool:
        return self.shape == other.shape and np.allclose(self.entries, other.entries, rtol=0, atol=atol)


def _check_finite(x: np.ndarray):
    if not np.all(np.isfinite(x)):
        raise ValueError("vector has non-finite entries")


def vec_norms(x, tag: NormTag, axis: int = 0) -> np.ndarray:
    """Norms of the slices of ``x`` along ``axis`` (columns by default)."""
    x = np.asarray(x, dtype=float)
    _check_finite(x)
    a = np.abs(x)
    if a.shape[axis] == 0:
        return np.zeros(np.delete(a.shape, axis))
    if tag.p is None:
        return a.max(axis=axis)
    if tag.p == 1.0:
        return a.sum(axis=axis)
    # rescale by the max entry so large p does not overflow and tiny entries do not underflow
    m = a.max(axis=axis, keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    s = ((a / safe) ** tag.p).sum(axis=axis) ** (1.0 / tag.p)
    return np.squeeze(safe, axis=axis) * s


def vec_norm(x, tag: NormTag) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("vec_norm expects a 1-D vector")
    return float(vec_norms(x[:, None], tag)[0])


class NormValue(NamedTuple):
    value: float
    exact: bool


def _unit_probes(space: ModelSpace, count: int, rng: np.random.Generator) -> np.ndarray:
    d = space.dim
    g = rng.standard_normal((d, count))
    g = np.hstack([np.eye(d), g])
    return g / vec_norms(g, space.norm)


def operator_norm(T: LinearOperator, probes: int = 10_000, seed: int = 0) -> NormValue:
    """Operator norm of ``T`` between its model spaces.

    Exact for l2->l2 (largest singular value), for l1 domains (largest
    column norm), for linf/c0 codomains (largest dual row norm) and for
    linf domains of dimension <= 16 (sign-vertex enumeration). Any other
    pair gets a sampled lower estimate over ``probes`` random unit vectors
    and ``exact=False``.
    """
    M = T.entries
    dom, cod = T.domain.norm, T.codomain.norm
    if not M.size or not np.any(M):
        return NormValue(0.0, True)
    if dom.is_l2 and cod.is_l2:
        return NormValue(float(np.linalg.norm(M, 2)), True)
    if dom.p == 1.0:
        return NormValue(float(vec_norms(M, cod, axis=0).max()), True)
    if cod.p is None:
        return NormValue(float(vec_norms(M, dom.dual(), axis=1).max()), True)
    if dom.p is None and T.domain.dim <= _MAX_VERTEX_DIM:
        best = 0.0
        d = T.domain.dim
        # +-v give the same norm, so fix the first sign
        for signs in itertools.product((1.0, -1.0), repeat=d - 1):
            v = np.array((1.0,) + signs)
            best = max(best, float(vec_norms((M @ v)[:, None], cod)[0]))
        return NormValue(best, True)
    rng = np.random.default_rng(seed)
    X = _unit_probes(T.domain, probes, rng)
    return NormValue(float(vec_norms(M @ X, cod).max()), False)


def op_norm(T: LinearOperator, probes: int = 10_000, seed: int = 0) -> float:
    return operator_norm(T, probes, seed).value


def adjoint(T: LinearOperator) -> LinearOperator:
    return LinearOperator(T.codomain.dual(), T.domain.dual(), T.entries.T)


@dataclass(frozen=True)
class PseudoInverseResult:
    k_dagger: LinearOperator
    numerical_rank: int
    sv_cutoff: float


@dataclass(frozen=True)
class ProjectorPair:
    """``p = K^+ K`` on the domain and ``q = K K^+`` on the codomain."""

    p: LinearOperator
    q: LinearOperator

    @property
    def kernel_projector(self) -> LinearOperator:
        """``I - p``: the idempotent whose range is ker K."""
        return LinearOperator(self.p.domain, self.p.codomain, np.eye(self.p.domain.dim) - self.p.entries)


def numerical_rank(matrix, rel_cutoff: float = 1e-10) -> int:
    m = np.asarray(matrix, dtype=float)
    if not m.size:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if not s.size or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rel_cutoff * s[0]))


def pseudo_inverse(K: LinearOperator, rel_cutoff: float = 1e-12) -> PseudoInverseResult:
    """Moore-Penrose inverse via SVD, dropping singular values below
    ``rel_cutoff * sigma_max``. The zero matrix maps to the zero matrix."""
    if not 0 < rel_cutoff < 1:
        raise ValueError("rel_cutoff must lie in (0, 1)")
    M = K.entries
    out_shape = (K.domain.dim, K.codomain.dim)
    if not np.any(M):
        return PseudoInverseResult(LinearOperator(K.codomain, K.domain, np.zeros(out_shape)), 0, 0.0)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    cutoff = rel_cutoff * s[0]
    r = int(np.count_nonzero(s > cutoff))
    pinv = (Vt[:r].T / s[:r]) @ U[:, :r].T
    return PseudoInverseResult(LinearOperator(K.codomain, K.domain, pinv), r, float(cutoff))


def projections_from_pseudo(K: LinearOperator, Kd: PseudoInverseResult) -> ProjectorPair:
    Kp = Kd.k_dagger
    return ProjectorPair(p=Kp @ K, q=K @ Kp)
