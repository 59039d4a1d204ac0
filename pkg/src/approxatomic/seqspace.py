"""Triangular functional arrays and the sequence-space norms on their coefficients.

A :class:`TriangularArray` holds levels ``n = 1..N``; level ``n`` is a
``(m_n, dim)`` matrix whose rows are the functionals ``h_{n,1..m_n}``.
Coefficient objects are measured per level and the supremum over levels is
taken, which is the shape of the partial-sum-sup norm used for BK-spaces.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import ModelSpace, NormTag, numerical_rank, vec_norm, vec_norms

__all__ = [
    "AtomFamily",
    "TriangularArray",
    "TriangularViolation",
    "CoefficientObject",
    "XdSpaceTag",
    "TotalityError",
    "validate_triangular",
    "evaluate_array",
    "xd_norm",
    "xd_norms",
    "induced_isometry_norm",
]


class TotalityError(ValueError):
    """The functionals do not separate points of the model space."""


def _readonly(a, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-D array, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class AtomFamily:
    """Ordered atoms ``x_1..x_M``, stored one per row of ``vectors``."""

    vectors: np.ndarray
    ambient: ModelSpace

    def __post_init__(self):
        v = _readonly(self.vectors, 2)
        if v.shape[1] != self.ambient.dim:
            raise ValueError(f"atoms have length {v.shape[1]}, ambient dim is {self.ambient.dim}")
        if not np.all(np.isfinite(v)):
            raise ValueError("atoms must be finite")
        object.__setattr__(self, "vectors", v)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def synthesis(self, count: int | None = None) -> np.ndarray:
        """Matrix ``[x_1 ... x_count]`` (dim x count)."""
        count = len(self) if count is None else count
        if count > len(self):
            raise ValueError(f"need {count} atoms, family has {len(self)}")
        return self.vectors[:count].T


@dataclass(frozen=True)
class TriangularViolation:
    level: int  # 1-based
    reason: str

    def __str__(self) -> str:
        return f"level {self.level}: {self.reason}"


@dataclass(frozen=True, eq=False)
class TriangularArray:
    """Levels of functionals. ``sizes`` are the declared ``m_n`` (default:
    inferred from the rows); :func:`validate_triangular` checks both."""

    levels: tuple
    ambient: ModelSpace
    sizes: tuple | None = None

    def __post_init__(self):
        levels = tuple(_readonly(lv if np.size(lv) else np.zeros((0, self.ambient.dim)), 2)
                       for lv in self.levels)
        object.__setattr__(self, "levels", levels)
        sizes = tuple(lv.shape[0] for lv in levels) if self.sizes is None else tuple(int(m) for m in self.sizes)
        if len(sizes) != len(levels):
            raise ValueError("sizes and levels disagree in length")
        object.__setattr__(self, "sizes", sizes)

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    @property
    def top(self) -> np.ndarray:
        return self.levels[-1]

    @property
    def max_size(self) -> int:
        return max(self.sizes) if self.sizes else 0

    def stacked(self) -> np.ndarray:
        return np.vstack(self.levels) if self.levels else np.zeros((0, self.ambient.dim))

    def level(self, n: int) -> np.ndarray:
        if not 1 <= n <= len(self.levels):
            raise IndexError(f"level {n} out of range 1..{len(self.levels)}")
        return self.levels[n - 1]

    def transformed(self, matrix) -> TriangularArray:
        """Replace every functional h by ``h @ matrix``, i.e. h composed with
        the operator given by ``matrix``."""
        M = np.asarray(matrix, dtype=float)
        return TriangularArray(tuple(lv @ M for lv in self.levels), self.ambient)

    def scaled(self, c: float) -> TriangularArray:
        return TriangularArray(tuple(c * lv for lv in self.levels), self.ambient)

    def is_extending(self) -> bool:
        """True when every row is a prefix of the top row (h_{n,i} = f_i)."""
        top = self.top
        return all(np.array_equal(lv, top[: lv.shape[0]]) for lv in self.levels)

    def check(self) -> TriangularArray:
        violation = validate_triangular(self)
        if violation is not None:
            raise ValueError(f"invalid triangular array: {violation}")
        return self

    @classmethod
    def extending(cls, rows, ambient: ModelSpace, sizes: Sequence[int] | None = None) -> TriangularArray:
        """Array whose level n holds the first ``sizes[n]`` rows of ``rows``
        (default sizes 1, 2, ..., len(rows))."""
        rows = np.asarray(rows, dtype=float)
        sizes = range(1, rows.shape[0] + 1) if sizes is None else sizes
        return cls(tuple(rows[:m] for m in sizes), ambient)


def validate_triangular(H: TriangularArray) -> TriangularViolation | None:
    if not H.levels:
        return TriangularViolation(1, "array has no levels")
    prev = 0
    for n, (lv, m) in enumerate(zip(H.levels, H.sizes), start=1):
        if m < 1:
            return TriangularViolation(n, f"m_{n} = {m} is not positive")
        if n > 1 and m <= prev:
            return TriangularViolation(n, f"m_{n} = {m} does not exceed m_{n - 1} = {prev}")
        if lv.shape[0] != m:
            return TriangularViolation(n, f"row has {lv.shape[0]} functionals, expected m_{n} = {m}")
        if lv.shape[1] != H.ambient.dim:
            return TriangularViolation(n, f"functionals have {lv.shape[1]} entries, ambient dim is {H.ambient.dim}")
        if not np.all(np.isfinite(lv)):
            return TriangularViolation(n, "non-finite functional entries")
        prev = m
    return None


@dataclass(frozen=True, eq=False)
class CoefficientObject:
    """Ragged values ``levels[n-1][i-1] = h_{n,i}(x)``."""

    levels: tuple

    @property
    def sizes(self) -> tuple:
        return tuple(len(r) for r in self.levels)

    def __add__(self, other: CoefficientObject) -> CoefficientObject:
        if self.sizes != other.sizes:
            raise ValueError("coefficient shapes differ")
        return CoefficientObject(tuple(a + b for a, b in zip(self.levels, other.levels)))


def evaluate_array(H: TriangularArray, x) -> CoefficientObject:
    x = np.asarray(x, dtype=float)
    if x.shape != (H.ambient.dim,):
        raise ValueError(f"vector shape {x.shape} does not match ambient dim {H.ambient.dim}")
    return CoefficientObject(tuple(lv @ x for lv in H.levels))


@dataclass(frozen=True, eq=False)
class XdSpaceTag:
    """How a coefficient object is measured.

    ``row_lp``: sup over levels of the l^p norm of the row.
    ``row_linf``: largest absolute coefficient.
    ``partial_sum_sup``: sup over levels n of ``||sum_i c_{n,i} x_i||`` in the
    atoms' ambient norm.
    """

    kind: str
    p: float | None = None
    atoms: AtomFamily | None = None

    def __post_init__(self):
        if self.kind == "row_lp":
            if self.p is None or self.p < 1:
                raise ValueError("row_lp needs p >= 1")
            if self.p == np.inf:
                object.__setattr__(self, "kind", "row_linf")
                object.__setattr__(self, "p", None)
        elif self.kind == "partial_sum_sup":
            if self.atoms is None:
                raise ValueError("partial_sum_sup needs an atom family")
        elif self.kind != "row_linf":
            raise ValueError(f"unknown X_d tag kind {self.kind!r}")

    @classmethod
    def row_lp(cls, p: float) -> XdSpaceTag:
        return cls("row_lp", float(p))

    @classmethod
    def row_linf(cls) -> XdSpaceTag:
        return cls("row_linf")

    @classmethod
    def partial_sum_sup(cls, atoms: AtomFamily) -> XdSpaceTag:
        return cls("partial_sum_sup", atoms=atoms)

    @property
    def row_norm(self) -> NormTag:
        """Norm applied to a single level's coefficients (row tags only)."""
        if self.kind == "row_lp":
            return NormTag.lp(self.p)
        if self.kind == "row_linf":
            return NormTag.linf()
        raise ValueError("partial_sum_sup has no row norm")

    def is_row_l2(self) -> bool:
        return self.kind == "row_lp" and self.p == 2.0

    def dual(self) -> XdSpaceTag:
        if self.kind == "partial_sum_sup":
            raise ValueError("no dual model for the partial-sum-sup norm")
        q = self.row_norm.dual()
        return XdSpaceTag.row_linf() if q.p is None else XdSpaceTag.row_lp(q.p)

    @property
    def label(self) -> str:
        if self.kind == "row_lp":
            return f"row-lp:{self.p:g}"
        return self.kind.replace("_", "-")

    @classmethod
    def parse(cls, text: str, atoms: AtomFamily | None = None) -> XdSpaceTag:
        text = text.strip().lower()
        if text == "row-linf":
            return cls.row_linf()
        if text.startswith("row-lp:"):
            return cls.row_lp(float(text[7:]))
        if text == "partial-sum-sup":
            if atoms is None:
                raise ValueError("partial-sum-sup needs atoms")
            return cls.partial_sum_sup(atoms)
        raise ValueError(f"cannot parse X_d tag {text!r}")


def xd_norms(level_coeffs: Sequence[np.ndarray], tag: XdSpaceTag) -> np.ndarray:
    """Vectorised :func:`xd_norm`: ``level_coeffs[n]`` is ``(m_n, N)``, one
    column per coefficient object. Returns ``N`` norms."""
    if not level_coeffs:
        raise ValueError("no levels")
    N = level_coeffs[0].shape[1]
    out = np.zeros(N)
    if tag.kind == "partial_sum_sup":
        atoms = tag.atoms
        for c in level_coeffs:
            if c.shape[0] > len(atoms):
                raise ValueError(f"level of size {c.shape[0]} exceeds {len(atoms)} atoms")
            out = np.maximum(out, vec_norms(atoms.synthesis(c.shape[0]) @ c, atoms.ambient.norm))
        return out
    rn = tag.row_norm
    for c in level_coeffs:
        out = np.maximum(out, vec_norms(c, rn))
    return out


def xd_norm(c: CoefficientObject, tag: XdSpaceTag) -> float:
    return float(xd_norms([np.asarray(r, dtype=float)[:, None] for r in c.levels], tag)[0])


def induced_isometry_norm(H: TriangularArray, x) -> float:
    """Norm transported from the ambient space onto ``{h_{n,i}(x)}``.

    Only defined when the functionals are total; the stacked functional
    matrix must have full column rank at relative cutoff 1e-10.
    """
    d = H.ambient.dim
    r = numerical_rank(H.stacked(), 1e-10)
    if r < d:
        raise TotalityError(f"functionals are not total: stacked rank {r} < dim {d} "
                            f"(kernel of dimension {d - r})")
    return vec_norm(x, H.ambient.norm)
