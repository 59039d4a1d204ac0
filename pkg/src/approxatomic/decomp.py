"""Approximative K-atomic decompositions and their numerical verification.

A decomposition pairs atoms ``x_i`` with a triangular array ``h_{n,i}`` and
an operator K. Level ``n`` synthesises ``S_n x = sum_{i<=m_n} h_{n,i}(x) x_i``;
the decomposition is checked for the two-sided norm inequality

    A ||K x|| <= ||{h_{n,i}(x)}||_Xd <= B ||x||

on a probe set, and for reconstruction ``S_n x -> K x`` across the levels.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from .linalg import LinearOperator, ModelSpace, NormTag, operator_norm, vec_norms
from .seqspace import AtomFamily, TriangularArray, XdSpaceTag, validate_triangular, xd_norms

__all__ = [
    "AtomFamily",
    "BoundPair",
    "ApproximativeDecomposition",
    "VerificationReport",
    "ProbeSet",
    "ExtremalBounds",
    "CConstant",
    "UnsupportedNormError",
    "make_probes",
    "level_synthesis",
    "level_operator",
    "verify_k_atomic",
    "verify_xd_frame",
    "verify_bessel",
    "optimal_bounds_l2",
    "compute_c",
]

DEFAULT_TOL = 1e-8


class UnsupportedNormError(ValueError):
    pass


@dataclass(frozen=True)
class BoundPair:
    """Claimed lower/upper constants. Both must be positive and finite.

    ``a <= b`` is not enforced: with K != I the inequality
    ``A||Kx|| <= B||x||`` is compatible with A > B (e.g. K = I/10).
    """

    a: float
    b: float

    def __post_init__(self):
        for name in ("a", "b"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"bound {name} must be positive and finite, got {v!r}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    @property
    def ordered(self) -> bool:
        return self.a <= self.b


@dataclass(frozen=True, eq=False)
class ApproximativeDecomposition:
    atoms: AtomFamily
    functionals: TriangularArray
    k: LinearOperator
    xd_tag: XdSpaceTag
    claimed: BoundPair | None = None
    notes: Mapping = field(default_factory=dict)

    def __post_init__(self):
        amb = self.atoms.ambient
        if not (self.functionals.ambient == amb and self.k.domain == amb and self.k.codomain == amb):
            raise ValueError("atoms, functionals and K must share one ambient space")
        violation = validate_triangular(self.functionals)
        if violation is not None:
            raise ValueError(f"invalid triangular array: {violation}")
        if len(self.atoms) < self.functionals.max_size:
            raise ValueError(f"{len(self.atoms)} atoms cannot serve levels of size {self.functionals.max_size}")

    @property
    def ambient(self) -> ModelSpace:
        return self.atoms.ambient

    @property
    def num_levels(self) -> int:
        return self.functionals.num_levels

    def replace(self, **changes) -> ApproximativeDecomposition:
        fields = dict(atoms=self.atoms, functionals=self.functionals, k=self.k,
                      xd_tag=self.xd_tag, claimed=self.claimed, notes=self.notes)
        fields.update(changes)
        return ApproximativeDecomposition(**fields)


@dataclass(frozen=True, eq=False)
class ProbeSet:
    """Test vectors, one per row."""

    vectors: np.ndarray
    seed: int = 0

    def __post_init__(self):
        v = np.array(self.vectors, dtype=float)
        if v.ndim != 2 or v.shape[0] == 0:
            raise ValueError("probe set must be a non-empty 2-D array")
        if not np.all(np.any(v != 0, axis=1)):
            raise ValueError("probe vectors must be nonzero")
        v.flags.writeable = False
        object.__setattr__(self, "vectors", v)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def with_vectors(self, extra) -> ProbeSet:
        """Prepend ``extra`` rows (useful to force specific directions in)."""
        return ProbeSet(np.vstack([np.atleast_2d(extra), self.vectors]), self.seed)


def make_probes(space: ModelSpace, count: int, seed: int = 0,
                include_basis: bool | None = None) -> ProbeSet:
    """Seeded probes normalised to unit norm in ``space``.

    l2: uniform on the sphere. linf/c0: the coordinate vectors, then sign
    vertices (all of them when they fit in half the budget), then points on
    the cube surface. l1: coordinate vectors then cube-surface points. Other
    l^p: coordinate vectors then Gaussian directions. ``include_basis``
    overrides whether coordinate vectors lead the set.
    """
    if count < 1:
        raise ValueError("need at least one probe")
    d = space.dim
    rng = np.random.default_rng(seed)
    tag = space.norm
    polyhedral = tag.p is None or tag.p == 1.0
    if include_basis is None:
        include_basis = not tag.is_l2
    parts = [np.eye(d)] if include_basis else []
    if tag.is_l2:
        parts.append(rng.standard_normal((count, d)))
    elif polyhedral:
        if tag.p is None:
            n_vert = count // 2
            if 2 ** d <= n_vert:
                grid = np.array(np.meshgrid(*([[1.0, -1.0]] * d), indexing="ij")).reshape(d, -1).T
                parts.append(grid)
            else:
                parts.append(rng.choice([-1.0, 1.0], size=(n_vert, d)))
        surf = rng.uniform(-1.0, 1.0, size=(count, d))
        face = rng.integers(0, d, size=count)
        surf[np.arange(count), face] = rng.choice([-1.0, 1.0], size=count)
        parts.append(surf)
    else:
        parts.append(rng.standard_normal((count, d)))
    P = np.vstack(parts)[:count]
    P = P / vec_norms(P, tag, axis=1)[:, None]
    return ProbeSet(P, seed)


def level_operator(d: ApproximativeDecomposition, n: int) -> np.ndarray:
    """Matrix of ``S_n = sum_{i<=m_n} x_i h_{n,i}``."""
    H = d.functionals.level(n)
    return d.atoms.synthesis(H.shape[0]) @ H


def level_synthesis(d: ApproximativeDecomposition, x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (d.ambient.dim,):
        raise ValueError(f"vector shape {x.shape} does not match ambient dim {d.ambient.dim}")
    H = d.functionals.level(n)
    return d.atoms.synthesis(H.shape[0]) @ (H @ x)


@dataclass(frozen=True)
class VerificationReport:
    empirical_lower: float | None
    empirical_upper: float
    residual_by_level: tuple
    c_constant: float | None
    passed_a: bool
    passed_b: bool
    passed_c: bool
    probes_used: int
    seed: int
    kernel_probes_skipped: int = 0

    @property
    def passed(self) -> bool:
        return self.passed_a and self.passed_b and self.passed_c

    def to_dict(self) -> dict:
        # key order is part of the serialised contract
        return {
            "empirical_lower": _json_float(self.empirical_lower),
            "empirical_upper": _json_float(self.empirical_upper),
            "residual_by_level": [_json_float(r) for r in self.residual_by_level],
            "c_constant": _json_float(self.c_constant),
            "passed_a": self.passed_a,
            "passed_b": self.passed_b,
            "passed_c": self.passed_c,
            "probes_used": self.probes_used,
            "seed": self.seed,
            "kernel_probes_skipped": self.kernel_probes_skipped,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


def _json_float(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def canonical_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


class _BoundStats(NamedTuple):
    lower: float | None
    upper: float
    skipped: int
    norms: np.ndarray


def _bound_stats(H: TriangularArray, tag: XdSpaceTag, P: np.ndarray, KP: np.ndarray,
                 norm: NormTag, tol: float) -> _BoundStats:
    coeffs = [lv @ P for lv in H.levels]
    xd = xd_norms(coeffs, tag)
    xn = vec_norms(P, norm)
    kn = vec_norms(KP, norm)
    upper = float(np.max(xd / xn))
    live = kn > tol
    lower = float(np.min(xd[live] / kn[live])) if np.any(live) else None
    return _BoundStats(lower, upper, int(np.count_nonzero(~live)), xd)


def _passed_b(stats: _BoundStats, claimed: BoundPair | None, tol: float) -> bool:
    if not math.isfinite(stats.upper):
        return False
    if claimed is None:
        # existence of some A > 0 is what can be checked without a claim
        return stats.lower is None or stats.lower > tol
    lower_ok = stats.lower is None or claimed.a <= stats.lower + tol
    return lower_ok and stats.upper <= claimed.b + tol


def verify_k_atomic(d: ApproximativeDecomposition, probes: ProbeSet,
                    tol: float = DEFAULT_TOL) -> VerificationReport:
    """Check the lower/upper inequality and level reconstruction of ``d``.

    Probes with ``||Kx|| <= tol`` are skipped for the lower estimate (the
    inequality is vacuous there) and counted in ``kernel_probes_skipped``.
    Membership of the coefficients in X_d is automatic for finite arrays, so
    ``passed_a`` is always true.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    P = _probe_matrix(probes, d.ambient)
    norm = d.ambient.norm
    KP = d.k.entries @ P
    stats = _bound_stats(d.functionals, d.xd_tag, P, KP, norm, tol)
    scale = np.maximum(1.0, vec_norms(P, norm))
    residuals = []
    for n in range(1, d.num_levels + 1):
        SP = level_operator(d, n) @ P
        residuals.append(float(np.max(vec_norms(KP - SP, norm) / scale)))
    c = compute_c(d, probes)
    return VerificationReport(
        empirical_lower=stats.lower,
        empirical_upper=stats.upper,
        residual_by_level=tuple(residuals),
        c_constant=c.value,
        passed_a=True,
        passed_b=_passed_b(stats, d.claimed, tol),
        passed_c=residuals[-1] <= tol,
        probes_used=len(probes),
        seed=probes.seed,
        kernel_probes_skipped=stats.skipped,
    )


def _probe_matrix(probes: ProbeSet, space: ModelSpace) -> np.ndarray:
    if probes.vectors.shape[1] != space.dim:
        raise ValueError(f"probes have length {probes.vectors.shape[1]}, ambient dim is {space.dim}")
    return probes.vectors.T


def verify_xd_frame(h: TriangularArray, tag: XdSpaceTag, probes: ProbeSet,
                    tol: float = DEFAULT_TOL, claimed: BoundPair | None = None) -> VerificationReport:
    """Frame inequality ``A||x|| <= ||{h(x)}|| <= B||x||`` without an operator.

    There is no reconstruction condition, so ``residual_by_level`` is empty,
    ``c_constant`` is None and ``passed_c`` is vacuously true.
    """
    violation = validate_triangular(h)
    if violation is not None:
        raise ValueError(f"invalid triangular array: {violation}")
    P = _probe_matrix(probes, h.ambient)
    stats = _bound_stats(h, tag, P, P, h.ambient.norm, tol)
    return VerificationReport(
        empirical_lower=stats.lower,
        empirical_upper=stats.upper,
        residual_by_level=(),
        c_constant=None,
        passed_a=True,
        passed_b=_passed_b(stats, claimed, tol),
        passed_c=True,
        probes_used=len(probes),
        seed=probes.seed,
        kernel_probes_skipped=stats.skipped,
    )


def verify_bessel(h: TriangularArray, tag: XdSpaceTag, probes: ProbeSet) -> float:
    """Sampled upper Bessel bound ``max ||{h(x)}|| / ||x||``."""
    P = _probe_matrix(probes, h.ambient)
    xd = xd_norms([lv @ P for lv in h.levels], tag)
    return float(np.max(xd / vec_norms(P, h.ambient.norm)))


class CConstant(NamedTuple):
    value: float
    exact: bool
    sampled: float


def compute_c(d: ApproximativeDecomposition, probes: ProbeSet | None = None) -> CConstant:
    """``C = sup_n ||S_n||`` over the stored levels.

    The sampled estimate is ``max ||S_n x|| / ||x||`` over the probes. When
    the ambient norm admits an exact operator norm (l2, l1, linf) the exact
    per-level norms are used for ``value``.
    """
    amb = d.ambient
    ops = [level_operator(d, n) for n in range(1, d.num_levels + 1)]
    sampled = 0.0
    if probes is not None:
        P = _probe_matrix(probes, amb)
        xn = vec_norms(P, amb.norm)
        sampled = max(float(np.max(vec_norms(S @ P, amb.norm) / xn)) for S in ops)
    norms = [operator_norm(LinearOperator(amb, amb, S)) for S in ops]
    if all(v.exact for v in norms):
        return CConstant(max(v.value for v in norms), True, sampled)
    return CConstant(max(sampled, max(v.value for v in norms)), False, sampled)


class ExtremalBounds(NamedTuple):
    """Optimal constants for the norm inequality (``lower``, ``upper``) and
    their squares, which are the bounds in the quadratic frame form
    ``A||x||^2 <= sum |h(x)|^2 <= B||x||^2``."""

    lower: float
    upper: float
    exact: bool

    @property
    def frame_lower(self) -> float:
        return self.lower ** 2

    @property
    def frame_upper(self) -> float:
        return self.upper ** 2


def _lower_l2(theta: np.ndarray, K: np.ndarray, cutoff: float = 1e-12) -> float:
    """Largest A with ``A||Kx|| <= ||theta x||`` for all x.

    Writing x = K^+ y + z with z in ker K, the best z cancels the part of
    ``theta K^+ y`` lying in ``theta(ker K)``; what remains is a singular value
    problem on range(K).
    """
    U, s, Vt = np.linalg.svd(K)
    if not s.size or s[0] == 0:
        return math.inf
    r = int(np.count_nonzero(s > cutoff * s[0]))
    ker = Vt[r:].T
    M = theta
    if ker.shape[1]:
        TN = theta @ ker
        # rank of theta(ker K) is judged against ||theta||: rounding noise left
        # by an exact cancellation must not count as a direction
        Uq, sq, _ = np.linalg.svd(TN, full_matrices=False)
        q = Uq[:, : int(np.count_nonzero(sq > cutoff * max(_upper_l2(theta), 1e-300)))]
        M = theta - q @ (q.T @ theta)
    W = (M @ Vt[:r].T) / s[:r]
    if W.shape[0] < r:
        return 0.0
    return float(np.linalg.svd(W, compute_uv=False)[r - 1])


def _upper_l2(theta: np.ndarray) -> float:
    return float(np.linalg.norm(theta, 2)) if theta.size else 0.0


def optimal_bounds_l2(d: ApproximativeDecomposition, level: int | None = None) -> ExtremalBounds:
    """Exact optimal constants for l2 ambient space and row-l2 coefficients.

    With ``level`` given, the coefficient norm is that level's row alone.
    With ``level=None`` the full sup-over-levels norm is used; this is exact
    when the top level dominates every other level (always true for
    extending rows). Otherwise ``upper`` is still exact but ``lower`` is the
    best per-level value, a valid lower bound, and ``exact`` is False.
    """
    if not d.ambient.norm.is_l2 or not d.xd_tag.is_row_l2():
        raise UnsupportedNormError("optimal bounds need an l2 ambient space and a row-lp:2 tag")
    K = d.k.entries
    if level is not None:
        theta = d.functionals.level(level)
        return ExtremalBounds(_lower_l2(theta, K), _upper_l2(theta), True)
    levels = d.functionals.levels
    top = levels[-1]
    G = top.T @ top
    scale = max(1.0, float(np.abs(G).max()))
    dominated = all(np.linalg.eigvalsh(G - lv.T @ lv)[0] >= -1e-12 * scale for lv in levels[:-1])
    if dominated:
        return ExtremalBounds(_lower_l2(top, K), _upper_l2(top), True)
    return ExtremalBounds(max(_lower_l2(lv, K) for lv in levels),
                          max(_upper_l2(lv) for lv in levels), False)

