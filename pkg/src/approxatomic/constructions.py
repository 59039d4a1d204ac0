"""Builders that turn one approximative decomposition into another.

Each builder applies an exact linear-algebra transformation and carries the
claimed bounds forward by the corresponding bound formula. Operator norms in
those formulas are taken between the ambient model spaces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .decomp import (
    ApproximativeDecomposition,
    BoundPair,
    ProbeSet,
    compute_c,
    make_probes,
    optimal_bounds_l2,
    verify_xd_frame,
)
from .linalg import (
    LinearOperator,
    ModelSpace,
    adjoint,
    numerical_rank,
    op_norm,
    pseudo_inverse,
)
from .seqspace import AtomFamily, TriangularArray, XdSpaceTag

__all__ = [
    "HypothesisError",
    "FiniteRankSequence",
    "EquivalenceReport",
    "lift_by_k",
    "pullback_functionals",
    "compose_left",
    "compose_right",
    "refit_via_pseudo",
    "pullback_invertible",
    "from_finite_rank",
    "v_splitting",
    "dualize",
    "k_from_frame_data",
    "check_equivalences",
]


class HypothesisError(ValueError):
    """A theorem's hypothesis does not hold for the given data."""


def _require_same_space(d: ApproximativeDecomposition, op: LinearOperator, name: str):
    if op.domain != d.ambient or op.codomain != d.ambient:
        raise ValueError(f"{name} must act on the decomposition's ambient space")


def _require_nonzero(op: LinearOperator, name: str):
    if op.is_zero():
        raise ValueError(f"{name} must be a nonzero operator")


def _require_identity(d: ApproximativeDecomposition, atol: float = 1e-12):
    if not np.allclose(d.k.entries, np.eye(d.ambient.dim), rtol=0, atol=atol):
        raise ValueError("this construction starts from an atomic decomposition (K = identity)")


def _bounds(a: float, b: float) -> BoundPair | None:
    try:
        return BoundPair(a, b)
    except ValueError:
        return None


def lift_by_k(d: ApproximativeDecomposition, k: LinearOperator) -> ApproximativeDecomposition:
    """Atoms ``x_n -> K x_n``; bounds ``(A/||K||, B)``."""
    _require_identity(d)
    _require_same_space(d, k, "K")
    _require_nonzero(k, "K")
    atoms = AtomFamily(d.atoms.vectors @ k.entries.T, d.ambient)
    claimed = d.claimed and _bounds(d.claimed.a / op_norm(k), d.claimed.b)
    return d.replace(atoms=atoms, k=k, claimed=claimed, notes={})


def pullback_functionals(d: ApproximativeDecomposition, k: LinearOperator) -> ApproximativeDecomposition:
    """Functionals ``h -> K* h``; bounds ``(A, B||K||)``."""
    _require_identity(d)
    _require_same_space(d, k, "K")
    _require_nonzero(k, "K")
    claimed = d.claimed and _bounds(d.claimed.a, d.claimed.b * op_norm(k))
    return d.replace(functionals=d.functionals.transformed(k.entries), k=k, claimed=claimed, notes={})


def compose_left(d: ApproximativeDecomposition, t: LinearOperator) -> ApproximativeDecomposition:
    """From a K-decomposition to a TK-decomposition: atoms ``x_n -> T x_n``,
    bounds ``(A/||T||, B)``."""
    _require_same_space(d, t, "T")
    _require_nonzero(t, "T")
    atoms = AtomFamily(d.atoms.vectors @ t.entries.T, d.ambient)
    claimed = d.claimed and _bounds(d.claimed.a / op_norm(t), d.claimed.b)
    return d.replace(atoms=atoms, k=t @ d.k, claimed=claimed, notes={})


def compose_right(d: ApproximativeDecomposition, t: LinearOperator) -> ApproximativeDecomposition:
    """From a K-decomposition to a KT-decomposition: functionals
    ``h -> T* h``, bounds ``(A, B||T||)``."""
    _require_same_space(d, t, "T")
    _require_nonzero(t, "T")
    claimed = d.claimed and _bounds(d.claimed.a, d.claimed.b * op_norm(t))
    return d.replace(functionals=d.functionals.transformed(t.entries), k=d.k @ t,
                     claimed=claimed, notes={})


def refit_via_pseudo(d: ApproximativeDecomposition) -> ApproximativeDecomposition:
    """Functionals ``g = (K^+ K)* h``, so that only the part of x outside
    ker K is measured.

    The enforced upper bound is ``B ||K^+|| ||K||``. The figure ``B ||K||^2``
    is kept in ``notes["statement_upper"]`` for comparison; it is not a valid
    bound in general.
    """
    k = d.k
    kd = pseudo_inverse(k)
    P = (kd.k_dagger @ k).entries
    claimed = None
    notes = {"pinv_rank": kd.numerical_rank}
    if d.claimed is not None:
        nk = op_norm(k)
        claimed = _bounds(d.claimed.a, d.claimed.b * op_norm(kd.k_dagger) * nk)
        notes["statement_upper"] = d.claimed.b * nk ** 2
    return d.replace(functionals=d.functionals.transformed(P), claimed=claimed, notes=notes)


def pullback_invertible(d: ApproximativeDecomposition, probes: ProbeSet | None = None
                        ) -> ApproximativeDecomposition:
    """Atoms ``x_n -> K^{-1} x_n`` and K replaced by the identity.

    No bound formula accompanies this step, so bounds are recomputed: exactly
    on the l2 / row-l2 path, otherwise from the sampled frame inequality.
    """
    k = d.k.entries
    dim = d.ambient.dim
    if numerical_rank(k, 1e-10) < dim:
        raise HypothesisError("K is singular at relative cutoff 1e-10")
    atoms = AtomFamily(np.linalg.solve(k, d.atoms.vectors.T).T, d.ambient)
    out = d.replace(atoms=atoms, k=LinearOperator.identity(d.ambient), claimed=None, notes={})
    return out.replace(claimed=_frame_bounds(out.functionals, out.xd_tag, probes, out))


def _frame_bounds(h: TriangularArray, tag: XdSpaceTag, probes: ProbeSet | None,
                  d: ApproximativeDecomposition | None = None) -> BoundPair | None:
    """(A, B) of the frame inequality for ``h``; exact when possible."""
    amb = h.ambient
    if amb.norm.is_l2 and tag.is_row_l2():
        probe_d = ApproximativeDecomposition(
            AtomFamily(np.zeros((h.max_size, amb.dim)), amb) if d is None else d.atoms,
            h, LinearOperator.identity(amb), tag)
        eb = optimal_bounds_l2(probe_d)
        return _bounds(eb.lower, eb.upper)
    probes = probes or make_probes(amb, 1000, seed=0)
    rep = verify_xd_frame(h, tag, probes)
    return _bounds(rep.empirical_lower or 0.0, rep.empirical_upper)


@dataclass(frozen=True, eq=False)
class FiniteRankSequence:
    """Operators ``S_1..S_N`` converging (by the caller's claim) to ``target``."""

    ops: tuple
    target: LinearOperator

    def __post_init__(self):
        ops = tuple(self.ops)
        if not ops:
            raise ValueError("need at least one operator")
        for S in ops:
            if S.domain != self.target.domain or S.codomain != self.target.codomain:
                raise ValueError("all operators must share the target's spaces")
        object.__setattr__(self, "ops", ops)

    @property
    def tail_gap(self) -> float:
        """``||K - S_N||`` in the spectral norm."""
        return float(np.linalg.norm(self.target.entries - self.ops[-1].entries, 2))


def v_splitting(ops: Sequence[np.ndarray]) -> list:
    """``v_1 = S_1`` and ``v_{2n} = v_{2n+1} = (S_{n+1} - S_n)/2``, whose
    partial sums ``v_1 + ... + v_{2n-1}`` return ``S_n``."""
    mats = [np.asarray(S.entries if isinstance(S, LinearOperator) else S, dtype=float) for S in ops]
    vs = [mats[0]]
    for a, b in zip(mats, mats[1:]):
        half = 0.5 * (b - a)
        vs.extend([half, half])
    return vs


def from_finite_rank(s: FiniteRankSequence, rank_cutoff: float = 1e-12,
                     xd_tag: XdSpaceTag | None = None) -> ApproximativeDecomposition:
    """Assemble atoms and a triangular array whose level n synthesises S_n.

    Each S_n is split by SVD into rank-one terms ``y_{n,i} g_{n,i}`` (singular
    values folded into ``g``). The new atoms of level n occupy indices
    ``m_{n-1}+1..m_n``; level n's functionals vanish on earlier indices. A
    numerically zero S_n gets one zero atom/functional pair so that m_n still
    increases; such levels are listed in ``notes["zero_padded_levels"]``.
    """
    if not 0 < rank_cutoff < 1:
        raise ValueError("rank_cutoff must lie in (0, 1)")
    amb = s.target.domain
    if s.target.codomain != amb:
        raise ValueError("target must be an endomorphism")
    dim = amb.dim
    mats = [S.entries for S in s.ops]
    scale = max(float(np.linalg.norm(M, 2)) for M in mats)
    atoms, levels, padded = [], [], []
    offset = 0
    for n, M in enumerate(mats, start=1):
        U, sv, Vt = np.linalg.svd(M)
        r = int(np.count_nonzero(sv > rank_cutoff * scale)) if scale > 0 else 0
        if r == 0:
            y, g = np.zeros((1, dim)), np.zeros((1, dim))
            padded.append(n)
        else:
            y, g = U[:, :r].T, sv[:r, None] * Vt[:r]
        atoms.append(y)
        levels.append(np.vstack([np.zeros((offset, dim)), g]))
        offset += y.shape[0]
    tag = xd_tag or XdSpaceTag.row_lp(2.0)
    return ApproximativeDecomposition(
        AtomFamily(np.vstack(atoms), amb),
        TriangularArray(tuple(levels), amb),
        s.target, tag, None,
        notes={"zero_padded_levels": padded, "tail_gap": s.tail_gap},
    )


def _coefficient_space(tag: XdSpaceTag, size: int) -> ModelSpace:
    return ModelSpace(size, tag.row_norm)


def dualize(d: ApproximativeDecomposition) -> ApproximativeDecomposition:
    """Dual object on X*: the functionals become atoms, evaluation at the
    atoms ``x_i`` becomes the functionals, and K becomes K*.

    With extending rows the dual keeps the same level sizes and its atoms are
    the top row. Otherwise every level's functionals are laid out one after
    another and dual level n reads only its own block, which keeps the level
    syntheses exact. Bounds are ``(1/||R*||, ||S||)`` with R the analysis map
    into the top level and S the top-level synthesis.
    """
    amb = d.ambient
    dual_amb = amb.dual()
    dual_tag = d.xd_tag.dual()
    H = d.functionals
    X = d.atoms.vectors
    if H.is_extending():
        dual_atoms = H.top
        dual_levels = tuple(X[: lv.shape[0]] for lv in H.levels)
    else:
        dual_atoms = H.stacked()
        dual_levels, offset = [], 0
        for lv in H.levels:
            m = lv.shape[0]
            dual_levels.append(np.vstack([np.zeros((offset, amb.dim)), X[:m]]))
            offset += m
        dual_levels = tuple(dual_levels)
    m_top = H.top.shape[0]
    r_star = LinearOperator(_coefficient_space(dual_tag, m_top), dual_amb, H.top.T)
    synth = LinearOperator(_coefficient_space(d.xd_tag, m_top), amb, X[:m_top].T)
    nr = op_norm(r_star)
    claimed = _bounds(1.0 / nr, op_norm(synth)) if nr > 0 else None
    return ApproximativeDecomposition(
        AtomFamily(dual_atoms, dual_amb),
        TriangularArray(dual_levels, dual_amb),
        adjoint(d.k),
        dual_tag,
        claimed,
    )


def k_from_frame_data(h: TriangularArray, atoms: AtomFamily, xd_tag: XdSpaceTag,
                      probes: ProbeSet | None = None) -> tuple:
    """Operator K = T U from an analysis array and atoms, plus the assembled
    decomposition with bounds ``(A/C, B)``.

    U is the analysis map, T the top-level synthesis and C = sup_n ||S_n||.
    (A, B) are the frame bounds of ``h``: exact on the l2 / row-l2 path,
    sampled otherwise. When h has no positive lower frame bound the claim is
    left empty.
    """
    amb = h.ambient
    top = h.top
    k = LinearOperator(amb, amb, atoms.synthesis(top.shape[0]) @ top)
    d = ApproximativeDecomposition(atoms, h, k, xd_tag, None)
    frame = _frame_bounds(h, xd_tag, probes, d)
    c = compute_c(d, probes).value
    claimed = _bounds(frame.a / c, frame.b) if frame is not None and c > 0 else None
    return k, d.replace(claimed=claimed)


@dataclass
class EquivalenceReport:
    """Five conditions on the top-level analysis U and synthesis T.

    (a) T is a generalized inverse of U (UTU = U and TUT = T).
    (b) TU = I.
    (c) U is injective and T inverts it on range(U).
    (d) U is injective and UT is an idempotent fixing range(U).
    (e) T is surjective and UT is an idempotent along ker T.
    """

    pseudo_inverse_of_u: bool
    atomic_reconstruction: bool
    extends_u_inverse: bool
    range_complemented: bool
    kernel_complemented_and_surjective: bool
    hypothesis_holds: bool
    residuals: dict = field(default_factory=dict)
    projectors: dict = field(default_factory=dict)

    @property
    def flags(self) -> tuple:
        return (self.pseudo_inverse_of_u, self.atomic_reconstruction, self.extends_u_inverse,
                self.range_complemented, self.kernel_complemented_and_surjective)

    @property
    def consistent(self) -> bool:
        return len(set(self.flags)) == 1

    def to_dict(self, with_projectors: bool = False) -> dict:
        out = {
            "pseudo_inverse_of_u": self.pseudo_inverse_of_u,
            "atomic_reconstruction": self.atomic_reconstruction,
            "extends_u_inverse": self.extends_u_inverse,
            "range_complemented": self.range_complemented,
            "kernel_complemented_and_surjective": self.kernel_complemented_and_surjective,
            "consistent": self.consistent,
            "hypothesis_holds": self.hypothesis_holds,
            "residuals": {k: float(v) for k, v in self.residuals.items()},
        }
        if with_projectors:
            out["projectors"] = {k: np.asarray(v).tolist() for k, v in self.projectors.items()}
        return out


def _maxabs(a) -> float:
    a = np.asarray(a)
    return float(np.abs(a).max()) if a.size else 0.0


def check_equivalences(atoms: AtomFamily, h: TriangularArray, tol: float = 1e-8,
                       strict: bool = True) -> EquivalenceReport:
    """Evaluate the five equivalent conditions for the induced K = T U.

    The conditions are only claimed equivalent when K is invertible. With
    ``strict=True`` a singular K raises :class:`HypothesisError`; otherwise the
    flags are still computed and ``hypothesis_holds`` is False.
    """
    dim = h.ambient.dim
    U = h.top
    m = U.shape[0]
    T = atoms.synthesis(m)
    K = T @ U
    invertible = numerical_rank(K, 1e-10) == dim
    if strict and not invertible:
        raise HypothesisError("K = TU is singular; the equivalences need K invertible")

    TU, UT = K, U @ T
    res = {
        "utu_minus_u": _maxabs(U @ TU - U),
        "tut_minus_t": _maxabs(T @ UT - T),
        "tu_minus_identity": _maxabs(TU - np.eye(dim)),
    }
    u_rank = numerical_rank(U, 1e-10)
    t_rank = numerical_rank(T, 1e-10)
    u_injective = u_rank == dim
    t_surjective = t_rank == dim

    # orthonormal basis of range(U)
    Uq, sq, _ = np.linalg.svd(U, full_matrices=False)
    Q = Uq[:, :u_rank]
    res["ut_on_range_u"] = _maxabs(UT @ Q - Q)
    res["ut_idempotent"] = _maxabs(UT @ UT - UT)
    res["ut_fixes_range_u"] = _maxabs(UT @ U - U)
    ut_rank = numerical_rank(UT, 1e-10)

    flag_a = res["utu_minus_u"] <= tol and res["tut_minus_t"] <= tol
    flag_b = res["tu_minus_identity"] <= tol
    flag_c = u_injective and res["ut_on_range_u"] <= tol
    flag_d = u_injective and res["ut_idempotent"] <= tol and res["ut_fixes_range_u"] <= tol
    flag_e = t_surjective and res["ut_idempotent"] <= tol and ut_rank == t_rank

    projectors = {"range_projector_ut": UT, "kernel_side_projector": np.eye(m) - UT}
    if invertible:
        # always an idempotent onto range(U); shows complementedness itself
        # is automatic at finite dimension
        projectors["complement_projector"] = U @ np.linalg.solve(K, T)
    return EquivalenceReport(flag_a, flag_b, flag_c, flag_d, flag_e, invertible, res, projectors)
