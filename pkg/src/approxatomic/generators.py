"""Named example instances.

``orthonormal``            standard basis with its dual basis, K = I.
``example-2-4``            partial-sum-sup norm over the instance's own atoms.
``example-2-5-dropfirst``  c0 model, h_{n,1} = 0 and h_{n,i} = i-th coordinate,
                           K = diag(0, 1, ..., 1); a K-atomic decomposition
                           that is not an atomic decomposition.
``mercedes``               three unit vectors at 90, 210, 330 degrees in R^2
                           with canonical dual functionals (2/3) x_i.
``random-invertible``      seeded random invertible atoms with their dual
                           basis, K = I.

In the source formulation of the c0 example the index of the last functional
mixes up the level n and the position i. The drop-first-coordinate reading is
implemented: h_{n,1} = 0 and h_{n,i} picks coordinate i for i >= 2.
"""
from __future__ import annotations

import math

import numpy as np

from .decomp import ApproximativeDecomposition, BoundPair, compute_c, optimal_bounds_l2
from .linalg import LinearOperator, ModelSpace, NormTag
from .seqspace import AtomFamily, TriangularArray, XdSpaceTag

__all__ = ["EXAMPLE_NAMES", "generate_example", "mercedes_vectors", "random_invertible_matrix"]

EXAMPLE_NAMES = ("orthonormal", "example-2-4", "example-2-5-dropfirst", "mercedes", "random-invertible")


def mercedes_vectors() -> np.ndarray:
    angles = np.deg2rad([90.0, 210.0, 330.0])
    return np.column_stack([np.cos(angles), np.sin(angles)])


def random_invertible_matrix(dim: int, rng: np.random.Generator,
                             smin: float = 0.5, smax: float = 2.0) -> np.ndarray:
    """Random matrix with singular values drawn from [smin, smax]."""
    Q1, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    Q2, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    return Q1 @ np.diag(rng.uniform(smin, smax, dim)) @ Q2


def _exact_claim(d: ApproximativeDecomposition) -> ApproximativeDecomposition:
    eb = optimal_bounds_l2(d)
    return d.replace(claimed=BoundPair(eb.lower, eb.upper))


def generate_example(name: str, dim: int, seed: int = 0) -> ApproximativeDecomposition:
    if dim < 2:
        raise ValueError("dim must be at least 2")
    if name == "orthonormal":
        amb = ModelSpace(dim, NormTag.lp(2.0))
        return ApproximativeDecomposition(
            AtomFamily(np.eye(dim), amb), TriangularArray.extending(np.eye(dim), amb),
            LinearOperator.identity(amb), XdSpaceTag.row_lp(2.0), BoundPair(1.0, 1.0))
    if name == "example-2-4":
        amb = ModelSpace(dim, NormTag.lp(2.0))
        X = np.eye(dim) + np.eye(dim, k=1)  # x_i = e_i + e_{i+1}, all nonzero
        atoms = AtomFamily(X, amb)
        d = ApproximativeDecomposition(
            atoms, TriangularArray.extending(np.eye(dim), amb),
            LinearOperator(amb, amb, X.T), XdSpaceTag.partial_sum_sup(atoms))
        # the top level is one of the partial sums, so A = 1; B = sup_n ||S_n||
        return d.replace(claimed=BoundPair(1.0, compute_c(d).value))
    if name == "example-2-5-dropfirst":
        amb = ModelSpace(dim, NormTag.c0())
        rows = np.eye(dim)
        rows[0] = 0.0
        return ApproximativeDecomposition(
            AtomFamily(np.eye(dim), amb), TriangularArray.extending(rows, amb),
            LinearOperator(amb, amb, np.diag([0.0] + [1.0] * (dim - 1))),
            XdSpaceTag.row_linf(), BoundPair(1.0, 1.0))
    if name == "mercedes":
        if dim != 2:
            raise ValueError("the mercedes frame lives in dimension 2")
        amb = ModelSpace(2, NormTag.lp(2.0))
        V = mercedes_vectors()
        d = ApproximativeDecomposition(
            AtomFamily(V, amb), TriangularArray((2.0 / 3.0 * V,), amb),
            LinearOperator.identity(amb), XdSpaceTag.row_lp(2.0))
        return d.replace(claimed=BoundPair(math.sqrt(2.0 / 3.0), math.sqrt(2.0 / 3.0)))
    if name == "random-invertible":
        amb = ModelSpace(dim, NormTag.lp(2.0))
        X = random_invertible_matrix(dim, np.random.default_rng(seed))
        d = ApproximativeDecomposition(
            AtomFamily(X.T, amb), TriangularArray.extending(np.linalg.inv(X), amb),
            LinearOperator.identity(amb), XdSpaceTag.row_lp(2.0))
        return _exact_claim(d)
    raise ValueError(f"unknown example {name!r}; choose from {', '.join(EXAMPLE_NAMES)}")
