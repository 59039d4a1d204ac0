import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from approxatomic.decomp import (
    ApproximativeDecomposition,
    BoundPair,
    ProbeSet,
    UnsupportedNormError,
    compute_c,
    level_synthesis,
    make_probes,
    optimal_bounds_l2,
    verify_bessel,
    verify_k_atomic,
    verify_xd_frame,
)
from approxatomic.generators import generate_example, mercedes_vectors
from approxatomic.linalg import LinearOperator, ModelSpace, NormTag, vec_norms
from approxatomic.seqspace import AtomFamily, TriangularArray, XdSpaceTag

ROW2 = XdSpaceTag.row_lp(2)


def _decomp(atoms, rows, k=None, tag=ROW2, norm=None, extending=True, claimed=None):
    atoms = np.asarray(atoms, dtype=float)
    amb = ModelSpace(atoms.shape[1], norm or NormTag.lp(2))
    H = TriangularArray.extending(rows, amb) if extending else TriangularArray((np.asarray(rows, float),), amb)
    K = LinearOperator.identity(amb) if k is None else LinearOperator(amb, amb, np.asarray(k, float))
    return ApproximativeDecomposition(AtomFamily(atoms, amb), H, K, tag, claimed)


def _brute_level(atoms, H, x, n):
    """Level synthesis written out term by term with exact summation."""
    rows = H.level(n)
    out = []
    for j in range(atoms.shape[1]):
        out.append(math.fsum(math.fsum(rows[i, k] * x[k] for k in range(len(x))) * atoms[i, j]
                             for i in range(rows.shape[0])))
    return np.array(out)


class TestLevelSynthesis:
    def test_coordinate_truncation(self):
        d = _decomp(np.eye(3), np.eye(3))
        assert np.array_equal(level_synthesis(d, [5, 7, 9], 2), [5, 7, 0])

    def test_zero(self):
        d = generate_example("random-invertible", 5, seed=3)
        for n in range(1, 6):
            assert not np.any(level_synthesis(d, np.zeros(5), n))

    def test_dropfirst(self):
        d = generate_example("example-2-5-dropfirst", 4)
        assert np.array_equal(level_synthesis(d, [1, 2, 3, 4], 4), [0, 2, 3, 4])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.integers(2, 6))
    def test_matches_termwise_sum(self, seed, dim):
        rng = np.random.default_rng(seed)
        atoms = rng.standard_normal((dim + 2, dim))
        levels = tuple(rng.standard_normal((m, dim)) for m in range(1, dim + 3))
        amb = ModelSpace(dim)
        d = ApproximativeDecomposition(AtomFamily(atoms, amb), TriangularArray(levels, amb),
                                       LinearOperator.identity(amb), ROW2)
        x = rng.standard_normal(dim)
        for n in range(1, dim + 3):
            assert np.allclose(level_synthesis(d, x, n), _brute_level(atoms, d.functionals, x, n),
                               rtol=1e-12, atol=1e-12)


class TestProbes:
    def test_deterministic(self):
        a = make_probes(ModelSpace(5), 50, seed=9)
        b = make_probes(ModelSpace(5), 50, seed=9)
        assert a.vectors.tobytes() == b.vectors.tobytes()

    @pytest.mark.parametrize("tag", [NormTag.lp(2), NormTag.lp(1), NormTag.linf(), NormTag.lp(3)])
    def test_unit_norm(self, tag):
        P = make_probes(ModelSpace(4, tag), 200, seed=1).vectors
        assert np.allclose(vec_norms(P, tag, axis=1), 1.0, atol=1e-14)
        assert P.shape == (200, 4)

    def test_basis_first_for_sup_norm(self):
        P = make_probes(ModelSpace(3, NormTag.c0()), 20).vectors
        assert np.array_equal(P[:3], np.eye(3))

    def test_all_vertices_when_small(self):
        P = make_probes(ModelSpace(3, NormTag.linf()), 100).vectors
        verts = {tuple(v) for v in P[3:11]}
        assert len(verts) == 8 and all(set(v) <= {-1.0, 1.0} for v in verts)

    def test_rejects_zero_probe(self):
        with pytest.raises(ValueError):
            ProbeSet(np.zeros((1, 2)))
        with pytest.raises(ValueError):
            make_probes(ModelSpace(2), 0)


class TestVerifyKAtomic:
    def test_orthonormal(self):
        d = generate_example("orthonormal", 4)
        rep = verify_k_atomic(d, make_probes(d.ambient, 100))
        assert rep.empirical_lower == pytest.approx(1, abs=1e-12)
        assert rep.empirical_upper == pytest.approx(1, abs=1e-12)
        assert rep.residual_by_level[-1] == 0.0
        assert rep.passed and rep.probes_used == 100

    def test_dropfirst(self):
        d = generate_example("example-2-5-dropfirst", 4)
        rep = verify_k_atomic(d, make_probes(d.ambient, 500))
        assert rep.passed_c
        assert rep.empirical_lower == pytest.approx(1, abs=1e-9)
        # brute force: row-sup norm of the coefficients equals ||Kx||_inf on every probe
        P = make_probes(d.ambient, 500).vectors
        for x in P:
            coeffs = max(np.abs(lv @ x).max() for lv in d.functionals.levels)
            kx = np.abs(d.k.entries @ x).max()
            if kx > 1e-8:
                assert coeffs == pytest.approx(kx, abs=1e-15)

    def test_wrong_claim_fails(self):
        d = generate_example("orthonormal", 3).replace(claimed=BoundPair(1.5, 2.0))
        assert not verify_k_atomic(d, make_probes(d.ambient, 50)).passed_b

    def test_bad_reconstruction_fails(self):
        d = generate_example("orthonormal", 3)
        d = d.replace(k=LinearOperator(d.ambient, d.ambient, 2 * np.eye(3)), claimed=None)
        rep = verify_k_atomic(d, make_probes(d.ambient, 50))
        assert not rep.passed_c and rep.residual_by_level[-1] == pytest.approx(1.0)

    def test_kernel_probes_counted(self):
        d = generate_example("example-2-5-dropfirst", 3)
        probes = make_probes(d.ambient, 30)
        rep = verify_k_atomic(d, probes)
        assert rep.kernel_probes_skipped == 1  # e_1 leads the probe set

    def test_json_key_order(self):
        d = generate_example("orthonormal", 2)
        keys = list(json.loads(verify_k_atomic(d, make_probes(d.ambient, 10)).to_json()))
        assert keys[:9] == ["empirical_lower", "empirical_upper", "residual_by_level", "c_constant",
                            "passed_a", "passed_b", "passed_c", "probes_used", "seed"]

    def test_xd_frame_agrees_bitwise_when_k_is_identity(self):
        d = generate_example("random-invertible", 6, seed=4)
        probes = make_probes(d.ambient, 300, seed=2)
        a = verify_k_atomic(d, probes)
        b = verify_xd_frame(d.functionals, d.xd_tag, probes)
        assert a.empirical_lower == b.empirical_lower and a.empirical_upper == b.empirical_upper


class TestVerifyXdFrame:
    def test_dual_basis(self):
        H = TriangularArray.extending(np.eye(3), ModelSpace(3))
        rep = verify_xd_frame(H, ROW2, make_probes(H.ambient, 100))
        assert rep.empirical_lower == pytest.approx(1, abs=1e-12)
        assert rep.empirical_upper == pytest.approx(1, abs=1e-12)
        assert rep.passed and rep.c_constant is None and rep.residual_by_level == ()

    def test_zero_functionals(self):
        H = TriangularArray.extending(np.zeros((3, 3)), ModelSpace(3))
        rep = verify_xd_frame(H, ROW2, make_probes(H.ambient, 50), claimed=BoundPair(0.1, 1.0))
        assert rep.empirical_lower == 0.0 and rep.empirical_upper == 0.0
        assert not rep.passed_b

    def test_dropfirst_not_a_frame(self):
        d = generate_example("example-2-5-dropfirst", 4)
        rep = verify_xd_frame(d.functionals, d.xd_tag, make_probes(d.ambient, 100))
        assert rep.empirical_lower == 0.0 and not rep.passed


class TestBessel:
    def test_zero(self):
        H = TriangularArray.extending(np.zeros((2, 2)), ModelSpace(2))
        assert verify_bessel(H, ROW2, make_probes(H.ambient, 10)) == 0.0

    def test_dual_basis(self):
        H = TriangularArray.extending(np.eye(4), ModelSpace(4))
        assert verify_bessel(H, ROW2, make_probes(H.ambient, 100)) == pytest.approx(1, abs=1e-12)

    def test_homogeneous(self):
        d = generate_example("random-invertible", 4, seed=1)
        probes = make_probes(d.ambient, 100)
        base = verify_bessel(d.functionals, ROW2, probes)
        assert verify_bessel(d.functionals.scaled(7), ROW2, probes) == pytest.approx(7 * base, rel=1e-12)


class TestComputeC:
    def test_orthonormal(self):
        c = compute_c(generate_example("orthonormal", 5))
        assert c.value == pytest.approx(1.0, abs=1e-12) and c.exact

    def test_dropfirst(self):
        c = compute_c(generate_example("example-2-5-dropfirst", 4))
        assert c.value == 1.0 and c.exact

    def test_sampled_below_exact(self):
        d = generate_example("example-2-4", 5)
        c = compute_c(d, make_probes(d.ambient, 2000))
        assert c.sampled <= c.value + 1e-12
        # oracle: max spectral norm over level operators
        X = d.atoms.vectors.T
        oracle = max(np.linalg.norm(X[:, :n] @ np.eye(5)[:n], 2) for n in range(1, 6))
        assert c.value == pytest.approx(oracle, rel=1e-12)


class TestOptimalBounds:
    def test_orthonormal(self):
        eb = optimal_bounds_l2(generate_example("orthonormal", 3))
        assert eb.lower == pytest.approx(1, abs=1e-12) and eb.upper == pytest.approx(1, abs=1e-12)

    def test_mercedes_unit_functionals(self):
        V = mercedes_vectors()
        d = _decomp(2 / 3 * V, V, extending=False)
        eb = optimal_bounds_l2(d)
        G = V.T @ V  # direct 2x2 oracle
        assert np.allclose(G, 1.5 * np.eye(2), atol=1e-15)
        assert eb.frame_lower == pytest.approx(1.5, abs=1e-9)
        assert eb.frame_upper == pytest.approx(1.5, abs=1e-9)

    def test_scaled_dual_basis(self):
        d = _decomp(np.diag([1.0, 0.5]), np.diag([1.0, 2.0]), extending=False)
        eb = optimal_bounds_l2(d)
        assert (eb.lower, eb.upper) == pytest.approx((1.0, 2.0), abs=1e-12)

    def test_unsupported(self):
        with pytest.raises(UnsupportedNormError):
            optimal_bounds_l2(generate_example("example-2-5-dropfirst", 3))

    def test_sampling_within_exact(self):
        d = generate_example("random-invertible", 5, seed=7)
        eb = optimal_bounds_l2(d)
        rep = verify_k_atomic(d, make_probes(d.ambient, 5000, seed=3))
        assert eb.exact
        assert eb.lower <= rep.empirical_lower + 1e-12
        assert rep.empirical_upper <= eb.upper + 1e-12

    def test_singular_k_lower_bound(self):
        # A||Kx|| <= ||Hx|| with K a projection: oracle via minimising over a dense circle
        H = np.array([[1.0, 1.0], [0.0, 1.0]])
        d = _decomp(np.linalg.inv(H).T, H, k=np.diag([1.0, 0.0]), extending=False)
        d = d.replace(atoms=AtomFamily(np.array([[1.0, 0.0], [-1.0, 0.0]]), d.ambient))
        eb = optimal_bounds_l2(d)
        t = np.linspace(0, 2 * np.pi, 200001)
        X = np.vstack([np.cos(t), np.sin(t)])
        kx = np.abs(X[0])
        ratio = np.linalg.norm(H @ X, axis=0)[kx > 1e-6] / kx[kx > 1e-6]
        assert eb.lower == pytest.approx(ratio.min(), rel=1e-6)
        assert eb.lower <= ratio.min() + 1e-12

    def test_lower_ignores_rounding_in_kernel_image(self):
        # functionals h P with P the projection onto ker(K)^perp: theta(ker K) is
        # zero up to rounding and must not be projected out
        rng = np.random.default_rng(8)
        u = rng.standard_normal((5, 1))
        K = u @ rng.standard_normal((1, 5))
        Kd = np.linalg.pinv(K)
        H = np.linalg.inv(rng.standard_normal((5, 5))) @ (Kd @ K)
        d = _decomp(np.eye(5), H, k=K)
        eb = optimal_bounds_l2(d)
        # oracle: everything lives on the single direction spanning range(K^T)
        v = Kd @ K @ rng.standard_normal(5)
        assert eb.lower == pytest.approx(np.linalg.norm(H @ v) / np.linalg.norm(K @ v), rel=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.floats(0.1, 10))
    def test_scale_equivariance(self, seed, c):
        d = generate_example("random-invertible", 4, seed=seed % 1000)
        eb = optimal_bounds_l2(d)
        ebc = optimal_bounds_l2(d.replace(functionals=d.functionals.scaled(c), claimed=None))
        assert ebc.lower == pytest.approx(c * eb.lower, rel=1e-9)
        assert ebc.upper == pytest.approx(c * eb.upper, rel=1e-9)

    def test_level_argument(self):
        d = generate_example("orthonormal", 3)
        eb = optimal_bounds_l2(d, level=1)
        assert eb.upper == pytest.approx(1.0) and eb.lower == pytest.approx(0.0, abs=1e-12)


def test_bound_pair_validation():
    with pytest.raises(ValueError):
        BoundPair(0.0, 1.0)
    with pytest.raises(ValueError):
        BoundPair(1.0, math.inf)
    assert not BoundPair(2.0, 1.0).ordered


def test_decomposition_needs_enough_atoms():
    amb = ModelSpace(3)
    with pytest.raises(ValueError):
        ApproximativeDecomposition(AtomFamily(np.eye(3)[:2], amb), TriangularArray.extending(np.eye(3), amb),
                                   LinearOperator.identity(amb), ROW2)
