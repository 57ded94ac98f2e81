"""Unit tests for the cofactorization model."""

import numpy as np
import pytest

from src.errors import DataError, DimensionMismatchError, InactiveBlockError
from src.model import (
    BLOCK_ORDER,
    LIPSCHITZ_FLOOR,
    Block,
    Constraint,
    FactorState,
    ProblemSpec,
    Variant,
    Weights,
    check_dimensions,
    cluster_signatures,
    constraint_for,
    coupling_penalty,
    eval_smooth,
    grad_block,
    is_feasible,
    lipschitz_block,
    normalize_abundances,
    objective_terms,
)
from src.tensor_core import spectral_norm

ALL_VARIANTS = [Variant.SP2U, Variant.NMF, Variant.NSP2U, Variant.CSPU]


def _naive_objective(spec, st):
    w = spec.weights
    total = 0.5 * w.lambda0 * np.sum((spec.Y - st.M @ st.A) ** 2)
    total += 0.5 * w.lambda1 * np.sum((spec.S - st.D @ st.U) ** 2)
    stacked = np.vstack([st.A, st.U])
    total += 0.5 * w.lambda2 * np.sum((stacked - st.B @ st.Z) ** 2)
    K = st.Z.shape[0]
    V = np.ones((K, K)) - np.eye(K)
    total += 0.5 * w.lambda_z * np.trace(st.Z.T @ V @ st.Z)
    return total


class TestProblemSpec:
    """Tests for ProblemSpec validation."""

    def test_rejects_too_many_endmembers(self, rng):
        """R1 must stay below the number of bands."""
        with pytest.raises(DataError):
            ProblemSpec(Y=rng.random((3, 10)), R1=3, variant=Variant.NMF)

    def test_rejects_column_mismatch(self, rng):
        """Y and S must have the same number of pixels."""
        with pytest.raises(DimensionMismatchError) as info:
            ProblemSpec(Y=rng.random((6, 10)), S=rng.random((4, 11)), R1=2, R2=2, K=2)
        assert info.value.first == "Y" and info.value.second == "S"

    def test_rejects_negative_weight(self):
        """Weights must be non-negative."""
        with pytest.raises(ValueError):
            Weights(lambda0=-1.0)

    def test_spatial_variant_needs_features(self, rng):
        """SP2U without S is rejected."""
        with pytest.raises(DataError):
            ProblemSpec(Y=rng.random((6, 10)), R1=2, R2=2, K=2)

    def test_variant_lookup(self):
        """Methods are found by their command-line names."""
        assert Variant.from_name("vca-fcls") is Variant.FCLS
        assert Variant.from_name("SP2U") is Variant.SP2U
        with pytest.raises(ValueError):
            Variant.from_name("ica")

    def test_dims(self, make_problem):
        """dims reports every problem size."""
        spec, _ = make_problem()
        d = spec.dims
        assert (d.d1, d.d2, d.P, d.R1, d.R2, d.K) == (12, 9, 40, 3, 4, 5)


class TestObjective:
    """Tests for eval_smooth and objective_terms."""

    def test_all_weights_zero(self, make_problem):
        """All-zero weights give a zero objective."""
        spec, st = make_problem(weights=Weights(0.0, 0.0, 0.0, 0.0))
        assert eval_smooth(spec, st) == 0.0

    def test_exact_factorization(self, rng):
        """Exact factorizations with lambda_z = 0 give zero."""
        d1, d2, P, R1, R2 = 8, 5, 12, 3, 2
        M, D = rng.random((d1, R1)), rng.random((d2, R2))
        A = rng.dirichlet(np.ones(R1), size=P).T
        U = rng.dirichlet(np.ones(R2), size=P).T
        spec = ProblemSpec(Y=M @ A, S=D @ U, R1=R1, R2=R2, K=P,
                           weights=Weights(1.0, 1.0, 1.0, 0.0))
        st = FactorState(M=M, A=A, D=D, U=U, B=np.vstack([A, U]), Z=np.eye(P))
        assert eval_smooth(spec, st) == pytest.approx(0.0, abs=1e-24)

    def test_matches_naive_evaluator(self, make_problem):
        """Agrees with an independent sum of the four terms."""
        spec, st = make_problem()
        assert eval_smooth(spec, st) == pytest.approx(_naive_objective(spec, st), rel=1e-10)

    def test_nmf_keeps_only_spectral_term(self, make_problem):
        """The NMF variant has no spatial or clustering contribution."""
        spec, st = make_problem(variant=Variant.NMF)
        terms = objective_terms(spec, st)
        assert terms["spatial"] == terms["clustering"] == terms["orthogonality"] == 0.0
        assert eval_smooth(spec, st) == pytest.approx(
            0.5 * np.sum((spec.Y - st.M @ st.A) ** 2), rel=1e-12)

    def test_nsp2u_uses_abundances_as_codes(self, make_problem):
        """n-SP2U fits S with D A."""
        spec, st = make_problem(variant=Variant.NSP2U)
        w = spec.weights
        expected = (0.5 * w.lambda0 * np.sum((spec.Y - st.M @ st.A) ** 2)
                    + 0.5 * w.lambda1 * np.sum((spec.S - st.D @ st.A) ** 2))
        assert eval_smooth(spec, st) == pytest.approx(expected, rel=1e-12)

    def test_dimension_mismatch_names_blocks(self, make_problem, rng):
        """A wrongly sized block raises an error naming it."""
        spec, st = make_problem()
        bad = st.with_block(Block.D, rng.random((3, 4)))
        with pytest.raises(DimensionMismatchError) as info:
            eval_smooth(spec, bad)
        assert info.value.second == "D"
        assert "S" in str(info.value)


class TestCouplingPenalty:
    """Tests for coupling_penalty."""

    def test_hard_assignments_give_zero(self):
        """One 1 per column gives 0."""
        Z = np.zeros((4, 6))
        Z[[0, 1, 2, 3, 0, 2], np.arange(6)] = 1.0
        assert coupling_penalty(Z) == 0.0

    def test_uniform_assignments(self):
        """Uniform 1/K entries give P (K - 1) / K."""
        K, P = 5, 7
        assert coupling_penalty(np.full((K, P), 1.0 / K)) == pytest.approx(P * (K - 1) / K, rel=1e-12)

    def test_matches_dense_trace(self, rng):
        """Equals Tr(Z^T (1 1^T - I) Z)."""
        Z = rng.random((6, 20))
        V = np.ones((6, 6)) - np.eye(6)
        assert coupling_penalty(Z) == pytest.approx(np.trace(Z.T @ V @ Z), abs=1e-10)

    def test_zero_iff_disjoint_row_supports(self):
        """Zero exactly when no column has two non-zero rows."""
        for pattern in range(1, 2 ** 6):
            bits = [(pattern >> i) & 1 for i in range(6)]
            Z = np.array(bits, dtype=float).reshape(2, 3)
            disjoint = not np.any(Z[0] * Z[1])
            assert (coupling_penalty(Z) == 0.0) == disjoint


class TestGradients:
    """Tests for grad_block."""

    @pytest.mark.parametrize("variant", ALL_VARIANTS)
    def test_matches_central_differences(self, make_problem, rng, variant):
        """Directional derivatives match central differences with step 1e-6."""
        h = 1e-6
        for _ in range(50):
            spec, st = make_problem(variant=variant)
            for block in spec.active_blocks:
                X = st.get(block)
                direction = rng.normal(size=X.shape)
                plus = eval_smooth(spec, st.with_block(block, X + h * direction))
                minus = eval_smooth(spec, st.with_block(block, X - h * direction))
                numeric = (plus - minus) / (2 * h)
                analytic = float(np.sum(grad_block(spec, st, block) * direction))
                assert abs(numeric - analytic) <= 1e-5 * max(abs(analytic), 1.0)

    def test_zero_residual_gives_zero_gradient(self, rng):
        """Block M has zero gradient when Y = M A."""
        M = rng.random((6, 2))
        A = rng.dirichlet(np.ones(2), size=9).T
        spec = ProblemSpec(Y=M @ A, R1=2, variant=Variant.NMF)
        grad = grad_block(spec, FactorState(M=M, A=A), Block.M)
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)

    def test_z_gradient_without_clustering(self, make_problem):
        """With lambda2 = 0 the Z gradient is lambda_z V Z."""
        spec, st = make_problem(weights=Weights(1.0, 1.0, 0.0, 0.3))
        K = st.Z.shape[0]
        V = np.ones((K, K)) - np.eye(K)
        np.testing.assert_allclose(grad_block(spec, st, Block.Z), 0.3 * V @ st.Z, atol=1e-13)

    def test_inactive_block_rejected(self, make_problem):
        """NMF does not estimate D."""
        spec, st = make_problem(variant=Variant.NMF)
        with pytest.raises(InactiveBlockError):
            grad_block(spec, st, Block.D)


class TestLipschitz:
    """Tests for lipschitz_block."""

    @pytest.mark.parametrize("variant", ALL_VARIANTS)
    def test_bounds_gradient_differences(self, make_problem, rng, variant):
        """||grad(X1) - grad(X2)|| <= L ||X1 - X2|| along random directions."""
        spec, st = make_problem(variant=variant)
        for block in spec.active_blocks:
            L = lipschitz_block(spec, st, block)
            X = st.get(block)
            for _ in range(100):
                X1 = X + rng.normal(size=X.shape)
                X2 = X + rng.normal(size=X.shape)
                g1 = grad_block(spec, st.with_block(block, X1), block)
                g2 = grad_block(spec, st.with_block(block, X2), block)
                lhs = np.linalg.norm(g1 - g2)
                assert lhs <= L * np.linalg.norm(X1 - X2) * (1 + 1e-8) + 1e-8

    def test_orthonormal_endmembers(self, rng):
        """M^T M = I with lambda0 = lambda2 = 1 gives L_A = 2."""
        M, _ = np.linalg.qr(rng.normal(size=(6, 3)))
        spec = ProblemSpec(Y=rng.random((6, 10)), S=rng.random((4, 10)), R1=3, R2=2, K=2,
                           weights=Weights(1.0, 1.0, 1.0, 0.1))
        st = FactorState(M=M, A=np.full((3, 10), 1 / 3), D=rng.random((4, 2)),
                         U=np.full((2, 10), 0.5), B=rng.random((5, 2)), Z=np.full((2, 10), 0.5))
        assert lipschitz_block(spec, st, Block.A) == pytest.approx(2.0, rel=1e-8)

    def test_zero_abundances_floored(self, rng):
        """A = 0 gives the floor for L_M."""
        spec = ProblemSpec(Y=rng.random((5, 8)), R1=2, variant=Variant.NMF)
        st = FactorState(M=rng.random((5, 2)), A=np.zeros((2, 8)))
        assert lipschitz_block(spec, st, Block.M) == LIPSCHITZ_FLOOR

    def test_recomputes_appendix_expression(self, make_problem):
        """L_A equals an independent norm of lambda0 M^T M + lambda2 I."""
        spec, st = make_problem()
        w = spec.weights
        expected = spectral_norm(w.lambda0 * st.M.T @ st.M + w.lambda2 * np.eye(spec.R1))
        assert lipschitz_block(spec, st, Block.A) == pytest.approx(expected, rel=1e-8)


class TestConstraintsAndSignatures:
    """Tests for constraint sets and cluster signatures."""

    def test_constraint_sets(self, make_problem):
        """Simplex on A, U, Z; non-negativity on M, D, B."""
        spec, _ = make_problem()
        simplex = {b for b in BLOCK_ORDER if constraint_for(spec, b) is Constraint.SIMPLEX}
        assert simplex == {Block.A, Block.U, Block.Z}

    def test_relaxed_variant_moves_simplex_to_endmembers(self, make_problem):
        """Without sum-to-one on A the simplex constraint sits on M."""
        spec, st = make_problem(sum_to_one_on_A=False)
        assert constraint_for(spec, Block.M) is Constraint.SIMPLEX
        assert constraint_for(spec, Block.A) is Constraint.NONNEG
        assert is_feasible(spec, st)

    def test_random_state_feasible(self, make_problem):
        """Random builder states satisfy every constraint."""
        spec, st = make_problem()
        assert is_feasible(spec, st)
        assert not is_feasible(spec, st.with_block(Block.A, st.A * 2))

    def test_identity_selection(self, rng):
        """B = [I; 0] selects the columns of M over zeros."""
        M, D = rng.random((6, 3)), rng.random((4, 2))
        B = np.vstack([np.eye(3), np.zeros((2, 3))])
        st = FactorState(M=M, A=np.zeros((3, 1)), D=D, U=np.zeros((2, 1)), B=B, Z=np.zeros((3, 1)))
        np.testing.assert_array_equal(cluster_signatures(st), np.vstack([M, np.zeros((4, 3))]))

    def test_zero_centroids(self, rng):
        """B = 0 gives zero signatures."""
        st = FactorState(M=rng.random((6, 3)), A=np.zeros((3, 1)), D=rng.random((4, 2)),
                         U=np.zeros((2, 1)), B=np.zeros((5, 4)), Z=np.zeros((4, 1)))
        np.testing.assert_array_equal(cluster_signatures(st), np.zeros((10, 4)))

    def test_matches_block_diagonal_product(self, rng):
        """Equals blockdiag(M, D) B."""
        M, D, B = rng.random((6, 3)), rng.random((4, 2)), rng.random((5, 7))
        st = FactorState(M=M, A=np.zeros((3, 1)), D=D, U=np.zeros((2, 1)), B=B, Z=np.zeros((7, 1)))
        blockdiag = np.zeros((10, 5))
        blockdiag[:6, :3] = M
        blockdiag[6:, 3:] = D
        np.testing.assert_allclose(cluster_signatures(st), blockdiag @ B, atol=1e-12)

    def test_linear_in_centroids(self, rng):
        """Signatures of B1 + B2 are the sum of the signatures."""
        M, D = rng.random((6, 3)), rng.random((4, 2))
        B1, B2 = rng.random((5, 4)), rng.random((5, 4))

        def sig(B):
            return cluster_signatures(FactorState(M=M, A=np.zeros((3, 1)), D=D,
                                                  U=np.zeros((2, 1)), B=B, Z=np.zeros((4, 1))))

        np.testing.assert_allclose(sig(B1 + B2), sig(B1) + sig(B2), atol=1e-12)

    def test_normalize_abundances(self):
        """Columns are rescaled to sum to one; zero columns stay zero."""
        A = np.array([[1.0, 0.0, 2.0], [3.0, 0.0, 2.0]])
        np.testing.assert_allclose(normalize_abundances(A), [[0.25, 0.0, 0.5], [0.75, 0.0, 0.5]])

    def test_check_dimensions_accepts_builder_state(self, make_problem):
        """A consistent state passes."""
        spec, st = make_problem(variant=Variant.CSPU)
        check_dimensions(spec, st)
