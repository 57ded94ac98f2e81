"""Unit tests for k-means, VCA and the starting-point pipeline."""

import numpy as np
import pytest

from src.errors import DataError, RankDeficientError
from src.initialization import indicator_matrix, initialize, kmeans, vca_extract
from src.model import Block, ProblemSpec, Variant, expected_shapes, is_feasible


def _blobs(rng, centers, per_cluster=20, spread=0.01):
    centers = np.asarray(centers, dtype=float)
    points = [c[:, np.newaxis] + spread * rng.normal(size=(c.size, per_cluster)) for c in centers]
    return np.hstack(points)


class TestKMeans:
    """Tests for kmeans."""

    def test_separates_distant_blobs(self, rng):
        """Three far-apart blobs end up in three clusters."""
        X = _blobs(rng, [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
        result = kmeans(X, 3, seed=4)
        groups = result.assignments.reshape(3, 20)
        for row in groups:
            assert np.unique(row).size == 1
        assert np.unique(groups[:, 0]).size == 3

    def test_centroids_are_member_means(self, rng):
        """Each centroid is the mean of its members."""
        X = rng.random((4, 60))
        result = kmeans(X, 5, seed=0)
        for j in range(5):
            members = X[:, result.assignments == j]
            if members.shape[1]:
                np.testing.assert_allclose(result.centroids[:, j], members.mean(axis=1), atol=1e-12)

    def test_inertia_is_sum_of_squared_distances(self, rng):
        """Inertia equals the squared distance of each point to its centroid."""
        X = rng.random((3, 50))
        result = kmeans(X, 4, seed=2)
        expected = np.sum((X - result.centroids[:, result.assignments]) ** 2)
        assert result.inertia == pytest.approx(expected, rel=1e-10)

    def test_single_cluster(self, rng):
        """k = 1 puts everything together at the mean."""
        X = rng.random((3, 25))
        result = kmeans(X, 1)
        assert np.all(result.assignments == 0)
        np.testing.assert_allclose(result.centroids[:, 0], X.mean(axis=1), atol=1e-12)

    def test_deterministic(self, rng):
        """Same seed, same output."""
        X = rng.random((5, 80))
        first, second = kmeans(X, 6, seed=11), kmeans(X, 6, seed=11)
        np.testing.assert_array_equal(first.assignments, second.assignments)
        np.testing.assert_array_equal(first.centroids, second.centroids)

    @pytest.mark.parametrize("k", [0, 11])
    def test_rejects_bad_k(self, rng, k):
        """k must lie between 1 and the number of columns."""
        with pytest.raises(DataError):
            kmeans(rng.random((2, 10)), k)

    def test_indicator_matrix(self):
        """One 1 per column at the label row."""
        Z = indicator_matrix(np.array([2, 0, 1, 2]), 3)
        np.testing.assert_array_equal(Z, [[0, 1, 0, 0], [0, 0, 1, 0], [1, 0, 0, 1]])


class TestVcaExtract:
    """Tests for vca_extract."""

    def test_finds_pure_pixels(self, rng):
        """Pure pixels among mixtures are selected as endmembers."""
        M = rng.random((10, 3))
        A = np.hstack([np.eye(3), rng.dirichlet(np.ones(3), size=50).T])
        order = rng.permutation(A.shape[1])
        Y = M @ A[:, order]
        E = vca_extract(Y, 3, seed=0)
        dist = np.linalg.norm(E[:, :, np.newaxis] - M[:, np.newaxis, :], axis=0)
        matched = np.argmin(dist, axis=1)
        assert sorted(matched.tolist()) == [0, 1, 2]
        np.testing.assert_allclose(dist.min(axis=1), 0.0, atol=1e-12)

    def test_columns_come_from_data(self, rng):
        """Every returned column is a column of Y."""
        Y = rng.random((8, 30))
        E = vca_extract(Y, 4, seed=1)
        for j in range(4):
            assert np.any(np.all(Y == E[:, [j]], axis=0))

    def test_rank_deficient_data(self, rng):
        """Rank-one data cannot yield two endmembers."""
        Y = np.outer(rng.random(6), rng.random(20))
        with pytest.raises(RankDeficientError):
            vca_extract(Y, 2)

    def test_too_many_endmembers(self, rng):
        """R1 above min(d1, P) is rejected."""
        with pytest.raises(DataError):
            vca_extract(rng.random((4, 3)), 4)

    def test_tie_break_is_seeded(self):
        """Equal-norm candidates are picked reproducibly for a seed."""
        Y = np.eye(5)
        first = vca_extract(Y, 3, seed=9)
        np.testing.assert_array_equal(first, vca_extract(Y, 3, seed=9))


class TestInitialize:
    """Tests for initialize."""

    @pytest.mark.parametrize("variant", [Variant.SP2U, Variant.NMF, Variant.NSP2U, Variant.CSPU])
    def test_feasible_with_expected_shapes(self, make_problem, variant):
        """The starting state fits the data and satisfies every constraint."""
        spec, _ = make_problem(variant=variant)
        st0 = initialize(spec, seed=3)
        for block, shape in expected_shapes(spec).items():
            assert st0.get(block).shape == shape
        assert is_feasible(spec, st0)

    def test_hard_codes_for_sp2u(self, make_problem):
        """U0 and Z0 are one-hot assignments."""
        spec, _ = make_problem()
        st0 = initialize(spec, seed=0)
        for block in (Block.U, Block.Z):
            X = st0.get(block)
            assert set(np.unique(X)) <= {0.0, 1.0}
            np.testing.assert_array_equal(X.sum(axis=0), 1.0)

    def test_nmf_has_no_spatial_blocks(self, make_problem):
        """NMF starts from M and A only."""
        spec, _ = make_problem(variant=Variant.NMF)
        st0 = initialize(spec)
        assert st0.D is None and st0.U is None and st0.B is None and st0.Z is None

    def test_relaxed_model_normalizes_endmembers(self, make_problem):
        """Without sum-to-one on A the endmember columns sum to one."""
        spec, _ = make_problem(sum_to_one_on_A=False)
        st0 = initialize(spec)
        np.testing.assert_allclose(st0.M.sum(axis=0), 1.0, atol=1e-12)
        assert st0.A.min() >= 0.0

    def test_deterministic(self, make_problem):
        """Same seed, same starting state."""
        spec, _ = make_problem()
        first, second = initialize(spec, seed=5), initialize(spec, seed=5)
        for block in spec.active_blocks:
            np.testing.assert_array_equal(first.get(block), second.get(block))

    def test_exact_data_gives_exact_abundances(self, rng):
        """With pure pixels present the initial A reconstructs Y."""
        M = rng.random((12, 3)) + 2.0 * np.eye(12, 3)
        A = np.hstack([np.eye(3), rng.dirichlet(np.ones(3), size=30).T])
        spec = ProblemSpec(Y=M @ A, R1=3, variant=Variant.NMF)
        st0 = initialize(spec)
        np.testing.assert_allclose(st0.M @ st0.A, spec.Y, atol=1e-5)
