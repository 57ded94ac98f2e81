"""Feasible starting point: pure-pixel endmembers, FCLS abundances and k-means codes."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls
from scipy.spatial.distance import cdist
from sklearn.cluster import kmeans_plusplus

from .errors import ConvergenceError, DataError, RankDeficientError
from .model import FactorState, ProblemSpec, Variant
from .solver import solve_fcls
from .tensor_core import as_matrix, project_nonneg

logger = logging.getLogger("spsu.init")

KMEANS_MAX_ITER = 300
# Residual norm, relative to the largest column norm, below which the data is rank deficient
RANK_TOL = 1e-10
TIE_TOL = 1e-12


@dataclass
class KMeansResult:
    """Output of Lloyd's algorithm on the columns of a matrix."""
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    n_iter: int


def kmeans(X: np.ndarray, k: int, seed: int = 0, max_iter: int = KMEANS_MAX_ITER) -> KMeansResult:
    """Cluster the columns of ``X`` into ``k`` groups.

    Centroids are seeded by k-means++ and refined by Lloyd iterations until the
    assignments stop changing. A cluster that loses all its members is moved to
    the point farthest from its current centroid.

    Args:
        X: Data matrix (dim x n), one point per column.
        k: Number of clusters, ``1 <= k <= n``.
        seed: Seed of the k-means++ draw.
        max_iter: Lloyd iteration cap.

    Returns:
        KMeansResult with ``dim x k`` centroids and one assignment per column.

    Raises:
        DataError: If ``k`` is out of range.
        ConvergenceError: If the inertia goes up between two iterations.
    """
    X = as_matrix(X)
    n = X.shape[1]
    if not 1 <= k <= n:
        raise DataError(f"k-means needs 1 <= k <= {n} columns, got k={k}")

    points = np.ascontiguousarray(X.T)
    centers, _ = kmeans_plusplus(points, k, random_state=seed)
    centers = np.array(centers, dtype=np.float64)
    rows = np.arange(n)

    labels = None
    prev_inertia = np.inf
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        dist = cdist(points, centers, "sqeuclidean")
        new_labels = np.argmin(dist, axis=1)
        point_dist = dist[rows, new_labels]
        inertia = float(point_dist.sum())
        if inertia > prev_inertia * (1.0 + 1e-9) + 1e-12:
            raise ConvergenceError(
                f"k-means inertia increased at iteration {n_iter}: {prev_inertia!r} -> {inertia!r}"
            )
        prev_inertia = inertia
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels

        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = points[members].mean(axis=0)
            else:
                far = int(np.argmax(point_dist))
                centers[j] = points[far]
                point_dist[far] = 0.0
                logger.debug(f"k-means cluster {j} emptied at iteration {n_iter}; re-seeded at point {far}")
    else:
        dist = cdist(points, centers, "sqeuclidean")
        labels = np.argmin(dist, axis=1)
        inertia = float(dist[rows, labels].sum())

    return KMeansResult(
        centroids=np.ascontiguousarray(centers.T),
        assignments=labels.astype(np.int64),
        inertia=inertia,
        n_iter=n_iter,
    )


def indicator_matrix(labels: np.ndarray, k: int) -> np.ndarray:
    """One-hot ``k x n`` matrix with a single 1 per column at ``labels[p]``."""
    labels = np.asarray(labels, dtype=np.int64)
    Z = np.zeros((k, labels.size))
    Z[labels, np.arange(labels.size)] = 1.0
    return Z


def vca_extract(Y: np.ndarray, R1: int, seed: int = 0) -> np.ndarray:
    """Pick ``R1`` pixels of ``Y`` as endmember estimates by orthogonal projection pursuit.

    At each step the column with the largest residual norm is selected and its
    direction is projected out of all residuals. Exact ties are broken by a
    seeded draw.

    Args:
        Y: Data matrix (d1 x P).
        R1: Number of endmembers.
        seed: Seed for tie-breaking.

    Returns:
        Non-negative ``d1 x R1`` matrix whose columns are columns of ``Y``.

    Raises:
        DataError: If ``R1`` exceeds ``min(d1, P)``.
        RankDeficientError: If fewer than ``R1`` independent directions exist.
    """
    Y = as_matrix(Y)
    d1, P = Y.shape
    if not 1 <= R1 <= min(d1, P):
        raise DataError(f"cannot extract R1={R1} endmembers from a {d1}x{P} matrix")

    rng = np.random.default_rng(seed)
    residual = Y.copy()
    norms = np.einsum("ij,ij->j", residual, residual)
    initial = float(np.sqrt(norms.max()))
    selected = []

    for r in range(R1):
        norms = np.einsum("ij,ij->j", residual, residual)
        best = float(norms.max())
        if np.sqrt(best) <= RANK_TOL * initial:
            raise RankDeficientError(
                f"data spans only {r} directions, {R1} endmembers requested"
            )
        candidates = np.flatnonzero(norms >= best * (1.0 - TIE_TOL))
        idx = int(candidates[0]) if candidates.size == 1 else int(rng.choice(candidates))
        q = residual[:, idx] / np.sqrt(norms[idx])
        residual -= np.outer(q, q @ residual)
        selected.append(idx)

    return project_nonneg(Y[:, selected])


def initialize(spec: ProblemSpec, seed: int = 0) -> FactorState:
    """Build a feasible starting state for ``spec``.

    M from ``vca_extract``, A from ``solve_fcls``; for SP2U, (D, U) from k-means
    on the columns of S and (B, Z) from k-means on ``[A; U]``. The c-SPU variant
    clusters A alone; n-SP2U fits D by non-negative least squares on A.

    Args:
        spec: Problem to initialize.
        seed: Seed of every random draw.

    Returns:
        FactorState satisfying every constraint of the variant.
    """
    M0 = vca_extract(spec.Y, spec.R1, seed)
    if not spec.sum_to_one_on_A:
        sums = M0.sum(axis=0, keepdims=True)
        M0 = M0 / np.where(sums > 0, sums, 1.0)
    A0 = solve_fcls(spec.Y, M0, sum_to_one=spec.sum_to_one_on_A)

    variant = spec.variant
    if variant is Variant.SP2U:
        spatial = kmeans(spec.S, spec.R2, seed)
        U0 = indicator_matrix(spatial.assignments, spec.R2)
        coupled = kmeans(np.vstack([A0, U0]), spec.K, seed + 1)
        return FactorState(
            M=M0, A=A0,
            D=project_nonneg(spatial.centroids), U=U0,
            B=project_nonneg(coupled.centroids), Z=indicator_matrix(coupled.assignments, spec.K),
        )

    if variant is Variant.CSPU:
        coupled = kmeans(A0, spec.K, seed + 1)
        return FactorState(
            M=M0, A=A0,
            B=project_nonneg(coupled.centroids), Z=indicator_matrix(coupled.assignments, spec.K),
        )

    if variant is Variant.NSP2U:
        design = np.ascontiguousarray(A0.T)
        D0 = np.vstack([nnls(design, row)[0] for row in spec.S])
        return FactorState(M=M0, A=A0, D=D0)

    return FactorState(M=M0, A=A0)
