"""Unmixing quality metrics, endmember relabeling and cluster reports."""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DataError, DimensionMismatchError, ZeroColumnError
from .features import patch_thumbnail
from .model import FactorState, cluster_signatures
from .tensor_core import as_matrix, frobenius_sq


def _require_same_shape(first: str, a: np.ndarray, second: str, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(first, a.shape, second, b.shape, "shapes must match")


def _unit_columns(M: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(M, axis=0)
    if np.any(norms == 0):
        raise ZeroColumnError(f"column {int(np.flatnonzero(norms == 0)[0])} has zero norm")
    return M / norms


def _column_angles(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    # 2 atan2(|u - v|, |u + v|) stays accurate for nearly parallel unit vectors
    return 2.0 * np.arctan2(np.linalg.norm(U - V, axis=0), np.linalg.norm(U + V, axis=0))


def spectral_angles(M_ref: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Angle in radians between each reference column and the matching estimate column."""
    M_ref, M = as_matrix(M_ref), as_matrix(M)
    _require_same_shape("M_ref", M_ref, "M", M)
    return _column_angles(_unit_columns(M_ref), _unit_columns(M))


def asam(M_ref: np.ndarray, M: np.ndarray) -> float:
    """Average spectral angle mapper between corresponding columns.

    Raises:
        DimensionMismatchError: If the shapes differ.
        ZeroColumnError: If a column has zero norm.
    """
    return float(np.mean(spectral_angles(M_ref, M)))


def rmse(A_ref: np.ndarray, A: np.ndarray) -> float:
    """Root mean square error between two abundance matrices."""
    A_ref, A = as_matrix(A_ref), as_matrix(A)
    _require_same_shape("A_ref", A_ref, "A", A)
    return float(np.sqrt(frobenius_sq(A_ref - A) / A.size))


def reconstruction_error(Y: np.ndarray, M: np.ndarray, A: np.ndarray) -> float:
    """Root mean square residual of ``Y - M A``."""
    Y, M, A = as_matrix(Y), as_matrix(M), as_matrix(A)
    if M.shape[0] != Y.shape[0] or A.shape[1] != Y.shape[1] or M.shape[1] != A.shape[0]:
        raise DimensionMismatchError("Y", Y.shape, "M A", (M.shape[0], A.shape[1]),
                                     f"M is {M.shape[0]}x{M.shape[1]}, A is {A.shape[0]}x{A.shape[1]}")
    return float(np.sqrt(frobenius_sq(Y - M @ A) / Y.size))


def angle_cost_matrix(M_ref: np.ndarray, M: np.ndarray) -> np.ndarray:
    """``cost[i, j]`` is the angle between reference column ``i`` and estimate column ``j``.

    Pairs involving a zero column cost ``pi / 2``.
    """
    M_ref, M = as_matrix(M_ref), as_matrix(M)
    if M_ref.shape != M.shape:
        raise DimensionMismatchError("M_ref", M_ref.shape, "M", M.shape, "shapes must match")
    ref_norms = np.linalg.norm(M_ref, axis=0)
    est_norms = np.linalg.norm(M, axis=0)
    U = M_ref / np.where(ref_norms > 0, ref_norms, 1.0)
    V = M / np.where(est_norms > 0, est_norms, 1.0)
    cost = _column_angles(U[:, :, np.newaxis], V[:, np.newaxis, :])
    zero = (ref_norms[:, np.newaxis] == 0) | (est_norms[np.newaxis, :] == 0)
    cost[zero] = np.pi / 2
    return cost


def match_endmembers(M_ref: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Permutation ``perm`` minimizing ``asam(M_ref, M[:, perm])``.

    Solved exactly as an assignment problem over the angle cost matrix.
    """
    cost = angle_cost_matrix(M_ref, M)
    _, cols = linear_sum_assignment(cost)
    return cols.astype(np.int64)


def apply_permutation(M: np.ndarray, A: np.ndarray, perm: np.ndarray):
    """Reorder endmember columns of ``M`` and the matching rows of ``A``."""
    perm = np.asarray(perm, dtype=np.int64)
    return as_matrix(M)[:, perm], as_matrix(A)[perm, :]


@dataclass
class EvalReport:
    """Metrics of one estimate against ground truth."""
    asam: float
    rmse: float
    re: float
    permutation: np.ndarray
    wall_time: float = 0.0

    def as_row(self) -> dict:
        return {
            "asam": self.asam,
            "re": self.re,
            "rmse": self.rmse,
            "time_s": self.wall_time,
            "permutation": " ".join(str(int(i)) for i in self.permutation),
        }


def evaluate(Y: np.ndarray, M_ref: np.ndarray, A_ref: np.ndarray, M: np.ndarray, A: np.ndarray,
             wall_time: float = 0.0, A_model: Optional[np.ndarray] = None) -> EvalReport:
    """Relabel the estimate against the reference and compute aSAM, RMSE and RE.

    Args:
        Y: Observed data.
        M_ref: Ground-truth endmembers.
        A_ref: Ground-truth abundances.
        M: Estimated endmembers.
        A: Estimated abundances, compared with ``A_ref``.
        wall_time: Processing time to report.
        A_model: Abundances paired with ``M`` in the fitted model, used for RE.
            Differs from ``A`` for the relaxed model, whose reported abundances
            are normalized after the fit. Defaults to ``A``.

    Returns:
        EvalReport with the permutation applied to the estimate.
    """
    perm = match_endmembers(M_ref, M)
    M_perm, A_perm = apply_permutation(M, A, perm)
    return EvalReport(
        asam=asam(M_ref, M_perm),
        rmse=rmse(A_ref, A_perm),
        re=reconstruction_error(Y, M, A if A_model is None else A_model),
        permutation=perm,
        wall_time=wall_time,
    )


@dataclass
class ClusterSummary:
    """Description of one cluster of the coupling term."""
    index: int
    population: int
    mask: np.ndarray
    spectral_signature: np.ndarray
    spatial_signature: Optional[np.ndarray] = None
    thumbnail: Optional[np.ndarray] = None


def cluster_labels(Z: np.ndarray) -> np.ndarray:
    """Cluster of every pixel: argmax over each column of Z, lowest index on ties."""
    return np.argmax(as_matrix(Z), axis=0)


def summarize_clusters(st: FactorState, patch_size: Optional[int] = None) -> List[ClusterSummary]:
    """Per-cluster pixel mask and mean spectral and spatial signatures, largest cluster first.

    Args:
        st: State holding at least M, B and Z (and D for the spatial signature).
        patch_size: Patch width, used to render spatial signatures as thumbnails.

    Returns:
        One ClusterSummary per row of Z, sorted by decreasing population.
    """
    if st.B is None or st.Z is None:
        raise DataError("cluster summaries need B and Z")
    labels = cluster_labels(st.Z)
    K = st.Z.shape[0]
    signatures = cluster_signatures(st)
    d1 = st.M.shape[0]
    populations = np.bincount(labels, minlength=K)

    summaries = []
    for k in np.argsort(-populations, kind="stable"):
        spatial = signatures[d1:, k] if signatures.shape[0] > d1 else None
        thumb = None
        if spatial is not None and patch_size is not None:
            thumb = patch_thumbnail(spatial, patch_size)
        summaries.append(ClusterSummary(
            index=int(k),
            population=int(populations[k]),
            mask=labels == k,
            spectral_signature=signatures[:d1, k].copy(),
            spatial_signature=None if spatial is None else spatial.copy(),
            thumbnail=thumb,
        ))
    return summaries
