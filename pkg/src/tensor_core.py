"""Dense matrix primitives: constraint-set projections and norms.

All matrices are 2-D float64 numpy arrays. Functions never modify their inputs.
"""

import numpy as np

from .errors import ConvergenceError

# Columns already this close to the simplex are returned untouched, which makes
# the projection exactly idempotent.
SIMPLEX_TOL = 1e-12


def as_matrix(x) -> np.ndarray:
    """Return ``x`` as a 2-D float64 array (vectors become single columns)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, np.newaxis]
    if arr.ndim != 2:
        raise ValueError(f"expected a matrix, got an array with {arr.ndim} dimensions")
    return arr


def project_nonneg(x: np.ndarray) -> np.ndarray:
    """Project onto the non-negative orthant (clamp negative entries to zero)."""
    return np.maximum(as_matrix(x), 0.0)


def project_simplex_columns(x: np.ndarray) -> np.ndarray:
    """Euclidean projection of every column onto the probability simplex.

    Sort-then-threshold: for each column the entries are sorted in decreasing
    order, the largest support size ``rho`` with ``u_rho > (sum_{i<=rho} u_i - 1) / rho``
    is found, and ``theta = (sum_{i<=rho} u_i - 1) / rho`` is subtracted before clamping.

    Args:
        x: Matrix with at least one row.

    Returns:
        Matrix of the same shape whose columns are non-negative and sum to one.
    """
    x = as_matrix(x)
    n_rows, n_cols = x.shape
    if n_rows < 1:
        raise ValueError("simplex projection needs at least one row")
    if n_cols == 0:
        return x.copy()

    u = -np.sort(-x, axis=0)
    cssv = np.cumsum(u, axis=0) - 1.0
    ind = np.arange(1, n_rows + 1, dtype=np.float64)[:, np.newaxis]
    active = u - cssv / ind > 0
    # last row index where the condition holds (row 0 always holds)
    rho = n_rows - 1 - np.argmax(active[::-1, :], axis=0)
    theta = cssv[rho, np.arange(n_cols)] / (rho + 1.0)
    projected = np.maximum(x - theta[np.newaxis, :], 0.0)

    on_simplex = (x.min(axis=0) >= 0.0) & (np.abs(x.sum(axis=0) - 1.0) <= SIMPLEX_TOL)
    projected[:, on_simplex] = x[:, on_simplex]
    return projected


def frobenius_sq(x: np.ndarray) -> float:
    """Sum of squared entries."""
    x = np.asarray(x, dtype=np.float64)
    return float(np.vdot(x, x))


def spectral_norm(x: np.ndarray) -> float:
    """Largest singular value, from the top eigenvalue of the smaller Gram matrix.

    ``x.T @ x`` and ``x @ x.T`` share the same non-zero spectrum; the smaller
    one is handed to the symmetric eigenvalue solver. Exact to rounding,
    including when the top singular values are clustered.

    Args:
        x: Non-empty matrix.

    Returns:
        The operator 2-norm of ``x``.

    Raises:
        ValueError: If ``x`` is empty.
        ConvergenceError: If the eigenvalue solver does not converge.
    """
    x = as_matrix(x)
    if x.size == 0:
        raise ValueError("spectral norm of an empty matrix")

    gram = x.T @ x if x.shape[0] >= x.shape[1] else x @ x.T
    if not np.any(gram):
        return 0.0
    try:
        top = np.linalg.eigvalsh(gram)[-1]
    except np.linalg.LinAlgError as e:
        raise ConvergenceError(
            f"eigenvalue solver failed on a {x.shape[0]}x{x.shape[1]} input: {e}"
        )
    return float(np.sqrt(max(top, 0.0)))


def apply_coupling(z: np.ndarray) -> np.ndarray:
    """Apply ``V = 1 1^T - I`` to ``z`` without forming ``V``: column sums minus ``z``."""
    z = as_matrix(z)
    return z.sum(axis=0, keepdims=True) - z


def nonneg_violation(x: np.ndarray) -> float:
    """Largest amount by which an entry falls below zero."""
    x = as_matrix(x)
    if x.size == 0:
        return 0.0
    return float(max(-x.min(), 0.0))


def simplex_violation(x: np.ndarray) -> float:
    """Largest deviation of any column from the probability simplex."""
    x = as_matrix(x)
    if x.size == 0:
        return 0.0
    return max(nonneg_violation(x), float(np.max(np.abs(x.sum(axis=0) - 1.0))))
