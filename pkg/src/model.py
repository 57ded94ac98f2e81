"""Cofactorization model: problem data, factor state, objective, gradients and Lipschitz moduli.

The smooth part of the joint objective is

    g = l0/2 ||Y - MA||^2 + l1/2 ||S - DU||^2 + l2/2 ||[A; U] - BZ||^2 + lz/2 Tr(Z^T V Z)

with ``V = 1 1^T - I``. Each model variant keeps a subset of these terms and of
the six factor blocks; see ``ACTIVE_BLOCKS``.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import DataError, DimensionMismatchError, InactiveBlockError
from .tensor_core import (
    apply_coupling,
    as_matrix,
    frobenius_sq,
    nonneg_violation,
    project_nonneg,
    project_simplex_columns,
    simplex_violation,
    spectral_norm,
)

# Floor applied to Lipschitz moduli so that the step 1/(alpha L) stays finite.
LIPSCHITZ_FLOOR = 1e-12


class Variant(Enum):
    """Model variants sharing the same solver."""
    SP2U = "sp2u"
    NMF = "nmf"
    NSP2U = "nsp2u"
    CSPU = "cspu"
    FCLS = "vca-fcls"

    @classmethod
    def from_name(cls, name: str) -> "Variant":
        """Look up a variant by its command-line name (case-insensitive)."""
        key = name.strip().lower()
        for variant in cls:
            if variant.value == key or variant.name.lower() == key:
                return variant
        choices = ", ".join(v.value for v in cls)
        raise ValueError(f"unknown method {name!r} (choose from {choices})")


class Block(Enum):
    """The six factor blocks, in update order."""
    M = "M"
    A = "A"
    D = "D"
    U = "U"
    B = "B"
    Z = "Z"


class Constraint(Enum):
    """Constraint sets used by the blocks."""
    NONNEG = "nonneg"
    SIMPLEX = "simplex"


BLOCK_ORDER: Tuple[Block, ...] = (Block.M, Block.A, Block.D, Block.U, Block.B, Block.Z)

ACTIVE_BLOCKS: Dict[Variant, Tuple[Block, ...]] = {
    Variant.SP2U: BLOCK_ORDER,
    Variant.NMF: (Block.M, Block.A),
    Variant.NSP2U: (Block.M, Block.A, Block.D),
    Variant.CSPU: (Block.M, Block.A, Block.B, Block.Z),
    Variant.FCLS: (Block.A,),
}


@dataclass(frozen=True)
class Weights:
    """Weights of the four smooth terms."""
    lambda0: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda_z: float = 0.1

    def __post_init__(self):
        for name in ("lambda0", "lambda1", "lambda2", "lambda_z"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be a finite non-negative number, got {value!r}")


@dataclass(frozen=True)
class Dimensions:
    """Problem sizes."""
    d1: int
    d2: int
    P: int
    R1: int
    R2: int
    K: int


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Observed data, sizes, weights and variant flags of one unmixing problem.

    ``S`` may be omitted for variants without a spatial term (NMF, c-SPU, VCA+FCLS).
    ``sum_to_one_on_A=False`` selects the relaxed model where the simplex
    constraint sits on the columns of ``M`` and ``A`` is only non-negative.
    """
    Y: np.ndarray
    R1: int
    S: Optional[np.ndarray] = None
    R2: int = 0
    K: int = 0
    weights: Weights = field(default_factory=Weights)
    variant: Variant = Variant.SP2U
    sum_to_one_on_A: bool = True

    def __post_init__(self):
        object.__setattr__(self, "Y", as_matrix(self.Y))
        if self.S is not None:
            object.__setattr__(self, "S", as_matrix(self.S))
        self.validate()

    @property
    def uses_spatial(self) -> bool:
        return self.variant in (Variant.SP2U, Variant.NSP2U)

    @property
    def uses_clustering(self) -> bool:
        return self.variant in (Variant.SP2U, Variant.CSPU)

    @property
    def dims(self) -> Dimensions:
        d2 = self.S.shape[0] if self.S is not None else 0
        return Dimensions(self.Y.shape[0], d2, self.Y.shape[1], self.R1, self.R2, self.K)

    @property
    def n_atoms(self) -> int:
        """Columns of ``D``: ``R2``, or ``R1`` for n-SP2U where ``U`` is ``A``."""
        return self.R1 if self.variant is Variant.NSP2U else self.R2

    @property
    def coding_rows(self) -> int:
        """Rows of ``B``: the height of the stacked coding matrix being clustered."""
        return self.R1 + self.R2 if self.variant is Variant.SP2U else self.R1

    @property
    def active_blocks(self) -> Tuple[Block, ...]:
        return ACTIVE_BLOCKS[self.variant]

    def validate(self) -> None:
        """Check sizes and data.

        Raises:
            DataError: On inconsistent sizes or non-finite data.
        """
        d1, P = self.Y.shape
        if not np.all(np.isfinite(self.Y)):
            raise DataError("Y contains non-finite values")
        if self.R1 < 1 or self.R1 >= d1:
            raise DataError(f"R1 must satisfy 1 <= R1 < d1 (R1={self.R1}, d1={d1})")
        if self.R1 > P:
            raise DataError(f"R1={self.R1} exceeds the number of pixels P={P}")
        if self.uses_spatial:
            if self.S is None:
                raise DataError(f"variant {self.variant.value} needs spatial features S")
            if self.S.shape[1] != P:
                raise DimensionMismatchError("Y", self.Y.shape, "S", self.S.shape,
                                             "column counts differ")
            if not np.all(np.isfinite(self.S)):
                raise DataError("S contains non-finite values")
        if self.variant is Variant.SP2U and not 1 <= self.R2 <= P:
            raise DataError(f"R2 must satisfy 1 <= R2 <= P (R2={self.R2}, P={P})")
        if self.uses_clustering and not 1 <= self.K <= P:
            raise DataError(f"K must satisfy 1 <= K <= P (K={self.K}, P={P})")


@dataclass(frozen=True, eq=False)
class FactorState:
    """The six estimated factors. Blocks a variant does not use are ``None``."""
    M: np.ndarray
    A: np.ndarray
    D: Optional[np.ndarray] = None
    U: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None
    Z: Optional[np.ndarray] = None

    def get(self, block: Block) -> Optional[np.ndarray]:
        return getattr(self, block.value)

    def with_block(self, block: Block, value: np.ndarray) -> "FactorState":
        """Return a copy with one block replaced."""
        return replace(self, **{block.value: value})


def expected_shapes(spec: ProblemSpec) -> Dict[Block, Tuple[int, int]]:
    """Shape of every active block for ``spec``."""
    d = spec.dims
    shapes = {Block.M: (d.d1, d.R1), Block.A: (d.R1, d.P)}
    if spec.uses_spatial:
        shapes[Block.D] = (d.d2, spec.n_atoms)
    if spec.variant is Variant.SP2U:
        shapes[Block.U] = (d.R2, d.P)
    if spec.uses_clustering:
        shapes[Block.B] = (spec.coding_rows, d.K)
        shapes[Block.Z] = (d.K, d.P)
    return shapes


def check_dimensions(spec: ProblemSpec, st: FactorState) -> None:
    """Verify that every block the variant uses is present with the right shape.

    Raises:
        DimensionMismatchError: Naming the data matrix and block that disagree.
    """
    partner = {Block.M: "Y", Block.A: "Y", Block.D: "S", Block.U: "S", Block.B: "[A; U]",
               Block.Z: "[A; U]"}
    for block, shape in expected_shapes(spec).items():
        value = st.get(block)
        actual = None if value is None else value.shape
        if actual != shape:
            ref_shape = spec.S.shape if partner[block] == "S" else spec.Y.shape
            raise DimensionMismatchError(
                partner[block], ref_shape, block.value, actual,
                f"expected {block.value} to be {shape[0]}x{shape[1]}"
            )


def constraint_for(spec: ProblemSpec, block: Block) -> Constraint:
    """Constraint set of ``block`` under the variant flags."""
    if block is Block.M:
        return Constraint.NONNEG if spec.sum_to_one_on_A else Constraint.SIMPLEX
    if block is Block.A:
        return Constraint.SIMPLEX if spec.sum_to_one_on_A else Constraint.NONNEG
    if block in (Block.U, Block.Z):
        return Constraint.SIMPLEX
    return Constraint.NONNEG


def project_block(spec: ProblemSpec, block: Block, x: np.ndarray) -> np.ndarray:
    """Proximal operator of the block's indicator function."""
    if constraint_for(spec, block) is Constraint.SIMPLEX:
        return project_simplex_columns(x)
    return project_nonneg(x)


def block_violation(spec: ProblemSpec, block: Block, x: np.ndarray) -> float:
    """Distance-like measure of how far ``x`` is from the block's constraint set."""
    if constraint_for(spec, block) is Constraint.SIMPLEX:
        return simplex_violation(x)
    return nonneg_violation(x)


def constraint_violations(spec: ProblemSpec, st: FactorState) -> Dict[Block, float]:
    """Violation of every active block."""
    return {b: block_violation(spec, b, st.get(b)) for b in spec.active_blocks}


def is_feasible(spec: ProblemSpec, st: FactorState, tol: float = 1e-12) -> bool:
    """True when every active block satisfies its constraint set within ``tol``."""
    return all(v <= tol for v in constraint_violations(spec, st).values())


def coding_stack(spec: ProblemSpec, st: FactorState) -> np.ndarray:
    """The coding matrix being clustered: ``[A; U]`` for SP2U, ``A`` for c-SPU."""
    if spec.variant is Variant.SP2U:
        return np.vstack([st.A, st.U])
    return st.A


def spatial_codes(spec: ProblemSpec, st: FactorState) -> np.ndarray:
    """Coding matrix of the spatial term (``A`` itself for n-SP2U)."""
    return st.A if spec.variant is Variant.NSP2U else st.U


def coupling_penalty(Z: np.ndarray) -> float:
    """Orthogonality penalty ``Tr(Z^T V Z)``: the sum of inner products of distinct rows."""
    Z = as_matrix(Z)
    return float(np.sum(Z * apply_coupling(Z)))


def objective_terms(spec: ProblemSpec, st: FactorState) -> Dict[str, float]:
    """Value of each weighted smooth term; inactive or zero-weight terms are 0."""
    w = spec.weights
    terms = {"spectral": 0.0, "spatial": 0.0, "clustering": 0.0, "orthogonality": 0.0}
    if w.lambda0 > 0:
        terms["spectral"] = 0.5 * w.lambda0 * frobenius_sq(spec.Y - st.M @ st.A)
    if spec.uses_spatial and w.lambda1 > 0:
        terms["spatial"] = 0.5 * w.lambda1 * frobenius_sq(
            spec.S - st.D @ spatial_codes(spec, st))
    if spec.uses_clustering:
        if w.lambda2 > 0:
            terms["clustering"] = 0.5 * w.lambda2 * frobenius_sq(
                coding_stack(spec, st) - st.B @ st.Z)
        if w.lambda_z > 0:
            terms["orthogonality"] = 0.5 * w.lambda_z * coupling_penalty(st.Z)
    return terms


def eval_smooth(spec: ProblemSpec, st: FactorState) -> float:
    """Smooth objective ``g`` of the variant at ``st``.

    Raises:
        DimensionMismatchError: If a block does not fit the data.
    """
    check_dimensions(spec, st)
    return float(sum(objective_terms(spec, st).values()))


def _require_active(spec: ProblemSpec, block: Block) -> None:
    if block not in spec.active_blocks:
        raise InactiveBlockError(
            f"block {block.value} is not estimated by variant {spec.variant.value}"
        )


def grad_block(spec: ProblemSpec, st: FactorState, block: Block) -> np.ndarray:
    """Partial gradient of ``g`` with respect to one block.

    Raises:
        InactiveBlockError: If the variant does not estimate ``block``.
    """
    _require_active(spec, block)
    w = spec.weights
    X = st.get(block)
    grad = np.zeros_like(X)

    if block is Block.M:
        if w.lambda0 > 0:
            grad = w.lambda0 * (st.M @ (st.A @ st.A.T) - spec.Y @ st.A.T)

    elif block is Block.A:
        if w.lambda0 > 0:
            grad = grad + w.lambda0 * ((st.M.T @ st.M) @ st.A - st.M.T @ spec.Y)
        if spec.variant is Variant.NSP2U and w.lambda1 > 0:
            grad = grad + w.lambda1 * ((st.D.T @ st.D) @ st.A - st.D.T @ spec.S)
        if spec.uses_clustering and w.lambda2 > 0:
            B1 = st.B[:spec.R1, :]
            grad = grad + w.lambda2 * (st.A - B1 @ st.Z)

    elif block is Block.D:
        if w.lambda1 > 0:
            codes = spatial_codes(spec, st)
            grad = w.lambda1 * (st.D @ (codes @ codes.T) - spec.S @ codes.T)

    elif block is Block.U:
        if w.lambda1 > 0:
            grad = grad + w.lambda1 * ((st.D.T @ st.D) @ st.U - st.D.T @ spec.S)
        if w.lambda2 > 0:
            B2 = st.B[spec.R1:, :]
            grad = grad + w.lambda2 * (st.U - B2 @ st.Z)

    elif block is Block.B:
        if w.lambda2 > 0:
            grad = w.lambda2 * (st.B @ (st.Z @ st.Z.T) - coding_stack(spec, st) @ st.Z.T)

    elif block is Block.Z:
        if w.lambda2 > 0:
            grad = grad + w.lambda2 * ((st.B.T @ st.B) @ st.Z - st.B.T @ coding_stack(spec, st))
        if w.lambda_z > 0:
            grad = grad + w.lambda_z * apply_coupling(st.Z)

    return grad


def lipschitz_block(spec: ProblemSpec, st: FactorState, block: Block) -> float:
    """Lipschitz modulus of ``grad_block`` in ``block``, floored at ``LIPSCHITZ_FLOOR``.

    Evaluated at the current companion blocks, so it must be recomputed after
    each update of those blocks.

    Raises:
        InactiveBlockError: If the variant does not estimate ``block``.
    """
    _require_active(spec, block)
    w = spec.weights

    if block is Block.M:
        hessian = w.lambda0 * (st.A @ st.A.T)
    elif block is Block.A:
        hessian = w.lambda0 * (st.M.T @ st.M)
        if spec.variant is Variant.NSP2U and w.lambda1 > 0:
            hessian = hessian + w.lambda1 * (st.D.T @ st.D)
        if spec.uses_clustering and w.lambda2 > 0:
            hessian = hessian + w.lambda2 * np.eye(spec.R1)
    elif block is Block.D:
        codes = spatial_codes(spec, st)
        hessian = w.lambda1 * (codes @ codes.T)
    elif block is Block.U:
        hessian = w.lambda1 * (st.D.T @ st.D)
        if w.lambda2 > 0:
            hessian = hessian + w.lambda2 * np.eye(spec.R2)
    elif block is Block.B:
        hessian = w.lambda2 * (st.Z @ st.Z.T)
    else:
        hessian = w.lambda2 * (st.B.T @ st.B)
        if w.lambda_z > 0:
            K = st.Z.shape[0]
            hessian = hessian + w.lambda_z * (np.ones((K, K)) - np.eye(K))

    return max(spectral_norm(hessian), LIPSCHITZ_FLOOR)


def cluster_signatures(st: FactorState) -> np.ndarray:
    """Spatial-spectral signature of each cluster: ``blockdiag(M, D) @ B``.

    Column ``k`` stacks the mean spectral signature over the mean spatial
    signature. Without a spatial dictionary only ``M @ B`` is returned.
    """
    if st.B is None:
        raise DataError("cluster signatures need the centroid matrix B")
    R1 = st.M.shape[1]
    spectral = st.M @ st.B[:R1, :]
    if st.D is None or st.B.shape[0] == R1:
        return spectral
    return np.vstack([spectral, st.D @ st.B[R1:, :]])


def normalize_abundances(A: np.ndarray) -> np.ndarray:
    """Rescale abundance columns to sum to one (relaxed model post-processing).

    All-zero columns are left at zero.
    """
    A = as_matrix(A)
    sums = A.sum(axis=0, keepdims=True)
    safe = np.where(sums > 0, sums, 1.0)
    return A / safe
