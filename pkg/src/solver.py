"""Proximal alternating linearized minimization over the factor blocks."""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .errors import (
    ConfigError,
    InfeasibleStateError,
    NonFiniteGradientError,
    ObjectiveIncreaseError,
)
from .model import (
    BLOCK_ORDER,
    Block,
    FactorState,
    ProblemSpec,
    check_dimensions,
    constraint_violations,
    grad_block,
    lipschitz_block,
    objective_terms,
    project_block,
)
from .tensor_core import as_matrix, frobenius_sq, project_nonneg, project_simplex_columns, spectral_norm

logger = logging.getLogger("spsu.solver")

FEASIBILITY_TOL = 1e-12
# Denominator floor of the relative objective gap
GAP_FLOOR = 1e-30
# Terms below this fraction of the objective have their gap measured against that fraction
TERM_GAP_FLOOR = 1e-6
# Relative allowance for rounding in the objective-increase check
INCREASE_ROUNDING = 1e-12


@dataclass
class SolverConfig:
    """Step size, stopping rule and tracing of one solve."""
    alpha: float = 2.0
    rel_tol: float = 1e-4
    max_iters: int = 10_000
    trace_every: int = 0
    increase_slack: float = 1e-9

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """Validate solver settings.

        Raises:
            ConfigError: If a setting is out of range.
        """
        if not self.alpha > 1.0:
            raise ConfigError(f"alpha must be > 1, got {self.alpha}")
        if not self.rel_tol > 0.0:
            raise ConfigError(f"rel_tol must be > 0, got {self.rel_tol}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.trace_every < 0:
            raise ConfigError(f"trace_every must be >= 0, got {self.trace_every}")
        if self.increase_slack < 0:
            raise ConfigError(f"increase_slack must be >= 0, got {self.increase_slack}")


@dataclass
class SolveResult:
    """Final state and trace of a solve."""
    state: FactorState
    objective_trace: List[float]
    iterations: int
    converged: bool
    wall_time: float
    term_trace: List[Dict[str, float]] = field(default_factory=list)

    @property
    def final_objective(self) -> float:
        return self.objective_trace[-1]


def palm_step(spec: ProblemSpec, st: FactorState, block: Block,
              alpha: float = 2.0, iteration: int = 0) -> FactorState:
    """One proximal gradient step on ``block`` with step ``1 / (alpha * L)``.

    Args:
        spec: Problem data and variant.
        st: Current state.
        block: Block to update; must be active for the variant.
        alpha: Step-size safety factor, > 1.
        iteration: Iteration number reported in errors.

    Returns:
        New state with ``block`` replaced; the other blocks are shared with ``st``.

    Raises:
        InactiveBlockError: If ``block`` is not estimated by the variant.
        NonFiniteGradientError: If the gradient contains NaN or Inf.
    """
    grad = grad_block(spec, st, block)
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradientError(block.value, iteration)
    step = 1.0 / (alpha * lipschitz_block(spec, st, block))
    updated = project_block(spec, block, st.get(block) - step * grad)
    return st.with_block(block, updated)


def term_gap(previous: Dict[str, float], current: Dict[str, float]) -> float:
    """Largest relative change of any objective term between two sweeps."""
    total = abs(sum(previous.values()))
    scale = TERM_GAP_FLOOR * max(total, GAP_FLOOR)
    return max(
        abs(current[name] - value) / max(abs(value), scale)
        for name, value in previous.items()
    )


def _check_feasible(spec: ProblemSpec, st: FactorState) -> None:
    for block, violation in constraint_violations(spec, st).items():
        if violation > FEASIBILITY_TOL:
            raise InfeasibleStateError(
                f"starting block {block.value} violates its constraint set by {violation:.3e}"
            )


def solve(spec: ProblemSpec, st0: FactorState, cfg: Optional[SolverConfig] = None,
          on_iteration: Optional[Callable[[int, float], None]] = None) -> SolveResult:
    """Run block-cyclic PALM from ``st0`` until every objective term has settled.

    Blocks are updated in the order M, A, D, U, B, Z, skipping those the
    variant does not estimate. The run stops once ``term_gap`` falls below
    ``rel_tol``: each weighted term must change by less than ``rel_tol`` of its
    own value. With a single term this is the relative objective gap.

    Args:
        spec: Problem data and variant.
        st0: Feasible starting state.
        cfg: Solver settings (defaults if omitted).
        on_iteration: Called with ``(iteration, objective)`` after every sweep.

    Returns:
        SolveResult with the last state and the objective trace (starting value first).

    Raises:
        DimensionMismatchError: If a block does not fit the data.
        InfeasibleStateError: If ``st0`` violates a constraint.
        ObjectiveIncreaseError: If a sweep raises the objective beyond the slack.
    """
    cfg = cfg or SolverConfig()
    check_dimensions(spec, st0)
    _check_feasible(spec, st0)

    blocks = [b for b in BLOCK_ORDER if b in spec.active_blocks]
    start = time.perf_counter()

    st = st0
    terms = objective_terms(spec, st)
    previous = float(sum(terms.values()))
    previous_terms = terms
    objective_trace = [previous]
    term_trace = [terms]
    converged = False
    iteration = 0

    for iteration in range(1, cfg.max_iters + 1):
        for block in blocks:
            st = palm_step(spec, st, block, cfg.alpha, iteration)

        terms = objective_terms(spec, st)
        current = float(sum(terms.values()))
        objective_trace.append(current)
        term_trace.append(terms)

        allowance = cfg.increase_slack + INCREASE_ROUNDING * abs(previous)
        if current > previous + allowance:
            raise ObjectiveIncreaseError(iteration, previous, current)

        if on_iteration is not None:
            on_iteration(iteration, current)
        if cfg.trace_every and iteration % cfg.trace_every == 0:
            logger.info(
                f"ITERATION | {spec.variant.value:8s} | iter {iteration:6d} | f={current:.6e} | "
                + " | ".join(f"{k}={v:.4e}" for k, v in terms.items())
            )

        gap = term_gap(previous_terms, terms)
        previous, previous_terms = current, terms
        if gap < cfg.rel_tol:
            converged = True
            break

    wall_time = time.perf_counter() - start
    if not converged:
        logger.warning(
            f"SOLVED | {spec.variant.value:8s} | stopped at max_iters={cfg.max_iters} "
            f"without reaching rel_tol={cfg.rel_tol:g}"
        )
    return SolveResult(
        state=st,
        objective_trace=objective_trace,
        iterations=iteration,
        converged=converged,
        wall_time=wall_time,
        term_trace=term_trace,
    )


def solve_fcls(Y: np.ndarray, M: np.ndarray, rel_tol: float = 1e-8, max_iters: int = 10_000,
               sum_to_one: bool = True) -> np.ndarray:
    """Fully constrained least squares ``min ||Y - M A||^2`` over simplex columns of ``A``.

    Projected gradient descent with step ``1 / ||M^T M||`` from uniform
    abundances. With ``sum_to_one=False`` only non-negativity is enforced.

    Args:
        Y: Data matrix (d1 x P).
        M: Non-negative endmember matrix (d1 x R1).
        rel_tol: Relative objective change that stops the iteration.
        max_iters: Iteration cap.
        sum_to_one: Project columns on the simplex instead of the orthant.

    Returns:
        Abundance matrix (R1 x P).
    """
    Y = as_matrix(Y)
    M = as_matrix(M)
    R1, P = M.shape[1], Y.shape[1]
    project = project_simplex_columns if sum_to_one else project_nonneg

    gram = M.T @ M
    cross = M.T @ Y
    step = 1.0 / max(spectral_norm(gram), 1e-12)
    floor = GAP_FLOOR * max(frobenius_sq(Y), 1.0)

    A = np.full((R1, P), 1.0 / R1)
    f_prev = 0.5 * frobenius_sq(Y - M @ A)
    for _ in range(max_iters):
        A = project(A - step * (gram @ A - cross))
        f = 0.5 * frobenius_sq(Y - M @ A)
        if f <= floor or abs(f_prev - f) <= rel_tol * max(f_prev, GAP_FLOOR):
            break
        f_prev = f
    else:
        logger.debug(f"FCLS stopped at max_iters={max_iters} (f={f_prev:.3e})")
    return A
