"""Shared builders for random unmixing problems."""

import numpy as np
import pytest

from src.model import (
    Constraint,
    FactorState,
    ProblemSpec,
    Variant,
    Weights,
    constraint_for,
    expected_shapes,
)


def _random_block(rng, shape, constraint):
    if constraint is Constraint.SIMPLEX:
        return rng.dirichlet(np.ones(shape[0]), size=shape[1]).T
    return rng.random(shape)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def make_problem(rng):
    """Factory for a random problem and a random feasible state."""

    def build(variant=Variant.SP2U, d1=12, d2=9, P=40, R1=3, R2=4, K=5,
              weights=None, sum_to_one_on_A=True, generator=None):
        gen = generator if generator is not None else rng
        spec = ProblemSpec(
            Y=gen.random((d1, P)),
            S=gen.random((d2, P)),
            R1=R1,
            R2=R2,
            K=K,
            weights=weights or Weights(1.0, 0.5, 0.7, 0.1),
            variant=variant,
            sum_to_one_on_A=sum_to_one_on_A,
        )
        blocks = {
            block.value: _random_block(gen, shape, constraint_for(spec, block))
            for block, shape in expected_shapes(spec).items()
        }
        return spec, FactorState(**blocks)

    return build
