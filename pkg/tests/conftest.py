"""Shared fixtures: deterministic random-matrix construction."""

import numpy as np
import pytest

from liracf.ratings import RatingMatrix


@pytest.fixture
def matrix_factory():
    """Factory for random sparse matrices with explicit (possibly empty) users.

    Keeps dimensions explicit so generated matrices can contain users or
    items with no ratings, which several degenerate-case tests rely on.
    """

    def make(rng, m=8, n=10, d=5, density=0.6) -> RatingMatrix:
        mask = rng.random((m, n)) < density
        values = rng.integers(1, d + 1, size=(m, n))
        triples = np.column_stack([
            np.repeat(np.arange(m), n)[mask.ravel()],
            np.tile(np.arange(n), m)[mask.ravel()],
            values.ravel()[mask.ravel()],
        ])
        return RatingMatrix.from_triples(triples, scale_d=d,
                                         num_users=m, num_items=n)

    return make
