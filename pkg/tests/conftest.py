"""Shared fixtures: hand-built suites with known constants."""

from __future__ import annotations

import numpy as np
import pytest

from gradtrack import SquareLossSuite


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def heterogeneous_quadratic(n: int, seed: int) -> SquareLossSuite:
    """Square-loss suite with per-agent 2x2 Hessians of varying orientation.

    Agent 0 carries eigenvalues exactly (1, 4) so the suite constants are
    alpha = 1 and beta = 4; the rest sit strictly inside, which keeps the
    consensus and tracking errors coupled to the distance along the slow
    mode instead of collapsing to rounding noise.
    """
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, 3.0, (n, 2))
    pair = np.column_stack([rng.uniform(1.2, 3.8, n), rng.uniform(1.2, 3.8, n)])
    pair[0] = [1.0, 4.0]
    features = np.zeros((n, 2, 2))
    for i in range(n):
        r = rotation(rng.uniform(0.0, np.pi))
        # rows of the symmetric square root of H_i/2, H_i = R diag(pair) R^T
        features[i] = r @ np.diag(np.sqrt(pair[i] / 2.0)) @ r.T
    targets = np.einsum("imk,ik->im", features, centers)
    return SquareLossSuite(features, targets)


def two_agent_pull_suite() -> SquareLossSuite:
    """f_1(x) = (x-1)^2 and f_2(x) = (x+1)^2; average x^2 + 1 minimized at 0."""
    return SquareLossSuite(
        np.array([[[1.0]], [[1.0]]]), np.array([[1.0], [-1.0]])
    )


@pytest.fixture(scope="session")
def pull_suite() -> SquareLossSuite:
    return two_agent_pull_suite()
