"""Annealed noise schedule for the iterative sampler.

Each planning cycle runs the sampler for iterations i = I (first) down to 1
(last). The sampling noise shrinks both across iterations and along the
horizon: node k of iteration i gets the multiplier

    factors[i][k] = exp(-(I - i) / (beta1 I) - (K - 1 - k) / (beta2 K))

so the first iteration explores widest, later nodes stay more exploratory
than early ones, and the very last node of the first iteration has
multiplier exactly 1. The multipliers scale standard deviations directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(eq=False)
class NoiseSchedule:
    """Noise multiplier grid, rows = iterations I..1, columns = nodes 0..K-1.

    factors[i - 1, k] is the multiplier for iteration i (1-based, I is the
    first iteration executed) and node k.
    """

    iterations: int
    node_count: int
    beta1: float
    beta2: float
    factors: np.ndarray = field(default=None, repr=False)

    def row(self, iteration: int) -> np.ndarray:
        """Multipliers for all K nodes of one iteration (1 <= i <= I)."""
        if not 1 <= iteration <= self.iterations:
            raise IndexError(
                f"iteration {iteration} outside 1..{self.iterations}"
            )
        return self.factors[iteration - 1]


def build_schedule(
    iterations: int, node_count: int, beta1: float, beta2: float
) -> NoiseSchedule:
    """Precompute the (I, K) multiplier grid.

    iterations >= 1, node_count >= 2, beta1 > 0, beta2 > 0.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if node_count < 2:
        raise ValueError("node_count must be >= 2")
    if beta1 <= 0.0 or beta2 <= 0.0:
        raise ValueError("beta1 and beta2 must be positive")
    i = np.arange(1, iterations + 1, dtype=np.float64)[:, None]
    k = np.arange(node_count, dtype=np.float64)[None, :]
    exponent = -(iterations - i) / (beta1 * iterations) - (
        node_count - 1.0 - k
    ) / (beta2 * node_count)
    factors = np.exp(exponent)
    return NoiseSchedule(iterations, node_count, beta1, beta2, factors)


def sigma(schedule: NoiseSchedule, iteration: int, node_index: int) -> float:
    """Single multiplier lookup with bounds checking."""
    row = schedule.row(iteration)
    if not 0 <= node_index < schedule.node_count:
        raise IndexError(
            f"node index {node_index} outside 0..{schedule.node_count - 1}"
        )
    return float(row[node_index])
