"""Brute-force verification of the solver: exhaustive simplex grid search
and a derivative-free local-optimality certificate.

The grid enumerates exact rational compositions ``i/m`` (``m`` the rounded
reciprocal of the resolution) so the simplex constraint never accumulates
float drift.  This exists to verify solutions at desk scale, not to compete
with the solver, hence the hard dimension cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import xlogy

from .core import SimplexVector, _count_values, _prob_values, log_joint
from .exceptions import InvalidInputError, InvalidParameterError, ResourceError

_POINT_GUARD = 10**8
_BLOCK_ROWS = 1 << 20


@dataclass(frozen=True)
class GridSpec:
    """Grid step and dimension for :func:`grid_map_search` (2 <= k <= 4)."""

    resolution: float
    k: int

    def __post_init__(self):
        if not (0.0 < self.resolution <= 0.5):
            raise InvalidParameterError(
                f"resolution must lie in (0, 0.5], got {self.resolution!r}"
            )
        if not (2 <= self.k <= 4):
            raise InvalidParameterError(f"grid search supports 2 <= K <= 4, got {self.k}")
        if self.n_points > _POINT_GUARD:
            raise ResourceError(
                f"grid would contain {self.n_points} points (guard: {_POINT_GUARD})"
            )

    @property
    def steps(self) -> int:
        """Number of subdivisions per coordinate."""
        return int(round(1.0 / self.resolution))

    @property
    def n_points(self) -> int:
        m = int(round(1.0 / self.resolution))
        return math.comb(m + self.k - 1, self.k - 1)


def _composition_blocks(m: int, k: int):
    """Yield integer composition blocks of ``m`` into ``k`` parts, in
    lexicographic order of the resulting probability vectors."""
    if k == 2:
        i = np.arange(m + 1)
        for start in range(0, m + 1, _BLOCK_ROWS):
            chunk = i[start : start + _BLOCK_ROWS]
            yield np.column_stack([chunk, m - chunk])
    elif k == 3:
        for i in range(m + 1):
            j = np.arange(m - i + 1)
            yield np.column_stack([np.full(j.size, i), j, m - i - j])
    else:  # k == 4
        for i in range(m + 1):
            r = m - i
            sizes = r + 1 - np.arange(r + 1)
            j = np.repeat(np.arange(r + 1), sizes)
            starts = np.repeat(np.cumsum(sizes) - sizes, sizes)
            third = np.arange(sizes.sum()) - starts
            yield np.column_stack([np.full(j.size, i), j, third, r - j - third])


def grid_map_search(counts, a: float, spec: GridSpec) -> Tuple[SimplexVector, float]:
    """Exhaustively maximize the penalized log joint over the grid.

    Boundary points participate via the ``-inf`` convention.  Exact ties are
    broken toward the lexicographically smallest probability vector, which
    makes the symmetric multimodality induced by large ``a`` deterministic.
    Returns the winning point and its objective value.
    """
    c = _count_values(counts)
    if c.size != spec.k:
        raise InvalidInputError(f"counts have dimension {c.size}, grid expects {spec.k}")
    if a < 0.0:
        raise InvalidParameterError(f"prior strength a must be >= 0, got {a!r}")

    m = spec.steps
    best_value = -np.inf
    best_point = None
    for block in _composition_blocks(m, spec.k):
        thetas = block / m
        values = a * xlogy(thetas, thetas).sum(axis=1) + xlogy(c, thetas).sum(axis=1)
        idx = int(np.argmax(values))  # first occurrence wins within a block
        if values[idx] > best_value:
            best_value = float(values[idx])
            best_point = thetas[idx].copy()
    return SimplexVector(best_point), best_value


def local_optimality_check(theta, counts, a: float, step: float) -> bool:
    """True iff no pairwise mass transfer of size ``step`` improves the
    penalized log joint by more than 1e-12.  Source coordinates smaller than
    ``step`` are skipped (the move would leave the simplex).
    """
    if not (step > 0.0):
        raise InvalidParameterError(f"step must be > 0, got {step!r}")
    t = _prob_values(theta)
    c = _count_values(counts)
    if t.size != c.size:
        raise InvalidInputError(f"dimension mismatch: {t.size} vs {c.size}")
    base = log_joint(t, c, a)
    for src in range(t.size):
        if t[src] < step:
            continue
        for dst in range(t.size):
            if dst == src:
                continue
            candidate = t.copy()
            candidate[src] -= step
            candidate[dst] += step
            if log_joint(candidate, c, a) > base + 1e-12:
                return False
    return True
