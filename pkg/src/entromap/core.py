"""Simplex-domain types and exact evaluation of the penalized objective.

The quantity being maximized throughout the package is the log joint of a
multinomial parameter vector ``theta`` and a vector of per-category counts
under an unnormalized low-entropy prior,

    J(theta) = a * sum_k theta_k * log(theta_k) + sum_k counts_k * log(theta_k),

reported up to an additive constant that depends only on ``(a, K)``.  Counts
may be real-valued (expected counts produced by an E-step count equally).

Conventions used by every evaluator here:

* ``0 * log(0) := 0`` wherever a probability multiplies its own logarithm;
* a positive count (or auxiliary weight) meeting a zero probability yields
  ``-inf`` as a *value*, not an error, so grid searches can rank boundary
  points.

Evaluators accept either the domain types (:class:`SimplexVector`,
:class:`CountVector`) or plain array-likes; the latter keeps them usable as
raw coordinate functions, e.g. for finite-difference checks that perturb a
single coordinate without renormalizing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import rel_entr, xlogy

from .exceptions import (
    BoundaryError,
    DegenerateInputError,
    InvalidInputError,
    InvalidParameterError,
)

# Constructors renormalize sums within _RENORM_TOL of 1 and reject anything
# further out; stored vectors then satisfy the 1e-12 sum invariant.
_RENORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SimplexVector:
    """A point on the probability simplex: nonnegative entries summing to 1.

    Inputs whose sum deviates from 1 by at most 1e-9 are renormalized;
    larger deviations are rejected as errors rather than silently fixed.
    The stored array is read-only.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidInputError("simplex vector must be 1-D with K >= 1")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("simplex vector entries must be finite")
        if np.any(arr < 0.0):
            raise InvalidInputError("simplex vector entries must be nonnegative")
        total = float(arr.sum())
        if abs(total - 1.0) > _RENORM_TOL:
            raise InvalidInputError(
                f"simplex vector entries sum to {total!r}; expected 1 within {_RENORM_TOL}"
            )
        arr /= total
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def k(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.k

    def __repr__(self) -> str:
        return f"SimplexVector({self.values.tolist()!r})"


@dataclass(frozen=True, eq=False)
class CountVector:
    """Per-category nonnegative real counts (observed or expected).

    ``total`` defaults to the entry sum; an explicitly supplied total must
    agree with the entry sum to 1e-9 relative.
    """

    counts: np.ndarray
    total: float = None  # type: ignore[assignment]

    def __post_init__(self):
        arr = np.array(self.counts, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidInputError("count vector must be 1-D with K >= 1")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("count entries must be finite")
        if np.any(arr < 0.0):
            raise InvalidInputError("count entries must be nonnegative")
        entry_sum = float(arr.sum())
        total = self.total
        if total is None:
            total = entry_sum
        else:
            total = float(total)
            if abs(total - entry_sum) > 1e-9 * max(1.0, abs(entry_sum)):
                raise InvalidInputError(
                    f"declared total {total!r} disagrees with entry sum {entry_sum!r}"
                )
        arr.flags.writeable = False
        object.__setattr__(self, "counts", arr)
        object.__setattr__(self, "total", total)

    @property
    def k(self) -> int:
        return int(self.counts.size)

    def __len__(self) -> int:
        return self.k

    def __repr__(self) -> str:
        return f"CountVector({self.counts.tolist()!r}, total={self.total!r})"


@dataclass(frozen=True)
class EntropicObjectiveParams:
    """Prior strength ``a`` (>= 0) and surrogate tightness ``nu`` (> 1)."""

    a: float
    nu: float

    def __post_init__(self):
        if not (self.a >= 0.0):
            raise InvalidParameterError(f"prior strength a must be >= 0, got {self.a!r}")
        if not (self.nu > 1.0):
            raise InvalidParameterError(f"tightness nu must be > 1, got {self.nu!r}")


def _prob_values(theta) -> np.ndarray:
    if isinstance(theta, SimplexVector):
        return theta.values
    return np.asarray(theta, dtype=float)


def _count_values(counts) -> np.ndarray:
    if isinstance(counts, CountVector):
        return counts.counts
    return np.asarray(counts, dtype=float)


def _check_dims(*arrays):
    sizes = {a.size for a in arrays}
    if len(sizes) != 1:
        raise InvalidInputError(f"dimension mismatch: sizes {sorted(sizes)}")


def counts_from_observations(observations, k: int) -> CountVector:
    """Tally category indices in ``{0..k-1}`` into a :class:`CountVector`.

    Raises an invalid-input error naming the first out-of-range position.
    """
    if k < 1:
        raise InvalidParameterError(f"number of categories must be >= 1, got {k}")
    obs = np.asarray(list(observations))
    if obs.size == 0:
        return CountVector(np.zeros(k))
    if not np.issubdtype(obs.dtype, np.integer):
        raise InvalidInputError("observations must be integer category indices")
    bad = np.flatnonzero((obs < 0) | (obs >= k))
    if bad.size:
        pos = int(bad[0])
        raise InvalidInputError(
            f"observation {int(obs[pos])} at position {pos} is outside 0..{k - 1}"
        )
    return CountVector(np.bincount(obs, minlength=k).astype(float))


def ml_estimate(counts) -> SimplexVector:
    """Maximum-likelihood estimate: counts normalized by their total."""
    if not isinstance(counts, CountVector):
        counts = CountVector(_count_values(counts))
    if counts.total <= 0.0:
        raise DegenerateInputError("cannot normalize all-zero counts")
    return SimplexVector(counts.counts / counts.total)


def entropy_term(theta) -> float:
    """``sum_k theta_k * log(theta_k)`` (negative Shannon entropy).

    Lies in ``[-log K, 0]``: zero exactly at a point mass, ``-log K`` at the
    uniform distribution.
    """
    t = _prob_values(theta)
    return float(np.sum(xlogy(t, t)))


def log_joint(theta, counts, a: float) -> float:
    """Penalized log joint: ``a * sum theta*log(theta) + sum counts*log(theta)``.

    Omits the prior's normalizing constant.  Returns ``-inf`` when a positive
    count sits on a zero probability.
    """
    t = _prob_values(theta)
    c = _count_values(counts)
    _check_dims(t, c)
    if a < 0.0:
        raise InvalidParameterError(f"prior strength a must be >= 0, got {a!r}")
    return float(a * np.sum(xlogy(t, t)) + np.sum(xlogy(c, t)))


def log_joint_gradient_interior(theta, counts, a: float) -> np.ndarray:
    """Gradient of :func:`log_joint` in raw coordinates, valid only for
    strictly positive ``theta``: component ``k`` is
    ``a * (1 + log theta_k) + counts_k / theta_k``.
    """
    t = _prob_values(theta)
    c = _count_values(counts)
    _check_dims(t, c)
    if a < 0.0:
        raise InvalidParameterError(f"prior strength a must be >= 0, got {a!r}")
    if np.any(t <= 0.0):
        raise BoundaryError("gradient is undefined where theta has zero entries")
    return a * (1.0 + np.log(t)) + c / t


def entropy_surrogate(params: EntropicObjectiveParams, theta, alpha) -> float:
    """Auxiliary lower bound on the entropy penalty.

    Evaluates ``a * sum_k alpha_k * (nu*log(theta_k) - (nu-1)*log(alpha_k))``
    in the numerically safe rearrangement

        a * (sum_k alpha_k*log(alpha_k) - nu * KL(alpha || theta)),

    which avoids the ``nu*x - (nu-1)*x`` cancellation at large ``nu`` and is
    exactly ``a * entropy_term(theta)`` when ``alpha == theta``.  Returns
    ``-inf`` when some ``alpha_k > 0`` meets ``theta_k == 0``; the term for
    ``alpha_k == 0`` is zero regardless of ``theta_k``.
    """
    t = _prob_values(theta)
    al = _prob_values(alpha)
    _check_dims(t, al)
    if params.a == 0.0:
        return 0.0
    neg_ent = np.sum(xlogy(al, al))
    divergence = np.sum(rel_entr(al, t))
    return float(params.a * (neg_ent - params.nu * divergence))


def surrogate_objective(params: EntropicObjectiveParams, theta, alpha, counts) -> float:
    """Surrogate for :func:`log_joint`: :func:`entropy_surrogate` plus the
    count log-likelihood.  Shares the infinity conventions of
    :func:`log_joint` and coincides with it when ``alpha == theta``.
    """
    t = _prob_values(theta)
    c = _count_values(counts)
    _check_dims(t, c)
    likelihood = np.sum(xlogy(c, t))
    return float(entropy_surrogate(params, theta, alpha) + likelihood)
