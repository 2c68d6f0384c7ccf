"""Alternating fixed-point solver for the entropy-penalized MAP estimate.

Each iteration draws the tightness value ``nu`` from a schedule, refreshes
the auxiliary distribution (``alpha_k`` proportional to
``theta_k ** (nu/(nu-1))``) and then the estimate itself (``theta_k``
proportional to ``a*nu*alpha_k + counts_k``).  Both half-steps exactly
maximize the surrogate objective in their own block, so at fixed ``nu`` the
surrogate ascends monotonically.  Convergence is declared on the max-norm
change of ``theta``, and only once the schedule has reached its ceiling --
while ``nu`` is still ramping the target is moving and an early stall would
be spurious.

Larger ``nu`` tightens the approximation (``alpha`` is forced toward
``theta``) at the price of more iterations, so the default schedule starts
loose and grows geometrically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .core import (
    CountVector,
    EntropicObjectiveParams,
    SimplexVector,
    _count_values,
    _prob_values,
    log_joint,
    surrogate_objective,
)
from .exceptions import DegenerateInputError, InvalidInputError, InvalidParameterError


@dataclass(frozen=True)
class NuSchedule:
    """Per-iteration tightness values.

    ``constant`` yields ``nu_max`` every iteration.  ``geometric`` starts at
    ``nu_initial`` and multiplies by ``growth`` once per iteration until
    ``nu_max`` is reached.
    """

    kind: str = "geometric"
    nu_initial: float = 2.0
    nu_max: float = 1000.0
    growth: float = 1.5

    def __post_init__(self):
        if self.kind not in ("constant", "geometric"):
            raise InvalidParameterError(f"unknown schedule kind {self.kind!r}")
        if not (self.nu_max > 1.0):
            raise InvalidParameterError(f"nu_max must be > 1, got {self.nu_max!r}")
        if self.kind == "geometric":
            if not (self.nu_initial > 1.0):
                raise InvalidParameterError(
                    f"nu_initial must be > 1, got {self.nu_initial!r}"
                )
            if self.nu_initial > self.nu_max:
                raise InvalidParameterError("nu_initial must not exceed nu_max")
            if not (self.growth > 1.0):
                raise InvalidParameterError(f"growth must be > 1, got {self.growth!r}")

    @classmethod
    def constant(cls, nu: float) -> "NuSchedule":
        return cls(kind="constant", nu_initial=nu, nu_max=nu)

    @classmethod
    def geometric(cls, nu_initial: float, nu_max: float, growth: float = 1.5) -> "NuSchedule":
        return cls(kind="geometric", nu_initial=nu_initial, nu_max=nu_max, growth=growth)

    def value(self, iteration: int) -> float:
        """The ``nu`` used by 0-based iteration ``iteration``."""
        if self.kind == "constant":
            return self.nu_max
        return min(self.nu_initial * self.growth**iteration, self.nu_max)


@dataclass(frozen=True)
class SolverConfig:
    """Everything :func:`fit_map` needs besides the counts.

    ``floor`` clamps ``theta`` entries from below inside the alpha update
    and before log evaluations only; the returned estimate is never floored,
    so exact zeros survive where the data produces them.  ``jitter``
    perturbs the initial point multiplicatively (seeded) to let callers
    escape symmetric saddles reproducibly; the default of 0 keeps symmetric
    problems exactly symmetric.
    """

    a: float = 0.0
    schedule: NuSchedule = field(default_factory=NuSchedule)
    tol: float = 1e-10
    max_iter: int = 100_000
    floor: float = 1e-15
    init: Union[str, SimplexVector] = "smoothed_ml"
    jitter: float = 0.0
    seed: int = 0
    record_trace: bool = False

    def __post_init__(self):
        if not (self.a >= 0.0):
            raise InvalidParameterError(f"prior strength a must be >= 0, got {self.a!r}")
        if not (self.tol > 0.0):
            raise InvalidParameterError(f"tol must be > 0, got {self.tol!r}")
        if self.max_iter < 1:
            raise InvalidParameterError(f"max_iter must be >= 1, got {self.max_iter!r}")
        if not (0.0 <= self.floor <= 1e-6):
            raise InvalidParameterError(f"floor must lie in [0, 1e-6], got {self.floor!r}")
        if not (0.0 <= self.jitter <= 1e-3):
            raise InvalidParameterError(f"jitter must lie in [0, 1e-3], got {self.jitter!r}")
        if not isinstance(self.init, SimplexVector) and self.init not in (
            "smoothed_ml",
            "uniform",
        ):
            raise InvalidParameterError(
                "init must be 'smoothed_ml', 'uniform', or an explicit SimplexVector"
            )


@dataclass(frozen=True)
class TraceRecord:
    """Objective bookkeeping for one iteration.

    ``surrogate_after_alpha`` is the surrogate value right after the alpha
    half-step (theta still old); ``surrogate`` and ``log_joint`` are
    evaluated after the theta half-step.  Chaining consecutive records
    exposes every half-step for monotonicity checks.
    """

    iteration: int
    nu: float
    surrogate_after_alpha: float
    surrogate: float
    log_joint: float
    delta: float


@dataclass(frozen=True, eq=False)
class FitResult:
    theta: SimplexVector
    alpha: SimplexVector
    iterations: int
    converged: bool
    final_nu: float
    log_joint_value: float
    surrogate_value: float
    trace: Optional[tuple] = None

    @property
    def approximation_gap(self) -> float:
        """``|surrogate - log_joint|`` at the solution; shrinks as nu grows."""
        return abs(self.surrogate_value - self.log_joint_value)


def _alpha_step(theta: np.ndarray, nu: float, floor: float) -> np.ndarray:
    # Log-space power keeps huge exponents (nu close to 1) from underflowing
    # anything but genuinely negligible entries.
    t = np.maximum(theta, floor) if floor > 0.0 else theta
    with np.errstate(divide="ignore"):
        log_t = np.log(t)
    w = np.exp((nu / (nu - 1.0)) * (log_t - log_t.max()))
    return w / w.sum()


def _theta_step(counts: np.ndarray, alpha: np.ndarray, a: float, nu: float) -> np.ndarray:
    w = a * nu * alpha + counts
    return w / w.sum()


def _floored(theta: np.ndarray, floor: float) -> np.ndarray:
    if floor <= 0.0:
        return theta
    clipped = np.maximum(theta, floor)
    return clipped / clipped.sum()


def update_alpha(theta, nu: float, floor: float = 0.0) -> SimplexVector:
    """Auxiliary-distribution update: ``alpha_k`` proportional to
    ``max(theta_k, floor) ** (nu/(nu-1))``.  With ``floor == 0`` zero
    entries of ``theta`` stay exactly zero in ``alpha``.
    """
    if not (nu > 1.0):
        raise InvalidParameterError(f"nu must be > 1, got {nu!r}")
    if floor < 0.0:
        raise InvalidParameterError(f"floor must be >= 0, got {floor!r}")
    return SimplexVector(_alpha_step(_prob_values(theta), nu, floor))


def update_theta(counts, alpha, a: float, nu: float) -> SimplexVector:
    """Estimate update: ``theta_k`` proportional to ``a*nu*alpha_k + counts_k``."""
    if not (nu > 1.0):
        raise InvalidParameterError(f"nu must be > 1, got {nu!r}")
    if a < 0.0:
        raise InvalidParameterError(f"prior strength a must be >= 0, got {a!r}")
    c = _count_values(counts)
    al = _prob_values(alpha)
    if c.size != al.size:
        raise InvalidInputError(f"dimension mismatch: {c.size} counts vs {al.size} weights")
    w = a * nu * al + c
    total = float(w.sum())
    if total <= 0.0:
        raise DegenerateInputError("update has all-zero numerator (a == 0 and no counts)")
    return SimplexVector(w / total)


def _initial_theta(counts: np.ndarray, total: float, config: SolverConfig) -> np.ndarray:
    k = counts.size
    if isinstance(config.init, SimplexVector):
        if config.init.k != k:
            raise InvalidInputError(
                f"explicit init has dimension {config.init.k}, counts have {k}"
            )
        theta = config.init.values.copy()
    elif config.init == "uniform":
        theta = np.full(k, 1.0 / k)
    else:  # smoothed_ml: add-one smoothing keeps every log finite
        theta = (counts + 1.0) / (total + k)
    if config.jitter > 0.0:
        noise = np.random.default_rng(config.seed).uniform(-1.0, 1.0, k)
        theta = theta * (1.0 + noise * config.jitter)
        theta = theta / theta.sum()
    return theta


def fit_map(counts, config: SolverConfig = SolverConfig()) -> FitResult:
    """Approximate MAP estimate of a multinomial under the entropy penalty.

    Iterates the alpha and theta updates (in that order, so the very first
    theta refresh is already prior-aware) until the max-norm theta change
    drops below ``config.tol`` with the schedule at its ceiling, or
    ``config.max_iter`` is exhausted.  Hitting the budget is reported as
    ``converged=False``, not an error.

    The returned ``alpha`` is recomputed from the final ``theta`` at the
    final ``nu``, so it is the exact image of the alpha update.
    """
    if not isinstance(counts, CountVector):
        counts = CountVector(_count_values(counts))
    if counts.total <= 0.0 and config.a == 0.0:
        raise DegenerateInputError(
            "all-zero counts with a == 0: nothing constrains the estimate"
        )

    c = counts.counts
    a = config.a
    floor = config.floor
    schedule = config.schedule
    theta = _initial_theta(c, counts.total, config)

    trace: Optional[list] = [] if config.record_trace else None
    converged = False
    iterations = 0
    nu = schedule.value(0)

    for i in range(config.max_iter):
        nu = schedule.value(i)
        alpha = _alpha_step(theta, nu, floor)
        if trace is not None:
            params = EntropicObjectiveParams(a, nu)
            after_alpha = surrogate_objective(params, _floored(theta, floor), alpha, c)
        new_theta = _theta_step(c, alpha, a, nu)
        delta = float(np.max(np.abs(new_theta - theta)))
        theta = new_theta
        iterations = i + 1
        if trace is not None:
            safe_theta = _floored(theta, floor)
            trace.append(
                TraceRecord(
                    iteration=i,
                    nu=nu,
                    surrogate_after_alpha=after_alpha,
                    surrogate=surrogate_objective(params, safe_theta, alpha, c),
                    log_joint=log_joint(safe_theta, c, a),
                    delta=delta,
                )
            )
        if nu >= schedule.nu_max and delta < config.tol:
            converged = True
            break

    final_alpha = _alpha_step(theta, nu, floor)
    safe_theta = _floored(theta, floor)
    params = EntropicObjectiveParams(a, nu)
    return FitResult(
        theta=SimplexVector(theta),
        alpha=SimplexVector(final_alpha),
        iterations=iterations,
        converged=converged,
        final_nu=float(nu),
        log_joint_value=log_joint(safe_theta, c, a),
        surrogate_value=surrogate_objective(params, safe_theta, final_alpha, c),
        trace=tuple(trace) if trace is not None else None,
    )


def fit_map_batch(columns: Sequence, config: SolverConfig = SolverConfig()) -> list:
    """Fit every count vector in ``columns`` independently.

    All columns must share one dimension; results are identical to calling
    :func:`fit_map` per column in order.
    """
    vectors = [
        col if isinstance(col, CountVector) else CountVector(_count_values(col))
        for col in columns
    ]
    if vectors:
        dims = {v.k for v in vectors}
        if len(dims) != 1:
            raise InvalidInputError(f"columns have mixed dimensions {sorted(dims)}")
    return [fit_map(v, config) for v in vectors]
