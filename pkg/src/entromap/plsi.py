"""Toy latent-component decomposition with an entropy-penalized M-step.

A feature-by-time count matrix is factored into ``Z`` dictionary
distributions over features and one activation distribution over components
per column, via plain EM on the latent component indicator.  Dictionaries
are re-estimated by normalization; activations get the sparse MAP solver,
which is exactly where the entropy penalty earns its keep: a column is
expected to use few components at once.

The per-column expected counts handed to the M-step are real-valued, which
is the situation the solver's real-count support exists for.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Tuple

import numpy as np
from scipy.special import xlogy

from .core import CountVector, SimplexVector, entropy_term, ml_estimate
from .exceptions import DegenerateModelError, InvalidInputError, InvalidParameterError
from .solver import FitResult, NuSchedule, SolverConfig, fit_map_batch

_ROW_SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CountMatrix:
    """F x T matrix of nonnegative real counts with positive column sums."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 2:
            raise InvalidInputError("count matrix must be 2-D (features x columns)")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("count matrix entries must be finite")
        if np.any(arr < 0.0):
            raise InvalidInputError("count matrix entries must be nonnegative")
        if arr.shape[1] > 0 and np.any(arr.sum(axis=0) <= 0.0):
            bad = int(np.flatnonzero(arr.sum(axis=0) <= 0.0)[0])
            raise InvalidInputError(f"column {bad} has zero total")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def f(self) -> int:
        return int(self.values.shape[0])

    @property
    def t(self) -> int:
        return int(self.values.shape[1])


def _check_rows_on_simplex(rows: np.ndarray, what: str):
    if rows.shape[0] == 0:
        return
    if np.any(rows < 0.0):
        raise InvalidInputError(f"{what} must be nonnegative")
    sums = rows.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > _ROW_SUM_TOL):
        bad = int(np.flatnonzero(np.abs(sums - 1.0) > _ROW_SUM_TOL)[0])
        raise InvalidInputError(f"{what} row {bad} sums to {sums[bad]!r}, expected 1")


@dataclass(frozen=True, eq=False)
class Factorization:
    """Dictionary (Z x F), activations (T x Z), and per-column masses (T,).

    Every dictionary and activation row is a distribution.
    ``reset_components`` records dictionary rows that received no expected
    mass during an M-step and were reset to uniform.
    """

    components: np.ndarray
    activations: np.ndarray
    column_masses: np.ndarray
    reset_components: Tuple[int, ...] = ()

    def __post_init__(self):
        comps = np.array(self.components, dtype=float)
        acts = np.array(self.activations, dtype=float)
        masses = np.array(self.column_masses, dtype=float)
        if comps.ndim != 2 or acts.ndim != 2 or masses.ndim != 1:
            raise InvalidInputError("factorization arrays have wrong rank")
        if acts.shape[0] != masses.size:
            raise InvalidInputError("one column mass per activation row required")
        if acts.shape[0] > 0 and acts.shape[1] != comps.shape[0]:
            raise InvalidInputError("activation width must equal component count")
        _check_rows_on_simplex(comps, "component")
        _check_rows_on_simplex(acts, "activation")
        if np.any(masses < 0.0):
            raise InvalidInputError("column masses must be nonnegative")
        for arr in (comps, acts, masses):
            arr.flags.writeable = False
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "activations", acts)
        object.__setattr__(self, "column_masses", masses)
        object.__setattr__(self, "reset_components", tuple(self.reset_components))

    @property
    def z(self) -> int:
        return int(self.components.shape[0])

    @property
    def f(self) -> int:
        return int(self.components.shape[1])

    @property
    def t(self) -> int:
        return int(self.activations.shape[0])

    def component(self, z: int) -> SimplexVector:
        return SimplexVector(self.components[z])

    def activation(self, t: int) -> SimplexVector:
        return SimplexVector(self.activations[t])

    def mixture(self) -> np.ndarray:
        """Per-column feature distributions, F x T (columns sum to 1)."""
        return self.components.T @ self.activations.T

    def reconstruct(self) -> np.ndarray:
        """Expected counts under the model: mixture scaled by column masses."""
        return self.mixture() * self.column_masses


class ExpectedCounts(NamedTuple):
    """E-step output: per-component feature counts (Z x F) and per-column
    component counts (T x Z).  Both grand totals equal the data total."""

    feature_counts: np.ndarray
    component_counts: np.ndarray


def _default_em_solver() -> SolverConfig:
    # Modest ceiling: inside EM the M-step runs once per column per sweep,
    # and iterations grow with nu.  floor > 0 keeps activations off exact
    # zero so the next E-step cannot divide by zero.
    return SolverConfig(
        schedule=NuSchedule.geometric(2.0, 50.0, 1.5),
        tol=1e-8,
        max_iter=20_000,
        floor=1e-12,
    )


@dataclass(frozen=True)
class EmConfig:
    """EM setup: component count, activation prior strength, M-step solver,
    sweep budget, and seed for the factor initialization.  ``inner_tol``
    overrides the solver's convergence tolerance for the per-column fits."""

    z: int
    a: float = 0.0
    solver: SolverConfig = field(default_factory=_default_em_solver)
    em_iters: int = 50
    seed: int = 0
    inner_tol: float = 1e-8

    def __post_init__(self):
        if self.z < 1:
            raise InvalidParameterError(f"need at least one component, got {self.z}")
        if self.em_iters < 1:
            raise InvalidParameterError(f"em_iters must be >= 1, got {self.em_iters}")
        if not (self.a >= 0.0):
            raise InvalidParameterError(f"prior strength a must be >= 0, got {self.a!r}")
        if not (self.inner_tol > 0.0):
            raise InvalidParameterError(f"inner_tol must be > 0, got {self.inner_tol!r}")
        if self.solver.floor <= 0.0:
            raise InvalidParameterError(
                "the M-step solver needs floor > 0; exact zeros would break the E-step"
            )


@dataclass(frozen=True)
class EmIterationStats:
    iteration: int
    log_likelihood: float
    mean_activation_entropy: float


@dataclass(frozen=True, eq=False)
class EmResult:
    factorization: Factorization
    history: Tuple[EmIterationStats, ...]


def e_step(matrix: CountMatrix, fact: Factorization) -> ExpectedCounts:
    """Expected component counts under the current factors.

    Responsibilities are ``r[z|f,t] = W[z,f] H[t,z] / sum_z' W[z',f] H[t,z']``;
    the two outputs are the data counts weighted by responsibility and summed
    over columns (feature counts) or features (component counts).
    """
    v = matrix.values
    w = fact.components
    h = fact.activations
    if w.shape[1] != v.shape[0] or h.shape[0] != v.shape[1]:
        raise InvalidInputError(
            f"factor shapes {w.shape}/{h.shape} do not match matrix {v.shape}"
        )
    mix = w.T @ h.T  # F x T
    bad = (v > 0.0) & (mix <= 0.0)
    if np.any(bad):
        f_idx, t_idx = np.argwhere(bad)[0]
        raise DegenerateModelError(
            f"cell ({int(f_idx)}, {int(t_idx)}) has positive count but zero model probability"
        )
    scaled = np.zeros_like(v)
    np.divide(v, mix, out=scaled, where=v > 0.0)
    feature_counts = w * (scaled @ h).T
    component_counts = h * (w @ scaled).T
    return ExpectedCounts(feature_counts, component_counts)


def m_step(expected: ExpectedCounts, a: float, solver: SolverConfig) -> Factorization:
    """Refresh factors from expected counts.

    Dictionaries are plain normalizations (no prior); activations are sparse
    MAP fits at strength ``a``.  A dictionary row with no expected mass is
    reset to uniform and reported in ``reset_components``.
    """
    feature_counts, component_counts = expected
    n_components, n_features = feature_counts.shape
    components = np.empty_like(feature_counts)
    reset = []
    for z in range(n_components):
        if feature_counts[z].sum() <= 0.0:
            components[z] = 1.0 / n_features
            reset.append(z)
        else:
            components[z] = ml_estimate(CountVector(feature_counts[z])).values
    config = replace(solver, a=a)
    fits = fit_map_batch([CountVector(row) for row in component_counts], config)
    activations = (
        np.array([fit.theta.values for fit in fits])
        if fits
        else np.zeros((0, n_components))
    )
    masses = component_counts.sum(axis=1)
    return Factorization(components, activations, masses, tuple(reset))


def data_log_likelihood(matrix: CountMatrix, fact: Factorization) -> float:
    """``sum_{f,t} V[f,t] * log(mixture[f,t])``; the mixture columns are
    already normalized, so no further column scaling is needed."""
    return float(np.sum(xlogy(matrix.values, fact.mixture())))


def mean_activation_entropy(fact: Factorization) -> float:
    """Mean Shannon entropy of the activation rows (0 for an empty matrix)."""
    if fact.t == 0:
        return 0.0
    return float(np.mean([-entropy_term(row) for row in fact.activations]))


def _initial_factorization(v: np.ndarray, z: int, seed: int) -> Factorization:
    """Seeded interior starting point.

    Activations are random (normalized uniform draws); dictionaries are the
    data columns blended by those activations, mixed with a little uniform
    mass.  Randomizing over columns rather than features keeps the whole EM
    trajectory equivariant under feature permutations.
    """
    n_features, n_columns = v.shape
    rng = np.random.default_rng(seed)
    acts = rng.uniform(size=(n_columns, z))
    acts /= acts.sum(axis=1, keepdims=True)
    comps = np.full((z, n_features), 1.0 / max(n_features, 1))
    if n_columns > 0 and n_features > 0:
        blended = (v @ acts).T  # Z x F
        sums = blended.sum(axis=1, keepdims=True)
        ok = sums[:, 0] > 0.0
        blended[ok] /= sums[ok]
        blended[~ok] = 1.0 / n_features
        comps = 0.95 * blended + 0.05 / n_features
    return Factorization(comps, acts, v.sum(axis=0))


def em_fit(matrix: CountMatrix, config: EmConfig) -> EmResult:
    """Run ``config.em_iters`` E/M sweeps from a seeded interior start.

    Per-sweep diagnostics record the data log-likelihood and the mean
    activation entropy, both evaluated at the freshly updated factors.
    """
    fact = _initial_factorization(matrix.values, config.z, config.seed)
    solver = replace(config.solver, tol=config.inner_tol)
    history = []
    for i in range(config.em_iters):
        expected = e_step(matrix, fact)
        fact = m_step(expected, config.a, solver)
        history.append(
            EmIterationStats(
                iteration=i,
                log_likelihood=data_log_likelihood(matrix, fact),
                mean_activation_entropy=mean_activation_entropy(fact),
            )
        )
    return EmResult(fact, tuple(history))


def gen_synthetic(
    f: int,
    t: int,
    z: int,
    sparsity: int,
    seed: int,
    counts_per_column: int = 200,
) -> Tuple[CountMatrix, Factorization]:
    """Deterministic synthetic benchmark with sparse ground-truth activations.

    Each dictionary concentrates on its own block of features with a little
    mass everywhere else; each column activates exactly ``sparsity``
    components (a point mass when ``sparsity == 1``) and receives integer
    multinomial counts.
    """
    if f < 1 or z < 1:
        raise InvalidParameterError("dimensions must be positive")
    if f < z:
        raise InvalidParameterError(f"need at least one feature per component ({f} < {z})")
    if t < 0:
        raise InvalidParameterError(f"column count must be >= 0, got {t}")
    if not (1 <= sparsity <= z):
        raise InvalidParameterError(
            f"sparsity must lie in 1..{z} (components per column), got {sparsity}"
        )
    if counts_per_column < 1:
        raise InvalidParameterError("counts_per_column must be >= 1")

    rng = np.random.default_rng(seed)
    comps = rng.uniform(0.01, 0.05, size=(z, f))
    for zi, block in enumerate(np.array_split(np.arange(f), z)):
        comps[zi, block] = rng.uniform(1.0, 2.0, size=block.size)
    comps /= comps.sum(axis=1, keepdims=True)

    acts = np.zeros((t, z))
    for ti in range(t):
        active = rng.choice(z, size=sparsity, replace=False)
        acts[ti, active] = rng.dirichlet(np.ones(sparsity))

    mix = comps.T @ acts.T
    values = np.zeros((f, t))
    for ti in range(t):
        values[:, ti] = rng.multinomial(counts_per_column, mix[:, ti])
    truth = Factorization(comps, acts, values.sum(axis=0))
    return CountMatrix(values), truth
