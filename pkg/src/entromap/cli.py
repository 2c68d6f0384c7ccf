"""Command-line surface: fitting, oracle comparison, synthetic data, and
the latent-component demo.

Machine output is a single JSON document on stdout (or ``--output``);
warnings and timing go to stderr so repeated runs with the same seeds are
byte-identical.  Exit codes: 0 success, 1 bad input data, 2 bad flags or
configuration.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import CountVector, SimplexVector, log_joint
from .exceptions import (
    DegenerateInputError,
    DegenerateModelError,
    InvalidInputError,
    InvalidParameterError,
    ResourceError,
)
from .oracle import GridSpec, grid_map_search
from .plsi import CountMatrix, EmConfig, em_fit, gen_synthetic
from .solver import FitResult, NuSchedule, SolverConfig, fit_map

_INPUT_ERRORS = (
    InvalidInputError,
    DegenerateInputError,
    ResourceError,
    DegenerateModelError,
    OSError,
)


@dataclass(frozen=True)
class RunReport:
    """One command's machine-readable outcome.

    ``duration_seconds`` is populated at runtime but excluded from the
    serialized document (and reported on stderr instead): the document must
    be identical across repeated seeded runs.
    """

    command: str
    config: dict
    result: dict
    status: int = 0
    duration_seconds: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "result": self.result,
            "status": self.status,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "RunReport":
        return cls(
            command=doc["command"],
            config=doc["config"],
            result=doc["result"],
            status=doc["status"],
        )

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))


# ----------------------------------------------------------------------
# input parsing


def _parse_float_list(text: str, what: str) -> list:
    try:
        return [float(part) for part in text.split(",")]
    except ValueError as exc:
        raise InvalidInputError(f"could not parse {what} {text!r}: {exc}") from None


def _counts_from_file(path: str) -> CountVector:
    with open(path, "r", encoding="utf-8") as handle:
        lines = [ln.strip() for ln in handle]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise InvalidInputError(f"{path} contains no count data")
    if len(lines) == 1:
        values = _parse_float_list(lines[0], "count row")
    else:
        values = []
        for ln in lines:
            if "," in ln:
                raise InvalidInputError(
                    f"{path}: expected one number per line, found a row: {ln!r}"
                )
            values.extend(_parse_float_list(ln, "count"))
    return CountVector(np.asarray(values))


def _load_counts(args) -> CountVector:
    if args.counts is not None:
        return CountVector(np.asarray(_parse_float_list(args.counts, "counts")))
    return _counts_from_file(args.input)


def _matrix_from_file(path: str) -> CountMatrix:
    with open(path, "r", encoding="utf-8") as handle:
        lines = [ln.strip() for ln in handle]
    rows = [
        _parse_float_list(ln, "matrix row") for ln in lines if ln and not ln.startswith("#")
    ]
    if not rows:
        return CountMatrix(np.zeros((0, 0)))
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise InvalidInputError(f"{path}: ragged rows (widths {sorted(widths)})")
    return CountMatrix(np.asarray(rows))


def _parse_init(text: str):
    if text in ("smoothed_ml", "smoothed-ml"):
        return "smoothed_ml"
    if text == "uniform":
        return "uniform"
    try:
        return SimplexVector(np.asarray(_parse_float_list(text, "init vector")))
    except (InvalidInputError, DegenerateInputError) as exc:
        raise InvalidParameterError(f"bad --init value {text!r}: {exc}") from None


# ----------------------------------------------------------------------
# config assembly and serialization


def _schedule_from_args(args) -> NuSchedule:
    nu_max = args.nu if args.nu is not None else 1000.0
    if args.nu_init is not None:
        return NuSchedule.geometric(args.nu_init, nu_max, args.nu_growth)
    if args.nu is not None:
        return NuSchedule.constant(args.nu)
    return NuSchedule()


def _solver_config_from_args(args, default_floor: float = 1e-15) -> SolverConfig:
    return SolverConfig(
        a=args.a,
        schedule=_schedule_from_args(args),
        tol=args.tol,
        max_iter=args.max_iter,
        floor=args.floor if args.floor is not None else default_floor,
        init=_parse_init(args.init) if hasattr(args, "init") else "smoothed_ml",
        jitter=getattr(args, "jitter", 0.0),
        seed=getattr(args, "seed", 0),
        record_trace=getattr(args, "trace", False),
    )


def _schedule_doc(schedule: NuSchedule) -> dict:
    doc = {
        "kind": schedule.kind,
        "nu_initial": schedule.nu_initial,
        "nu_max": schedule.nu_max,
    }
    if schedule.kind == "geometric":
        doc["growth"] = schedule.growth
    return doc


def _solver_config_doc(config: SolverConfig) -> dict:
    init = config.init
    return {
        "a": config.a,
        "schedule": _schedule_doc(config.schedule),
        "tol": config.tol,
        "max_iter": config.max_iter,
        "floor": config.floor,
        "init": init.values.tolist() if isinstance(init, SimplexVector) else init,
        "jitter": config.jitter,
        "seed": config.seed,
        "record_trace": config.record_trace,
    }


def _fit_payload(fit: FitResult) -> dict:
    trace = None
    if fit.trace is not None:
        trace = [
            {
                "iteration": rec.iteration,
                "nu": rec.nu,
                "big_l_after_alpha": rec.surrogate_after_alpha,
                "big_l": rec.surrogate,
                "log_joint": rec.log_joint,
                "delta": rec.delta,
            }
            for rec in fit.trace
        ]
    return {
        "theta": fit.theta.values.tolist(),
        "alpha": fit.alpha.values.tolist(),
        "iterations": fit.iterations,
        "converged": fit.converged,
        "final_nu": fit.final_nu,
        "log_joint": fit.log_joint_value,
        "big_l": fit.surrogate_value,
        "trace": trace,
    }


def _emit(report: RunReport, output: Optional[str]):
    text = report.to_json()
    if output:
        with open(output, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


# ----------------------------------------------------------------------
# commands


def _run_fit(args) -> RunReport:
    counts = _load_counts(args)
    config = _solver_config_from_args(args)
    fit = fit_map(counts, config)
    if not fit.converged:
        print(
            f"warning: not converged after {fit.iterations} iterations "
            f"(last max-norm change above tol={config.tol})",
            file=sys.stderr,
        )
    return RunReport(
        command="fit",
        config={"counts": counts.counts.tolist(), **_solver_config_doc(config)},
        result=_fit_payload(fit),
    )


def _run_oracle(args) -> RunReport:
    counts = _load_counts(args)
    if not (2 <= counts.k <= 4):
        raise InvalidInputError(
            f"grid search supports K between 2 and 4, counts have K={counts.k}"
        )
    spec = GridSpec(resolution=args.resolution, k=counts.k)
    theta, value = grid_map_search(counts, args.a, spec)
    return RunReport(
        command="oracle",
        config={
            "counts": counts.counts.tolist(),
            "a": args.a,
            "resolution": args.resolution,
        },
        result={
            "theta": theta.values.tolist(),
            "log_joint": value,
            "grid_points": spec.n_points,
        },
    )


def _tied_permutation_linf(theta_a: np.ndarray, theta_b: np.ndarray, counts: np.ndarray) -> float:
    """Max-norm distance minimized over permutations that only swap
    categories with identical counts."""
    best = np.inf
    for perm in itertools.permutations(range(counts.size)):
        if any(counts[p] != counts[i] for i, p in enumerate(perm)):
            continue
        best = min(best, float(np.max(np.abs(theta_a - theta_b[list(perm)]))))
    return best


def _run_compare(args) -> RunReport:
    counts = _load_counts(args)
    if not (2 <= counts.k <= 4):
        raise InvalidInputError(
            f"grid search supports K between 2 and 4, counts have K={counts.k}"
        )
    a_values = _parse_float_list(args.a_list, "--a-list")
    spec = GridSpec(resolution=args.resolution, k=counts.k)
    rows = []
    for a in a_values:
        config = SolverConfig(a=a, schedule=NuSchedule.constant(args.nu))
        fit = fit_map(counts, config)
        oracle_theta, oracle_value = grid_map_search(counts, a, spec)
        solver_value = log_joint(fit.theta, counts, a)
        rows.append(
            {
                "a": a,
                "theta_solver": fit.theta.values.tolist(),
                "theta_oracle": oracle_theta.values.tolist(),
                "objective_gap": abs(solver_value - oracle_value),
                "theta_gap": _tied_permutation_linf(
                    fit.theta.values, oracle_theta.values, counts.counts
                ),
                "iterations": fit.iterations,
                "converged": fit.converged,
            }
        )
    return RunReport(
        command="compare",
        config={
            "counts": counts.counts.tolist(),
            "a_list": a_values,
            "nu": args.nu,
            "resolution": args.resolution,
        },
        result={"rows": rows, "grid_points": spec.n_points},
    )


def _run_plsi(args) -> RunReport:
    matrix = _matrix_from_file(args.matrix)
    solver = _solver_config_from_args(args, default_floor=1e-12)
    config = EmConfig(
        z=args.components,
        a=args.a,
        solver=solver,
        em_iters=args.em_iters,
        seed=args.seed,
        inner_tol=args.tol,
    )
    outcome = em_fit(matrix, config)
    fact = outcome.factorization
    return RunReport(
        command="plsi",
        config={
            "matrix": args.matrix,
            "components": args.components,
            "a": args.a,
            "em_iters": args.em_iters,
            "seed": args.seed,
            "solver": _solver_config_doc(solver),
        },
        result={
            "components": fact.components.tolist(),
            "activations": fact.activations.tolist(),
            "column_masses": fact.column_masses.tolist(),
            "reset_components": list(fact.reset_components),
            "diagnostics": [
                {
                    "iteration": rec.iteration,
                    "log_likelihood": rec.log_likelihood,
                    "mean_activation_entropy": rec.mean_activation_entropy,
                }
                for rec in outcome.history
            ],
        },
    )


def _matrix_file_text(matrix: CountMatrix, header: str) -> str:
    lines = [f"# {header}"]
    for row in matrix.values:
        lines.append(",".join(repr(float(value)) for value in row))
    return "\n".join(lines) + "\n"


def _run_gen(args) -> RunReport:
    matrix, truth = gen_synthetic(
        f=args.f, t=args.t, z=args.z, sparsity=args.sparsity, seed=args.seed
    )
    matrix_path = f"{args.output}.matrix.csv"
    truth_path = f"{args.output}.truth.json"
    header = (
        f"synthetic count matrix F={args.f} T={args.t} Z={args.z} "
        f"sparsity={args.sparsity} seed={args.seed}"
    )
    with open(matrix_path, "w", encoding="utf-8") as handle:
        handle.write(_matrix_file_text(matrix, header))
    truth_doc = {
        "components": truth.components.tolist(),
        "activations": truth.activations.tolist(),
        "column_masses": truth.column_masses.tolist(),
    }
    with open(truth_path, "w", encoding="utf-8") as handle:
        handle.write(json.dumps(truth_doc, indent=2) + "\n")
    return RunReport(
        command="gen",
        config={
            "f": args.f,
            "t": args.t,
            "z": args.z,
            "sparsity": args.sparsity,
            "seed": args.seed,
        },
        result={"matrix_file": matrix_path, "truth_file": truth_path},
    )


# ----------------------------------------------------------------------
# parser


def _add_counts_arguments(parser):
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--counts", help="inline comma-separated counts, e.g. 6,4")
    group.add_argument("--input", help="file with counts: one per line or one comma row")


def _add_solver_arguments(parser, default_floor: float):
    parser.add_argument("--a", type=float, default=0.0, help="prior strength (>= 0)")
    parser.add_argument(
        "--nu",
        type=float,
        default=None,
        help="constant tightness; also the ceiling when --nu-init is given",
    )
    parser.add_argument(
        "--nu-init",
        type=float,
        default=None,
        help="starting tightness of a geometric ramp up to --nu (default ramp 2..1000)",
    )
    parser.add_argument("--nu-growth", type=float, default=1.5, help="ramp factor per iteration")
    parser.add_argument("--tol", type=float, default=1e-10, help="max-norm convergence threshold")
    parser.add_argument("--max-iter", type=int, default=100_000)
    parser.add_argument(
        "--floor",
        type=float,
        default=None,
        help=f"lower clamp on theta before logs (default {default_floor:g})",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entromap",
        description="Sparse MAP estimation of multinomial parameters under an entropic prior.",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    fit = sub.add_parser("fit", help="fit one count vector")
    _add_counts_arguments(fit)
    _add_solver_arguments(fit, default_floor=1e-15)
    fit.add_argument("--init", default="smoothed_ml", help="smoothed_ml, uniform, or a probability row")
    fit.add_argument("--jitter", type=float, default=0.0, help="seeded init perturbation in [0, 1e-3]")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--trace", action="store_true", help="record per-iteration objectives")
    fit.add_argument("--output", help="write the report here instead of stdout")
    fit.set_defaults(handler=_run_fit)

    oracle = sub.add_parser("oracle", help="exhaustive grid search (K <= 4)")
    _add_counts_arguments(oracle)
    oracle.add_argument("--a", type=float, default=0.0)
    oracle.add_argument("--resolution", type=float, default=1e-3)
    oracle.add_argument("--output")
    oracle.set_defaults(handler=_run_oracle)

    compare = sub.add_parser("compare", help="solver-vs-oracle table over prior strengths")
    _add_counts_arguments(compare)
    compare.add_argument("--a-list", required=True, help="comma-separated prior strengths")
    compare.add_argument("--nu", type=float, default=1000.0, help="constant tightness for the solver")
    compare.add_argument("--resolution", type=float, default=1e-3)
    compare.add_argument("--output")
    compare.set_defaults(handler=_run_compare)

    plsi = sub.add_parser("plsi", help="latent-component demo on a count matrix file")
    plsi.add_argument("matrix", help="CSV matrix, one feature row per line")
    plsi.add_argument("--components", type=int, required=True)
    plsi.add_argument("--a", type=float, default=0.0, help="entropy penalty on activations")
    plsi.add_argument("--em-iters", type=int, default=50)
    plsi.add_argument("--seed", type=int, default=0)
    plsi.add_argument("--nu", type=float, default=50.0, help="tightness ceiling for the M-step")
    plsi.add_argument("--nu-init", type=float, default=2.0)
    plsi.add_argument("--nu-growth", type=float, default=1.5)
    plsi.add_argument("--tol", type=float, default=1e-8)
    plsi.add_argument("--max-iter", type=int, default=20_000)
    plsi.add_argument("--floor", type=float, default=None)
    plsi.add_argument("--output")
    plsi.set_defaults(handler=_run_plsi)

    gen = sub.add_parser("gen", help="write a synthetic matrix and its ground truth")
    gen.add_argument("--f", type=int, required=True, help="feature dimension")
    gen.add_argument("--t", type=int, required=True, help="number of columns")
    gen.add_argument("--z", type=int, required=True, help="number of components")
    gen.add_argument("--sparsity", type=int, default=1, help="active components per column")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--output", default="synthetic", help="path prefix for the two files")
    gen.set_defaults(handler=_run_gen)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        report = args.handler(args)
    except InvalidParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    duration = time.perf_counter() - started
    _emit(report, getattr(args, "output", None) if args.cmd != "gen" else None)
    print(f"{args.cmd}: completed in {duration:.3f}s", file=sys.stderr)
    return 0


def console_main():  # pragma: no cover - thin wrapper for the entry point
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
