"""Command-line entry point.

Exit codes: 0 success, 1 validation or I/O error, 2 solver non-convergence,
3 a scientific check embedded in an experiment failed (the table is still
written).
"""

from __future__ import annotations

import argparse
import secrets
import sys

import numpy as np

from .errors import SolverError, SphereliftError
from .experiments import (
    ExperimentConfig,
    run_beta_sweep,
    run_concentration,
    run_free_energy_gap,
    run_sampler_validation,
)
from .io import atomic_write, read_matrix, render_jsonl, render_table
from .model import validate_params
from .sampler import ChainOptions, RngStream, approx_sample, exact_samples, hyperplane_round
from .solver import DEFAULT_MAX_ITER, DEFAULT_TOL, SolveReport, solve_regularized

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED, EXIT_CHECK_FAILED = 0, 1, 2, 3
SEED_MAX = 2**64 - 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v <= SEED_MAX:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2^64), got {text}")
    return v


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}") from None


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spherelift",
                     description="Regularized max-cut SDP and n-vector model sampling.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, fmt_default):
        p.add_argument("--matrix", required=True, help="interaction matrix file")
        p.add_argument("--out", default="-", help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default=fmt_default)

    def solver_opts(p):
        p.add_argument("--tol", type=float, default=DEFAULT_TOL)
        p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)

    def chain_opts(p):
        p.add_argument("--burn-in", type=_nonneg_int, default=500)
        p.add_argument("--thin", type=int, default=5)
        p.add_argument("--grid-size", type=int, default=2048)

    p = sub.add_parser("solve", help="solve the regularized SDP")
    common(p, "json")
    p.add_argument("--beta", type=float, required=True)
    solver_opts(p)

    for name, help_ in (("sample", "draw configurations and emit X^T X"),
                        ("round", "draw configurations and round them to signs")):
        p = sub.add_parser(name, help=help_)
        common(p, "csv")
        p.add_argument("--beta", type=float, required=True)
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--samples", type=_nonneg_int, required=True)
        p.add_argument("--seed", type=_seed)
        p.add_argument("--sampler", choices=("approx", "exact"), default="approx")
        chain_opts(p)
        solver_opts(p)

    p = sub.add_parser("free-energy", help="quadrature free energy vs n q* (k=2)")
    common(p, "csv")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--n-list", type=_int_list, required=True)
    solver_opts(p)

    p = sub.add_parser("concentration", help="concentration of S and R around S*, R*")
    common(p, "csv")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--n-list", type=_int_list, required=True)
    p.add_argument("--samples", type=_nonneg_int, default=400)
    p.add_argument("--seed", type=_seed)
    chain_opts(p)
    solver_opts(p)

    p = sub.add_parser("beta-sweep", help="approach to the unregularized SDP")
    common(p, "csv")
    p.add_argument("--beta-list", type=_float_list, required=True)
    solver_opts(p)

    p = sub.add_parser("validate-sampler", help="KS test of Gibbs draws (k=2)")
    common(p, "csv")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--samples", type=_nonneg_int, default=5000)
    p.add_argument("--seed", type=_seed)
    chain_opts(p)
    return parser


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is None:
        args.seed = secrets.randbits(64)
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _report_csv(report: SolveReport) -> str:
    d = report.to_dict()
    row = {"q_star": d["q_star"], "iterations": d["iterations"],
           "residual": d["residual"], "converged": d["converged"]}
    k = len(d["lambda"])
    for i in range(k):
        row[f"lambda_{i + 1}"] = d["lambda"][i]
    for name in ("S_star", "R_star"):
        mat = d[name]
        for i in range(k):
            for j in range(k):
                row[f"{name}_{i + 1}_{j + 1}"] = float("nan") if mat is None else mat[i][j]
    return render_table([row], list(row), "csv")


def cmd_solve(args) -> int:
    A = read_matrix(args.matrix)
    params = validate_params(A, args.beta, A.shape[0] + 1)
    code = EXIT_OK
    try:
        report = solve_regularized(params.A, args.beta, tol=args.tol, max_iter=args.max_iter)
    except SolverError as exc:
        print(f"spherelift: {exc}", file=sys.stderr)
        report, code = exc.report, EXIT_NONCONVERGED
    text = report.to_json() if args.format == "json" else _report_csv(report)
    atomic_write(args.out, text)
    return code


def _pair_columns(k):
    return [f"s_{i + 1}_{j + 1}" for i, j in zip(*np.triu_indices(k, 1))]


def _draw(args, params, rng):
    """List of spin samples from the requested sampler."""
    if args.samples == 0:
        return []
    if args.sampler == "approx":
        report = solve_regularized(params.A, params.beta, tol=args.tol, max_iter=args.max_iter)
        return [approx_sample(report.R_star, params.n, rng) for _ in range(args.samples)]
    opts = ChainOptions(args.burn_in, args.thin, args.grid_size)
    samples, _ = exact_samples(params, args.samples, rng, opts)
    return samples


def _batch_header(args, params):
    return {"k": params.k, "n": params.n, "beta": params.beta, "seed": args.seed,
            "sampler": args.sampler, "burn_in": args.burn_in, "thin": args.thin}


def _emit(args, rows, columns, header):
    if args.format == "csv":
        text = render_table(rows, columns, "csv", header)
    else:
        text = render_jsonl(rows, columns, header)
    atomic_write(args.out, text)


def cmd_sample(args) -> int:
    A = read_matrix(args.matrix)
    params = validate_params(A, args.beta, args.n)
    rng = RngStream(_resolve_seed(args), 0)
    cols = _pair_columns(params.k)
    iu = np.triu_indices(params.k, 1)
    rows = []
    for idx, x in enumerate(_draw(args, params, rng)):
        row = {"sample": idx}
        row.update(zip(cols, (float(v) for v in x.gram()[iu])))
        rows.append(row)
    _emit(args, rows, ["sample"] + cols, _batch_header(args, params))
    return EXIT_OK


def cmd_round(args) -> int:
    A = read_matrix(args.matrix)
    params = validate_params(A, args.beta, args.n)
    rng = RngStream(_resolve_seed(args), 0)
    cols = [f"sign_{i + 1}" for i in range(params.k)]
    rows = []
    for idx, x in enumerate(_draw(args, params, rng)):
        row = {"sample": idx}
        row.update(zip(cols, (int(v) for v in hyperplane_round(x, rng))))
        rows.append(row)
    _emit(args, rows, ["sample"] + cols, _batch_header(args, params))
    return EXIT_OK


def _experiment(args, runner, **config_kw) -> int:
    A = read_matrix(args.matrix)
    validate_params(A, getattr(args, "beta", 0.0), A.shape[0] + 1)
    config = ExperimentConfig(A=A, matrix_path=str(args.matrix), output_path=args.out,
                              format=args.format, tol=getattr(args, "tol", DEFAULT_TOL),
                              **config_kw)
    try:
        result = runner(config)
    except SolverError as exc:
        print(f"spherelift: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    atomic_write(args.out, result.render(args.format))
    if not result.passed:
        failed = [name for name, ok in result.checks.items() if not ok]
        print(f"spherelift: check failed: {', '.join(sorted(failed))}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_free_energy(args) -> int:
    return _experiment(args, run_free_energy_gap, beta=args.beta, n_list=args.n_list)


def cmd_concentration(args) -> int:
    return _experiment(args, run_concentration, beta=args.beta, n_list=args.n_list,
                       samples_per_n=args.samples, seed=_resolve_seed(args),
                       burn_in=args.burn_in, thin=args.thin, grid_size=args.grid_size)


def cmd_beta_sweep(args) -> int:
    return _experiment(args, run_beta_sweep, beta=None, beta_list=args.beta_list)


def cmd_validate_sampler(args) -> int:
    return _experiment(args, run_sampler_validation, beta=args.beta, n=args.n,
                       samples_per_n=args.samples, seed=_resolve_seed(args),
                       burn_in=args.burn_in, thin=args.thin, grid_size=args.grid_size)


COMMANDS = {
    "solve": cmd_solve,
    "sample": cmd_sample,
    "round": cmd_round,
    "free-energy": cmd_free_energy,
    "concentration": cmd_concentration,
    "beta-sweep": cmd_beta_sweep,
    "validate-sampler": cmd_validate_sampler,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except SolverError as exc:
        print(f"spherelift: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (SphereliftError, OSError, ValueError) as exc:
        print(f"spherelift: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
