"""Desk-scale experiments probing the large-n limit.

Each ``run_*`` function is a pure function of its configuration and seed and
returns an :class:`ExperimentResult`: table rows, the column order, named
pass/fail checks, and a provenance header.  Rendering the same result twice
gives byte-identical output.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DimensionMismatch, DomainError
from .io import git_describe, render_table
from .model import ModelParams, _as_array, validate_params
from .oracle import QuadratureSpec, gw_value_k2, k2_cdf, k2_log_partition_ratio
from .sampler import ChainOptions, RngStream, exact_samples
from .solver import DEFAULT_TOL, solve_maxcut_limit, solve_regularized

SLOPE_WINDOW = (-0.65, -0.35)
CHOLESKY_RATIO_SPREAD = 5.0
FREE_ENERGY_SLOPE_TOL = 0.5
KS_ALPHA = 0.01


@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs shared by the experiment runners.

    ``A`` is the raw interaction matrix; ``matrix_path`` is kept only for
    the provenance header.
    """

    A: np.ndarray
    beta: float | None = 1.0
    n_list: tuple = ()
    beta_list: tuple = ()
    samples_per_n: int = 400
    seed: int = 0
    burn_in: int = 500
    thin: int = 5
    grid_size: int = 2048
    n: int | None = None
    matrix_path: str | None = None
    output_path: str | None = None
    format: str = "csv"
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        object.__setattr__(self, "A", np.asarray(_as_array(self.A), dtype=float))
        object.__setattr__(self, "n_list", tuple(int(v) for v in self.n_list))
        object.__setattr__(self, "beta_list", tuple(float(v) for v in self.beta_list))
        k = self.A.shape[0]
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise DomainError("n_list must be strictly ascending")
        if any(v <= k for v in self.n_list):
            raise DomainError(f"every n in n_list must exceed k={k}")
        if self.format not in ("csv", "json"):
            raise DomainError(f"format must be csv or json, got {self.format!r}")

    @property
    def k(self) -> int:
        return self.A.shape[0]

    def chain_options(self) -> ChainOptions:
        return ChainOptions(self.burn_in, self.thin, self.grid_size)


@dataclass
class ExperimentResult:
    name: str
    columns: list
    rows: list
    checks: dict = field(default_factory=dict)
    header: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def render(self, fmt: str = "csv") -> str:
        header = dict(self.header)
        for name, ok in sorted(self.checks.items()):
            header[f"check.{name}"] = "pass" if ok else "FAIL"
        return render_table(self.rows, self.columns, fmt, header)


def _threads() -> int:
    env = os.environ.get("SPHERELIFT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _map_cells(fn, cells):
    """Evaluate independent cells, possibly in parallel; result order follows ``cells``."""
    workers = min(_threads(), len(cells)) or 1
    if workers == 1:
        return [fn(c) for c in cells]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, cells))


def _provenance(config: ExperimentConfig, **extra) -> dict:
    h = {
        "git": git_describe(),
        "matrix": config.matrix_path or "<inline>",
        "k": config.k,
        "seed": config.seed,
        "solver_tol": config.tol,
    }
    if config.beta is not None:
        h["beta"] = config.beta
    h.update(extra)
    return h


def loglog_slope(ns, values) -> float:
    """Least-squares slope of ``log(values)`` against ``log(ns)``."""
    return float(np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(values, float)), 1)[0])


def run_concentration(config: ExperimentConfig) -> ExperimentResult:
    """Median distance of sampled ``S`` and ``R`` from ``S*`` and ``R*`` per ``n``.

    Each ``n`` owns an independent Gibbs chain (stream id = position in
    ``n_list``).  Checks: both log-log slopes inside ``SLOPE_WINDOW`` and
    the ratio ``median_err_R / median_err_S`` bounded across ``n``.
    """
    if len(config.n_list) < 2:
        raise DomainError("concentration needs at least two values of n")
    report = solve_regularized(config.A, config.beta, tol=config.tol)
    S_star, R_star = report.S, report.R
    opts = config.chain_options()

    def cell(item):
        idx, n = item
        params = validate_params(config.A, config.beta, n)
        samples, Rs = exact_samples(params, config.samples_per_n,
                                    RngStream(config.seed, idx), opts)
        err_S = [np.linalg.norm(x.gram() - S_star) for x in samples]
        err_R = [np.linalg.norm(R - R_star) for R in Rs]
        return n, float(np.median(err_S)), float(np.median(err_R))

    cells = _map_cells(cell, list(enumerate(config.n_list)))
    ns = [c[0] for c in cells]
    med_S = [c[1] for c in cells]
    med_R = [c[2] for c in cells]
    slope_S = loglog_slope(ns, med_S)
    slope_R = loglog_slope(ns, med_R)
    rows = [{"n": n, "median_err_S": s, "median_err_R": r,
             "fitted_slope": slope_S, "fitted_slope_R": slope_R}
            for n, s, r in zip(ns, med_S, med_R)]
    ratio = np.array(med_R) / np.array(med_S)
    lo, hi = SLOPE_WINDOW
    checks = {
        "slope_S_in_window": lo <= slope_S <= hi,
        "slope_R_in_window": lo <= slope_R <= hi,
        "cholesky_ratio_bounded": bool(np.max(ratio) / np.min(ratio) <= CHOLESKY_RATIO_SPREAD),
    }
    header = _provenance(config, samples_per_n=config.samples_per_n,
                         burn_in=config.burn_in, thin=config.thin,
                         grid_size=config.grid_size,
                         slope_window=f"[{lo}, {hi}]")
    return ExperimentResult(
        "concentration",
        ["n", "median_err_S", "median_err_R", "fitted_slope", "fitted_slope_R"],
        rows, checks, header,
        extras={"slope_S": slope_S, "slope_R": slope_R, "S_star": S_star, "R_star": R_star})


def run_free_energy_gap(config: ExperimentConfig, gap_bound: float | None = None,
                        spec: QuadratureSpec = QuadratureSpec()) -> ExperimentResult:
    """``Q_n - n q*`` for ``k = 2``, with ``Q_n`` from quadrature.

    Checks: the gap is finite; its least-squares slope against ``ln n`` has
    magnitude at most ``FREE_ENERGY_SLOPE_TOL``; and, when ``gap_bound`` is
    given, ``max |gap| <= gap_bound``.
    """
    if config.k != 2:
        raise DimensionMismatch("free-energy gap experiment needs k = 2")
    if not config.n_list:
        raise DomainError("n_list is empty")
    q_star = solve_regularized(config.A, config.beta, tol=config.tol).q_star
    rows = []
    for n in config.n_list:
        Q = k2_log_partition_ratio(validate_params(config.A, config.beta, n), spec)
        rows.append({"n": n, "Q_n": Q, "n_q_star": n * q_star, "gap": Q - n * q_star})
    gaps = np.array([r["gap"] for r in rows])
    checks = {"gap_finite": bool(np.all(np.isfinite(gaps)))}
    slope = float("nan")
    if len(rows) >= 2:
        slope = float(np.polyfit(np.log(config.n_list), gaps, 1)[0])
        checks["gap_slope_vs_log_n"] = abs(slope) <= FREE_ENERGY_SLOPE_TOL
    if gap_bound is not None:
        checks["gap_bounded"] = bool(np.max(np.abs(gaps)) <= gap_bound)
    header = _provenance(config, quadrature_points=spec.points,
                         slope_tol=FREE_ENERGY_SLOPE_TOL,
                         gap_bound="none" if gap_bound is None else gap_bound)
    return ExperimentResult("free-energy", ["n", "Q_n", "n_q_star", "gap"], rows, checks,
                            header, extras={"q_star": q_star, "slope": slope,
                                            "max_abs_gap": float(np.max(np.abs(gaps)))})


def run_beta_sweep(config: ExperimentConfig) -> ExperimentResult:
    """``tr(A S*_beta)`` along an ascending beta list.

    For ``k = 2`` the unregularized SDP value is known in closed form, and
    each row also carries the gap to it and the interpolation envelope
    ``(q_gw - tr A + (k/2) ln beta) / beta``; the check asserts
    ``gap <= envelope + 1e-9``.  For other ``k`` those columns are NaN and
    only monotonicity of ``tr(A S*_beta)`` is checked.
    """
    betas = config.beta_list
    if not betas:
        raise DomainError("beta_list is empty")
    if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise DomainError("beta_list must be strictly ascending")
    if any(b < 1.0 for b in betas):
        raise DomainError("beta_list entries must be >= 1")
    A = config.A
    q_gw = gw_value_k2(A) if config.k == 2 else None
    path = solve_maxcut_limit(A, betas, q_ref=q_gw, tol=config.tol)
    rows = []
    for b, v, env in zip(path.betas, path.values, path.gaps_model):
        gap = float("nan") if q_gw is None else q_gw - v
        rows.append({"beta": b, "tr_AS": v, "gap_to_sdp_bound": gap,
                     "envelope": float("nan") if env is None else env})
    checks = {"tr_AS_nondecreasing": all(
        r2["tr_AS"] >= r1["tr_AS"] - 1e-9 for r1, r2 in zip(rows, rows[1:]))}
    if q_gw is not None:
        checks["gap_within_envelope"] = all(r["gap_to_sdp_bound"] <= r["envelope"] + 1e-9 for r in rows)
    header = _provenance(config, beta_list=" ".join(repr(b) for b in betas),
                         q_gw="unknown" if q_gw is None else q_gw)
    return ExperimentResult("beta-sweep", ["beta", "tr_AS", "gap_to_sdp_bound", "envelope"],
                            rows, checks, header)


def run_sampler_validation(config: ExperimentConfig, init=None) -> ExperimentResult:
    """KS test of Gibbs draws of ``S_12`` against the quadrature CDF (``k = 2``).

    ``config.samples_per_n`` thinned draws at ``config.n``; passes when the
    p-value is at least ``KS_ALPHA``.
    """
    if config.k != 2:
        raise DimensionMismatch("sampler validation needs k = 2")
    if config.n is None:
        raise DomainError("sampler validation needs n")
    params: ModelParams = validate_params(config.A, config.beta, config.n)
    samples, _ = exact_samples(params, config.samples_per_n, RngStream(config.seed, 0),
                               config.chain_options(), init=init)
    s = np.array([x.gram()[0, 1] for x in samples])
    res = stats.kstest(s, k2_cdf(params))
    ok = bool(res.pvalue >= KS_ALPHA)
    rows = [{"n": params.n, "draws": len(s), "ks_statistic": float(res.statistic),
             "p_value": float(res.pvalue), "pass": ok}]
    header = _provenance(config, n=params.n, burn_in=config.burn_in, thin=config.thin,
                         grid_size=config.grid_size, alpha=KS_ALPHA)
    return ExperimentResult("validate-sampler",
                            ["n", "draws", "ks_statistic", "p_value", "pass"],
                            rows, {"ks_test": ok}, header)
