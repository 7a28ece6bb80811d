"""Samplers for the n-vector model.

A configuration factors as ``X = Q R`` with ``Q`` uniform on the Stiefel
manifold and independent of ``R``.  Two ways to get ``R``:

* approximate: fix ``R = R*``, the Cholesky factor of the SDP maximizer;
* exact: Gibbs-sample the strict upper triangle of ``R`` one coordinate at a
  time and rebuild the diagonal from the unit-column constraint.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInterval, DomainError, OutOfSupport, RankDeficient
from .model import (
    ModelParams,
    SpinSample,
    UpperREntries,
    _as_array,
    assemble_R,
    log_density_U,
)

log = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 2048
DEFAULT_BURN_IN = 500
DEFAULT_THIN = 5
DEGENERATE_RHO = 1e-12
# log-density drop that bounds the zoomed window of a conditional
ZOOM_LOG_DROP = 45.0

__all__ = [
    "RngStream", "GibbsState", "ChainOptions", "haar_stiefel", "approx_sample",
    "gibbs_sweep", "assemble_R", "run_chain", "exact_sample", "exact_samples",
    "hyperplane_round", "conditional_logpdf",
]


class RngStream:
    """Seeded random stream identified by ``(seed, stream_id)``.

    Backed by numpy's PCG64 seeded through ``SeedSequence(seed,
    spawn_key=(stream_id,))``, so distinct stream ids give independent
    streams and the sequence is reproducible on any platform.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def spawn(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


def _gen(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def haar_stiefel(n: int, k: int, rng) -> np.ndarray:
    """Uniform ``n x k`` matrix with orthonormal columns.

    QR of a Gaussian matrix with the signs fixed so the triangular factor
    has a positive diagonal; that normalization makes the law of ``Q``
    exactly Haar.
    """
    if not (n >= k >= 1):
        raise DomainError(f"need n >= k >= 1, got n={n}, k={k}")
    g = _gen(rng)
    for _ in range(2):
        G = g.standard_normal((n, k))
        Q, R = np.linalg.qr(G)
        d = np.diag(R)
        if np.min(np.abs(d)) > 1e-300 * max(1.0, np.max(np.abs(d))) and np.all(d != 0):
            return Q * np.sign(d)
    raise RankDeficient("Gaussian matrix was rank deficient twice")


def approx_sample(R_star, n: int, rng) -> SpinSample:
    """``X = Q R*`` with a fresh uniform ``Q``."""
    R = _as_array(R_star)
    k = R.shape[0]
    if n <= k:
        raise DomainError(f"need n > k, got n={n}, k={k}")
    return SpinSample(haar_stiefel(n, k, rng) @ R)


@dataclass(frozen=True)
class ChainOptions:
    burn_in: int = DEFAULT_BURN_IN
    thin: int = DEFAULT_THIN
    grid_size: int = DEFAULT_GRID_SIZE

    def __post_init__(self):
        if self.burn_in < 0 or self.thin < 1 or self.grid_size < 8:
            raise DomainError(f"invalid chain options {self}")


@dataclass(frozen=True)
class GibbsState:
    U: UpperREntries
    sweep_count: int = 0
    last_log_density: float = float("nan")
    degenerate_count: int = 0

    @classmethod
    def initial(cls, params: ModelParams, U: UpperREntries | None = None) -> "GibbsState":
        U = UpperREntries.zeros(params.k) if U is None else U
        return cls(U, 0, log_density_U(U, params), 0)


def _conditional_terms(i: int, j: int, R: np.ndarray, A: np.ndarray, n: int):
    """Coefficients of the conditional log-density of ``R_ij``.

    With every other entry fixed, ``tr(A R^T R)`` depends on column ``j``
    only through ``2 sum_{b != j} A_jb <r_j, r_b>``; as a function of
    ``x = R_ij`` that is ``x * u + R_jj(x) * w`` plus a constant, where
    ``R_jj(x) = sqrt(rho^2 - x^2)``.
    """
    col = R[:j, j]
    rho2 = 1.0 - (float(col @ col) - R[i, j] ** 2)
    a_row = A[j].copy()
    a_row[j] = 0.0
    u = float(a_row @ R[i])
    w = float(A[j, j + 1:] @ R[j, j + 1:])
    power = n - (j + 1) - 1
    return rho2, u, w, power


def _eval_conditional(x, rho2, u, w, power, scale):
    diag2 = np.maximum(rho2 - x * x, 0.0)
    logp = scale * (x * u + np.sqrt(diag2) * w)
    if power != 0:
        with np.errstate(divide="ignore"):
            logp = logp + 0.5 * power * np.log(diag2)
    return logp


def conditional_logpdf(x, i: int, j: int, R, params: ModelParams):
    """Log-density of ``R_ij`` given all other strict-upper entries of ``R``.

    Defined up to an additive constant.  ``R`` is a full upper-triangular
    factor; its current ``R_ij`` and ``R_jj`` are ignored.  Returns
    ``(logp, rho)`` where ``(-rho, rho)`` is the feasible interval.
    """
    R = np.asarray(R, dtype=float)
    rho2, u, w, power = _conditional_terms(i, j, R, params.A.entries, params.n)
    logp = _eval_conditional(np.asarray(x, dtype=float), rho2, u, w, power,
                             2.0 * params.beta * params.n)
    return logp, float(np.sqrt(max(rho2, 0.0)))


def _draw_from_grid(xs, logp, u: float) -> float:
    p = np.exp(logp - np.max(logp))
    cdf = np.empty_like(p)
    cdf[0] = 0.0
    np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(xs), out=cdf[1:])
    return float(np.interp(u * cdf[-1], cdf, xs))


def _sample_coordinate(i, j, R, A, n, scale, grid_size, u):
    rho2, cu, cw, power = _conditional_terms(i, j, R, A, n)
    rho = np.sqrt(max(rho2, 0.0))
    if rho <= DEGENERATE_RHO:
        raise DegenerateInterval(f"conditional support of R[{i},{j}] collapsed (rho={rho:.3g})")
    xs = np.linspace(-rho, rho, grid_size)
    logp = _eval_conditional(xs, rho2, cu, cw, power, scale)
    # re-grid onto the window holding all but ~exp(-ZOOM_LOG_DROP) of the mass
    keep = np.flatnonzero(logp >= np.max(logp) - ZOOM_LOG_DROP)
    lo, hi = max(keep[0] - 1, 0), min(keep[-1] + 1, grid_size - 1)
    if hi - lo < grid_size - 1:
        xs = np.linspace(xs[lo], xs[hi], grid_size)
        logp = _eval_conditional(xs, rho2, cu, cw, power, scale)
    x = _draw_from_grid(xs, logp, u)
    # keep strictly inside the open interval
    lim = rho * (1.0 - 1e-15)
    return min(max(x, -lim), lim)


def _sweep_inplace(R: np.ndarray, params: ModelParams, g: np.random.Generator,
                   grid_size: int) -> int:
    """Systematic scan over the strict upper triangle; returns skipped count."""
    A = params.A.entries
    n = params.n
    scale = 2.0 * params.beta * n
    skipped = 0
    for i, j in zip(*np.triu_indices(params.k, 1)):
        u = g.random()
        try:
            x = _sample_coordinate(i, j, R, A, n, scale, grid_size, u)
        except DegenerateInterval:
            skipped += 1
            log.warning("skipping degenerate update of R[%d,%d]", i, j)
            continue
        R[i, j] = x
        slack = 1.0 - float(R[:j, j] @ R[:j, j])
        if slack <= 0.0:
            raise OutOfSupport(f"update of R[{i},{j}] left the support")
        R[j, j] = np.sqrt(slack)
    return skipped


def gibbs_sweep(state: GibbsState, params: ModelParams, rng,
                grid_size: int = DEFAULT_GRID_SIZE) -> GibbsState:
    """One systematic-scan sweep over the strict upper triangle of ``R``.

    Row-major order.  Each coordinate is redrawn from its exact conditional
    by inverse-CDF sampling on a uniform log-space grid, consuming exactly
    one uniform variate.
    """
    R = assemble_R(state.U).entries.copy()
    skipped = _sweep_inplace(R, params, _gen(rng), grid_size)
    U = UpperREntries.from_matrix(R)
    return GibbsState(U, state.sweep_count + 1, log_density_U(U, params),
                      state.degenerate_count + skipped)


def run_chain(params: ModelParams, count: int, rng, opts: ChainOptions = ChainOptions(),
              init: UpperREntries | None = None):
    """Yield ``count`` Gibbs states after burn-in, ``thin`` sweeps apart."""
    g = _gen(rng)
    state = GibbsState.initial(params, init)
    R = assemble_R(state.U).entries.copy()
    sweeps, skipped = 0, 0
    for _ in range(opts.burn_in):
        skipped += _sweep_inplace(R, params, g, opts.grid_size)
        sweeps += 1
    for _ in range(count):
        for _ in range(opts.thin):
            skipped += _sweep_inplace(R, params, g, opts.grid_size)
            sweeps += 1
        U = UpperREntries.from_matrix(R)
        yield GibbsState(U, sweeps, log_density_U(U, params), skipped)


def exact_samples(params: ModelParams, count: int, rng,
                  opts: ChainOptions = ChainOptions(), init=None):
    """``count`` draws ``X = Q R`` with ``R`` from one thinned Gibbs chain.

    Returns ``(samples, Rs)``: a list of :class:`SpinSample` and the
    matching list of ``R`` factors.  ``Q`` draws use the same stream,
    interleaved after each retained chain state.
    """
    g = _gen(rng)
    samples, Rs = [], []
    for state in run_chain(params, count, g, opts, init):
        R = assemble_R(state.U).entries
        Q = haar_stiefel(params.n, params.k, g)
        samples.append(SpinSample(Q @ R))
        Rs.append(R)
    return samples, Rs


def exact_sample(params: ModelParams, opts: ChainOptions, rng) -> SpinSample:
    """A single exact draw: burn in, thin once, multiply by a uniform ``Q``."""
    samples, _ = exact_samples(params, 1, rng, opts)
    return samples[0]


def hyperplane_round(X, rng) -> np.ndarray:
    """Signs of the projections of each spin onto a Gaussian direction.

    An exact zero projection maps to ``+1``.
    """
    x = X.X if isinstance(X, SpinSample) else np.asarray(X, dtype=float)
    v = _gen(rng).standard_normal(x.shape[0])
    return np.where(v @ x >= 0.0, 1, -1).astype(int)
