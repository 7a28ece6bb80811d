"""Independent reference computations for small ``k``.

Nothing here calls the SDP solver or the samplers.  ``k = 2`` reduces to a
single correlation ``s`` with density proportional to
``exp(2 beta n A_12 s) (1 - s^2)^((n - 3) / 2)`` on ``(-1, 1)``; ``k = 3`` is
integrated on a brute-force grid over the three correlations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import CostGuard, DimensionMismatch, DomainError
from .model import ModelParams


@dataclass(frozen=True)
class QuadratureSpec:
    """Uniform grid of ``points`` nodes inset half a step from each endpoint."""

    points: int = 20001

    def __post_init__(self):
        if self.points < 1001 or self.points % 2 == 0:
            raise DomainError(f"points must be odd and >= 1001, got {self.points}")

    def nodes(self, lo: float = -1.0, hi: float = 1.0):
        h = (hi - lo) / self.points
        return lo + h * (np.arange(self.points) + 0.5), h


def k2_stationary(a: float, beta: float) -> float:
    """Unique root in ``(-1, 1)`` of ``2 beta a = s / (1 - s^2)`` by bisection."""
    c = 2.0 * beta * a
    if c == 0.0:
        return 0.0
    lo, hi = (0.0, 1.0) if c > 0 else (-1.0, 0.0)
    # s / (1 - s^2) is increasing on (-1, 1)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid / (1.0 - mid * mid) < c:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16:
            break
    return 0.5 * (lo + hi)


def k2_objective(s: float, a: float, beta: float, trace_A: float = 0.0) -> float:
    """Regularized SDP objective restricted to ``k = 2``."""
    return beta * (trace_A + 2.0 * a * s) + 0.5 * np.log1p(-s * s)


def _check_k(params: ModelParams, k: int):
    if params.k != k:
        raise DimensionMismatch(f"oracle needs k={k}, got k={params.k}")


def _k2_log_weights(params: ModelParams, spec: QuadratureSpec):
    s, h = spec.nodes()
    n = params.n
    a12 = params.A.entries[0, 1]
    base = 0.5 * (n - 3) * np.log1p(-s * s) + np.log(h)
    return s, base, base + 2.0 * params.beta * n * a12 * s


def k2_log_partition_ratio(params: ModelParams, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """``ln(Z_n(beta) / Z_n(0))`` for ``k = 2`` by log-space quadrature."""
    _check_k(params, 2)
    _, base, tilted = _k2_log_weights(params, spec)
    diag = params.beta * params.n * float(np.trace(params.A.entries))
    return diag + float(logsumexp(tilted) - logsumexp(base))


def k2_moment(params: ModelParams, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """``E[s]`` for ``k = 2``."""
    _check_k(params, 2)
    s, _, tilted = _k2_log_weights(params, spec)
    w = np.exp(tilted - np.max(tilted))
    return float(np.sum(w * s) / np.sum(w))


def k2_cdf(params: ModelParams, spec: QuadratureSpec = QuadratureSpec()):
    """Callable CDF of ``s`` for ``k = 2`` built from the quadrature weights."""
    _check_k(params, 2)
    s, _, tilted = _k2_log_weights(params, spec)
    w = np.exp(tilted - np.max(tilted))
    h = s[1] - s[0]
    # each node carries the mass of its cell [s - h/2, s + h/2]
    edges = np.concatenate(([-1.0], s + 0.5 * h))
    cum = np.concatenate(([0.0], np.cumsum(w)))
    cum /= cum[-1]
    edges[-1] = 1.0

    def cdf(x):
        return np.interp(x, edges, cum, left=0.0, right=1.0)

    return cdf


def gw_value_k2(A) -> float:
    """Unregularized SDP value ``max tr(A S)`` for ``k = 2``: ``tr A + 2 |A_12|``."""
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2):
        raise DimensionMismatch("gw_value_k2 needs a 2x2 matrix")
    return float(np.trace(A) + 2.0 * abs(A[0, 1]))


K3_MAX_N = 200
K3_MAX_GRID = 201


@dataclass(frozen=True)
class K3Moments:
    E_S: np.ndarray
    log_ratio: float


def k3_grid_moments(params: ModelParams, grid: int = 201) -> K3Moments:
    """Brute-force ``E[S]`` and ``ln(Z(beta)/Z(0))`` for ``k = 3``.

    The correlations ``(S_12, S_13, S_23)`` range over a half-step-inset
    uniform grid on ``(-1, 1)^3``.  Points where ``S`` is not positive
    definite get zero weight; for a unit-diagonal ``3 x 3`` matrix that is
    exactly the failure set of its Cholesky factorization
    (``|S_12| < 1`` and ``det S > 0``).
    """
    _check_k(params, 3)
    n = params.n
    if n > K3_MAX_N or grid > K3_MAX_GRID:
        raise CostGuard(f"k3 grid oracle limited to n <= {K3_MAX_N}, grid <= {K3_MAX_GRID}")
    if grid < 3:
        raise DomainError("grid must be >= 3")
    h = 2.0 / grid
    t = -1.0 + h * (np.arange(grid) + 0.5)
    A = params.A.entries
    coeff = 2.0 * params.beta * n
    a12, a13, a23 = A[0, 1], A[0, 2], A[1, 2]
    power = 0.5 * (n - 3 - 1)

    # one S_12 slice at a time; each slice keeps its own max for stability
    b, c = np.meshgrid(t, t, indexing="ij")
    slice_max = np.full(grid, -np.inf)
    sums = np.zeros((grid, 4))  # sum w, sum w*S12, sum w*S13, sum w*S23
    lse_0 = np.empty(grid)
    for idx, a in enumerate(t):
        det = 1.0 + 2.0 * a * b * c - a * a - b * b - c * c
        ok = det > 0.0
        base = np.full(det.shape, -np.inf)
        base[ok] = power * np.log(det[ok])
        lw = base + coeff * (a12 * a + a13 * b + a23 * c)
        lse_0[idx] = logsumexp(base)
        mx = np.max(lw)
        if not np.isfinite(mx):
            continue
        w = np.exp(lw - mx)
        slice_max[idx] = mx
        sums[idx] = (np.sum(w), a * np.sum(w), np.sum(w * b), np.sum(w * c))
    gmax = np.max(slice_max)
    scaled = np.exp(slice_max - gmax)[:, None] * sums
    tot = scaled.sum(axis=0)
    log_z = gmax + np.log(tot[0])
    e12, e13, e23 = tot[1:] / tot[0]
    E = np.eye(3)
    E[0, 1] = E[1, 0] = e12
    E[0, 2] = E[2, 0] = e13
    E[1, 2] = E[2, 1] = e23
    diag = params.beta * n * float(np.trace(A))
    return K3Moments(E, diag + float(log_z - logsumexp(lse_0)))


def grothendieck_prob(rho: float) -> float:
    """Probability that a random hyperplane puts two unit vectors with inner
    product ``rho`` on the same side: ``1 - arccos(rho) / pi``."""
    if not (-1.0 <= rho <= 1.0):
        raise DomainError(f"rho must lie in [-1, 1], got {rho}")
    return 1.0 - float(np.arccos(rho)) / np.pi
