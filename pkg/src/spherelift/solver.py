"""Log-det regularized Goemans-Williamson SDP.

Maximize ``beta * tr(A S) + 0.5 * logdet(S)`` over PSD ``S`` with unit
diagonal.  Stationarity gives ``S = (Diag(lam) - 2 beta A)^{-1}`` for a
vector of multipliers ``lam``, so the whole problem reduces to the
``k``-dimensional root-find ``diag(S(lam)) = 1``.  Its Jacobian is
``-(S o S)``, which is negative definite whenever ``S`` is, and Newton's
method on it converges quadratically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    DomainError,
    LineSearchStalled,
    MaxIterExceeded,
    MonotonicityViolation,
    NotPositiveDefinite,
)
from .model import (
    CholeskyFactor,
    ElliptopeMatrix,
    InteractionMatrix,
    _as_array,
    chol_logdet,
    energy,
)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200
MAX_HALVINGS = 60


@dataclass(frozen=True)
class DualVector:
    """Multipliers with ``Diag(lam) - 2 beta A`` positive definite."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class SolveReport:
    q_star: float
    S_star: object  # ElliptopeMatrix when converged, raw ndarray otherwise
    R_star: CholeskyFactor | None
    lam: DualVector
    iterations: int
    residual: float
    converged: bool
    beta: float = float("nan")

    @property
    def S(self) -> np.ndarray:
        return _as_array(self.S_star)

    @property
    def R(self) -> np.ndarray | None:
        return None if self.R_star is None else self.R_star.entries

    def to_dict(self) -> dict:
        return {
            "q_star": float(self.q_star),
            "S_star": self.S.tolist(),
            "R_star": None if self.R is None else self.R.tolist(),
            "lambda": self.lam.values.tolist(),
            "iterations": int(self.iterations),
            "residual": float(self.residual),
            "converged": bool(self.converged),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def objective(S, A, beta: float) -> float:
    """``beta * tr(A S) + 0.5 * logdet(S)``; raises on a non-PD ``S``."""
    return beta * energy(S, A) + 0.5 * chol_logdet(_as_array(S))


def _factor(lam, A2b):
    """Cholesky of ``Diag(lam) - 2 beta A`` or ``None`` if not PD."""
    M = np.diag(lam) - A2b
    try:
        c = scipy.linalg.cho_factor(M, lower=False, check_finite=False)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.diag(c[0]) > 0) or not np.all(np.isfinite(c[0])):
        return None
    return c


def _inverse(c, k):
    S = scipy.linalg.cho_solve(c, np.eye(k), check_finite=False)
    return 0.5 * (S + S.T)


def dual_to_primal(lam, A, beta: float) -> np.ndarray:
    """``S(lam) = (Diag(lam) - 2 beta A)^{-1}`` via a Cholesky solve."""
    lam = lam.values if isinstance(lam, DualVector) else np.asarray(lam, dtype=float)
    a = _as_array(A)
    if lam.shape != (a.shape[0],):
        raise DimensionMismatch(f"lambda has shape {lam.shape}, A is {a.shape}")
    c = _factor(lam, 2.0 * beta * a)
    if c is None:
        raise NotPositiveDefinite("Diag(lambda) - 2 beta A is not positive definite")
    return _inverse(c, a.shape[0])


def default_lambda(A, beta: float) -> np.ndarray:
    """Strictly diagonally dominant start: ``2 beta sum_j |A_ij| + 1``."""
    a = _as_array(A)
    return 2.0 * beta * np.sum(np.abs(a), axis=1) + 1.0


def cholesky_upper(S) -> CholeskyFactor:
    """Right Cholesky factor ``R`` with ``R^T R = S`` and ``R_jj > 0``."""
    s = _as_array(S)
    try:
        R = scipy.linalg.cholesky(s, lower=False, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("matrix is not positive definite") from exc
    if not np.all(np.diag(R) > 0) or not np.all(np.isfinite(R)):
        raise NotPositiveDefinite("matrix is not positive definite")
    R = np.triu(R)
    # unit diagonal of S means unit columns of R up to rounding; renormalize
    R /= np.linalg.norm(R, axis=0)
    return CholeskyFactor(R)


def solve_regularized(A, beta: float, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER, lam0=None) -> SolveReport:
    """Solve the regularized SDP by damped Newton on the dual system.

    Parameters
    ----------
    A : InteractionMatrix or array_like
        Symmetric coupling matrix.
    beta : float
        Inverse temperature, ``>= 0``.
    tol : float
        Stop when ``max |diag(S) - 1| <= tol``.
    max_iter : int
        Newton iteration cap.
    lam0 : array_like, optional
        Starting multipliers; must keep ``Diag(lam0) - 2 beta A`` PD.
        Defaults to :func:`default_lambda`.

    Returns
    -------
    SolveReport
        On success the diagonal of ``S_star`` is snapped to exactly one;
        ``residual`` is the pre-snap value.

    Raises
    ------
    MaxIterExceeded, LineSearchStalled
        Both carry the last iterate as ``exc.report`` with
        ``converged=False``.
    """
    a = _as_array(A)
    if isinstance(A, InteractionMatrix):
        A_mat = A
    else:
        A_mat = InteractionMatrix(a)
    if not np.isfinite(beta) or beta < 0:
        raise DomainError(f"beta must be finite and >= 0, got {beta}")
    k = a.shape[0]
    A2b = 2.0 * beta * a

    lam = default_lambda(a, beta) if lam0 is None else np.array(lam0, dtype=float)
    c = _factor(lam, A2b)
    if c is None:
        if lam0 is None:
            raise NotPositiveDefinite("default initialization is not PD")
        lam = default_lambda(a, beta)
        c = _factor(lam, A2b)
    S = _inverse(c, k)
    g = np.diag(S) - 1.0
    gnorm = float(np.max(np.abs(g)))

    it = 0
    while gnorm > tol:
        if it >= max_iter:
            raise MaxIterExceeded(
                f"no convergence after {max_iter} iterations (residual {gnorm:.3g})",
                _partial_report(S, a, beta, lam, it, gnorm))
        it += 1
        H = S * S
        try:
            delta = scipy.linalg.solve(H, g, assume_a="pos", check_finite=False)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(H, g, rcond=None)[0]
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = lam + t * delta
            c_new = _factor(trial, A2b)
            if c_new is not None:
                S_new = _inverse(c_new, k)
                g_new = np.diag(S_new) - 1.0
                gn_new = float(np.max(np.abs(g_new)))
                if gn_new <= gnorm:
                    break
            t *= 0.5
        else:
            raise LineSearchStalled(
                f"step halving failed at iteration {it} (residual {gnorm:.3g})",
                _partial_report(S, a, beta, lam, it, gnorm))
        lam, S, g, gnorm = trial, S_new, g_new, gn_new

    S = S.copy()
    S[np.diag_indices(k)] = 1.0
    # entries can overshoot +-1 by an ulp when S is near singular
    np.clip(S, -1.0, 1.0, out=S)
    S_star = ElliptopeMatrix(S)
    return SolveReport(
        q_star=objective(S_star, A_mat, beta),
        S_star=S_star,
        R_star=cholesky_upper(S_star),
        lam=DualVector(lam),
        iterations=it,
        residual=gnorm,
        converged=True,
        beta=float(beta),
    )


def _partial_report(S, a, beta, lam, it, gnorm) -> SolveReport:
    try:
        q = beta * float(np.sum(a * S)) + 0.5 * chol_logdet(S)
    except NotPositiveDefinite:
        q = float("nan")
    return SolveReport(q_star=q, S_star=np.array(S), R_star=None, lam=DualVector(lam),
                       iterations=it, residual=gnorm, converged=False, beta=float(beta))


def kkt_residual(report: SolveReport, A, beta: float) -> float:
    """``max |beta A + 0.5 S^{-1} - Diag(lam / 2)|`` at the reported point."""
    a = _as_array(A)
    Sinv = np.linalg.inv(report.S)
    M = beta * a + 0.5 * Sinv - np.diag(report.lam.values / 2.0)
    return float(np.max(np.abs(M)))


@dataclass(frozen=True)
class MaxcutPath:
    betas: list
    values: list
    gaps_model: list
    reports: list


def maxcut_gap_bound(beta: float, q_ref: float, trace_A: float, k: int) -> float:
    """Upper bound on ``q_ref - tr(A S*_beta)`` from the interpolation
    ``S(alpha) = alpha S_gw + (1 - alpha) I`` with ``1 - alpha = 1/beta``.
    """
    return (q_ref - trace_A + 0.5 * k * np.log(beta)) / beta


def solve_maxcut_limit(A, beta_schedule, q_ref=None, tol: float = DEFAULT_TOL,
                       max_iter: int = DEFAULT_MAX_ITER) -> MaxcutPath:
    """Follow ``tr(A S*_beta)`` along an ascending schedule of ``beta >= 1``.

    Each solve is warm-started from the previous multipliers scaled by the
    ratio of consecutive betas, which keeps the start PD.  ``gaps_model``
    holds the envelope bound for each beta when the unregularized SDP value
    ``q_ref`` is supplied, else ``None`` entries.
    """
    betas = [float(b) for b in beta_schedule]
    if not betas:
        raise DomainError("empty beta schedule")
    if any(b < 1.0 for b in betas):
        raise DomainError("beta schedule entries must be >= 1")
    if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise DomainError("beta schedule must be strictly ascending")
    a = _as_array(A)
    k = a.shape[0]
    values, gaps, reports = [], [], []
    lam = None
    prev = None
    for b in betas:
        lam0 = None if lam is None else lam * (b / prev)
        rep = solve_regularized(a, b, tol=tol, max_iter=max_iter, lam0=lam0)
        reports.append(rep)
        values.append(energy(rep.S, a))
        gaps.append(None if q_ref is None else maxcut_gap_bound(b, q_ref, float(np.trace(a)), k))
        lam, prev = rep.lam.values, b
    for v1, v2 in zip(values, values[1:]):
        if v2 < v1 - 1e-9:
            raise MonotonicityViolation(f"energy decreased along the schedule: {v1} -> {v2}")
    return MaxcutPath(betas, values, gaps, reports)
