"""Domain types and log-densities of the spherical n-vector model.

The model over ``k`` sites with spins on the unit sphere of ``R^n`` has the
unnormalized density ``exp(beta * n * sum_ij <x_i, x_j> A_ij)`` restricted to
unit-norm spins.  Everything here works in log-space; the
``det(S) ** ((n - k - 1) / 2)`` factor overflows a double long before ``n``
gets interesting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import (
    AsymmetryTooLarge,
    DimensionMismatch,
    DomainError,
    NonFinite,
    NonSquare,
    NotOverparameterized,
    NotPositiveDefinite,
    OutOfSupport,
    ValidationError,
)

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10
UNIT_NORM_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class InteractionMatrix:
    """Symmetric ``k x k`` coupling matrix."""

    entries: np.ndarray

    def __post_init__(self):
        a = _frozen(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise NonSquare(f"interaction matrix must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise NonFinite("interaction matrix has non-finite entries")
        if not np.array_equal(a, a.T):
            raise AsymmetryTooLarge("interaction matrix is not exactly symmetric")
        object.__setattr__(self, "entries", a)

    @property
    def k(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class ModelParams:
    A: InteractionMatrix
    beta: float
    n: int

    def __post_init__(self):
        if not np.isfinite(self.beta):
            raise NonFinite(f"beta must be finite, got {self.beta}")
        if self.beta < 0:
            raise DomainError(f"beta must be >= 0, got {self.beta}")
        if int(self.n) != self.n:
            raise ValidationError(f"n must be an integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "beta", float(self.beta))
        if self.n <= self.A.k:
            raise NotOverparameterized(
                f"need n > k, got n={self.n}, k={self.A.k}")

    @property
    def k(self) -> int:
        return self.A.k


@dataclass(frozen=True)
class ElliptopeMatrix:
    """PSD matrix with unit diagonal, a point of the elliptope."""

    entries: np.ndarray

    def __post_init__(self):
        s = _frozen(self.entries)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise NonSquare(f"expected a square matrix, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise NonFinite("elliptope matrix has non-finite entries")
        if not np.array_equal(s, s.T):
            raise ValidationError("elliptope matrix must be exactly symmetric")
        if not np.all(np.diag(s) == 1.0):
            raise ValidationError("elliptope matrix must have unit diagonal")
        if np.any(np.abs(s) > 1.0):
            raise ValidationError("elliptope entries must lie in [-1, 1]")
        if np.linalg.eigvalsh(s)[0] < -PSD_TOL:
            raise ValidationError("elliptope matrix is not positive semidefinite")
        object.__setattr__(self, "entries", s)

    @property
    def k(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class LowerCorrelations:
    """Strict lower triangle of ``S``, ordered as ``np.tril_indices(k, -1)``."""

    k: int
    entries: np.ndarray

    def __post_init__(self):
        e = _frozen(np.ravel(self.entries))
        if e.size != self.k * (self.k - 1) // 2:
            raise DimensionMismatch(
                f"k={self.k} needs {self.k * (self.k - 1) // 2} entries, got {e.size}")
        object.__setattr__(self, "entries", e)

    @classmethod
    def from_matrix(cls, S) -> "LowerCorrelations":
        S = np.asarray(S, dtype=float)
        k = S.shape[0]
        return cls(k, S[np.tril_indices(k, -1)])


@dataclass(frozen=True)
class CholeskyFactor:
    """Upper-triangular ``R`` with positive diagonal and unit-norm columns."""

    entries: np.ndarray

    def __post_init__(self):
        r = _frozen(self.entries)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise NonSquare(f"expected a square matrix, got shape {r.shape}")
        if np.any(np.tril(r, -1) != 0.0):
            raise ValidationError("Cholesky factor must be upper triangular")
        if np.any(np.diag(r) <= 0.0):
            raise ValidationError("Cholesky factor needs a positive diagonal")
        norms = np.linalg.norm(r, axis=0)
        if np.max(np.abs(norms - 1.0)) > 1e-10:
            raise ValidationError("Cholesky factor columns must have unit norm")
        object.__setattr__(self, "entries", r)

    @property
    def k(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class UpperREntries:
    """Strict upper triangle of ``R``, ordered as ``np.triu_indices(k, 1)``.

    That ordering is row-major, which is also the Gibbs scan order.
    """

    k: int
    entries: np.ndarray

    def __post_init__(self):
        e = _frozen(np.ravel(self.entries))
        if e.size != self.k * (self.k - 1) // 2:
            raise DimensionMismatch(
                f"k={self.k} needs {self.k * (self.k - 1) // 2} entries, got {e.size}")
        object.__setattr__(self, "entries", e)

    @classmethod
    def zeros(cls, k: int) -> "UpperREntries":
        return cls(k, np.zeros(k * (k - 1) // 2))

    @classmethod
    def from_matrix(cls, R) -> "UpperREntries":
        R = np.asarray(R, dtype=float)
        k = R.shape[0]
        return cls(k, R[np.triu_indices(k, 1)])

    def strict_upper(self) -> np.ndarray:
        """The entries scattered into a ``k x k`` matrix with zero diagonal."""
        m = np.zeros((self.k, self.k))
        m[np.triu_indices(self.k, 1)] = self.entries
        return m

    def column_slack(self) -> np.ndarray:
        """``1 - sum_{i<j} R_ij^2`` per column; all must be positive."""
        return 1.0 - np.sum(self.strict_upper() ** 2, axis=0)


@dataclass(frozen=True)
class SpinSample:
    """``n x k`` configuration whose columns are the site spins."""

    X: np.ndarray
    tol: float = field(default=UNIT_NORM_TOL, repr=False)

    def __post_init__(self):
        x = _frozen(self.X)
        if x.ndim != 2:
            raise DimensionMismatch(f"spin sample must be 2-D, got shape {x.shape}")
        dev = np.max(np.abs(np.linalg.norm(x, axis=0) - 1.0)) if x.size else 0.0
        if dev > self.tol:
            raise ValidationError(f"spin columns deviate from unit norm by {dev:.3g}")
        object.__setattr__(self, "X", x)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]

    def gram(self) -> np.ndarray:
        """Empirical ``S = X^T X`` as a plain symmetric array."""
        g = self.X.T @ self.X
        return 0.5 * (g + g.T)


def _as_array(m) -> np.ndarray:
    if isinstance(m, (InteractionMatrix, ElliptopeMatrix, CholeskyFactor)):
        return m.entries
    return np.asarray(m, dtype=float)


def validate_params(A, beta, n) -> ModelParams:
    """Build :class:`ModelParams` from raw inputs.

    Asymmetry up to ``1e-12`` in max-norm is averaged away; anything larger
    is treated as a caller bug and raises :class:`AsymmetryTooLarge`.
    """
    a = np.asarray(A, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonSquare(f"interaction matrix must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)) or not np.isfinite(beta):
        raise NonFinite("non-finite interaction matrix or beta")
    asym = np.max(np.abs(a - a.T)) if a.size else 0.0
    if asym > SYMMETRY_TOL:
        raise AsymmetryTooLarge(f"max |A - A^T| = {asym:.3g} exceeds {SYMMETRY_TOL}")
    a = 0.5 * (a + a.T)
    return ModelParams(InteractionMatrix(a), beta, n)


def log_norm_const(n: int, k: int) -> float:
    """``ln C_{n,k}`` for the Wishart-type change of variables ``X -> X^T X``.

    ``C_{n,k} = (2 pi)^{nk/2} / c(n, k)`` with
    ``c(n, p) = pi^{(p^2 - p)/4} 2^{np/2} prod_{j=1}^{p} Gamma((n - j + 1)/2)``.
    """
    if not (n > k >= 1):
        raise DomainError(f"need n > k >= 1, got n={n}, k={k}")
    j = np.arange(1, k + 1)
    log_c = (k * k - k) / 4.0 * np.log(np.pi) + n * k / 2.0 * np.log(2.0)
    log_c += float(np.sum(gammaln((n - j + 1) / 2.0)))
    return n * k / 2.0 * np.log(2.0 * np.pi) - log_c


def assemble_S(L: LowerCorrelations) -> np.ndarray:
    low = np.zeros((L.k, L.k))
    low[np.tril_indices(L.k, -1)] = L.entries
    return np.eye(L.k) + low + low.T


def chol_logdet(S) -> float:
    """``logdet(S)`` through a Cholesky factorization.

    Raises :class:`NotPositiveDefinite` when the factorization fails.
    """
    try:
        c = np.linalg.cholesky(np.asarray(S, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("matrix is not positive definite") from exc
    d = np.diag(c)
    if np.any(d <= 0.0) or not np.all(np.isfinite(d)):
        raise NotPositiveDefinite("matrix is not positive definite")
    return 2.0 * float(np.sum(np.log(d)))


def energy(S, A) -> float:
    """``tr(A S)`` for symmetric ``A`` and ``S``."""
    s, a = _as_array(S), _as_array(A)
    if s.shape != a.shape:
        raise DimensionMismatch(f"shape mismatch {s.shape} vs {a.shape}")
    return float(np.sum(a * s))


def log_density_L(L: LowerCorrelations, params: ModelParams) -> float:
    """Log of the density of the strict lower triangle of ``S = X^T X``.

    Includes the ``2^k C_{n,k}`` prefactor, so the value is an unnormalized
    log-density with the exact constant of the change of variables.
    """
    k, n = params.k, params.n
    if L.k != k:
        raise DimensionMismatch(f"L has k={L.k}, params have k={k}")
    S = assemble_S(L)
    logdet = chol_logdet(S)
    return (k * np.log(2.0) + log_norm_const(n, k)
            + params.beta * n * energy(S, params.A)
            + (n - k - 1) / 2.0 * logdet)


def assemble_R(U: UpperREntries) -> CholeskyFactor:
    """Fill in ``R_jj = sqrt(1 - sum_{i<j} R_ij^2)`` below the given entries."""
    slack = U.column_slack()
    if np.any(slack <= 0.0):
        bad = int(np.argmin(slack))
        raise OutOfSupport(f"column {bad} has sum of squares >= 1")
    R = U.strict_upper()
    R[np.diag_indices(U.k)] = np.sqrt(slack)
    return CholeskyFactor(R)


def log_density_U(U: UpperREntries, params: ModelParams) -> float:
    """Log of the unnormalized density of the strict upper triangle of ``R``.

    The coupling term is ``beta * n * tr(A R^T R)``, i.e. the site-pair
    inner products of the columns of ``R``.  Column ``j`` (1-based) carries
    the weight ``R_jj ** (n - j - 1)``.
    """
    k, n = params.k, params.n
    if U.k != k:
        raise DimensionMismatch(f"U has k={U.k}, params have k={k}")
    slack = U.column_slack()
    if np.any(slack <= 0.0):
        raise OutOfSupport("some column of R has sum of squares >= 1")
    R = U.strict_upper()
    R[np.diag_indices(k)] = np.sqrt(slack)
    S = R.T @ R
    powers = n - np.arange(1, k + 1) - 1
    # ln R_jj = 0.5 * ln(slack); slack is exactly 1 for the first column
    return (params.beta * n * energy(S, params.A)
            + float(np.sum(powers * 0.5 * np.log(slack))))
