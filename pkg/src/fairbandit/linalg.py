"""Small dense SPD kernel: scaled identities, rank-1 updates, solves, weighted norms.

Matrices are plain ``numpy`` arrays.  The reference solve path is a Cholesky
factorization; :class:`ShermanMorrisonInverse` keeps an explicit inverse in
step with the rank-1 updates for the O(d^2) fast path.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import cho_factor, cho_solve

Array = NDArray[np.float64]

SYMMETRY_RTOL = 1e-10


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a Cholesky factorization meets a non-positive pivot."""


def _as_vector(x, d: int | None = None) -> Array:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    if d is not None and v.shape[0] != d:
        raise ValueError(f"dimension mismatch: matrix is {d}x{d}, vector has length {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def _check_square(A) -> Array:
    M = np.asarray(A, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    return M


def identity_scaled(d: int, lam: float) -> Array:
    """Return ``lam * I_d``."""
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    if not lam > 0:
        raise ValueError(f"regularization must be positive, got {lam!r}")
    return lam * np.eye(int(d))


def rank1_update(A, x) -> Array:
    """Return ``A + x x^T`` as a new matrix.

    ``np.outer(x, x)`` is bit-symmetric, so symmetry of ``A`` is preserved exactly.
    """
    M = _check_square(A)
    v = _as_vector(x, M.shape[0])
    return M + np.outer(v, v)


def is_symmetric(A, rtol: float = SYMMETRY_RTOL) -> bool:
    M = _check_square(A)
    scale = max(np.abs(M).max(), 1.0)
    return bool(np.abs(M - M.T).max() <= rtol * scale)


def cholesky(A):
    """Factor ``A``; raises :class:`NotPositiveDefiniteError` on a bad pivot."""
    M = _check_square(A)
    try:
        return cho_factor(M, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc


def solve(A, b) -> Array:
    """Solve ``A theta = b`` for symmetric positive-definite ``A``."""
    M = _check_square(A)
    v = _as_vector(b, M.shape[0])
    return cho_solve(cholesky(M), v)


def weighted_norm(A, x) -> float:
    """Return ``||x||_{A^{-1}} = sqrt(x^T A^{-1} x)``."""
    M = _check_square(A)
    v = _as_vector(x, M.shape[0])
    q = float(v @ cho_solve(cholesky(M), v))
    # rounding can push a true zero slightly negative
    return float(np.sqrt(max(q, 0.0)))


class ShermanMorrisonInverse:
    """Keeps ``A`` and ``A^{-1}`` in lock-step under rank-1 updates.

    Exposes the same ``solve`` / ``weighted_norm`` surface as the module-level
    Cholesky functions so the two can be swapped and cross-checked.
    """

    def __init__(self, d: int, lam: float):
        self.A = identity_scaled(d, lam)
        self.A_inv = np.eye(d) / lam

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def update(self, x) -> None:
        v = _as_vector(x, self.dim)
        self.A = self.A + np.outer(v, v)
        self.A_inv = sherman_morrison(self.A_inv, v)

    def solve(self, b) -> Array:
        return self.A_inv @ _as_vector(b, self.dim)

    def weighted_norm(self, x) -> float:
        v = _as_vector(x, self.dim)
        return float(np.sqrt(max(float(v @ self.A_inv @ v), 0.0)))


def sherman_morrison(A_inv: Array, x: Array) -> Array:
    """Inverse of ``A + x x^T`` given ``A^{-1}``; result is re-symmetrized."""
    u = A_inv @ x
    out = A_inv - np.outer(u, u) / (1.0 + x @ u)
    return 0.5 * (out + out.T)
