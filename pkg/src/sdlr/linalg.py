"""Dense complex linear algebra primitives shared by the whole package.

All matrices are plain ``numpy`` arrays with complex dtype; orthonormal
frames are ``(n, r)`` arrays ``U`` with ``U^H U = Id`` (checked via
:func:`frame_defect`, never enforced by a wrapper class).
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, DomainError, RankError

DEFAULT_PINV_RTOL = 1e-8


def hs_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Hilbert-Schmidt (Frobenius) inner product ``sum conj(a_ij) b_ij``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def hs_norm(a: np.ndarray) -> float:
    """Hilbert-Schmidt norm; real and nonnegative by construction."""
    a = np.asarray(a)
    return float(np.sqrt(np.vdot(a, a).real))


def _check_square_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected square matrix, got {a.shape}")
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``ab - ba``."""
    a = np.asarray(a)
    b = np.asarray(b)
    _check_square_pair(a, b)
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``ab + ba``."""
    a = np.asarray(a)
    b = np.asarray(b)
    _check_square_pair(a, b)
    return a @ b + b @ a


def hermitize(m: np.ndarray) -> np.ndarray:
    """Hermitian part ``(m + m^H) / 2``."""
    return (m + m.conj().T) / 2


def frame_defect(u: np.ndarray) -> float:
    """``||U^H U - Id||_HS``, the orthonormality defect of a frame."""
    r = u.shape[1]
    return hs_norm(u.conj().T @ u - np.eye(r))


def projectors(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal projectors ``(P, Q)`` onto span(U) and its complement.

    ``P = U U^H`` and ``Q = Id - P``; both are Hermitian and idempotent as
    long as ``U`` has orthonormal columns.
    """
    u = np.asarray(u)
    p = u @ u.conj().T
    p = hermitize(p)
    q = np.eye(u.shape[0], dtype=p.dtype) - p
    return p, q


def eigh_desc(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian eigendecomposition, eigenvalues descending, phases fixed.

    Each eigenvector is rotated so its largest-modulus component is real
    and positive, which makes the output deterministic for test purposes.
    """
    m = np.asarray(m)
    w, v = np.linalg.eigh(hermitize(m))
    w = w[::-1]
    v = v[:, ::-1]
    idx = np.argmax(np.abs(v), axis=0)
    pivots = v[idx, np.arange(v.shape[1])]
    phases = np.where(np.abs(pivots) > 0, pivots / np.maximum(np.abs(pivots), 1e-300), 1.0)
    return w.copy(), v * phases.conj()


def pinv_psd(m: np.ndarray, rel_tol: float = DEFAULT_PINV_RTOL) -> np.ndarray:
    """Pseudo-inverse of a positive semidefinite Hermitian matrix.

    Eigenvalues below ``rel_tol * lambda_max`` are zeroed, the rest are
    inverted.  The zero matrix is its own pseudo-inverse.  Raises
    :class:`DomainError` if ``m`` is significantly indefinite.
    """
    m = np.asarray(m)
    w, v = np.linalg.eigh(hermitize(m))
    lam_max = float(w[-1]) if w.size else 0.0
    if lam_max <= 0.0:
        if w.size and w[0] < -1e-10 * max(1.0, abs(lam_max)):
            raise DomainError(f"matrix is indefinite: min eigenvalue {w[0]:.3e}")
        return np.zeros_like(m)
    if w[0] < -1e-10 * lam_max:
        raise DomainError(
            f"matrix is indefinite: min eigenvalue {w[0]:.3e} vs max {lam_max:.3e}"
        )
    inv_w = np.where(w > rel_tol * lam_max, 1.0 / np.where(w > 0, w, 1.0), 0.0)
    return hermitize((v * inv_w) @ v.conj().T)


def retract_to_stiefel(m: np.ndarray) -> np.ndarray:
    """Polar retraction: the orthonormal factor of ``m = U H`` with ``H > 0``.

    Requires full column rank; an already orthonormal input is a fixed
    point up to round-off.
    """
    m = np.asarray(m)
    w, s, vh = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] <= 0.0 or s[-1] <= 1e-12 * s[0]:
        raise RankError(f"matrix of shape {m.shape} is numerically rank-deficient")
    return w @ vh


def top_spectrum(m: np.ndarray, k: int) -> np.ndarray:
    """The ``k`` largest eigenvalues of a Hermitian matrix, descending."""
    m = np.asarray(m)
    if k > m.shape[0]:
        raise DimensionError(f"k={k} exceeds matrix dimension {m.shape[0]}")
    w = np.linalg.eigvalsh(hermitize(m))
    return w[::-1][:k].copy()


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    """Hermitian matrix with iid complex Gaussian entries (symmetrized)."""
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return hermitize(a)


def random_stiefel(n: int, r: int, rng: np.random.Generator) -> np.ndarray:
    """Random ``(n, r)`` orthonormal frame via polar retraction of a Gaussian."""
    if r > n:
        raise DimensionError(f"rank {r} exceeds ambient dimension {n}")
    a = rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))
    return retract_to_stiefel(a)
