"""Dense complex linear-algebra helpers used throughout the package."""

from __future__ import annotations

import numpy as np

from .errors import NonUnitaryError


def as_complex_matrix(data, n_rows: int | None = None, n_cols: int | None = None) -> np.ndarray:
    arr = np.asarray(data, dtype=complex)
    if arr.ndim != 2:
        raise ValueError(f"expected a matrix, got array of shape {arr.shape}")
    if n_rows is not None and arr.shape[0] != n_rows:
        raise ValueError(f"expected {n_rows} rows, got {arr.shape[0]}")
    if n_cols is not None and arr.shape[1] != n_cols:
        raise ValueError(f"expected {n_cols} columns, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix entries must be finite")
    return arr


def max_abs(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def hermiticity_residual(a) -> float:
    return max_abs(a - np.conj(a.T))


def hermitize(a) -> np.ndarray:
    return 0.5 * (a + np.conj(a.T))


def expi_hermitian(h, factor: float = 1.0) -> np.ndarray:
    """exp(1j * factor * h) for Hermitian h, through an eigendecomposition."""
    w, q = np.linalg.eigh(h)
    return (q * np.exp(1j * factor * w)) @ np.conj(q.T)


def expi_hermitian_batch(h, factors=None) -> np.ndarray:
    """exp(1j * factors[k] * h[k]) over a stack of Hermitian matrices."""
    w, q = np.linalg.eigh(h)
    if factors is None:
        phase = np.exp(1j * w)
    else:
        phase = np.exp(1j * np.asarray(factors)[:, None] * w)
    return np.einsum("kij,kj,klj->kil", q, phase, np.conj(q))


def polar_unitary(m) -> np.ndarray:
    """Closest unitary to m in Frobenius norm (polar factor via SVD)."""
    u, _, vh = np.linalg.svd(m)
    return u @ vh


def unitarity_residual(u) -> float:
    u = np.asarray(u)
    return max_abs(np.conj(u.T) @ u - np.eye(u.shape[1]))


def require_unitary(u, tol: float = 1e-10, what: str = "matrix") -> np.ndarray:
    r = unitarity_residual(u)
    if r > tol:
        raise NonUnitaryError(f"{what} is not unitary: residual {r:.3e} exceeds {tol:.1e}")
    return u


def projector(frame) -> np.ndarray:
    return frame @ np.conj(frame.T)


def subspace_gap(f1, f2) -> float:
    """Largest principal angle (radians) between two column spans."""
    s = np.linalg.svd(np.conj(f1.T) @ f2, compute_uv=False)
    return float(np.arccos(np.clip(np.min(s), -1.0, 1.0)))


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def haar_special_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    u = haar_unitary(n, rng)
    return u * np.exp(-1j * np.angle(np.linalg.det(u)) / n)


def wrap_angle(x: float) -> float:
    """Reduce an angle to the principal branch (-pi, pi]."""
    y = float(np.mod(x + np.pi, 2.0 * np.pi) - np.pi)
    return np.pi if y == -np.pi else y


def mod_two_pi(x: float) -> float:
    return float(np.mod(x, 2.0 * np.pi))


def circular_distance(a: float, b: float) -> float:
    """Distance between two angles on the circle, in [0, pi]."""
    return abs(wrap_angle(a - b))


def matrix_to_pairs(m) -> list:
    """Row-major nested lists with complex entries encoded as [re, im]."""
    m = np.asarray(m, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def pairs_to_matrix(data, n_rows: int | None = None, n_cols: int | None = None) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"matrix entries must be [re, im] pairs: {exc}") from exc
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError("matrix must be nested rows of [re, im] pairs")
    m = arr[..., 0] + 1j * arr[..., 1]
    return as_complex_matrix(m, n_rows, n_cols)
