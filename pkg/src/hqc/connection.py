"""Berry and Wilczek-Zee connections over homogeneous coordinates.

Index convention, fixed package-wide: A_A[a, b] = i <z_b | d_A z_a> for the
orthonormal frame columns z_a.  Each component is Hermitian for orthonormal
frames; after numerical differentiation the skew part is split off by
(A + A^dag)/2 and reported as a quality metric rather than silently dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ChartBoundaryError, ChartInvalidError
from .matutil import hermiticity_residual, hermitize, max_abs, require_unitary
from .model import (
    ModelSpec,
    evaluate_hamiltonian,
    evaluate_hamiltonian_batch,
    hamiltonian_derivative,
    hamiltonian_derivative_batch,
)
from .frames import (
    CHART_THRESHOLD_FACTOR,
    Chart,
    Frame,
    Xi,
    chart_determinant,
    chart_scale,
    homogeneous_vectors,
    level_data,
    orthonormal_frame,
    select_chart,
    xi_degenerate,
    xi_with_derivative,
)

FD_STEP_DEFAULT = 1e-4


@dataclass(frozen=True)
class ConnectionSample:
    """The connection 1-form at one parameter point, A = sum_A components[A] dlam_A."""

    lam: np.ndarray
    components: np.ndarray  # (N, d, d), each Hermitian
    skew_residual: float = 0.0

    @property
    def num_params(self) -> int:
        return self.components.shape[0]

    @property
    def degeneracy(self) -> int:
        return self.components.shape[1]

    def scalars(self) -> np.ndarray:
        """Real coefficients for the nondegenerate case."""
        if self.degeneracy != 1:
            raise ValueError("scalar view is only defined for d = 1")
        return self.components[:, 0, 0].real.copy()


def _finalize(lam, raw: np.ndarray) -> ConnectionSample:
    skew = max(hermiticity_residual(m) for m in raw)
    comps = np.stack([hermitize(m) for m in raw])
    return ConnectionSample(
        lam=np.asarray(lam, dtype=float), components=comps, skew_residual=float(skew)
    )


def connection_abelian_closed(xi: Xi, dxi: np.ndarray) -> ConnectionSample:
    """Nondegenerate closed form A_A = -Im(xi^dag d_A xi) / (1 + |xi|^2)."""
    if xi.chart.degeneracy != 1:
        raise ValueError("abelian closed form needs a nondegenerate level")
    col = xi.Z[:, 0]
    dxi = np.asarray(dxi, dtype=complex)
    if dxi.ndim == 3:
        dxi = dxi[:, :, 0]
    denom = 1.0 + float(np.real(np.conj(col) @ col))
    raw = np.empty((dxi.shape[0], 1, 1), dtype=complex)
    for a in range(dxi.shape[0]):
        raw[a, 0, 0] = -np.imag(np.conj(col) @ dxi[a]) / denom
    return _finalize(xi.lam, raw)


def connection_frame(
    center: Frame,
    plus: Sequence[Frame],
    minus: Sequence[Frame],
    h_fd: float,
) -> ConnectionSample:
    """Central-difference connection from stencil frames in one chart."""
    kept = center.chart.kept_rows
    for f in list(plus) + list(minus):
        if f.chart.kept_rows != kept:
            raise ChartBoundaryError(
                "finite-difference stencil mixes charts; re-segment the loop"
            )
    npar = len(plus)
    d = center.matrix.shape[1]
    raw = np.empty((npar, d, d), dtype=complex)
    fh = np.conj(center.matrix.T)
    for a in range(npar):
        df = (plus[a].matrix - minus[a].matrix) / (2.0 * h_fd)
        raw[a] = (1j * fh @ df).T  # [a, b] = i <z_b | d z_a>
    return _finalize(center.lam, raw)


def connection_frame_at(
    model: ModelSpec,
    lam,
    level_index: int,
    chart: Chart | None = None,
    h_fd: float = FD_STEP_DEFAULT,
) -> ConnectionSample:
    """Finite-difference connection at one point, stencil kept inside one chart."""
    lam = model.check_params(lam)
    h = evaluate_hamiltonian(model, lam)
    energy, degeneracy, _ = level_data(model, lam, level_index)
    if chart is None:
        chart = select_chart(h, energy, degeneracy, level_index=level_index)

    def frame_in_chart(point: np.ndarray) -> Frame:
        hp = evaluate_hamiltonian(model, point)
        thr = CHART_THRESHOLD_FACTOR * chart_scale(hp, energy)
        if abs(chart_determinant(hp, energy, chart)) <= thr:
            raise ChartBoundaryError(
                f"stencil point {point} leaves the chart {chart.kept_rows}"
            )
        return orthonormal_frame(
            xi_degenerate(hp, energy, degeneracy, chart=chart, lam=point)
        )

    center = frame_in_chart(lam)
    plus, minus = [], []
    for a in range(model.num_params):
        step = np.zeros_like(lam)
        step[a] = h_fd
        plus.append(frame_in_chart(lam + step))
        minus.append(frame_in_chart(lam - step))
    return connection_frame(center, plus, minus, h_fd)


def _gram_schmidt_with_differential(
    x: np.ndarray, dx: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Classical Gram-Schmidt and its pushforward along one tangent direction."""
    n, d = x.shape
    q = np.zeros((n, d), dtype=complex)
    dq = np.zeros((n, d), dtype=complex)
    for a in range(d):
        v = x[:, a].copy()
        dv = dx[:, a].copy()
        for b in range(a):
            c = np.conj(q[:, b]) @ x[:, a]
            dc = np.conj(dq[:, b]) @ x[:, a] + np.conj(q[:, b]) @ dx[:, a]
            v -= q[:, b] * c
            dv -= dq[:, b] * c + q[:, b] * dc
        nu = np.linalg.norm(v)
        if nu < 1e-14:
            raise ChartInvalidError(f"rank loss at homogeneous column {a}")
        dnu = np.real(np.conj(v) @ dv) / nu
        q[:, a] = v / nu
        dq[:, a] = dv / nu - v * (dnu / nu**2)
    return q, dq


def connection_closed_form(xi: Xi, dz: np.ndarray) -> ConnectionSample:
    """Analytic connection through the Gram-Schmidt construction itself.

    dz holds the partials of the homogeneous coordinates, shape (N, n-d, d).
    The frame differential is obtained by differentiating the orthonormal
    construction exactly, so the result carries no finite-difference error.
    """
    x = homogeneous_vectors(xi)
    kept = list(xi.chart.kept_rows)
    npar = dz.shape[0]
    d = xi.chart.degeneracy
    raw = np.empty((npar, d, d), dtype=complex)
    for a in range(npar):
        dxa = np.zeros_like(x)
        if kept:
            dxa[kept, :] = dz[a]
        q, dq = _gram_schmidt_with_differential(x, dxa)
        raw[a] = (1j * np.conj(q.T) @ dq).T
    return _finalize(xi.lam, raw)


def connection_closed_form_at(
    model: ModelSpec,
    lam,
    level_index: int,
    chart: Chart | None = None,
) -> ConnectionSample:
    """Analytic connection at one point from the model's exact derivatives."""
    lam = model.check_params(lam)
    h = evaluate_hamiltonian(model, lam)
    dh = hamiltonian_derivative(model, lam)
    energy, degeneracy, _ = level_data(model, lam, level_index)
    if chart is None:
        chart = select_chart(h, energy, degeneracy, level_index=level_index)
    xi, dz = xi_with_derivative(h, dh, energy, degeneracy, chart, lam=lam)
    return connection_closed_form(xi, dz)


def _gram_schmidt_with_differential_batch(
    x: np.ndarray, dx: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Batched Gram-Schmidt pushforward: x is (M, n, d), dx is (M, N, n, d)."""
    m, n, d = x.shape
    npar = dx.shape[1]
    q = np.zeros((m, n, d), dtype=complex)
    dq = np.zeros((m, npar, n, d), dtype=complex)
    for a in range(d):
        v = x[:, :, a].copy()
        dv = dx[:, :, :, a].copy()
        for b in range(a):
            c = np.einsum("mi,mi->m", np.conj(q[:, :, b]), x[:, :, a])
            dc = (np.einsum("mpi,mi->mp", np.conj(dq[:, :, :, b]), x[:, :, a])
                  + np.einsum("mi,mpi->mp", np.conj(q[:, :, b]), dx[:, :, :, a]))
            v -= q[:, :, b] * c[:, None]
            dv -= (dq[:, :, :, b] * c[:, None, None]
                   + q[:, None, :, b] * dc[:, :, None])
        nu = np.linalg.norm(v, axis=1)
        if nu.min() < 1e-14:
            raise ChartInvalidError(f"rank loss at homogeneous column {a}")
        dnu = np.einsum("mi,mpi->mp", np.conj(v), dv).real / nu[:, None]
        q[:, :, a] = v / nu[:, None]
        dq[:, :, :, a] = (dv / nu[:, None, None]
                          - v[:, None, :] * (dnu / nu[:, None] ** 2)[:, :, None])
    return q, dq


def connection_closed_form_along(
    model: ModelSpec,
    lams: np.ndarray,
    energies: np.ndarray,
    degeneracy: int,
    chart: Chart,
) -> tuple[np.ndarray, float]:
    """Analytic connection at a stack of points sharing one chart.

    Returns the Hermitized components, shape (M, N, d, d), together with
    the largest skew residual seen across the stack.  Chart validity along
    the stack is the caller's responsibility; the stacked minor solve will
    surface a singular chart as ChartInvalidError.
    """
    lams = np.asarray(lams, dtype=float)
    energies = np.asarray(energies, dtype=float)
    hams = evaluate_hamiltonian_batch(model, lams)
    dhams = hamiltonian_derivative_batch(model, lams)
    kept = list(chart.kept_rows)
    dropped = list(chart.dropped_rows)
    m, npar = lams.shape[0], model.num_params
    d = degeneracy
    if chart.degeneracy != d:
        raise ChartInvalidError(
            f"chart drops {chart.degeneracy} rows but level degeneracy is {d}"
        )
    if kept:
        blk = hams[:, kept, :][:, :, kept] \
            - energies[:, None, None] * np.eye(len(kept))
        rhs = -hams[:, kept, :][:, :, dropped]
        try:
            z = np.linalg.solve(blk, rhs)
            dz = np.empty((m, npar, len(kept), d), dtype=complex)
            for p in range(npar):
                da = dhams[:, p][:, kept, :][:, :, kept]
                drhs = -dhams[:, p][:, kept, :][:, :, dropped]
                dz[:, p] = np.linalg.solve(blk, drhs - da @ z)
        except np.linalg.LinAlgError as exc:
            raise ChartInvalidError(f"minor solve is singular along stretch: {exc}")
    else:
        z = np.zeros((m, 0, d), dtype=complex)
        dz = np.zeros((m, npar, 0, d), dtype=complex)
    x = np.zeros((m, model.n, d), dtype=complex)
    if kept:
        x[:, kept, :] = z
    x[:, dropped, :] = np.eye(d)
    dx = np.zeros((m, npar, model.n, d), dtype=complex)
    if kept:
        dx[:, :, kept, :] = dz
    q, dq = _gram_schmidt_with_differential_batch(x, dx)
    raw = 1j * np.einsum("mib,mpia->mpab", np.conj(q), dq)
    skew = max_abs(raw - np.conj(np.swapaxes(raw, 2, 3)))
    comps = 0.5 * (raw + np.conj(np.swapaxes(raw, 2, 3)))
    return comps, float(skew)


def gauge_transform(
    samples: Sequence[ConnectionSample],
    u_of_lam: Callable[[np.ndarray], np.ndarray],
    h_fd: float = FD_STEP_DEFAULT,
) -> list[ConnectionSample]:
    """Apply A' = U A U^dag + i (dU) U^dag samplewise, dU by central differences."""
    out = []
    for s in samples:
        u = np.asarray(u_of_lam(s.lam), dtype=complex)
        require_unitary(u, 1e-10, "gauge transformation")
        raw = np.empty_like(s.components)
        for a in range(s.num_params):
            step = np.zeros(s.lam.shape[0])
            step[a] = h_fd
            du = (np.asarray(u_of_lam(s.lam + step), dtype=complex)
                  - np.asarray(u_of_lam(s.lam - step), dtype=complex)) / (2.0 * h_fd)
            raw[a] = u @ s.components[a] @ np.conj(u.T) + 1j * du @ np.conj(u.T)
        out.append(_finalize(s.lam, raw))
    return out


def kahler_potential(z) -> float:
    """F = log det(1 + Z^dag Z); log(1 + |z|^2) for a single column."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if z.ndim == 2 and z.shape[1] > 1:
        gram = np.eye(z.shape[1]) + np.conj(z.T) @ z
        _, logdet = np.linalg.slogdet(gram)
        return float(logdet)
    return float(np.log1p(np.sum(np.abs(z) ** 2)))
