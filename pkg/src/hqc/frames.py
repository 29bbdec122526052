"""Moving eigenframes built from homogeneous minor coordinates.

For an isolated level E_m of multiplicity d, pick a chart: a set of n - d
rows such that the corresponding principal minor H_perp - E_m is invertible.
Solving (H_perp - E_m) Z = h with h = -H[kept, dropped] yields homogeneous
coordinates Z whose columns, padded with standard basis vectors in the
dropped slots, span the eigenspace.  Gram-Schmidt over those homogeneous
vectors gives an orthonormal frame that depends on lambda alone, so it is a
smooth gauge within one chart.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import ChartInvalidError, LevelCrossingError
from .matutil import as_complex_matrix, max_abs, polar_unitary, unitarity_residual
from .model import (
    LoopSamples,
    ModelSpec,
    cluster_eigenvalues,
    default_degeneracy_tol,
    eigen_decompose,
    evaluate_hamiltonian,
    evaluate_hamiltonian_batch,
    hamiltonian_derivative,
    sample_loop,
)

CHART_THRESHOLD_FACTOR = 1e-6
EIGEN_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class Chart:
    """Row subset whose principal minor of H - E_m is kept invertible."""

    kept_rows: tuple[int, ...]
    dropped_rows: tuple[int, ...]
    level_index: int = 0

    @property
    def n(self) -> int:
        return len(self.kept_rows) + len(self.dropped_rows)

    @property
    def degeneracy(self) -> int:
        return len(self.dropped_rows)


def chart_scale(h: np.ndarray, energy: float) -> float:
    return max_abs(h - energy * np.eye(h.shape[0]))


def chart_determinant(h: np.ndarray, energy: float, chart: Chart) -> complex:
    kept = list(chart.kept_rows)
    if not kept:
        return 1.0 + 0.0j
    block = h[np.ix_(kept, kept)] - energy * np.eye(len(kept))
    return complex(np.linalg.det(block))


def chart_determinant_batch(
    hams: np.ndarray, energies: np.ndarray, chart: Chart
) -> np.ndarray:
    """Minor determinants for a stack of Hamiltonians sharing one chart."""
    kept = list(chart.kept_rows)
    if not kept:
        return np.ones(hams.shape[0], dtype=complex)
    block = hams[:, kept, :][:, :, kept] \
        - energies[:, None, None] * np.eye(len(kept))
    return np.linalg.det(block)


def select_chart(
    h: np.ndarray,
    energy: float,
    degeneracy: int,
    threshold: float | None = None,
    level_index: int = 0,
) -> Chart:
    """Best chart by |det(H_perp - E_m)| over all row subsets of size n - d."""
    h = as_complex_matrix(h)
    n = h.shape[0]
    if not 1 <= degeneracy <= n:
        raise ChartInvalidError(f"degeneracy {degeneracy} out of range for n={n}")
    if threshold is None:
        threshold = CHART_THRESHOLD_FACTOR * chart_scale(h, energy)
    best: tuple[int, ...] | None = None
    best_det = 0.0
    for kept in combinations(range(n), n - degeneracy):
        cand = Chart(kept_rows=kept,
                     dropped_rows=tuple(sorted(set(range(n)) - set(kept))),
                     level_index=level_index)
        mag = abs(chart_determinant(h, energy, cand))
        # ties within rounding go to the lexicographically first subset
        if mag > best_det * (1.0 + 1e-10):
            best_det = mag
            best = kept
    if best is None or best_det <= threshold:
        raise ChartInvalidError(
            f"no chart exceeds threshold {threshold:.3e}: best |det| = {best_det:.3e}"
        )
    return Chart(
        kept_rows=best,
        dropped_rows=tuple(sorted(set(range(n)) - set(best))),
        level_index=level_index,
    )


@dataclass(frozen=True)
class Xi:
    """Homogeneous coordinates Z, one column per degenerate eigenvector."""

    Z: np.ndarray
    chart: Chart
    lam: np.ndarray | None
    residual: float


def _minor_solver(h: np.ndarray, energy: float, chart: Chart):
    """LU of (H_perp - E) with pivot monitoring; returns (solve, rhs)."""
    kept = list(chart.kept_rows)
    dropped = list(chart.dropped_rows)
    a = h[np.ix_(kept, kept)] - energy * np.eye(len(kept))
    rhs = -h[np.ix_(kept, dropped)]
    if not kept:
        return (lambda b: b), a, rhs
    lu, piv = lu_factor(a)
    pivots = np.abs(np.diag(lu))
    scale = max(max_abs(a), 1e-300)
    if pivots.min() < 1e-14 * scale:
        raise ChartInvalidError(
            f"minor solve is singular: pivot ratio {pivots.min() / scale:.3e} "
            f"for kept rows {chart.kept_rows}"
        )
    return (lambda b: lu_solve((lu, piv), b)), a, rhs


def xi_degenerate(
    h: np.ndarray,
    energy: float,
    degeneracy: int,
    chart: Chart | None = None,
    lam: np.ndarray | None = None,
) -> Xi:
    """Solve (H_perp - E_m) Z = h columnwise for the chart's minor."""
    h = as_complex_matrix(h)
    if chart is None:
        chart = select_chart(h, energy, degeneracy)
    if chart.degeneracy != degeneracy:
        raise ChartInvalidError(
            f"chart drops {chart.degeneracy} rows but level degeneracy is {degeneracy}"
        )
    solve, a, rhs = _minor_solver(h, energy, chart)
    z = solve(rhs)
    residual = max_abs(a @ z - rhs) if chart.kept_rows else 0.0
    return Xi(Z=z, chart=chart, lam=None if lam is None else np.asarray(lam, float),
              residual=float(residual))


def xi_abelian(
    h: np.ndarray,
    energy: float,
    chart: Chart | None = None,
    lam: np.ndarray | None = None,
) -> Xi:
    """Nondegenerate case: a single homogeneous coordinate column."""
    return xi_degenerate(h, energy, 1, chart=chart, lam=lam)


def homogeneous_vectors(xi: Xi) -> np.ndarray:
    """Columns x_a: Z in the kept slots, standard basis in the dropped slots."""
    n = xi.chart.n
    d = xi.chart.degeneracy
    x = np.zeros((n, d), dtype=complex)
    if xi.chart.kept_rows:
        x[list(xi.chart.kept_rows), :] = xi.Z
    x[list(xi.chart.dropped_rows), :] = np.eye(d)
    return x


def xi_batch(hams: np.ndarray, energies: np.ndarray, chart: Chart) -> np.ndarray:
    """Homogeneous coordinates (M, n-d, d) for a stack sharing one chart.

    Only called on stretches whose minor determinants already cleared the
    chart threshold, so the stacked solve is well posed.
    """
    kept = list(chart.kept_rows)
    dropped = list(chart.dropped_rows)
    m = hams.shape[0]
    d = chart.degeneracy
    if not kept:
        return np.zeros((m, 0, d), dtype=complex)
    a = hams[:, kept, :][:, :, kept] \
        - energies[:, None, None] * np.eye(len(kept))
    rhs = -hams[:, kept, :][:, :, dropped]
    try:
        return np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise ChartInvalidError(f"minor solve is singular along stretch: {exc}")


def homogeneous_vectors_batch(z: np.ndarray, chart: Chart) -> np.ndarray:
    m = z.shape[0]
    d = chart.degeneracy
    x = np.zeros((m, chart.n, d), dtype=complex)
    if chart.kept_rows:
        x[:, list(chart.kept_rows), :] = z
    x[:, list(chart.dropped_rows), :] = np.eye(d)
    return x


def _classical_gram_schmidt_batch(x: np.ndarray) -> np.ndarray:
    """Columnwise classical Gram-Schmidt over a stack of (n, d) matrices."""
    m, n, d = x.shape
    q = np.zeros_like(x)
    for a in range(d):
        v = x[:, :, a].copy()
        for b in range(a):
            coef = np.einsum("mi,mi->m", np.conj(q[:, :, b]), x[:, :, a])
            v -= q[:, :, b] * coef[:, None]
        nv = np.linalg.norm(v, axis=1)
        if nv.min() < 1e-14:
            raise ChartInvalidError(f"rank loss at homogeneous column {a}")
        q[:, :, a] = v / nv[:, None]
    return q


def frame_matrices_batch(
    hams: np.ndarray, energies: np.ndarray, chart: Chart
) -> np.ndarray:
    """Orthonormal frames (M, n, d) for a stack sharing one chart."""
    z = xi_batch(hams, energies, chart)
    return _classical_gram_schmidt_batch(homogeneous_vectors_batch(z, chart))


def gram_matrices(xi: Xi) -> list[np.ndarray]:
    """Gamma_a = identity_a + Z_a^dag Z_a over leading column blocks."""
    d = xi.chart.degeneracy
    out = []
    for a in range(1, d + 1):
        za = xi.Z[:, :a]
        out.append(np.eye(a) + np.conj(za.T) @ za)
    return out


@dataclass(frozen=True)
class Frame:
    """Orthonormal eigenframe, one column per degenerate eigenvector."""

    matrix: np.ndarray
    chart: Chart
    lam: np.ndarray | None


def _classical_gram_schmidt(x: np.ndarray) -> np.ndarray:
    n, d = x.shape
    q = np.zeros((n, d), dtype=complex)
    for a in range(d):
        v = x[:, a].copy()
        for b in range(a):
            v -= q[:, b] * (np.conj(q[:, b]) @ x[:, a])
        nv = np.linalg.norm(v)
        if nv < 1e-14:
            raise ChartInvalidError(f"rank loss at homogeneous column {a}")
        q[:, a] = v / nv
    return q


def orthonormal_frame(xi: Xi) -> Frame:
    """Gram-Schmidt over the homogeneous vectors in listed order."""
    x = homogeneous_vectors(xi)
    return Frame(matrix=_classical_gram_schmidt(x), chart=xi.chart, lam=xi.lam)


def determinant_formula_frame(xi: Xi) -> Frame:
    """Frame via bordered Gram determinants instead of iterative projection.

    Column a is the determinant of the a x a matrix whose first a - 1 rows
    are Gram rows <x_i|x_j> and whose last row holds the vectors themselves,
    expanded by cofactors along that vector row, scaled by 1/det(Gamma_{a-1})
    and then normalized.
    """
    x = homogeneous_vectors(xi)
    d = x.shape[1]
    gram = np.conj(x.T) @ x
    q = np.zeros_like(x)
    for a in range(1, d + 1):
        top = gram[: a - 1, :a]  # rows 1..a-1, columns 1..a
        w = np.zeros(x.shape[0], dtype=complex)
        for j in range(a):
            cols = [c for c in range(a) if c != j]
            minor = top[:, cols]
            cof = (-1) ** ((a - 1) + j) * (
                np.linalg.det(minor) if minor.size else 1.0
            )
            w += cof * x[:, j]
        det_prev = np.linalg.det(gram[: a - 1, : a - 1]) if a > 1 else 1.0
        w /= det_prev
        nw = np.linalg.norm(w)
        if nw < 1e-14:
            raise ChartInvalidError(f"rank loss at homogeneous column {a - 1}")
        q[:, a - 1] = w / nw
    return Frame(matrix=q, chart=xi.chart, lam=xi.lam)


def frame_residual(h: np.ndarray, energy: float, frame: Frame) -> float:
    return max_abs((h - energy * np.eye(h.shape[0])) @ frame.matrix)


def xi_with_derivative(
    h: np.ndarray,
    dh: np.ndarray,
    energy: float,
    degeneracy: int,
    chart: Chart,
    lam: np.ndarray | None = None,
) -> tuple[Xi, np.ndarray]:
    """Z and its analytic partials dZ_A, reusing one factorization.

    dh is the stacked (N, n, n) Hamiltonian derivative; differentiating
    (H_perp - E) Z = h gives dZ_A = (H_perp - E)^{-1} (dh_A - dH_perp_A Z).
    """
    xi = xi_degenerate(h, energy, degeneracy, chart=chart, lam=lam)
    solve, a, rhs = _minor_solver(h, energy, chart)
    kept = list(chart.kept_rows)
    dropped = list(chart.dropped_rows)
    npar = dh.shape[0]
    dz = np.zeros((npar,) + xi.Z.shape, dtype=complex)
    for p in range(npar):
        da = dh[p][np.ix_(kept, kept)]
        drhs = -dh[p][np.ix_(kept, dropped)]
        dz[p] = solve(drhs - da @ xi.Z) if kept else drhs
    return xi, dz


def level_data(model: ModelSpec, lam, level_index: int):
    """Energy, degeneracy, and full spectral data of one level at lam."""
    spectral, _ = eigen_decompose(evaluate_hamiltonian(model, lam))
    if not 0 <= level_index < len(spectral.energies):
        raise ChartInvalidError(
            f"level index {level_index} out of range: {len(spectral.energies)} levels"
        )
    return spectral.energies[level_index], spectral.degeneracies[level_index], spectral


def level_energies_along(hams: np.ndarray, level_index: int) -> tuple[np.ndarray, int]:
    """Per-sample energy of one level, demanding a constant degeneracy pattern.

    Isospectral families keep this constant to rounding; linear families may
    drift, which is fine for frames as long as no levels touch.
    """
    eigs = np.linalg.eigvalsh(hams)
    tol = default_degeneracy_tol(eigs[0])
    ref_groups = cluster_eigenvalues(eigs[0], tol)
    ref_pattern = tuple(len(g) for g in ref_groups)
    if not 0 <= level_index < len(ref_groups):
        raise ChartInvalidError(
            f"level index {level_index} out of range: {len(ref_groups)} levels"
        )
    out = np.empty(eigs.shape[0])
    for k in range(eigs.shape[0]):
        groups = cluster_eigenvalues(eigs[k], tol)
        pattern = tuple(len(g) for g in groups)
        if pattern != ref_pattern:
            raise LevelCrossingError(
                f"degeneracy pattern changed at sample {k}: {ref_pattern} -> {pattern}"
            )
        out[k] = float(np.mean(eigs[k][groups[level_index]]))
    return out, ref_pattern[level_index]


def frame_at(
    model: ModelSpec,
    lam,
    level_index: int,
    chart: Chart | None = None,
) -> Frame:
    h = evaluate_hamiltonian(model, lam)
    energy, degeneracy, _ = level_data(model, lam, level_index)
    if chart is None:
        chart = select_chart(h, energy, degeneracy, level_index=level_index)
    return orthonormal_frame(xi_degenerate(h, energy, degeneracy, chart=chart, lam=lam))


# ---------------------------------------------------------------------------
# walking a loop


@dataclass(frozen=True)
class Segment:
    """Samples start..stop governed by one chart.

    Transport steps k -> k+1 for k in start..stop-1 belong to this segment.
    A non-final stop index is the switch sample; its stored frame already
    uses the next segment's chart, with the overlap recorded in ChartSwitch.
    """

    start: int
    stop: int
    chart: Chart


@dataclass(frozen=True)
class ChartSwitch:
    """Chart change at one sample with the frame overlap W = F_old^dag F_new."""

    index: int
    overlap: np.ndarray
    unitary: np.ndarray
    residual: float


@dataclass
class FramePath:
    """Frames along a closed loop with chart bookkeeping."""

    samples: LoopSamples
    level_index: int
    energies: np.ndarray
    degeneracy: int
    frames: list[Frame]
    segments: list[Segment]
    switches: list[ChartSwitch]
    determinants: np.ndarray
    chart_ids: np.ndarray

    @property
    def energy(self) -> float:
        return float(self.energies[0])

    @property
    def num_steps(self) -> int:
        return len(self.frames) - 1


def level_energies_for_path(
    model: ModelSpec, hams: np.ndarray, level_index: int
) -> tuple[np.ndarray, int]:
    """Per-sample level energies; conjugated families are isospectral exactly,
    so one decomposition serves every sample."""
    if model.form == "conjugated":
        spectral, _ = eigen_decompose(hams[0])
        if not 0 <= level_index < len(spectral.energies):
            raise ChartInvalidError(
                f"level index {level_index} out of range: "
                f"{len(spectral.energies)} levels"
            )
        energies = np.full(hams.shape[0], spectral.energies[level_index])
        return energies, spectral.degeneracies[level_index]
    return level_energies_along(hams, level_index)


def frame_path(
    model: ModelSpec,
    loop,
    level_index: int,
    threshold_factor: float = CHART_THRESHOLD_FACTOR,
    diagnostic_align: bool = False,
) -> FramePath:
    """Walk the loop, keeping each chart while its minor determinant is safe.

    Frames are built in vectorized stretches: within one chart the minor
    solves and the Gram-Schmidt sweep run over the whole stretch at once,
    and only the chart switches are handled sample by sample.
    """
    samples = loop if isinstance(loop, LoopSamples) else sample_loop(loop)
    hams = evaluate_hamiltonian_batch(model, samples.points)
    energies, degeneracy = level_energies_for_path(model, hams, level_index)
    m_total = hams.shape[0]
    scales = np.max(
        np.abs(hams - energies[:, None, None] * np.eye(hams.shape[1])),
        axis=(1, 2),
    )
    thresholds = threshold_factor * scales

    def build_frame(k: int, chart: Chart) -> Frame:
        xi = xi_degenerate(hams[k], energies[k], degeneracy, chart=chart,
                           lam=samples.points[k])
        return orthonormal_frame(xi)

    chart = select_chart(hams[0], energies[0], degeneracy,
                         threshold=thresholds[0], level_index=level_index)
    frames: list[Frame] = []
    det_chunks: list[np.ndarray] = []
    segments: list[Segment] = []
    switches: list[ChartSwitch] = []
    seg_start = 0
    k = 0
    while k < m_total:
        dets = chart_determinant_batch(hams[k:], energies[k:], chart)
        bad = np.nonzero(np.abs(dets) <= thresholds[k:])[0]
        stop = k + (int(bad[0]) if bad.size else dets.size)
        if stop > k:
            mats = frame_matrices_batch(hams[k:stop], energies[k:stop], chart)
            for j in range(k, stop):
                frames.append(Frame(matrix=mats[j - k], chart=chart,
                                    lam=samples.points[j]))
            det_chunks.append(dets[: stop - k])
        if stop >= m_total:
            break

        # chart switch at the first sample whose determinant fell through
        k = stop
        new_chart = select_chart(hams[k], energies[k], degeneracy,
                                 threshold=thresholds[k],
                                 level_index=level_index)
        b = k - 1
        in_place = (
            b < seg_start
            or abs(chart_determinant(hams[b], energies[b], new_chart))
            <= thresholds[b]
        )
        if in_place:
            # new chart unusable one step back; push the old solve through k
            warnings.warn(
                f"chart switch at sample {k} without a clean overlap point"
            )
            frames.append(build_frame(k, chart))
            det_chunks.append(
                np.atleast_1d(chart_determinant(hams[k], energies[k], chart)))
            b = k
        old_frame = frames[b]
        new_frame = build_frame(b, new_chart)
        overlap = np.conj(old_frame.matrix.T) @ new_frame.matrix
        res = unitarity_residual(overlap)
        if res > 1e-8:
            raise LevelCrossingError(
                f"frame overlap at switch sample {b} is not unitary: "
                f"residual {res:.3e}"
            )
        switches.append(ChartSwitch(index=b, overlap=overlap,
                                    unitary=polar_unitary(overlap),
                                    residual=float(res)))
        frames[b] = new_frame
        det_chunks[-1] = det_chunks[-1].copy()
        det_chunks[-1][-1] = chart_determinant(hams[b], energies[b], new_chart)
        segments.append(Segment(start=seg_start, stop=b, chart=chart))
        seg_start = b
        chart = new_chart
        if in_place:
            k += 1
    segments.append(Segment(start=seg_start, stop=len(frames) - 1, chart=chart))

    if diagnostic_align:
        for k in range(1, len(frames)):
            align = polar_unitary(
                np.conj(frames[k].matrix.T) @ frames[k - 1].matrix)
            frames[k] = Frame(matrix=frames[k].matrix @ align,
                              chart=frames[k].chart, lam=frames[k].lam)

    dets = np.concatenate(det_chunks) if det_chunks else np.zeros(0, complex)
    chart_key_to_id: dict[tuple[int, ...], int] = {}
    ids = np.zeros(len(frames), dtype=int)
    for k, f in enumerate(frames):
        key = f.chart.kept_rows
        if key not in chart_key_to_id:
            chart_key_to_id[key] = len(chart_key_to_id)
        ids[k] = chart_key_to_id[key]

    return FramePath(
        samples=samples,
        level_index=level_index,
        energies=energies,
        degeneracy=degeneracy,
        frames=frames,
        segments=segments,
        switches=switches,
        determinants=dets,
        chart_ids=ids,
    )
