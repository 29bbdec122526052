"""Loop integrals: Abelian Berry phases and path-ordered non-Abelian holonomies.

Transport convention, fixed jointly with the connection index convention by
agreement with the Schrodinger oracle: coefficients v of a state expanded in
the moving frame obey dv/dt = i A^T(t) v, so one discretization step k ->
k+1 contributes the factor exp(i K^T) with K = sum_A A_A(midpoint)
Delta_lam_A, later factors multiplying on the left.  At a chart switch the
coefficient vector changes by W^dag with W the recorded frame overlap, and
the closing factor re-expresses the result in the frame stored at the base
point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    BasePointMismatchError,
    ModelFormatError,
    OpenLoopError,
    OverlapRankError,
)
from .matutil import (
    expi_hermitian,
    expi_hermitian_batch,
    max_abs,
    mod_two_pi,
    polar_unitary,
    unitarity_residual,
)
from .model import (
    LoopSamples,
    ModelSpec,
    SamplesLoop,
    SphereCircleLoop,
    evaluate_hamiltonian_batch,
)
from .frames import FramePath, frame_path, level_energies_along
from .connection import (
    FD_STEP_DEFAULT,
    ConnectionSample,
    connection_closed_form_along,
    connection_closed_form_at,
    connection_frame_at,
)

LOOP_CLOSURE_TOL = 1e-12
MIN_OVERLAP_SINGULAR = 0.1


@dataclass
class Holonomy:
    """A d x d loop holonomy expressed in the frame at the base point."""

    matrix: np.ndarray
    level_index: int
    method: str
    steps: int
    base_lam: np.ndarray
    base_frame: np.ndarray
    loop_id: str = ""
    unitarity_residual: float = 0.0
    pre_unitarization_distance: float = 0.0

    @property
    def degeneracy(self) -> int:
        return self.matrix.shape[0]

    def abelian_phase(self) -> float:
        if self.degeneracy != 1:
            raise ValueError("abelian phase is only defined for d = 1")
        return float(np.angle(self.matrix[0, 0]))


@dataclass(frozen=True)
class BerryPhase:
    raw: float
    mod_two_pi: float
    factor: complex


def berry_phase_abelian(samples: Sequence[ConnectionSample]) -> BerryPhase:
    """Composite trapezoid of the scalar connection over ordered loop samples.

    Closure is accepted either literally in coordinates or in the family
    sense: a periodic coordinate may advance by a full period, in which
    case the connection itself must return to its starting value.
    """
    if any(s.degeneracy != 1 for s in samples):
        raise ValueError("abelian phase needs scalar connection samples")
    lams = np.stack([s.lam for s in samples])
    if float(np.linalg.norm(lams[0] - lams[-1])) > LOOP_CLOSURE_TOL:
        gap = max_abs(samples[0].components - samples[-1].components)
        if gap > 1e-8:
            raise OpenLoopError(
                "connection samples do not trace a closed loop: endpoints "
                f"differ and the connection moves by {gap:.3e}")
    vals = np.stack([s.scalars() for s in samples])
    deltas = lams[1:] - lams[:-1]
    gamma = float(np.sum(0.5 * (vals[1:] + vals[:-1]) * deltas))
    return BerryPhase(raw=gamma, mod_two_pi=mod_two_pi(gamma),
                      factor=complex(np.exp(1j * gamma)))


def _connection_at(model, lam, level_index, chart, method: str, h_fd: float):
    if method == "closed":
        return connection_closed_form_at(model, lam, level_index, chart=chart)
    if method == "fd":
        return connection_frame_at(model, lam, level_index, chart=chart, h_fd=h_fd)
    raise ValueError(f"unknown connection method {method!r}")


def _level_energies_at(model, lams, level_index, path: FramePath) -> np.ndarray:
    """Level energies at off-sample points (conjugated families are constant)."""
    if model.form == "conjugated":
        return np.full(lams.shape[0], path.energies[0])
    hams = evaluate_hamiltonian_batch(model, lams)
    energies, _ = level_energies_along(hams, level_index)
    return energies


def _segment_components(
    model, path: FramePath, seg, pts_seg: np.ndarray,
    level_index: int, connection_method: str, h_fd: float,
) -> np.ndarray:
    """Connection components (M, N, d, d) at given points in one chart."""
    if connection_method == "closed":
        energies = _level_energies_at(model, pts_seg, level_index, path)
        comps, _ = connection_closed_form_along(
            model, pts_seg, energies, path.degeneracy, seg.chart)
        return comps
    samples = [
        _connection_at(model, lam, level_index, seg.chart,
                       connection_method, h_fd)
        for lam in pts_seg
    ]
    return np.stack([s.components for s in samples])


def berry_phase_for_loop(
    model: ModelSpec,
    loop,
    level_index: int,
    connection_method: str = "closed",
    h_fd: float = FD_STEP_DEFAULT,
) -> BerryPhase:
    """Berry phase of a nondegenerate level, chart switches included.

    The raw value sums segment trapezoids plus the principal arguments of
    the switch and closure phases; with a single chart it is the plain
    unwrapped loop integral.
    """
    path = loop if isinstance(loop, FramePath) else frame_path(model, loop, level_index)
    if path.level_index != level_index:
        raise ValueError("frame path was built for a different level")
    if path.degeneracy != 1:
        raise ValueError(
            f"level {level_index} has degeneracy {path.degeneracy}; "
            "use the non-Abelian holonomy"
        )
    pts = path.samples.points
    gamma = 0.0
    for seg in path.segments:
        if seg.stop == seg.start:
            continue
        comps = _segment_components(
            model, path, seg, pts[seg.start: seg.stop + 1],
            level_index, connection_method, h_fd)
        vals = comps[:, :, 0, 0].real
        deltas = pts[seg.start + 1: seg.stop + 1] - pts[seg.start: seg.stop]
        gamma += float(np.sum(0.5 * (vals[1:] + vals[:-1]) * deltas))
    if path.switches and path.switches[0].index == 0:
        gamma += float(np.angle(path.switches[0].unitary[0, 0]))
    for sw in path.switches:
        gamma += float(np.angle(np.conj(sw.unitary[0, 0])))
    w_close = np.conj(path.frames[-1].matrix.T) @ path.frames[0].matrix
    gamma += float(np.angle(np.conj(w_close[0, 0])))
    return BerryPhase(raw=gamma, mod_two_pi=mod_two_pi(gamma),
                      factor=complex(np.exp(1j * gamma)))


def solid_angle(loop) -> float:
    """Oriented solid angle enclosed by a loop on the unit sphere.

    sphere_circle gives the closed form 2 pi (1 - cos theta).  Sample-based
    loops are accepted either as unit 3-vectors or as (theta, phi) pairs and
    are integrated as a fan of signed spherical triangles from a reference
    apex; counterclockwise in phi counts positive.
    """
    if isinstance(loop, SphereCircleLoop):
        return float(2.0 * np.pi * (1.0 - np.cos(loop.theta)))
    if isinstance(loop, SamplesLoop):
        pts = loop.points
    elif isinstance(loop, LoopSamples):
        pts = loop.points
    else:
        raise ModelFormatError(
            "solid angle needs a sphere_circle loop or explicit sphere samples"
        )
    if pts.shape[1] == 2:
        theta, phi = pts[:, 0], pts[:, 1]
        xyz = np.stack(
            [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi),
             np.cos(theta)], axis=1,
        )
    elif pts.shape[1] == 3:
        norms = np.linalg.norm(pts, axis=1)
        if max_abs(norms - 1.0) > 1e-8:
            raise ModelFormatError(
                f"loop leaves the unit sphere: radius deviation {max_abs(norms - 1.0):.3e}"
            )
        xyz = pts
    else:
        raise ModelFormatError("sphere samples need 2 or 3 components")
    candidates = [np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]),
                  np.array([0.0, 1.0, 0.0])]
    mean = xyz.mean(axis=0)
    if np.linalg.norm(mean) > 1e-6:
        candidates.insert(0, mean / np.linalg.norm(mean))
    apex = None
    for q in candidates:
        if np.max(xyz @ (-q)) < 1.0 - 1e-6:
            apex = q
            break
    if apex is None:
        raise ModelFormatError("no usable fan apex: loop passes near every pole tried")
    total = 0.0
    for k in range(xyz.shape[0] - 1):
        p1, p2 = xyz[k], xyz[k + 1]
        num = float(apex @ np.cross(p1, p2))
        den = float(1.0 + apex @ p1 + p1 @ p2 + p2 @ apex)
        total += 2.0 * np.arctan2(num, den)
    return float(total)


def pexp_from_samples(
    samples: Sequence[ConnectionSample], deltas: np.ndarray
) -> np.ndarray:
    """Ordered product of midpoint factors exp(i K^T), later factors left."""
    deltas = np.asarray(deltas, dtype=float)
    if len(samples) != deltas.shape[0]:
        raise ValueError("one connection sample per step is required")
    d = samples[0].degeneracy
    u = np.eye(d, dtype=complex)
    for s, dl in zip(samples, deltas):
        k = np.tensordot(dl, s.components, axes=(0, 0))
        u = expi_hermitian(k.T) @ u
    return u


def holonomy_pexp(
    model: ModelSpec,
    loop,
    level_index: int,
    connection_method: str = "closed",
    h_fd: float = FD_STEP_DEFAULT,
    loop_id: str = "",
) -> Holonomy:
    """Path-ordered exponential of the connection along a closed loop."""
    path = loop if isinstance(loop, FramePath) else frame_path(model, loop, level_index)
    if path.level_index != level_index:
        raise ValueError("frame path was built for a different level")
    pts = path.samples.points
    d = path.degeneracy
    u = np.eye(d, dtype=complex)
    if len(path.switches) != len(path.segments) - 1:
        raise ModelFormatError("segment boundaries and overlaps are inconsistent")
    if path.switches and path.switches[0].index == 0:
        # the base frame was re-expressed at sample 0; enter the first chart
        u = path.switches[0].unitary @ u
    for s, seg in enumerate(path.segments):
        if seg.stop > seg.start:
            mids = 0.5 * (pts[seg.start: seg.stop] + pts[seg.start + 1: seg.stop + 1])
            deltas = pts[seg.start + 1: seg.stop + 1] - pts[seg.start: seg.stop]
            comps = _segment_components(model, path, seg, mids,
                                        level_index, connection_method, h_fd)
            kmats = np.einsum("mp,mpab->mab", deltas, comps)
            if d == 1:
                u = complex(np.exp(1j * np.sum(kmats[:, 0, 0].real))) * u
            else:
                factors = expi_hermitian_batch(np.swapaxes(kmats, 1, 2))
                for f in factors:
                    u = f @ u
        if s < len(path.segments) - 1:
            u = np.conj(path.switches[s].unitary.T) @ u
    w_close = np.conj(path.frames[-1].matrix.T) @ path.frames[0].matrix
    u = np.conj(w_close.T) @ u
    res = unitarity_residual(u)
    return Holonomy(
        matrix=u,
        level_index=level_index,
        method="pexp",
        steps=path.num_steps,
        base_lam=pts[0].copy(),
        base_frame=path.frames[0].matrix.copy(),
        loop_id=loop_id,
        unitarity_residual=float(res),
    )


def holonomy_projector(
    model: ModelSpec,
    loop,
    level_index: int,
    loop_id: str = "",
    min_overlap_singular: float = MIN_OVERLAP_SINGULAR,
) -> Holonomy:
    """Discrete projector transport: stepwise frame overlaps, then polar factor."""
    path = loop if isinstance(loop, FramePath) else frame_path(model, loop, level_index)
    if path.level_index != level_index:
        raise ValueError("frame path was built for a different level")
    d = path.degeneracy
    fr = np.stack([f.matrix for f in path.frames])
    overlaps = np.einsum("mij,mik->mjk", np.conj(fr[1:]), fr[:-1])
    if d == 1:
        svals = np.abs(overlaps[:, 0, 0])
    else:
        svals = np.linalg.svd(overlaps, compute_uv=False).min(axis=1)
    bad = np.nonzero(svals < min_overlap_singular)[0]
    if bad.size:
        k = int(bad[0])
        raise OverlapRankError(
            f"overlap at step {k} has minimal singular value {svals[k]:.3e}; "
            "sampling is too coarse for projector transport"
        )
    if d == 1:
        u = np.array([[np.prod(overlaps[:, 0, 0])]], dtype=complex)
    else:
        u = np.eye(d, dtype=complex)
        for overlap in overlaps:
            u = overlap @ u
    w_close = np.conj(path.frames[-1].matrix.T) @ path.frames[0].matrix
    u = np.conj(w_close.T) @ u
    uu = polar_unitary(u)
    dist = max_abs(u - uu)
    return Holonomy(
        matrix=uu,
        level_index=level_index,
        method="projector",
        steps=path.num_steps,
        base_lam=path.samples.points[0].copy(),
        base_frame=path.frames[0].matrix.copy(),
        loop_id=loop_id,
        unitarity_residual=float(unitarity_residual(uu)),
        pre_unitarization_distance=float(dist),
    )


def compose_loops(first: Holonomy, second: Holonomy) -> Holonomy:
    """Holonomy of the concatenated loop: first traversed first, so U2 U1."""
    if first.level_index != second.level_index:
        raise BasePointMismatchError(
            f"levels differ: {first.level_index} vs {second.level_index}"
        )
    if first.base_lam.shape != second.base_lam.shape or \
            float(np.linalg.norm(first.base_lam - second.base_lam)) > 1e-10:
        raise BasePointMismatchError(
            f"base points differ: {first.base_lam} vs {second.base_lam}"
        )
    if max_abs(first.base_frame - second.base_frame) > 1e-8:
        raise BasePointMismatchError("base frames differ beyond 1e-8")
    u = second.matrix @ first.matrix
    method = first.method if first.method == second.method else "composed"
    return Holonomy(
        matrix=u,
        level_index=first.level_index,
        method=method,
        steps=first.steps + second.steps,
        base_lam=first.base_lam.copy(),
        base_frame=first.base_frame.copy(),
        loop_id=f"{first.loop_id}+{second.loop_id}",
        unitarity_residual=float(unitarity_residual(u)),
    )


def compute_holonomy(
    model: ModelSpec,
    loop,
    level_index: int,
    method: str = "pexp",
    connection_method: str = "closed",
    h_fd: float = FD_STEP_DEFAULT,
    loop_id: str = "",
) -> Holonomy:
    """Single-call driver used by the command-line tools."""
    path = loop if isinstance(loop, FramePath) else frame_path(model, loop, level_index)
    if method == "pexp":
        return holonomy_pexp(model, path, level_index,
                             connection_method=connection_method,
                             h_fd=h_fd, loop_id=loop_id)
    if method == "projector":
        return holonomy_projector(model, path, level_index, loop_id=loop_id)
    raise ValueError(f"unknown holonomy method {method!r}")
