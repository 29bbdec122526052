"""Independent check: integrate the Schrodinger equation along the drive.

The integrator is a triple-jump composition of the exponential midpoint
rule: each substep applies exp(-i H(lam(t_mid)) w dt) exactly through a
spectral decomposition, so every factor is unitary by construction and the
composition is 4th order in the step.  For conjugated families the
propagator reuses H = V h0 V^dag, so no per-step eigensolve is needed.

Stripping the dynamical phase exp(-i E_m T) is exact because the family is
isospectral; what remains of the projection onto the starting frame is the
empirical holonomy that the geometric pipeline must reproduce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import HqcError, LevelCrossingError
from .matutil import max_abs, polar_unitary
from .model import (
    LoopSamples,
    ModelSpec,
    SamplesLoop,
    adiabaticity_ratio,
    evaluate_hamiltonian,
    evaluate_hamiltonian_batch,
    isospectrality_check,
    unitary_family_batch,
)
from .frames import FramePath, frame_path
from .holonomy import holonomy_pexp

_CUBE = 2.0 ** (1.0 / 3.0)
TRIPLE_JUMP = (
    1.0 / (2.0 - _CUBE),
    1.0 - 2.0 / (2.0 - _CUBE),
    1.0 / (2.0 - _CUBE),
)

DEFAULT_CHUNK = 49_998  # multiple of 3: chunks close at whole steps
LEAKAGE_TOL_DEFAULT = 1e-2
SWEEP_FLOOR_DEFAULT = 1e-5
STEPS_PER_UNIT_ACTION = 20.0


def default_steps(model: ModelSpec, loop) -> int:
    """Fixed-step count: enough steps per energy scale, never below the loop grid."""
    eigs = np.linalg.eigvalsh(evaluate_hamiltonian(model, loop.at(0.0)))
    max_e = float(np.max(np.abs(eigs))) if eigs.size else 0.0
    by_energy = int(math.ceil(STEPS_PER_UNIT_ACTION * loop.duration * max_e))
    return max(loop.samples, by_energy, 16)


@dataclass
class EvolveResult:
    psi: np.ndarray
    snapshots: np.ndarray | None
    steps: int
    drift: float


def schrodinger_evolve(
    model: ModelSpec,
    loop,
    psi0: np.ndarray,
    steps: int | None = None,
    snapshots_every: int | None = None,
    chunk: int = DEFAULT_CHUNK,
) -> EvolveResult:
    """Evolve initial columns through i dpsi/dt = H(lam(t)) psi over one loop."""
    psi = np.asarray(psi0, dtype=complex)
    if psi.ndim == 1:
        psi = psi[:, None]
    psi = psi.copy()
    norms = np.linalg.norm(psi, axis=0)
    if max_abs(norms - 1.0) > 1e-8:
        raise ValueError("initial columns must be normalized")
    m_steps = steps if steps is not None else default_steps(model, loop)
    if m_steps < 1:
        raise ValueError("step count must be positive")
    dt = loop.duration / m_steps
    w = np.array(TRIPLE_JUMP)
    offsets = np.array([w[0] / 2, w[0] + w[1] / 2, w[0] + w[1] + w[2] / 2])
    durations = w * dt
    if model.form == "conjugated":
        w0, q0 = np.linalg.eigh(model.h0)
    chunk = max(3, chunk - chunk % 3)
    snaps: list[np.ndarray] = []
    total = 3 * m_steps
    for s0 in range(0, total, chunk):
        s1 = min(total, s0 + chunk)
        idx = np.arange(s0, s1)
        k, j = idx // 3, idx % 3
        t_mid = (k + offsets[j]) * dt
        dur = durations[j]
        lams = loop.at_many(t_mid)
        if model.form == "conjugated":
            wq = unitary_family_batch(model, lams) @ q0
            phases = np.exp(-1j * dur[:, None] * w0)
            props = np.einsum("mij,mj,mkj->mik", wq, phases, np.conj(wq))
        else:
            ww, qq = np.linalg.eigh(evaluate_hamiltonian_batch(model, lams))
            phases = np.exp(-1j * dur[:, None] * ww)
            props = np.einsum("mij,mj,mkj->mik", qq, phases, np.conj(qq))
        for i in range(props.shape[0]):
            psi = props[i] @ psi
            if snapshots_every is not None:
                g = s0 + i + 1
                if g % 3 == 0 and (g // 3) % snapshots_every == 0:
                    snaps.append(psi.copy())
    drift = float(max_abs(np.linalg.norm(psi, axis=0) - 1.0))
    if drift > 1e-8:
        raise HqcError(
            f"unitarity drift {drift:.3e} exceeds 1e-8; rerun with steps={2 * m_steps}"
        )
    return EvolveResult(
        psi=psi,
        snapshots=np.stack(snaps) if snaps else None,
        steps=m_steps,
        drift=drift,
    )


@dataclass
class OracleSeries:
    """Per-loop-sample diagnostics of the evolving state."""

    times: np.ndarray
    leakage: np.ndarray
    overlap_norm: np.ndarray  # smallest singular value of frame^dag psi


@dataclass
class OracleResult:
    evolved: np.ndarray
    holonomy: np.ndarray
    overlap: np.ndarray
    leakage: float
    flagged: bool
    pre_unitarization_distance: float
    dynamical_phase: complex  # exp(-i E_m T), removed exactly before unitarization
    energy: float
    duration: float
    steps: int = 0
    drift: float = 0.0
    level_index: int = -1
    base_lam: np.ndarray | None = None
    base_frame: np.ndarray | None = None
    adiabaticity: float = float("nan")
    series: OracleSeries | None = None


def extract_holonomy(
    evolved: np.ndarray,
    frame0: np.ndarray,
    energy: float,
    duration: float,
    leakage_tol: float = LEAKAGE_TOL_DEFAULT,
) -> OracleResult:
    """Strip the dynamical phase and project onto the starting frame."""
    evolved = np.asarray(evolved, dtype=complex)
    if evolved.ndim == 1:
        evolved = evolved[:, None]
    overlap = np.exp(1j * energy * duration) * (np.conj(frame0.T) @ evolved)
    outside = evolved - frame0 @ (np.conj(frame0.T) @ evolved)
    leakage = float(np.max(np.linalg.norm(outside, axis=0)))
    u = polar_unitary(overlap)
    dist = max_abs(overlap - u)
    return OracleResult(
        evolved=evolved,
        holonomy=u,
        overlap=overlap,
        leakage=leakage,
        flagged=leakage > leakage_tol,
        pre_unitarization_distance=float(dist),
        dynamical_phase=complex(np.exp(-1j * energy * duration)),
        energy=float(energy),
        duration=float(duration),
    )


def run_oracle(
    model: ModelSpec,
    loop,
    level_index: int,
    steps: int | None = None,
    leakage_tol: float = LEAKAGE_TOL_DEFAULT,
    record_series: bool = False,
    path: FramePath | None = None,
) -> OracleResult:
    """Evolve the level frame around the loop and extract the holonomy."""
    if isinstance(loop, LoopSamples):
        loop = SamplesLoop(points=loop.points, duration=loop.duration)
    report = isospectrality_check(model, loop)
    if not report.passed:
        raise LevelCrossingError(
            f"the oracle needs a constant spectrum: {report.message}"
        )
    ratio = adiabaticity_ratio(model, loop)
    if path is None:
        path = frame_path(model, loop, level_index)
    f0 = path.frames[0].matrix
    m_loop = path.num_steps
    m_steps = steps if steps is not None else default_steps(model, loop)
    m_steps = m_loop * math.ceil(m_steps / m_loop)  # align steps to loop samples
    ev = schrodinger_evolve(
        model, loop, f0, steps=m_steps,
        snapshots_every=(m_steps // m_loop) if record_series else None,
    )
    result = extract_holonomy(ev.psi, f0, path.energy, loop.duration, leakage_tol)
    result.steps = ev.steps
    result.drift = ev.drift
    result.level_index = level_index
    result.base_lam = path.samples.points[0].copy()
    result.base_frame = f0.copy()
    result.adiabaticity = float(ratio)
    if record_series and ev.snapshots is not None:
        times = [0.0]
        leak = [0.0]
        onorm = [1.0]
        for k, snap in enumerate(ev.snapshots, start=1):
            fk = path.frames[k].matrix
            out = snap - fk @ (np.conj(fk.T) @ snap)
            times.append(path.samples.times[k])
            leak.append(float(np.max(np.linalg.norm(out, axis=0))))
            onorm.append(float(np.linalg.svd(np.conj(fk.T) @ snap,
                                             compute_uv=False).min()))
        result.series = OracleSeries(
            times=np.array(times), leakage=np.array(leak),
            overlap_norm=np.array(onorm),
        )
    return result


@dataclass
class SweepResult:
    durations: np.ndarray
    discrepancies: np.ndarray
    leakages: np.ndarray
    exponent: float
    fit_residual: float
    reliable: bool
    monotone: bool
    floor: float
    geometry_method: str


def convergence_sweep(
    model: ModelSpec,
    loop,
    level_index: int,
    durations,
    steps: int | None = None,
    floor: float = SWEEP_FLOOR_DEFAULT,
    leakage_tol: float = LEAKAGE_TOL_DEFAULT,
) -> SweepResult:
    """Oracle-vs-geometry discrepancy as the traversal time grows."""
    durations = np.asarray(sorted(float(t) for t in durations))
    if durations.size < 2:
        raise ValueError("a sweep needs at least two durations")
    path = frame_path(model, loop, level_index)
    geom = holonomy_pexp(model, path, level_index)
    disc = np.empty(durations.size)
    leaks = np.empty(durations.size)
    for i, t in enumerate(durations):
        loop_t = replace(loop, duration=float(t))
        res = run_oracle(model, loop_t, level_index, steps=steps,
                         leakage_tol=leakage_tol, path=path)
        disc[i] = max_abs(res.holonomy - geom.matrix)
        leaks[i] = res.leakage
    above = disc > floor
    reliable = int(above.sum()) >= 3
    monotone = True
    for i in range(durations.size - 1):
        if above[i] and above[i + 1] and disc[i + 1] > disc[i] * 1.1:
            monotone = False
    if reliable:
        x = np.log(durations[above])
        y = np.log(disc[above])
        slope, intercept = np.polyfit(x, y, 1)
        fit = float(np.max(np.abs(y - (slope * x + intercept))))
        exponent = float(-slope)
    else:
        exponent, fit = float("nan"), float("nan")
    return SweepResult(
        durations=durations,
        discrepancies=disc,
        leakages=leaks,
        exponent=exponent,
        fit_residual=fit,
        reliable=reliable,
        monotone=monotone,
        floor=floor,
        geometry_method=geom.method,
    )
