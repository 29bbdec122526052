"""Hamiltonian families, spectral data, and closed parameter loops.

Two model forms are supported.  A conjugated family is an isospectral orbit
H(lam) = V(lam) h0 V(lam)^dag with V(lam) a product of one-parameter unitary
factors exp(-i lam_k G_k), the first listed generator acting on the state
first.  A linear family is H(lam) = sum_k f_k(lam) H_k with the coefficient
functions f_k drawn from a small closed vocabulary so that model files stay
declarative.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    HermiticityError,
    LevelCrossingError,
    ModelFormatError,
    OpenLoopError,
    ParameterCountError,
)
from .matutil import (
    as_complex_matrix,
    hermiticity_residual,
    hermitize,
    matrix_to_pairs,
    max_abs,
    pairs_to_matrix,
)

HERMITICITY_TOL = 1e-12
LOOP_CLOSURE_TOL = 1e-12

COEFFICIENT_KINDS = ("constant", "component", "sin", "cos", "product")


@dataclass(frozen=True)
class CoefficientFn:
    """One scalar function lam -> f(lam) from the closed linear-form vocabulary.

    constant   f = value
    component  f = lam[index]
    sin        f = sin(frequency * lam[index])
    cos        f = cos(frequency * lam[index])
    product    f = value * prod_j factors[j](lam)
    """

    kind: str
    value: float = 1.0
    index: int = 0
    frequency: float = 1.0
    factors: tuple[CoefficientFn, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in COEFFICIENT_KINDS:
            raise ModelFormatError(
                f"unknown coefficient kind {self.kind!r}; allowed: {COEFFICIENT_KINDS}"
            )
        if self.kind == "product" and not self.factors:
            raise ModelFormatError("product coefficient needs at least one factor")
        if self.index < 0:
            raise ModelFormatError("coefficient component index must be nonnegative")

    def values(self, lams: np.ndarray) -> np.ndarray:
        """Evaluate on a stack of parameter vectors, shape (M, N) -> (M,)."""
        lams = np.asarray(lams, dtype=float)
        if self.kind == "constant":
            return np.full(lams.shape[0], self.value)
        if self.kind == "component":
            return lams[:, self.index].copy()
        if self.kind == "sin":
            return np.sin(self.frequency * lams[:, self.index])
        if self.kind == "cos":
            return np.cos(self.frequency * lams[:, self.index])
        out = np.full(lams.shape[0], self.value)
        for f in self.factors:
            out *= f.values(lams)
        return out

    def __call__(self, lam: np.ndarray) -> float:
        return float(self.values(np.asarray(lam, dtype=float)[None, :])[0])

    def gradient(self, lam: np.ndarray) -> np.ndarray:
        """Analytic gradient d f / d lam, shape (N,)."""
        lam = np.asarray(lam, dtype=float)
        g = np.zeros(lam.shape[0])
        if self.kind == "constant":
            return g
        if self.kind == "component":
            g[self.index] = 1.0
        elif self.kind == "sin":
            g[self.index] = self.frequency * np.cos(self.frequency * lam[self.index])
        elif self.kind == "cos":
            g[self.index] = -self.frequency * np.sin(self.frequency * lam[self.index])
        else:
            vals = [f(lam) for f in self.factors]
            for j, f in enumerate(self.factors):
                rest = self.value
                for k, v in enumerate(vals):
                    if k != j:
                        rest *= v
                g += rest * f.gradient(lam)
        return g

    def max_index(self) -> int:
        """Largest parameter component referenced, -1 if none."""
        if self.kind == "constant":
            return -1
        if self.kind == "product":
            return max(f.max_index() for f in self.factors)
        return self.index

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "component":
            return {"kind": "component", "index": self.index}
        if self.kind in ("sin", "cos"):
            return {"kind": self.kind, "index": self.index, "frequency": self.frequency}
        return {
            "kind": "product",
            "value": self.value,
            "factors": [f.to_dict() for f in self.factors],
        }

    @staticmethod
    def from_dict(data: dict) -> CoefficientFn:
        if not isinstance(data, dict) or "kind" not in data:
            raise ModelFormatError("coefficient entries must be objects with a 'kind'")
        kind = data["kind"]
        if kind == "product":
            factors = tuple(CoefficientFn.from_dict(f) for f in data.get("factors", []))
            return CoefficientFn(kind="product", value=float(data.get("value", 1.0)), factors=factors)
        return CoefficientFn(
            kind=kind,
            value=float(data.get("value", 1.0)),
            index=int(data.get("index", 0)),
            frequency=float(data.get("frequency", 1.0)),
        )


@dataclass
class ModelSpec:
    """A validated finite-level Hamiltonian family."""

    n: int
    form: str
    h0: np.ndarray | None = None
    generators: list[np.ndarray] = field(default_factory=list)
    coefficients: list[CoefficientFn] = field(default_factory=list)
    num_params: int = 0

    def __post_init__(self) -> None:
        if self.form not in ("conjugated", "linear"):
            raise ModelFormatError(f"unknown model form {self.form!r}")
        if self.n < 1:
            raise ModelFormatError("state-space dimension must be at least 1")
        self.generators = [as_complex_matrix(g, self.n, self.n) for g in self.generators]
        for k, g in enumerate(self.generators):
            r = hermiticity_residual(g)
            if r > HERMITICITY_TOL:
                raise HermiticityError(
                    f"generator {k} is not Hermitian: residual {r:.3e}"
                )
        if self.form == "conjugated":
            if self.h0 is None:
                raise ModelFormatError("conjugated form requires h0")
            self.h0 = as_complex_matrix(self.h0, self.n, self.n)
            r = hermiticity_residual(self.h0)
            if r > HERMITICITY_TOL:
                raise HermiticityError(f"h0 is not Hermitian: residual {r:.3e}")
            if self.num_params == 0:
                self.num_params = len(self.generators)
            if self.num_params != len(self.generators):
                raise ModelFormatError(
                    f"conjugated form needs one generator per parameter: "
                    f"{len(self.generators)} generators, num_params={self.num_params}"
                )
            # one eigendecomposition per generator, reused by every V(lam) call
            self._gen_eig = [np.linalg.eigh(g) for g in self.generators]
        else:
            if len(self.coefficients) != len(self.generators):
                raise ModelFormatError(
                    f"linear form needs one coefficient per matrix: "
                    f"{len(self.coefficients)} coefficients, {len(self.generators)} matrices"
                )
            if not self.generators:
                raise ModelFormatError("linear form needs at least one term")
            if self.num_params < 1:
                raise ModelFormatError("linear form requires num_params >= 1")
            top = max(f.max_index() for f in self.coefficients)
            if top >= self.num_params:
                raise ModelFormatError(
                    f"coefficient references component {top} but num_params={self.num_params}"
                )
            self._gen_eig = None

    def check_params(self, lam) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        if lam.shape != (self.num_params,):
            raise ParameterCountError(
                f"expected {self.num_params} parameters, got shape {lam.shape}"
            )
        return lam


def unitary_family(model: ModelSpec, lam) -> np.ndarray:
    """V(lam) = exp(-i lam_N G_N) ... exp(-i lam_1 G_1); first factor acts first."""
    lam = model.check_params(lam)
    if model.form != "conjugated":
        raise ModelFormatError("unitary family is defined for conjugated form only")
    v = np.eye(model.n, dtype=complex)
    for k in range(model.num_params):
        w, q = model._gen_eig[k]
        fac = (q * np.exp(-1j * lam[k] * w)) @ np.conj(q.T)
        v = fac @ v
    return v


def unitary_family_batch(model: ModelSpec, lams: np.ndarray) -> np.ndarray:
    """V at a stack of parameter vectors, shape (M, N) -> (M, n, n)."""
    lams = np.asarray(lams, dtype=float)
    if model.form != "conjugated":
        raise ModelFormatError("unitary family is defined for conjugated form only")
    m = lams.shape[0]
    v = np.broadcast_to(np.eye(model.n, dtype=complex), (m, model.n, model.n)).copy()
    for k in range(model.num_params):
        w, q = model._gen_eig[k]
        phases = np.exp(-1j * lams[:, k, None] * w)
        fac = np.einsum("ij,mj,lj->mil", q, phases, np.conj(q))
        v = fac @ v
    return v


def evaluate_hamiltonian(model: ModelSpec, lam) -> np.ndarray:
    lam = model.check_params(lam)
    if model.form == "conjugated":
        v = unitary_family(model, lam)
        return hermitize(v @ model.h0 @ np.conj(v.T))
    h = np.zeros((model.n, model.n), dtype=complex)
    for f, g in zip(model.coefficients, model.generators):
        h += f(lam) * g
    return h


def evaluate_hamiltonian_batch(model: ModelSpec, lams: np.ndarray) -> np.ndarray:
    """H at a stack of parameter vectors, shape (M, N) -> (M, n, n)."""
    lams = np.asarray(lams, dtype=float)
    if lams.ndim != 2 or lams.shape[1] != model.num_params:
        raise ParameterCountError(
            f"expected shape (M, {model.num_params}), got {lams.shape}"
        )
    if model.form == "conjugated":
        v = unitary_family_batch(model, lams)
        h = v @ model.h0 @ np.conj(np.swapaxes(v, 1, 2))
        return 0.5 * (h + np.conj(np.swapaxes(h, 1, 2)))
    vals = np.stack([f.values(lams) for f in model.coefficients])
    gens = np.stack(model.generators)
    return np.einsum("km,kij->mij", vals, gens)


def hamiltonian_derivative(model: ModelSpec, lam) -> np.ndarray:
    """Analytic partials dH/dlam_A, stacked to shape (N, n, n)."""
    lam = model.check_params(lam)
    n, npar = model.n, model.num_params
    out = np.empty((npar, n, n), dtype=complex)
    if model.form == "linear":
        gens = np.stack(model.generators)
        for a in range(npar):
            out[a] = 0.0
        for f, g in zip(model.coefficients, gens):
            grad = f.gradient(lam)
            for a in range(npar):
                if grad[a] != 0.0:
                    out[a] += grad[a] * g
        return out
    # prefix[k] = F_k ... F_1 in application order, so V = prefix[N]
    prefix = [np.eye(n, dtype=complex)]
    for k in range(npar):
        w, q = model._gen_eig[k]
        fac = (q * np.exp(-1j * lam[k] * w)) @ np.conj(q.T)
        prefix.append(fac @ prefix[-1])
    v = prefix[-1]
    vh = np.conj(v.T)
    for a in range(npar):
        pa = prefix[a + 1]
        tail = v @ np.conj(pa.T)
        dv = tail @ (-1j * model.generators[a]) @ pa
        dh = dv @ model.h0 @ vh + v @ model.h0 @ np.conj(dv.T)
        out[a] = hermitize(dh)
    return out


def hamiltonian_derivative_batch(model: ModelSpec, lams: np.ndarray) -> np.ndarray:
    """Analytic partials at a stack of parameter vectors, (M, N) -> (M, N, n, n)."""
    lams = np.asarray(lams, dtype=float)
    if lams.ndim != 2 or lams.shape[1] != model.num_params:
        raise ParameterCountError(
            f"expected shape (M, {model.num_params}), got {lams.shape}"
        )
    if model.form == "linear":
        return np.stack([hamiltonian_derivative(model, lam) for lam in lams])
    m, npar, n = lams.shape[0], model.num_params, model.n
    prefix = [np.broadcast_to(np.eye(n, dtype=complex), (m, n, n)).copy()]
    for k in range(npar):
        w, q = model._gen_eig[k]
        phases = np.exp(-1j * lams[:, k, None] * w)
        fac = np.einsum("ij,mj,lj->mil", q, phases, np.conj(q))
        prefix.append(fac @ prefix[-1])
    v = prefix[-1]
    vh = np.conj(np.swapaxes(v, 1, 2))
    out = np.empty((m, npar, n, n), dtype=complex)
    for a in range(npar):
        pa = prefix[a + 1]
        tail = v @ np.conj(np.swapaxes(pa, 1, 2))
        dv = tail @ (-1j * model.generators[a]) @ pa
        dh = dv @ model.h0 @ vh + v @ model.h0 @ np.conj(np.swapaxes(dv, 1, 2))
        out[:, a] = 0.5 * (dh + np.conj(np.swapaxes(dh, 1, 2)))
    return out


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class SpectralData:
    """Clustered spectrum: level energies, degeneracies, and the minimal gap."""

    energies: tuple[float, ...]
    degeneracies: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.energies) != len(self.degeneracies):
            raise ValueError("energies and degeneracies must align")
        if any(d < 1 for d in self.degeneracies):
            raise ValueError("degeneracies must be positive")
        if any(b <= a for a, b in zip(self.energies, self.energies[1:])):
            raise ValueError("level energies must be strictly increasing")

    @property
    def n(self) -> int:
        return sum(self.degeneracies)

    @property
    def levels(self) -> list[tuple[float, int]]:
        return list(zip(self.energies, self.degeneracies))

    @property
    def gap(self) -> float:
        if len(self.energies) < 2:
            return float("inf")
        return min(b - a for a, b in zip(self.energies, self.energies[1:]))


def default_degeneracy_tol(eigenvalues: np.ndarray) -> float:
    scale = max_abs(eigenvalues)
    return 1e-8 * scale if scale > 0 else 1e-12


def cluster_eigenvalues(eigenvalues: np.ndarray, degeneracy_tol: float) -> list[list[int]]:
    """Group sorted eigenvalues into levels; adjacent gap < tol joins a level."""
    groups: list[list[int]] = [[0]]
    for i in range(1, len(eigenvalues)):
        if eigenvalues[i] - eigenvalues[i - 1] < degeneracy_tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def eigen_decompose(
    h, degeneracy_tol: float | None = None
) -> tuple[SpectralData, list[np.ndarray]]:
    """Reference eigensolver: level-clustered spectrum plus orthonormal blocks."""
    h = as_complex_matrix(h)
    r = hermiticity_residual(h)
    if r > 1e-10:
        raise HermiticityError(f"matrix is not Hermitian: residual {r:.3e}")
    w, q = np.linalg.eigh(hermitize(h))
    if degeneracy_tol is None:
        degeneracy_tol = default_degeneracy_tol(w)
    groups = cluster_eigenvalues(w, degeneracy_tol)
    energies = tuple(float(np.mean(w[g])) for g in groups)
    degs = tuple(len(g) for g in groups)
    blocks = [q[:, g] for g in groups]
    return SpectralData(energies=energies, degeneracies=degs), blocks


# ---------------------------------------------------------------------------
# loops


@dataclass(frozen=True)
class LoopSamples:
    """Uniform-in-time discretization of a closed loop; first point equals last."""

    times: np.ndarray
    points: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))
        if self.points.ndim != 2 or self.times.ndim != 1:
            raise ModelFormatError("loop samples need 1-D times and 2-D points")
        if self.times.shape[0] != self.points.shape[0]:
            raise ModelFormatError("times and points must have equal length")
        if self.times.shape[0] < 3:
            raise ModelFormatError("a loop needs at least 3 sample points")

    @property
    def num_steps(self) -> int:
        return self.points.shape[0] - 1

    @property
    def num_params(self) -> int:
        return self.points.shape[1]

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    def closure_gap(self) -> float:
        return float(np.linalg.norm(self.points[0] - self.points[-1]))


@dataclass(frozen=True)
class SphereCircleLoop:
    """Constant-polar-angle circle (theta, phi0 + 2 pi t / T) in a 2-parameter model."""

    theta: float
    phi0: float = 0.0
    samples: int = 2000
    duration: float = 1000.0

    def __post_init__(self) -> None:
        if self.samples < 3:
            raise ModelFormatError("sample_count must be at least 3")
        if self.duration <= 0:
            raise ModelFormatError("duration must be positive")

    @property
    def num_params(self) -> int:
        return 2

    def at(self, t: float) -> np.ndarray:
        return np.array([self.theta, self.phi0 + 2.0 * np.pi * t / self.duration])

    def at_many(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        return np.stack(
            [np.full(times.shape, self.theta),
             self.phi0 + 2.0 * np.pi * times / self.duration], axis=1,
        )

    def velocity(self, t: float) -> np.ndarray:
        return np.array([0.0, 2.0 * np.pi / self.duration])


@dataclass(frozen=True)
class FourierComponent:
    """One parameter component as a truncated Fourier series in t/T.

    value(t) = constant + sum_j cos_coeffs[j] cos(2 pi (j+1) t / T)
                        + sum_j sin_coeffs[j] sin(2 pi (j+1) t / T)
    """

    constant: float = 0.0
    cos_coeffs: tuple[float, ...] = ()
    sin_coeffs: tuple[float, ...] = ()

    def value(self, phase: float) -> float:
        # phase = 2 pi t / T
        out = self.constant
        for j, c in enumerate(self.cos_coeffs):
            out += c * np.cos((j + 1) * phase)
        for j, s in enumerate(self.sin_coeffs):
            out += s * np.sin((j + 1) * phase)
        return out

    def derivative(self, phase: float, omega: float) -> float:
        # omega = 2 pi / T, derivative with respect to t
        out = 0.0
        for j, c in enumerate(self.cos_coeffs):
            out -= c * (j + 1) * omega * np.sin((j + 1) * phase)
        for j, s in enumerate(self.sin_coeffs):
            out += s * (j + 1) * omega * np.cos((j + 1) * phase)
        return out


@dataclass(frozen=True)
class FourierLoop:
    """Closed loop with each parameter component a truncated Fourier series."""

    components: tuple[FourierComponent, ...]
    samples: int = 2000
    duration: float = 1000.0

    def __post_init__(self) -> None:
        if not self.components:
            raise ModelFormatError("fourier loop needs at least one component")
        if self.samples < 3:
            raise ModelFormatError("sample_count must be at least 3")
        if self.duration <= 0:
            raise ModelFormatError("duration must be positive")

    @property
    def num_params(self) -> int:
        return len(self.components)

    def at(self, t: float) -> np.ndarray:
        phase = 2.0 * np.pi * t / self.duration
        return np.array([c.value(phase) for c in self.components])

    def at_many(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        phases = 2.0 * np.pi * times / self.duration
        out = np.empty((times.shape[0], len(self.components)))
        for i, c in enumerate(self.components):
            col = np.full(times.shape, c.constant)
            for j, amp in enumerate(c.cos_coeffs):
                col += amp * np.cos((j + 1) * phases)
            for j, amp in enumerate(c.sin_coeffs):
                col += amp * np.sin((j + 1) * phases)
            out[:, i] = col
        return out

    def velocity(self, t: float) -> np.ndarray:
        phase = 2.0 * np.pi * t / self.duration
        omega = 2.0 * np.pi / self.duration
        return np.array([c.derivative(phase, omega) for c in self.components])


@dataclass(frozen=True)
class SamplesLoop:
    """Closed loop given by explicit points, linearly interpolated in time."""

    points: np.ndarray
    duration: float = 1000.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))
        if self.points.ndim != 2:
            raise ModelFormatError("samples loop needs a 2-D point list")
        if self.points.shape[0] < 3:
            raise ModelFormatError("sample_count must be at least 3")
        if self.duration <= 0:
            raise ModelFormatError("duration must be positive")
        gap = float(np.linalg.norm(self.points[0] - self.points[-1]))
        if gap > LOOP_CLOSURE_TOL:
            raise OpenLoopError(
                f"explicit loop does not close: |first - last| = {gap:.3e}"
            )

    @property
    def samples(self) -> int:
        return self.points.shape[0] - 1

    @property
    def num_params(self) -> int:
        return self.points.shape[1]

    def at(self, t: float) -> np.ndarray:
        m = self.samples
        s = np.clip(t / self.duration, 0.0, 1.0) * m
        k = min(int(np.floor(s)), m - 1)
        frac = s - k
        return (1.0 - frac) * self.points[k] + frac * self.points[k + 1]

    def at_many(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        s = np.clip(times / self.duration, 0.0, 1.0) * self.samples
        grid = np.arange(self.samples + 1, dtype=float)
        out = np.empty((times.shape[0], self.num_params))
        for c in range(self.num_params):
            out[:, c] = np.interp(s, grid, self.points[:, c])
        return out

    def velocity(self, t: float) -> np.ndarray:
        m = self.samples
        s = np.clip(t / self.duration, 0.0, 1.0) * m
        k = min(int(np.floor(s)), m - 1)
        return (self.points[k + 1] - self.points[k]) * m / self.duration


Loop = SphereCircleLoop | FourierLoop | SamplesLoop


def sample_loop(loop: Loop) -> LoopSamples:
    """Uniform-in-t discretization with M+1 points.

    Fourier loops are periodic in every coordinate, so the endpoint is
    pinned to the start exactly.  The circle kind ends at azimuth
    phi0 + 2 pi on purpose: the loop closes in the family (the Hamiltonian
    is 2 pi periodic in the azimuth), not in the raw coordinates, and the
    final integration step must carry the positive azimuth increment.
    """
    if isinstance(loop, SamplesLoop):
        times = np.linspace(0.0, loop.duration, loop.samples + 1)
        pts = loop.points.copy()
    else:
        m = loop.samples
        times = np.linspace(0.0, loop.duration, m + 1)
        pts = loop.at_many(times)
        if isinstance(loop, FourierLoop):
            pts[-1] = pts[0]
    if max_abs(pts - pts[0]) == 0.0:
        warnings.warn("degenerate loop: all samples coincide, holonomy will be identity")
    return LoopSamples(times=times, points=pts)


def reverse_loop(samples: LoopSamples) -> LoopSamples:
    """The same closed path traversed backwards."""
    return LoopSamples(times=samples.times.copy(), points=samples.points[::-1].copy())


def loop_velocities(loop: Loop, times: np.ndarray) -> np.ndarray:
    return np.stack([loop.velocity(t) for t in times])


# ---------------------------------------------------------------------------
# loop-level checks


@dataclass(frozen=True)
class IsospectralityReport:
    passed: bool
    max_deviation: float
    first_failure_index: int | None
    message: str


def isospectrality_check(
    model: ModelSpec, loop: Loop, tol: float = 1e-10
) -> IsospectralityReport:
    """Spectrum constancy along the loop: energies within tol, pattern fixed."""
    samples = sample_loop(loop)
    eigs = np.linalg.eigvalsh(evaluate_hamiltonian_batch(model, samples.points))
    ref = eigs[0]
    degeneracy_tol = default_degeneracy_tol(ref)
    ref_pattern = tuple(len(g) for g in cluster_eigenvalues(ref, degeneracy_tol))
    dev = np.max(np.abs(eigs - ref), axis=1)
    for k in range(eigs.shape[0]):
        pattern = tuple(len(g) for g in cluster_eigenvalues(eigs[k], degeneracy_tol))
        if pattern != ref_pattern:
            return IsospectralityReport(
                passed=False,
                max_deviation=float(dev.max()),
                first_failure_index=k,
                message=(
                    f"degeneracy pattern changed at sample {k}: "
                    f"{ref_pattern} -> {pattern}"
                ),
            )
        if dev[k] >= tol:
            return IsospectralityReport(
                passed=False,
                max_deviation=float(dev.max()),
                first_failure_index=k,
                message=(
                    f"energy drift {dev[k]:.3e} at sample {k} exceeds tol {tol:.1e}"
                ),
            )
    return IsospectralityReport(
        passed=True,
        max_deviation=float(dev.max()),
        first_failure_index=None,
        message=f"isospectral to {float(dev.max()):.3e} over {eigs.shape[0]} samples",
    )


def adiabaticity_ratio(model: ModelSpec, loop: Loop) -> float:
    """Slowness proxy Omega / omega_min with Omega = max_t |dlam/dt| / (2 pi)."""
    samples = sample_loop(loop)
    eigs = np.linalg.eigvalsh(evaluate_hamiltonian_batch(model, samples.points))
    degeneracy_tol = default_degeneracy_tol(eigs[0])
    ref_pattern = tuple(len(g) for g in cluster_eigenvalues(eigs[0], degeneracy_tol))
    gap = np.inf
    for k in range(eigs.shape[0]):
        groups = cluster_eigenvalues(eigs[k], degeneracy_tol)
        pattern = tuple(len(g) for g in groups)
        if pattern != ref_pattern:
            raise LevelCrossingError(
                f"degeneracy pattern changed at sample {k}: {ref_pattern} -> {pattern}"
            )
        means = [float(np.mean(eigs[k][g])) for g in groups]
        for a, b in zip(means, means[1:]):
            gap = min(gap, b - a)
    if not np.isfinite(gap):
        raise LevelCrossingError("single level: no gap to compare against")
    if gap <= 1e-12:
        raise LevelCrossingError(f"level gap collapses to {gap:.3e} on the loop")
    speeds = np.linalg.norm(loop_velocities(loop, samples.times), axis=1)
    omega_drive = float(speeds.max()) / (2.0 * np.pi)
    return omega_drive / gap


# ---------------------------------------------------------------------------
# serialization


def _decode_json(text: str, what: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(
            f"{what} JSON syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise ModelFormatError(f"{what} file must contain a JSON object")
    return data


def parse_model(text: str) -> ModelSpec:
    data = _decode_json(text, "model")
    try:
        n = int(data["n"])
        form = str(data["form"])
    except KeyError as exc:
        raise ModelFormatError(f"model file missing field {exc}") from exc
    h0 = None
    if "h0" in data and data["h0"] is not None:
        h0 = pairs_to_matrix(data["h0"], n, n)
    gens = [pairs_to_matrix(g, n, n) for g in data.get("generators", [])]
    coeffs = [CoefficientFn.from_dict(c) for c in data.get("coefficients", [])]
    num_params = int(data.get("num_params", len(gens) if form == "conjugated" else 0))
    try:
        return ModelSpec(
            n=n, form=form, h0=h0, generators=gens,
            coefficients=coeffs, num_params=num_params,
        )
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from exc


def model_to_json(model: ModelSpec) -> str:
    data: dict = {"n": model.n, "form": model.form}
    if model.form == "conjugated":
        data["h0"] = matrix_to_pairs(model.h0)
    data["generators"] = [matrix_to_pairs(g) for g in model.generators]
    if model.form == "linear":
        data["coefficients"] = [f.to_dict() for f in model.coefficients]
    data["num_params"] = model.num_params
    return json.dumps(data, indent=2)


def parse_loop(text: str) -> Loop:
    data = _decode_json(text, "loop")
    kind = data.get("kind")
    if kind == "sphere_circle":
        return SphereCircleLoop(
            theta=float(data["theta"]),
            phi0=float(data.get("phi0", 0.0)),
            samples=int(data.get("samples", 2000)),
            duration=float(data.get("duration", 1000.0)),
        )
    if kind == "fourier":
        comps = []
        for c in data.get("components", []):
            comps.append(
                FourierComponent(
                    constant=float(c.get("constant", 0.0)),
                    cos_coeffs=tuple(float(x) for x in c.get("cos", [])),
                    sin_coeffs=tuple(float(x) for x in c.get("sin", [])),
                )
            )
        return FourierLoop(
            components=tuple(comps),
            samples=int(data.get("samples", 2000)),
            duration=float(data.get("duration", 1000.0)),
        )
    if kind == "samples":
        pts = np.asarray(data.get("points", []), dtype=float)
        return SamplesLoop(points=pts, duration=float(data.get("duration", 1000.0)))
    raise ModelFormatError(f"unknown loop kind {kind!r}")


def loop_to_json(loop: Loop) -> str:
    if isinstance(loop, SphereCircleLoop):
        data = {
            "kind": "sphere_circle",
            "theta": loop.theta,
            "phi0": loop.phi0,
            "samples": loop.samples,
            "duration": loop.duration,
        }
    elif isinstance(loop, FourierLoop):
        data = {
            "kind": "fourier",
            "components": [
                {
                    "constant": c.constant,
                    "cos": list(c.cos_coeffs),
                    "sin": list(c.sin_coeffs),
                }
                for c in loop.components
            ],
            "samples": loop.samples,
            "duration": loop.duration,
        }
    elif isinstance(loop, SamplesLoop):
        data = {
            "kind": "samples",
            "points": [[float(x) for x in p] for p in loop.points],
            "duration": loop.duration,
        }
    else:
        raise ModelFormatError(f"cannot serialize loop of type {type(loop).__name__}")
    return json.dumps(data, indent=2)


def load_model(path: str) -> ModelSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


def load_loop(path: str) -> Loop:
    with open(path, encoding="utf-8") as fh:
        return parse_loop(fh.read())
