"""Root gates for su(n), synthesis of unitaries, and the bosonic realization.

Algebra indices in this module are 1-based, matching the usual labeling of
the A_{n-1} root system: positive roots are pairs (i, j) with
1 <= i < j <= n, the raising element is the matrix unit e_ij, and the
Cartan generators are H_i = e_ii - e_{i+1,i+1}.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import ModelFormatError, NonUnitaryError, SectorTooLargeError
from .matutil import max_abs, require_unitary


def positive_roots(n: int) -> list[tuple[int, int]]:
    """Ordered positive roots of A_{n-1} as index pairs, 1-based."""
    if n < 2:
        raise ValueError("the root system needs n >= 2")
    return [(i, j) for i, j in combinations(range(1, n + 1), 2)]


def positive_root_count(n: int) -> int:
    roots = positive_roots(n)
    count = n * (n - 1) // 2
    assert len(roots) == count
    return count


def cartan_generator(n: int, i: int) -> np.ndarray:
    """H_i = e_ii - e_{i+1,i+1}, 1 <= i <= n-1."""
    if not 1 <= i <= n - 1:
        raise ValueError(f"Cartan index {i} out of range for n={n}")
    h = np.zeros((n, n), dtype=complex)
    h[i - 1, i - 1] = 1.0
    h[i, i] = -1.0
    return h


def root_gate(n: int, alpha: tuple[int, int], zeta: complex) -> np.ndarray:
    """U_alpha = exp(zeta e_ij - conj(zeta) e_ji) for the positive root (i, j).

    Acts as the identity outside rows i and j; on that 2x2 block, with
    zeta = r e^{i phi}, it is [[cos r, e^{i phi} sin r],
    [-e^{-i phi} sin r, cos r]].
    """
    i, j = alpha
    if not (1 <= i < j <= n):
        raise ValueError(f"root ({i},{j}) out of range for n={n}")
    zeta = complex(zeta)
    u = np.eye(n, dtype=complex)
    r = abs(zeta)
    if r == 0.0:
        return u
    phase = zeta / r
    a, b = i - 1, j - 1
    u[a, a] = math.cos(r)
    u[b, b] = math.cos(r)
    u[a, b] = phase * math.sin(r)
    u[b, a] = -np.conj(phase) * math.sin(r)
    return u


def cartan_factor(n: int, y) -> np.ndarray:
    """Diagonal unitary exp(i sum_k y_k H_k); entries carry y_k - y_{k-1}."""
    y = np.asarray(y, dtype=float)
    if y.shape != (n - 1,):
        raise ValueError(f"Cartan parameters must have length {n - 1}")
    padded = np.concatenate([[0.0], y, [0.0]])
    # diagonal entry l picks up y_l - y_{l-1} (1-based), telescoping to det 1
    return np.diag(np.exp(1j * (padded[1: n + 1] - padded[0: n])))


def generic_element(n: int, y, gates) -> np.ndarray:
    """exp(i sum y_k H_k) times the listed root gates, leftmost applied first
    in the product order as written (the Cartan factor is the left factor)."""
    u = cartan_factor(n, y)
    for alpha, zeta in gates:
        u = u @ root_gate(n, alpha, zeta)
    return u


@dataclass(frozen=True)
class RootGateTerm:
    i: int
    j: int
    zeta: complex


@dataclass
class GateSequence:
    """Cartan parameters plus ordered root gates realizing one unitary."""

    n: int
    cartan: np.ndarray
    gates: list[RootGateTerm] = field(default_factory=list)

    def reconstruct(self) -> np.ndarray:
        return generic_element(
            self.n, self.cartan, [((g.i, g.j), g.zeta) for g in self.gates]
        )

    def to_json(self) -> str:
        data = {
            "n": self.n,
            "cartan": [float(v) for v in self.cartan],
            "gates": [
                {"i": g.i, "j": g.j,
                 "zeta": [float(g.zeta.real), float(g.zeta.imag)]}
                for g in self.gates
            ],
        }
        return json.dumps(data, indent=2)

    @staticmethod
    def from_json(text: str) -> GateSequence:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(
                f"gate sequence JSON syntax error at line {exc.lineno}, "
                f"column {exc.colno}: {exc.msg}"
            ) from exc
        gates = [
            RootGateTerm(i=int(g["i"]), j=int(g["j"]),
                         zeta=complex(g["zeta"][0], g["zeta"][1]))
            for g in data.get("gates", [])
        ]
        return GateSequence(
            n=int(data["n"]),
            cartan=np.asarray(data.get("cartan", []), dtype=float),
            gates=gates,
        )


def _canonical_zeta(zeta: complex) -> complex:
    """Branch fixing: r in [0, pi], phi in (-pi, pi]."""
    r = abs(zeta)
    if r < 1e-300:
        return 0.0 + 0.0j
    r_mod = math.fmod(r, 2.0 * math.pi)
    if r_mod < 0:
        r_mod += 2.0 * math.pi
    phi = math.atan2(zeta.imag, zeta.real)
    if r_mod > math.pi:
        # (r, phi) and (2 pi - r, phi + pi) give the same gate
        r_mod = 2.0 * math.pi - r_mod
        phi = phi + math.pi
    phi = math.fmod(phi + math.pi, 2.0 * math.pi) - math.pi
    if phi <= -math.pi:
        phi += 2.0 * math.pi
    return r_mod * complex(math.cos(phi), math.sin(phi))


def decompose_su_n(u_target, tol: float = 1e-8) -> GateSequence:
    """Synthesize a special unitary as a Cartan factor times root gates.

    Givens-style elimination: walking columns left to right and rows bottom
    up, each subdiagonal entry is zeroed by one root gate, leaving a
    diagonal unitary that the Cartan factor absorbs.  At most n(n-1)/2
    gates are emitted; the round-trip residual is checked against tol.
    """
    u_target = np.asarray(u_target, dtype=complex)
    n = u_target.shape[0]
    require_unitary(u_target, 1e-10, "synthesis target")
    det = complex(np.linalg.det(u_target))
    if abs(det - 1.0) > 1e-8:
        raise NonUnitaryError(
            f"synthesis target must have determinant 1, got {det:.6f}"
        )
    a = u_target.copy()
    applied: list[tuple[int, int, complex]] = []  # 0-based pairs, zeta used
    for col in range(n - 1):
        for row in range(n - 1, col, -1):
            if abs(a[row, col]) < 1e-14:
                continue
            if abs(a[col, col]) < 1e-14:
                r, phi = math.pi / 2.0, 0.0
            else:
                q = a[row, col] / a[col, col]
                r = math.atan(abs(q))
                phi = -math.atan2(q.imag, q.real)
            zeta = r * complex(math.cos(phi), math.sin(phi))
            g = root_gate(n, (col + 1, row + 1), zeta)
            a = g @ a
            applied.append((col, row, zeta))
    # a is now diagonal and unitary: the Cartan factor
    off = a - np.diag(np.diagonal(a))
    if max_abs(off) > 1e-9:
        raise NonUnitaryError(
            f"elimination left off-diagonal residue {max_abs(off):.3e}"
        )
    deltas = np.angle(np.diagonal(a))
    y = np.cumsum(deltas)[: n - 1]
    # U = D prod_k (D^dag G_k^dag D); conjugation keeps each factor a root gate
    terms: list[RootGateTerm] = []
    for i0, j0, zeta in applied:
        zshift = -zeta * np.exp(1j * (deltas[j0] - deltas[i0]))
        zcanon = _canonical_zeta(complex(zshift))
        if abs(zcanon) < 1e-14:
            continue
        terms.append(RootGateTerm(i=i0 + 1, j=j0 + 1, zeta=zcanon))
    seq = GateSequence(n=n, cartan=y, gates=terms)
    err = max_abs(seq.reconstruct() - u_target)
    if err > tol:
        raise NonUnitaryError(
            f"synthesis round-trip error {err:.3e} exceeds tol {tol:.1e}"
        )
    return seq


# ---------------------------------------------------------------------------
# truncated bosonic realization

SECTOR_DIMENSION_CAP = 10_000


@dataclass
class FockRealization:
    """Number-conserving bosonic operators on the total-excitation-N sector.

    The sector basis is ordered highest weight first: occupation vectors in
    descending lexicographic order, beginning with (N, 0, ..., 0).  The map
    e_ij -> matrix of a_i^dag a_j is an exact Lie-algebra homomorphism since
    number-conserving quadratics close on the sector.
    """

    modes: int
    total: int
    basis: list[tuple[int, ...]]
    index: dict[tuple[int, ...], int]

    @property
    def dim(self) -> int:
        return len(self.basis)

    def ladder_matrix(self, i: int, j: int) -> np.ndarray:
        """Matrix of a_i^dag a_j, indices 1-based."""
        if not (1 <= i <= self.modes and 1 <= j <= self.modes):
            raise ValueError(f"mode index out of range: ({i},{j})")
        m = np.zeros((self.dim, self.dim), dtype=complex)
        i0, j0 = i - 1, j - 1
        for col, occ in enumerate(self.basis):
            if i == j:
                m[col, col] = occ[i0]
                continue
            if occ[j0] == 0:
                continue
            target = list(occ)
            target[j0] -= 1
            target[i0] += 1
            row = self.index[tuple(target)]
            m[row, col] = math.sqrt(occ[j0] * (occ[i0] + 1))
        return m

    def cartan_matrix(self, i: int) -> np.ndarray:
        """Matrix of the number difference n_i - n_{i+1}, 1-based."""
        if not 1 <= i <= self.modes - 1:
            raise ValueError(f"Cartan index {i} out of range")
        return self.ladder_matrix(i, i) - self.ladder_matrix(i + 1, i + 1)

    def highest_weight_index(self) -> int:
        return self.index[(self.total,) + (0,) * (self.modes - 1)]


def _occupations(modes: int, total: int) -> list[tuple[int, ...]]:
    if modes == 1:
        return [(total,)]
    out = []
    for head in range(total, -1, -1):
        for rest in _occupations(modes - 1, total - head):
            out.append((head,) + rest)
    return out


def fock_realization(modes: int, total: int) -> FockRealization:
    if modes < 2 or total < 1:
        raise ValueError("need at least 2 modes and 1 excitation")
    dim = math.comb(total + modes - 1, modes - 1)
    if dim > SECTOR_DIMENSION_CAP:
        raise SectorTooLargeError(
            f"sector dimension {dim} exceeds the dense cap {SECTOR_DIMENSION_CAP}"
        )
    basis = _occupations(modes, total)
    assert len(basis) == dim
    index = {occ: k for k, occ in enumerate(basis)}
    return FockRealization(modes=modes, total=total, basis=basis, index=index)
