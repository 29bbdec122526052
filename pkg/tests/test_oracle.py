"""Adiabatic Schrodinger oracle: evolution, extraction, convergence."""

from __future__ import annotations

import numpy as np
import pytest

from hqc import catalog
from hqc.errors import LevelCrossingError
from hqc.frames import frame_path
from hqc.holonomy import holonomy_pexp
from hqc.matutil import max_abs
from hqc.model import adiabaticity_ratio, evaluate_hamiltonian
from hqc.oracle import (
    convergence_sweep,
    default_steps,
    run_oracle,
    schrodinger_evolve,
)


def test_evolution_is_unitary_and_reproducible():
    model = catalog.spin_half_model()
    loop = catalog.circle_loop(np.pi / 3, samples=500, duration=200.0)
    psi0 = np.eye(2, dtype=complex)
    res = schrodinger_evolve(model, loop, psi0, steps=2000)
    assert res.drift < 1e-10
    u = res.psi
    assert max_abs(u @ np.conj(u.T) - np.eye(2)) < 1e-10
    res2 = schrodinger_evolve(model, loop, psi0, steps=2000)
    assert max_abs(res.psi - res2.psi) == 0.0


def test_static_hamiltonian_evolution_matches_exact_exponential():
    from scipy.linalg import expm

    model = catalog.spin_half_model()
    pts = np.tile([[1.1, 0.4]], (30, 1))
    from hqc.model import SamplesLoop

    loop = SamplesLoop(points=pts, duration=7.0)
    h = evaluate_hamiltonian(model, pts[0])
    res = schrodinger_evolve(model, loop, np.eye(2, dtype=complex), steps=600)
    exact = expm(-1j * 7.0 * h)
    assert max_abs(res.psi - exact) < 1e-10


def test_default_steps_scales_with_duration_and_energy():
    model = catalog.four_level_model()
    short = default_steps(model, catalog.four_level_loop(duration=10.0))
    long = default_steps(model, catalog.four_level_loop(duration=10000.0))
    assert long > short
    assert short >= 4000  # never below the loop grid


def test_spin_half_oracle_discrepancy_matches_quadratic_leakage_law():
    # pexp geometry vs T=1000 oracle at theta = pi/3: the phase error scales
    # as pi^2 sin^2(theta) / T; frozen at 7.43e-3
    model = catalog.spin_half_model()
    loop = catalog.circle_loop(np.pi / 3, duration=1000.0)
    res = run_oracle(model, loop, 1)
    hol = holonomy_pexp(model, frame_path(model, loop, 1), 1)
    disc = max_abs(res.holonomy - hol.matrix)
    assert abs(disc - 7.43e-3) < 3e-4
    assert not res.flagged
    assert res.pre_unitarization_distance < 1e-3


def test_oracle_extracts_dynamical_phase_exactly():
    model = catalog.spin_half_model()
    loop = catalog.circle_loop(np.pi / 3, duration=500.0)
    res = run_oracle(model, loop, 1)
    assert abs(res.energy - 0.5) < 1e-12
    expected = complex(np.exp(-1j * res.energy * res.duration))
    assert abs(res.dynamical_phase - expected) < 1e-12


def test_oracle_flags_fast_traversal():
    model = catalog.four_level_model()
    loop = catalog.four_level_loop(duration=40.0)
    res = run_oracle(model, loop, 1)
    assert res.flagged
    assert res.leakage > 1e-2
    # flagged results are still returned in full
    assert res.holonomy.shape == (2, 2)


def test_oracle_series_is_recorded_on_request():
    model = catalog.spin_half_model()
    loop = catalog.circle_loop(np.pi / 3, samples=300, duration=300.0)
    res = run_oracle(model, loop, 1, record_series=True)
    series = res.series
    assert series is not None
    assert series.times.shape == series.leakage.shape
    assert series.leakage[0] == 0.0
    assert np.all(series.overlap_norm <= 1.0 + 1e-12)


def test_oracle_rejects_drifting_spectrum():
    model = catalog.drifting_model()
    with pytest.raises(LevelCrossingError):
        run_oracle(model, catalog.drifting_loop(), 0)


def test_convergence_sweep_tightens_with_duration():
    model = catalog.spin_half_model()
    loop = catalog.circle_loop(np.pi / 3, samples=1000)
    sweep = convergence_sweep(model, loop, 1, durations=(125.0, 250.0, 500.0))
    assert sweep.monotone
    assert sweep.reliable
    assert abs(sweep.exponent - 1.0) < 0.1
    assert np.all(np.diff(sweep.discrepancies) < 0)


def test_adiabaticity_ratio_inverse_duration():
    model = catalog.spin_half_model()
    for t in (100.0, 1000.0):
        r = adiabaticity_ratio(model, catalog.circle_loop(np.pi / 2, duration=t))
        assert abs(r - 1.0 / t) < 1e-12
