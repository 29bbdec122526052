"""Loop holonomies: Berry phases, path-ordered products, projector products."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.linalg import expm

from hqc import catalog
from hqc.connection import ConnectionSample, connection_closed_form_along
from hqc.errors import OpenLoopError
from hqc.frames import frame_path
from hqc.holonomy import (
    berry_phase_abelian,
    berry_phase_for_loop,
    compose_loops,
    compute_holonomy,
    holonomy_pexp,
    holonomy_projector,
    pexp_from_samples,
    solid_angle,
)
from hqc.matutil import max_abs
from hqc.model import SamplesLoop, SphereCircleLoop, reverse_loop, sample_loop

# path-ordered product of the upper-level frame around the shipped 4-level
# loop at M=4000, frozen from a run cross-checked against the projector
# product (1.2e-7 apart) and the T=1e4 adiabatic oracle (1.4e-4 apart)
FOUR_LEVEL_U_PEXP = np.array(
    [[0.9687226411877 - 0.0005939114345j, 0.0197806397658 + 0.2473556508551j],
     [-0.0195927195960 + 0.2473706066984j, 0.9687228128369 - 0.0001420209583j]]
)


def circdist(x: float, y: float) -> float:
    """Distance between two angles on the circle."""
    return abs(complex(np.exp(1j * (x - y))) - 1.0)


# ---------------------------------------------------------------------------
# abelian phases


def test_berry_phase_equator_is_half_solid_angle():
    model = catalog.spin_half_model()
    loop = catalog.equator_loop()
    for level, sign in ((1, -1.0), (0, +1.0)):
        phase = berry_phase_for_loop(model, loop, level)
        assert circdist(phase.raw, sign * np.pi) < 1e-9


def test_berry_phase_circle_matches_solid_angle_law():
    model = catalog.spin_half_model()
    for theta in (np.pi / 6, np.pi / 3, 2 * np.pi / 3):
        omega = 2 * np.pi * (1 - np.cos(theta))
        loop = catalog.circle_loop(theta)
        gp = berry_phase_for_loop(model, loop, 1).raw
        gm = berry_phase_for_loop(model, loop, 0).raw
        assert circdist(gp, -omega / 2) < 1e-9
        assert circdist(gm, +omega / 2) < 1e-9
        assert circdist(gp + gm, 0.0) < 1e-9


def test_berry_phase_abelian_rejects_open_sample_sets():
    model = catalog.spin_half_model()
    from hqc.connection import connection_closed_form_at

    lams = [np.array([0.5 + 0.01 * k, 0.2 * k]) for k in range(5)]
    samples = [connection_closed_form_at(model, lam, 1) for lam in lams]
    with pytest.raises(OpenLoopError):
        berry_phase_abelian(samples)


def test_trivial_loop_gives_zero_phase_and_identity():
    model = catalog.spin_half_model()
    pts = np.tile([[1.0, 0.7]], (50, 1))
    loop = SamplesLoop(points=pts, duration=5.0)
    phase = berry_phase_for_loop(model, loop, 1)
    assert abs(phase.raw) < 1e-12
    hol = compute_holonomy(model, loop, 1, method="pexp")
    assert max_abs(hol.matrix - np.eye(1)) < 1e-12


def test_pole_crossing_loop_holonomy_is_trivial():
    # the loop encloses zero signed area; it also forces two chart switches,
    # so the folded product exercises the switch bookkeeping
    model = catalog.spin_half_model()
    loop = catalog.pole_crossing_loop()
    for level in (0, 1):
        path = frame_path(model, loop, level)
        assert len(path.switches) == 2
        hol = holonomy_pexp(model, path, level)
        assert max_abs(hol.matrix - np.eye(1)) < 1e-10


# ---------------------------------------------------------------------------
# solid angle


def test_solid_angle_closed_form_and_fan():
    loop = SphereCircleLoop(theta=0.9, samples=400, duration=10.0)
    exact = 2 * np.pi * (1 - np.cos(0.9))
    assert abs(solid_angle(loop) - exact) < 1e-14
    pts = sample_loop(loop).points
    fan = solid_angle(SamplesLoop(points=np.vstack([pts[:-1], pts[:1]]),
                                  duration=10.0))
    assert abs(fan - exact) < 1e-3


# ---------------------------------------------------------------------------
# non-Abelian holonomies


def test_four_level_holonomy_matches_frozen_value():
    model = catalog.four_level_model()
    path = frame_path(model, catalog.four_level_loop(samples=4000), 1)
    hol = holonomy_pexp(model, path, 1)
    assert hol.steps == 4000
    assert max_abs(hol.matrix - FOUR_LEVEL_U_PEXP) < 1e-9
    # genuinely non-Abelian: far from the identity and from its transpose
    assert max_abs(hol.matrix - np.eye(2)) > 0.2
    assert max_abs(hol.matrix - hol.matrix.T) > 0.03


def test_holonomy_is_unitary():
    cases = [
        (catalog.spin_half_model(), catalog.circle_loop(np.pi / 3), 1),
        (catalog.four_level_model(), catalog.four_level_loop(), 1),
        (catalog.drifting_model(), catalog.drifting_loop(), 0),
    ]
    for model, loop, level in cases:
        path = frame_path(model, loop, level)
        for method in (holonomy_pexp, holonomy_projector):
            hol = method(model, path, level)
            d = hol.matrix.shape[0]
            assert max_abs(hol.matrix @ np.conj(hol.matrix.T) - np.eye(d)) < 1e-8
            assert hol.unitarity_residual < 1e-8


def test_projector_and_pexp_agree_and_tighten_with_steps():
    model = catalog.four_level_model()
    gaps = {}
    for m in (4000, 8000):
        path = frame_path(model, catalog.four_level_loop(samples=m), 1)
        gap = max_abs(holonomy_pexp(model, path, 1).matrix
                      - holonomy_projector(model, path, 1).matrix)
        gaps[m] = gap
    assert gaps[4000] < 1e-6
    assert gaps[8000] <= gaps[4000] / 2.0


def test_reversed_loop_gives_inverse_holonomy():
    model = catalog.four_level_model()
    loop = catalog.four_level_loop(samples=2000)
    fwd_path = frame_path(model, loop, 1)
    rev_path = frame_path(model, reverse_loop(sample_loop(loop)), 1)
    u = holonomy_pexp(model, fwd_path, 1).matrix
    v = holonomy_pexp(model, rev_path, 1).matrix
    assert max_abs(v - np.conj(u.T)) < 1e-8


def test_compose_loops_multiplies_holonomies():
    from hqc.errors import BasePointMismatchError

    model = catalog.four_level_model()
    loop = catalog.four_level_loop(samples=1000)
    path = frame_path(model, loop, 1)
    hol = holonomy_pexp(model, path, 1)
    doubled = compose_loops(hol, hol)
    assert max_abs(doubled.matrix - hol.matrix @ hol.matrix) < 1e-12
    assert doubled.steps == 2000
    other = holonomy_pexp(model, frame_path(model, loop, 0), 0)
    with pytest.raises(BasePointMismatchError):
        compose_loops(hol, other)


def test_gauge_covariance_of_the_transported_product():
    """Samplewise gauge change conjugates the transport by the base-point
    gauge; a real orthogonal gauge makes that the plain U0 U U0^dag law."""
    from hqc.connection import gauge_transform

    model = catalog.four_level_model()
    loop = catalog.four_level_loop(samples=2000)
    path = frame_path(model, loop, 1)
    pts = path.samples.points
    mids = 0.5 * (pts[1:] + pts[:-1])
    deltas = pts[1:] - pts[:-1]
    en = np.full(mids.shape[0], path.energy)
    comps, skew = connection_closed_form_along(model, mids, en, 2,
                                               path.segments[0].chart)
    samples = [ConnectionSample(lam=mids[k], components=comps[k],
                                skew_residual=skew)
               for k in range(mids.shape[0])]
    u_plain = pexp_from_samples(samples, deltas)

    j = np.array([[0.0, 1.0], [-1.0, 0.0]])

    def u_of(lam):
        s = 0.4 * np.sin(lam[0]) + 0.3 * np.cos(lam[1] + 0.2) + 0.2 * lam[2]
        return expm(s * j)

    transformed = gauge_transform(samples, u_of, h_fd=1e-5)
    u_prime = pexp_from_samples(transformed, deltas)
    u0 = u_of(pts[0])
    assert max_abs(u_prime - u0 @ u_plain @ np.conj(u0.T)) < 1e-6


def test_compute_holonomy_driver_dispatch():
    model = catalog.spin_half_model()
    loop = catalog.circle_loop(np.pi / 3, samples=800)
    a = compute_holonomy(model, loop, 1, method="pexp")
    b = compute_holonomy(model, loop, 1, method="projector")
    assert a.method == "pexp" and b.method == "projector"
    # projector defect on a circle scales as 1/M^2; at M=800 it sits near 6e-6
    assert max_abs(a.matrix - b.matrix) < 1e-5
    with pytest.raises(ValueError):
        compute_holonomy(model, loop, 1, method="magic")
