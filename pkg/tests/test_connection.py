"""Connection 1-form: closed forms, frame differentiation, gauge behavior."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from hqc import catalog
from hqc.connection import (
    connection_abelian_closed,
    connection_closed_form_along,
    connection_closed_form_at,
    connection_frame_at,
    gauge_transform,
    kahler_potential,
)
from hqc.frames import frame_path, select_chart, xi_with_derivative
from hqc.model import (
    evaluate_hamiltonian,
    hamiltonian_derivative,
    sample_loop,
)


def spin_connection_routes(lam, level):
    """The three independent computations of A at one point, one chart."""
    model = catalog.spin_half_model()
    h = evaluate_hamiltonian(model, lam)
    dh = hamiltonian_derivative(model, lam)
    energy = 0.5 if level == 1 else -0.5
    chart = select_chart(h, energy, 1, level_index=level)
    xi, dz = xi_with_derivative(h, dh, energy, 1, chart, lam=lam)
    s_ab = connection_abelian_closed(xi, dz)
    s_cl = connection_closed_form_at(model, lam, level, chart=chart)
    s_fd = connection_frame_at(model, lam, level, chart=chart, h_fd=1e-6)
    return s_ab, s_cl, s_fd


def test_three_routes_agree_at_a_point():
    lam = np.array([1.1, 0.6])
    s_ab, s_cl, s_fd = spin_connection_routes(lam, 1)
    a = s_ab.components[:, 0, 0].real
    b = s_cl.components[:, 0, 0].real
    c = s_fd.components[:, 0, 0].real
    assert np.max(np.abs(a - b)) < 1e-12
    assert np.max(np.abs(a - c)) < 1e-9
    assert np.max(np.abs(b - c)) < 1e-9


def test_spin_half_azimuthal_connection_closed_form():
    # chart keeping row 0: A_phi = cos^2(theta/2) for the upper level,
    # A_theta = 0
    model = catalog.spin_half_model()
    from hqc.frames import Chart

    chart = Chart(kept_rows=(0,), dropped_rows=(1,), level_index=1)
    for theta in (0.4, 1.0, 2.2):
        s = connection_closed_form_at(model, np.array([theta, 1.3]), 1,
                                      chart=chart)
        a_theta, a_phi = s.components[:, 0, 0].real
        assert abs(a_phi - np.cos(theta / 2.0) ** 2) < 1e-12
        assert abs(a_theta) < 1e-12


def test_connection_components_are_hermitian():
    model = catalog.four_level_model()
    rng = np.random.default_rng(9)
    for _ in range(10):
        lam = rng.normal(size=3)
        s = connection_closed_form_at(model, lam, 1)
        for a in range(3):
            m = s.components[a]
            assert np.max(np.abs(m - np.conj(m.T))) == 0.0
        assert s.skew_residual < 1e-10


def test_batched_connection_matches_pointwise():
    model = catalog.four_level_model()
    pts = sample_loop(catalog.four_level_loop(samples=40)).points
    path = frame_path(model, catalog.four_level_loop(samples=40), 1)
    chart = path.segments[0].chart
    energies = np.full(pts.shape[0], 1.0)
    comps, skew = connection_closed_form_along(model, pts, energies, 2, chart)
    assert skew < 1e-10
    for k in range(0, pts.shape[0], 5):
        s = connection_closed_form_at(model, pts[k], 1, chart=chart)
        assert np.max(np.abs(comps[k] - s.components)) < 1e-12


def test_gauge_transform_implements_the_printed_law():
    model = catalog.four_level_model()
    lam = np.array([0.4, -0.2, 0.6])
    s = connection_closed_form_at(model, lam, 1)
    b = np.array([[0.3, 0.1 + 0.2j], [0.1 - 0.2j, -0.5]])

    def u_of(x):
        return expm(1j * float(np.sin(x[0]) + 0.5 * x[1]) * b)

    out = gauge_transform([s], u_of, h_fd=1e-6)[0]
    u = u_of(lam)
    h_fd = 1e-6
    for a in range(3):
        step = np.zeros(3)
        step[a] = h_fd
        du = (u_of(lam + step) - u_of(lam - step)) / (2 * h_fd)
        expected = u @ s.components[a] @ np.conj(u.T) + 1j * du @ np.conj(u.T)
        expected = (expected + np.conj(expected.T)) / 2
        assert np.max(np.abs(out.components[a] - expected)) < 1e-12


def test_gauge_transform_rejects_nonunitary():
    from hqc.errors import NonUnitaryError

    model = catalog.spin_half_model()
    s = connection_closed_form_at(model, np.array([0.9, 0.1]), 1)
    with pytest.raises(NonUnitaryError):
        gauge_transform([s], lambda lam: np.array([[2.0]]))


def test_kahler_potential_variants():
    assert abs(kahler_potential(2.0) - np.log(5.0)) < 1e-15
    col = np.array([[0.3 + 0.1j], [0.2j]])
    assert abs(kahler_potential(col) - np.log1p(0.14)) < 1e-15
    z = np.array([[0.3, 0.1j], [0.2, 0.5]])
    gram = np.eye(2) + np.conj(z.T) @ z
    assert abs(kahler_potential(z) - np.log(np.linalg.det(gram).real)) < 1e-14


def test_curvature_matches_analytic_solid_angle_density():
    # F_theta_phi = d_theta A_phi - d_phi A_theta = -sin(theta)/2 for the
    # upper level, +sin(theta)/2 for the lower, in any chart
    model = catalog.spin_half_model()
    h = 1e-5
    for level, sign in ((1, -1.0), (0, +1.0)):
        for theta, phi in ((0.7, 0.3), (1.9, 4.1)):
            lam = np.array([theta, phi])
            energy = 0.5 if level == 1 else -0.5
            chart = select_chart(evaluate_hamiltonian(model, lam), energy, 1,
                                 level_index=level)

            def a_at(pt):
                s = connection_closed_form_at(model, pt, level, chart=chart)
                return s.components[:, 0, 0].real

            d_theta = (a_at(lam + [h, 0]) - a_at(lam - [h, 0])) / (2 * h)
            d_phi = (a_at(lam + [0, h]) - a_at(lam - [0, h])) / (2 * h)
            curv = d_theta[1] - d_phi[0]
            assert abs(curv - sign * np.sin(theta) / 2.0) < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_property_connection_is_hermitian_and_chart_consistent(seed):
    rng = np.random.default_rng(seed)
    model = catalog.four_level_model()
    lam = rng.normal(size=3) * 1.2
    level = int(rng.integers(0, 2))
    s = connection_closed_form_at(model, lam, level)
    assert s.components.shape == (3, 2, 2)
    for a in range(3):
        assert np.max(np.abs(s.components[a]
                             - np.conj(s.components[a].T))) == 0.0
    assert s.skew_residual < 1e-8
