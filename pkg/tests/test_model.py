"""Model layer: families, loops, file formats, spectral bookkeeping."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hqc import catalog
from hqc.errors import (
    HermiticityError,
    ModelFormatError,
    OpenLoopError,
    ParameterCountError,
)
from hqc.model import (
    CoefficientFn,
    FourierComponent,
    FourierLoop,
    ModelSpec,
    SamplesLoop,
    SphereCircleLoop,
    adiabaticity_ratio,
    cluster_eigenvalues,
    eigen_decompose,
    evaluate_hamiltonian,
    evaluate_hamiltonian_batch,
    hamiltonian_derivative,
    hamiltonian_derivative_batch,
    isospectrality_check,
    loop_to_json,
    loop_velocities,
    model_to_json,
    parse_loop,
    parse_model,
    reverse_loop,
    sample_loop,
    unitary_family,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def bloch_hamiltonian(theta: float, phi: float) -> np.ndarray:
    nx = np.sin(theta) * np.cos(phi)
    ny = np.sin(theta) * np.sin(phi)
    nz = np.cos(theta)
    return 0.5 * (nx * SX + ny * SY + nz * SZ)


# ---------------------------------------------------------------------------
# family evaluation


def test_spin_half_matches_bloch_form():
    model = catalog.spin_half_model()
    for theta, phi in [(0.3, 0.0), (1.2, 2.5), (2.8, 4.0), (np.pi / 2, 1.0)]:
        h = evaluate_hamiltonian(model, np.array([theta, phi]))
        assert np.max(np.abs(h - bloch_hamiltonian(theta, phi))) < 1e-12


def test_conjugated_family_is_exactly_isospectral():
    model = catalog.four_level_model()
    rng = np.random.default_rng(0)
    w0 = np.linalg.eigvalsh(model.h0)
    for _ in range(20):
        lam = rng.normal(size=3) * 2.0
        w = np.linalg.eigvalsh(evaluate_hamiltonian(model, lam))
        assert np.max(np.abs(w - w0)) < 1e-12


def test_unitary_family_is_unitary_and_ordered():
    model = catalog.four_level_model()
    lam = np.array([0.3, -1.1, 0.7])
    v = unitary_family(model, lam)
    assert np.max(np.abs(v @ v.conj().T - np.eye(4))) < 1e-12
    # leftmost generator applied first means it sits rightmost in the product
    from scipy.linalg import expm

    factors = [expm(-1j * lam[k] * model.generators[k]) for k in range(3)]
    expected = factors[2] @ factors[1] @ factors[0]
    assert np.max(np.abs(v - expected)) < 1e-12


def test_hamiltonian_derivative_matches_finite_differences():
    h_fd = 1e-6
    for model in (catalog.spin_half_model(), catalog.four_level_model(),
                  catalog.drifting_model()):
        rng = np.random.default_rng(1)
        lam = rng.normal(size=model.num_params) * 0.7
        dh = hamiltonian_derivative(model, lam)
        for a in range(model.num_params):
            step = np.zeros(model.num_params)
            step[a] = h_fd
            num = (evaluate_hamiltonian(model, lam + step)
                   - evaluate_hamiltonian(model, lam - step)) / (2 * h_fd)
            assert np.max(np.abs(dh[a] - num)) < 5e-9


def test_batch_evaluation_matches_scalar():
    for model in (catalog.four_level_model(), catalog.drifting_model()):
        rng = np.random.default_rng(2)
        lams = rng.normal(size=(17, model.num_params))
        hams = evaluate_hamiltonian_batch(model, lams)
        dhams = hamiltonian_derivative_batch(model, lams)
        for k in range(17):
            assert np.max(np.abs(hams[k] - evaluate_hamiltonian(model, lams[k]))) < 1e-13
            assert np.max(np.abs(dhams[k] - hamiltonian_derivative(model, lams[k]))) < 1e-12


def test_parameter_count_is_enforced():
    model = catalog.spin_half_model()
    with pytest.raises(ParameterCountError):
        evaluate_hamiltonian(model, np.array([0.1, 0.2, 0.3]))


def test_non_hermitian_base_is_rejected():
    with pytest.raises(HermiticityError):
        ModelSpec(
            n=2,
            form="conjugated",
            h0=np.array([[0.0, 1.0], [0.0, 0.0]]),
            generators=(0.5 * SY,),
            num_params=1,
        )


# ---------------------------------------------------------------------------
# loops


def test_sphere_circle_sample_advances_a_full_turn():
    loop = SphereCircleLoop(theta=1.0, phi0=0.25, samples=64, duration=8.0)
    samples = sample_loop(loop)
    assert samples.points.shape == (65, 2)
    assert abs(samples.points[0, 1] - 0.25) < 1e-15
    # the azimuth ends one full period up; the family is periodic, the
    # coordinate is not pinned back
    assert abs(samples.points[-1, 1] - (0.25 + 2 * np.pi)) < 1e-12
    assert np.max(np.abs(samples.points[:, 0] - 1.0)) < 1e-15


def test_fourier_loop_endpoint_is_pinned():
    loop = catalog.four_level_loop(samples=101)
    samples = sample_loop(loop)
    assert np.max(np.abs(samples.points[-1] - samples.points[0])) == 0.0


def test_open_sample_list_is_rejected():
    pts = np.array([[0.0, 0.0], [0.5, 0.2], [1.0, 0.6], [1.5, 1.0]])
    with pytest.raises(OpenLoopError):
        SamplesLoop(points=pts, duration=1.0)


def test_reverse_loop_reverses_points():
    fwd = sample_loop(catalog.drifting_loop(samples=32))
    rev = reverse_loop(fwd)
    assert np.max(np.abs(rev.points - fwd.points[::-1])) < 1e-12
    assert np.max(np.abs(rev.times - fwd.times)) < 1e-12


def test_loop_velocities_match_finite_differences():
    loop = SphereCircleLoop(theta=0.8, phi0=0.0, samples=200, duration=20.0)
    samples = sample_loop(loop)
    vel = loop_velocities(loop, samples.times)
    num = np.gradient(samples.points, samples.times, axis=0)
    assert np.max(np.abs(vel[3:-3] - num[3:-3])) < 1e-3


# ---------------------------------------------------------------------------
# spectra


def test_eigen_decompose_clusters_degenerate_levels():
    model = catalog.four_level_model()
    spectral, blocks = eigen_decompose(evaluate_hamiltonian(model, np.zeros(3)))
    assert np.allclose(spectral.energies, (-1.0, 1.0), atol=1e-12)
    assert spectral.degeneracies == (2, 2)
    for blk in blocks:
        assert np.max(np.abs(blk.conj().T @ blk - np.eye(2))) < 1e-12


def test_cluster_eigenvalues_splits_on_gap():
    w = np.array([-1.0, -1.0 + 1e-12, 0.5, 0.50001])
    groups = cluster_eigenvalues(w, 1e-8)
    assert [len(g) for g in groups] == [2, 1, 1]


def test_isospectrality_check_passes_conjugated():
    model = catalog.four_level_model()
    report = isospectrality_check(model, catalog.four_level_loop(samples=64))
    assert report.passed
    assert report.max_deviation < 1e-12


def test_isospectrality_check_flags_drifting_spectrum():
    model = catalog.drifting_model()
    report = isospectrality_check(model, catalog.drifting_loop(samples=64))
    assert not report.passed
    assert abs(report.max_deviation - 0.582) < 0.02


def test_adiabaticity_ratio_scales_inversely_with_duration():
    model = catalog.spin_half_model()
    r1 = adiabaticity_ratio(model, catalog.circle_loop(np.pi / 3, duration=100.0))
    r2 = adiabaticity_ratio(model, catalog.circle_loop(np.pi / 3, duration=200.0))
    assert abs(r1 - 1.0 / 100.0) < 1e-12
    assert abs(r1 / r2 - 2.0) < 1e-12


# ---------------------------------------------------------------------------
# file formats


def test_model_json_round_trip():
    for model in (catalog.spin_half_model(), catalog.four_level_model(),
                  catalog.drifting_model()):
        text = model_to_json(model)
        back = parse_model(text)
        assert back.n == model.n
        assert back.form == model.form
        assert back.num_params == model.num_params
        if model.form == "conjugated":
            assert np.max(np.abs(back.h0 - model.h0)) < 1e-15
        for g0, g1 in zip(back.generators, model.generators):
            assert np.max(np.abs(g0 - g1)) < 1e-15
        lam = np.linspace(0.1, 0.5, model.num_params)
        assert np.max(np.abs(evaluate_hamiltonian(back, lam)
                             - evaluate_hamiltonian(model, lam))) < 1e-14


def test_loop_json_round_trip_all_kinds():
    loops = [
        SphereCircleLoop(theta=0.7, phi0=0.1, samples=50, duration=5.0),
        catalog.four_level_loop(samples=40),
        SamplesLoop(points=sample_loop(catalog.drifting_loop(samples=30)).points,
                    duration=3.0),
    ]
    for loop in loops:
        back = parse_loop(loop_to_json(loop))
        assert type(back) is type(loop)
        a = sample_loop(loop)
        b = sample_loop(back)
        assert np.max(np.abs(a.points - b.points)) < 1e-12
        assert abs(a.duration - b.duration) < 1e-12


def test_malformed_model_json_is_reported():
    with pytest.raises(ModelFormatError):
        parse_model('{"n": 2')
    with pytest.raises(ModelFormatError):
        parse_model('{"n": 2, "form": "conjugated"}')
    with pytest.raises(ModelFormatError):
        parse_loop('{"kind": "unheard_of"}')


# ---------------------------------------------------------------------------
# properties


@st.composite
def conjugated_models(draw):
    n = draw(st.integers(min_value=2, max_value=4))
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h0 = (a + a.conj().T) / 2
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    g = (g + g.conj().T) / 2
    return ModelSpec(n=n, form="conjugated", h0=h0, generators=(g,),
                     num_params=1), seed


@settings(max_examples=40, deadline=None)
@given(conjugated_models(), st.floats(min_value=-3.0, max_value=3.0,
                                      allow_nan=False))
def test_property_conjugation_preserves_spectrum(model_seed, lam_val):
    model, _ = model_seed
    w0 = np.linalg.eigvalsh(model.h0)
    w = np.linalg.eigvalsh(evaluate_hamiltonian(model, np.array([lam_val])))
    assert np.max(np.abs(np.sort(w) - np.sort(w0))) < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_property_eigen_decompose_is_consistent(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = (a + a.conj().T) / 2
    spectral, blocks = eigen_decompose(h)
    assert sum(spectral.degeneracies) == n
    assert list(spectral.energies) == sorted(spectral.energies)
    for e, d, blk in zip(spectral.energies, spectral.degeneracies, blocks):
        assert blk.shape == (n, d)
        assert np.max(np.abs(h @ blk - e * blk)) < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1),
       st.integers(min_value=8, max_value=64))
def test_property_fourier_loops_close(seed, samples):
    rng = np.random.default_rng(seed)
    comps = tuple(
        FourierComponent(
            constant=float(rng.normal()),
            cos_coeffs=tuple(rng.normal(size=2)),
            sin_coeffs=tuple(rng.normal(size=2)),
        )
        for _ in range(2)
    )
    loop = FourierLoop(components=comps, samples=samples, duration=4.0)
    pts = sample_loop(loop).points
    assert np.max(np.abs(pts[-1] - pts[0])) == 0.0


def test_coefficient_fn_vocabulary():
    lam = np.array([3.0, 7.0, 0.5])
    assert CoefficientFn(kind="component", index=1)(lam) == 7.0
    assert abs(CoefficientFn(kind="sin", index=2, frequency=2.0)(lam)
               - np.sin(1.0)) < 1e-15
    prod = CoefficientFn(
        kind="product", value=2.0,
        factors=(CoefficientFn(kind="component", index=0),
                 CoefficientFn(kind="cos", index=2)))
    assert abs(prod(lam) - 2.0 * 3.0 * np.cos(0.5)) < 1e-14
    # analytic gradient against finite differences
    h = 1e-6
    for a in range(3):
        step = np.zeros(3)
        step[a] = h
        num = (prod(lam + step) - prod(lam - step)) / (2 * h)
        assert abs(prod.gradient(lam)[a] - num) < 1e-8
