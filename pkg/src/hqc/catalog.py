"""Bundled models and loops used by the tests, scripts, and shipped JSON files.

Three families:
  * a two-level conjugated model whose parameters are polar angles on the
    Bloch sphere, with the textbook solid-angle phase law as ground truth;
  * a four-level conjugated model with two doubly degenerate levels, the
    smallest setting where the holonomy is genuinely non-Abelian;
  * a two-level linear model whose spectrum drifts along the loop, there to
    exercise the isospectrality and level-crossing diagnostics.
"""

from __future__ import annotations

import numpy as np

from .model import (
    CoefficientFn,
    FourierComponent,
    FourierLoop,
    ModelSpec,
    SphereCircleLoop,
)

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def spin_half_model() -> ModelSpec:
    """H(theta, phi) = (1/2)(sin t cos p, sin t sin p, cos t) . sigma.

    Rotating diag(1/2, -1/2) first about y by theta, then about z by phi,
    puts the upper level along the given Bloch direction.
    """
    return ModelSpec(
        n=2,
        form="conjugated",
        h0=0.5 * SIGMA_Z,
        generators=[0.5 * SIGMA_Y, 0.5 * SIGMA_Z],
        num_params=2,
    )


def circle_loop(
    theta: float,
    phi0: float = 0.0,
    samples: int = 2000,
    duration: float = 1000.0,
) -> SphereCircleLoop:
    """Latitude circle at polar angle theta, swept once in the azimuth."""
    return SphereCircleLoop(theta=theta, phi0=phi0, samples=samples,
                            duration=duration)


def equator_loop(samples: int = 2000, duration: float = 2000.0) -> SphereCircleLoop:
    return circle_loop(np.pi / 2.0, samples=samples, duration=duration)


def pole_crossing_loop(samples: int = 2000, duration: float = 4000.0) -> FourierLoop:
    """Meridian sweep theta: 0 -> pi -> 0 at fixed azimuth.

    Retraces itself, so every holonomy is trivial, but the path runs
    through both points where a single chart must fail, forcing the
    chart-switch machinery to engage twice.
    """
    theta = FourierComponent(constant=np.pi / 2.0, cos_coeffs=(-np.pi / 2.0,))
    phi = FourierComponent(constant=0.4)
    return FourierLoop(components=(theta, phi), samples=samples,
                       duration=duration)


def four_level_model() -> ModelSpec:
    """Two doubly degenerate levels at +/-1 dressed by three rotations.

    The generators mix the upper and lower eigenspaces in inequivalent ways
    so the three connection components fail to commute along a generic loop.
    """
    h0 = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)
    g1 = np.zeros((4, 4), dtype=complex)
    g1[0, 2], g1[2, 0] = -0.9j, 0.9j
    g1[1, 3], g1[3, 1] = -0.5j, 0.5j
    g2 = np.zeros((4, 4), dtype=complex)
    g2[0, 3] = g2[3, 0] = 0.8
    g2[1, 2] = g2[2, 1] = 0.6
    g3 = np.array(
        [
            [0.5, 0.3, 0.0, 0.0],
            [0.3, -0.5, 0.0, 0.0],
            [0.0, 0.0, 0.4, 0.2],
            [0.0, 0.0, 0.2, -0.4],
        ],
        dtype=complex,
    )
    return ModelSpec(n=4, form="conjugated", h0=h0, generators=[g1, g2, g3],
                     num_params=3)


def four_level_loop(samples: int = 4000, duration: float = 10000.0) -> FourierLoop:
    """Closed three-parameter sweep with incommensurate component shapes."""
    c1 = FourierComponent(constant=0.55, cos_coeffs=(0.32,))
    c2 = FourierComponent(constant=0.20, sin_coeffs=(0.41,))
    c3 = FourierComponent(constant=-0.15, cos_coeffs=(0.18, 0.09),
                          sin_coeffs=(0.23, -0.07))
    return FourierLoop(components=(c1, c2, c3), samples=samples,
                       duration=duration)


def drifting_model() -> ModelSpec:
    """Linear two-level model H = l1 sz + l2 sx + l3 sy.

    Not isospectral along generic loops; the components of lambda are the
    Cartesian coordinates of the Bloch vector, so the spectrum is +/-|lambda|.
    """
    return ModelSpec(
        n=2,
        form="linear",
        generators=[SIGMA_Z, SIGMA_X, SIGMA_Y],
        coefficients=[
            CoefficientFn(kind="component", index=0),
            CoefficientFn(kind="component", index=1),
            CoefficientFn(kind="component", index=2),
        ],
        num_params=3,
    )


def drifting_loop(samples: int = 4000, duration: float = 4000.0) -> FourierLoop:
    """Offset sweep in parameter space: |lambda| varies but never vanishes.

    The transverse pair (l2, l3) traces an ellipse, so the Bloch direction
    encloses solid angle and the level phases are far from trivial.
    """
    c1 = FourierComponent(constant=1.0, cos_coeffs=(0.3,))
    c2 = FourierComponent(constant=0.0, sin_coeffs=(0.3,))
    c3 = FourierComponent(constant=0.0, cos_coeffs=(0.25,), sin_coeffs=(0.1,))
    return FourierLoop(components=(c1, c2, c3), samples=samples,
                       duration=duration)


def crossing_loop(samples: int = 2000, duration: float = 2000.0) -> FourierLoop:
    """Sweep that pinches the spectrum shut: lambda = 0 at half period."""
    c1 = FourierComponent(constant=0.15, cos_coeffs=(0.15,))
    c2 = FourierComponent(constant=0.0, sin_coeffs=(0.2,))
    c3 = FourierComponent(constant=0.0, sin_coeffs=(0.25, 0.1))
    return FourierLoop(components=(c1, c2, c3), samples=samples,
                       duration=duration)


BUILTIN_MODELS = {
    "spin_half": spin_half_model,
    "four_level": four_level_model,
    "drifting": drifting_model,
}

BUILTIN_LOOPS = {
    "equator": equator_loop,
    "circle_pi3": lambda: circle_loop(np.pi / 3.0),
    "pole_crossing": pole_crossing_loop,
    "four_level": four_level_loop,
    "drifting": drifting_loop,
    "crossing": crossing_loop,
}
