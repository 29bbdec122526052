"""Holonomy computations for isospectral Hamiltonian families.

The package computes Berry phases and non-Abelian holonomies of finite
level systems from homogeneous minor coordinates, checks them against a
direct Schrodinger evolution, and realizes the resulting unitaries as
products of root-space rotations.
"""

from .errors import (
    BasePointMismatchError,
    ChartBoundaryError,
    ChartInvalidError,
    HermiticityError,
    HqcError,
    LevelCrossingError,
    ModelFormatError,
    NonUnitaryError,
    OpenLoopError,
    OverlapRankError,
    ParameterCountError,
    SectorTooLargeError,
)
from .model import (
    CoefficientFn,
    FourierComponent,
    FourierLoop,
    IsospectralityReport,
    LoopSamples,
    ModelSpec,
    SamplesLoop,
    SpectralData,
    SphereCircleLoop,
    adiabaticity_ratio,
    eigen_decompose,
    evaluate_hamiltonian,
    evaluate_hamiltonian_batch,
    hamiltonian_derivative,
    isospectrality_check,
    load_loop,
    load_model,
    loop_to_json,
    model_to_json,
    parse_loop,
    parse_model,
    reverse_loop,
    sample_loop,
    unitary_family,
)
from .frames import (
    Chart,
    ChartSwitch,
    Frame,
    FramePath,
    Segment,
    Xi,
    chart_determinant,
    determinant_formula_frame,
    frame_at,
    frame_path,
    frame_residual,
    gram_matrices,
    homogeneous_vectors,
    orthonormal_frame,
    select_chart,
    xi_abelian,
    xi_degenerate,
)
from .connection import (
    ConnectionSample,
    connection_abelian_closed,
    connection_closed_form,
    connection_closed_form_at,
    connection_frame,
    connection_frame_at,
    gauge_transform,
    kahler_potential,
)
from .holonomy import (
    BerryPhase,
    Holonomy,
    berry_phase_abelian,
    berry_phase_for_loop,
    compose_loops,
    compute_holonomy,
    holonomy_pexp,
    holonomy_projector,
    pexp_from_samples,
    solid_angle,
)
from .oracle import (
    EvolveResult,
    OracleResult,
    OracleSeries,
    SweepResult,
    convergence_sweep,
    default_steps,
    extract_holonomy,
    run_oracle,
    schrodinger_evolve,
)
from .gates import (
    FockRealization,
    GateSequence,
    RootGateTerm,
    cartan_factor,
    cartan_generator,
    decompose_su_n,
    fock_realization,
    generic_element,
    positive_root_count,
    positive_roots,
    root_gate,
)
from . import catalog

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
