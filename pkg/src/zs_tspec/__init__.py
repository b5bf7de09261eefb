"""Spectral toolkit for the quadratic-pencil Zakharov-Shabat system with
time-periodic potentials: transfer matrices, discriminants, eigenvalue
localization and refinement, real-discriminant arcs, variational gradients,
and the Hamiltonian form of the associated first-order evolution.
"""

from .errors import (
    BlowupDetected,
    BranchTrackingFailed,
    ContourTooClose,
    CountMismatch,
    DegenerateLambda,
    EndpointMismatch,
    MonotonicityViolation,
    NoCrossingFound,
    NonConvergence,
    NonIntegerWinding,
    NonzeroMean,
    SignMismatch,
    StepFailure,
    ZsTspecError,
)
from .potential import (
    AknsCoordinates,
    Potential,
    SymmetryClass,
    classify,
    from_akns,
    from_components,
    random_potential,
    star_conjugate,
    to_akns,
    zero_potential,
)
from .fundsol import (
    CoefficientMatrices,
    TransferMatrix,
    fundamental_solution,
    lambda_derivative,
    monodromy,
    solve_inhomogeneous,
)
from .singleexp import (
    FIGURE_PARAMS,
    SingleExpParams,
    as_potential,
    closed_form_M,
    figure_dataset,
    omega_branch,
    plane_wave_params,
)

__version__ = "0.1.0"

__all__ = [
    "AknsCoordinates",
    "BlowupDetected",
    "BranchTrackingFailed",
    "CoefficientMatrices",
    "ContourTooClose",
    "CountMismatch",
    "DegenerateLambda",
    "EndpointMismatch",
    "FIGURE_PARAMS",
    "MonotonicityViolation",
    "NoCrossingFound",
    "NonConvergence",
    "NonIntegerWinding",
    "NonzeroMean",
    "Potential",
    "SignMismatch",
    "SingleExpParams",
    "StepFailure",
    "SymmetryClass",
    "TransferMatrix",
    "ZsTspecError",
    "as_potential",
    "classify",
    "closed_form_M",
    "figure_dataset",
    "from_akns",
    "from_components",
    "fundamental_solution",
    "lambda_derivative",
    "monodromy",
    "omega_branch",
    "plane_wave_params",
    "random_potential",
    "solve_inhomogeneous",
    "star_conjugate",
    "to_akns",
    "zero_potential",
]
