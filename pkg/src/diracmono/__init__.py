"""Radial Dirac bound states and spectral monotonicity verification.

Public surface: potential families, the shooting solver, the exact Coulomb
reference spectrum, and the sweep/verdict machinery that numerically
certifies eigenvalue monotonicity in potential parameters.
"""

from .coulomb import CoulombLevel, channel_of, coulomb_energy, coulomb_energy_derivative
from .errors import (
    ConfigurationError,
    DiracmonoError,
    DomainError,
    GridMismatchError,
    LevelCrossingError,
    NoSuchStateError,
    NumericalError,
    PointwiseOrderError,
    SweepAbortedError,
    UnsupportedRegimeError,
)
from .potentials import (
    OriginClass,
    PotentialFamily,
    SignClass,
    classify_sign,
    coupling,
    custom_family,
    cutoff_coulomb,
    evaluate,
    indefinite_demo,
    make_family,
    make_homotopy,
    param_derivative,
    pure_coulomb,
)
from .solver import (
    BoundState,
    ChannelSpec,
    EigenResult,
    InnerProductScheme,
    SolveConfig,
    inner_product,
    match_function,
    origin_seed,
    rhs,
    solve,
    solve_1d,
    solve_batch,
    tail_seed,
)

__version__ = "0.1.0"
