"""Noncommutative Bloch analysis on finite covering graphs and the magnetic torus."""

__version__ = "0.1.0"

from .covering import (  # noqa: E402
    CoveringModel,
    EquivariantSection,
    QuotientModel,
    averaging_phi_lambda,
    bloch_transform,
    build_covering_model,
    build_h_lambda,
    magnetic_translation,
    make_quotient,
)
from .decomposition import (  # noqa: E402
    BlockDecomposition,
    KernelTable,
    abelian_reduction_green,
    decompose,
    evolution_decompose,
    reconstruct_green,
    reconstruct_propagator,
    resolvent_decompose,
)
from .groups import DualSpace, FiniteGroup, builtin_dual, fourier, inverse_fourier  # noqa: E402
from .models import builtin_model, load_model  # noqa: E402
from .oscillator import ho_green, mehler_heat_kernel, parabolic_cylinder_d  # noqa: E402
from .torus import (  # noqa: E402
    LandauModel,
    discretize_h_lambda,
    heat_trace,
    landau_spectrum,
    plane_magnetic_green,
    t_lambda_map,
    torus_green,
)
