"""layerlab: numerical laboratory for the multi-scale structure of steady
2D channel flow at small viscosity.

Builds background Euler flows, wall (Prandtl) correctors, an outlet
profile with an O(eps) streamwise scale, and solves the linearized and
nonlinear remainder problems, with quantitative scale and stability
diagnostics."""

from .calculus import BumpFunction, CutoffFunction
from .grid import ChannelGrid, GridError, ScalarField, diff, make_grid, weighted_l2
from .norms import NormError, NormReport, norm_X, quotient
from .euler import (AssumptionReport, ConstantProfile, CosineProfile, EulerError,
                    EulerFlow, TabulatedProfile, build_perturbed_shear,
                    build_shear, check_assumptions, solve_linearized_euler)
from .blasius import BlasiusProfile, SimilarityLayer, solve_blasius
from .prandtl import LayerError, LayerGrid, PrandtlLayer, solve_prandtl0, solve_prandtl_i
from .hierarchy import CorrectorHierarchy, HierarchyError, assemble_hierarchy
from .outlet import (OutletError, OutletProfile, assemble_fk, assemble_outlet,
                     phi0_closed_form, solve_phik)
from .remainder import (ApproxSolution, EnergyLedger, RemainderError,
                        RemainderSolution, assemble_approx, energy_diagnostics,
                        hardy_check, picard_fixed_point, solve_linear_remainder)
from .sweep import FitResult, SweepError, SweepPlan, fit_outlet_shape, run_sweep

__version__ = "0.1.0"

__all__ = [
    "ApproxSolution", "AssumptionReport", "BlasiusProfile", "BumpFunction",
    "ChannelGrid", "ConstantProfile", "CorrectorHierarchy", "CosineProfile",
    "CutoffFunction", "EnergyLedger", "EulerError", "EulerFlow", "FitResult",
    "GridError", "HierarchyError", "LayerError", "LayerGrid", "NormError",
    "NormReport", "OutletError", "OutletProfile", "PrandtlLayer",
    "RemainderError", "RemainderSolution", "ScalarField", "SimilarityLayer",
    "SweepError", "SweepPlan", "TabulatedProfile", "assemble_approx",
    "assemble_fk", "assemble_hierarchy", "assemble_outlet",
    "build_perturbed_shear", "build_shear", "check_assumptions", "diff",
    "energy_diagnostics", "fit_outlet_shape", "hardy_check", "make_grid",
    "norm_X", "phi0_closed_form", "picard_fixed_point", "quotient",
    "run_sweep", "solve_blasius", "solve_linear_remainder",
    "solve_linearized_euler", "solve_phik", "solve_prandtl0",
    "solve_prandtl_i", "weighted_l2", "__version__",
]
