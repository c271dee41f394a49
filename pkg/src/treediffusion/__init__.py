"""Diffusion driven by averaging operators on directed m-ary trees."""
from .averaging import AveragingSpec, AxiomReport, evaluate, evaluate_rows, p_average, verify_axioms
from .closedform import (LevelSequenceSolution, PolynomialSolution, finite_support_exact,
                         geometric_eigen, level_constant_solution, monomial_example,
                         scaling_eigen, subfactorial_datum)
from .data import (EigenExtension, FiniteSupport, Geometric, GeometricEnvelope, LevelExtension,
                   LevelFunction, ScalingEigen, TimeGrid, ZeroBoundary, monomial_datum)
from .decay import (DecayReport, SupportStats, check_decay, finite_support_bound,
                    geometric_bound, support_stats)
from .estimators import AveragingOperator, PicardSolver, TreeDiffusion
from .solver import (SolutionField, picard_iterate, residual_norm, solve_ivp,
                     truncation_tail_bound)
from .tree import TreeShape, enumerate_vertices, psi_embed, successors

__version__ = "0.1.0"
