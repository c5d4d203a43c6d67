"""Numerical lab for Agmon distances, bubbles, harmonic measure and decay bounds."""

from .agmon import (BubbleClass, BubbleSet, DistanceField, bubble, dijkstra_distance,
                    distance_laplacian, eikonal_residual, fmm_distance, forbidden_domain)
from .bounds import BoundConfig, BoundReport, SoundnessError, bound_report, soundness_violations
from .eigen import ConvergenceError, EigenPair, ground_state, solve_exterior_bvp
from .fields import (Grid, PotentialSpec, Region, RegionMask, ScalarField, build_grid,
                     region_mask, sample_potential)
from .scenarios import CONSTRUCTORS, Scenario, ScenarioState, build_scenario, solve_scenario
from .stochastic import (ExitClass, MeasureEstimate, expected_discount, harmonic_measure_mc,
                         harmonic_measure_pde, simulate_exit)

__version__ = "0.1.0"

__all__ = ["BubbleClass", "BubbleSet", "DistanceField", "bubble", "dijkstra_distance",
           "distance_laplacian", "eikonal_residual", "fmm_distance", "forbidden_domain",
           "BoundConfig", "BoundReport", "SoundnessError", "bound_report", "soundness_violations",
           "ConvergenceError", "EigenPair", "ground_state", "solve_exterior_bvp", "Grid",
           "PotentialSpec", "Region", "RegionMask", "ScalarField", "build_grid", "region_mask",
           "sample_potential", "CONSTRUCTORS", "Scenario", "ScenarioState", "build_scenario",
           "solve_scenario", "ExitClass", "MeasureEstimate", "expected_discount",
           "harmonic_measure_mc", "harmonic_measure_pde", "simulate_exit"]
