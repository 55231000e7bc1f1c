"""Neighborhood volumes, energies and capacities of point clouds and measures."""

from ..ensemble import hitting_prob_mc
from ..moments import Ball
from .capacity import (CapacityResult, EquivalenceReport, EquivalenceRow, Kernel, capacity,
                       capacity_equivalence_report, f_energy, kernel_matrix, median_nn)
from .cube import (CubeReference, cube_distance, cube_neighborhood_mc, cube_reference, grid_energy_separable,
                   kernel_radial_integral, lebesgue_energy, lebesgue_grid, steiner_volume)
from .energy import (EnergyRow, energy_constant, energy_rows, energy_scaling_check, normalized_energies, s_energy,
                     s_energy_sampled)
from .spatial import SpatialIndex
from .volume import (Box, CurveRow, DistanceProfile, ScalingLaw, SupportScaling, coverage_volume, distance_profile,
                     epsilon_volume, epsilon_volumes, fit_support_exponent, median_spacing, scaling_rows,
                     support_scaling_experiment, support_volumes, volume_scaling_experiment)

__all__ = [
    "Ball", "Box", "DistanceProfile", "distance_profile", "energy_rows", "fit_support_exponent",
    "normalized_energies", "scaling_rows", "support_volumes", "CapacityResult", "CubeReference", "CurveRow", "EnergyRow", "EquivalenceReport",
    "EquivalenceRow", "Kernel", "ScalingLaw", "SpatialIndex", "SupportScaling", "capacity",
    "capacity_equivalence_report", "coverage_volume", "cube_distance", "cube_neighborhood_mc",
    "cube_reference", "energy_constant", "energy_scaling_check", "epsilon_volume", "epsilon_volumes",
    "f_energy", "grid_energy_separable", "hitting_prob_mc", "kernel_matrix", "kernel_radial_integral",
    "lebesgue_energy", "lebesgue_grid", "median_nn", "median_spacing", "s_energy", "s_energy_sampled",
    "steiner_volume", "support_scaling_experiment", "volume_scaling_experiment",
]
