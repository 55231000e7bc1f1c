"""Brownian snake, ISE and super-Brownian motion simulation with
deterministic cross-checks (radial blow-up solutions, moment recurrences,
Green-kernel formulas, range volumes, heat-kernel energies, capacities)."""

__version__ = "0.1.0"
