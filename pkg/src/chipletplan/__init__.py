"""Thermal-aware chiplet floorplanning on a silicon interposer.

A placement environment over a lattice of anchors, a finite-difference
thermal solver, a fast resistance-table thermal model, a PPO agent with a
random network distillation bonus, and a simulated-annealing baseline.
"""
from .errors import ChipletPlanError
from .fast_thermal import ResistanceTables, evaluate_temperatures
from .floorplan_env import Chiplet, FloorplanState, Net, SystemSpec
from .reward import RewardConfig, compute_reward, evaluate_floorplan
from .thermal_reference import ThermalGrid, ThermalStack, characterize_tables

__version__ = "0.1.0"

__all__ = [
    "ChipletPlanError", "Chiplet", "FloorplanState", "Net", "ResistanceTables", "RewardConfig",
    "SystemSpec", "ThermalGrid", "ThermalStack", "characterize_tables", "compute_reward",
    "evaluate_floorplan", "evaluate_temperatures",
]
