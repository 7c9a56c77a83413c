"""Morphology design studies for a wheeled-legged robot: jump dynamics,
actuator and scale sweeps, and controllability-based balance effort."""

__version__ = "0.1.0"
