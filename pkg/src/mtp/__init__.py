"""Sampling-based MPC with tensor-sampled control trajectories."""

__version__ = "0.1.0"
