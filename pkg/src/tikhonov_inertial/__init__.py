"""Tikhonov-regularized inertial dynamics and their proximal discretization."""
