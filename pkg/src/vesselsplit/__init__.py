"""Splitting integrators for a PID-controlled rigid-body vessel model."""

__version__ = "0.1.0"
