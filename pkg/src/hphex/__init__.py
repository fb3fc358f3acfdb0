"""hp-adaptive hexahedral finite elements with DPG solvers."""

__version__ = "0.1.0"
