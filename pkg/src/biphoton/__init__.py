"""Bound excitation pairs in waveguide-coupled, position-modulated qubit arrays."""

from .lattice import ModelParams, QubitArray, build_interface, build_uniform, coupling_kernel

__all__ = ["ModelParams", "QubitArray", "build_interface", "build_uniform", "coupling_kernel"]
__version__ = "0.1.0"
