"""Superconducting quarter-wave stub cavity with a levitated magnet.

Physics chain: two-fluid superconductor thermodynamics, an axisymmetric
finite-difference eigensolver for the fundamental mode, small-sphere
perturbation shift maps for the magnet position, VNA-style S21 synthesis
and fitting, and stateful replay of cryogenic sweep protocols.
"""

__version__ = "0.1.0"
