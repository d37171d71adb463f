"""Finite-difference simulation and variational analysis of a 2-D ferronematic model.

Modules
-------
potential    bulk potential, its minimising constants and split-form helpers
fields       grid, field storage, boundary data, seeded states, CSV format
flow         Crank-Nicolson gradient flow
diagnostics  energies, windings, defects and jump lines
geometry     minimal connections, canonical harmonic maps, renormalised energy
profile1d    one-dimensional transition profile and interface cost
cli          command-line interface
"""

__version__ = "0.1.0"
