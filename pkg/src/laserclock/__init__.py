"""Phase-reference lasers: Fock-space states, gain master equations, pixel
channels and homodyne phase tracking for clock synchronisation."""

__version__ = "0.1.0"
