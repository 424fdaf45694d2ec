"""Floquet analysis of ergodic-localized junctions in a driven boson chain."""

__version__ = "0.1.0"
