"""Neighbor-based sepsis decision support: cohort pipeline, state embedder,
reasoning cues, and the interactive study service."""

__version__ = "0.1.0"
