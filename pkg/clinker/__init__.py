"""Alite/belite phase identification and quantification for clinker micrographs."""

__version__ = "0.1.0"
