"""Spatial-Spectral Unmixing - joint hyperspectral unmixing and clustering by matrix cofactorization."""

__version__ = "0.1.0"
