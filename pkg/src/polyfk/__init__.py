"""PolyDG solver for the Fisher-Kolmogorov equation on polygonal meshes."""

__version__ = "0.1.0"
