# Spectral Surgery Lab - Source Package
"""
Eigenvalue optimization and gluing experiments on triangulated surfaces.
"""

__version__ = "0.1.0"
