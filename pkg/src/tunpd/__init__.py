"""Persistence diagrams from point clouds and per-point significance labelling.

Submodules are imported on demand; importing the package itself stays cheap
so the command line can configure threading before numpy loads.
"""
__version__ = "0.1.0"
