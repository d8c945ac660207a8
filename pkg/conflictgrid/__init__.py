"""
Evidential occupancy grids and conflict-based inconsistency indicators.
"""
__version__ = "0.1.0"
