"""
Service layer: belief algebra, mapping, indicators, evaluation, simulation and I/O.
"""
