"""Services package initialization.

Domain modules (dist, zerobias, coupling, stein, srs) are imported directly;
command services live in transform, bound, verify and experiment.
"""
