"""Projective connections, metrization and geodesic-flow checks for 2-D metrics."""

__version__ = "0.1.0"
