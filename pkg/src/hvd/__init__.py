"""Exact Hausdorff Voronoi diagrams of point clusters in the plane."""

from .geom import Point, Scalar, parse_scalar

__all__ = ["Point", "Scalar", "parse_scalar"]
__version__ = "0.1.0"
