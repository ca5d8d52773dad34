"""Numerical substrate: polynomial roots, Newton, curve tracing, grid labelling."""

from .grid import CLAMP, WRAP, GridSpec, Polyline, connected_components, grid_path, sign_components, trace_zero_curve
from .newton import fd_jacobian, newton_solve, newton_solve_batch
from .polynomial import DegeneratePolynomialError, RealPolynomial, RootCluster, real_roots_clustered

__all__ = [
    "CLAMP",
    "WRAP",
    "GridSpec",
    "Polyline",
    "connected_components",
    "grid_path",
    "sign_components",
    "trace_zero_curve",
    "fd_jacobian",
    "newton_solve",
    "newton_solve_batch",
    "DegeneratePolynomialError",
    "RealPolynomial",
    "RootCluster",
    "real_roots_clustered",
]
