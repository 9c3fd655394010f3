"""
Geometría del dominio y discretización.

Dominios convexos planos, cuadratura de borde, malla cartesiana recortada
y operadores de interpolación.

Autor: MongeFlux Team
Versión: 1.0.0
"""

from .domain_geometry import (
    Domain,
    DiskDomain,
    SampledDomain,
    BoundaryQuadrature,
    Grid,
    Discretization,
    make_disk,
    make_sampled_domain,
    make_domain,
    boundary_quadrature,
    build_grid,
    build_discretization,
)
from .interpolation import LocalQuadraticInterpolator, trigonometric_interpolation_matrix

__all__ = [
    "Domain",
    "DiskDomain",
    "SampledDomain",
    "BoundaryQuadrature",
    "Grid",
    "Discretization",
    "make_disk",
    "make_sampled_domain",
    "make_domain",
    "boundary_quadrature",
    "build_grid",
    "build_discretization",
    "LocalQuadraticInterpolator",
    "trigonometric_interpolation_matrix",
]
