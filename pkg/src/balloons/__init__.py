"""Poisson balloon processes: stable matchings, pop times and the
coverage radius ``R_t`` in Euclidean space, the hyperbolic plane and regular
trees, with the tools used to bound them."""

from . import balloon, geometry, hyptess, limits, matching, pointproc, treesep
from .geometry import Ball, Box, Space
from .matching import MatchingResult, certify, greedy_stable_matching, pop_times
from .pointproc import PointSet, sample_poisson

__all__ = [
    "balloon", "geometry", "hyptess", "limits", "matching", "pointproc", "treesep",
    "Ball", "Box", "Space", "MatchingResult", "PointSet",
    "certify", "greedy_stable_matching", "pop_times", "sample_poisson",
]
__version__ = "0.1.0"
