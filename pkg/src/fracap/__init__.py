"""Nonlocal curvature and almost-symmetry diagnostics for droplets in a
half-space.

The package computes fractional mean curvature fields, fractional perimeters
and wall free energies of analytically described sets sitting on a flat wall,
then audits quantitative symmetry bounds (plane deviation, slice pinching)
driven by how far the curvature is from constant along horizontal slices.
"""

from __future__ import annotations

from .errors import (
    ConfigError, DegenerateDirection, EmptySlice, FracapError,
    InsufficientPairs, InvalidSpec, InvalidTransform, NonConstantAngle,
    NotOnBoundary, Overlap, SamplingFailure, StepTooSmall, UnsupportedFamily,
)
from .shapes import (
    BallCap, BoundaryPoint, CrossSection, EllipsoidCap, ExactGeometry,
    GeometricSummary, Reflect, Rotate, Scale, SetModel, ShapeSpec, ShapeUnion,
    Transformed, Translate, build_shape, cross_section, geometric_summary,
    sample_boundary, shape_digest, shape_spec_from_json, shape_spec_to_json,
    transform,
)

__version__ = "0.1.0"
