"""Shared fixtures.

The expensive curvature fields are session-scoped so the audit tests and
the acceptance suite reuse one evaluation per fixture shape.  The wedge
cache is pointed at a per-session temporary directory so tests never read
or write state outside the test run.
"""
from __future__ import annotations

import numpy as np
import pytest

from fracap.measures import curvature_field
from fracap.quadrature import QuadratureConfig
from fracap.shapes import BallCap, EllipsoidCap, ShapeSpec, build_shape


@pytest.fixture(scope="session", autouse=True)
def _isolated_wedge_cache(tmp_path_factory):
    import os
    path = tmp_path_factory.mktemp("wedge_cache")
    old = os.environ.get("FRACAP_CACHE_DIR")
    os.environ["FRACAP_CACHE_DIR"] = str(path)
    yield path
    if old is None:
        os.environ.pop("FRACAP_CACHE_DIR", None)
    else:
        os.environ["FRACAP_CACHE_DIR"] = old


# -- models -----------------------------------------------------------------

@pytest.fixture(scope="session")
def hemisphere2():
    """Unit half-disk resting on the floor (n = 2)."""
    return build_shape(ShapeSpec(2, BallCap(1.0, 0.0)))


@pytest.fixture(scope="session")
def floating_ball2():
    """Unit disk strictly inside the upper half-plane."""
    return build_shape(ShapeSpec(2, BallCap(1.0, 1.5)))


@pytest.fixture(scope="session")
def ellipse_cap2():
    """Half-ellipse with semi-axes (1, 1.2) resting on the floor."""
    return build_shape(ShapeSpec(2, EllipsoidCap((1.0, 1.2), 0.0)))


@pytest.fixture(scope="session")
def hemisphere3():
    """Unit half-ball resting on the floor (n = 3)."""
    return build_shape(ShapeSpec(3, BallCap(1.0, 0.0)))


# -- shared curvature fields ------------------------------------------------

@pytest.fixture(scope="session")
def hemi2_field_small(hemisphere2):
    """Cheap field for estimator unit tests."""
    return curvature_field(hemisphere2, 0.5, resolution=16)


@pytest.fixture(scope="session")
def ellipse_field(ellipse_cap2):
    return curvature_field(ellipse_cap2, 0.5, resolution=48)


@pytest.fixture(scope="session")
def hemi3_field(hemisphere3):
    # coarse tolerance: the n = 3 point count makes the default budget slow
    return curvature_field(hemisphere3, 0.5, resolution=8,
                           cfg=QuadratureConfig(target_rel_tol=1e-3))
