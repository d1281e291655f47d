"""Principal-value engine: exact tails, known boundary values, config guards."""
from __future__ import annotations

import numpy as np
import pytest

from fracap.errors import ConfigError
from fracap.quadrature import (QuadratureConfig, pv_curvature_integral,
                               regularized_curvature_integral, tail_integral)
from fracap.shapes import BallCap, ShapeSpec, build_shape

from oracles import FROZEN


# ---------------------------------------------------------------------------
# closed-form tail
# ---------------------------------------------------------------------------

def test_tail_integral_closed_form():
    # integral of |x|^(-n-s) outside B_R equals S_{n-1} R^(-s) / s
    for n, sphere in ((2, 2.0 * np.pi), (3, 4.0 * np.pi)):
        for s in (0.25, 0.5, 0.75):
            for R in (0.5, 1.0, 3.0):
                assert tail_integral(R, n, s) == pytest.approx(
                    sphere * R ** (-s) / s, rel=1e-12)


def test_tail_integral_rejects_bad_radius():
    with pytest.raises(ConfigError):
        tail_integral(0.0, 2, 0.5)


# ---------------------------------------------------------------------------
# boundary values against the angular-reduction oracle
# ---------------------------------------------------------------------------

def test_ball_boundary_value_2d(floating_ball2):
    q = np.array([0.0, 2.5])
    for s in (0.25, 0.5, 0.75):
        res = pv_curvature_integral(floating_ball2, q, s)
        expected = FROZEN[("ball_H", 2, s)]
        assert abs(res.value - expected) <= 3.0 * res.error_estimate + 1e-6


def test_ball_boundary_value_3d():
    model = build_shape(ShapeSpec(3, BallCap(1.0, 1.5)))
    res = pv_curvature_integral(model, np.array([0.0, 0.0, 2.5]), 0.5)
    expected = FROZEN[("ball_H", 3, 0.5)]
    assert abs(res.value - expected) <= 3.0 * res.error_estimate + 1e-4


def test_explicit_normal_matches_detected(floating_ball2):
    q = np.array([np.sin(0.8), 1.5 + np.cos(0.8)])
    auto = pv_curvature_integral(floating_ball2, q, 0.5)
    nrm = np.array([np.sin(0.8), np.cos(0.8)])
    told = pv_curvature_integral(floating_ball2, q, 0.5, normal=nrm)
    assert told.value == pytest.approx(auto.value, abs=1e-9)


def test_result_structure(floating_ball2):
    res = pv_curvature_integral(floating_ball2, np.array([0.0, 2.5]), 0.5)
    assert res.error_estimate > 0.0
    assert res.refinement_levels_used >= 1
    assert isinstance(res.warnings, tuple)


def test_near_floor_point_flags_contact(hemisphere2):
    theta = np.arcsin(0.03)
    low = pv_curvature_integral(
        hemisphere2, np.array([np.cos(theta), 0.03]), 0.5)
    assert np.isfinite(low.value)
    assert low.error_estimate > 0.0
    assert "NearContactLine" in low.warnings


# ---------------------------------------------------------------------------
# regularized kernel
# ---------------------------------------------------------------------------

def test_regularized_needs_radius(floating_ball2):
    cfg = QuadratureConfig(kernel_mode="eps_regularized")
    with pytest.raises(ConfigError):
        regularized_curvature_integral(floating_ball2, np.array([0.0, 2.5]),
                                       0.5, cfg)


def test_regularized_under_reads_pv(floating_ball2):
    # the capped kernel drops positive near-field mass, so at a convex
    # boundary point the regularized value sits below the principal value
    q = np.array([0.0, 2.5])
    pv = pv_curvature_integral(floating_ball2, q, 0.5)
    cfg = QuadratureConfig(kernel_mode="eps_regularized", reg_radius=0.1)
    reg = regularized_curvature_integral(floating_ball2, q, 0.5, cfg)
    assert reg.value < pv.value


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

def test_config_guards():
    with pytest.raises(ConfigError):
        QuadratureConfig(inner_radius_rel=0.0).validated()
    with pytest.raises(ConfigError):
        QuadratureConfig(kernel_mode="mystery").validated()
    with pytest.raises(ConfigError):
        QuadratureConfig(subdivision_depth=0).validated()
