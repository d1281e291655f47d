"""Geometry layer: compilation, exact data, sampling, sections, JSON."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracap.errors import EmptySlice, InvalidSpec
from fracap.shapes import (BallCap, EllipsoidCap, Reflect, Rotate, Scale,
                           ShapeSpec, ShapeUnion, Transformed, Translate,
                           build_shape, cross_section, sample_boundary,
                           shape_spec_from_json, shape_spec_to_json)


# ---------------------------------------------------------------------------
# exact geometry
# ---------------------------------------------------------------------------

def test_hemisphere_volume_exact(hemisphere2):
    vol, err = hemisphere2.volume()
    assert err == 0.0
    assert vol == pytest.approx(np.pi / 2.0, rel=1e-12)


def test_shallow_cap_volume_matches_segment_formula():
    # center below the floor: the part above it is a circular segment
    model = build_shape(ShapeSpec(2, BallCap(1.0, -0.5)))
    vol, err = model.volume()
    segment = np.arccos(0.5) - 0.5 * np.sqrt(0.75)
    assert err == 0.0
    assert vol == pytest.approx(segment, rel=1e-12)


def test_half_ellipse_volume(ellipse_cap2):
    vol, _ = ellipse_cap2.volume()
    assert vol == pytest.approx(np.pi * 1.2 / 2.0, rel=1e-12)


def test_half_ball_volume_3d(hemisphere3):
    vol, _ = hemisphere3.volume()
    assert vol == pytest.approx(2.0 * np.pi / 3.0, rel=1e-12)


def test_diameters(hemisphere2, floating_ball2, ellipse_cap2):
    assert hemisphere2.diameter() == pytest.approx(2.0, rel=1e-12)
    assert floating_ball2.diameter() == pytest.approx(2.0, rel=1e-12)
    assert ellipse_cap2.diameter() == pytest.approx(2.0, rel=1e-9)


def test_contact_cosine_sign_convention():
    # sigma is the vertical component of the outward normal on the contact
    # line: negative when the center sits above the floor (obtuse wetting)
    high = build_shape(ShapeSpec(2, BallCap(1.0, 0.5)))
    low = build_shape(ShapeSpec(2, BallCap(1.0, -0.5)))
    flat = build_shape(ShapeSpec(2, BallCap(1.0, 0.0)))
    assert high.exact.contact_angle_cosine == pytest.approx(-0.5)
    assert low.exact.contact_angle_cosine == pytest.approx(0.5)
    assert flat.exact.contact_angle_cosine == pytest.approx(0.0)


def test_floating_ball_has_no_contact_line(floating_ball2):
    assert floating_ball2.exact.contact_angle_cosine is None


# ---------------------------------------------------------------------------
# indicator and transforms
# ---------------------------------------------------------------------------

def test_indicator_basic(hemisphere2):
    pts = np.array([[0.0, 0.5], [0.0, 1.5], [0.9, 0.1], [0.0, -0.5]])
    assert hemisphere2.indicator(pts).tolist() == [True, False, True, False]


def test_translate_moves_indicator(hemisphere2):
    spec = ShapeSpec(2, Transformed(BallCap(1.0, 0.0), Translate((3.0,))))
    moved = build_shape(spec)
    assert moved.indicator(np.array([3.0, 0.5]))
    assert not moved.indicator(np.array([0.0, 0.5]))


def test_scale_volume_factor():
    base = build_shape(ShapeSpec(2, BallCap(1.0, -0.25)))
    scaled = build_shape(
        ShapeSpec(2, Transformed(BallCap(1.0, -0.25), Scale(2.0))))
    assert scaled.volume()[0] == pytest.approx(4.0 * base.volume()[0],
                                               rel=1e-12)


def test_rotation_preserves_axial_set(hemisphere3):
    spec = ShapeSpec(3, Transformed(BallCap(1.0, 0.0), Rotate(0.7)))
    rotated = build_shape(spec)
    rng = np.random.default_rng(7)
    pts = rng.uniform([-1.2, -1.2, 0.0], [1.2, 1.2, 1.2], size=(256, 3))
    assert np.array_equal(rotated.indicator(pts), hemisphere3.indicator(pts))


def test_reflection_mirrors_translated_shape():
    body = Transformed(BallCap(1.0, 0.0), Translate((2.0,)))
    mirrored = build_shape(
        ShapeSpec(2, Transformed(body, Reflect((1.0, 0.0), 0.0))))
    assert mirrored.indicator(np.array([-2.0, 0.4]))
    assert not mirrored.indicator(np.array([2.0, 0.4]))


def test_disconnected_union_rejected_without_flag():
    body = ShapeUnion((BallCap(1.0, 0.0),
                       Transformed(BallCap(0.5, 0.0), Translate((4.0,)))))
    with pytest.raises(InvalidSpec):
        build_shape(ShapeSpec(2, body))
    model = build_shape(ShapeSpec(2, body), allow_disconnected=True)
    assert model.indicator(np.array([4.0, 0.2]))


def test_empty_above_floor_rejected():
    with pytest.raises(InvalidSpec):
        build_shape(ShapeSpec(2, BallCap(1.0, -2.0)))


# ---------------------------------------------------------------------------
# boundary sampling
# ---------------------------------------------------------------------------

def test_sample_spacing_and_mirror_pairs(hemisphere2):
    pts = sample_boundary(hemisphere2, 32)
    pos = np.array([bp.position for bp in pts])
    assert len(pts) % 2 == 0
    # every sample has its exact mirror about the vertical axis
    key = {(round(x, 12), round(y, 12)) for x, y in pos}
    assert all((round(-x, 12), round(y, 12)) in key for x, y in pos)
    # free-boundary samples stay on the unit circle
    assert np.allclose(np.hypot(pos[:, 0], pos[:, 1]), 1.0, atol=1e-9)
    gaps = np.linalg.norm(np.diff(pos[np.argsort(np.arctan2(pos[:, 1],
                                                            pos[:, 0]))],
                                  axis=0), axis=1)
    assert gaps.max() <= 2.0 / 32.0 + 1e-9


def test_sample_normals_outward(floating_ball2):
    for bp in sample_boundary(floating_ball2, 24):
        radial = bp.position - np.array([0.0, 1.5])
        assert float(radial @ bp.normal) > 0.99


# ---------------------------------------------------------------------------
# cross sections
# ---------------------------------------------------------------------------

def test_cross_section_hemisphere(hemisphere2):
    sec = cross_section(hemisphere2, 0.6)
    assert sec.axis_inside
    # a disk-like slice has coincident inner and outer radii (zero pinch)
    assert sec.inner_radius == pytest.approx(0.8, abs=2.0 / 256.0)
    assert sec.outer_radius == pytest.approx(0.8, abs=2.0 / 256.0)
    assert sec.slice_diameter == pytest.approx(1.6, abs=4.0 / 256.0)
    assert sec.inner_disk_contained


def test_cross_section_empty():
    model = build_shape(ShapeSpec(2, BallCap(1.0, 0.0)))
    with pytest.raises(EmptySlice):
        cross_section(model, 1.5)
    with pytest.raises(EmptySlice):
        cross_section(model, 0.0)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_json_round_trip_nested():
    spec = ShapeSpec(2, ShapeUnion((
        BallCap(1.0, -0.2),
        Transformed(EllipsoidCap((0.6, 0.8), 0.1), Translate((1.5,))),
    )))
    assert shape_spec_from_json(shape_spec_to_json(spec)) == spec


def test_schema_rejects_malformed_documents():
    with pytest.raises(InvalidSpec):
        shape_spec_from_json({"n": 2})
    with pytest.raises(InvalidSpec):
        shape_spec_from_json({"n": 2, "shape": {"type": "mystery"}})
    with pytest.raises(InvalidSpec):
        shape_spec_from_json(
            {"n": 4, "shape": {"type": "ball_cap", "radius": 1.0,
                               "center_height": 0.0}})


def test_digest_tracks_geometry(hemisphere2, floating_ball2):
    assert hemisphere2.digest() == build_shape(
        ShapeSpec(2, BallCap(1.0, 0.0))).digest()
    assert hemisphere2.digest() != floating_ball2.digest()


@settings(max_examples=25, deadline=None)
@given(radius=st.floats(0.3, 2.0),
       center=st.floats(-0.2, 2.0),
       shift=st.floats(-1.5, 1.5))
def test_round_trip_preserves_indicator(radius, center, shift):
    # keep a nondegenerate piece above the floor, away from exact tangency
    if center + radius <= 0.05 or abs(abs(center) - radius) <= 0.05 * radius:
        return
    spec = ShapeSpec(2, Transformed(BallCap(radius, center),
                                    Translate((shift,))))
    model = build_shape(spec)
    clone = build_shape(shape_spec_from_json(shape_spec_to_json(spec)))
    pts = np.stack([np.linspace(-3, 3, 40),
                    np.linspace(0.01, 3, 40)], axis=1)
    assert np.array_equal(model.indicator(pts), clone.indicator(pts))
