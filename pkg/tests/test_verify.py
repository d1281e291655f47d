"""Audit layer: constants, report structure, contact-line asymptotics."""
from __future__ import annotations

import numpy as np
import pytest

from fracap.errors import NonConstantAngle
from fracap.shapes import (BallCap, ShapeSpec, ShapeUnion, Transformed,
                           Translate, build_shape)
from fracap.verify import (audit_theorem_a, audit_theorem_b, constants,
                           default_directions, fit_blowup, flatten_csv,
                           full_report, gradient_bound_audit, guaranteed_pass)


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

def test_constants_closed_forms(hemisphere2):
    c = constants(2, 0.5, hemisphere2)
    assert c.c1 == pytest.approx(3.0, rel=1e-12)          # 3 sqrt(5/(2(n+s)))
    assert c.c2 == pytest.approx(36.0, rel=1e-12)         # 4 (n+1) c1
    # gate level: (1/3) min(1/2, 1/(n-1)) sqrt(2(n+s)/5) |E| / diam^n
    assert c.delta0 == pytest.approx(np.pi / 48.0, rel=1e-9)


def test_constants_dimension_dependence(hemisphere3):
    c = constants(3, 0.5, hemisphere3)
    assert c.c1 == pytest.approx(3.0 * np.sqrt(5.0 / 7.0), rel=1e-12)
    assert c.c2 == pytest.approx(16.0 * c.c1, rel=1e-12)


def test_default_directions():
    d2 = default_directions(2)
    assert len(d2) == 2
    assert np.allclose(d2, [[1.0, 0.0], [-1.0, 0.0]])
    d3 = default_directions(3)
    assert len(d3) == 8
    dots = [float(a @ b) for a, b in zip(d3, d3[1:])]
    assert np.allclose(dots, np.cos(np.pi / 4.0))
    assert all(abs(e[-1]) < 1e-15 for e in d3)


# ---------------------------------------------------------------------------
# audit structure on a cheap symmetric fixture
# ---------------------------------------------------------------------------

def test_audit_reports_structure(hemisphere2, hemi2_field_small):
    ra = audit_theorem_a(hemisphere2, 0.5, field=hemi2_field_small)
    assert set(ra) == {"deltaS", "noiseFloor", "constants", "directions"}
    for rec in ra["directions"]:
        assert rec["lhs"] <= rec["rhs"] + rec["budget"]
        assert rec["pass"] and rec["intPass"]
        assert rec["guaranteed"]

    rb = audit_theorem_b(hemisphere2, 0.5, field=hemi2_field_small)
    assert rb["gatePassed"]
    assert len(rb["heights"]) == 5
    assert all(rec["pass"] for rec in rb["heights"])
    assert abs(rb["recenterOffsets"][0]) <= 4.0 / 1024.0


def test_audit_gate_blocks_asymmetric_union():
    body = ShapeUnion((BallCap(1.0, -0.2),
                       Transformed(BallCap(0.6, -0.1), Translate((1.9,)))))
    model = build_shape(ShapeSpec(2, body), allow_disconnected=True)
    rb = audit_theorem_b(model, 0.5, field_resolution=12)
    assert not rb["gatePassed"]
    assert all(not rec["guaranteed"] for rec in rb["heights"])


# ---------------------------------------------------------------------------
# contact-line asymptotics
# ---------------------------------------------------------------------------

def test_blowup_requires_contact_line(floating_ball2):
    with pytest.raises(NonConstantAngle):
        fit_blowup(floating_ball2, 0.5)


def test_blowup_requires_single_primitive():
    body = ShapeUnion((BallCap(1.0, -0.2),
                       Transformed(BallCap(0.6, -0.1), Translate((1.9,)))))
    model = build_shape(ShapeSpec(2, body), allow_disconnected=True)
    with pytest.raises(NonConstantAngle):
        gradient_bound_audit(model, 0.5)


def test_blowup_reports_negative_contact_cosine():
    # center above the floor: outward normals dip below horizontal at contact
    model = build_shape(ShapeSpec(2, BallCap(1.0, 0.5)))
    rec = fit_blowup(model, 0.5, h0_rel=0.0625, levels=4)
    assert rec["sigma"] == pytest.approx(-0.5)
    assert rec["slope"] < -0.2
    assert all(v > 0.0 for v in rec["values"])


# ---------------------------------------------------------------------------
# report aggregation
# ---------------------------------------------------------------------------

def test_full_report_and_flattening(hemisphere2):
    report = full_report(hemisphere2, 0.5, None, field_resolution=12,
                         include_blowup=False)
    assert {"theoremA", "theoremB", "guaranteedPass"} <= set(report)
    assert report["guaranteedPass"] == guaranteed_pass(report)

    csv = flatten_csv(report)
    lines = csv.splitlines()
    assert lines[0] == "section,label,metric,value"
    assert len(lines) > 20
    assert all(line.count(",") == 3 for line in lines[1:])


def test_guaranteed_pass_logic():
    ok = {
        "theoremA": {"directions": [
            {"pass": True, "intPass": True, "guaranteed": True}]},
        "theoremB": {"heights": [{"pass": True, "guaranteed": True}]},
    }
    assert guaranteed_pass(ok)
    bad = {
        "theoremA": {"directions": [
            {"pass": False, "intPass": True, "guaranteed": True}]},
        "theoremB": {"heights": []},
    }
    assert not guaranteed_pass(bad)
    ungated = {
        "theoremA": {"directions": [
            {"pass": False, "intPass": False, "guaranteed": False}]},
        "theoremB": {"heights": [{"pass": False, "guaranteed": False}]},
    }
    # nothing is certified, so nothing can break the guarantee
    assert guaranteed_pass(ungated)
