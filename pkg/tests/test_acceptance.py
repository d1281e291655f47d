"""End-to-end acceptance gate.

One test per published claim, in order: constancy and homogeneity of the
curvature engine, wedge scaling, contact-line blow-up and gradient control,
the axial-symmetry regression, the quantitative almost-symmetry bounds
(reflection asymmetry, slice pinching, critical-offset control), the first
variation identity, oracle equivalence, and CLI determinism.  Tolerances
are fixed here and must not be loosened to make a failing run pass.
"""
from __future__ import annotations

import json

import numpy as np
import pytest

from fracap import cli
from fracap.measures import (curvature_field, first_variation_check,
                             fractional_perimeter, wedge_constant)
from fracap.quadrature import (QuadratureConfig, pv_curvature_integral,
                               regularized_curvature_integral)
from fracap.shapes import (BallCap, EllipsoidCap, Scale, ShapeSpec,
                           Transformed, build_shape)
from fracap.symmetry import (critical_plane, deficit,
                             symmetric_difference_volume)
from fracap.verify import (audit_theorem_a, audit_theorem_b, constants,
                           default_directions, fit_blowup,
                           gradient_bound_audit)

from oracles import reflected_ball_symdiff


# ---------------------------------------------------------------------------
# shared heavyweight artifacts
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def hemi3_planes(hemisphere3):
    return [critical_plane(hemisphere3, e, resolution=48)
            for e in default_directions(3)]


@pytest.fixture(scope="module")
def ellipse_audit_a(ellipse_cap2, ellipse_field):
    return audit_theorem_a(ellipse_cap2, 0.5, field=ellipse_field)


# ---------------------------------------------------------------------------
# 1. constancy of the boundary field on a ball
# ---------------------------------------------------------------------------

def test_ball_field_constancy(floating_ball2):
    for s in (0.25, 0.5, 0.75):
        field = curvature_field(floating_ball2, s, resolution=20)
        values = field.values()
        errors = field.errors()
        assert len(values) >= 60
        spread = float(np.ptp(values))
        assert spread <= 3.0 * float(errors.mean())
        assert spread / float(values.mean()) <= 0.02


# ---------------------------------------------------------------------------
# 2. homogeneity of the curvature density under dilation
# ---------------------------------------------------------------------------

def test_curvature_homogeneity():
    fixtures = [
        (ShapeSpec(2, BallCap(1.0, 0.0)), np.array([0.0, 1.0])),
        (ShapeSpec(2, BallCap(1.0, 1.5)), np.array([0.0, 2.5])),
        (ShapeSpec(2, EllipsoidCap((1.0, 1.2), 0.0)), np.array([0.0, 1.2])),
    ]
    s = 0.5
    for spec, q in fixtures:
        base = pv_curvature_integral(build_shape(spec), q, s)
        for t in (0.5, 2.0):
            scaled = build_shape(ShapeSpec(2, Transformed(spec.body,
                                                          Scale(t))))
            res = pv_curvature_integral(scaled, t * q, s)
            budget = 2.0 * (base.error_estimate
                            + res.error_estimate * t ** s)
            assert abs(res.value * t ** s - base.value) <= budget


# ---------------------------------------------------------------------------
# 3. height scaling of the tangent-wedge constant
# ---------------------------------------------------------------------------

def test_wedge_height_scaling():
    for sigma in (-0.5, 0.0, 0.5):
        vals = [wedge_constant(2, 0.5, sigma, height=h).c
                for h in (1.0, 2.0, 4.0)]
        assert max(vals) / min(vals) - 1.0 <= 0.01


# ---------------------------------------------------------------------------
# 4. blow-up rate and prefactor at the contact line
# ---------------------------------------------------------------------------

def test_contact_blowup_exponent_and_prefactor():
    model = build_shape(ShapeSpec(2, BallCap(1.0, -0.5)))   # contact cosine 0.5
    rec = fit_blowup(model, 0.5)
    assert rec["sigma"] == pytest.approx(0.5)
    assert abs(rec["slope"] - (-0.5)) <= 0.05
    assert rec["relErr"] <= 0.10          # prefactor vs wedge constant


# ---------------------------------------------------------------------------
# 5. rescaled gradient bound along the contact ladder
# ---------------------------------------------------------------------------

def test_contact_gradient_bound():
    model = build_shape(ShapeSpec(2, BallCap(1.0, -0.5)))
    rec = gradient_bound_audit(model, 0.5)
    assert rec["supScaled"] <= 1.25 * rec["wedgeC"] + rec["budget"] \
        + 1.25 * rec["wedgeCErr"]
    assert rec["pass"]
    assert rec["tailNonIncreasing"]


# ---------------------------------------------------------------------------
# 6. axially symmetric sets show no deficit and no reflection asymmetry
# ---------------------------------------------------------------------------

def test_axial_symmetry_regression(hemisphere3, hemi3_field, hemi3_planes):
    est = deficit(hemi3_field, hemisphere3)
    assert est.value <= est.noise_floor
    assert len(hemi3_planes) == 8
    for cp in hemi3_planes:
        vol, err = symmetric_difference_volume(
            hemisphere3, (cp.direction, cp.lam), 96, with_error=True)
        assert vol <= err + 1e-12


# ---------------------------------------------------------------------------
# 7. reflection asymmetry controlled by the deficit (with the
#    weighted-asymmetry intermediate bound)
# ---------------------------------------------------------------------------

def test_reflection_asymmetry_bound(ellipse_audit_a):
    consts = ellipse_audit_a["constants"]
    assert consts["C1"] == pytest.approx(3.0, rel=1e-12)
    for rec in ellipse_audit_a["directions"]:
        assert rec["lhs"] <= rec["rhs"] + rec["budget"]
        assert rec["pass"]
        assert rec["intLhs"] <= rec["intRhs"] + rec["intBudget"]
        assert rec["intPass"]


# ---------------------------------------------------------------------------
# 8. slice pinching under the deficit gate
# ---------------------------------------------------------------------------

def test_slice_pinching_bound(ellipse_cap2, ellipse_field):
    rep = audit_theorem_b(ellipse_cap2, 0.5, field=ellipse_field)
    assert rep["gatePassed"]              # deltaS below the gate level
    assert len(rep["heights"]) == 5
    for rec in rep["heights"]:
        assert "error" not in rec
        assert rec["pinchLhs"] <= rec["pinchRhs"] + rec["pinchBudget"]
        assert rec["pass"]


# ---------------------------------------------------------------------------
# 9. critical plane offsets controlled by the deficit
# ---------------------------------------------------------------------------

def test_critical_offset_bound(ellipse_cap2, ellipse_audit_a,
                               hemisphere3, hemi3_field, hemi3_planes):
    # planar fixture: both admissible horizontal directions
    diam = ellipse_cap2.diameter()
    vol, _ = ellipse_cap2.volume()
    c = constants(2, 0.5, ellipse_cap2)
    sq = np.sqrt(ellipse_audit_a["deltaS"])
    probe_err = diam / 128.0 + diam / 1024.0
    for rec in ellipse_audit_a["directions"]:
        assert abs(rec["lambda"]) <= c.c2 * (diam ** 3 / vol) * sq + probe_err

    # eight-direction leg on the rotationally symmetric solid fixture
    diam3 = hemisphere3.diameter()
    vol3, _ = hemisphere3.volume()
    c3 = constants(3, 0.5, hemisphere3)
    sq3 = np.sqrt(deficit(hemi3_field, hemisphere3).value)
    probe_err3 = diam3 / 48.0 + diam3 / 1024.0
    for cp in hemi3_planes:
        assert abs(cp.lam) <= c3.c2 * (diam3 ** 4 / vol3) * sq3 + probe_err3


# ---------------------------------------------------------------------------
# 10. first variation of the interaction energy
# ---------------------------------------------------------------------------

def test_first_variation_identity(floating_ball2):
    chk = first_variation_check(floating_ball2, lambda bp: 1.0, 0.5)
    assert chk.mismatch / abs(chk.surface_integral) <= 0.02

    # closed-form cross-check: boundary measure times the constant
    # curvature equals (n - s) times the perimeter
    h = pv_curvature_integral(floating_ball2, np.array([0.0, 2.5]), 0.5)
    per = fractional_perimeter(floating_ball2, 0.5, resolution=256)
    lhs = 2.0 * np.pi * h.value
    rhs = (2.0 - 0.5) * per.value
    tol = 2.0 * np.pi * h.error_estimate + 1.5 * per.error_estimate
    assert abs(lhs - rhs) <= tol


# ---------------------------------------------------------------------------
# 11. oracle equivalence: regularized kernel limit and lens volumes
# ---------------------------------------------------------------------------

def test_oracle_equivalence(floating_ball2, ellipse_cap2):
    s = 0.5
    for model, q in ((floating_ball2, np.array([0.0, 2.5])),
                     (ellipse_cap2, np.array([0.0, 1.2]))):
        pv = pv_curvature_integral(model, q, s)
        vals, errs = [], []
        for k in range(4):
            cfg = QuadratureConfig(kernel_mode="eps_regularized",
                                   reg_radius=0.2 * 2.0 ** (-k))
            r = regularized_curvature_integral(model, q, s, cfg)
            vals.append(r.value)
            errs.append(r.error_estimate)
        diffs = [abs(v - pv.value) for v in vals]
        assert diffs == sorted(diffs, reverse=True)    # monotone approach
        # extrapolate the eps^(1-s) defect of the capped kernel
        w = 1.0 / (2.0 ** (1.0 - s) - 1.0)
        ext = [vals[k] + (vals[k] - vals[k - 1]) * w for k in (2, 3)]
        resid = abs(ext[1] - ext[0])
        assert abs(ext[1] - pv.value) <= \
            pv.error_estimate + errs[-1] + 2.0 * resid + 1e-4

    plane = (np.array([1.0, 0.0]), 0.35)
    vol = symmetric_difference_volume(floating_ball2, plane, 128)
    assert vol == pytest.approx(reflected_ball_symdiff(2, 0.7), rel=0.02)


# ---------------------------------------------------------------------------
# 12. determinism of the command surface
# ---------------------------------------------------------------------------

def test_cli_determinism(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "shape": {"n": 2, "shape": {"type": "ball_cap", "radius": 1.0,
                                    "center_height": 0.0}},
        "s": 0.5,
        "fieldResolution": 12,
    }))
    outs = [tmp_path / name for name in ("a.json", "b.json", "c.json")]
    assert cli.main(["curvature", "--config", str(cfg_path),
                     "--out", str(outs[0]), "--threads", "1"]) == 0
    assert cli.main(["curvature", "--config", str(cfg_path),
                     "--out", str(outs[1]), "--threads", "1"]) == 0
    assert cli.main(["curvature", "--config", str(cfg_path),
                     "--out", str(outs[2]), "--threads", "8"]) == 0
    blobs = [p.read_bytes() for p in outs]
    assert blobs[0] == blobs[1] == blobs[2]
    pngs = [p.with_suffix(".png").read_bytes() for p in outs]
    assert pngs[0] == pngs[1] == pngs[2]
