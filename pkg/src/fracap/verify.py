"""Inequality auditors for almost-axial-symmetry of droplet sets.

Each audit evaluates both sides of a quantitative bound on a concrete shape
with explicit error budgets: reflection asymmetry against the square root of
the slice-wise curvature deficit, cross-section pinching after recentering,
contact-line blow-up rates against wedge constants, and the scaled
tangential-gradient bound.  "pass" always means lhs <= rhs + budget, and
"strong pass" means lhs <= rhs - budget; the slack is recorded either way so
a failure is as informative as a success.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import EmptySlice, NonConstantAngle, SamplingFailure
from .measures import (CurvatureField, curvature_field, tangential_gradient,
                       wedge_constant)
from .quadrature import QuadratureConfig, pv_curvature_integral
from .shapes import (SetModel, ShapeSpec, Transformed, Translate, build_shape,
                     cross_section)
from .symmetry import (critical_plane, deficit, _near_normal,
                       symmetric_difference_volume, weighted_asymmetry)

_SIGMA_SPREAD_TOL = 1e-6


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Constants:
    """Closed-form constants entering the symmetry bounds."""
    n: int
    s: float
    c1: float
    c2: float
    delta0: float


def constants(n: int, s: float, model: SetModel) -> Constants:
    """C1, C2 and the smallness gate delta0 for a given shape."""
    c1 = 3.0 * math.sqrt(5.0 / (2.0 * (n + s)))
    c2 = 4.0 * (n + 1) * c1
    vol, _ = model.volume()
    diam = model.diameter()
    delta0 = (min(0.5, 1.0 / (n - 1)) / 3.0) \
        * math.sqrt(2.0 * (n + s) / 5.0) * vol / diam ** n
    return Constants(n=n, s=float(s), c1=c1, c2=c2, delta0=delta0)


def default_directions(n: int) -> list[np.ndarray]:
    """Horizontal audit directions: +-e1 for n = 2, 8 equispaced for n = 3."""
    if n == 2:
        return [np.array([1.0, 0.0]), np.array([-1.0, 0.0])]
    angles = 2.0 * np.pi * np.arange(8) / 8.0
    return [np.array([math.cos(a), math.sin(a), 0.0]) for a in angles]


def _field_and_deficit(model: SetModel, s: float,
                       field: Optional[CurvatureField],
                       field_resolution: int, cfg: QuadratureConfig,
                       height_tolerance_rel: float, threads: int):
    if field is None:
        field = curvature_field(model, s, field_resolution, cfg,
                                threads=threads)
    return field, deficit(field, model, height_tolerance_rel)


def _sqrt_shift(delta: float, noise: float) -> float:
    """Error of sqrt(delta) under an additive uncertainty of `noise`."""
    return math.sqrt(max(delta, 0.0) + noise) - math.sqrt(max(delta, 0.0))


# ---------------------------------------------------------------------------
# reflection asymmetry audit
# ---------------------------------------------------------------------------

def audit_theorem_a(model: SetModel, s: float,
                    directions: Optional[Sequence] = None,
                    cfg: Optional[QuadratureConfig] = None, *,
                    field: Optional[CurvatureField] = None,
                    field_resolution: int = 48,
                    resolution: int = 128,
                    height_tolerance_rel: float = 0.02,
                    bisection_tol: Optional[float] = None,
                    threads: int = 1) -> dict:
    """Reflection asymmetry vs sqrt-deficit, one record per direction.

    Checks |E delta rho(E)| <= C1 diam^n sqrt(delta_s) at the critical
    plane of each direction, plus the intermediate distance-weighted bound
    integral <= 5/(2(n+s)) diam^(n+1) delta_s.
    """
    cfg = (cfg or QuadratureConfig()).validated()
    n = model.n
    diam = model.diameter()
    consts = constants(n, s, model)
    field, d = _field_and_deficit(model, s, field, field_resolution, cfg,
                                  height_tolerance_rel, threads)
    rhs = consts.c1 * diam ** n * math.sqrt(max(d.value, 0.0))
    rhs_noise = consts.c1 * diam ** n * _sqrt_shift(d.value, d.noise_floor)
    int_coef = 5.0 / (2.0 * (n + s)) * diam ** (n + 1)
    int_rhs = int_coef * max(d.value, 0.0)

    records = []
    for e in (directions if directions is not None else default_directions(n)):
        cp = critical_plane(model, e, bisection_tol)
        plane = (cp.direction, cp.lam)
        lhs, lhs_err = symmetric_difference_volume(model, plane, resolution,
                                                  with_error=True)
        budget = lhs_err + rhs_noise
        wa, wa_err = weighted_asymmetry(model, plane, resolution,
                                        with_error=True)
        int_budget = wa_err + int_coef * d.noise_floor
        records.append({
            "e": [float(c) for c in cp.direction],
            "lambda": cp.lam,
            "case": cp.tangency_case,
            "lhs": lhs, "lhsErr": lhs_err,
            "rhs": rhs, "budget": budget,
            "slack": rhs - lhs,
            "pass": lhs <= rhs + budget,
            "strongPass": lhs <= rhs - budget,
            "intLhs": wa, "intLhsErr": wa_err,
            "intRhs": int_rhs, "intBudget": int_budget,
            "intSlack": int_rhs - wa,
            "intPass": wa <= int_rhs + int_budget,
            "guaranteed": model.smooth_certified,
        })
    return {
        "deltaS": d.value,
        "noiseFloor": d.noise_floor,
        "constants": {"C1": consts.c1, "C2": consts.c2,
                      "delta0": consts.delta0},
        "directions": records,
    }


# ---------------------------------------------------------------------------
# cross-section pinching audit
# ---------------------------------------------------------------------------

def _recenter(model: SetModel,
              bisection_tol: Optional[float]) -> tuple[SetModel, list[float]]:
    """Translate so the coordinate critical planes sit at the origin."""
    offsets = []
    for i in range(model.n - 1):
        e = np.zeros(model.n)
        e[i] = 1.0
        offsets.append(critical_plane(model, e, bisection_tol).lam)
    if not any(abs(o) > 0.0 for o in offsets):
        return model, offsets
    body = Transformed(model.spec.body,
                       Translate(tuple(-o for o in offsets)))
    return build_shape(ShapeSpec(model.n, body),
                       allow_disconnected=True), offsets


def audit_theorem_b(model: SetModel, s: float,
                    heights: Optional[Sequence[float]] = None,
                    cfg: Optional[QuadratureConfig] = None, *,
                    field: Optional[CurvatureField] = None,
                    field_resolution: int = 48,
                    section_resolution: int = 256,
                    height_tolerance_rel: float = 0.02,
                    bisection_tol: Optional[float] = None,
                    threads: int = 1) -> dict:
    """Cross-section pinching after recentering, one record per height.

    Wide slices must contain the inner disk; narrow slices must obey the
    small-slice radius bound.  A deficit above delta0 does not stop the
    audit but downgrades every record to non-guaranteed.
    """
    cfg = (cfg or QuadratureConfig()).validated()
    n = model.n
    diam = model.diameter()
    vol, vol_err = model.volume()
    consts = constants(n, s, model)
    field, d = _field_and_deficit(model, s, field, field_resolution, cfg,
                                  height_tolerance_rel, threads)
    gate_passed = d.value <= consts.delta0
    recentered, offsets = _recenter(model, bisection_tol)

    coef = diam ** n / vol
    sq = math.sqrt(max(d.value, 0.0))
    sq_noise = _sqrt_shift(d.value, d.noise_floor)
    # rhs uncertainty: deficit noise plus the volume error entering 1/|E|
    def rhs_budget(rhs_val: float) -> float:
        out = rhs_val * vol_err / vol if vol > 0 else 0.0
        if sq > 0.0:
            out += rhs_val * sq_noise / sq
        return out

    if heights is None:
        top = recentered.max_height()
        heights = [float(h) for h in np.linspace(0.2, 0.8, 5) * top]
    meas = diam / section_resolution
    pinch_rhs = 2.0 * consts.c2 * coef * sq * diam
    wide_threshold = 6.0 * consts.c2 * (diam ** (n + 1) / vol) * sq
    small_rhs = 7.0 * consts.c2 * coef * sq * diam

    records = []
    for h in heights:
        try:
            sec = cross_section(recentered, float(h), section_resolution)
        except EmptySlice as exc:
            records.append({"h": float(h), "error": str(exc), "pass": False,
                            "guaranteed": False})
            continue
        pinch_lhs = sec.outer_radius - sec.inner_radius
        pinch_budget = 2.0 * meas + rhs_budget(pinch_rhs)
        pinch_ok = pinch_lhs <= pinch_rhs + pinch_budget
        rec = {
            "h": float(h),
            "rIn": sec.inner_radius, "rOut": sec.outer_radius,
            "sliceDiam": sec.slice_diameter,
            "pinchLhs": pinch_lhs, "pinchRhs": pinch_rhs,
            "pinchBudget": pinch_budget, "pinchPass": pinch_ok,
            "pinchSlack": pinch_rhs - pinch_lhs,
        }
        if sec.slice_diameter > wide_threshold:
            rec["branch"] = "wide"
            rec["diskContained"] = sec.inner_disk_contained
            branch_ok = sec.inner_disk_contained
        else:
            rec["branch"] = "narrow"
            budget = meas + rhs_budget(small_rhs)
            rec["smallSliceRhs"] = small_rhs
            rec["smallSliceBudget"] = budget
            rec["smallSliceSlack"] = small_rhs - sec.outer_radius
            branch_ok = sec.outer_radius <= small_rhs + budget
        rec["pass"] = pinch_ok and branch_ok
        rec["guaranteed"] = gate_passed and model.smooth_certified
        records.append(rec)
    return {
        "deltaS": d.value,
        "noiseFloor": d.noise_floor,
        "delta0": consts.delta0,
        "gatePassed": gate_passed,
        "recenterOffsets": [float(o) for o in offsets],
        "heights": records,
    }


# ---------------------------------------------------------------------------
# contact-line asymptotics
# ---------------------------------------------------------------------------

def _constant_sigma(model: SetModel) -> float:
    exact = model.exact
    if exact is None:
        raise NonConstantAngle(
            "contact angle is only certified constant for single primitives")
    if exact.contact_angle_cosine is None:
        spread = exact.contact_angle_spread
        if spread is not None and spread > _SIGMA_SPREAD_TOL:
            raise NonConstantAngle(
                f"contact cosine varies by {spread:.2e} along the contact set")
        raise NonConstantAngle("the shape has no contact line")
    spread = exact.contact_angle_spread or 0.0
    if spread > _SIGMA_SPREAD_TOL:
        raise NonConstantAngle(
            f"contact cosine varies by {spread:.2e} along the contact set")
    return float(exact.contact_angle_cosine)


def _meridian_ladder(model: SetModel,
                     heights: Optional[Sequence[float]],
                     h0_rel: float, levels: int) -> list[tuple[np.ndarray, float]]:
    """Boundary points at dyadic heights along the +e1 meridian."""
    if heights is None:
        h0 = h0_rel * model.max_height()
        heights = [h0 * 2.0 ** (-k) for k in range(levels)]
    e1 = np.zeros(model.n - 1)
    e1[0] = 1.0
    leaf = model.leaves[0]
    out = []
    for h in heights:
        pos = leaf.point_at_height(float(h), e1)
        if pos is None:
            raise SamplingFailure(f"no meridian point at height {h}")
        out.append((pos, float(h)))
    return out


def fit_blowup(model: SetModel, s: float,
               cfg: Optional[QuadratureConfig] = None,
               heights: Optional[Sequence[float]] = None, *,
               h0_rel: float = 0.015625, levels: int = 6) -> dict:
    """Log-log fit of the curvature blow-up rate near the contact line.

    Curvature is sampled at dyadic heights along a meridian; the fitted
    slope is compared to -s and the prefactor (read off at the finest
    height, where the power law is cleanest) to the wedge constant.
    """
    cfg = (cfg or QuadratureConfig()).validated()
    sigma = _constant_sigma(model)
    ladder = _meridian_ladder(model, heights, h0_rel, levels)
    hs, vals, errs = [], [], []
    for pos, h in ladder:
        res = pv_curvature_integral(model, pos, s, cfg,
                                    normal=_near_normal(model, pos))
        hs.append(h)
        vals.append(res.value)
        errs.append(res.error_estimate)
    if min(vals) <= 0.0:
        raise SamplingFailure(
            "curvature must stay positive for the log-log fit")
    hs_a, vals_a = np.array(hs), np.array(vals)
    slope, intercept = np.polyfit(np.log(hs_a), np.log(vals_a), 1)
    k_fin = int(np.argmin(hs_a))
    wc = wedge_constant(model.n, s, sigma, cfg)
    prefactor = float(vals_a[k_fin] * hs_a[k_fin] ** s)
    return {
        "sigma": sigma,
        "heights": hs, "values": vals, "errors": errs,
        "slope": float(slope),
        "interceptPrefactor": float(math.exp(intercept)),
        "prefactor": prefactor,
        "wedgeC": wc.c, "wedgeCErr": wc.error_estimate,
        "relErr": abs(prefactor / wc.c - 1.0),
        "slopeGap": abs(float(slope) + s),
    }


def gradient_bound_audit(model: SetModel, s: float,
                         cfg: Optional[QuadratureConfig] = None,
                         heights: Optional[Sequence[float]] = None, *,
                         h0_rel: float = 0.015625, levels: int = 6) -> dict:
    """Scaled tangential-gradient bound q_n^(s+1) |grad H| vs wedge constant.

    The bound carries 25% headroom because the limiting statement controls
    only the limsup along the contact line, not every finite height.
    """
    cfg = (cfg or QuadratureConfig()).validated()
    sigma = _constant_sigma(model)
    ladder = _meridian_ladder(model, heights, h0_rel, levels)
    hs, scaled, errs = [], [], []
    for pos, h in ladder:
        grad, gerr = tangential_gradient(model, pos, s, cfg, with_error=True)
        hs.append(h)
        scaled.append(h ** (s + 1.0) * float(np.linalg.norm(grad)))
        errs.append(h ** (s + 1.0) * gerr)
    k = int(np.argmax(scaled))
    sup_scaled = scaled[k]
    budget = errs[k]
    wc = wedge_constant(model.n, s, sigma, cfg)
    order = np.argsort(hs)[::-1]  # coarse to fine
    tail = [(scaled[i], errs[i]) for i in order[-3:]]
    non_increasing = all(a >= b - (ea + eb)
                         for (a, ea), (b, eb) in zip(tail, tail[1:]))
    return {
        "sigma": sigma,
        "heights": hs, "scaled": scaled, "errors": errs,
        "supScaled": sup_scaled, "budget": budget,
        "wedgeC": wc.c, "wedgeCErr": wc.error_estimate,
        "rhs": 1.25 * wc.c,
        "pass": sup_scaled <= 1.25 * wc.c + budget + 1.25 * wc.error_estimate,
        "tailNonIncreasing": non_increasing,
    }


# ---------------------------------------------------------------------------
# combined report
# ---------------------------------------------------------------------------

def full_report(model: SetModel, s: float,
                cfg: Optional[QuadratureConfig] = None, *,
                directions: Optional[Sequence] = None,
                heights: Optional[Sequence[float]] = None,
                field_resolution: int = 48,
                resolution: int = 128,
                threads: int = 1,
                include_blowup: bool = True) -> dict:
    """All audits on one shape, sharing a single curvature field."""
    cfg = (cfg or QuadratureConfig()).validated()
    field = curvature_field(model, s, field_resolution, cfg, threads=threads)
    report = {
        "n": model.n, "s": float(s),
        "shapeDigest": model.digest(),
        "theoremA": audit_theorem_a(model, s, directions, cfg, field=field,
                                    resolution=resolution, threads=threads),
        "theoremB": audit_theorem_b(model, s, heights, cfg, field=field,
                                    threads=threads),
    }
    if include_blowup:
        try:
            report["blowupFit"] = fit_blowup(model, s, cfg)
            report["gradientAudit"] = gradient_bound_audit(model, s, cfg)
        except NonConstantAngle as exc:
            report["blowupFit"] = {"skipped": str(exc)}
            report["gradientAudit"] = {"skipped": str(exc)}
    report["guaranteedPass"] = guaranteed_pass(report)
    return report


def guaranteed_pass(report: dict) -> bool:
    """True iff every audit the theorems actually guarantee has passed."""
    ok = True
    for rec in report.get("theoremA", {}).get("directions", []):
        if rec.get("guaranteed") and not (rec["pass"] and rec["intPass"]):
            ok = False
    for rec in report.get("theoremB", {}).get("heights", []):
        if rec.get("guaranteed") and not rec.get("pass", False):
            ok = False
    grad = report.get("gradientAudit", {})
    if "pass" in grad and not grad["pass"]:
        ok = False
    return ok


def flatten_csv(report: dict) -> str:
    """Long-format rendering (section,label,metric,value) for plotting."""
    rows: list[tuple[str, str, str, str]] = []

    def emit(section: str, label: str, payload: dict) -> None:
        for key, val in payload.items():
            if isinstance(val, (list, tuple, dict)):
                continue
            rows.append((section, label, key, repr(val)
                         if isinstance(val, float) else str(val)))

    for top in ("n", "s", "shapeDigest", "guaranteedPass"):
        if top in report:
            rows.append(("report", "", top, str(report[top])))
    ta = report.get("theoremA", {})
    emit("theoremA", "", {k: v for k, v in ta.items()
                          if not isinstance(v, (list, dict))})
    emit("theoremA", "constants", ta.get("constants", {}))
    for rec in ta.get("directions", []):
        label = ";".join(f"{c:+.3f}" for c in rec.get("e", []))
        emit("direction", label, rec)
    tb = report.get("theoremB", {})
    emit("theoremB", "", {k: v for k, v in tb.items()
                          if not isinstance(v, (list, dict))})
    for rec in tb.get("heights", []):
        emit("height", f"{rec.get('h', float('nan')):.6g}", rec)
    emit("blowupFit", "", report.get("blowupFit", {}))
    emit("gradientAudit", "", report.get("gradientAudit", {}))
    lines = ["section,label,metric,value"]
    lines += [",".join(row) for row in rows]
    return "\n".join(lines) + "\n"
