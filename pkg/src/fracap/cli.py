"""Command-line surface: load a run configuration, dispatch, write reports.

One command per process.  The configuration is a single JSON object
(schema: ``fracap/schemas/run_config.schema.json``) validated before any
computation starts; unknown fields are rejected.  Every JSON output is an
envelope ``{command, config, result}`` that re-validates against
``report.schema.json`` (and its config echo against the run-config schema)
before it is written, so emitted files always round-trip.

Exit codes
----------
0   success (audit commands: every checked inequality held)
1   audit ran cleanly but at least one inequality failed
2   configuration error (bad JSON, schema violation, missing block)
3   computation error (sampling failure, degenerate input, ...)

Commands with tabular payloads also render a PNG figure next to the data
file (same stem, ``.png`` suffix) unless ``--no-plot`` is given; rendering
reads only the serialized payload and never feeds back into a computation.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import measures, symmetry, verify
from .errors import ConfigError, FracapError
from .quadrature import QuadratureConfig
from .shapes import (SetModel, _leaf_anchor, _load_schema, build_shape,
                     shape_spec_from_json)

EXIT_OK = 0
EXIT_AUDIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_COMPUTE = 3

COMMANDS = ("curvature", "perimeter", "energy", "deficit", "moving-plane",
            "audit-a", "audit-b", "blowup", "grad-bound", "wedge-c",
            "variation")

_QUAD_KEYS = {
    "innerRadiusRel": "inner_radius_rel",
    "outerRadiusRel": "outer_radius_rel",
    "subdivisionDepth": "subdivision_depth",
    "targetRelTol": "target_rel_tol",
    "kernelMode": "kernel_mode",
    "regRadius": "reg_radius",
}


# ---------------------------------------------------------------------------
# Configuration loading
# ---------------------------------------------------------------------------

def load_config(path: str) -> dict:
    """Read and schema-validate a run configuration file."""
    import jsonschema

    try:
        with open(path, "r") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(obj, _load_schema("run_config.schema.json"))
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config rejected: {exc.message}") from exc
    return obj


def _quad_config(cfg: dict) -> QuadratureConfig:
    block = cfg.get("quadrature")
    if not block:
        return QuadratureConfig()
    return QuadratureConfig(**{_QUAD_KEYS[k]: v for k, v in block.items()}).validated()


def _require_shape(cfg: dict) -> SetModel:
    if "shape" not in cfg:
        raise ConfigError("this command needs a 'shape' block in the config")
    return build_shape(shape_spec_from_json(cfg["shape"]), allow_disconnected=True)


def _bp_json(bp) -> dict:
    return {"position": [float(c) for c in bp.position],
            "height": float(bp.height)}


# ---------------------------------------------------------------------------
# Command handlers
#
# Each returns (result payload, one-line summary, exit code, model or None,
# canned CSV text or None).  Payloads must already be JSON-serializable.
# ---------------------------------------------------------------------------

def _cmd_curvature(cfg, threads):
    model = _require_shape(cfg)
    resolution = cfg.get("fieldResolution", cfg.get("resolution", 64))
    field = measures.curvature_field(model, cfg["s"], resolution=resolution,
                                     cfg=_quad_config(cfg), threads=threads)
    values = np.array([val for _, val, _ in field.entries])
    errors = np.array([err for _, _, err in field.entries])
    summary = (f"meanH {values.mean():.9g} ± {errors.mean():.3g} "
               f"({len(values)} points)")
    return (measures.field_to_json(field), summary, EXIT_OK, model,
            measures.field_to_csv(field))


def _cmd_perimeter(cfg, threads):
    model = _require_shape(cfg)
    res = measures.fractional_perimeter(model, cfg["s"], _quad_config(cfg),
                                        resolution=cfg.get("resolution"))
    payload = {"value": res.value, "errorEstimate": res.error_estimate,
               "refinementLevels": res.refinement_levels_used,
               "warnings": list(res.warnings)}
    return (payload, f"P_s {res.value:.9g} ± {res.error_estimate:.3g}",
            EXIT_OK, model, None)


def _cmd_energy(cfg, threads):
    if "gamma" not in cfg:
        raise ConfigError("the energy command needs a 'gamma' value")
    model = _require_shape(cfg)
    gamma, s = cfg["gamma"], cfg["s"]
    per = measures.fractional_perimeter(model, s, _quad_config(cfg),
                                        resolution=cfg.get("resolution"))
    adh = measures.halfspace_interaction(model, s,
                                         resolution=cfg.get("resolution"))
    value = per.value + (gamma - 1.0) * adh.value
    error = per.error_estimate + abs(gamma - 1.0) * adh.error_estimate
    payload = {"value": value, "errorEstimate": error, "gamma": gamma,
               "perimeter": per.value, "wallInteraction": adh.value}
    return (payload, f"gaussEnergy {value:.9g} ± {error:.3g}",
            EXIT_OK, model, None)


def _cmd_deficit(cfg, threads):
    model = _require_shape(cfg)
    resolution = cfg.get("fieldResolution", cfg.get("resolution", 64))
    field = measures.curvature_field(model, cfg["s"], resolution=resolution,
                                     cfg=_quad_config(cfg), threads=threads)
    est = symmetry.deficit(field, model,
                           cfg.get("heightToleranceRel", 0.02))
    payload = {"deltaS": est.value, "noiseFloor": est.noise_floor,
               "heightTolerance": est.height_tolerance,
               "argmaxPair": [_bp_json(bp) for bp in est.argmax_pair],
               "field": measures.field_to_json(field)}
    return (payload, f"deltaS {est.value:.6g} ± {est.noise_floor:.3g}",
            EXIT_OK, model, None)


def _cmd_moving_plane(cfg, threads):
    model = _require_shape(cfg)
    directions = cfg.get("directions") or verify.default_directions(model.n)
    resolution = cfg.get("resolution", 128)
    field = measures.curvature_field(
        model, cfg["s"],
        resolution=cfg.get("fieldResolution", 48),
        cfg=_quad_config(cfg), threads=threads)
    records = [symmetry.moving_plane_report(
                   model, field, np.asarray(e, dtype=float),
                   cfg.get("heightToleranceRel", 0.02), resolution,
                   cfg.get("bisectionTol"))
               for e in directions]
    payload = {"directions": records}
    lam_max = max(abs(rec["lambda"]) for rec in records)
    tol = cfg.get("bisectionTol", model.diameter() / 1024.0)
    return (payload, f"lambdaMax {lam_max:.6g} ± {tol:.3g}",
            EXIT_OK, model, None)


def _cmd_audit_a(cfg, threads):
    model = _require_shape(cfg)
    directions = cfg.get("directions")
    report = verify.audit_theorem_a(
        model, cfg["s"],
        [np.asarray(e, dtype=float) for e in directions] if directions else None,
        _quad_config(cfg),
        field_resolution=cfg.get("fieldResolution", 48),
        resolution=cfg.get("resolution", 128),
        height_tolerance_rel=cfg.get("heightToleranceRel", 0.02),
        bisection_tol=cfg.get("bisectionTol"), threads=threads)
    ok = all(r["pass"] and r["intPass"] for r in report["directions"])
    slack = min(min(r["slack"], r["intSlack"]) for r in report["directions"])
    mark = "PASS" if ok else "FAIL"
    return (report, f"minSlack {slack:.6g} [{mark}]",
            EXIT_OK if ok else EXIT_AUDIT_FAIL, model, None)


def _cmd_audit_b(cfg, threads):
    model = _require_shape(cfg)
    report = verify.audit_theorem_b(
        model, cfg["s"], cfg.get("heights"), _quad_config(cfg),
        field_resolution=cfg.get("fieldResolution", 48),
        section_resolution=cfg.get("resolution", 256),
        height_tolerance_rel=cfg.get("heightToleranceRel", 0.02),
        bisection_tol=cfg.get("bisectionTol"), threads=threads)
    ok = report["gatePassed"] and all(r.get("pass", False)
                                      for r in report["heights"])
    mark = "PASS" if ok else "FAIL"
    return (report, f"deltaS {report['deltaS']:.6g} "
            f"± {report['noiseFloor']:.3g} [{mark}]",
            EXIT_OK if ok else EXIT_AUDIT_FAIL, model, None)


def _cmd_blowup(cfg, threads):
    model = _require_shape(cfg)
    record = verify.fit_blowup(model, cfg["s"], _quad_config(cfg),
                               cfg.get("heights"),
                               h0_rel=cfg.get("h0Rel", 0.015625),
                               levels=cfg.get("levels", 6))
    return (record, f"blowupSlope {record['slope']:.6g} "
            f"± {record['slopeGap']:.3g}", EXIT_OK, model, None)


def _cmd_grad_bound(cfg, threads):
    model = _require_shape(cfg)
    record = verify.gradient_bound_audit(model, cfg["s"], _quad_config(cfg),
                                         cfg.get("heights"),
                                         h0_rel=cfg.get("h0Rel", 0.015625),
                                         levels=cfg.get("levels", 6))
    mark = "PASS" if record["pass"] else "FAIL"
    return (record, f"supScaled {record['supScaled']:.6g} "
            f"± {record['budget']:.3g} [{mark}]",
            EXIT_OK if record["pass"] else EXIT_AUDIT_FAIL, model, None)


def _cmd_wedge_c(cfg, threads):
    model = None
    if "shape" in cfg:
        model = _require_shape(cfg)
        n = model.n
    elif "n" in cfg:
        n = cfg["n"]
    else:
        raise ConfigError("wedge-c needs either a 'shape' block or 'n'")
    sigma = cfg.get("sigma")
    if sigma is None:
        exact = model.exact if model is not None else None
        if exact is None or exact.contact_angle_cosine is None:
            raise ConfigError("wedge-c needs 'sigma' (the shape has no "
                              "constant contact cosine to borrow)")
        sigma = exact.contact_angle_cosine
    wc = measures.wedge_constant(n, cfg["s"], sigma, cfg=_quad_config(cfg))
    payload = {"n": wc.n, "s": wc.s, "sigma": wc.sigma, "c": wc.c,
               "errorEstimate": wc.error_estimate}
    return (payload, f"c {wc.c:.9g} ± {wc.error_estimate:.3g}",
            EXIT_OK, model, None)


def _speed_field(model: SetModel, name: str) -> Callable:
    if name == "scaling":
        anchor = _leaf_anchor(model.leaves[0])
        return lambda bp: float((bp.position - anchor) @ bp.normal)
    if name == "vertical":
        return lambda bp: float(bp.normal[-1])
    return lambda bp: float(bp.normal[0])    # horizontal


def _cmd_variation(cfg, threads):
    model = _require_shape(cfg)
    name = cfg.get("speed", "scaling")
    chk = measures.first_variation_check(model, _speed_field(model, name),
                                         cfg["s"], _quad_config(cfg),
                                         resolution=cfg.get("resolution"))
    payload = {"speed": name, "fdDerivative": chk.fd_derivative,
               "surfaceIntegral": chk.surface_integral,
               "mismatch": chk.mismatch}
    return (payload, f"variationMismatch {chk.mismatch:.6g} "
            f"(fd {chk.fd_derivative:.6g}, surface {chk.surface_integral:.6g})",
            EXIT_OK, model, None)


_HANDLERS = {
    "curvature": _cmd_curvature,
    "perimeter": _cmd_perimeter,
    "energy": _cmd_energy,
    "deficit": _cmd_deficit,
    "moving-plane": _cmd_moving_plane,
    "audit-a": _cmd_audit_a,
    "audit-b": _cmd_audit_b,
    "blowup": _cmd_blowup,
    "grad-bound": _cmd_grad_bound,
    "wedge-c": _cmd_wedge_c,
    "variation": _cmd_variation,
}


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _jsonable(obj):
    """Recursively coerce numpy scalars/arrays into plain Python."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _csv_escape(v) -> str:
    text = repr(float(v)) if isinstance(v, float) else str(v)
    return f'"{text}"' if "," in text else text


def _flatten_rows(prefix: str, obj, rows: list) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten_rows(f"{prefix}.{k}" if prefix else str(k), v, rows)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _flatten_rows(f"{prefix}[{i}]", v, rows)
    else:
        rows.append(f"{prefix},{_csv_escape(obj)}")


def to_csv(report: dict) -> str:
    """Long-format key,value rendering of a report envelope."""
    rows: list[str] = ["key,value"]
    _flatten_rows("", report, rows)
    return "\n".join(rows) + "\n"


def _emit(command: str, cfg: dict, payload: dict, csv_text: Optional[str],
          out_path: Optional[str], fmt: str, no_plot: bool,
          model: Optional[SetModel]) -> None:
    import jsonschema

    report = _jsonable({"command": command, "config": cfg, "result": payload})
    if fmt == "json":
        # round-trip guarantee: what we write re-validates
        jsonschema.validate(report, _load_schema("report.schema.json"))
        jsonschema.validate(report["config"],
                            _load_schema("run_config.schema.json"))
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    else:
        text = csv_text if csv_text is not None else to_csv(report)
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)
    if out_path and not no_plot:
        from . import plotting    # matplotlib import deferred to here
        plotting.render(command, report["result"], model,
                        Path(out_path).with_suffix(".png"))


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracap",
        description="Nonlocal curvature, perimeter and symmetry audits "
                    "for droplet-shaped sets in the upper half-space.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True,
                        help="path to the run-configuration JSON")
    parser.add_argument("--out", default=None,
                        help="output file (overrides the config's outputPath)")
    parser.add_argument("--format", choices=("json", "csv"), default=None,
                        help="serialization format (default: config or json)")
    parser.add_argument("--threads", type=int, default=None,
                        help="parallelism cap for field evaluation")
    parser.add_argument("--seedless", action="store_true",
                        help="run the computation twice and fail unless both "
                             "serializations agree byte-for-byte")
    parser.add_argument("--no-plot", action="store_true",
                        help="skip the PNG figure next to the data file")
    parser.add_argument("--error-json", action="store_true",
                        help="on failure, print a machine-readable error "
                             "object to stdout")
    return parser


def _fail(code: int, exc: BaseException, error_json: bool) -> int:
    if error_json:
        print(json.dumps({"error": {"type": type(exc).__name__,
                                    "message": str(exc),
                                    "exitCode": code}}, sort_keys=True))
    print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return code


def main(argv: Optional[list] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if "shape" not in cfg and args.command != "wedge-c":
            raise ConfigError("this command needs a 'shape' block in the config")
        fmt = args.format or cfg.get("format", "json")
        out_path = args.out if args.out is not None else cfg.get("outputPath")
        threads = args.threads if args.threads is not None else cfg.get("threads", 1)
        if threads < 1:
            raise ConfigError("--threads must be at least 1")
        handler = _HANDLERS[args.command]
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc, args.error_json)

    try:
        payload, summary, code, model, csv_text = handler(cfg, threads)
        if args.seedless:
            replay = handler(cfg, threads)
            a = json.dumps(_jsonable(payload), sort_keys=True)
            b = json.dumps(_jsonable(replay[0]), sort_keys=True)
            if a != b:
                raise FracapError("seedless check failed: reruns of the same "
                                  "config produced different bytes")
        _emit(args.command, cfg, payload, csv_text, out_path, fmt,
              args.no_plot, model)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc, args.error_json)
    except FracapError as exc:
        return _fail(EXIT_COMPUTE, exc, args.error_json)
    except Exception as exc:                       # pragma: no cover - safety net
        return _fail(EXIT_COMPUTE, exc, args.error_json)

    print(summary)
    return code


if __name__ == "__main__":
    sys.exit(main())
