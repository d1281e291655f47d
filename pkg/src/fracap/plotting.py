"""Figure rendering for CLI reports.

Every renderer takes the already-serialized result payload (plain dicts and
lists, exactly what lands in the JSON output) plus an optional compiled model
for geometric context, and writes a single PNG.  Rendering is best-effort
decoration of the data files: nothing here feeds back into any computation.
"""
from __future__ import annotations

from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .shapes import SetModel, sample_boundary

_DPI = 110
# PNG metadata is pinned so repeated runs stay byte-identical.
_META = {"Software": "fracap"}


def _save(fig, path: Path) -> None:
    fig.savefig(path, dpi=_DPI, metadata=_META)
    plt.close(fig)


# ---------------------------------------------------------------------------
# Per-command renderers
# ---------------------------------------------------------------------------

def _field_profile(ax, entries: list[dict]) -> None:
    heights = np.array([e["height"] for e in entries])
    values = np.array([e["value"] for e in entries])
    errors = np.array([e["error"] for e in entries])
    order = np.argsort(heights)
    ax.errorbar(heights[order], values[order], yerr=errors[order],
                fmt="o", ms=3, lw=0.8, capsize=2, color="tab:blue")
    ax.set_xlabel("height above the floor")
    ax.set_ylabel("fractional mean curvature")
    ax.grid(True, alpha=0.3)


def _render_curvature(result: dict, model: Optional[SetModel], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    _field_profile(ax, result["entries"])
    ax.set_title(f"boundary curvature profile (s={result['s']:g})")
    _save(fig, path)


def _render_deficit(result: dict, model: Optional[SetModel], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    _field_profile(ax, result["field"]["entries"])
    pair = result.get("argmaxPair")
    if pair:
        # both pair points sit in the same horizontal slice
        ax.axvline(pair[0]["height"], color="tab:red", ls="--", lw=1.0,
                   label=f"argmax slice (deltaS={result['deltaS']:.3g})")
        ax.legend(loc="best", fontsize=8)
    ax.set_title("slice-pair curvature spread")
    _save(fig, path)


def _render_moving_plane(result: dict, model: Optional[SetModel], path: Path) -> None:
    records = result["directions"]
    if model is not None and model.n == 2:
        fig, ax = plt.subplots(figsize=(5.5, 5.0))
        pts = np.array([bp.position for bp in sample_boundary(model, 256, include_contact=True)])
        ax.plot(pts[:, 0], pts[:, 1], ".", ms=2, color="tab:blue")
        ax.axhline(0.0, color="k", lw=1.0)
        for rec in records:
            e = np.asarray(rec["e"], dtype=float)
            if abs(abs(e[0]) - 1.0) < 1e-12:   # axis-aligned: a vertical line is exact
                ax.axvline(rec["lambda"] * np.sign(e[0]), color="tab:red", lw=1.0, ls="--")
        ax.set_aspect("equal")
        ax.set_title("critical plane positions")
        ax.grid(True, alpha=0.3)
    else:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        lams = [rec["lambda"] for rec in records]
        ax.bar(range(len(lams)), lams, color="tab:red", alpha=0.8)
        ax.set_xlabel("direction index")
        ax.set_ylabel("critical offset")
        ax.set_title("critical plane positions")
        ax.grid(True, axis="y", alpha=0.3)
    _save(fig, path)


def _render_audit_a(result: dict, model: Optional[SetModel], path: Path) -> None:
    records = result["directions"]
    idx = np.arange(len(records))
    lhs = np.array([r["lhs"] for r in records])
    rhs = np.array([r["rhs"] + r["budget"] for r in records])
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    ax.bar(idx - 0.18, lhs, width=0.36, label="reflection asymmetry", color="tab:blue")
    ax.bar(idx + 0.18, rhs, width=0.36, label="deficit bound + budget", color="tab:orange")
    ax.set_xticks(idx)
    ax.set_xticklabels([",".join(f"{c:+.2f}" for c in r["e"]) for r in records],
                       rotation=45, fontsize=7)
    ax.set_yscale("log")
    ax.set_ylabel("volume")
    ax.legend(fontsize=8)
    ax.set_title(f"asymmetry audit (deltaS={result['deltaS']:.3g})")
    fig.tight_layout()
    _save(fig, path)


def _render_audit_b(result: dict, model: Optional[SetModel], path: Path) -> None:
    records = [r for r in result["heights"] if "error" not in r]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if records:
        hs = np.array([r["h"] for r in records])
        lhs = np.array([r["pinchLhs"] for r in records])
        rhs = np.array([r["pinchRhs"] + r["budget"] for r in records])
        ax.plot(hs, lhs, "o-", label="annular gap", color="tab:blue")
        ax.plot(hs, rhs, "s--", label="deficit bound + budget", color="tab:orange")
        ax.set_yscale("log")
        ax.legend(fontsize=8)
    ax.set_xlabel("slice height")
    ax.set_ylabel("width")
    ax.set_title(f"slice pinching audit (deltaS={result['deltaS']:.3g})")
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def _render_blowup(result: dict, model: Optional[SetModel], path: Path) -> None:
    hs = np.asarray(result["heights"])
    vals = np.asarray(result["values"])
    errs = np.asarray(result["errors"])
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.errorbar(hs, vals, yerr=errs, fmt="o", ms=4, capsize=2,
                color="tab:blue", label="measured")
    span = np.array([hs.min(), hs.max()])
    c = result["wedgeC"]
    slope = result["slope"]
    ax.plot(span, c * span ** slope, "--", color="tab:orange",
            label=f"fit slope {slope:.3f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("height above the contact line")
    ax.set_ylabel("fractional mean curvature")
    ax.legend(fontsize=8)
    ax.set_title(f"contact-line blow-up (sigma={result['sigma']:g})")
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)


def _render_grad_bound(result: dict, model: Optional[SetModel], path: Path) -> None:
    hs = np.asarray(result["heights"])
    scaled = np.asarray(result["scaled"])
    errs = np.asarray(result["errors"])
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.errorbar(hs, scaled, yerr=errs, fmt="o-", ms=4, capsize=2,
                color="tab:blue", label="rescaled gradient")
    ax.axhline(result["rhs"], color="tab:red", ls="--", label="bound")
    ax.set_xscale("log")
    ax.set_xlabel("height above the contact line")
    ax.set_ylabel("height^(s+1) * |grad H|")
    ax.legend(fontsize=8)
    ax.set_title("contact-line gradient audit")
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)


_RENDERERS = {
    "curvature": _render_curvature,
    "deficit": _render_deficit,
    "moving-plane": _render_moving_plane,
    "audit-a": _render_audit_a,
    "audit-b": _render_audit_b,
    "blowup": _render_blowup,
    "grad-bound": _render_grad_bound,
}


def render(command: str, result: dict, model: Optional[SetModel],
           path: Path) -> bool:
    """Write the figure for `command` next to its data file.

    Returns False for scalar commands that have nothing worth drawing.
    """
    fn = _RENDERERS.get(command)
    if fn is None:
        return False
    fn(result, model, path)
    return True
