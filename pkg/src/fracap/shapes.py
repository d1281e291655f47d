"""Analytic droplet geometries in the upper half-space.

Sets are described symbolically (ball caps, ellipsoid caps, finite unions,
rigid/scaling transforms) and compiled into :class:`SetModel` objects that
expose a vectorized indicator, a bounding box, exact metadata where closed
forms exist, and boundary sampling.  Everything lives in H = {x_n > 0}; the
flat boundary of H acts as the supporting wall.

No meshes are built anywhere: downstream quadrature only ever asks the
indicator whether points are inside.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import _grid
from .errors import EmptySlice, InvalidSpec, InvalidTransform, SamplingFailure

__all__ = [
    "BallCap", "EllipsoidCap", "ShapeUnion", "Transformed",
    "Translate", "Scale", "Rotate", "Reflect",
    "ShapeSpec", "SetModel", "BoundaryPoint", "ExactGeometry",
    "GeometricSummary", "CrossSection",
    "build_shape", "sample_boundary", "geometric_summary", "transform",
    "cross_section", "shape_spec_from_json", "shape_spec_to_json",
    "shape_digest",
]


# ---------------------------------------------------------------------------
# symbolic shape descriptions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BallCap:
    """Ball of radius `radius` centered at signed height `center_height`,
    intersected with the upper half-space."""
    radius: float
    center_height: float
    horizontal_center: tuple[float, ...] = ()


@dataclass(frozen=True)
class EllipsoidCap:
    """Axis-aligned ellipsoid centered on the vertical axis at
    `center_height`, intersected with the upper half-space."""
    semi_axes: tuple[float, ...]
    center_height: float


@dataclass(frozen=True)
class ShapeUnion:
    members: tuple["Body", ...]


@dataclass(frozen=True)
class Translate:
    """Horizontal translation by `offset` (length n-1)."""
    offset: tuple[float, ...]


@dataclass(frozen=True)
class Scale:
    """Uniform dilation about the origin by `factor` > 0."""
    factor: float


@dataclass(frozen=True)
class Rotate:
    """Rotation about the vertical axis by `angle` (n = 3 only)."""
    angle: float


@dataclass(frozen=True)
class Reflect:
    """Reflection across the vertical hyperplane {x . e = offset}."""
    normal: tuple[float, ...]
    offset: float = 0.0


TransformOp = Union[Translate, Scale, Rotate, Reflect]


@dataclass(frozen=True)
class Transformed:
    base: "Body"
    op: TransformOp


Body = Union[BallCap, EllipsoidCap, ShapeUnion, Transformed]


@dataclass(frozen=True)
class ShapeSpec:
    """Top-level shape description: ambient dimension plus a body tree."""
    n: int
    body: Body


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------

def _body_to_obj(body: Body) -> dict:
    if isinstance(body, BallCap):
        out = {"type": "ball_cap", "radius": body.radius,
               "center_height": body.center_height}
        if body.horizontal_center:
            out["horizontal_center"] = list(body.horizontal_center)
        return out
    if isinstance(body, EllipsoidCap):
        return {"type": "ellipsoid_cap", "semi_axes": list(body.semi_axes),
                "center_height": body.center_height}
    if isinstance(body, ShapeUnion):
        return {"type": "union", "members": [_body_to_obj(m) for m in body.members]}
    if isinstance(body, Transformed):
        op = body.op
        if isinstance(op, Translate):
            op_obj = {"kind": "translate", "offset": list(op.offset)}
        elif isinstance(op, Scale):
            op_obj = {"kind": "scale", "factor": op.factor}
        elif isinstance(op, Rotate):
            op_obj = {"kind": "rotate", "angle": op.angle}
        else:
            raise InvalidSpec(f"op {op!r} has no JSON form")
        return {"type": "transformed", "base": _body_to_obj(body.base), "op": op_obj}
    raise InvalidSpec(f"unknown body {body!r}")


def _body_from_obj(obj: dict) -> Body:
    kind = obj["type"]
    if kind == "ball_cap":
        return BallCap(radius=float(obj["radius"]),
                       center_height=float(obj["center_height"]),
                       horizontal_center=tuple(float(v) for v in obj.get("horizontal_center", ())))
    if kind == "ellipsoid_cap":
        return EllipsoidCap(semi_axes=tuple(float(v) for v in obj["semi_axes"]),
                            center_height=float(obj["center_height"]))
    if kind == "union":
        return ShapeUnion(members=tuple(_body_from_obj(m) for m in obj["members"]))
    if kind == "transformed":
        op_obj = obj["op"]
        op_kind = op_obj["kind"]
        op: TransformOp
        if op_kind == "translate":
            op = Translate(offset=tuple(float(v) for v in op_obj["offset"]))
        elif op_kind == "scale":
            op = Scale(factor=float(op_obj["factor"]))
        elif op_kind == "rotate":
            op = Rotate(angle=float(op_obj["angle"]))
        else:
            raise InvalidSpec(f"unknown transform kind {op_kind!r}")
        return Transformed(base=_body_from_obj(obj["base"]), op=op)
    raise InvalidSpec(f"unknown shape type {kind!r}")


def _load_schema(name: str) -> dict:
    with resources.files("fracap.schemas").joinpath(name).open("r") as fh:
        return json.load(fh)


def shape_spec_to_json(spec: ShapeSpec) -> dict:
    return {"n": spec.n, "shape": _body_to_obj(spec.body)}


def shape_spec_from_json(obj: dict) -> ShapeSpec:
    """Parse and schema-validate a serialized shape description."""
    import jsonschema

    schema = _load_schema("shape.schema.json")
    try:
        jsonschema.validate(obj, schema)
    except jsonschema.ValidationError as exc:
        raise InvalidSpec(f"shape document rejected: {exc.message}") from exc
    return ShapeSpec(n=int(obj["n"]), body=_body_from_obj(obj["shape"]))


def shape_digest(spec: ShapeSpec) -> str:
    """Content hash of the canonical JSON form of a shape description."""
    blob = json.dumps(shape_spec_to_json(spec), sort_keys=True,
                      separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------------------
# compiled leaves
# ---------------------------------------------------------------------------

_TANGENT_RTOL = 1e-12


@dataclass
class _BallLeaf:
    center: np.ndarray
    radius: float

    def contains(self, pts: np.ndarray) -> np.ndarray:
        d2 = ((pts - self.center) ** 2).sum(axis=-1)
        return d2 <= self.radius ** 2

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.center - self.radius, self.center + self.radius

    def validate(self) -> None:
        z, r = self.center[-1], self.radius
        if abs(abs(z) - r) <= _TANGENT_RTOL * r:
            raise InvalidSpec("ball tangent to the floor is not supported")
        if z < -r:
            raise InvalidSpec("ball lies entirely below the floor")

    # -- geometry helpers -------------------------------------------------
    def crosses_floor(self) -> bool:
        return self.center[-1] < self.radius

    def sigma(self) -> Optional[float]:
        if not self.crosses_floor():
            return None
        return float(self.center[-1] / self.radius)

    def unit_normal(self, pts: np.ndarray) -> np.ndarray:
        v = pts - self.center
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    def point_at_height(self, h: float, direction: np.ndarray) -> Optional[np.ndarray]:
        z, r = self.center[-1], self.radius
        dz = h - z
        if abs(dz) >= r:
            return None
        rho = float(np.sqrt(r * r - dz * dz))
        p = self.center.copy()
        p[:-1] += rho * direction
        p[-1] = h
        return p


@dataclass
class _EllipsoidLeaf:
    center: np.ndarray
    semi_axes: np.ndarray
    rot: np.ndarray  # orthogonal, preserves the vertical axis

    def contains(self, pts: np.ndarray) -> np.ndarray:
        y = (pts - self.center) @ self.rot
        return ((y / self.semi_axes) ** 2).sum(axis=-1) <= 1.0

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        # support function of the rotated ellipsoid along each axis
        ext = np.sqrt(((self.rot * self.semi_axes) ** 2).sum(axis=1))
        return self.center - ext, self.center + ext

    def validate(self) -> None:
        z, a_n = self.center[-1], self.semi_axes[-1]
        if abs(abs(z) - a_n) <= _TANGENT_RTOL * a_n:
            raise InvalidSpec("ellipsoid tangent to the floor is not supported")
        if z < -a_n:
            raise InvalidSpec("ellipsoid lies entirely below the floor")

    def crosses_floor(self) -> bool:
        return self.center[-1] < self.semi_axes[-1]

    def sigma_range(self) -> Optional[tuple[float, float]]:
        """Range of the contact-angle cosine along the contact line."""
        if not self.crosses_floor():
            return None
        z = self.center[-1]
        a = self.semi_axes
        a_n = a[-1]
        vert = -z / a_n ** 2         # outward-normal vertical component sign
        t2 = 1.0 - (z / a_n) ** 2    # squared scaled horizontal radius
        vals = []
        for a_h in a[:-1]:
            grad_h2 = t2 / a_h ** 2  # |horizontal gradient part|^2 / 4
            vals.append(vert / np.sqrt(grad_h2 + vert ** 2)
                        if (grad_h2 + vert ** 2) > 0 else 0.0)
        return float(min(vals)), float(max(vals))

    def unit_normal(self, pts: np.ndarray) -> np.ndarray:
        y = (np.atleast_2d(pts) - self.center) @ self.rot
        g = (y / self.semi_axes ** 2) @ self.rot.T
        g = g / np.linalg.norm(g, axis=-1, keepdims=True)
        return g.reshape(np.shape(pts))

    def point_at_height(self, h: float, direction: np.ndarray) -> Optional[np.ndarray]:
        z = self.center[-1]
        y_n = h - z
        a_n = self.semi_axes[-1]
        if abs(y_n) >= a_n:
            return None
        u = np.zeros_like(self.center)
        u[:-1] = direction
        u_leaf = self.rot.T @ u
        quad = float(((u_leaf[:-1] / self.semi_axes[:-1]) ** 2).sum())
        if quad <= 0.0:
            return None
        t = np.sqrt((1.0 - (y_n / a_n) ** 2) / quad)
        y = t * u_leaf
        y[-1] = y_n
        return self.center + self.rot @ y


Leaf = Union[_BallLeaf, _EllipsoidLeaf]


# ---------------------------------------------------------------------------
# compiled model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExactGeometry:
    """Closed-form metadata for a single primitive (None entries mean no
    closed form is available for that quantity)."""
    volume: Optional[float]
    diameter: Optional[float]
    max_height: Optional[float]
    contact_angle_cosine: Optional[float]
    contact_angle_spread: Optional[float] = None


@dataclass(frozen=True)
class BoundaryPoint:
    position: np.ndarray
    normal: np.ndarray
    height: float
    on_contact_line: bool


class SetModel:
    """Compiled indicator set: union of analytic leaves clipped to H."""

    def __init__(self, spec: ShapeSpec, leaves: Sequence[Leaf]):
        self.spec = spec
        self.n = spec.n
        self.leaves = list(leaves)
        lo = np.full(self.n, np.inf)
        hi = np.full(self.n, -np.inf)
        for leaf in self.leaves:
            l, h = leaf.box()
            lo = np.minimum(lo, l)
            hi = np.maximum(hi, h)
        lo[-1] = max(lo[-1], 0.0)
        self.bounding_box = (lo, hi)
        self.exact = _exact_geometry(self.leaves, self.n)
        self.smooth_certified = len(self.leaves) == 1
        self._diam_cache: Optional[float] = None

    # -- core queries -----------------------------------------------------
    def indicator(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        p = np.atleast_2d(pts)
        inside = np.zeros(p.shape[0], dtype=bool)
        for leaf in self.leaves:
            inside |= leaf.contains(p)
        inside &= p[:, -1] > 0.0
        return inside[0] if single else inside

    def diameter(self) -> float:
        """Exact diameter when available, else a tight sampled value."""
        if self.exact is not None and self.exact.diameter is not None:
            return self.exact.diameter
        return self._sampled_diameter()

    def volume(self, resolution: int = 256) -> tuple[float, float]:
        """(volume, one-sided error bound)."""
        if self.exact is not None and self.exact.volume is not None:
            return self.exact.volume, 0.0
        grid = _grid.voxelize(self.indicator, *self.bounding_box, resolution)
        return grid.volume(), grid.volume_error_bound()

    def max_height(self) -> float:
        if self.exact is not None and self.exact.max_height is not None:
            return self.exact.max_height
        return float(self.bounding_box[1][-1])

    def digest(self) -> str:
        return shape_digest(self.spec)

    # -- internals --------------------------------------------------------
    def _sampled_diameter(self, resolution: int = 256) -> float:
        """Max pairwise distance over per-leaf parametric boundary points.

        Extreme points of a union lie on leaf boundaries, so this is a lower
        bound tightened by one sample spacing of slack.
        """
        if self._diam_cache is not None:
            return self._diam_cache
        lo, hi = self.bounding_box
        scale = float((hi - lo).max())
        target = scale / resolution
        sampler = _sample_leaf_2d if self.n == 2 else _sample_leaf_3d
        pts = np.array([bp.position
                        for leaf in self.leaves
                        for bp in sampler(leaf, target, True)])
        d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1)
        self._diam_cache = float(np.sqrt(d2.max())) + target
        return self._diam_cache

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"SetModel(n={self.n}, leaves={len(self.leaves)})"


def _ball_cap_exact(leaf: _BallLeaf, n: int) -> ExactGeometry:
    z, r = float(leaf.center[-1]), leaf.radius
    if z >= r:  # ball strictly inside H
        vol = np.pi * r * r if n == 2 else 4.0 * np.pi * r ** 3 / 3.0
        return ExactGeometry(volume=float(vol), diameter=2.0 * r,
                             max_height=z + r, contact_angle_cosine=None,
                             contact_angle_spread=None)
    if n == 2:
        vol = r * r * np.arccos(-z / r) + z * np.sqrt(r * r - z * z)
    else:
        h = r + z
        vol = np.pi * h * h * (3.0 * r - h) / 3.0
    diam = 2.0 * r if z >= 0.0 else 2.0 * np.sqrt(r * r - z * z)
    return ExactGeometry(volume=float(vol), diameter=float(diam),
                         max_height=z + r, contact_angle_cosine=-z / r,
                         contact_angle_spread=0.0)


def _ellipsoid_cap_exact(leaf: _EllipsoidLeaf, n: int) -> ExactGeometry:
    z = float(leaf.center[-1])
    a = leaf.semi_axes
    a_n, a_h = float(a[-1]), float(a[:-1].max())
    prod = float(np.prod(a))
    if z >= a_n:  # strictly inside H
        vol = np.pi * prod if n == 2 else 4.0 * np.pi * prod / 3.0
        return ExactGeometry(volume=vol, diameter=2.0 * float(a.max()),
                             max_height=z + a_n, contact_angle_cosine=None)
    t0 = -z / a_n
    if n == 2:
        vol = prod * (np.arccos(t0) - t0 * np.sqrt(1.0 - t0 * t0))
    else:
        vol = prod * np.pi * (1.0 - t0) ** 2 * (2.0 + t0) / 3.0
    # diameter: closed form only in the unambiguous cases
    diam: Optional[float] = None
    if z >= 0.0 and a_h >= a_n:
        diam = 2.0 * a_h
    elif z == 0.0:
        if a_n * a_n <= 2.0 * a_h * a_h:
            diam = 2.0 * a_h
        else:
            diam = float(np.sqrt(a_h ** 4 / (a_n ** 2 - a_h ** 2) + a_h ** 2 + a_n ** 2))
    rng = leaf.sigma_range()
    sigma = None
    spread = None
    if rng is not None:
        spread = rng[1] - rng[0]
        if spread <= 1e-12:
            sigma = 0.5 * (rng[0] + rng[1])
    return ExactGeometry(volume=float(vol), diameter=diam,
                         max_height=z + a_n, contact_angle_cosine=sigma,
                         contact_angle_spread=spread)


def _exact_geometry(leaves: Sequence[Leaf], n: int) -> Optional[ExactGeometry]:
    if len(leaves) != 1:
        return None
    leaf = leaves[0]
    if isinstance(leaf, _BallLeaf):
        return _ball_cap_exact(leaf, n)
    return _ellipsoid_cap_exact(leaf, n)


# ---------------------------------------------------------------------------
# compilation
# ---------------------------------------------------------------------------

def _rotation_matrix(n: int, angle: float) -> np.ndarray:
    if n != 3:
        raise InvalidTransform("rotation about the vertical axis needs n = 3")
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _reflection_matrix(n: int, normal: np.ndarray) -> np.ndarray:
    e = np.asarray(normal, dtype=float)
    if e.size != n:
        raise InvalidTransform("reflection normal has wrong length")
    if abs(e[-1]) > 1e-12:
        raise InvalidTransform("reflection hyperplane must be vertical")
    nrm = np.linalg.norm(e)
    if nrm == 0.0:
        raise InvalidTransform("reflection normal is zero")
    e = e / nrm
    return np.eye(n) - 2.0 * np.outer(e, e)


def _op_affine(n: int, op: TransformOp) -> tuple[np.ndarray, np.ndarray]:
    """(A, b) with x -> A x + b; A = factor * orthogonal."""
    if isinstance(op, Translate):
        off = np.asarray(op.offset, dtype=float)
        if off.size != n - 1:
            raise InvalidTransform(
                f"translation offset needs length {n - 1} (horizontal only)")
        b = np.concatenate([off, [0.0]])
        return np.eye(n), b
    if isinstance(op, Scale):
        if op.factor <= 0.0:
            raise InvalidTransform("scale factor must be positive")
        return op.factor * np.eye(n), np.zeros(n)
    if isinstance(op, Rotate):
        return _rotation_matrix(n, op.angle), np.zeros(n)
    if isinstance(op, Reflect):
        e = np.asarray(op.normal, dtype=float)
        A = _reflection_matrix(n, e)
        e = e / np.linalg.norm(e)
        return A, 2.0 * op.offset * e
    raise InvalidTransform(f"unknown transform {op!r}")


def _compile(body: Body, n: int, A: np.ndarray, b: np.ndarray) -> list[Leaf]:
    if isinstance(body, BallCap):
        hc = np.asarray(body.horizontal_center, dtype=float)
        if hc.size == 0:
            hc = np.zeros(n - 1)
        if hc.size != n - 1:
            raise InvalidSpec("horizontal_center length must be n - 1")
        if body.radius <= 0.0:
            raise InvalidSpec("ball radius must be positive")
        center = np.concatenate([hc, [body.center_height]])
        factor = float(np.linalg.norm(A[:, 0]))
        return [_BallLeaf(center=A @ center + b, radius=factor * body.radius)]
    if isinstance(body, EllipsoidCap):
        axes = np.asarray(body.semi_axes, dtype=float)
        if axes.size != n:
            raise InvalidSpec("semi_axes length must equal n")
        if np.any(axes <= 0.0):
            raise InvalidSpec("semi-axes must be positive")
        center = np.zeros(n)
        center[-1] = body.center_height
        factor = float(np.linalg.norm(A[:, 0]))
        Q = A / factor
        return [_EllipsoidLeaf(center=A @ center + b, semi_axes=factor * axes,
                               rot=Q)]
    if isinstance(body, ShapeUnion):
        if not body.members:
            raise InvalidSpec("union of nothing is empty")
        out: list[Leaf] = []
        for m in body.members:
            out.extend(_compile(m, n, A, b))
        return out
    if isinstance(body, Transformed):
        A_op, b_op = _op_affine(n, body.op)
        # composed action: x -> A (A_op x + b_op) + b
        return _compile(body.base, n, A @ A_op, A @ b_op + b)
    raise InvalidSpec(f"unknown body {body!r}")


def build_shape(spec: ShapeSpec, allow_disconnected: bool = False) -> SetModel:
    """Compile a shape description into an indicator-backed model.

    Raises
    ------
    InvalidSpec
        If the description is empty above the floor, tangent to it, or the
        union is disconnected (unless `allow_disconnected`).
    """
    if spec.n not in (2, 3):
        raise InvalidSpec("ambient dimension must be 2 or 3")
    leaves = _compile(spec.body, spec.n, np.eye(spec.n), np.zeros(spec.n))
    for leaf in leaves:
        leaf.validate()
    model = SetModel(spec, leaves)
    if len(leaves) > 1 and not allow_disconnected:
        grid = _grid.voxelize(model.indicator, *model.bounding_box, 64)
        if grid.component_count() > 1:
            raise InvalidSpec(
                "union is disconnected; pass allow_disconnected to keep it")
    return model


def transform(model: SetModel, op: TransformOp) -> SetModel:
    """Apply a horizontal translation, dilation, vertical-axis rotation or
    vertical-hyperplane reflection, returning a new model.

    Exact metadata is recomputed from the transformed primitives, so it stays
    closed-form whenever the input's was.
    """
    _op_affine(model.n, op)  # validate eagerly for a clear error
    new_spec = ShapeSpec(n=model.n, body=Transformed(base=model.spec.body, op=op))
    return build_shape(new_spec, allow_disconnected=True)


# ---------------------------------------------------------------------------
# boundary sampling
# ---------------------------------------------------------------------------

def _arc_params_2d(lo: float, hi: float, count: int) -> np.ndarray:
    """Midpoint parameters on [lo, hi], symmetric about the interval center."""
    return lo + (hi - lo) * (np.arange(count) + 0.5) / count


def _sample_leaf_2d(leaf: Leaf, target: float, include_contact: bool) -> list[BoundaryPoint]:
    if isinstance(leaf, _BallLeaf):
        z, r = float(leaf.center[-1]), leaf.radius
        sigma = leaf.sigma()
        phi_lo = np.arcsin(-sigma) if sigma is not None else -np.pi / 2.0
        phi_hi = np.pi - phi_lo if sigma is not None else 1.5 * np.pi
        count = max(8, int(np.ceil(r * (phi_hi - phi_lo) / target)))
        if count % 2:
            count += 1  # even count => exact mirror pairs about the apex
        phis = _arc_params_2d(phi_lo, phi_hi, count)
        pts = leaf.center + r * np.stack([np.cos(phis), np.sin(phis)], axis=-1)
        out = [BoundaryPoint(position=p, normal=(p - leaf.center) / r,
                             height=float(p[-1]), on_contact_line=False)
               for p in pts]
        if include_contact and sigma is not None:
            for phi in (phi_lo, phi_hi):
                p = leaf.center + r * np.array([np.cos(phi), np.sin(phi)])
                p[-1] = 0.0
                out.append(BoundaryPoint(position=p, normal=(p - leaf.center) / r,
                                         height=0.0, on_contact_line=True))
        return out
    # ellipse
    z = float(leaf.center[-1])
    a = leaf.semi_axes
    crossing = leaf.crosses_floor()
    t_lo = np.arcsin(np.clip(-z / a[-1], -1.0, 1.0)) if crossing else -np.pi / 2.0
    t_hi = np.pi - t_lo if crossing else 1.5 * np.pi
    count = max(8, int(np.ceil(float(a.max()) * (t_hi - t_lo) / target)))
    if count % 2:
        count += 1
    ts = _arc_params_2d(t_lo, t_hi, count)
    ys = np.stack([a[0] * np.cos(ts), a[-1] * np.sin(ts)], axis=-1)
    pts = leaf.center + ys @ leaf.rot.T
    normals = leaf.unit_normal(pts)
    out = [BoundaryPoint(position=p, normal=nu, height=float(p[-1]),
                         on_contact_line=False)
           for p, nu in zip(pts, normals)]
    if include_contact and crossing:
        for t in (t_lo, t_hi):
            y = np.array([a[0] * np.cos(t), a[-1] * np.sin(t)])
            p = leaf.center + leaf.rot @ y
            p[-1] = 0.0
            out.append(BoundaryPoint(position=p,
                                     normal=leaf.unit_normal(p),
                                     height=0.0, on_contact_line=True))
    return out


def _sample_leaf_3d(leaf: Leaf, target: float, include_contact: bool) -> list[BoundaryPoint]:
    if isinstance(leaf, _BallLeaf):
        z, r = float(leaf.center[-1]), leaf.radius
        sigma = leaf.sigma()
        # polar angle psi measured from the north pole
        psi_hi = np.arccos(-z / r) if sigma is not None else np.pi
        rows = max(4, int(np.ceil(r * psi_hi / target)))
        out: list[BoundaryPoint] = []
        for i in range(rows):
            psi = psi_hi * (i + 0.5) / rows
            ring_r = r * np.sin(psi)
            h = z + r * np.cos(psi)
            m = max(8, int(np.ceil(2.0 * np.pi * ring_r / target)))
            azi = 2.0 * np.pi * np.arange(m) / m
            ring = np.stack([ring_r * np.cos(azi), ring_r * np.sin(azi),
                             np.full(m, h)], axis=-1)
            ring[:, :2] += leaf.center[:2]
            for p in ring:
                out.append(BoundaryPoint(position=p, normal=(p - leaf.center) / r,
                                         height=float(p[-1]), on_contact_line=False))
        if include_contact and sigma is not None:
            ring_r = r * np.sin(psi_hi)
            m = max(8, int(np.ceil(2.0 * np.pi * ring_r / target)))
            azi = 2.0 * np.pi * np.arange(m) / m
            for aa in azi:
                p = np.array([leaf.center[0] + ring_r * np.cos(aa),
                              leaf.center[1] + ring_r * np.sin(aa), 0.0])
                out.append(BoundaryPoint(position=p, normal=(p - leaf.center) / r,
                                         height=0.0, on_contact_line=True))
        return out
    # ellipsoid: parameter rings share an exact height because the rotation
    # leaves the vertical axis alone
    z = float(leaf.center[-1])
    a = leaf.semi_axes
    crossing = leaf.crosses_floor()
    v_hi = np.arccos(np.clip(-z / a[-1], -1.0, 1.0)) if crossing else np.pi
    rows = max(4, int(np.ceil(float(a.max()) * v_hi / target)))
    out = []
    for i in range(rows):
        v = v_hi * (i + 0.5) / rows
        m = max(8, int(np.ceil(2.0 * np.pi * float(a[:2].max()) * np.sin(v) / target)))
        u = 2.0 * np.pi * np.arange(m) / m
        ys = np.stack([a[0] * np.sin(v) * np.cos(u),
                       a[1] * np.sin(v) * np.sin(u),
                       np.full(m, a[2] * np.cos(v))], axis=-1)
        pts = leaf.center + ys @ leaf.rot.T
        normals = leaf.unit_normal(pts)
        for p, nu in zip(pts, normals):
            out.append(BoundaryPoint(position=p, normal=nu, height=float(p[-1]),
                                     on_contact_line=False))
    if include_contact and crossing:
        ring_scale = np.sin(v_hi)
        m = max(8, int(np.ceil(2.0 * np.pi * float(a[:2].max()) * ring_scale / target)))
        u = 2.0 * np.pi * np.arange(m) / m
        ys = np.stack([a[0] * ring_scale * np.cos(u),
                       a[1] * ring_scale * np.sin(u),
                       np.full(m, a[2] * np.cos(v_hi))], axis=-1)
        pts = leaf.center + ys @ leaf.rot.T
        pts[:, -1] = 0.0
        normals = leaf.unit_normal(pts)
        for p, nu in zip(pts, normals):
            out.append(BoundaryPoint(position=p, normal=nu, height=0.0,
                                     on_contact_line=True))
    return out


def _leaf_anchor(leaf: Leaf) -> np.ndarray:
    """A point of leaf ∩ H on the leaf's own vertical line."""
    lo, hi = leaf.box()
    anchor = leaf.center.copy()
    anchor[-1] = 0.5 * (max(lo[-1], 0.0) + hi[-1])
    return anchor


def _smoothed_normal(model: SetModel, p: np.ndarray, probe: float) -> np.ndarray:
    """Central-difference gradient of a ball-averaged occupancy fraction."""
    n = model.n
    rng_offsets = _stencil_offsets(n) * (3.0 * probe)
    grad = np.zeros(n)
    for axis in range(n):
        for sign in (-1.0, 1.0):
            q = p.copy()
            q[axis] += sign * probe
            frac = float(np.mean(model.indicator(q + rng_offsets)))
            grad[axis] += sign * frac
    nrm = np.linalg.norm(grad)
    if nrm == 0.0:
        raise SamplingFailure("flat occupancy around a boundary candidate")
    return -grad / nrm


_STENCILS: dict[int, np.ndarray] = {}


def _stencil_offsets(n: int) -> np.ndarray:
    """Fixed unit-ball stencil used by the smoothed occupancy probe."""
    if n not in _STENCILS:
        if n == 2:
            ang = 2.0 * np.pi * np.arange(12) / 12.0
            ring = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
            _STENCILS[n] = np.concatenate([[np.zeros(2)], 0.5 * ring, ring])
        else:
            golden = np.pi * (3.0 - np.sqrt(5.0))
            k = np.arange(26)
            zz = 1.0 - 2.0 * (k + 0.5) / 26
            rr = np.sqrt(1.0 - zz ** 2)
            th = golden * k
            sphere = np.stack([rr * np.cos(th), rr * np.sin(th), zz], axis=-1)
            _STENCILS[n] = np.concatenate([[np.zeros(3)], 0.6 * sphere, sphere])
    return _STENCILS[n]


def _sample_union(model: SetModel, resolution: int, target: float,
                  include_contact: bool) -> list[BoundaryPoint]:
    """Ray root-finding against the union indicator, seeded per leaf."""
    diam = model.diameter()
    probe = diam / (100.0 * resolution)
    out: list[BoundaryPoint] = []
    sampler = _sample_leaf_2d if model.n == 2 else _sample_leaf_3d
    for leaf in model.leaves:
        anchor = _leaf_anchor(leaf)
        for cand in sampler(leaf, target, include_contact):
            p = cand.position
            direction = p - anchor
            dist = float(np.linalg.norm(direction))
            if dist == 0.0:
                continue
            direction = direction / dist
            far = dist + 2.0 * diam
            # known bracket: anchor inside, anchor + far*dir outside
            t_in, t_out = 0.0, far
            for _ in range(60):
                mid = 0.5 * (t_in + t_out)
                q = anchor + mid * direction
                if q[-1] > 0.0 and model.indicator(q):
                    t_in = mid
                else:
                    t_out = mid
            q = anchor + 0.5 * (t_in + t_out) * direction
            if abs(np.linalg.norm(q - p)) > probe and not cand.on_contact_line:
                # the union boundary along this ray is another leaf's; the
                # candidate sits strictly inside and is dropped
                if model.indicator(p + probe * cand.normal):
                    continue
                q = p
            elif cand.on_contact_line:
                q = p
            if cand.on_contact_line:
                nu = cand.normal
            else:
                nu = _smoothed_normal(model, q, probe)
            out.append(BoundaryPoint(position=q, normal=nu,
                                     height=float(q[-1]),
                                     on_contact_line=cand.on_contact_line or q[-1] < probe))
    return out


def sample_boundary(model: SetModel, resolution: int,
                    include_contact: bool = False,
                    validate: bool = True) -> list[BoundaryPoint]:
    """Sample the free boundary (the part away from the floor) of a model.

    Spacing between neighboring samples stays below diam(E)/resolution.
    Primitive leaves use their exact parametrization; unions fall back to ray
    root-finding against the indicator with smoothed-occupancy normals.

    Raises
    ------
    SamplingFailure
        If more than 0.1% of the sampled points disagree with an
        inside/outside probe along their normals.
    """
    diam = model.diameter()
    target = diam / resolution
    if len(model.leaves) == 1:
        sampler = _sample_leaf_2d if model.n == 2 else _sample_leaf_3d
        pts = sampler(model.leaves[0], target, include_contact)
    else:
        pts = _sample_union(model, resolution, target, include_contact)
    if validate:
        _validate_samples(model, pts, diam, resolution)
    return pts


def _validate_samples(model: SetModel, pts: Sequence[BoundaryPoint],
                      diam: float, resolution: int) -> None:
    if not pts:
        raise SamplingFailure("no boundary samples produced")
    probe = diam / (100.0 * resolution)
    interior = [bp for bp in pts if not bp.on_contact_line]
    if not interior:
        return
    pos = np.array([bp.position for bp in interior])
    nus = np.array([bp.normal for bp in interior])
    bad_unit = np.abs(np.linalg.norm(nus, axis=1) - 1.0) > 1e-12
    outside = model.indicator(pos + probe * nus)
    inside = model.indicator(pos - probe * nus)
    bad = bad_unit | outside | ~inside
    if np.count_nonzero(bad) > 0.001 * len(interior):
        raise SamplingFailure(
            f"{np.count_nonzero(bad)} of {len(interior)} samples failed the "
            "normal probe")


# ---------------------------------------------------------------------------
# summaries and slices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeometricSummary:
    volume: float
    volume_error: float
    diameter: float
    diameter_error: float
    max_height: float
    max_height_error: float
    contact_angle_cosine: Optional[float]
    from_closed_form: bool


def geometric_summary(model: SetModel, resolution: int = 256) -> GeometricSummary:
    """Volume, diameter, apex height and contact angle of a model.

    Primitives report their closed forms with zero error; everything else is
    measured by midpoint voxel integration, with the error bound equal to the
    surface-adjacent voxel count times the voxel volume.
    """
    ex = model.exact
    if ex is not None and ex.volume is not None and ex.diameter is not None:
        return GeometricSummary(volume=ex.volume, volume_error=0.0,
                                diameter=ex.diameter, diameter_error=0.0,
                                max_height=ex.max_height, max_height_error=0.0,
                                contact_angle_cosine=ex.contact_angle_cosine,
                                from_closed_form=True)
    grid = _grid.voxelize(model.indicator, *model.bounding_box, resolution)
    vol = grid.volume()
    vol_err = grid.volume_error_bound()
    diam = model._sampled_diameter(resolution)
    lo, hi = model.bounding_box
    spacing = float((hi - lo).max()) / resolution
    occupied_heights = np.nonzero(grid.occupied.any(axis=tuple(range(model.n - 1))))[0]
    if occupied_heights.size == 0:
        raise InvalidSpec("model is empty at this resolution")
    max_h = float(grid.lo[-1] + grid.step * (occupied_heights.max() + 1))
    sigma = ex.contact_angle_cosine if ex is not None else None
    vol_exact = ex.volume if ex is not None and ex.volume is not None else None
    if vol_exact is not None:
        vol, vol_err = vol_exact, 0.0
    mh_exact = ex.max_height if ex is not None and ex.max_height is not None else None
    if mh_exact is not None:
        max_h, mh_err = mh_exact, 0.0
    else:
        mh_err = grid.step
    return GeometricSummary(volume=vol, volume_error=vol_err,
                            diameter=diam, diameter_error=2.0 * spacing,
                            max_height=max_h, max_height_error=mh_err,
                            contact_angle_cosine=sigma, from_closed_form=False)


@dataclass(frozen=True)
class CrossSection:
    height: float
    inner_radius: float      # min distance from the axis point to bd(slice)
    outer_radius: float      # max distance from the axis point to bd(slice)
    slice_diameter: float
    inner_disk_contained: bool
    axis_inside: bool


def _ray_crossings(model: SetModel, origin: np.ndarray, direction: np.ndarray,
                   t_max: float, resolution: int) -> list[float]:
    """Occupancy sign changes along origin + t*direction, refined by bisection."""
    ts = np.linspace(0.0, t_max, resolution + 1)
    pts = origin[None, :] + ts[:, None] * direction[None, :]
    occ = model.indicator(pts)
    cross: list[float] = []
    for i in range(len(ts) - 1):
        if occ[i] != occ[i + 1]:
            a, b = ts[i], ts[i + 1]
            ina = occ[i]
            for _ in range(40):
                mid = 0.5 * (a + b)
                if model.indicator(origin + mid * direction) == ina:
                    a = mid
                else:
                    b = mid
            cross.append(0.5 * (a + b))
    return cross


def cross_section(model: SetModel, height: float, resolution: int = 256) -> CrossSection:
    """Horizontal slice data around the vertical axis at the given height.

    Raises
    ------
    EmptySlice
        If no part of the model meets the plane {x_n = height}.
    """
    if height <= 0.0:
        raise EmptySlice("slices only exist above the floor")
    n = model.n
    lo, hi = model.bounding_box
    axis_pt = np.zeros(n)
    axis_pt[-1] = height
    reach = float(np.linalg.norm(np.maximum(np.abs(lo[:-1]), np.abs(hi[:-1])))) + \
        float((hi - lo).max()) / resolution
    m_dirs = 2 if n == 2 else max(16, resolution // 2)
    dists: list[float] = []
    bpts: list[np.ndarray] = []
    for k in range(m_dirs):
        if n == 2:
            d = np.array([1.0, 0.0]) if k == 0 else np.array([-1.0, 0.0])
        else:
            ang = 2.0 * np.pi * k / m_dirs
            d = np.array([np.cos(ang), np.sin(ang), 0.0])
        for t in _ray_crossings(model, axis_pt, d, reach, resolution):
            dists.append(t)
            bpts.append(axis_pt + t * d)
    axis_inside = bool(model.indicator(axis_pt))
    if not dists:
        if axis_inside:
            # slice swallows every probe ray; treat the reach as outer bound
            dists = [reach]
        else:
            raise EmptySlice(f"no slice at height {height}")
    r_in = float(min(dists))
    r_out = float(max(dists))
    if len(bpts) > 1:
        arr = np.array(bpts)
        d2 = ((arr[:, None, :] - arr[None, :, :]) ** 2).sum(axis=-1)
        slice_diam = float(np.sqrt(d2.max()))
    else:
        slice_diam = 0.0
    contained = _inner_disk_contained(model, axis_pt, r_in, resolution)
    return CrossSection(height=height, inner_radius=r_in, outer_radius=r_out,
                        slice_diameter=slice_diam,
                        inner_disk_contained=contained,
                        axis_inside=axis_inside)


def _inner_disk_contained(model: SetModel, axis_pt: np.ndarray, r_in: float,
                          resolution: int) -> bool:
    if r_in <= 0.0:
        return True
    shrink = r_in * (1.0 - 2.0 / resolution)
    if shrink <= 0.0:
        return True
    if model.n == 2:
        xs = np.linspace(-shrink, shrink, 64)
        pts = np.stack([xs, np.full_like(xs, axis_pt[-1])], axis=-1)
    else:
        rr = shrink * np.sqrt((np.arange(12) + 0.5) / 12.0)
        ang = 2.0 * np.pi * np.arange(24) / 24.0
        R, A = np.meshgrid(rr, ang, indexing="ij")
        pts = np.stack([R.ravel() * np.cos(A.ravel()),
                        R.ravel() * np.sin(A.ravel()),
                        np.full(R.size, axis_pt[-1])], axis=-1)
        pts = np.concatenate([pts, axis_pt[None, :]])
    return bool(np.all(model.indicator(pts)))
