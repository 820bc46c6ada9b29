"""Rotated-box representations under three angle conventions and the
conversions among box, quadrilateral, and Gaussian forms.

Angles are radians measured clockwise from the +x axis in image coordinates
(y pointing down).  The rotation matrix is R(t) = [[cos t, -sin t],
[sin t, cos t]], so a box's corners are center +- R(t) @ (+-w/2, +-h/2).
Polygon orientation ("CCW") always refers to positive signed area under the
shoelace formula in these coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateInput, NonFiniteInput, NotPSD

# Geometric equality tolerance used throughout this module.
GEOM_TOL = 1e-9

Point = tuple[float, float]


class AngleConvention(Enum):
    """Angle-range rule pinning (w, h, theta) to a unique representation.

    OC admits theta in [-pi/2, 0) with no edge-ordering constraint (the width
    is the first edge met when rotating from the x axis).  LE90 and LE135
    admit theta in [-pi/2, pi/2) and [-pi/4, 3*pi/4) respectively and require
    w >= h (theta is the long-edge angle).
    """

    OC = "oc"
    LE90 = "le90"
    LE135 = "le135"

    @property
    def theta_min(self) -> float:
        return -math.pi / 4 if self is AngleConvention.LE135 else -math.pi / 2

    @property
    def theta_max(self) -> float:
        if self is AngleConvention.OC:
            return 0.0
        return self.theta_min + math.pi

    @property
    def long_edge(self) -> bool:
        return self is not AngleConvention.OC


def _as_convention(conv: AngleConvention | str) -> AngleConvention:
    if isinstance(conv, AngleConvention):
        return conv
    return AngleConvention(str(conv).lower())


@dataclass(frozen=True)
class RotatedBox:
    """Center/size/angle box tagged with an angle convention.

    Construction only checks finiteness and non-negative sizes; use
    :func:`normalize` to bring an arbitrary (w, h, theta) triple into a
    convention's admissible range.  Boxes whose corner sets coincide are the
    same box: (w, h, t), (h, w, t + pi/2), and (w, h, t + pi) are equivalent.
    """

    cx: float
    cy: float
    w: float
    h: float
    theta: float
    convention: AngleConvention

    def __post_init__(self):
        object.__setattr__(self, "cx", float(self.cx))
        object.__setattr__(self, "cy", float(self.cy))
        object.__setattr__(self, "w", float(self.w))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "convention", _as_convention(self.convention))
        fields = (self.cx, self.cy, self.w, self.h, self.theta)
        if not all(math.isfinite(v) for v in fields):
            raise NonFiniteInput(f"box fields must be finite, got {fields}")
        if self.w < 0 or self.h < 0:
            raise ValueError(f"box sizes must be non-negative, got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    def is_valid(self) -> bool:
        """True when theta is inside the convention's range and the long-edge rule holds."""
        conv = self.convention
        if not (conv.theta_min <= self.theta < conv.theta_max):
            return False
        if conv.long_edge and self.w < self.h:
            return False
        return True


@dataclass(frozen=True)
class QuadPoly:
    """4-vertex planar polygon (DOTA's native corner form).

    Canonicalized on construction: vertices are stored CCW (positive shoelace
    signed area; reversed if negative) and rotated so the lexicographically
    smallest (x, then y) vertex comes first.  Input may be non-convex or
    degenerate; canonicalization never discards vertices.
    """

    vertices: tuple[Point, Point, Point, Point]

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) != 4:
            raise ValueError(f"a quad has exactly 4 vertices, got {len(verts)}")
        if not all(math.isfinite(v) for xy in verts for v in xy):
            raise NonFiniteInput(f"quad vertices must be finite, got {verts}")
        if _shoelace(verts) < 0:
            verts = verts[::-1]
        start = min(range(4), key=lambda i: verts[i])
        verts = verts[start:] + verts[:start]
        object.__setattr__(self, "vertices", verts)

    @property
    def area(self) -> float:
        return abs(_shoelace(self.vertices))

    def as_array(self) -> np.ndarray:
        return np.array(self.vertices, dtype=float)

    def translated(self, dx: float, dy: float) -> "QuadPoly":
        return QuadPoly(tuple((x + dx, y + dy) for x, y in self.vertices))

    def scaled(self, factor: float) -> "QuadPoly":
        return QuadPoly(tuple((x * factor, y * factor) for x, y in self.vertices))


@dataclass(frozen=True, eq=False)
class Gaussian2D:
    """Mean vector and 2x2 covariance; the Gaussian embedding of a box."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        if mu.shape != (2,):
            raise ValueError(f"mu must have shape (2,), got {mu.shape}")
        if sigma.shape != (2, 2):
            raise ValueError(f"sigma must have shape (2, 2), got {sigma.shape}")
        if not (np.isfinite(mu).all() and np.isfinite(sigma).all()):
            raise NonFiniteInput("Gaussian parameters must be finite")
        if abs(sigma[0, 1] - sigma[1, 0]) > GEOM_TOL:
            raise ValueError(f"sigma must be symmetric within {GEOM_TOL}, got {sigma}")
        sigma = (sigma + sigma.T) / 2
        if np.linalg.eigvalsh(sigma)[0] < -GEOM_TOL:
            raise NotPSD(f"sigma has a negative eigenvalue: {sigma}")
        mu.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)


def _shoelace(verts: Sequence[Point]) -> float:
    """Signed polygon area (positive = CCW under the module's convention)."""
    total = 0.0
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        total += x0 * y1 - x1 * y0
    return total / 2


def _reduce_angle(theta: float, lo: float) -> float:
    """Reduce theta modulo pi into [lo, lo + pi), guarding float rounding at both ends."""
    hi = lo + math.pi
    if lo <= theta < hi:
        return theta
    t = (theta - lo) % math.pi + lo
    if t >= hi:
        t -= math.pi
    if t < lo:
        t = lo
    return t


def normalize(box: RotatedBox, target: AngleConvention | str) -> RotatedBox:
    """Return the same box (equal corner set) expressed validly in ``target``.

    May swap w/h together with a +-pi/2 angle shift and reduces theta modulo
    pi; the box is never reflected.
    """
    target = _as_convention(target)
    probe = RotatedBox(box.cx, box.cy, box.w, box.h, box.theta, target)
    if probe.is_valid():
        return probe
    w, h, theta = box.w, box.h, box.theta
    if target.long_edge:
        if h > w:
            w, h = h, w
            theta += math.pi / 2
        theta = _reduce_angle(theta, target.theta_min)
    else:
        # Classic OpenCV behaviour: reduce so the final angle sits in
        # [-pi/2, 0), swapping edges when the reduced angle overshoots.
        t = (theta + math.pi / 2) % math.pi
        if t >= math.pi:
            t -= math.pi
        if t < 0.0:
            t = 0.0
        if t < math.pi / 2:
            theta = t - math.pi / 2
        else:
            w, h = h, w
            theta = t - math.pi
    return RotatedBox(box.cx, box.cy, w, h, theta, target)


def convert(box: RotatedBox, target: AngleConvention | str) -> RotatedBox:
    """Re-express a valid box in another convention, preserving its corner set.

    Routed through the corner representation (:func:`rbox_to_quad` then
    :func:`quad_to_rbox`) so no per-pair case analysis is needed.
    """
    if not box.is_valid():
        raise ValueError(
            f"input box violates its own convention {box.convention.value!r}: {box}"
        )
    return quad_to_rbox(rbox_to_quad(box), target)


def rbox_to_quad(box: RotatedBox) -> QuadPoly:
    """Corner polygon of a box: center +- R(theta) @ (+-w/2, +-h/2), canonical CCW."""
    c, s = math.cos(box.theta), math.sin(box.theta)
    ux, uy = 0.5 * box.w * c, 0.5 * box.w * s
    vx, vy = -0.5 * box.h * s, 0.5 * box.h * c
    cx, cy = box.cx, box.cy
    return QuadPoly(
        (
            (cx + ux + vx, cy + uy + vy),
            (cx - ux + vx, cy - uy + vy),
            (cx - ux - vx, cy - uy - vy),
            (cx + ux - vx, cy + uy - vy),
        )
    )


def _convex_hull(points: Iterable[Point]) -> list[Point]:
    """Strict convex hull (Andrew's monotone chain), CCW, collinear points dropped."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o: Point, a: Point, b: Point) -> float:
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[Point] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Point] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 2:  # all points collinear and equal after dedup
        return pts[:2]
    return hull


def min_area_rect(points: Iterable[Point], target: AngleConvention | str) -> RotatedBox:
    """Minimum-area enclosing rectangle of a point set, in ``target`` convention.

    Rotating calipers over the convex hull's edge orientations.  Degenerate
    sets are handled explicitly: a single distinct point yields a zero-size
    box with theta at the target range's minimum, a collinear set yields a
    zero-height box along the segment.

    Raises:
        DegenerateInput: if ``points`` is empty.
    """
    target = _as_convention(target)
    pts = [(float(x), float(y)) for x, y in points]
    if not pts:
        raise DegenerateInput("cannot enclose an empty point set")
    if not all(math.isfinite(v) for xy in pts for v in xy):
        raise NonFiniteInput(f"points must be finite, got {pts}")
    hull = _convex_hull(pts)
    if len(hull) == 1:
        x, y = hull[0]
        return RotatedBox(x, y, 0.0, 0.0, target.theta_min, target)
    if len(hull) == 2:
        (x0, y0), (x1, y1) = hull
        length = math.hypot(x1 - x0, y1 - y0)
        ux, uy = (x1 - x0) / length, (y1 - y0) / length
        proj = [(p[0] - x0) * ux + (p[1] - y0) * uy for p in pts]
        lo, hi = min(proj), max(proj)
        mid = (lo + hi) / 2
        raw = RotatedBox(x0 + mid * ux, y0 + mid * uy, hi - lo, 0.0,
                         math.atan2(uy, ux), target)
        return normalize(raw, target)

    best_area = math.inf
    best: tuple[float, float, float, float, float] | None = None
    n = len(hull)
    for i in range(n):
        x0, y0 = hull[i]
        x1, y1 = hull[(i + 1) % n]
        length = math.hypot(x1 - x0, y1 - y0)
        ux, uy = (x1 - x0) / length, (y1 - y0) / length
        vx, vy = -uy, ux
        pu = [px * ux + py * uy for px, py in hull]
        pv = [px * vx + py * vy for px, py in hull]
        du = max(pu) - min(pu)
        dv = max(pv) - min(pv)
        if du * dv < best_area:
            best_area = du * dv
            mu = (max(pu) + min(pu)) / 2
            mv = (max(pv) + min(pv)) / 2
            best = (mu * ux + mv * vx, mu * uy + mv * vy, du, dv, math.atan2(uy, ux))
    assert best is not None
    cx, cy, du, dv, theta = best
    return normalize(RotatedBox(cx, cy, du, dv, theta, target), target)


def quad_to_rbox(quad: QuadPoly, target: AngleConvention | str) -> RotatedBox:
    """Minimum-area enclosing rectangle of the quad's convex hull.

    If the quad is exactly a rectangle's corner set, that rectangle is
    recovered (up to the theta ~ theta + pi identification).
    """
    return min_area_rect(quad.vertices, target)


def rbox_to_gaussian(box: RotatedBox) -> Gaussian2D:
    """Gaussian embedding: mu = center, Sigma = R(theta) diag(w^2/4, h^2/4) R(theta)^T.

    Convention-independent: boxes with equal corner sets map to the same
    Gaussian within 1e-9.
    """
    c, s = math.cos(box.theta), math.sin(box.theta)
    rot = np.array([[c, -s], [s, c]])
    sigma = rot @ np.diag([box.w * box.w / 4, box.h * box.h / 4]) @ rot.T
    return Gaussian2D(np.array([box.cx, box.cy]), sigma)


def gaussian_to_rbox(g: Gaussian2D, target: AngleConvention | str) -> RotatedBox:
    """Invert the Gaussian embedding via eigendecomposition.

    Returns (mu, 2*sqrt(l1), 2*sqrt(l2), angle of the leading eigenvector)
    normalized to ``target``.  Isotropic covariances leave theta unconstrained;
    the target range's minimum is reported for determinism.

    Raises:
        NotPSD: if an eigenvalue is below -1e-9.
    """
    target = _as_convention(target)
    vals, vecs = np.linalg.eigh(g.sigma)
    if vals[0] < -GEOM_TOL:
        raise NotPSD(f"covariance has negative eigenvalue {vals[0]}")
    lam2, lam1 = max(float(vals[0]), 0.0), max(float(vals[1]), 0.0)
    w, h = 2 * math.sqrt(lam1), 2 * math.sqrt(lam2)
    mx, my = float(g.mu[0]), float(g.mu[1])
    if w - h <= GEOM_TOL:
        return RotatedBox(mx, my, w, h, target.theta_min, target)
    theta = math.atan2(float(vecs[1, 1]), float(vecs[0, 1]))
    return normalize(RotatedBox(mx, my, w, h, theta, target), target)
