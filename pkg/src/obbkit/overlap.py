"""Exact rotated-box overlap via convex polygon clipping, batched IoU
matrices, and rotated (inclined) non-maximum suppression.

Two independent code paths compute intersections: a scalar pure-Python
Sutherland-Hodgman clipper (:func:`intersect_area`) and a vectorized numpy
clipper used by :func:`iou_matrix` and :func:`rotated_nms`.  Both treat a
point within ``CLIP_TOL`` of a clipping line as inside, which keeps shared
edges from duplicating vertices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import RotatedBox, rbox_to_quad, _shoelace

# Distance tolerance for the point-inside-halfplane test.
CLIP_TOL = 1e-9

_Point = tuple[float, float]


@dataclass(frozen=True)
class ConvexPoly:
    """Convex polygon intermediate produced by clipping (3..8 CCW vertices)."""

    vertices: tuple[_Point, ...]

    def __post_init__(self):
        n = len(self.vertices)
        if not 3 <= n <= 8:
            raise ValueError(f"convex clip polygons have 3..8 vertices, got {n}")
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if _shoelace(verts) < -CLIP_TOL:
            raise ValueError("vertices must be ordered CCW (non-negative signed area)")
        object.__setattr__(self, "vertices", verts)

    @property
    def area(self) -> float:
        return max(_shoelace(self.vertices), 0.0)


@dataclass(frozen=True)
class ScoredBox:
    """A detection box with confidence and its original batch position."""

    box: RotatedBox
    score: float
    index: int

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")


def scored_boxes(boxes: Sequence[RotatedBox], scores: Sequence[float]) -> list[ScoredBox]:
    """Zip boxes and scores into ScoredBox records indexed by position."""
    if len(boxes) != len(scores):
        raise ValueError(f"got {len(boxes)} boxes but {len(scores)} scores")
    return [ScoredBox(b, float(s), i) for i, (b, s) in enumerate(zip(boxes, scores))]


def _clip_halfplane(poly: list[_Point], ax: float, ay: float,
                    bx: float, by: float) -> list[_Point]:
    """Clip a polygon against the left half-plane of the directed line a->b."""
    ex, ey = bx - ax, by - ay
    tol = CLIP_TOL * math.hypot(ex, ey)
    out: list[_Point] = []
    sx, sy = poly[-1]
    s_dist = ex * (sy - ay) - ey * (sx - ax)
    s_in = s_dist >= -tol
    for px, py in poly:
        p_dist = ex * (py - ay) - ey * (px - ax)
        p_in = p_dist >= -tol
        if p_in != s_in:
            t = s_dist / (s_dist - p_dist)
            out.append((sx + t * (px - sx), sy + t * (py - sy)))
        if p_in:
            out.append((px, py))
        sx, sy, s_dist, s_in = px, py, p_dist, p_in
    return out


def _intersect_quads(poly: list[_Point], clip) -> float:
    for i in range(4):
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % 4]
        poly = _clip_halfplane(poly, ax, ay, bx, by)
        if len(poly) < 3:
            return 0.0
    return abs(_shoelace(poly))


def intersect_area(a: RotatedBox, b: RotatedBox) -> float:
    """Area of the convex polygon a AND b (Sutherland-Hodgman + shoelace).

    Degenerate (zero-area) inputs yield 0; the result is symmetric in (a, b)
    within 1e-9.
    """
    if a.area <= 0.0 or b.area <= 0.0:
        return 0.0
    return _intersect_quads(list(rbox_to_quad(a).vertices), rbox_to_quad(b).vertices)


def rotated_iou(a: RotatedBox, b: RotatedBox) -> float:
    """Intersection over union of two rotated boxes; 0 when both are degenerate.

    Union areas come from the same corner polygons that are clipped, so
    identical boxes yield exactly 1.0.
    """
    if a.area <= 0.0 or b.area <= 0.0:
        return 0.0
    quad_a = rbox_to_quad(a).vertices
    quad_b = rbox_to_quad(b).vertices
    inter = _intersect_quads(list(quad_a), quad_b)
    union = abs(_shoelace(quad_a)) + abs(_shoelace(quad_b)) - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def _geometry_array(boxes: Sequence[RotatedBox]) -> np.ndarray:
    """(N, 5) float array (cx, cy, w, h, theta); conventions are irrelevant here."""
    out = np.empty((len(boxes), 5), dtype=float)
    for i, b in enumerate(boxes):
        out[i] = (b.cx, b.cy, b.w, b.h, b.theta)
    return out


def _corners_batch(geom: np.ndarray) -> np.ndarray:
    """(K, 5) box rows -> (K, 4, 2) CCW corner arrays."""
    cx, cy, w, h, th = geom.T
    c, s = np.cos(th), np.sin(th)
    ux, uy = 0.5 * w * c, 0.5 * w * s
    vx, vy = -0.5 * h * s, 0.5 * h * c
    xs = np.stack([cx + ux + vx, cx - ux + vx, cx - ux - vx, cx + ux - vx], axis=1)
    ys = np.stack([cy + uy + vy, cy - uy + vy, cy - uy - vy, cy + uy - vy], axis=1)
    return np.stack([xs, ys], axis=2)


def _clip_halfplane_batch(poly: np.ndarray, count: np.ndarray,
                          a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized counterpart of :func:`_clip_halfplane` over K padded polygons."""
    k, nv, _ = poly.shape
    d = b - a
    tol = CLIP_TOL * np.hypot(d[:, 0], d[:, 1])
    rel = poly - a[:, None, :]
    dist = d[:, 0, None] * rel[..., 1] - d[:, 1, None] * rel[..., 0]
    slot = np.arange(nv)[None, :]
    valid = slot < count[:, None]
    inside = (dist >= -tol[:, None]) & valid

    nxt = np.where(slot + 1 < count[:, None], slot + 1, 0)
    dist_n = np.take_along_axis(dist, nxt, axis=1)
    inside_n = np.take_along_axis(inside, nxt, axis=1)
    poly_n = np.take_along_axis(poly, nxt[..., None], axis=1)

    crossing = (inside != inside_n) & valid
    keep_next = inside_n & valid
    denom = dist - dist_n
    t = dist / np.where(denom == 0.0, 1.0, denom)
    inter = poly + t[..., None] * (poly_n - poly)

    cand = np.empty((k, 2 * nv, 2), dtype=float)
    cand[:, 0::2] = inter
    cand[:, 1::2] = poly_n
    mask = np.empty((k, 2 * nv), dtype=bool)
    mask[:, 0::2] = crossing
    mask[:, 1::2] = keep_next

    new_count = mask.sum(axis=1)
    out_nv = max(int(new_count.max(initial=0)), 1)
    # Compact kept candidates to the front of each row (pad slots stay zero;
    # they are masked out of every later computation).
    rows, cols = np.nonzero(mask)
    dest = np.cumsum(mask, axis=1) - 1
    new_poly = np.zeros((k, out_nv, 2))
    new_poly[rows, dest[rows, cols]] = cand[rows, cols]
    new_count = np.where(new_count >= 3, new_count, 0)
    return new_poly, new_count


def _shoelace_batch(poly: np.ndarray, count: np.ndarray) -> np.ndarray:
    k, nv, _ = poly.shape
    valid = np.arange(nv)[None, :] < count[:, None]
    ring = np.where(valid[..., None], poly, poly[:, :1])
    rolled = np.roll(ring, -1, axis=1)
    s = (ring[..., 0] * rolled[..., 1] - rolled[..., 0] * ring[..., 1]).sum(axis=1)
    return np.abs(s) / 2


def _clip_corner_pairs(poly: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Intersection areas for aligned (K, 4, 2) corner-array pairs."""
    k = len(poly)
    count = np.full(k, 4)
    alive = np.arange(k)
    areas = np.zeros(k)
    for j in range(4):
        poly, count = _clip_halfplane_batch(poly, count, clip[alive, j], clip[alive, (j + 1) % 4])
        dead = count == 0
        if dead.any():
            # Rows that already emptied cannot produce area; drop them so the
            # remaining passes touch less memory.
            live = ~dead
            poly, count, alive = poly[live], count[live], alive[live]
            if alive.size == 0:
                return areas
    areas[alive] = _shoelace_batch(poly, count)
    return areas


def _pair_intersections(geom_a: np.ndarray, geom_b: np.ndarray) -> np.ndarray:
    """Intersection areas for aligned (K, 5) box-row pairs."""
    if len(geom_a) == 0:
        return np.zeros(0)
    areas = _clip_corner_pairs(_corners_batch(geom_a), _corners_batch(geom_b))
    areas[geom_a[:, 2] * geom_a[:, 3] <= 0.0] = 0.0
    areas[geom_b[:, 2] * geom_b[:, 3] <= 0.0] = 0.0
    return areas


def _iou_matrix_arrays(geom_a: np.ndarray, geom_b: np.ndarray,
                       row_block: int = 256) -> np.ndarray:
    n, m = len(geom_a), len(geom_b)
    out = np.zeros((n, m))
    if n == 0 or m == 0:
        return out
    area_a = geom_a[:, 2] * geom_a[:, 3]
    area_b = geom_b[:, 2] * geom_b[:, 3]
    # Circumscribed-circle reject: distant pairs cannot intersect.
    rad_a = np.hypot(geom_a[:, 2], geom_a[:, 3]) / 2
    rad_b = np.hypot(geom_b[:, 2], geom_b[:, 3]) / 2
    for i0 in range(0, n, row_block):
        i1 = min(i0 + row_block, n)
        dx = geom_a[i0:i1, 0, None] - geom_b[None, :, 0]
        dy = geom_a[i0:i1, 1, None] - geom_b[None, :, 1]
        reach = rad_a[i0:i1, None] + rad_b[None, :]
        cand = (dx * dx + dy * dy <= reach * reach)
        cand &= (area_a[i0:i1, None] > 0) & (area_b[None, :] > 0)
        ii, jj = np.nonzero(cand)
        if ii.size == 0:
            continue
        inter = _pair_intersections(geom_a[i0 + ii], geom_b[jj])
        union = area_a[i0 + ii] + area_b[jj] - inter
        iou = np.where(union > 0.0, inter / np.where(union > 0.0, union, 1.0), 0.0)
        out[i0 + ii, jj] = np.clip(iou, 0.0, 1.0)
    return out


def iou_matrix(boxes_a: Sequence[RotatedBox], boxes_b: Sequence[RotatedBox]) -> np.ndarray:
    """Pairwise rotated IoU, shape (len(boxes_a), len(boxes_b)).

    Conventions may differ between (and within) the two lists; the corner
    geometry alone determines the result.  Empty input yields an empty matrix.
    """
    return _iou_matrix_arrays(_geometry_array(boxes_a), _geometry_array(boxes_b))


try:  # greedy NMS is the one latency-critical loop; JIT it when numba exists
    from numba import njit as _njit

    @_njit(cache=True)
    def _nms_greedy_jit(cx, cy, rad, area, corners, thr):  # pragma: no cover
        n = cx.shape[0]
        alive = np.ones(n, np.bool_)
        keep = np.empty(n, np.int64)
        px = np.empty(16)
        py = np.empty(16)
        qx = np.empty(16)
        qy = np.empty(16)
        nk = 0
        for i in range(n):
            if not alive[i]:
                continue
            keep[nk] = i
            nk += 1
            if area[i] <= 0.0:
                continue
            for j in range(i + 1, n):
                if not alive[j] or area[j] <= 0.0:
                    continue
                dx = cx[j] - cx[i]
                dy = cy[j] - cy[i]
                rr = rad[i] + rad[j]
                if dx * dx + dy * dy > rr * rr:
                    continue
                # Sutherland-Hodgman clip of polygon j against box i's edges,
                # mirroring _clip_halfplane's tolerance semantics.
                m = 4
                for v in range(4):
                    px[v] = corners[j, v, 0]
                    py[v] = corners[j, v, 1]
                for e in range(4):
                    ax = corners[i, e, 0]
                    ay = corners[i, e, 1]
                    ex = corners[i, (e + 1) % 4, 0] - ax
                    ey = corners[i, (e + 1) % 4, 1] - ay
                    tol = CLIP_TOL * math.sqrt(ex * ex + ey * ey)
                    out = 0
                    sx = px[m - 1]
                    sy = py[m - 1]
                    s_dist = ex * (sy - ay) - ey * (sx - ax)
                    s_in = s_dist >= -tol
                    for v in range(m):
                        vx = px[v]
                        vy = py[v]
                        p_dist = ex * (vy - ay) - ey * (vx - ax)
                        p_in = p_dist >= -tol
                        if p_in != s_in:
                            t = s_dist / (s_dist - p_dist)
                            qx[out] = sx + t * (vx - sx)
                            qy[out] = sy + t * (vy - sy)
                            out += 1
                        if p_in:
                            qx[out] = vx
                            qy[out] = vy
                            out += 1
                        sx = vx
                        sy = vy
                        s_dist = p_dist
                        s_in = p_in
                    m = out
                    for v in range(m):
                        px[v] = qx[v]
                        py[v] = qy[v]
                    if m < 3:
                        break
                if m < 3:
                    continue
                total = 0.0
                for v in range(m):
                    w = (v + 1) % m
                    total += px[v] * py[w] - px[w] * py[v]
                inter = abs(total) / 2
                union = area[i] + area[j] - inter
                if union > 0.0 and inter / union > thr:
                    alive[j] = False
        return keep[:nk]

except ImportError:  # pragma: no cover
    _nms_greedy_jit = None


def _nms_greedy_numpy(indices, corners, area, rad, cx, cy, iou_thr):
    """Incremental greedy NMS over score-sorted arrays (no-numba fallback)."""
    n = len(indices)
    order = np.arange(n)
    keep: list[int] = []
    while order.size > 0:
        pos = order[0]
        keep.append(int(indices[pos]))
        rest = order[1:]
        if rest.size == 0:
            break
        if area[pos] <= 0.0:
            order = rest  # degenerate boxes overlap nothing
            continue
        dx = cx[rest] - cx[pos]
        dy = cy[rest] - cy[pos]
        reach = rad[rest] + rad[pos]
        cand = rest[(dx * dx + dy * dy <= reach * reach) & (area[rest] > 0.0)]
        if cand.size == 0:
            order = rest
            continue
        inter = _clip_corner_pairs(
            np.broadcast_to(corners[pos], (cand.size, 4, 2)), corners[cand])
        union = area[pos] + area[cand] - inter
        iou = np.where(union > 0.0, inter / np.where(union > 0.0, union, 1.0), 0.0)
        suppress = cand[iou > iou_thr]
        if suppress.size:
            dead = np.zeros(n, dtype=bool)
            dead[suppress] = True
            order = rest[~dead[rest]]
        else:
            order = rest
    return keep


def rotated_nms(dets: Sequence[ScoredBox], iou_thr: float) -> list[int]:
    """Greedy inclined NMS; returns kept original indices in keep order.

    Boxes are visited by descending score (ties by ascending original index);
    each kept box suppresses remaining boxes whose IoU against it is strictly
    greater than ``iou_thr``.
    """
    if not 0.0 <= iou_thr <= 1.0:
        raise ValueError(f"iou_thr must be in [0, 1], got {iou_thr}")
    n = len(dets)
    if n == 0:
        return []
    indices = np.array([d.index for d in dets])
    if len(set(indices.tolist())) != n:
        raise ValueError("ScoredBox indices must be unique within a batch")
    scores = np.array([d.score for d in dets])
    sort = np.lexsort((indices, -scores))
    geom = _geometry_array([d.box for d in dets])[sort]
    indices = indices[sort]
    corners = _corners_batch(geom)
    area = geom[:, 2] * geom[:, 3]
    rad = np.hypot(geom[:, 2], geom[:, 3]) / 2
    cx, cy = geom[:, 0], geom[:, 1]

    if _nms_greedy_jit is not None:
        kept = _nms_greedy_jit(cx, cy, rad, area, corners, float(iou_thr))
        return [int(indices[pos]) for pos in kept]
    return _nms_greedy_numpy(indices, corners, area, rad, cx, cy, iou_thr)
