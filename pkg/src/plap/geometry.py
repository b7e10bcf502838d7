"""Convex marker-polygon utilities.

Polygons are (M, 2) float arrays, counterclockwise, strictly convex once
stored (exactly-collinear vertices are pruned losslessly: removing them does
not change the polyline curve). All operations here are exactly equivariant
under grid-aligned 90-degree rotation: they use only sign-symmetric IEEE ops
and two-term (commutative) sums.
"""

from __future__ import annotations

import numpy as np

from .errors import NonConvexPolygon

#: normalized cross products at or below this are treated as exactly collinear
COLLINEAR_TOL = 1e-12


def cross_products(markers: np.ndarray) -> np.ndarray:
    """Cross product (v_k - v_{k-1}) x (v_{k+1} - v_k) at every vertex;
    all positive for a strictly convex counterclockwise polygon."""
    prev = np.roll(markers, 1, axis=0)
    nxt = np.roll(markers, -1, axis=0)
    e1 = markers - prev
    e2 = nxt - markers
    return e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]


def normalized_crosses(markers: np.ndarray) -> np.ndarray:
    """Cross products scaled by the adjacent edge lengths (the sine of the
    turn angle), for scale-free collinearity tests."""
    prev = np.roll(markers, 1, axis=0)
    nxt = np.roll(markers, -1, axis=0)
    e1 = markers - prev
    e2 = nxt - markers
    l1 = np.hypot(e1[:, 0], e1[:, 1])
    l2 = np.hypot(e2[:, 0], e2[:, 1])
    denom = np.where(l1 * l2 > 0, l1 * l2, 1.0)
    return cross_products(markers) / denom


def turn_angles(markers: np.ndarray) -> np.ndarray:
    """Exterior turn angle at every vertex via atan2(cross, dot)."""
    prev = np.roll(markers, 1, axis=0)
    nxt = np.roll(markers, -1, axis=0)
    e1 = markers - prev
    e2 = nxt - markers
    cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    dot = e1[:, 0] * e2[:, 0] + e1[:, 1] * e2[:, 1]
    return np.arctan2(cross, dot)


def prune_collinear(markers: np.ndarray) -> np.ndarray:
    """Drop exactly-collinear vertices (lossless: the curve is unchanged)."""
    pts = np.asarray(markers, dtype=float)
    changed = True
    while changed and pts.shape[0] > 3:
        nc = normalized_crosses(pts)
        keep = np.abs(nc) > COLLINEAR_TOL
        changed = not keep.all()
        if changed:
            if keep.sum() < 3:
                break
            pts = pts[keep]
    return pts


def require_strictly_convex(markers: np.ndarray) -> None:
    """Raise NonConvexPolygon unless counterclockwise and strictly convex."""
    if markers.shape[0] < 3:
        raise NonConvexPolygon("polygon needs at least 3 vertices")
    cp = cross_products(markers)
    if np.any(cp <= 0):
        k = int(np.argmin(cp))
        raise NonConvexPolygon(
            f"vertex {k} is reflex or collinear (cross product {cp[k]:.3e})")


def perimeter(markers: np.ndarray) -> float:
    d = np.roll(markers, -1, axis=0) - markers
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def area(markers: np.ndarray) -> float:
    x, y = markers[:, 0], markers[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return float(0.5 * np.sum(x * yn - xn * y))


def edge_lengths(markers: np.ndarray) -> np.ndarray:
    d = np.roll(markers, -1, axis=0) - markers
    return np.hypot(d[:, 0], d[:, 1])


def inward_normals(markers: np.ndarray) -> np.ndarray:
    """Unit inward normal at each vertex: normalized sum of the two adjacent
    inward edge normals (angle average)."""
    e = np.roll(markers, -1, axis=0) - markers          # edge k: v_k -> v_{k+1}
    ln = np.hypot(e[:, 0], e[:, 1])
    n_edge = np.column_stack((-e[:, 1], e[:, 0])) / ln[:, None]  # inward for CCW
    n_prev = np.roll(n_edge, 1, axis=0)
    s = n_edge + n_prev
    mag = np.hypot(s[:, 0], s[:, 1])
    return s / mag[:, None]


def vertex_curvature(markers: np.ndarray) -> np.ndarray:
    """Discrete curvature: turn angle over the mean adjacent edge length."""
    ln = edge_lengths(markers)
    mean_len = 0.5 * (ln + np.roll(ln, 1))
    return turn_angles(markers) / mean_len


def inradius(markers: np.ndarray, center: np.ndarray | None = None) -> float:
    """Distance from ``center`` (default centroid) to the nearest edge line."""
    if center is None:
        center = markers.mean(axis=0)
    a = markers
    b = np.roll(markers, -1, axis=0)
    e = b - a
    ln = np.hypot(e[:, 0], e[:, 1])
    d = (e[:, 0] * (center[1] - a[:, 1]) - e[:, 1] * (center[0] - a[:, 0])) / ln
    return float(d.min())


def signed_inner_distance(markers: np.ndarray, pts: np.ndarray) -> np.ndarray | float:
    """min over edges of the signed distance to the edge line; positive inside
    a convex CCW polygon, negative outside."""
    p = np.atleast_2d(pts)
    a = markers
    b = np.roll(markers, -1, axis=0)
    e = b - a
    ln = np.hypot(e[:, 0], e[:, 1])
    d = (e[None, :, 0] * (p[:, None, 1] - a[None, :, 1])
         - e[None, :, 1] * (p[:, None, 0] - a[None, :, 0])) / ln[None, :]
    out = d.min(axis=1)
    return out if np.asarray(pts).ndim == 2 else float(out[0])


def distance_to_boundary(markers: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Distance from interior points to the polygon boundary: the infimum of
    the unit-slope supporting-plane functions (edge-line distances)."""
    pts = np.column_stack((np.ravel(X), np.ravel(Y)))
    d = signed_inner_distance(markers, pts)
    return np.maximum(np.asarray(d), 0.0).reshape(np.shape(X))


def contains(markers: np.ndarray, pts: np.ndarray, tol: float = 0.0) -> np.ndarray:
    return np.asarray(signed_inner_distance(markers, pts)) >= -tol


def raster_mask(markers: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Strict-interior mask of the grid nodes via per-row edge crossings.

    Nodes exactly on the boundary count as outside (they carry f = 0 either
    way). O(edges * rows), exact under 90-degree rotation.
    """
    nx, ny = xs.size, ys.size
    mask = np.zeros((nx, ny), dtype=bool)
    a = markers
    b = np.roll(markers, -1, axis=0)
    ay, by = a[:, 1], b[:, 1]
    for j, Y in enumerate(ys):
        # edges strictly crossing the horizontal line y = Y
        crosses = (ay - Y) * (by - Y) < 0.0
        if not np.any(crosses):
            continue
        t = (Y - ay[crosses]) / (by[crosses] - ay[crosses])
        xcut = a[crosses, 0] + t * (b[crosses, 0] - a[crosses, 0])
        if xcut.size < 2:
            continue
        lo, hi = xcut.min(), xcut.max()
        mask[:, j] = (xs > lo) & (xs < hi)
    return mask


def resample_arclength(markers: np.ndarray, count: int) -> np.ndarray:
    """``count`` points equidistributed by arclength along the closed polyline,
    anchored at vertex 0. Points stay exactly on the curve (convexity is
    preserved; consecutive samples on one edge become collinear and are later
    pruned from stored states)."""
    closed = np.vstack((markers, markers[:1]))
    seg = np.diff(closed, axis=0)
    ln = np.hypot(seg[:, 0], seg[:, 1])
    s = np.concatenate(([0.0], np.cumsum(ln)))
    total = s[-1]
    targets = total * np.arange(count) / count
    idx = np.searchsorted(s, targets, side="right") - 1
    idx = np.clip(idx, 0, len(ln) - 1)
    tau = (targets - s[idx]) / ln[idx]
    return closed[idx] + tau[:, None] * seg[idx]
