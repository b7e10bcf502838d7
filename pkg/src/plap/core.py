"""Domain types, grids, canonical initial data and field sampling.

The moving domain is the positivity set of a non-negative height field f that
evolves by the regularized p-Laplacian  f_t = div((|Df|^2 + eps)^(q-1) Df),
q = p/2, and carries the combustion pair f = 0, |Df| = 1 on its boundary.

Radial states live on a front-fixed grid: nodes sit at y_i = i/(N-1) in the
mapped coordinate y = r/R(t), so the free boundary is always the last node.
Planar (n = 2) states combine a counterclockwise convex marker polygon for the
front with heights on a fixed background grid, extended by zero outside.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadRadius,
    NonConcaveData,
    NonConvexPolygon,
    OutsideDomain,
    ResolutionTooCoarse,
)
from . import geometry

__all__ = [
    "PParams",
    "RadialState",
    "PlanarState",
    "GeometryBounds",
    "Diagnostics",
    "Snapshot",
    "Trajectory",
    "build_initial_radial",
    "build_initial_planar",
    "sample_gradient",
    "radial_node_gradients",
    "compute_diagnostics",
    "check_radial_invariants",
    "concavity_tolerance",
    "load_table",
]

#: clamp tolerance for heights that should be exactly zero
ZERO_TOL = 1e-12

#: turn angle (radians) above which a marker counts as a corner and is
#: excluded from the Neumann-residual maximum (|Df0| = 1 only a.e. there)
CORNER_ANGLE = 0.35


@dataclass(frozen=True)
class PParams:
    """Exponent and regularization parameters.

    p > 2 is the diffusion exponent, q = p/2 throughout, epsilon >= 0 the
    regularization (epsilon = 0 is the degenerate limit problem), n >= 1 the
    spatial dimension.
    """

    p: float
    epsilon: float
    n: int = 1

    def __post_init__(self):
        if not self.p > 2.0:
            raise ValueError(f"p must exceed 2, got {self.p}")
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")

    @property
    def q(self) -> float:
        return self.p / 2.0


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RadialState:
    """Radial height profile on the front-fixed grid.

    ``heights[i]`` is f at r_i = y_i * front_radius, y_i = i/(N-1). The last
    node is the free boundary and carries exactly 0.
    """

    time: float
    front_radius: float
    heights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "heights", _freeze(self.heights))

    @property
    def grid_size(self) -> int:
        return self.heights.shape[0]

    @property
    def y_nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_size)

    @property
    def r_nodes(self) -> np.ndarray:
        return self.y_nodes * self.front_radius

    @property
    def dr(self) -> float:
        """Physical node spacing."""
        return self.front_radius / (self.grid_size - 1)

    @property
    def max_height(self) -> float:
        return float(self.heights.max())


@dataclass(frozen=True)
class PlanarState:
    """Convex marker front plus heights on a fixed background grid (n = 2).

    ``markers`` is a counterclockwise, strictly convex polygon (collinear
    vertices are never stored). ``heights[ix, iy]`` is f at
    (origin[0] + ix*h, origin[1] + iy*h); nodes outside the polygon carry 0.
    """

    time: float
    markers: np.ndarray
    heights: np.ndarray
    origin: tuple[float, float]
    grid_spacing: float

    def __post_init__(self):
        object.__setattr__(self, "markers", _freeze(self.markers))
        object.__setattr__(self, "heights", _freeze(self.heights))

    @property
    def x_nodes(self) -> np.ndarray:
        return self.origin[0] + self.grid_spacing * np.arange(self.heights.shape[0])

    @property
    def y_nodes(self) -> np.ndarray:
        return self.origin[1] + self.grid_spacing * np.arange(self.heights.shape[1])

    @property
    def max_height(self) -> float:
        return float(self.heights.max())

    def inside_mask(self) -> np.ndarray:
        return geometry.raster_mask(self.markers, self.x_nodes, self.y_nodes)


@dataclass(frozen=True)
class GeometryBounds:
    """Inner/outer ball radii and the height floor on the inner ball.

    Satisfies B_{r_in} subset Omega_t subset B_{R_out} with f > m on B_{r_in};
    recomputed from the current state each time it is needed rather than
    assumed constant.
    """

    r_in: float
    R_out: float
    m: float

    def __post_init__(self):
        if not (0.0 < self.r_in <= self.R_out):
            raise ValueError(f"need 0 < r_in <= R_out, got {self.r_in}, {self.R_out}")
        if not self.m > 0.0:
            raise ValueError(f"need m > 0, got {self.m}")


@dataclass(frozen=True)
class Diagnostics:
    """Scalar diagnostics, a pure function of one state."""

    sup_grad: float
    neumann_residual: float
    concavity_violation: float
    front_measure: float
    max_height: float
    area: float | None = None
    corner_markers_excluded: int = 0

    def as_dict(self) -> dict:
        d = {
            "sup_grad": self.sup_grad,
            "neumann_residual": self.neumann_residual,
            "concavity_violation": self.concavity_violation,
            "front_measure": self.front_measure,
            "max_height": self.max_height,
        }
        if self.area is not None:
            d["area"] = self.area
            d["corner_markers_excluded"] = self.corner_markers_excluded
        return d


@dataclass(frozen=True)
class Snapshot:
    time: float
    state: RadialState | PlanarState
    diagnostics: Diagnostics


@dataclass
class Trajectory:
    """Time-ordered snapshots of one run plus per-step monotonicity records.

    ``status`` is one of "Extinct", "TimeCapReached", "Failed".
    ``step_records`` holds dense per-step arrays (times, front measure, max
    height, max node-wise height increase) so monotone-decay checks do not
    depend on snapshot cadence.
    """

    params: PParams
    kind: str  # "radial" | "planar"
    snapshots: list[Snapshot] = field(default_factory=list)
    status: str = "TimeCapReached"
    step_records: dict[str, np.ndarray] = field(default_factory=dict)
    error: str | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    @property
    def final_state(self):
        return self.snapshots[-1].state

    def max_heights(self) -> np.ndarray:
        return np.array([s.diagnostics.max_height for s in self.snapshots])


# ---------------------------------------------------------------------------
# tolerances
# ---------------------------------------------------------------------------

def concavity_tolerance(spacing: float) -> float:
    """Discrete concavity slack 10*h^2 for a second-order scheme."""
    return 10.0 * spacing * spacing


# ---------------------------------------------------------------------------
# initial data, radial
# ---------------------------------------------------------------------------

def load_table(path) -> np.ndarray:
    """Read two-column (r, f) CSV table data with header row ``r,f``."""
    with open(path, newline="") as fh:
        return parse_table(fh.read())


def parse_table(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["r", "f"]:
        raise NonConcaveData("table must start with header row 'r,f'")
    data = np.array([[float(c) for c in row] for row in rows[1:] if row])
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 2:
        raise NonConcaveData("table needs at least two (r, f) rows")
    if np.any(np.diff(data[:, 0]) <= 0):
        raise NonConcaveData("table r column must be strictly increasing")
    return data


def build_initial_radial(kind: str, R0: float, params: PParams, N: int,
                         table: np.ndarray | None = None) -> RadialState:
    """Concave initial profile vanishing at r = R0 on the front-fixed grid.

    kinds:
      parabolic_cap  f0(r) = (R0^2 - r^2) / (2 R0)   (|f0'(R0)| = 1)
      cone           f0(r) = R0 - r                   (|f0'| = 1 everywhere)
      table          piecewise-linear interpolation of (r, f) pairs
    """
    if not np.isfinite(R0) or R0 <= 0.0:
        raise BadRadius(f"R0 must be positive, got {R0}")
    if N < 8:
        raise ValueError(f"N must be >= 8, got {N}")

    r = np.linspace(0.0, R0, N)
    if kind == "parabolic_cap":
        f = (R0 * R0 - r * r) / (2.0 * R0)
    elif kind == "cone":
        f = R0 - r
    elif kind == "table":
        if table is None:
            raise NonConcaveData("kind 'table' requires (r, f) data")
        f = _table_profile(table, r, R0)
    else:
        raise ValueError(f"unknown radial initial kind {kind!r}")

    f = f.copy()
    f[-1] = 0.0
    state = RadialState(time=0.0, front_radius=R0, heights=f)
    check_radial_invariants(state)
    return state


def _table_profile(table: np.ndarray, r: np.ndarray, R0: float) -> np.ndarray:
    rt, ft = table[:, 0], table[:, 1]
    if np.any(ft < -ZERO_TOL):
        raise NonConcaveData("table heights must be non-negative")
    if abs(rt[-1] - R0) > 1e-9 * max(1.0, R0):
        raise NonConcaveData(f"table must end at r = R0 = {R0}, got {rt[-1]}")
    if abs(ft[-1]) > ZERO_TOL:
        raise NonConcaveData("table height must vanish at R0")
    # concavity of the piecewise-linear envelope: slopes non-increasing
    slopes = np.diff(ft) / np.diff(rt)
    if np.any(np.diff(slopes) > 1e-10):
        raise NonConcaveData("table slopes increase; data is not concave")
    lead = np.concatenate(([0.0], rt)) if rt[0] > 0 else rt
    vals = np.concatenate(([ft[0]], ft)) if rt[0] > 0 else ft
    return np.interp(r, lead, vals)


def check_radial_invariants(state: RadialState, tol: float = ZERO_TOL) -> None:
    """Raise NonConcaveData/BadRadius if the state violates its invariants."""
    f = state.heights
    if state.front_radius <= 0:
        raise BadRadius(f"front radius {state.front_radius} <= 0")
    if f[-1] != 0.0:
        raise NonConcaveData("front node must carry exactly 0")
    if np.any(f < -tol):
        raise NonConcaveData("negative heights")
    if np.any(np.diff(f) > tol):
        raise NonConcaveData("heights increase with r")
    h = state.dr
    second = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / (h * h)
    if second.size and second.max() > concavity_tolerance(h):
        raise NonConcaveData(
            f"concavity violated: max positive second difference {second.max():.3e}")


# ---------------------------------------------------------------------------
# initial data, planar
# ---------------------------------------------------------------------------

def build_initial_planar(kind: str, params: PParams, h: float,
                         R0: float | None = None,
                         vertices: np.ndarray | None = None,
                         marker_count: int = 128,
                         center: tuple[float, float] = (0.0, 0.0)) -> PlanarState:
    """Concave cap over a convex planar domain.

    disk_cap:    markers on the circle |x - center| = R0, heights are the
                 radial parabolic cap.
    polygon_cap: markers at the polygon's (strictly convex) vertices, heights
                 f0(x) = dist(x, boundary) = inf of unit-slope supporting-plane
                 functions.
    """
    if params.n != 2:
        raise ValueError("planar states require n = 2")
    if h <= 0:
        raise ValueError(f"grid spacing must be positive, got {h}")

    if kind == "disk_cap":
        if R0 is None or R0 <= 0:
            raise BadRadius(f"disk_cap requires R0 > 0, got {R0}")
        theta = 2.0 * np.pi * np.arange(marker_count) / marker_count
        markers = np.column_stack((center[0] + R0 * np.cos(theta),
                                   center[1] + R0 * np.sin(theta)))
        if 2.0 * R0 / h < 16:
            raise ResolutionTooCoarse(f"h = {h} gives fewer than 16 cells across 2*R0")
    elif kind == "polygon_cap":
        if vertices is None:
            raise NonConvexPolygon("polygon_cap requires vertices")
        markers = geometry.prune_collinear(np.asarray(vertices, dtype=float))
        geometry.require_strictly_convex(markers)
        r_in = geometry.inradius(markers)
        if 2.0 * r_in / h < 16:
            raise ResolutionTooCoarse(f"h = {h} gives fewer than 16 cells across")
    else:
        raise ValueError(f"unknown planar initial kind {kind!r}")

    x0, y0, nx, ny = _bounding_grid(markers, h)
    xs = x0 + h * np.arange(nx)
    ys = y0 + h * np.arange(ny)
    mask = geometry.raster_mask(markers, xs, ys)

    F = np.zeros((nx, ny))
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    if kind == "disk_cap":
        r2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
        F[mask] = np.maximum((R0 * R0 - r2[mask]) / (2.0 * R0), 0.0)
    else:
        F[mask] = geometry.distance_to_boundary(markers, X[mask], Y[mask])
    return PlanarState(time=0.0, markers=markers, heights=F,
                       origin=(x0, y0), grid_spacing=h)


def _bounding_grid(markers: np.ndarray, h: float) -> tuple[float, float, int, int]:
    """Grid covering the polygon with a 3-cell margin, symmetric for symmetric input."""
    lo = markers.min(axis=0)
    hi = markers.max(axis=0)
    i_lo = np.floor(lo / h).astype(int) - 3
    i_hi = np.ceil(hi / h).astype(int) + 3
    return (i_lo[0] * h, i_lo[1] * h,
            int(i_hi[0] - i_lo[0]) + 1, int(i_hi[1] - i_lo[1]) + 1)


# ---------------------------------------------------------------------------
# gradient sampling
# ---------------------------------------------------------------------------

def radial_node_gradients(state: RadialState) -> np.ndarray:
    """f_r at every node: central in the interior, one-sided first order at the
    front, exactly 0 at the axis (symmetry)."""
    f = state.heights
    h = state.dr
    g = np.empty_like(f)
    g[0] = 0.0
    g[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    g[-1] = (f[-1] - f[-2]) / h
    return g


def sample_gradient(state: RadialState | PlanarState, point):
    """Spatial gradient estimate at a point of the closed domain.

    Radial states take a radius and return the scalar radial derivative;
    planar states take an (x, y) pair and return a length-2 array. Raises
    OutsideDomain beyond the front.
    """
    if isinstance(state, RadialState):
        return _sample_gradient_radial(state, float(point))
    return _sample_gradient_planar(state, np.asarray(point, dtype=float))


def _sample_gradient_radial(state: RadialState, r: float) -> float:
    R = state.front_radius
    if r < 0.0 or r > R * (1.0 + 1e-12):
        raise OutsideDomain(f"r = {r} outside [0, {R}]")
    h = state.dr
    g = radial_node_gradients(state)
    if r >= R - h:
        return float(g[-1])
    # linear interpolation of node gradients keeps O(h^2) off nodes
    return float(np.interp(r, state.r_nodes, g))


def _planar_node_gradients(state: PlanarState, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Node-wise (fx, fy): central where both neighbors are inside, one-sided
    toward the interior next to the front, 0 outside."""
    F = state.heights
    h = state.grid_spacing
    fx = np.zeros_like(F)
    fy = np.zeros_like(F)

    ins = mask
    for axis, out in ((0, fx), (1, fy)):
        plus = np.roll(ins, -1, axis=axis)
        minus = np.roll(ins, 1, axis=axis)
        fp = np.roll(F, -1, axis=axis)
        fm = np.roll(F, 1, axis=axis)
        central = ins & plus & minus
        fwd = ins & plus & ~minus
        bwd = ins & ~plus & minus
        lone = ins & ~plus & ~minus
        out[central] = (fp[central] - fm[central]) / (2.0 * h)
        out[fwd] = (fp[fwd] - F[fwd]) / h
        out[bwd] = (F[bwd] - fm[bwd]) / h
        # front on both sides: one-sided with the zero extension
        out[lone] = 0.0
    return fx, fy


def _sample_gradient_planar(state: PlanarState, pt: np.ndarray) -> np.ndarray:
    if geometry.signed_inner_distance(state.markers, pt) < -1e-12:
        raise OutsideDomain(f"point {pt} outside the marker polygon")
    mask = state.inside_mask()
    fx, fy = _planar_node_gradients(state, mask)
    h = state.grid_spacing
    gx = _bilinear(fx, state.origin, h, pt)
    gy = _bilinear(fy, state.origin, h, pt)
    return np.array([gx, gy])


def _bilinear(F: np.ndarray, origin: tuple[float, float], h: float, pt: np.ndarray) -> float:
    sx = (pt[0] - origin[0]) / h
    sy = (pt[1] - origin[1]) / h
    ix = min(max(int(np.floor(sx)), 0), F.shape[0] - 2)
    iy = min(max(int(np.floor(sy)), 0), F.shape[1] - 2)
    tx, ty = sx - ix, sy - iy
    return float((1 - tx) * ((1 - ty) * F[ix, iy] + ty * F[ix, iy + 1])
                 + tx * ((1 - ty) * F[ix + 1, iy] + ty * F[ix + 1, iy + 1]))


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def compute_diagnostics(state: RadialState | PlanarState) -> Diagnostics:
    """sup |Df|, Neumann residual at the front, concavity violation, front
    measure and max height; pure function of the state."""
    if isinstance(state, RadialState):
        return _radial_diagnostics(state)
    return _planar_diagnostics(state)


def _radial_diagnostics(state: RadialState) -> Diagnostics:
    f = state.heights
    h = state.dr
    g = radial_node_gradients(state)
    second = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / (h * h)
    return Diagnostics(
        sup_grad=float(np.abs(g).max()),
        neumann_residual=float(abs(abs(g[-1]) - 1.0)),
        concavity_violation=float(max(second.max(), 0.0)) if second.size else 0.0,
        front_measure=state.front_radius,
        max_height=state.max_height,
    )


def _planar_diagnostics(state: PlanarState) -> Diagnostics:
    mask = state.inside_mask()
    fx, fy = _planar_node_gradients(state, mask)
    sup_grad = float(np.hypot(fx, fy).max()) if mask.any() else 0.0
    res, excluded = _planar_neumann_residual(state)
    return Diagnostics(
        sup_grad=sup_grad,
        neumann_residual=res,
        concavity_violation=_planar_concavity_violation(state, mask),
        front_measure=geometry.perimeter(state.markers),
        max_height=state.max_height,
        area=geometry.area(state.markers),
        corner_markers_excluded=excluded,
    )


def _planar_concavity_violation(state: PlanarState, mask: np.ndarray) -> float:
    """Largest eigenvalue of the discrete Hessian, maximized over nodes whose
    full 3x3 stencil is interior."""
    F = state.heights
    h2 = state.grid_spacing ** 2
    core = mask.copy()
    for axis in (0, 1):
        core &= np.roll(mask, 1, axis=axis) & np.roll(mask, -1, axis=axis)
    core &= np.roll(np.roll(mask, 1, 0), 1, 1) & np.roll(np.roll(mask, 1, 0), -1, 1)
    core &= np.roll(np.roll(mask, -1, 0), 1, 1) & np.roll(np.roll(mask, -1, 0), -1, 1)
    core[[0, -1], :] = False
    core[:, [0, -1]] = False
    if not core.any():
        return 0.0
    fxx = (np.roll(F, -1, 0) - 2 * F + np.roll(F, 1, 0)) / h2
    fyy = (np.roll(F, -1, 1) - 2 * F + np.roll(F, 1, 1)) / h2
    fxy = (np.roll(np.roll(F, -1, 0), -1, 1) - np.roll(np.roll(F, -1, 0), 1, 1)
           - np.roll(np.roll(F, 1, 0), -1, 1) + np.roll(np.roll(F, 1, 0), 1, 1)) / (4 * h2)
    tr = fxx + fyy
    disc = np.sqrt(np.maximum((fxx - fyy) ** 2 + 4 * fxy ** 2, 0.0))
    lam_max = 0.5 * (tr + disc)
    return float(lam_max[core].max())


def _planar_neumann_residual(state: PlanarState) -> tuple[float, int]:
    """max |f_nu - 1| over markers, skipping corner markers (turn angle above
    CORNER_ANGLE); returns (residual, number excluded)."""
    from .planar import marker_front_derivatives  # local import to avoid a cycle

    markers = state.markers
    turn = geometry.turn_angles(markers)
    keep = turn < CORNER_ANGLE
    excluded = int((~keep).sum())
    residual = 0.0
    mask = state.inside_mask()
    for k in np.nonzero(keep)[0]:
        try:
            f_nu, _ = marker_front_derivatives(state, mask, int(k))
        except Exception:
            continue
        residual = max(residual, abs(f_nu - 1.0))
    return residual, excluded
