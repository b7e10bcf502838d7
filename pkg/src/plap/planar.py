"""Convex front-tracking solver on a fixed background grid (n = 2).

Interior heights advance with the conservative 5-point flux stencil (face
fluxes from the compact normal difference, tangential component averaged from
the two adjacent node gradients); nodes outside the marker polygon carry 0,
which closes the stencil with Dirichlet data one cell beyond the last interior
node. Markers move along angle-averaged inward normals with speed

    -(one-sided Dp_eps f) / (one-sided |Df|)
    Dp_eps f at the front = phi'(f_nu) f_nunu - kappa phi(f_nu)

(f_nu, f_nunu from two samples along the inward normal plus the marker's zero,
kappa the discrete polygon curvature). Convexity loss is a hard error: it
signals a scheme or resolution failure, never something to project away.

Every operation here is exactly equivariant under grid-aligned 90-degree
rotation, which the test suite checks bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .core import (
    PParams,
    PlanarState,
    Snapshot,
    Trajectory,
    build_initial_planar,
    compute_diagnostics,
)
from .errors import (
    CflViolation,
    ConvexityLost,
    DegenerateFront,
    FrontCollapsed,
    NegativeHeight,
    StencilFailure,
)
from .operators import flux_derivative

__all__ = [
    "PlanarRunConfig",
    "cfl_dt_planar",
    "marker_normal_velocity",
    "step_planar",
    "solve_planar",
]

CLAMP_TOL = 1e-12
#: non-degeneracy guard on the one-sided front gradient
FRONT_GRAD_GUARD = 0.5
#: deepest admissible sample depth, in grid cells
MAX_DEPTH_CELLS = 8.0


@dataclass(frozen=True)
class PlanarRunConfig:
    params: PParams
    initial_kind: str = "disk_cap"
    R0: float | None = 1.0
    vertices: np.ndarray | None = None
    grid_spacing: float = 1.0 / 64.0
    marker_count: int = 128
    dt_policy: str = "cfl"
    sigma: float = 0.4
    dt_fixed: float | None = None
    t_max: float = 10.0
    extinction_threshold: float = 1e-3
    snapshot_every: int = 100

    def __post_init__(self):
        if self.marker_count < 16:
            raise ValueError(f"marker_count must be >= 16, got {self.marker_count}")
        if self.dt_policy == "cfl" and not (0.0 < self.sigma <= 1.0):
            raise ValueError(f"sigma must lie in (0, 1], got {self.sigma}")
        if self.dt_policy == "fixed" and not (self.dt_fixed and self.dt_fixed > 0):
            raise ValueError("fixed dt policy needs dt_fixed > 0")

    def build_initial(self) -> PlanarState:
        return build_initial_planar(self.initial_kind, self.params, self.grid_spacing,
                                    R0=self.R0, vertices=self.vertices,
                                    marker_count=self.marker_count)


# ---------------------------------------------------------------------------
# grid update
# ---------------------------------------------------------------------------

def _face_fluxes(F: np.ndarray, h: float, params: PParams, axis: int) -> np.ndarray:
    """Flux through faces normal to ``axis``: compact normal difference plus
    the arithmetic mean of the two adjacent central tangential gradients."""
    other = 1 - axis
    dn = (np.roll(F, -1, axis) - F) / h                       # at i+1/2
    gt = (np.roll(F, -1, other) - np.roll(F, 1, other)) / (2.0 * h)
    gt_face = 0.5 * (gt + np.roll(gt, -1, axis))
    s2 = dn * dn + gt_face * gt_face
    return np.power(s2 + params.epsilon, params.q - 1.0) * dn


def _interior_tendency(F: np.ndarray, h: float, params: PParams) -> np.ndarray:
    fx = _face_fluxes(F, h, params, 0)
    fy = _face_fluxes(F, h, params, 1)
    return (fx - np.roll(fx, 1, 0)) / h + (fy - np.roll(fy, 1, 1)) / h


def cfl_dt_planar(state: PlanarState, params: PParams, sigma: float,
                  mask: np.ndarray | None = None) -> float:
    """Same budget as the radial rule: sigma h^2 / (2 n Lambda), n = 2."""
    if mask is None:
        mask = state.inside_mask()
    F = state.heights
    h = state.grid_spacing
    gx = (np.roll(F, -1, 0) - np.roll(F, 1, 0)) / (2.0 * h)
    gy = (np.roll(F, -1, 1) - np.roll(F, 1, 1)) / (2.0 * h)
    s2 = gx * gx + gy * gy
    lam = float(np.max(flux_derivative(np.sqrt(s2[mask]), params))) if mask.any() else 0.0
    if lam <= 0.0:
        return np.inf
    return sigma * h * h / (4.0 * lam)


# ---------------------------------------------------------------------------
# marker velocities
# ---------------------------------------------------------------------------

def _quad_weights(t: np.ndarray) -> np.ndarray:
    """Quadratic Lagrange weights on offsets {-1, 0, +1} at t in [-1/2, 1/2]."""
    return np.stack((0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)), axis=-1)


def _sample_quadratic(F: np.ndarray, origin, h: float, pts: np.ndarray,
                      mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Biquadratic samples of F at pts, plus a flag that the 3x3 window is
    fully interior. The tensor contraction is symmetrized (row-first plus
    column-first, halved) so the result is exact under 90-degree rotation."""
    sx = (pts[:, 0] - origin[0]) / h
    sy = (pts[:, 1] - origin[1]) / h
    ix = np.round(sx).astype(int)
    iy = np.round(sy).astype(int)
    nx, ny = F.shape
    ok = (ix >= 1) & (ix <= nx - 2) & (iy >= 1) & (iy <= ny - 2)
    ix = np.clip(ix, 1, nx - 2)
    iy = np.clip(iy, 1, ny - 2)
    wx = _quad_weights(sx - ix)
    wy = _quad_weights(sy - iy)
    off = np.array([-1, 0, 1])
    IX = ix[:, None, None] + off[None, :, None]
    IY = iy[:, None, None] + off[None, None, :]
    W = F[IX, IY]
    ok &= mask[IX, IY].all(axis=(1, 2))
    rows = np.einsum("mij,mj->mi", W, wy)
    val_rf = np.einsum("mi,mi->m", rows, wx)
    cols = np.einsum("mij,mi->mj", W, wx)
    val_cf = np.einsum("mj,mj->m", cols, wy)
    return 0.5 * (val_rf + val_cf), ok


def _marker_depths(points: np.ndarray, normals: np.ndarray, state: PlanarState,
                   mask: np.ndarray) -> np.ndarray:
    """Per-marker sample depth: smallest delta = k h/2 (k >= 3) such that the
    interpolation windows at depth delta and 2 delta are fully interior."""
    h = state.grid_spacing
    m = points.shape[0]
    delta = np.full(m, np.nan)
    active = np.arange(m)
    k = 3
    while active.size and k <= int(MAX_DEPTH_CELLS):  # deeper sample sits at k cells
        d = 0.5 * k * h
        p1 = points[active] + d * normals[active]
        p2 = points[active] + 2.0 * d * normals[active]
        _, ok1 = _sample_quadratic(state.heights, state.origin, h, p1, mask)
        _, ok2 = _sample_quadratic(state.heights, state.origin, h, p2, mask)
        good = ok1 & ok2
        delta[active[good]] = d
        active = active[~good]
        k += 1
    if active.size:
        raise StencilFailure(
            f"{active.size} markers have no fully interior window within "
            f"{MAX_DEPTH_CELLS} cells", time=state.time)
    return delta


def _marker_velocities(points: np.ndarray, normals: np.ndarray, kappa: np.ndarray,
                       state: PlanarState, mask: np.ndarray,
                       params: PParams) -> np.ndarray:
    delta = _marker_depths(points, normals, state, mask)
    h = state.grid_spacing
    f1, _ = _sample_quadratic(state.heights, state.origin, h,
                              points + delta[:, None] * normals, mask)
    f2, _ = _sample_quadratic(state.heights, state.origin, h,
                              points + 2.0 * delta[:, None] * normals, mask)
    f_nu = (4.0 * f1 - f2) / (2.0 * delta)
    f_nunu = (f2 - 2.0 * f1) / (delta * delta)
    if np.any(f_nu < FRONT_GRAD_GUARD):
        k = int(np.argmin(f_nu))
        raise DegenerateFront(
            f"one-sided |Df| = {f_nu[k]:.3f} < {FRONT_GRAD_GUARD} at marker {k}",
            time=state.time)
    s2 = f_nu * f_nu
    phi_p = flux_derivative(f_nu, params)
    phi = np.power(s2 + params.epsilon, params.q - 1.0) * f_nu
    dp = phi_p * f_nunu - kappa * phi
    return -dp / f_nu


def marker_front_derivatives(state: PlanarState, mask: np.ndarray,
                             index: int) -> tuple[float, float]:
    """One-sided (f_nu, f_nunu) at a stored marker; used by diagnostics."""
    normals = geometry.inward_normals(state.markers)
    pts = state.markers[index:index + 1]
    nrm = normals[index:index + 1]
    delta = _marker_depths(pts, nrm, state, mask)
    h = state.grid_spacing
    f1, _ = _sample_quadratic(state.heights, state.origin, h, pts + delta[:, None] * nrm, mask)
    f2, _ = _sample_quadratic(state.heights, state.origin, h, pts + 2 * delta[:, None] * nrm, mask)
    f_nu = float((4.0 * f1[0] - f2[0]) / (2.0 * delta[0]))
    f_nunu = float((f2[0] - 2.0 * f1[0]) / (delta[0] * delta[0]))
    return f_nu, f_nunu


def marker_normal_velocity(state: PlanarState, marker_index: int,
                           params: PParams) -> float:
    """Inward normal speed of one stored marker."""
    mask = state.inside_mask()
    normals = geometry.inward_normals(state.markers)
    kappa = geometry.vertex_curvature(state.markers)
    i = marker_index
    v = _marker_velocities(state.markers[i:i + 1], normals[i:i + 1],
                           kappa[i:i + 1], state, mask, params)
    return float(v[0])


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def step_planar(state: PlanarState, dt: float, params: PParams,
                marker_count: int = 128) -> PlanarState:
    """One front-tracking step: resample the stored polygon to marker_count
    working points, advance interior heights and markers, prune collinear
    vertices, zero the nodes the front passed."""
    mask = state.inside_mask()
    if dt > cfl_dt_planar(state, params, 1.0, mask) * (1.0 + 1e-9):
        raise CflViolation(
            f"dt = {dt:.3e} exceeds the stability budget", time=state.time)

    working = geometry.resample_arclength(state.markers, marker_count)
    normals = geometry.inward_normals(working)
    kappa = geometry.vertex_curvature(working)
    speed = _marker_velocities(working, normals, kappa, state, mask, params)

    F = state.heights
    h = state.grid_spacing
    tendency = _interior_tendency(F, h, params)
    F_new = np.where(mask, F + dt * tendency, 0.0)

    moved = working + (dt * speed)[:, None] * normals
    nc = geometry.normalized_crosses(moved)
    if np.any(nc < -geometry.COLLINEAR_TOL):
        k = int(np.argmin(nc))
        raise ConvexityLost(
            f"negative cross product at vertex {k}", vertex=k, time=state.time)
    markers_new = geometry.prune_collinear(moved)

    if geometry.inradius(markers_new) < 2.0 * h:
        raise FrontCollapsed("polygon thinner than two grid cells",
                             time=state.time)

    new_state = PlanarState(time=state.time + dt, markers=markers_new,
                            heights=F_new, origin=state.origin, grid_spacing=h)
    mask_new = new_state.inside_mask()
    F_final = np.where(mask_new, F_new, 0.0)

    worst = float(F_final.min())
    if worst < -CLAMP_TOL:
        raise NegativeHeight(f"height {worst:.3e} below the clamp tolerance",
                             time=state.time)
    F_final = np.maximum(F_final, 0.0)
    return PlanarState(time=state.time + dt, markers=markers_new,
                       heights=F_final, origin=state.origin, grid_spacing=h)


@dataclass
class _StepRecords:
    times: list = field(default_factory=list)
    max_height: list = field(default_factory=list)
    max_increase: list = field(default_factory=list)
    area: list = field(default_factory=list)
    perimeter: list = field(default_factory=list)

    def as_arrays(self) -> dict[str, np.ndarray]:
        return {k: np.asarray(v) for k, v in self.__dict__.items()}


def solve_planar(config: PlanarRunConfig) -> Trajectory:
    """Step until max height <= extinction_threshold or t >= t_max; records
    polygon area and perimeter along the way."""
    params = config.params
    traj = Trajectory(params=params, kind="planar")
    if config.t_max <= 0.0:
        return traj

    state = config.build_initial()
    traj.snapshots.append(Snapshot(state.time, state, compute_diagnostics(state)))
    rec = _StepRecords()
    k = 0
    try:
        while state.time < config.t_max:
            if config.dt_policy == "cfl":
                dt = cfl_dt_planar(state, params, config.sigma)
            else:
                dt = config.dt_fixed
            dt = min(dt, config.t_max - state.time)
            new = step_planar(state, dt, params, marker_count=config.marker_count)

            rec.times.append(new.time)
            rec.max_height.append(new.max_height)
            rec.max_increase.append(float((new.heights - state.heights).max()))
            rec.area.append(geometry.area(new.markers))
            rec.perimeter.append(geometry.perimeter(new.markers))

            state = new
            k += 1
            if k % config.snapshot_every == 0:
                traj.snapshots.append(
                    Snapshot(state.time, state, compute_diagnostics(state)))
            if state.max_height <= config.extinction_threshold:
                traj.status = "Extinct"
                break
        else:
            traj.status = "TimeCapReached"
    except Exception as exc:
        if hasattr(exc, "time") and exc.time is None:
            exc.time = state.time
        traj.status = "Failed"
        traj.error = f"{type(exc).__name__}: {exc}"
        traj.step_records = rec.as_arrays()
        raise

    if not traj.snapshots or traj.snapshots[-1].time != state.time:
        traj.snapshots.append(Snapshot(state.time, state, compute_diagnostics(state)))
    traj.step_records = rec.as_arrays()
    return traj
