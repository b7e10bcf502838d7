"""Time integration of the radially symmetric regularized problem.

The profile lives on the front-fixed grid y = r/R(t) (the free boundary is
always the last node), so one step advances

    F_t(y) = div-form RHS at r = y R  +  y Rdot f_r      (grid-motion term)

with the conservative flux stencil, the radial metric term (n-1)/r * flux, the
symmetry condition f_r(0) = 0 at the axis (limit value 2 n flux_{1/2} / h),
and the front moved by the boundary-strip RHS at y = 0 with the oblique
condition substituted. Dirichlet f = 0 holds by construction at the front;
the Neumann defect | |f_r| - 1 | is recorded, never enforced on the stencil.

Explicit stepping under dt <= sigma h^2/(2 n Lambda) is the baseline; a
semi-implicit mode (flux coefficients frozen at the old step, tridiagonal
solve) is available through RadialRunConfig.scheme for stiff settings.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_banded

from .core import (
    PParams,
    RadialState,
    Snapshot,
    Trajectory,
    build_initial_radial,
    compute_diagnostics,
)
from .errors import CflViolation, FrontCollapsed, NegativeHeight
from .hodograph import GRAD_SLACK, ghost_front_speed
from .operators import flux, flux_derivative

__all__ = [
    "RadialRunConfig",
    "cfl_dt",
    "step_radial",
    "solve_radial",
    "extinction_time",
]

CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class RadialRunConfig:
    params: PParams
    initial_kind: str = "parabolic_cap"
    R0: float = 1.0
    N: int = 201
    table: np.ndarray | None = None
    dt_policy: str = "cfl"          # "cfl" | "fixed"
    sigma: float = 0.4
    dt_fixed: float | None = None
    t_max: float = 10.0
    extinction_threshold: float = 1e-3
    snapshot_every: int = 100
    scheme: str = "explicit"        # "explicit" | "semi_implicit"

    def __post_init__(self):
        if self.dt_policy == "cfl" and not (0.0 < self.sigma <= 1.0):
            raise ValueError(f"sigma must lie in (0, 1], got {self.sigma}")
        if self.dt_policy == "fixed" and not (self.dt_fixed and self.dt_fixed > 0):
            raise ValueError("fixed dt policy needs dt_fixed > 0")
        if self.extinction_threshold <= 0:
            raise ValueError("extinction_threshold must be positive")

    def build_initial(self) -> RadialState:
        return build_initial_radial(self.initial_kind, self.R0, self.params,
                                    self.N, table=self.table)


@lru_cache(maxsize=32)
def _y_grid(N: int) -> np.ndarray:
    y = np.linspace(0.0, 1.0, N)
    y.setflags(write=False)
    return y


def _node_gradients(f: np.ndarray, h: float) -> np.ndarray:
    g = np.empty_like(f)
    g[0] = 0.0
    g[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    g[-1] = (f[-1] - f[-2]) / h
    return g


def cfl_dt(state: RadialState, params: PParams, sigma: float) -> float:
    """Explicit stability budget dt = sigma h^2 / (2 n Lambda), Lambda the
    largest coefficient-matrix eigenvalue (s+eps)^(q-2)((p-1)s+eps) over nodes."""
    g = _node_gradients(state.heights, state.dr)
    lam = float(np.max(flux_derivative(g, params)))
    h = state.dr
    if lam <= 0.0:
        return np.inf
    return sigma * h * h / (2.0 * params.n * lam)


def _explicit_rhs(state: RadialState, params: PParams) -> tuple[np.ndarray, float]:
    """(height tendency on the mapped grid, front velocity)."""
    f = state.heights
    R = state.front_radius
    N = state.grid_size
    h = R / (N - 1)
    n = params.n
    y = state.y_nodes

    v = ghost_front_speed(state, params, n)

    df = np.diff(f) / h
    phi_half = flux(df, params)

    rhs = np.empty(N)
    rhs[0] = 2.0 * n * phi_half[0] / h
    interior = (phi_half[1:] - phi_half[:-1]) / h
    g_c = (f[2:] - f[:-2]) / (2.0 * h)
    if n > 1:
        r = y * R
        interior = interior + (n - 1.0) / r[1:-1] * flux(g_c, params)
    # grid-motion term: nodes ride with y = r/R(t)
    rhs[1:-1] = interior + y[1:-1] * v * g_c
    rhs[-1] = 0.0
    return rhs, v


def step_radial(state: RadialState, dt: float, params: PParams,
                scheme: str = "explicit") -> RadialState:
    """Advance one step of size dt; raises CflViolation in explicit mode when
    dt exceeds the sigma = 1 stability budget."""
    if scheme == "explicit" and dt > cfl_dt(state, params, 1.0) * (1.0 + 1e-9):
        raise CflViolation(
            f"dt = {dt:.3e} exceeds the stability budget "
            f"{cfl_dt(state, params, 1.0):.3e}", time=state.time)

    if scheme == "semi_implicit":
        f_new, v = _semi_implicit_update(state, dt, params)
    else:
        rhs, v = _explicit_rhs(state, params)
        f_new = state.heights + dt * rhs

    R_new = state.front_radius + dt * v
    if R_new <= 0.0:
        raise FrontCollapsed(f"front radius {R_new:.3e} <= 0", time=state.time)

    f_new[-1] = 0.0
    worst = float(f_new.min())
    if worst < -CLAMP_TOL:
        k = int(np.argmin(f_new))
        raise NegativeHeight(
            f"height {worst:.3e} at node {k} below the clamp tolerance",
            time=state.time)
    f_new = np.maximum(f_new, 0.0)
    return RadialState(time=state.time + dt, front_radius=R_new, heights=f_new)


def _semi_implicit_update(state: RadialState, dt: float, params: PParams):
    """Backward-Euler flux term with the secant coefficient frozen at the old
    step; metric and grid-motion terms stay explicit."""
    f = state.heights
    R = state.front_radius
    N = state.grid_size
    h = R / (N - 1)
    n = params.n
    y = state.y_nodes

    v = ghost_front_speed(state, params, n)
    df = np.diff(f) / h
    D = np.power(df * df + params.epsilon, params.q - 1.0)  # secant coefficient

    g_c = (f[2:] - f[:-2]) / (2.0 * h)
    explicit = np.zeros(N)
    if n > 1:
        r = y * R
        explicit[1:-1] += (n - 1.0) / r[1:-1] * flux(g_c, params)
    explicit[1:-1] += y[1:-1] * v * g_c

    mu = dt / (h * h)
    ab = np.zeros((3, N))
    rhs = f + dt * explicit
    # axis row: f0 - dt * 2n D_{1/2} (f1 - f0)/h^2 = f0
    ab[1, 0] = 1.0 + 2.0 * n * mu * D[0]
    ab[0, 1] = -2.0 * n * mu * D[0]
    # interior rows
    ab[1, 1:-1] = 1.0 + mu * (D[1:] + D[:-1])
    ab[0, 2:] = -mu * D[1:]
    ab[2, 0:-2] = -mu * D[:-1]
    # front row pinned to zero
    ab[1, -1] = 1.0
    ab[0, -1] = 0.0
    ab[2, -2] = 0.0
    rhs[-1] = 0.0
    f_new = solve_banded((1, 1), ab, rhs)
    return f_new, v


@dataclass
class _StepRecords:
    times: list = field(default_factory=list)
    front_radius: list = field(default_factory=list)
    max_height: list = field(default_factory=list)
    max_increase: list = field(default_factory=list)
    neumann_residual: list = field(default_factory=list)
    strip_margin: list = field(default_factory=list)

    def as_arrays(self) -> dict[str, np.ndarray]:
        return {k: np.asarray(v) for k, v in self.__dict__.items()}


def _strip_margin_arrays(f: np.ndarray, g: np.ndarray, R: float, h: float) -> float:
    """min over strip nodes of |f_r| - (m/(2R) - 5h); negative = violated.

    m is f at r = R/2 (the mid node for odd N) and d = min(R/2, m/2)/2; the
    strip nodes are the monotone tail with f <= d.
    """
    N = f.size
    mid = (N - 1) // 2
    if (N - 1) % 2 == 0:
        m = f[mid]
    else:
        m = 0.5 * (f[mid] + f[mid + 1])
    d = 0.5 * min(0.5 * R, 0.5 * m)
    # f decreases with r: strip nodes are the last k nodes
    k = int(np.searchsorted(f[::-1], d, side="right"))
    k = min(max(k, 2), N - 1)
    floor = m / (2.0 * R) - GRAD_SLACK * h
    return float(np.min(np.abs(g[-k:])) - floor)


def solve_radial(config: RadialRunConfig) -> Trajectory:
    """Step until max height <= extinction_threshold or t >= t_max."""
    params = config.params
    n = params.n
    traj = Trajectory(params=params, kind="radial")
    if config.t_max <= 0.0:
        traj.status = "TimeCapReached"
        return traj

    state = config.build_initial()
    traj.snapshots.append(Snapshot(state.time, state, compute_diagnostics(state)))
    rec = _StepRecords()

    f = state.heights.copy()
    R = state.front_radius
    t = 0.0
    N = f.size
    y = _y_grid(N)
    y_int = y[1:-1]
    fixed_dt = config.dt_fixed if config.dt_policy == "fixed" else None
    explicit = config.scheme == "explicit"
    k = 0
    # front-law constants: flux slope and flux magnitude at unit gradient
    dphi1 = (1.0 + params.epsilon) ** (params.q - 2.0) * (params.p - 1.0 + params.epsilon)
    phi1 = (1.0 + params.epsilon) ** (params.q - 1.0)

    def snap_state() -> RadialState:
        return RadialState(time=t, front_radius=R, heights=f)

    try:
        while t < config.t_max:
            h = R / (N - 1)
            g = _node_gradients(f, h)
            if fixed_dt is None:
                lam = float(np.max(flux_derivative(g, params)))
                dt = np.inf if lam <= 0 else config.sigma * h * h / (2.0 * n * lam)
            else:
                dt = fixed_dt
            dt = min(dt, config.t_max - t)

            f2 = f[-2]
            if f2 <= 0.0:
                raise NegativeHeight("vanishing height next to the front", time=t)
            h_yy = 2.0 * (f2 - h) / (f2 * f2)
            # strip RHS at y = 0 with the oblique condition h_y = -1 substituted
            v = dphi1 * h_yy - (n - 1.0) / R * phi1 if n > 1 else dphi1 * h_yy

            if explicit:
                df = np.diff(f) / h
                phi_half = flux(df, params)
                rhs = np.empty(N)
                rhs[0] = 2.0 * n * phi_half[0] / h
                interior = (phi_half[1:] - phi_half[:-1]) / h
                g_c = g[1:-1]
                if n > 1:
                    interior = interior + (n - 1.0) / (y_int * R) * flux(g_c, params)
                rhs[1:-1] = interior + y_int * v * g_c
                rhs[-1] = 0.0
                f_new = f + dt * rhs
            else:
                f_new, v = _semi_implicit_update(snap_state(), dt, params)

            R_new = R + dt * v
            if R_new <= 0.0:
                raise FrontCollapsed(f"front radius {R_new:.3e} <= 0", time=t)
            f_new[-1] = 0.0
            worst = float(f_new.min())
            if worst < -CLAMP_TOL:
                raise NegativeHeight(
                    f"height {worst:.3e} below the clamp tolerance", time=t)
            np.maximum(f_new, 0.0, out=f_new)

            h_new = R_new / (N - 1)
            rec.times.append(t + dt)
            rec.front_radius.append(R_new)
            rec.max_height.append(float(f_new.max()))
            rec.max_increase.append(float((f_new - f).max()))
            rec.neumann_residual.append(abs(f_new[-2] / h_new - 1.0))
            g_new = _node_gradients(f_new, h_new)
            rec.strip_margin.append(_strip_margin_arrays(f_new, g_new, R_new, h_new))

            f, R, t = f_new, R_new, t + dt
            k += 1
            if k % config.snapshot_every == 0:
                st = snap_state()
                traj.snapshots.append(Snapshot(t, st, compute_diagnostics(st)))
            if rec.max_height[-1] <= config.extinction_threshold:
                traj.status = "Extinct"
                break
        else:
            traj.status = "TimeCapReached"
    except Exception as exc:
        if hasattr(exc, "time") and exc.time is None:
            exc.time = t
        traj.status = "Failed"
        traj.error = f"{type(exc).__name__}: {exc}"
        traj.step_records = rec.as_arrays()
        raise

    if not traj.snapshots or traj.snapshots[-1].time != t:
        st = snap_state()
        traj.snapshots.append(Snapshot(t, st, compute_diagnostics(st)))
    traj.step_records = rec.as_arrays()
    return traj


def extinction_time(trajectory: Trajectory, threshold: float) -> float | None:
    """First time the max height crosses the threshold, linearly interpolated
    between the bracketing snapshots; None if never reached."""
    if not trajectory.snapshots:
        raise ValueError("empty trajectory")
    times = trajectory.times
    heights = trajectory.max_heights()
    below = np.nonzero(heights <= threshold)[0]
    if below.size == 0:
        return None
    k = int(below[0])
    if k == 0:
        return float(times[0])
    t0, t1 = times[k - 1], times[k]
    h0, h1 = heights[k - 1], heights[k]
    return float(t0 + (h0 - threshold) / (h0 - h1) * (t1 - t0))
