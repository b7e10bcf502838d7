"""Pointwise regularized p-Laplacian forms and the weak-form residual.

Three equivalent faces of the same operator:

  flux form        div((|Df|^2 + eps)^(q-1) Df)
  coefficient form a^ij f_ij with a = alpha*I + beta*(Df x Df)
  direction form   |Df|^(p-2) (Lap f + (p-2) f_nunu)   (eps = 0 only)

with alpha = (s+eps)^(q-1), beta = 2(q-1)(s+eps)^(q-2), s = |Df|^2. The
divergence-form finite-difference evaluation serves as the independent oracle
for the coefficient form on smooth fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .core import PParams, RadialState, Trajectory
from .errors import DegeneratePoint, IncompleteStencil, SupportViolation

__all__ = [
    "CoefficientMatrix",
    "TestFunction",
    "flux",
    "flux_derivative",
    "coefficient_matrix",
    "p_laplacian_nondiv",
    "p_laplacian_direction_form",
    "p_laplacian_div_fd",
    "p_laplacian_div_grid",
    "radial_p_laplacian_profile",
    "weak_residual",
]


def flux(s_grad: np.ndarray | float, params: PParams):
    """Scalar flux  phi(s) = (s^2 + eps)^(q-1) s  applied componentwise to a
    signed gradient magnitude (1D) or along a fixed direction."""
    s2 = np.square(s_grad)
    return np.power(s2 + params.epsilon, params.q - 1.0) * s_grad


def flux_derivative(s_grad: np.ndarray | float, params: PParams):
    """phi'(s) = (s^2+eps)^(q-2) ((p-1) s^2 + eps), the 1D diffusion
    coefficient; equals the largest eigenvalue of the coefficient matrix."""
    s2 = np.square(s_grad)
    return np.power(s2 + params.epsilon, params.q - 2.0) * ((params.p - 1.0) * s2 + params.epsilon)


@dataclass(frozen=True)
class CoefficientMatrix:
    """Symmetric diffusion matrix a^ij = alpha*I + beta*(g x g)."""

    entries: np.ndarray
    alpha: float
    beta: float

    @property
    def eigen_tangent(self) -> float:
        """Eigenvalue orthogonal to the gradient (multiplicity n-1)."""
        return self.alpha

    def eigen_normal(self, grad_sq: float, params: PParams) -> float:
        """Eigenvalue along the gradient: (s+eps)^(q-2)((p-1)s + eps)."""
        return float((grad_sq + params.epsilon) ** (params.q - 2.0)
                     * ((params.p - 1.0) * grad_sq + params.epsilon))


def _check_degenerate(grad_sq: float, params: PParams) -> None:
    if params.epsilon == 0.0 and grad_sq == 0.0:
        raise DegeneratePoint(
            "eps = 0 with Df = 0: the operator is undefined pointwise here; "
            "callers must choose a policy")


def coefficient_matrix(grad: np.ndarray, params: PParams) -> CoefficientMatrix:
    """a^ij(Df) = (|Df|^2+eps)^(q-1) I + 2(q-1)(|Df|^2+eps)^(q-2) Df x Df."""
    g = np.asarray(grad, dtype=float)
    s = float(g @ g)
    _check_degenerate(s, params)
    alpha = (s + params.epsilon) ** (params.q - 1.0)
    beta = 2.0 * (params.q - 1.0) * (s + params.epsilon) ** (params.q - 2.0)
    a = alpha * np.eye(g.size) + beta * np.outer(g, g)
    return CoefficientMatrix(entries=a, alpha=float(alpha), beta=float(beta))


def p_laplacian_nondiv(grad: np.ndarray, hessian: np.ndarray, params: PParams) -> float:
    """trace(a^ij f_ij) for the coefficient matrix at this gradient."""
    g = np.asarray(grad, dtype=float)
    H = np.asarray(hessian, dtype=float)
    s = float(g @ g)
    _check_degenerate(s, params)
    alpha = (s + params.epsilon) ** (params.q - 1.0)
    beta = 2.0 * (params.q - 1.0) * (s + params.epsilon) ** (params.q - 2.0)
    return float(alpha * np.trace(H) + beta * (g @ H @ g))


def p_laplacian_direction_form(grad: np.ndarray, hessian: np.ndarray, params: PParams) -> float:
    """|Df|^(p-2) (Lap f + (p-2) f_nunu) with nu = Df/|Df|; the eps = 0
    operator written along the gradient direction."""
    if params.epsilon != 0.0:
        raise ValueError("direction form is the eps = 0 operator")
    g = np.asarray(grad, dtype=float)
    H = np.asarray(hessian, dtype=float)
    s = float(g @ g)
    _check_degenerate(s, params)
    f_nunu = float(g @ H @ g) / s
    return float(s ** (params.q - 1.0) * (np.trace(H) + (params.p - 2.0) * f_nunu))


# ---------------------------------------------------------------------------
# divergence-form finite differences (the oracle discretization)
# ---------------------------------------------------------------------------

def _node_gradients(F: np.ndarray, h: float) -> list[np.ndarray]:
    """Central-difference gradient components on the full grid (edges wrong,
    callers stay 2 cells inside)."""
    comps = []
    for axis in range(F.ndim):
        comps.append((np.roll(F, -1, axis) - np.roll(F, 1, axis)) / (2.0 * h))
    return comps


def p_laplacian_div_grid(F: np.ndarray, h: float, params: PParams) -> np.ndarray:
    """Conservative evaluation of div((|DF|^2+eps)^(q-1) DF) on a uniform grid.

    Half-node gradients are the arithmetic mean of the two adjacent central
    node gradients, so each output value needs a 2-cell margin; the margin of
    the returned array is NaN.
    """
    grads = _node_gradients(F, h)
    out = np.zeros_like(F)
    for axis in range(F.ndim):
        half = [0.5 * (g + np.roll(g, -1, axis)) for g in grads]  # at i+1/2
        s2 = sum(np.square(g) for g in half)
        coeff = np.power(s2 + params.epsilon, params.q - 1.0)
        flux_ax = coeff * half[axis]
        out += (flux_ax - np.roll(flux_ax, 1, axis)) / h
    margin = np.zeros(F.shape, dtype=bool)
    for axis in range(F.ndim):
        idx = [slice(None)] * F.ndim
        idx[axis] = slice(0, 2)
        margin[tuple(idx)] = True
        idx[axis] = slice(-2, None)
        margin[tuple(idx)] = True
    out[margin] = np.nan
    return out


def p_laplacian_div_fd(stencil: np.ndarray, h: float, params: PParams) -> float:
    """Divergence-form value at the center of a local (5,)/(5,5)/... window."""
    F = np.asarray(stencil, dtype=float)
    if any(s < 5 or s % 2 == 0 for s in F.shape):
        raise IncompleteStencil(
            f"need an odd window of at least 5 per axis, got {F.shape}")
    vals = p_laplacian_div_grid(F, h, params)
    center = tuple(s // 2 for s in F.shape)
    return float(vals[center])


def radial_p_laplacian_profile(r: np.ndarray, f: np.ndarray, params: PParams,
                               n: int) -> np.ndarray:
    """Radial divergence form (1/r^(n-1)) d_r(r^(n-1) phi(f_r)) on interior
    nodes of a uniform radial grid, split as flux divergence + metric term.

    Returns values at nodes 1..N-2; node 0 uses the axis limit 2n*phi_{1/2}/h.
    The first entry of the returned array is the axis value.
    """
    h = float(r[1] - r[0])
    df = np.diff(f) / h
    phi_half = flux(df, params)
    out = np.empty(f.size - 1)
    out[0] = 2.0 * n * phi_half[0] / h
    interior = (phi_half[1:] - phi_half[:-1]) / h
    if n > 1:
        g_c = (f[2:] - f[:-2]) / (2.0 * h)
        interior = interior + (n - 1.0) / r[1:-1] * flux(g_c, params)
    out[1:] = interior
    return out


# ---------------------------------------------------------------------------
# weak-form residual
# ---------------------------------------------------------------------------

def _bump(u: np.ndarray) -> np.ndarray:
    """Smooth compactly supported bump, 1 at u = 0, 0 for |u| >= 1."""
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ui * ui))
    return out


def _bump_derivative(u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    w = 1.0 - ui * ui
    out[inside] = np.exp(1.0 - 1.0 / w) * (-2.0 * ui / (w * w))
    return out


@dataclass(frozen=True)
class TestFunction:
    """Closed-form annular bump theta(r, t) = B((r-center)/radius) * w(t).

    ``time_window = None`` means w = 1; otherwise w is the same bump mapped to
    (t_a, t_b). Support must stay strictly inside the moving domain over the
    evaluation window.
    """

    center: float
    radius: float
    time_window: tuple[float, float] | None = None

    def value(self, r: np.ndarray, t: float) -> np.ndarray:
        return _bump((r - self.center) / self.radius) * self._w(t)

    def gradient(self, r: np.ndarray, t: float) -> np.ndarray:
        return _bump_derivative((r - self.center) / self.radius) / self.radius * self._w(t)

    def time_derivative(self, r: np.ndarray, t: float) -> np.ndarray:
        return _bump((r - self.center) / self.radius) * self._wdot(t)

    def _w(self, t: float) -> float:
        if self.time_window is None:
            return 1.0
        a, b = self.time_window
        u = np.array([(2.0 * t - (a + b)) / (b - a)])
        return float(_bump(u)[0])

    def _wdot(self, t: float) -> float:
        if self.time_window is None:
            return 0.0
        a, b = self.time_window
        u = np.array([(2.0 * t - (a + b)) / (b - a)])
        return float(_bump_derivative(u)[0] * 2.0 / (b - a))


def weak_residual(trajectory: Trajectory, theta: TestFunction,
                  t1: float, t2: float, quad_points: int = 801) -> float:
    """Absolute defect of the weak identity over [t1, t2].

    | int f theta_t - [int f theta]_{t1}^{t2} - int phi(f_r) theta_r |

    with the trajectory's own regularized flux, trapezoid quadrature in space
    (weight r^(n-1)) and in time over the snapshots inside the window. t1 and
    t2 snap to the nearest snapshot times.
    """
    snaps = trajectory.snapshots
    if not snaps:
        raise ValueError("empty trajectory")
    times = trajectory.times
    i1 = int(np.argmin(np.abs(times - t1)))
    i2 = int(np.argmin(np.abs(times - t2)))
    if i2 <= i1:
        raise ValueError(f"window [{t1}, {t2}] does not span two snapshots")
    window = snaps[i1:i2 + 1]

    lo = theta.center - theta.radius
    hi = theta.center + theta.radius
    if lo <= 0.0:
        raise SupportViolation("support reaches the axis")
    for s in window:
        if hi >= s.state.front_radius:
            raise SupportViolation(
                f"support [{lo}, {hi}] crosses the front R = {s.state.front_radius} "
                f"at t = {s.time}")

    params = trajectory.params
    n = params.n
    rq = np.linspace(lo, hi, quad_points)
    wq = np.full(quad_points, rq[1] - rq[0])
    wq[[0, -1]] *= 0.5
    wq = wq * rq ** (n - 1)

    def layers(s):
        st: RadialState = s.state
        interp = PchipInterpolator(st.r_nodes, st.heights)
        fvals = interp(rq)
        fr = interp.derivative()(rq)
        t = s.time
        lhs_bulk = float(np.sum(fvals * theta.time_derivative(rq, t) * wq))
        rhs_bulk = float(np.sum(flux(fr, params) * theta.gradient(rq, t) * wq))
        boundary = float(np.sum(fvals * theta.value(rq, t) * wq))
        return lhs_bulk, rhs_bulk, boundary

    tw = np.array([s.time for s in window])
    dt_w = np.empty_like(tw)
    dt_w[0] = 0.5 * (tw[1] - tw[0])
    dt_w[-1] = 0.5 * (tw[-1] - tw[-2])
    if tw.size > 2:
        dt_w[1:-1] = 0.5 * (tw[2:] - tw[:-2])

    lhs = rhs = 0.0
    boundaries = []
    for k, s in enumerate(window):
        lb, rb, bd = layers(s)
        lhs += dt_w[k] * lb
        rhs += dt_w[k] * rb
        boundaries.append(bd)
    lhs -= boundaries[-1] - boundaries[0]
    return abs(lhs - rhs)
