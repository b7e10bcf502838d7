"""Boundary-strip (hodograph) machinery.

Near the free boundary the non-degenerate gradient lets us invert the height
profile into a graph of position over height: radially, h(y) is the front-side
radius at height y in [0, d]. The inversion turns the moving boundary into the
fixed edge y = 0, where the combustion condition |Df| = 1 becomes the oblique
condition h_y(0) = -1 (planar: g_1 = (1 + sum g_i^2)^(1/2)). The transformed
evolution h_t = H(h, h_y, h_yy) then moves the front through its boundary
value h(0) = R.

Strip validity: h_y < 0 with |f_r| >= m/(2R) on the strip, strip width
d < min(r_in, m/2); both are recomputed from the current state, never assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .core import GeometryBounds, PParams, RadialState, radial_node_gradients
from .errors import GradientBoundViolated, NonMonotone, StripTooWide, WrongBranch
from .operators import flux, flux_derivative

__all__ = [
    "HodographStrip",
    "BoundaryChart",
    "StripCoefficients",
    "bounds_from_radial",
    "default_strip_width",
    "invert_profile",
    "radial_strip_rhs",
    "ghost_front_speed",
    "planar_strip_coefficients",
    "structural_form_bound",
]

#: strip slack in the non-degeneracy precondition |f_r| >= m/(2R) - tol
GRAD_SLACK = 5.0


@dataclass(frozen=True)
class HodographStrip:
    """Radial graph samples h(y_j), y_j uniform on [0, d], h(0) = R.

    h_y < 0 on the front-side branch; g1 = -h_y satisfies
    1 <= g1 <= 2 R_out / m on a valid strip.
    """

    d: float
    y: np.ndarray
    h: np.ndarray
    h_y: np.ndarray
    too_thin: bool = False  # d resolves fewer than 4 radial cells

    @property
    def g1(self) -> np.ndarray:
        return -self.h_y


@dataclass(frozen=True)
class BoundaryChart:
    """Orthonormal boundary frame: splitting x -> (x . normal, tangential)."""

    point: np.ndarray
    normal: np.ndarray     # inward unit normal
    tangents: np.ndarray   # (n-1, n) orthonormal tangent rows

    def __post_init__(self):
        frame = np.vstack((self.normal, self.tangents))
        gram = frame @ frame.T
        if not np.allclose(gram, np.eye(frame.shape[0]), atol=1e-10):
            raise ValueError("boundary frame is not orthonormal")

    def psi1(self, x: np.ndarray) -> float:
        return float((np.asarray(x) - self.point) @ self.normal)

    def psi_prime(self, x: np.ndarray) -> np.ndarray:
        return self.tangents @ (np.asarray(x) - self.point)


@dataclass(frozen=True)
class StripCoefficients:
    """Transformed-evolution coefficient matrix b^ij with its spectrum."""

    entries: np.ndarray
    lambda_min: float
    lambda_max: float


def bounds_from_radial(state: RadialState) -> GeometryBounds:
    """Inner ball B_{R/2}, outer ball B_R, floor m = f(R/2) (monotone profile)."""
    R = state.front_radius
    m = float(np.interp(0.5 * R, state.r_nodes, state.heights))
    return GeometryBounds(r_in=0.5 * R, R_out=R, m=m)


def default_strip_width(bounds: GeometryBounds) -> float:
    """Half of the strict bound min(r_in, m/2)."""
    return 0.5 * min(bounds.r_in, 0.5 * bounds.m)


def invert_profile(state: RadialState, bounds: GeometryBounds, d: float,
                   samples: int = 0) -> HodographStrip:
    """Invert f near the front into h(y), f(h(y)) = y, y in [0, d].

    Requires d < min(r_in, m/2) and |f_r| >= m/(2 R_out) - 5h on the strip
    (NonMonotone otherwise: the gradient degeneracy reached the front).
    """
    if d >= min(bounds.r_in, 0.5 * bounds.m):
        raise StripTooWide(
            f"d = {d} >= min(r_in, m/2) = {min(bounds.r_in, 0.5 * bounds.m)}")
    if d <= 0:
        raise ValueError(f"strip width must be positive, got {d}")

    f = state.heights
    r = state.r_nodes
    h_r = state.dr
    # strip nodes: everything with f <= d, plus one bracketing node
    k0 = int(np.searchsorted(f[::-1], d, side="left"))
    k0 = max(k0, 2)
    lo = state.grid_size - 1 - k0
    lo = max(lo, 0)
    g = radial_node_gradients(state)
    floor = bounds.m / (2.0 * bounds.R_out) - GRAD_SLACK * h_r
    strip_grad = g[max(lo, 1):]  # axis node has f_r = 0 by symmetry, not a strip node
    if np.any(-strip_grad < floor):
        worst = float((-strip_grad).min())
        raise NonMonotone(
            f"|f_r| = {worst:.3e} below m/(2R) - 5h = {floor:.3e} inside the strip")

    f_strip = f[lo:][::-1]          # increasing from 0 at the front
    r_strip = r[lo:][::-1]          # decreasing radius
    if np.any(np.diff(f_strip) <= 0):
        raise NonMonotone("profile not strictly monotone across the strip")

    if samples <= 0:
        samples = max(8, f_strip.size * 2)
    y = np.linspace(0.0, d, samples)
    interp = PchipInterpolator(f_strip, r_strip)
    h = interp(y)
    h_y = interp.derivative()(y)
    too_thin = d < 4.0 * h_r
    return HodographStrip(d=d, y=y, h=h, h_y=h_y, too_thin=too_thin)


def radial_strip_rhs(h: float, h_y: float, h_yy: float, params: PParams, n: int) -> float:
    """Time derivative of the radial graph h(y, t).

    Chain rule f_r = 1/h_y, f_rr = -h_yy/h_y^3, f_t = -h_t/h_y applied to the
    radial flux form gives

        h_t = phi'(1/h_y) h_yy / h_y^2  -  (n-1)/h * h_y * phi(1/h_y).

    At y = 0 this is the signed front velocity; for n = 1, eps = 0 it reduces
    to h_t = (p-1) h_yy / (-h_y)^p.
    """
    if h_y >= 0.0:
        raise WrongBranch(f"front-side branch needs h_y < 0, got {h_y}")
    if h <= 0.0:
        raise ValueError(f"graph value must be positive, got {h}")
    fr = 1.0 / h_y
    val = flux_derivative(fr, params) * h_yy / (h_y * h_y)
    if n > 1:
        val -= (n - 1.0) / h * h_y * flux(fr, params)
    return float(val)


def ghost_front_speed(state: RadialState, params: PParams, n: int) -> float:
    """Front velocity dR/dt: strip RHS at y = 0 with the oblique condition
    h_y(0) = -1 substituted.

    h_yy(0) comes from the one-node ghost formula at the exact strip sample
    y = f[N-2] (where h(y) = r[N-2] with no interpolation error):

        h_yy(0) ~= 2 (h(y) - h(0) + y) / y^2 = 2 (f[N-2] - dr) / f[N-2]^2.

    The gradient bound |Df| <= 1 makes the numerator non-positive, so the
    front never expands on compliant states.
    """
    f2 = float(state.heights[-2])
    if f2 <= 0.0:
        raise NonMonotone("vanishing height next to the front")
    h_yy = 2.0 * (f2 - state.dr) / (f2 * f2)
    return radial_strip_rhs(state.front_radius, -1.0, h_yy, params, n)


# ---------------------------------------------------------------------------
# transformed-evolution coefficients and the structural ellipticity bound
# ---------------------------------------------------------------------------

def planar_strip_coefficients(g1: float, g_tangential: np.ndarray, params: PParams) -> StripCoefficients:
    """Coefficient matrix b^ij of the transformed evolution g_t = b^ij g_ij.

    Assembled from the two quadratic forms

      M g_11 + g1^2 sum g_ii - 2 g1 sum g_i g_1i           (Laplacian part)
      M^2 g_11 - 2 g1 M sum g_i g_1i + g1^2 sum g_i g_j g_ij

    with prefactors (M+eps)^(q-1)/g1^(2q) and 2(q-1)(M+eps)^(q-2)/g1^(2q),
    M = 1 + |g'|^2; cross coefficients are split symmetrically (half each),
    which leaves the quadratic form unchanged.
    """
    gt = np.atleast_1d(np.asarray(g_tangential, dtype=float))
    M = 1.0 + float(gt @ gt)
    if g1 * g1 < M * (1.0 - 1e-12):
        raise GradientBoundViolated(f"g1^2 = {g1*g1:.6f} < M = {M:.6f}")
    n = gt.size + 1
    q = params.q
    eps = params.epsilon

    c1 = np.zeros((n, n))
    c1[0, 0] = M
    for i in range(1, n):
        c1[i, i] = g1 * g1
        c1[0, i] = c1[i, 0] = -g1 * gt[i - 1]

    c2 = np.zeros((n, n))
    c2[0, 0] = M * M
    for i in range(1, n):
        c2[0, i] = c2[i, 0] = -g1 * M * gt[i - 1]
        for j in range(1, n):
            c2[i, j] = g1 * g1 * gt[i - 1] * gt[j - 1]

    pref1 = (M + eps) ** (q - 1.0) / g1 ** (2.0 * q)
    pref2 = 2.0 * (q - 1.0) * (M + eps) ** (q - 2.0) / g1 ** (2.0 * q)
    b = pref1 * c1 + pref2 * c2
    eigs = np.linalg.eigvalsh(b)
    return StripCoefficients(entries=b, lambda_min=float(eigs[0]), lambda_max=float(eigs[-1]))


def structural_form_bound(g1: float, g_tangential: np.ndarray, xi: np.ndarray,
                          n: int) -> float:
    """Q(xi) = M xi_1^2 - 2 g1 sum g_i xi_1 xi_i + g1^2 sum_{i>=2} xi_i^2.

    For unit xi and g1^2 >= M = 1 + |g'|^2 this is bounded below by 1/(2n),
    which is what keeps the transformed evolution uniformly elliptic.
    """
    gt = np.atleast_1d(np.asarray(g_tangential, dtype=float))
    x = np.asarray(xi, dtype=float)
    if x.size != n or gt.size != n - 1:
        raise ValueError(f"need xi in R^{n} and g' in R^{n-1}")
    if abs(float(x @ x) - 1.0) > 1e-9:
        raise ValueError("xi must be a unit vector")
    M = 1.0 + float(gt @ gt)
    if g1 * g1 < M * (1.0 - 1e-12):
        raise GradientBoundViolated(f"g1^2 = {g1*g1:.6f} < M = {M:.6f}")
    xi1 = x[0]
    xit = x[1:]
    return float(M * xi1 * xi1 - 2.0 * g1 * xi1 * float(gt @ xit)
                 + g1 * g1 * float(xit @ xit))
