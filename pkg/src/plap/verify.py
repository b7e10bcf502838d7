"""Lemma-level verification harness.

Each operation runs paired, scaled or ordered simulations and reduces them to
a pass/fail report: comparison (ordered data stay ordered and nested, the gap
never shrinks), scaling equivariance in the two scaling modes, ordering and
Cauchy convergence of the regularization family, the subsolution extinction
bound T <= max f0 / |c|, and per-run invariant audits (gradient bound, decay,
shrinkage, concavity, front non-degeneracy).

Profiles from different grids are compared through monotone cubic (PCHIP)
interpolation in space and linear interpolation in time, so the comparison
itself cannot manufacture ordering violations. All reports are pure functions
of their input trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import geometry
from .core import (
    PParams,
    PlanarState,
    RadialState,
    Trajectory,
    concavity_tolerance,
)
from .errors import InitialNestingViolated, NotStrictlyNegative
from .hodograph import GRAD_SLACK, bounds_from_radial, default_strip_width
from .operators import radial_p_laplacian_profile
from .radial import RadialRunConfig, extinction_time, solve_radial

__all__ = [
    "SubsolutionCertificate",
    "ScalingSpec",
    "certify_subsolution",
    "comparison_pair",
    "scaling_test",
    "eps_monotonicity",
    "extinction_bound",
    "invariant_report",
    "ComparisonReport",
    "ScalingReport",
    "EpsMonotonicityReport",
    "ExtinctionReport",
    "InvariantReport",
]


# ---------------------------------------------------------------------------
# subsolution certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubsolutionCertificate:
    """Strictly negative grid supremum c of the operator on the initial data,
    padded with a Richardson error estimate, and the bound max f0 / |c|."""

    c: float
    bound: float
    pad: float
    exclusion_radius: float
    excluded_nodes: int

    def as_dict(self) -> dict:
        return {"c": self.c, "bound": self.bound, "pad": self.pad,
                "exclusion_radius": self.exclusion_radius,
                "excluded_nodes": self.excluded_nodes}


def _kink_nodes(f: np.ndarray, h: float) -> np.ndarray:
    """Nodes where adjacent slopes jump by O(1): non-smooth points of
    piecewise initial data (a cone tip), excluded from grid evaluation."""
    slopes = np.diff(f) / h
    jump = np.abs(np.diff(slopes))
    kink_interior = np.nonzero(jump > 0.1)[0] + 1
    return kink_interior


def _radial_sup(state: RadialState, params: PParams,
                exclusion_radius: float) -> tuple[float, int]:
    r = state.r_nodes
    f = state.heights
    h = state.dr
    vals = radial_p_laplacian_profile(r, f, params, params.n)  # nodes 0..N-2
    keep = np.ones(vals.size, dtype=bool)
    excluded = 0
    if exclusion_radius > 0:
        for k in _kink_nodes(f, h):
            near = np.abs(r[:vals.size] - r[k]) <= exclusion_radius
            excluded += int(near.sum())
            keep &= ~near
    if not keep.any():
        raise NotStrictlyNegative("every node excluded as non-smooth")
    return float(vals[keep].max()), excluded


def certify_subsolution(initial: RadialState, params: PParams,
                        exclusion_radius: float | None = None) -> SubsolutionCertificate:
    """Grid supremum of the regularized operator on f0, Richardson-padded.

    The supremum is evaluated on the state's grid and on a PCHIP refinement
    with half the spacing; the pad |sup_h - sup_{h/2}| / 3 covers the
    second-order truncation. NotStrictlyNegative if the padded value fails
    to stay below zero.
    """
    if exclusion_radius is None:
        exclusion_radius = 2.0 * initial.dr

    sup_c, excl = _radial_sup(initial, params, exclusion_radius)

    fine = RadialState(
        time=initial.time,
        front_radius=initial.front_radius,
        heights=PchipInterpolator(initial.r_nodes, initial.heights)(
            np.linspace(0.0, initial.front_radius, 2 * initial.grid_size - 1)),
    )
    sup_f, _ = _radial_sup(fine, params, exclusion_radius)

    pad = abs(sup_f - sup_c) / 3.0
    c = sup_f + pad
    if not c < 0.0:
        raise NotStrictlyNegative(
            f"padded supremum {c:.3e} is not strictly negative")
    bound = initial.max_height / abs(c)
    return SubsolutionCertificate(c=c, bound=bound, pad=pad,
                                  exclusion_radius=exclusion_radius,
                                  excluded_nodes=excl)


# ---------------------------------------------------------------------------
# trajectory interpolation helpers
# ---------------------------------------------------------------------------

def _profile_at(traj: Trajectory, t: float) -> tuple[float, PchipInterpolator]:
    """(front radius, r -> f interpolant) at time t, linear in time between
    snapshots: heights interpolate at fixed mapped coordinate, the radius
    interpolates directly."""
    times = traj.times
    k = int(np.searchsorted(times, t, side="right")) - 1
    k = min(max(k, 0), len(times) - 2) if len(times) > 1 else 0
    s0 = traj.snapshots[k].state
    if len(times) == 1 or t <= times[0]:
        return s0.front_radius, PchipInterpolator(s0.r_nodes, s0.heights)
    s1 = traj.snapshots[k + 1].state
    w = (t - times[k]) / (times[k + 1] - times[k])
    w = min(max(w, 0.0), 1.0)
    R = (1.0 - w) * s0.front_radius + w * s1.front_radius
    heights = (1.0 - w) * s0.heights + w * s1.heights
    y = np.linspace(0.0, 1.0, heights.size)
    return R, PchipInterpolator(y * R, heights)


def _eval_profile(traj: Trajectory, t: float, r: np.ndarray) -> np.ndarray:
    """f(r, t) with extension by zero beyond the front."""
    R, interp = _profile_at(traj, t)
    out = np.zeros_like(r)
    ins = r <= R
    out[ins] = np.maximum(interp(r[ins]), 0.0)
    return out


# ---------------------------------------------------------------------------
# comparison principle
# ---------------------------------------------------------------------------

@dataclass
class ComparisonReport:
    times: np.ndarray
    nested: np.ndarray               # per compared snapshot
    ordering_defect: float           # max over snapshots of max(f - f', 0)
    gap: np.ndarray                  # m(t) = min over the smaller domain of f' - f
    gap_monotonicity_defect: float   # max drop of m(t) vs its running max
    passed: bool = True

    def as_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "nested": self.nested.tolist(),
            "ordering_defect": self.ordering_defect,
            "gap": self.gap.tolist(),
            "gap_monotonicity_defect": self.gap_monotonicity_defect,
            "passed": bool(self.passed),
        }


def comparison_pair(config_small: RadialRunConfig, config_large: RadialRunConfig,
                    ordering_tol: float = 1e-3) -> ComparisonReport:
    """Run the ordered pair and audit nesting, pointwise ordering and the gap.

    Hypotheses checked up front: eps_small >= eps_large (the comparison holds
    across regularizations in that direction only) and initial nesting
    f0 <= f0' with Omega_0 inside Omega_0'.
    """
    if config_small.params.epsilon < config_large.params.epsilon - 1e-15:
        raise ValueError("comparison requires eps(small) >= eps(large)")

    small0 = config_small.build_initial()
    large0 = config_large.build_initial()
    if small0.front_radius > large0.front_radius * (1.0 + 1e-12):
        raise InitialNestingViolated(
            f"Omega_0 (R = {small0.front_radius}) not inside Omega_0' "
            f"(R = {large0.front_radius})")
    f_large_on_small = _eval_profile(
        _single_snapshot_traj(large0, config_large.params), 0.0, small0.r_nodes)
    if np.any(small0.heights - f_large_on_small > 1e-12):
        raise InitialNestingViolated("f0 > f0' somewhere on the smaller domain")

    ts = solve_radial(config_small)
    tl = solve_radial(config_large)
    t_end = min(ts.times[-1], tl.times[-1])

    times, nested, gaps = [], [], []
    defect = 0.0
    for snap in ts.snapshots:
        if snap.time > t_end:
            break
        Rl, _ = _profile_at(tl, snap.time)
        st: RadialState = snap.state
        fl = _eval_profile(tl, snap.time, st.r_nodes)
        diff = st.heights - fl
        times.append(snap.time)
        nested.append(st.front_radius <= Rl * (1.0 + 1e-12) + 1e-12)
        defect = max(defect, float(diff.max()))
        gaps.append(float((-diff).min()))
    gap = np.asarray(gaps)
    runmax = np.maximum.accumulate(gap)
    mono_defect = float(np.max(runmax - gap)) if gap.size else 0.0
    nested_arr = np.asarray(nested, dtype=bool)
    return ComparisonReport(
        times=np.asarray(times),
        nested=nested_arr,
        ordering_defect=max(defect, 0.0),
        gap=gap,
        gap_monotonicity_defect=mono_defect,
        passed=bool(nested_arr.all() and defect <= ordering_tol
                    and mono_defect <= ordering_tol),
    )


def _single_snapshot_traj(state: RadialState, params: PParams) -> Trajectory:
    from .core import Snapshot, compute_diagnostics

    t = Trajectory(params=params, kind="radial")
    t.snapshots.append(Snapshot(state.time, state, compute_diagnostics(state)))
    return t


# ---------------------------------------------------------------------------
# scaling equivariance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingSpec:
    """lambda and which scaling map to test.

    eps_invariant: f -> (1/lam) f(lam x, lam^2 t); preserves |Df| and the
    whole regularized problem (same eps), so the deviation is pure scheme
    error. degenerate: f -> (1/lam) f(lam^2 x, lam^(p+2) t); preserves only
    the eps = 0 interior equation and rescales the front gradient to lam, so
    a residual floor of order |lam - 1| survives all refinement (reported,
    not asserted away).
    """

    lam: float
    mode: str = "eps_invariant"   # "eps_invariant" | "degenerate"

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.mode not in ("eps_invariant", "degenerate"):
            raise ValueError(f"unknown scaling mode {self.mode!r}")


@dataclass
class ScalingReport:
    lam: float
    mode: str
    deviation: float        # max relative deviation over the common window
    window: tuple[float, float]
    samples: int

    def as_dict(self) -> dict:
        return {"lambda": self.lam, "mode": self.mode, "deviation": self.deviation,
                "window": list(self.window), "samples": self.samples}


def _transformed_config(config: RadialRunConfig, spec: ScalingSpec) -> RadialRunConfig:
    from dataclasses import replace

    lam = spec.lam
    if spec.mode == "eps_invariant":
        # cap and cone families are closed under this map: R0 -> R0/lam
        if config.initial_kind in ("parabolic_cap", "cone"):
            return replace(config, R0=config.R0 / lam,
                           t_max=config.t_max / lam ** 2,
                           extinction_threshold=config.extinction_threshold / lam)
        base = config.build_initial()
        table = np.column_stack((base.r_nodes / lam, base.heights / lam))
        return replace(config, initial_kind="table", table=table,
                       R0=config.R0 / lam, t_max=config.t_max / lam ** 2,
                       extinction_threshold=config.extinction_threshold / lam)
    # degenerate map: table data (1/lam) f0(lam^2 r)
    base = config.build_initial()
    p = config.params.p
    table = np.column_stack((base.r_nodes / lam ** 2, base.heights / lam))
    return replace(config, initial_kind="table", table=table,
                   R0=config.R0 / lam ** 2,
                   t_max=config.t_max / lam ** (p + 2.0),
                   extinction_threshold=config.extinction_threshold / lam)


def scaling_test(config: RadialRunConfig, spec: ScalingSpec) -> ScalingReport:
    """Run base and lambda-transformed configs; compare the transformed
    trajectory against the base trajectory pulled through the scaling map."""
    lam = spec.lam
    p = config.params.p
    time_factor = lam ** 2 if spec.mode == "eps_invariant" else lam ** (p + 2.0)
    space_factor = lam if spec.mode == "eps_invariant" else lam ** 2

    base = solve_radial(config)
    transformed = solve_radial(_transformed_config(config, spec))

    t_end = min(transformed.times[-1], base.times[-1] / time_factor)
    scale0 = transformed.snapshots[0].state.max_height
    deviation = 0.0
    count = 0
    for snap in transformed.snapshots:
        if snap.time > t_end:
            break
        st: RadialState = snap.state
        mapped = _eval_profile(base, snap.time * time_factor,
                               st.r_nodes * space_factor) / lam
        deviation = max(deviation, float(np.abs(st.heights - mapped).max()))
        count += 1
    return ScalingReport(lam=lam, mode=spec.mode,
                         deviation=deviation / scale0,
                         window=(0.0, float(t_end)), samples=count)


# ---------------------------------------------------------------------------
# regularization family ordering
# ---------------------------------------------------------------------------

@dataclass
class EpsMonotonicityReport:
    eps_list: list[float]
    ordering_defects: list[float]     # per consecutive pair, max (f_big_eps - f_small_eps)+
    sup_differences: list[float]      # per consecutive pair, sup |difference|
    cauchy_decreasing: bool
    passed: bool

    def as_dict(self) -> dict:
        return {"eps_list": self.eps_list,
                "ordering_defects": self.ordering_defects,
                "sup_differences": self.sup_differences,
                "cauchy_decreasing": bool(self.cauchy_decreasing),
                "passed": bool(self.passed)}


def eps_monotonicity(config: RadialRunConfig, eps_list: list[float],
                     ordering_tol: float = 1e-3) -> EpsMonotonicityReport:
    """Identical initial data, decreasing eps: solutions must increase
    pointwise as eps drops, and consecutive sup-differences must shrink
    (monotone convergence to the degenerate solution)."""
    from dataclasses import replace

    if any(e2 >= e1 for e1, e2 in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    if any(e <= 0 for e in eps_list):
        raise ValueError("eps_list entries must be positive")

    runs = []
    for eps in eps_list:
        params = PParams(p=config.params.p, epsilon=eps, n=config.params.n)
        runs.append(solve_radial(replace(config, params=params)))

    defects, sups = [], []
    for big, small in zip(runs, runs[1:]):
        t_end = min(big.times[-1], small.times[-1])
        defect = 0.0
        sup = 0.0
        for snap in big.snapshots:
            if snap.time > t_end:
                break
            st: RadialState = snap.state
            f_small_eps = _eval_profile(small, snap.time, st.r_nodes)
            diff = st.heights - f_small_eps   # expected <= 0
            defect = max(defect, float(diff.max()))
            sup = max(sup, float(np.abs(diff).max()))
        defects.append(max(defect, 0.0))
        sups.append(sup)

    cauchy = all(b < a for a, b in zip(sups, sups[1:])) if len(sups) > 1 else True
    passed = all(d <= ordering_tol for d in defects) and cauchy
    return EpsMonotonicityReport(eps_list=list(eps_list), ordering_defects=defects,
                                 sup_differences=sups, cauchy_decreasing=cauchy,
                                 passed=passed)


# ---------------------------------------------------------------------------
# extinction bound
# ---------------------------------------------------------------------------

@dataclass
class ExtinctionReport:
    T_observed: float | None
    bound: float
    certificate: SubsolutionCertificate
    status: str                      # "pass" | "fail" | "Inconclusive"

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def as_dict(self) -> dict:
        return {"T_observed": self.T_observed, "bound": self.bound,
                "pass": self.status == "pass", "status": self.status,
                "certificate": self.certificate.as_dict()}


def extinction_bound(config: RadialRunConfig) -> ExtinctionReport:
    """Certify the initial data, run to extinction, check T <= max f0 / |c|.

    A run that hits t_max before the threshold is Inconclusive, never a
    false fail.
    """
    cert = certify_subsolution(config.build_initial(), config.params)
    traj = solve_radial(config)
    if traj.status != "Extinct":
        return ExtinctionReport(T_observed=None, bound=cert.bound,
                                certificate=cert, status="Inconclusive")
    T_obs = extinction_time(traj, config.extinction_threshold)
    status = "pass" if (T_obs is not None and T_obs <= cert.bound) else "fail"
    return ExtinctionReport(T_observed=T_obs, bound=cert.bound,
                            certificate=cert, status=status)


# ---------------------------------------------------------------------------
# invariant audit
# ---------------------------------------------------------------------------

@dataclass
class InvariantRecord:
    name: str
    worst: float
    tolerance: float
    time: float | None
    passed: bool

    def as_dict(self) -> dict:
        return {"name": self.name, "worst": self.worst,
                "tolerance": self.tolerance, "time": self.time,
                "passed": bool(self.passed)}


@dataclass
class InvariantReport:
    records: list[InvariantRecord] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def record(self, name: str) -> InvariantRecord:
        return next(r for r in self.records if r.name == name)

    def as_dict(self) -> dict:
        return {"passed": self.passed,
                "records": [r.as_dict() for r in self.records]}


def invariant_report(trajectory: Trajectory,
                     tolerances: dict[str, float] | None = None) -> InvariantReport:
    """Audit one trajectory against its structural invariants.

    Radial: gradient bound sup|Df| <= 1 + 5h, per-step node-wise decay,
    front monotonicity, concavity <= 10 h^2, Neumann residual <= C h, strip
    non-degeneracy. Planar additionally: strict polygon convexity, snapshot
    nesting, discrete-Hessian concavity, area monotonicity.
    """
    if not trajectory.snapshots:
        raise ValueError("empty trajectory")
    tol = tolerances or {}
    report = InvariantReport()
    if trajectory.kind == "radial":
        _radial_invariants(trajectory, tol, report)
    else:
        _planar_invariants(trajectory, tol, report)
    return report


def _worst_over(values, times):
    k = int(np.argmax(values))
    return float(values[k]), float(times[k])


def _radial_invariants(traj: Trajectory, tol: dict, report: InvariantReport) -> None:
    snaps = traj.snapshots
    st0: RadialState = snaps[0].state
    h0 = st0.dr
    times = traj.times

    sup = np.array([s.diagnostics.sup_grad for s in snaps])
    worst, at = _worst_over(sup, times)
    tol_g = tol.get("gradient", 1.0 + GRAD_SLACK * h0)
    report.records.append(InvariantRecord("gradient_bound", worst, tol_g, at, worst <= tol_g))

    rec = traj.step_records
    if rec and rec.get("max_increase", np.array([])).size:
        worst, at = _worst_over(rec["max_increase"], rec["times"])
    else:
        diffs = [float((snaps[k + 1].state.heights - snaps[k].state.heights).max())
                 for k in range(len(snaps) - 1)]
        worst, at = _worst_over(np.asarray(diffs), times[1:]) if diffs else (0.0, None)
    tol_d = tol.get("decay", 1e-12)
    report.records.append(InvariantRecord("monotone_decay", worst, tol_d, at, worst <= tol_d))

    radii = np.array([s.state.front_radius for s in snaps])
    growth = np.diff(radii)
    worst, at = _worst_over(growth, times[1:]) if growth.size else (0.0, None)
    tol_f = tol.get("front", 1e-12)
    report.records.append(InvariantRecord("front_monotone", worst, tol_f, at, worst <= tol_f))

    conc = np.array([s.diagnostics.concavity_violation for s in snaps])
    worst, at = _worst_over(conc, times)
    tol_c = tol.get("concavity", concavity_tolerance(h0))
    report.records.append(InvariantRecord("concavity", worst, tol_c, at, worst <= tol_c))

    neu = np.array([s.diagnostics.neumann_residual for s in snaps])
    worst, at = _worst_over(neu, times)
    tol_n = tol.get("neumann", 5.0 * h0)
    report.records.append(InvariantRecord("neumann_residual", worst, tol_n, at, worst <= tol_n))

    if rec and rec.get("strip_margin", np.array([])).size:
        margins = rec["strip_margin"]
        k = int(np.argmin(margins))
        worst_m, at = float(margins[k]), float(rec["times"][k])
    else:
        worst_m, at = _snapshot_strip_margin(traj)
    report.records.append(InvariantRecord(
        "strip_nondegeneracy", -worst_m, tol.get("strip", 0.0), at, worst_m >= 0.0))


def _snapshot_strip_margin(traj: Trajectory) -> tuple[float, float | None]:
    from .core import radial_node_gradients

    worst, at = np.inf, None
    for snap in traj.snapshots:
        st: RadialState = snap.state
        bounds = bounds_from_radial(st)
        d = default_strip_width(bounds)
        strip = st.heights <= d
        strip[0] = False
        if not strip.any():
            continue
        g = radial_node_gradients(st)
        floor = bounds.m / (2.0 * bounds.R_out) - GRAD_SLACK * st.dr
        margin = float(np.min(np.abs(g[strip])) - floor)
        if margin < worst:
            worst, at = margin, snap.time
    return worst, at


def _planar_invariants(traj: Trajectory, tol: dict, report: InvariantReport) -> None:
    snaps = traj.snapshots
    st0: PlanarState = snaps[0].state
    h0 = st0.grid_spacing
    times = traj.times

    sup = np.array([s.diagnostics.sup_grad for s in snaps])
    worst, at = _worst_over(sup, times)
    tol_g = tol.get("gradient", 1.0 + GRAD_SLACK * h0)
    report.records.append(InvariantRecord("gradient_bound", worst, tol_g, at, worst <= tol_g))

    rec = traj.step_records
    if rec and rec.get("max_increase", np.array([])).size:
        worst, at = _worst_over(rec["max_increase"], rec["times"])
    else:
        worst, at = 0.0, None
    tol_d = tol.get("decay", 1e-12)
    report.records.append(InvariantRecord("monotone_decay", worst, tol_d, at, worst <= tol_d))

    min_cross = np.array([geometry.normalized_crosses(s.state.markers).min()
                          for s in snaps])
    k = int(np.argmin(min_cross))
    report.records.append(InvariantRecord(
        "convexity", float(-min_cross[k]), 0.0, float(times[k]),
        bool(np.all(min_cross > 0.0))))

    nest_margin = np.inf
    nest_at = None
    for a, b in zip(snaps, snaps[1:]):
        margins = geometry.signed_inner_distance(a.state.markers, b.state.markers)
        m = float(np.min(margins))
        if m < nest_margin:
            nest_margin, nest_at = m, b.time
    tol_nest = tol.get("nesting", 1e-9)
    report.records.append(InvariantRecord(
        "nesting", -nest_margin if np.isfinite(nest_margin) else 0.0, tol_nest,
        nest_at, nest_margin >= -tol_nest))

    conc = np.array([s.diagnostics.concavity_violation for s in snaps])
    worst, at = _worst_over(conc, times)
    tol_c = tol.get("concavity", concavity_tolerance(h0))
    report.records.append(InvariantRecord("concavity", worst, tol_c, at, worst <= tol_c))

    areas = np.array([s.diagnostics.area for s in snaps])
    growth = np.diff(areas)
    worst, at = _worst_over(growth, times[1:]) if growth.size else (0.0, None)
    report.records.append(InvariantRecord(
        "area_monotone", worst, tol.get("front", 1e-12), at,
        worst <= tol.get("front", 1e-12)))
