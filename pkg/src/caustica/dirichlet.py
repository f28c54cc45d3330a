"""Boundary-value degeneration scans for the proper-time Lagrangian.

The field representation integrates e^{i k0 S} over a path-length-like
variable; the stationary paths of the underlying Lagrangian solve
d^2 X / d tau^2 = 2 Lambda^2 grad n^2(X) on tau in [0, 1].  At special
real values of Lambda the Dirichlet map (initial velocity -> endpoint)
degenerates: every trajectory lands on a common endpoint (complete
collapse, a ghost pole of the action, with the common endpoint tracing
the ghost source), or only part of the velocity fiber folds together
(partial collapse, the butterfly patterns).  This module detects and
refines both numerically, for profiles with or without closed-form
actions.

Parameter map to the ray tracer: substituting s = 2 Lambda tau turns the
stationary system into the ray equations dX/ds = P, dP/ds = grad n^2 / 2,
so an endpoint at tau = 1 is the ray point at travel parameter
s = 2 Lambda, and the eikonal constraint |P| = n pins the launch speed
|dX/dtau(0)| = 2 Lambda n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from .profiles import ProfileModel
from .raytrace import extract_caustics, ray_fan

__all__ = [
    "ELTrajectory",
    "ScanResult",
    "GhostPoleEstimate",
    "DegenerationPattern",
    "CuspCoincidence",
    "solve_el",
    "endpoint_spread_scan",
    "find_ghost_poles",
    "shoot_endpoint",
    "degeneration_pattern",
    "sigma_surface_compare",
]

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class ELTrajectory:
    """One stationary path on tau in [0, 1].

    start holds (x0, z0, vx0, v0) at tau = 0.  The horizontal component
    is exactly linear because every supported profile depends on depth
    only.  divergent marks trajectories that left the overflow bound
    before tau = 1 (expected near degeneration values of lam).
    """

    lam: float
    start: Tuple[float, float, float, float]
    tau: np.ndarray
    x: np.ndarray
    z: np.ndarray
    divergent: bool = False

    @property
    def endpoint(self) -> Tuple[float, float]:
        return float(self.x[-1]), float(self.z[-1])

    @property
    def samples(self) -> np.ndarray:
        return np.column_stack([self.tau, self.x, self.z])


def _divergence_bound(z0: float, v0_scale: float) -> float:
    return 1e6 * max(1.0, abs(z0), abs(v0_scale))


def solve_el(profile: ProfileModel, lam: float, z0: float, v0: float,
             steps: int = 201, x0: float = 0.0, vx0: float = 0.0,
             rtol: float = 1e-10, atol: float = 1e-12) -> ELTrajectory:
    """Integrate the stationary system d^2 z/d tau^2 = 2 lam^2 dn^2/dz
    from (z0, v0) over tau in [0, 1], sampled at `steps` points.

    A trajectory crossing the overflow bound is cut short and flagged
    divergent, with the remaining samples held at the crossing value.
    """
    if lam == 0.0:
        raise ValueError("lam must be nonzero")
    bound = _divergence_bound(z0, abs(v0))
    two_lam2 = 2.0 * lam * lam

    def rhs(t, y):
        return [y[1], two_lam2 * profile.eval_grad_n_squared(0.0, y[0])[1]]

    def escape(t, y):
        return abs(y[0]) - bound
    escape.terminal = True

    tau = np.linspace(0.0, 1.0, steps)
    sol = solve_ivp(rhs, (0.0, 1.0), [z0, v0], method="RK45",
                    rtol=rtol, atol=atol, dense_output=True,
                    t_eval=tau, events=escape)
    divergent = bool(sol.t_events[0].size)
    if divergent:
        t_stop = float(sol.t_events[0][0])
        z = np.where(tau <= t_stop, sol.sol(np.minimum(tau, t_stop))[0],
                     sol.sol(t_stop)[0])
    else:
        z = sol.y[0]
    x = x0 + vx0 * tau
    return ELTrajectory(lam=float(lam), start=(x0, z0, vx0, v0),
                        tau=tau, x=x, z=np.asarray(z, float),
                        divergent=divergent)


def _batch_endpoints(profile: ProfileModel, lams: np.ndarray, z0: float,
                     v0s: np.ndarray, steps: int
                     ) -> Tuple[np.ndarray, np.ndarray]:
    """Endpoints z(1) for every (lam, v0) pair by fixed-step RK4.

    Returns (z1, divergent) with shape (len(lams), len(v0s)).  Divergent
    entries are frozen at the overflow bound so the rest of the batch
    keeps integrating with finite values.
    """
    lams = np.atleast_1d(np.asarray(lams, float))
    v0s = np.atleast_1d(np.asarray(v0s, float))
    bound = _divergence_bound(z0, float(np.max(np.abs(v0s), initial=1.0)))
    coef = (2.0 * lams * lams)[:, None]
    z = np.full((lams.size, v0s.size), float(z0))
    v = np.broadcast_to(v0s, z.shape).copy()
    dead = np.zeros(z.shape, dtype=bool)
    h = 1.0 / steps

    def acc(zz):
        return coef * profile.eval_grad_n_squared(0.0, zz)[1]

    for _ in range(steps):
        k1z = v
        k1v = acc(z)
        k2z = v + 0.5 * h * k1v
        k2v = acc(z + 0.5 * h * k1z)
        k3z = v + 0.5 * h * k2v
        k3v = acc(z + 0.5 * h * k2z)
        k4z = v + h * k3v
        k4v = acc(z + h * k3z)
        z_new = z + (h / 6.0) * (k1z + 2 * k2z + 2 * k3z + k4z)
        v_new = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        blown = np.abs(z_new) > bound
        dead |= blown
        z = np.where(dead, np.clip(z_new, -bound, bound), z_new)
        v = np.where(dead, 0.0, v_new)
    return z, dead


# ---------------------------------------------------------------------------
# spread scan and ghost-pole refinement
# ---------------------------------------------------------------------------

@dataclass
class ScanResult:
    """Endpoint spread over a lam grid, with the inputs retained so the
    minima can be refined afterwards.

    z_common holds the median endpoint at grid points that are local
    minima of the spread, NaN elsewhere; spread is NaN where every
    trajectory diverged (a gap entry).
    """

    lambda_grid: np.ndarray
    spread: np.ndarray
    n_divergent: np.ndarray
    z_common: np.ndarray
    profile: ProfileModel = field(repr=False)
    z0: float = 0.0
    v0_set: np.ndarray = field(default=None, repr=False)
    steps: int = 800


@dataclass(frozen=True)
class GhostPoleEstimate:
    lambda_p: float
    z_ghost: float
    collapse_type: str          # "complete" or "partial"
    spread_at_pole: float
    bracket_width: float


def _spread_stats(z1: np.ndarray, dead: np.ndarray
                  ) -> Tuple[float, int, float]:
    """(spread, n_divergent, median endpoint) for one lam column."""
    alive = z1[~dead]
    if alive.size == 0:
        return math.nan, int(dead.size), math.nan
    return (float(np.max(alive) - np.min(alive)), int(np.sum(dead)),
            float(np.median(alive)))


def endpoint_spread_scan(profile: ProfileModel, lambda_grid: Sequence[float],
                         z0: float, v0_set: Sequence[float],
                         steps: int = 800) -> ScanResult:
    """Spread (max - min) of the endpoints z(1) over the velocity set,
    for each lam on the grid."""
    lambda_grid = np.asarray(lambda_grid, float)
    v0_set = np.asarray(v0_set, float)
    if v0_set.size < 2:
        raise ValueError("need at least two launch velocities")
    if np.any(np.diff(lambda_grid) <= 0):
        raise ValueError("lambda_grid must be strictly increasing")
    z1, dead = _batch_endpoints(profile, lambda_grid, z0, v0_set, steps)
    spread = np.empty(lambda_grid.size)
    ndiv = np.empty(lambda_grid.size, dtype=int)
    med = np.empty(lambda_grid.size)
    for i in range(lambda_grid.size):
        spread[i], ndiv[i], med[i] = _spread_stats(z1[i], dead[i])
    z_common = np.full(lambda_grid.size, np.nan)
    for i in _local_minima(spread):
        z_common[i] = med[i]
    return ScanResult(lambda_grid=lambda_grid, spread=spread,
                      n_divergent=ndiv, z_common=z_common,
                      profile=profile, z0=float(z0), v0_set=v0_set,
                      steps=int(steps))


def _local_minima(values: np.ndarray) -> List[int]:
    """Indices of strict-or-plateau local minima, NaNs excluded."""
    out = []
    n = values.size
    for i in range(1, n - 1):
        trio = values[i - 1:i + 2]
        if np.any(np.isnan(trio)):
            continue
        if (values[i] <= values[i - 1] and values[i] <= values[i + 1]
                and (values[i] < values[i - 1] or values[i] < values[i + 1])):
            out.append(i)
    return out


def _spreads_at(scan: ScanResult, lams: np.ndarray, steps: int
                ) -> Tuple[np.ndarray, np.ndarray]:
    """Spread and median endpoint per lam, one batched integration."""
    z1, dead = _batch_endpoints(scan.profile, lams, scan.z0,
                                scan.v0_set, steps)
    sp = np.empty(lams.size)
    med = np.empty(lams.size)
    for i in range(lams.size):
        sp[i], _, med[i] = _spread_stats(z1[i], dead[i])
    return sp, med


def find_ghost_poles(scan: ScanResult, tol: float,
                     refine_steps: Optional[int] = None,
                     max_iter: int = 60) -> List[GhostPoleEstimate]:
    """Refine each local spread minimum by golden-section search on lam.

    All minima are refined in lockstep so each iteration costs a single
    batched integration.  Minima whose refined spread falls below tol
    are complete collapses (ghost poles); minima that stay above tol but
    dip by at least a factor of ten below the surrounding spread level
    are reported as partial collapses.  Shallower wiggles are discarded.
    """
    final_steps = refine_steps or max(2 * scan.steps, 1600)
    grid, spread = scan.lambda_grid, scan.spread
    idx = _local_minima(spread)
    if not idx:
        return []
    a = np.array([grid[i - 1] for i in idx])
    b = np.array([grid[i + 1] for i in idx])
    background = np.array([
        min(np.nanmax(spread[max(0, i - 5):i + 1]),
            np.nanmax(spread[i:i + 6])) for i in idx])
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, _ = _spreads_at(scan, c, scan.steps)
    fd, _ = _spreads_at(scan, d, scan.steps)
    for _ in range(max_iter):
        active = ((b - a > 1e-8 * np.maximum(1.0, np.abs(b)))
                  & np.isfinite(fc) & np.isfinite(fd))
        if not np.any(active):
            break
        left = active & (fc < fd)
        right = active & ~left
        b[left], d[left], fd[left] = d[left], c[left], fc[left]
        c[left] = b[left] - GOLDEN * (b[left] - a[left])
        a[right], c[right], fc[right] = c[right], d[right], fd[right]
        d[right] = a[right] + GOLDEN * (b[right] - a[right])
        probes = np.where(left, c, d)[active]
        vals, _ = _spreads_at(scan, probes, scan.steps)
        # scatter the freshly evaluated spreads back to their slots
        j = 0
        for k in np.nonzero(active)[0]:
            if left[k]:
                fc[k] = vals[j]
            else:
                fd[k] = vals[j]
            j += 1
    lam_p = 0.5 * (a + b)
    s_min, z_med = _spreads_at(scan, lam_p, final_steps)
    out: List[GhostPoleEstimate] = []
    for k in range(lam_p.size):
        if not math.isfinite(s_min[k]):
            continue
        if s_min[k] < tol:
            kind = "complete"
        elif (math.isfinite(background[k])
              and s_min[k] < 0.1 * background[k]):
            kind = "partial"
        else:
            continue
        out.append(GhostPoleEstimate(lambda_p=float(lam_p[k]),
                                     z_ghost=float(z_med[k]),
                                     collapse_type=kind,
                                     spread_at_pole=float(s_min[k]),
                                     bracket_width=float(b[k] - a[k])))
    return out


def shoot_endpoint(profile: ProfileModel, lam: float, z0: float,
                   z_target: float, v0_guess: float = 0.0,
                   steps: int = 800, tol: float = 1e-10,
                   max_iter: int = 60) -> Tuple[float, float, bool]:
    """Solve the two-point problem z(1) = z_target for the launch
    velocity by a damped secant iteration.

    Returns (v0, z1_attained, converged).  Near a complete collapse the
    required velocity grows without bound; the iteration then stops at
    the overflow guard with converged False.
    """
    scale = max(1.0, abs(z0), abs(z_target))

    def endpoint(v0: float) -> float:
        z1, dead = _batch_endpoints(profile, np.array([lam]), z0,
                                    np.array([v0]), steps)
        return math.inf if dead[0, 0] else float(z1[0, 0])

    v_a = v0_guess
    f_a = endpoint(v_a) - z_target
    if abs(f_a) < tol * scale:
        return v_a, f_a + z_target, True
    v_b = v0_guess + max(1.0, 0.1 * abs(v0_guess))
    f_b = endpoint(v_b) - z_target
    for _ in range(max_iter):
        if not (math.isfinite(f_a) and math.isfinite(f_b)) or f_b == f_a:
            return v_b, f_b + z_target, False
        v_new = v_b - f_b * (v_b - v_a) / (f_b - f_a)
        if abs(v_new) > 1e10 * scale:
            return v_new, math.inf, False
        f_new = endpoint(v_new) - z_target
        v_a, f_a, v_b, f_b = v_b, f_b, v_new, f_new
        if abs(f_b) < tol * scale:
            return v_b, f_b + z_target, True
    return v_b, f_b + z_target, False


# ---------------------------------------------------------------------------
# degeneration patterns (envelopes of the endpoint map)
# ---------------------------------------------------------------------------

@dataclass
class DegenerationPattern:
    """Critical-value structure of the map v0 -> z(1) over a lam window.

    branches are polylines in the (lam, z1) plane traced by the critical
    values; collapse_points marks lams where the whole endpoint set
    contracts below the collapse tolerance.  n_cusps counts both
    direction reversals inside a branch and birth/death events where a
    pair of critical values merges; n_self_intersections counts interior
    crossings of the branch set.
    """

    lambda_grid: np.ndarray
    critical_values: List[np.ndarray]
    branches: List[np.ndarray]
    collapse_points: np.ndarray
    n_cusps: int
    n_self_intersections: int
    label: str


def _column_critical_values(v0s: np.ndarray, z1: np.ndarray,
                            dead: np.ndarray) -> np.ndarray:
    """Critical values of v0 -> z(1): sign changes of the finite
    difference, refined by one secant step on the derivative."""
    ok = ~dead
    v = v0s[ok]
    z = z1[ok]
    if v.size < 3:
        return np.zeros(0)
    d = np.diff(z) / np.diff(v)
    out = []
    for i in range(d.size - 1):
        # z is quadratically flat at a critical point, so the shared node
        # of the two sign-changing intervals is second-order accurate.
        if d[i] == 0.0 or d[i] * d[i + 1] < 0.0:
            out.append(z[i + 1])
    return np.asarray(out)


def _chain_columns(lams: np.ndarray, columns: List[np.ndarray],
                   z_scale: float) -> List[np.ndarray]:
    """Link per-column critical values into branch polylines by nearest
    continuation in z, allowing single-column gaps."""
    open_chains: List[List[Tuple[float, float]]] = []
    open_age: List[int] = []
    closed: List[List[Tuple[float, float]]] = []
    match_tol = 0.08 * z_scale
    for lam, col in zip(lams, columns):
        used = np.zeros(col.size, dtype=bool)
        for ci in range(len(open_chains) - 1, -1, -1):
            if open_age[ci] > 1:
                closed.append(open_chains.pop(ci))
                open_age.pop(ci)
        order = sorted(range(len(open_chains)),
                       key=lambda ci: -len(open_chains[ci]))
        for ci in order:
            last_z = open_chains[ci][-1][1]
            best, best_d = -1, match_tol
            for j in range(col.size):
                if used[j]:
                    continue
                dist = abs(col[j] - last_z)
                if dist < best_d:
                    best, best_d = j, dist
            if best >= 0:
                used[best] = True
                open_chains[ci].append((lam, col[best]))
                open_age[ci] = 0
            else:
                open_age[ci] += 1
        for j in range(col.size):
            if not used[j]:
                open_chains.append([(lam, col[j])])
                open_age.append(0)
    closed.extend(open_chains)
    return [np.asarray(ch) for ch in closed if len(ch) >= 2]


def _count_pattern_features(lams: np.ndarray, columns: List[np.ndarray],
                            branches: List[np.ndarray], z_scale: float
                            ) -> Tuple[int, int]:
    """(n_cusps, n_self_intersections) of the envelope.

    Cusps transverse to the lam axis show up as a +-2 change in the
    per-column critical count with the born or dying pair close in z;
    cusps along the lam axis show up as a direction reversal inside a
    branch.  Crossings are counted on the normalized branch set.
    """
    lam_range = max(lams[-1] - lams[0], 1e-300)
    merge_tol = 0.15 * z_scale
    n_cusps = 0
    for i in range(len(columns) - 1):
        a, b = columns[i], columns[i + 1]
        if abs(a.size - b.size) != 2:
            continue
        small, big = (a, b) if a.size < b.size else (b, a)
        extra = list(big)
        for val in small:
            if extra:
                j = int(np.argmin(np.abs(np.asarray(extra) - val)))
                extra.pop(j)
        if len(extra) == 2 and abs(extra[0] - extra[1]) < merge_tol:
            n_cusps += 1

    def norm(poly):
        return np.column_stack([(poly[:, 0] - lams[0]) / lam_range,
                                poly[:, 1] / z_scale])

    for poly in branches:
        p = norm(poly)
        seg = np.diff(p, axis=0)
        ln = np.linalg.norm(seg, axis=1)
        keep = ln > 0
        seg, ln = seg[keep], ln[keep]
        for i in range(len(seg) - 1):
            cosang = np.dot(seg[i], seg[i + 1]) / (ln[i] * ln[i + 1])
            if cosang < -0.2:
                n_cusps += 1

    segments = []
    for bi, poly in enumerate(branches):
        p = norm(poly)
        for i in range(len(p) - 1):
            segments.append((bi, i, p[i], p[i + 1]))
    n_cross = 0
    for i in range(len(segments)):
        bi, ii, a0, a1 = segments[i]
        for j in range(i + 1, len(segments)):
            bj, jj, b0, b1 = segments[j]
            if bi == bj and abs(ii - jj) <= 1:
                continue
            d1 = a1 - a0
            d2 = b1 - b0
            den = d1[0] * d2[1] - d1[1] * d2[0]
            if den == 0.0:
                continue
            r = b0 - a0
            t = (r[0] * d2[1] - r[1] * d2[0]) / den
            u = (r[0] * d1[1] - r[1] * d1[0]) / den
            eps = 1e-6
            if eps < t < 1 - eps and eps < u < 1 - eps:
                n_cross += 1
    return n_cusps, n_cross


def degeneration_pattern(profile: ProfileModel,
                         lambda_window: Sequence[float], z0: float,
                         v0_grid: Sequence[float], steps: int = 800,
                         collapse_tol: Optional[float] = None
                         ) -> DegenerationPattern:
    """Envelope of the endpoint map over a lam window.

    For each lam, the critical values of v0 -> z(1) (vanishing finite
    difference) become envelope points; complete collapses (whole
    endpoint set within the collapse tolerance) are recorded separately.
    The returned counts classify the pattern structurally.
    """
    lams = np.asarray(lambda_window, float)
    v0s = np.asarray(v0_grid, float)
    if v0s.size < 200:
        raise ValueError("need a dense launch-velocity grid "
                         "(at least 200 points)")
    z1, dead = _batch_endpoints(profile, lams, z0, v0s, steps)
    alive_abs = np.abs(z1[~dead]) if np.any(~dead) else np.array([1.0])
    z_scale = max(float(np.median(alive_abs)), 1e-12)
    if collapse_tol is None:
        collapse_tol = 1e-3 * max(1.0, z_scale)

    columns: List[np.ndarray] = []
    collapses = []
    for i in range(lams.size):
        s, _, med = _spread_stats(z1[i], dead[i])
        if math.isfinite(s) and s < collapse_tol:
            collapses.append((lams[i], med))
            columns.append(np.zeros(0))
        else:
            columns.append(_column_critical_values(v0s, z1[i], dead[i]))

    branches = _chain_columns(lams, columns, z_scale)
    n_cusps, n_cross = _count_pattern_features(lams, columns, branches,
                                               z_scale)
    if collapses and not branches:
        label = "complete-collapse"
    elif not branches:
        label = "monotone"
    elif n_cusps >= 3 and n_cross >= 3:
        label = "butterfly"
    else:
        label = f"{n_cusps}-cusp pattern"
    return DegenerationPattern(
        lambda_grid=lams, critical_values=columns, branches=branches,
        collapse_points=(np.asarray(collapses) if collapses
                         else np.zeros((0, 2))),
        n_cusps=n_cusps, n_self_intersections=n_cross, label=label)


# ---------------------------------------------------------------------------
# wavefront coincidence at cusps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CuspCoincidence:
    """Distance from one ray-fan cusp to the stationary-path endpoint
    front at the matching lam (metric), and to the front at a detuned
    lam (control)."""

    cusp_x: float
    cusp_z: float
    lambda_crit: float
    metric: float
    control_metric: float


def sigma_surface_compare(profile: ProfileModel,
                          source: Tuple[float, float],
                          region: Tuple[float, float, float, float],
                          samples: int = 161, theta_span: float = 0.45,
                          s_max: Optional[float] = None,
                          steps: int = 1600,
                          control_factor: float = 0.8
                          ) -> List[CuspCoincidence]:
    """Check that ray-fan cusps lie on the endpoint front of the
    stationary paths.

    Rays are traced from the source and their caustic cusps extracted
    inside the region.  For each cusp at travel parameter s_c, the
    endpoint front at lam = s_c / 2 is built independently from the
    boundary-value side (launch speeds 2 lam n, the eikonal constraint)
    and the minimum distance from the cusp to that front is reported,
    together with the same distance to a detuned front at
    control_factor * lam as a negative control.
    """
    xs, zs = source
    x_lo, x_hi, z_lo, z_hi = region
    if s_max is None:
        s_max = 1.4 * (abs(x_hi - xs) + abs(z_hi - z_lo))
    thetas = np.linspace(-theta_span, theta_span, samples)
    fan = ray_fan(profile, source, thetas, s_max)
    caus = extract_caustics(fan, profile=profile)
    ns = profile.n(xs, zs)

    def front(lam: float) -> np.ndarray:
        v0 = 2.0 * lam * ns * np.sin(thetas)
        z1, dead2 = _batch_endpoints(profile, np.array([lam]), zs, v0, steps)
        x1 = xs + 2.0 * lam * ns * np.cos(thetas)
        pts = np.column_stack([x1, z1[0]])
        return pts[~dead2[0]]

    out: List[CuspCoincidence] = []
    for cusp in caus.cusps:
        if not (x_lo <= cusp.x <= x_hi and z_lo <= cusp.z <= z_hi):
            continue
        lam_c = 0.5 * cusp.s
        target = np.array([cusp.x, cusp.z])

        def dist_to(pts: np.ndarray) -> float:
            if pts.size == 0:
                return math.inf
            return float(np.min(np.linalg.norm(pts - target, axis=1)))

        metric = dist_to(front(lam_c))
        control = dist_to(front(control_factor * lam_c))
        out.append(CuspCoincidence(cusp_x=float(cusp.x),
                                   cusp_z=float(cusp.z),
                                   lambda_crit=float(lam_c),
                                   metric=metric,
                                   control_metric=control))
    return out
