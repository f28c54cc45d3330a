"""Complex-contour field evaluation: descent tracing, assembly, and the
regularized real-axis oracle, plus the quartic uniform integral near cusps.

The field integral phi = integral P(L) exp(i k0 Sbar(L)) dL is evaluated
two independent ways:

* integrate_real_axis: a convergent deformation of the positive real
  axis (a "weave") that starts inside the decay sector of the origin
  essential singularity, passes below every on-axis pole at a controlled
  depth, and leaves through a model-specific decay exit.  Evaluated by
  adaptive quadrature at three contour depths with a mutual-agreement
  check.

* integrate_field: steepest-descent paths are traced from every
  stationary point (co-integrating the prefactor logarithm so branch
  choices stay continuous), each path pair becomes one candidate value,
  and a signed selection of candidates is matched against the real-axis
  value.  The signed search absorbs the per-path square-root branch
  ambiguity of the prefactor.

Both representations truncate identically (the channel sum is cut at the
same dead endpoint below the first excluded pole), so their agreement is
an equality check of the machinery, not an asymptotic statement.

The quartic canonical integral (pearcey) and the mapping of receiver
points to its arguments (pearcey_map) provide the uniform field near a
cusp, where isolated-saddle assembly degenerates.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import product as _iterproduct
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad, solve_ivp

from .einbein import (
    CriticalPoint,
    EinbeinAction,
    find_critical_points,
)

__all__ = [
    "AssemblyError",
    "AssemblyResult",
    "ContourSegment",
    "DegenerateCriticalPointError",
    "ExtrapolationDivergenceError",
    "FieldSample",
    "PearceyArguments",
    "TraceError",
    "assemble_contour",
    "integrate_field",
    "integrate_real_axis",
    "pearcey",
    "pearcey_grid",
    "pearcey_map",
    "trace_steepest_descent",
    "uniform_cusp_field",
]


class TraceError(RuntimeError):
    """Steepest-descent tracing could not complete."""


class DegenerateCriticalPointError(TraceError):
    """The stationary point is (nearly) degenerate: descent directions are
    ill-defined.  Use the uniform cusp treatment (pearcey_map /
    uniform_cusp_field) instead of isolated-saddle assembly."""


class AssemblyError(RuntimeError):
    """No signed combination of descent paths reproduces the real-axis
    value.  best_value / best_sigma / best_mismatch carry the closest
    candidate found."""

    def __init__(self, message, best_value=None, best_sigma=None,
                 best_mismatch=None):
        super().__init__(message)
        self.best_value = best_value
        self.best_sigma = best_sigma
        self.best_mismatch = best_mismatch


class ExtrapolationDivergenceError(RuntimeError):
    """Real-axis evaluations at nested contour depths disagree."""


@dataclass
class ContourSegment:
    """One traced descent path leaving a stationary point.

    samples hold the path: parameter t (arc length), position lam,
    exponent h = i k0 Sbar, and the continuously continued log-prefactor
    relative to its value at the stationary point.  integral_rel is
    integral exp((logP - logP_cp) + (h - h_cp)) dlam along the path, and
    log_base = logP_cp + h_cp, so the absolute contribution of a path
    pair is exp(log_base) * (integral_rel_plus - integral_rel_minus).
    """

    cp_lam: complex
    orientation: int
    start_tag: str
    end_tag: str
    t: np.ndarray
    lam: np.ndarray
    h: np.ndarray
    log_prefactor_rel: np.ndarray
    integral_rel: complex
    log_base: complex


@dataclass(frozen=True)
class FieldSample:
    """Assembled field value at one receiver."""

    x: float
    z: float
    value: complex
    n_critical_points: int
    sigma: Tuple[int, ...]
    oracle_value: complex
    rel_mismatch: float


@dataclass(frozen=True)
class AssemblyResult:
    value: complex
    sigma: Tuple[int, ...]
    rel_mismatch: float
    oracle: complex


@dataclass(frozen=True)
class PearceyArguments:
    """Canonical quartic-integral arguments for a receiver near a cusp.

    zeta2 runs along the cusp axis (negative inside the three-arrival
    region), zeta1 across it; phase is the slowly varying carrier
    exponent, jacobian the amplitude mapping factor, and within_trust
    flags receivers inside the validity neighborhood of the mapping.
    """

    zeta2: float
    zeta1: float
    phase: complex
    jacobian: float
    within_trust: bool


# ---------------------------------------------------------------------------
# steepest-descent tracing
# ---------------------------------------------------------------------------

def _pole_radii(action: EinbeinAction, x: float, z: float, k0: float,
                scale: float) -> List[Tuple[float, float]]:
    """Termination radii per pole: small enough that the abandoned tail is
    below exp(-40), adaptive so weak-residue poles stay transparent."""
    out = []
    for pr in action.poles_and_residues(x, z):
        kr = k0 * pr.residue
        if kr < 1e-6:
            continue  # transparent: descent passes this pole correctly
        out.append((pr.lam, min(1e-3 * scale, kr / 40.0)))
    return out


def trace_steepest_descent(action: EinbeinAction, cp: CriticalPoint,
                           x: float, z: float, k0: float,
                           depth_drop: float = 40.0,
                           other_cps: Sequence[complex] = (),
                           ) -> List[ContourSegment]:
    """Trace both descent paths leaving one stationary point.

    The flow dLam/dt = -conj(h')/|h'| (h = i k0 Sbar) descends Re h at
    unit speed with Im h frozen.  Alongside the position the prefactor
    logarithm and the path integral are co-integrated, which keeps the
    square-root branch continuous along each path.  A path ends when it
    has dropped depth_drop in Re h (tag "wedge:i" if it sits in a known
    decay sector, else "truncated"), hits a pole termination ball
    ("pole:j"), or leaves a generous bounding box ("escaped").
    """
    scale = action.scale(x, z)
    nsc = max(action.n_eff if action.model == "EffectiveCusp" else action.n0,
              1e-12)
    d2S = cp.second_derivative
    if abs(d2S) < 1e-8 * nsc ** 2 / max(scale, 1e-12):
        raise DegenerateCriticalPointError(
            f"stationary point at {cp.lam:.6g} is degenerate "
            "(second derivative ~ 0); use the uniform cusp treatment")
    pole_dist = min((abs(cp.lam - p) for p in action.pole_positions()),
                    default=np.inf)
    if pole_dist < 1e-6 * scale:
        raise DegenerateCriticalPointError(
            f"stationary point at {cp.lam:.6g} sits on a prefactor branch "
            "point (pole collision); use the uniform cusp treatment")

    lam_cp = cp.lam
    h_cp = 1j * k0 * cp.action_value
    logp_cp = complex(action.log_prefactor(lam_cp, k0, x, z))
    d2h = 1j * k0 * d2S
    theta0 = (np.pi - np.angle(d2h)) / 2.0

    radii = _pole_radii(action, x, z, k0, scale)
    d_cp = min((abs(lam_cp - o) for o in other_cps if abs(lam_cp - o) > 0),
               default=np.inf)
    delta_seed = min(np.sqrt(2e-9 / abs(d2h)), d_cp / 10.0, 1e-3 * scale)

    def h_of(lam):
        return 1j * k0 * action.action(lam, x, z)

    def hp_of(lam):
        return 1j * k0 * action.derivative(lam, x, z, 1)

    segments = []
    for orientation, theta in ((1, theta0), (-1, theta0 + np.pi)):
        seed = lam_cp + delta_seed * np.exp(1j * theta)

        # stub cp -> seed: 10-point Gauss-Legendre on the straight piece,
        # with the prefactor linearized about the stationary point
        gl_x, gl_w = np.polynomial.legendre.leggauss(10)
        ts = 0.5 * (gl_x + 1.0)
        lam_stub = lam_cp + ts * (seed - lam_cp)
        dlp_cp = complex(action.dlog_prefactor(lam_cp, x, z))
        f_stub = np.exp(dlp_cp * (lam_stub - lam_cp)
                        + h_of(lam_stub) - h_cp)
        I_stub = complex(np.sum(gl_w * 0.5 * f_stub) * (seed - lam_cp))
        logp_seed = dlp_cp * (seed - lam_cp)

        def rhs(t, y):
            lam = complex(y[0], y[1])
            hp = complex(hp_of(lam))
            ahp = abs(hp)
            if not np.isfinite(ahp) or ahp < 1e-300:
                return [0.0] * 6
            v = -np.conj(hp) / ahp
            dlp = complex(action.dlog_prefactor(lam, x, z)) * v
            amp = np.exp(complex(y[2], y[3]) + h_of(lam) - h_cp)
            dI = amp * v
            return [v.real, v.imag, dlp.real, dlp.imag, dI.real, dI.imag]

        def ev_depth(t, y):
            return (h_of(complex(y[0], y[1])).real - h_cp.real) + depth_drop
        ev_depth.terminal = True
        ev_depth.direction = -1

        def ev_escape(t, y):
            return abs(complex(y[0], y[1]) - lam_cp) - 60.0 * scale
        ev_escape.terminal = True
        ev_escape.direction = 1

        pole_events = []
        for p, r in radii:
            def ev_pole(t, y, p=p, r=r):
                return abs(complex(y[0], y[1]) - p) - r
            ev_pole.terminal = True
            ev_pole.direction = -1
            pole_events.append(ev_pole)

        y = [seed.real, seed.imag, logp_seed.real, logp_seed.imag,
             I_stub.real, I_stub.imag]
        t_now = 0.0
        t_budget = 400.0 * scale
        end_tag = "truncated"
        ts_all, ys_all = [np.array([0.0])], [np.array(y)[:, None]]
        while t_now < t_budget:
            lam_now = complex(y[0], y[1])
            d_min = min((abs(lam_now - p) - r for p, r in radii),
                        default=np.inf)
            span = float(np.clip(d_min, 1e-3 * scale, 4.0 * scale))
            sol = solve_ivp(rhs, (t_now, t_now + span), y, method="RK45",
                            rtol=1e-10, atol=1e-14, max_step=span / 3.0,
                            events=[ev_depth, ev_escape] + pole_events)
            ts_all.append(sol.t[1:])
            ys_all.append(sol.y[:, 1:])
            y = sol.y[:, -1].tolist()
            t_now = sol.t[-1]
            if sol.status == 1:
                hit = [i for i, te in enumerate(sol.t_events) if len(te)]
                idx = hit[0]
                if idx == 0:
                    end_tag = _terminal_tag(action, complex(y[0], y[1]),
                                            x, z, k0, depth_drop)
                elif idx == 1:
                    end_tag = "escaped"
                else:
                    p = radii[idx - 2][0]
                    j = int(np.argmin(np.abs(action.pole_positions() - p)))
                    end_tag = f"pole:{j}"
                break
            if sol.status < 0:
                raise TraceError(f"descent integration failed: {sol.message}")
        else:
            warnings.warn("descent path exhausted its arc-length budget",
                          stacklevel=2)

        tcat = np.concatenate(ts_all)
        ycat = np.concatenate(ys_all, axis=1)
        lam_path = ycat[0] + 1j * ycat[1]
        segments.append(ContourSegment(
            cp_lam=lam_cp,
            orientation=orientation,
            start_tag=f"critical-point:{lam_cp:.9g}",
            end_tag=end_tag,
            t=tcat,
            lam=lam_path,
            h=np.asarray(h_of(lam_path)),
            log_prefactor_rel=ycat[2] + 1j * ycat[3],
            integral_rel=complex(ycat[4, -1], ycat[5, -1]),
            log_base=h_cp + logp_cp,
        ))
    return segments


def _terminal_tag(action: EinbeinAction, lam: complex, x: float, z: float,
                  k0: float, depth_drop: float) -> str:
    """Endpoint classification when the depth event fires: a path that died
    inside the decay zone of a pole's essential singularity is tagged by
    that pole (the depth drop is reached at distance ~ k0 R / drop, usually
    before the much smaller termination ball)."""
    best = None
    for j, pr in enumerate(action.poles_and_residues(x, z)):
        d = abs(lam - pr.lam)
        if d < 1.5 * k0 * pr.residue / depth_drop and (best is None
                                                      or d < best[1]):
            best = (j, d)
    if best is not None:
        return f"pole:{best[0]}"
    return _wedge_tag(action, lam)


def _wedge_tag(action: EinbeinAction, lam: complex) -> str:
    """Classify a depth-terminated endpoint by decay sector."""
    if action.model == "LinearProfile" and action.a != 0.0:
        # decay sectors of the cubic term exp(-i k0 a^2 L^3 / 12)
        ang = np.angle(lam) % (2.0 * np.pi)
        wedges = [(np.pi / 3, 2 * np.pi / 3), (np.pi, 4 * np.pi / 3),
                  (5 * np.pi / 3, 2 * np.pi)]
        for i, (lo, hi) in enumerate(wedges):
            if lo <= ang <= hi:
                return f"wedge:{i}"
        return "truncated"
    # remaining models decay in the upper half plane via exp(i k0 n^2 L)
    return "wedge:0" if lam.imag > 0 else "truncated"


# ---------------------------------------------------------------------------
# real-axis oracle (weave contour)
# ---------------------------------------------------------------------------

def _branch_fixed_prefactor(action: EinbeinAction, la: complex, lb: complex,
                            k0: float, x: float, z: float,
                            start_sign: float) -> Tuple[Callable, float]:
    """Continuous prefactor along the straight piece la -> lb.

    The principal-branch prefactor jumps sign on the square-root cut;
    P^2 is single valued, so continuity is restored by a piecewise sign.
    Sign-flip breakpoints are located by dense sampling plus bisection.
    Returns (P_cont(s), end_sign) with s in [0, 1].
    """
    def P(s):
        lam = la + np.asarray(s) * (lb - la)
        return np.exp(action.log_prefactor(lam, k0, x, z))

    gap = action.pole_gap()
    step = min(gap, action.scale(x, z)) / 16.0
    n = max(int(abs(lb - la) / step) + 2, 8)
    n = min(n, 4000)
    s_grid = np.linspace(0.0, 1.0, n)
    vals = P(s_grid)
    flips = []
    for i in range(n - 1):
        if abs(vals[i + 1] - vals[i]) > abs(vals[i + 1] + vals[i]):
            lo, hi = s_grid[i], s_grid[i + 1]
            vlo = vals[i]
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                vm = P(mid)
                if abs(vm - vlo) > abs(vm + vlo):
                    hi = mid
                else:
                    lo, vlo = mid, vm
            flips.append(0.5 * (lo + hi))
    flips_arr = np.array(flips)

    def P_cont(s):
        sign = start_sign * (-1.0) ** np.searchsorted(flips_arr, s)
        return sign * P(s)

    end_sign = start_sign * (-1.0) ** len(flips)
    return P_cont, end_sign


def _integrate_piece(action: EinbeinAction, la: complex, lb: complex,
                     k0: float, x: float, z: float, start_sign: float,
                     quad_limit: int) -> Tuple[complex, float]:
    P_cont, end_sign = _branch_fixed_prefactor(action, la, lb, k0, x, z,
                                               start_sign)
    dlam = lb - la

    def f(s):
        lam = la + s * dlam
        return complex(P_cont(s)
                       * np.exp(1j * k0 * action.action(lam, x, z)) * dlam)

    with warnings.catch_warnings():
        # roundoff chatter on e^{+10}-amplitude oscillatory pieces; the
        # nested-depth agreement check guards the actual accuracy
        from scipy.integrate import IntegrationWarning
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(f, 0.0, 1.0, complex_func=True, limit=quad_limit,
                      epsabs=1e-12, epsrel=1e-9)
    return val, end_sign


def _weave_pieces(action: EinbeinAction, x: float, z: float, k0: float,
                  depth_factor: float) -> List[complex]:
    """Corner points of the weave contour for one depth factor."""
    nsc = max(action.n_eff if action.model == "EffectiveCusp" else action.n0,
              1e-12)
    scale = action.scale(x, z)
    recs = action.poles_and_residues(x, z)
    pos_poles = sorted(r.lam for r in recs if r.lam > 1e-12 * scale)
    all_pts = [0.0] + pos_poles
    min_gap = min(np.diff(all_pts)) if len(all_pts) > 1 else scale
    y0 = depth_factor * min(0.3 * min_gap, 10.0 / (k0 * nsc ** 2))

    R0 = [r.residue for r in recs if abs(r.lam) <= 1e-12 * scale][0]
    if k0 * R0 >= 1e-3:
        # start dead inside the decay sector of the origin singularity
        rho = k0 * R0 * np.sqrt(0.5) / 160.0
        start = min(rho, 0.5 * y0 * np.sqrt(2.0)) * np.exp(-1j * np.pi / 4)
    else:
        # transparent origin: the integrand is integrable at 0
        start = 1e-13 * scale + 0.0j

    corners = [start, complex(start.real, -y0)]

    if action.model == "QuadraticChannel":
        gap = action.pole_gap()
        m_exit = action.m_max + 1
        # exit at the first excluded pole whose residue is not transparent
        for mm in range(action.m_max + 1, action.m_max + 4):
            R_exit = (z - (-1.0) ** mm * action.z_s) ** 2 / 4.0
            m_exit = mm
            if k0 * R_exit >= 1e-3:
                break
        x_exit = m_exit * gap
        corners.append(complex(x_exit, -y0))
        delta_end = k0 * R_exit / 160.0
        if delta_end < y0:
            # rise into the dead zone just below the excluded pole
            corners.append(complex(x_exit, -max(delta_end, 1e-9 * gap)))
        return corners

    if action.model == "LinearProfile" and action.a != 0.0:
        c1 = action.n0 ** 2 - action.a * (z + action.z_s) / 2.0
        lam_turn = 2.0 * np.sqrt(c1) / abs(action.a) if c1 > 0 else 0.0
        x_exit = max(1.2 * lam_turn, 1.5 * scale)
        corners.append(complex(x_exit, -y0))
        direction = np.exp(-1j * np.pi / 6)
    else:
        x_exit = (max(pos_poles) if pos_poles else 0.0) + 1.5 * scale
        corners.append(complex(x_exit, -y0))
        direction = np.exp(1j * np.pi / 4)

    # extend the exit ray until the integrand is dead
    t = scale
    end = corners[-1] + t * direction
    for _ in range(40):
        re_h = (1j * k0 * action.action(end, x, z)).real
        if re_h < -60.0:
            break
        t *= 1.6
        end = corners[-1] + t * direction
        if t > 300.0 * scale:
            warnings.warn("exit ray did not reach the dead zone", stacklevel=2)
            break
    corners.append(end)
    return corners


def _weave_once(action: EinbeinAction, x: float, z: float, k0: float,
                depth_factor: float, quad_limit: int) -> complex:
    corners = _weave_pieces(action, x, z, k0, depth_factor)
    total = 0.0 + 0.0j
    sign = 1.0
    for la, lb in zip(corners[:-1], corners[1:]):
        val, sign = _integrate_piece(action, la, lb, k0, x, z, sign,
                                     quad_limit)
        total += val
    return total


def integrate_real_axis(action: EinbeinAction, x: float, z: float, k0: float,
                        damping: float = 1.0, quad_limit: int = 4000
                        ) -> complex:
    """Field value by direct integration of a regularized real-axis contour.

    The contour descends into the decay sector of the origin singularity,
    runs below all on-axis poles at a depth proportional to `damping`,
    and exits through a model-specific decay path; for the channel it
    terminates dead below the first excluded pole, which truncates the
    representation at exactly the strip the descent assembly covers.
    The integral is evaluated at three nested depths and the mutual
    agreement is checked; disagreement raises
    ExtrapolationDivergenceError.
    """
    vals = [_weave_once(action, x, z, k0, damping * f, quad_limit)
            for f in (1.0, 0.5, 0.25)]
    ref = max(abs(v) for v in vals)
    if ref == 0.0:
        return 0.0 + 0.0j
    spread = max(abs(vals[0] - vals[1]), abs(vals[1] - vals[2])) / ref
    if spread > 1e-2:
        raise ExtrapolationDivergenceError(
            f"depth-refined values disagree (spread {spread:.2e}): "
            f"{vals}")
    return 0.5 * (vals[1] + vals[2])


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def assemble_contour(candidates: Sequence[Tuple[CriticalPoint, complex, complex]],
                     oracle: complex, rel_tol: float = 1e-3,
                     k_cap: int = 10) -> AssemblyResult:
    """Pick a signed selection of descent-path values matching the oracle.

    candidates are (cp, pair_integral_rel, log_base) triples; the value
    of candidate j is exp(log_base_j) * pair_integral_rel_j.  All signed
    selections sigma in {-1, 0, +1} over the (at most k_cap) candidates
    that could matter at the oracle's magnitude are tried; the best must
    match within rel_tol or AssemblyError is raised with the closest
    selection attached.  The sign freedom absorbs the square-root branch
    ambiguity of each path's prefactor.
    """
    n = len(candidates)
    logmag = np.full(n, -np.inf)
    for j, (_, D, L0) in enumerate(candidates):
        if D != 0:
            logmag[j] = L0.real + np.log(abs(D))
    log_oracle = np.log(max(abs(oracle), 1e-300))

    active = [j for j in range(n)
              if log_oracle - 34.0 < logmag[j] < log_oracle + 34.0]
    active.sort(key=lambda j: -logmag[j])
    active = active[:k_cap]
    if not active:
        if abs(oracle) < 1e-300:
            return AssemblyResult(0.0j, (0,) * n, 0.0, oracle)
        raise AssemblyError(
            "no descent-path candidate reaches the oracle magnitude",
            best_value=0.0j, best_sigma=(0,) * n, best_mismatch=1.0)

    S = max(logmag[j] for j in active)
    v = np.array([candidates[j][1] * np.exp(candidates[j][2] - S)
                  for j in active])
    o = oracle * np.exp(-S)

    ka = len(active)
    grids = np.meshgrid(*([np.array([-1, 0, 1])] * ka), indexing="ij")
    sig_mat = np.stack([g.ravel() for g in grids], axis=1)
    totals = sig_mat.astype(complex) @ v
    mism = np.abs(totals - o) / abs(o)
    order = np.lexsort((np.sum(np.abs(sig_mat), axis=1), mism))
    ibest = order[0]
    mismatch = float(mism[ibest])
    sigma_act = tuple(int(s) for s in sig_mat[ibest])
    tot = complex(totals[ibest])
    sigma_full = [0] * n
    for jj, j in enumerate(active):
        sigma_full[j] = sigma_act[jj]
    value = tot * np.exp(S)
    if mismatch > rel_tol:
        raise AssemblyError(
            f"best signed selection misses the real-axis value by "
            f"{mismatch:.3e} (tolerance {rel_tol:.1e})",
            best_value=value, best_sigma=tuple(sigma_full),
            best_mismatch=mismatch)
    return AssemblyResult(value, tuple(sigma_full), mismatch, oracle)


def _raise_if_degenerate_symmetry(action: EinbeinAction, x: float, z: float,
                                  k0: float) -> None:
    """A vanishing residue leaves a bare prefactor branch point whose cut
    contribution is not anchored at any stationary point; isolated-path
    assembly cannot represent it and must refuse informatively."""
    scale = action.scale(x, z)
    transparent = [pr for pr in action.poles_and_residues(x, z)
                   if abs(pr.lam) > 1e-12 * scale
                   and k0 * pr.residue < 1e-6]
    if transparent:
        raise DegenerateCriticalPointError(
            "receiver lies on a degenerate symmetry set (pole residue ~ 0 "
            f"at lam={transparent[0].lam:.6g}); the branch-cut "
            "contribution has no stationary-point anchor there.  Move the "
            "receiver off the symmetry set, use the uniform cusp "
            "treatment, or use the real-axis route.")


def integrate_field(action: EinbeinAction, x: float, z: float, k0: float,
                    region: Optional[Tuple[float, float, float, float]] = None,
                    damping: float = 1.0, rel_tol: float = 1e-3,
                    return_segments: bool = False):
    """Assembled descent-contour field at one receiver.

    Stationary points are located, both descent paths are traced from
    each, and the signed assembly is validated against
    integrate_real_axis.  Returns a FieldSample (plus the traced
    segments when return_segments).  Raises DegenerateCriticalPointError
    near caustics and AssemblyError when no selection matches.
    """
    oracle = integrate_real_axis(action, x, z, k0, damping)
    if region is None and action.model == "QuadraticChannel":
        # cover the whole strip the real-axis contour truncates to: every
        # pole interval up to the dead exit below pole m_max + 1
        gap = action.pole_gap()
        region = (1e-3 * gap, (action.m_max + 0.985) * gap,
                  -1.5 * gap, 1.5 * gap)
    cps = find_critical_points(action, x, z, region=region)
    if not cps:
        _raise_if_degenerate_symmetry(action, x, z, k0)
        raise TraceError("no stationary points found in the search region")
    lams = [cp.lam for cp in cps]
    all_segments: List[ContourSegment] = []
    cands = []
    for cp in cps:
        segs = trace_steepest_descent(action, cp, x, z, k0,
                                      other_cps=[l for l in lams
                                                 if l != cp.lam])
        all_segments.extend(segs)
        D = segs[0].integral_rel - segs[1].integral_rel
        cands.append((cp, D, segs[0].log_base))
    try:
        res = assemble_contour(cands, oracle, rel_tol=rel_tol)
    except AssemblyError:
        _raise_if_degenerate_symmetry(action, x, z, k0)
        raise
    sample = FieldSample(x=x, z=z, value=res.value,
                         n_critical_points=len(cps), sigma=res.sigma,
                         oracle_value=oracle, rel_mismatch=res.rel_mismatch)
    if return_segments:
        return sample, all_segments
    return sample


# ---------------------------------------------------------------------------
# quartic canonical integral
# ---------------------------------------------------------------------------

def _pearcey_nodes(zeta2_min: float, abs_z1_max: float, n_per_osc: float = 7.0
                   ) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights for the three-piece contour
    (complex nodes; weights carry the direction factors)."""
    U = max(4.5, 1.5 * np.sqrt(max(-zeta2_min, 0.0) / 2.0) + 2.0)
    rot = np.exp(1j * np.pi / 8)
    # phase rate bound on the central piece sets the panel density
    rate = 4.0 * U ** 3 + 2.0 * abs(zeta2_min) * U + abs_z1_max
    n_panels = int(min(max(40, n_per_osc * rate * (2 * U) / (2 * np.pi)), 6000))
    gl_x, gl_w = np.polynomial.legendre.leggauss(8)
    edges = np.linspace(-U, U, n_panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    nodes_c = (mid[:, None] + half[:, None] * gl_x[None, :]).ravel()
    weights_c = (half[:, None] * gl_w[None, :]).ravel().astype(complex)

    # wings: rapid quartic decay; quadratic grading packs panels at the
    # junction where the decay rate is highest
    t_edges = 6.0 * np.linspace(0.0, 1.0, 161) ** 2
    tm = 0.5 * (t_edges[:-1] + t_edges[1:])
    th = 0.5 * np.diff(t_edges)
    t_nodes = (tm[:, None] + th[:, None] * gl_x[None, :]).ravel()
    t_w = (th[:, None] * gl_w[None, :]).ravel()
    up_nodes = U + t_nodes * rot
    up_w = t_w * rot
    dn_nodes = -U - t_nodes * rot
    dn_w = -t_w * rot  # traversed toward -U: flip restores left-to-right

    nodes = np.concatenate([dn_nodes[::-1], nodes_c, up_nodes])
    weights = np.concatenate([-dn_w[::-1], weights_c, up_w])
    return nodes, weights


def pearcey(zeta2: float, zeta1: float) -> complex:
    """Canonical quartic integral
    P(zeta2, zeta1) = integral exp(i (u^4 + zeta2 u^2 + zeta1 u)) du
    over the real line, by adaptive quadrature on a contour whose wings
    leave through the quartic decay directions (angle pi/8).  Accurate to
    ~1e-10 absolute over |zeta| <= 50."""
    U = max(4.5, 1.5 * np.sqrt(abs(zeta2) / 2.0) + 2.0)
    rot = np.exp(1j * np.pi / 8)

    def phase(u):
        return np.exp(1j * (u ** 4 + zeta2 * u ** 2 + zeta1 * u))

    def f_central(s):
        return complex(phase(s))

    def f_wing_up(t):
        u = U + t * rot
        return complex(phase(u) * rot)

    def f_wing_dn(t):
        u = -U - t * rot
        return complex(phase(u) * rot)

    with warnings.catch_warnings():
        from scipy.integrate import IntegrationWarning
        warnings.simplefilter("ignore", IntegrationWarning)
        c, _ = quad(f_central, -U, U, complex_func=True, limit=12000,
                    epsabs=1e-12, epsrel=1e-12)
        wu, _ = quad(f_wing_up, 0.0, 6.0, complex_func=True, limit=400,
                     epsabs=1e-13, epsrel=1e-12)
        wd, _ = quad(f_wing_dn, 0.0, 6.0, complex_func=True, limit=400,
                     epsabs=1e-13, epsrel=1e-12)
    return wd + c + wu


def pearcey_grid(zeta2: np.ndarray, zeta1: np.ndarray) -> np.ndarray:
    """Vectorized canonical integral on a grid: returns P[i, j] for
    zeta2[i], zeta1[j] via composite fixed-node quadrature on the shared
    contour."""
    z2 = np.asarray(zeta2, dtype=float)
    z1 = np.asarray(zeta1, dtype=float)
    nodes, wts = _pearcey_nodes(float(np.min(z2)), float(np.max(np.abs(z1))))
    out = np.empty((z2.size, z1.size), dtype=complex)
    base = nodes ** 4
    sq = nodes ** 2
    for i, a2 in enumerate(z2.ravel()):
        e2 = base + a2 * sq
        for j, a1 in enumerate(z1.ravel()):
            out[i, j] = np.sum(wts * np.exp(1j * (e2 + a1 * nodes)))
    return out


def pearcey_map(action: EinbeinAction, x: float, z: float, k0: float
                ) -> PearceyArguments:
    """Map a receiver near a cusp to canonical quartic arguments.

    Works in ghost coordinates (r1 along the propagation axis, r2
    transverse); Omega = 2 n_eff mu is the cusp distance.  The trust
    neighborhood is |r1 - Omega|, |r2| <= 0.3 Omega.
    """
    if action.model == "SimpleCusp":
        r1, r2 = z, x
        mu, n_eff = action.mu, action.n0
    elif action.model == "EffectiveCusp":
        eff = action.effective_at(x, z)
        r1, r2 = eff.r1, eff.r2
        mu, n_eff = action.mu, eff.n_local
    else:
        raise ValueError("pearcey_map needs a cusp-type action model")
    omega = 2.0 * n_eff * mu
    dr1 = r1 - omega
    zeta2 = np.sqrt(k0 / mu) * dr1
    zeta1 = k0 ** 0.75 * mu ** -0.75 * np.sqrt(omega) * r2
    chi = r2 / omega
    gam = dr1 / omega
    phase = 1j * k0 * (omega ** 2 / mu) * (0.75 * np.abs(chi) ** (2.0 / 3.0)
                                           + 2.0 * gam)
    jac = mu ** 0.25 * k0 ** -0.75 * n_eff ** -0.5 / np.sqrt(2.0 * np.pi)
    trust = (abs(dr1) <= 0.3 * omega) and (abs(r2) <= 0.3 * omega)
    return PearceyArguments(zeta2=float(zeta2), zeta1=float(zeta1),
                            phase=complex(phase), jacobian=float(jac),
                            within_trust=bool(trust))


def uniform_cusp_field(action: EinbeinAction, x: float, z: float, k0: float
                       ) -> complex:
    """Uniform field near the cusp: carrier * jacobian * P(zeta2, zeta1).

    The amplitude is reliable inside the trust neighborhood; the overall
    phase convention of the carrier is fixed only up to the branch choice
    of the fractional power in the mapping phase.
    """
    args = pearcey_map(action, x, z, k0)
    if action.model == "SimpleCusp":
        mu, n_eff, r1 = action.mu, action.n0, z
    else:
        eff = action.effective_at(x, z)
        mu, n_eff, r1 = action.mu, eff.n_local, eff.r1
    carrier = np.exp(1j * k0 * (n_eff ** 2 * mu + r1 ** 2 / (4.0 * mu))
                     + args.phase)
    return complex(args.jacobian * carrier * pearcey(args.zeta2, args.zeta1))
