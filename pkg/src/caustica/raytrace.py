"""Ray tracing with variational (Jacobi-field) caustic detection.

Rays follow dX/ds = P, dP/ds = grad(n^2)/2 with |P(0)| = n(source), so
|P| = n holds along the trajectory and s is the sigma-parameter (not arc
length).  Each ray co-integrates the derivative of (X, P) with respect
to the launch parameter; the transverse jacobian
J = Px * eta - Pz * xi vanishes exactly where neighboring rays cross,
which is how folds are located.  Fold points chained across the fan form
caustic branches; a tangent reversal along a branch marks a cusp, which
is then refined by a golden-section search on the branch speed.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .profiles import DomainError, ProfileModel

__all__ = [
    "CausticSet",
    "CuspPoint",
    "Fan",
    "Ray",
    "count_arrivals",
    "extract_caustics",
    "ray_fan",
    "trace_ray",
    "worker_count",
]


def worker_count() -> int:
    """Thread-pool width, capped by the CAUSTICA_THREADS environment
    variable (default: up to 4)."""
    cap = os.environ.get("CAUSTICA_THREADS", "")
    try:
        n = int(cap)
    except ValueError:
        n = 0
    if n <= 0:
        n = min(os.cpu_count() or 1, 4)
    return max(1, n)


@dataclass
class Ray:
    """One traced ray with its variational jacobian.

    param is the launch parameter (angle for an angle fan, transverse
    offset for a line fan); arrays are sampled on the trace grid.  The
    dense solution is kept for root refinement.
    """

    param: float
    s: np.ndarray
    x: np.ndarray
    z: np.ndarray
    px: np.ndarray
    pz: np.ndarray
    jac: np.ndarray
    _dense: object = field(default=None, repr=False, compare=False)

    def state_at(self, s: float) -> np.ndarray:
        return self._dense.sol(s)

    def jac_at(self, s: float) -> float:
        y = self._dense.sol(s)
        return y[2] * y[5] - y[3] * y[4]

    def point_at(self, s: float) -> Tuple[float, float]:
        y = self._dense.sol(s)
        return float(y[0]), float(y[1])


@dataclass
class Fan:
    """A family of rays over a launch-parameter grid."""

    rays: List[Ray]
    seeding: str
    source: Tuple[float, float]

    @property
    def params(self) -> np.ndarray:
        return np.array([r.param for r in self.rays])


@dataclass(frozen=True)
class CuspPoint:
    x: float
    z: float
    param: float
    s: float


@dataclass
class CausticSet:
    """Fold points, chained branches, refined cusps, and branch
    self-intersections extracted from a fan."""

    points: np.ndarray          # (N, 2) fold points
    kinds: List[str]            # per point: "fold"
    chains: List[np.ndarray]    # (M_i, 2) polylines in launch order
    chain_members: List[List[Tuple[int, float]]]  # (ray index, s) per vertex
    cusps: List[CuspPoint]
    self_intersections: np.ndarray  # (K, 2)


def _fast_derivs(profile: ProfileModel):
    """Scalar-math closures (dn2/dz, d2n2/dz2) for the hot ODE loop.

    Same formulas as the vectorized profile evaluation; the generic path
    is kept for perturbed profiles.  Agreement is pinned by tests.
    """
    if profile.omega is not None and profile.omega_strength != 0.0:
        return (lambda z: float(profile.eval_grad_n_squared(0.0, z)[1]),
                lambda z: float(profile.eval_d2n2_dz2(0.0, z)))
    k = profile.kind
    if k == "Constant":
        return (lambda z: 0.0), (lambda z: 0.0)
    if k == "LinearSquared":
        a = profile.a
        return (lambda z: -a), (lambda z: 0.0)
    if k == "QuadraticChannel":
        al = profile.alpha
        return (lambda z: -2.0 * al * z), (lambda z: -2.0 * al)
    if k == "Munk":
        eps, zc = profile.epsilon, profile.z_c
        c = 2.0 / zc

        def gz(z):
            eta = c * (z - zc)
            E = math.exp(min(-eta, 600.0))
            invD = 1.0 / (1.0 + eps * (eta - 1.0 + E))
            Dz = eps * (1.0 - E) * c
            return -2.0 * (invD * Dz) * (invD * invD)

        def d2(z):
            eta = c * (z - zc)
            E = math.exp(min(-eta, 600.0))
            invD = 1.0 / (1.0 + eps * (eta - 1.0 + E))
            Dz = eps * (1.0 - E) * c
            Dzz = eps * E * c * c
            r = invD * Dz
            q = invD * Dzz
            return (6.0 * r * r - 2.0 * q) * (invD * invD)
        return gz, d2
    if k == "PerturbedChannel":
        al, sg, rho, za = (profile.alpha, profile.sigma, profile.rho,
                           profile.z_axis)

        def gz(z):
            u = z - za
            ru2 = rho * u * u
            return -2.0 * al * u - 2.0 * sg * u * (1.0 - ru2) * math.exp(-ru2)

        def d2(z):
            u = z - za
            ru2 = rho * u * u
            return (-2.0 * al
                    - 2.0 * sg * (1.0 - 5.0 * ru2 + 2.0 * ru2 * ru2)
                    * math.exp(-ru2))
        return gz, d2
    return (lambda z: float(profile.eval_grad_n_squared(0.0, z)[1]),
            lambda z: float(profile.eval_d2n2_dz2(0.0, z)))


def _rhs(profile: ProfileModel):
    gz_f, d2_f = _fast_derivs(profile)

    def rhs(s, y):
        z = y[1]
        return [y[2], y[3], 0.0, 0.5 * gz_f(z),
                y[6], y[7], 0.0, 0.5 * d2_f(z) * y[5]]
    return rhs


def trace_ray(profile: ProfileModel, source: Tuple[float, float],
              param: float, s_max: float, seeding: str = "angle",
              mu: float = 1.0, n_samples: int = 800,
              rtol: float = 1e-10, atol: float = 1e-12) -> Ray:
    """Trace one ray and its Jacobi field.

    seeding "angle": param is the launch angle theta from the +x axis,
    P(0) = n(source) (cos theta, sin theta), variations with respect to
    theta.  seeding "line": param is a transverse offset x0; the ray
    starts at (x0, source_z) with the quadratic initial phase of focal
    parameter mu, P(0) = (-x0/(2 mu), sqrt(n^2 - (x0/(2 mu))^2)),
    variations with respect to x0.
    """
    xs, zs = source
    if seeding == "angle":
        ns = profile.n(xs, zs)  # raises DomainError when n^2 < 0
        x0, z0 = xs, zs
        p0 = (ns * np.cos(param), ns * np.sin(param))
        v0 = (0.0, 0.0)
        q0 = (-ns * np.sin(param), ns * np.cos(param))
    elif seeding == "line":
        x0, z0 = xs + param, zs
        ns = profile.n(x0, z0)
        px0 = -param / (2.0 * mu)
        pz_sq = ns ** 2 - px0 ** 2
        if pz_sq <= 0.0:
            raise DomainError("launch offset exceeds the aperture: "
                              "transverse momentum above n")
        pz0 = np.sqrt(pz_sq)
        p0 = (px0, pz0)
        v0 = (1.0, 0.0)
        # d pz / d x0 = px * (d px / d x0) * (-1/pz) = px / (2 mu pz)
        q0 = (-1.0 / (2.0 * mu), px0 / (2.0 * mu) / pz0)
    else:
        raise ValueError(f"unknown seeding {seeding!r}")

    y0 = [x0, z0, p0[0], p0[1], v0[0], v0[1], q0[0], q0[1]]
    s_eval = np.linspace(0.0, s_max, n_samples)
    sol = solve_ivp(_rhs(profile), (0.0, s_max), y0, method="RK45",
                    rtol=rtol, atol=atol, dense_output=True, t_eval=s_eval)
    if not sol.success:
        raise RuntimeError(f"ray integration failed: {sol.message}")
    x, z, px, pz, xi, eta, _, _ = sol.y
    jac = px * sol.y[5] - pz * sol.y[4]
    return Ray(param=float(param), s=s_eval, x=x, z=z, px=px, pz=pz,
               jac=jac, _dense=sol)


def ray_fan(profile: ProfileModel, source: Tuple[float, float],
            params: Sequence[float], s_max: float, seeding: str = "angle",
            mu: float = 1.0, n_samples: int = 800,
            rtol: float = 1e-10, atol: float = 1e-12) -> Fan:
    """Trace a fan of rays over the launch-parameter grid."""
    def one(p):
        return trace_ray(profile, source, p, s_max, seeding=seeding,
                         mu=mu, n_samples=n_samples, rtol=rtol, atol=atol)

    nw = worker_count()
    if nw > 1 and len(params) > 8:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            rays = list(ex.map(one, params))
    else:
        rays = [one(p) for p in params]
    return Fan(rays=rays, seeding=seeding, source=tuple(source))


# ---------------------------------------------------------------------------
# caustic extraction
# ---------------------------------------------------------------------------

def _fold_events(ray: Ray) -> List[Tuple[float, float, float]]:
    """Roots of the jacobian along one ray: (s, x, z), refined on the
    dense solution."""
    out = []
    j = ray.jac
    for i in np.flatnonzero(np.sign(j[:-1]) * np.sign(j[1:]) < 0):
        s_root = brentq(ray.jac_at, ray.s[i], ray.s[i + 1],
                        xtol=1e-12 * max(ray.s[-1], 1.0))
        x, z = ray.point_at(s_root)
        out.append((s_root, x, z))
    return out


def _chain_folds(fan: Fan, events: List[List[Tuple[float, float, float]]],
                 max_gap: int = 3) -> Tuple[List[np.ndarray],
                                            List[List[Tuple[int, float]]]]:
    """Chain per-ray fold events into branches by nearest-s continuation."""
    chains: List[dict] = []
    done: List[dict] = []
    for ir, evs in enumerate(events):
        free = list(evs)
        # continue open chains with the nearest remaining event in s
        for ch in chains:
            if not free:
                break
            s_last = ch["s"][-1]
            k = int(np.argmin([abs(e[0] - s_last) for e in free]))
            cand = free[k]
            ds_tol = 0.35 * (ch["ds"] if ch["ds"] else max(s_last, 1.0))
            if abs(cand[0] - s_last) <= max(ds_tol, 0.05 * max(s_last, 1.0)):
                free.pop(k)
                ch["ds"] = abs(cand[0] - s_last) or ch["ds"]
                ch["s"].append(cand[0])
                ch["pts"].append((cand[1], cand[2]))
                ch["members"].append((ir, cand[0]))
                ch["last_ray"] = ir
        for e in free:
            chains.append({"s": [e[0]], "pts": [(e[1], e[2])],
                           "members": [(ir, e[0])], "last_ray": ir,
                           "ds": 0.0})
        still = []
        for ch in chains:
            if ir - ch["last_ray"] > max_gap:
                done.append(ch)
            else:
                still.append(ch)
        chains = still
    done.extend(chains)
    polylines = [np.array(ch["pts"]) for ch in done if len(ch["pts"]) >= 2]
    members = [ch["members"] for ch in done if len(ch["pts"]) >= 2]
    return polylines, members


def _branch_point(profile: ProfileModel, fan: Fan, param: float,
                  s_guess: float, s_window: float, mu: float
                  ) -> Optional[Tuple[float, float, float]]:
    """Fold point of the branch near s_guess for a freshly traced ray."""
    ray = trace_ray(profile, fan.source, param,
                    s_guess + 1.2 * s_window, seeding=fan.seeding, mu=mu,
                    n_samples=2, rtol=1e-9, atol=1e-11)
    lo = max(s_guess - s_window, 1e-9)
    hi = min(s_guess + s_window, ray.s[-1])
    ss = np.linspace(lo, hi, 41)
    jj = np.array([ray.jac_at(s) for s in ss])
    sign_flip = np.flatnonzero(np.sign(jj[:-1]) * np.sign(jj[1:]) < 0)
    if len(sign_flip) == 0:
        return None
    i = sign_flip[np.argmin(np.abs(ss[sign_flip] - s_guess))]
    s_root = brentq(ray.jac_at, ss[i], ss[i + 1])
    x, z = ray.point_at(s_root)
    return s_root, x, z


def _refine_cusp(profile: ProfileModel, fan: Fan, p_lo: float, p_hi: float,
                 s_guess: float, s_window: float, mu: float
                 ) -> Optional[CuspPoint]:
    """Golden-section minimization of the branch speed |dF/dparam|^2; at a
    cusp the fold curve is stationary in the launch parameter."""
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    dp = (p_hi - p_lo) / 64.0

    def speed2(p):
        a = _branch_point(profile, fan, p - dp, s_guess, s_window, mu)
        b = _branch_point(profile, fan, p + dp, s_guess, s_window, mu)
        if a is None or b is None:
            return np.inf
        return ((b[1] - a[1]) ** 2 + (b[2] - a[2]) ** 2) / (2 * dp) ** 2

    a, b = p_lo, p_hi
    span0 = b - a
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc, fd = speed2(c), speed2(d)
    for _ in range(25):
        if b - a < 1e-3 * span0 + 1e-9:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = speed2(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = speed2(d)
    p_star = 0.5 * (a + b)
    hit = _branch_point(profile, fan, p_star, s_guess, s_window, mu)
    if hit is None:
        return None
    return CuspPoint(x=hit[1], z=hit[2], param=p_star, s=hit[0])


def _segment_intersections(poly: np.ndarray) -> List[Tuple[float, float]]:
    """Self-intersections of one polyline (non-adjacent segment pairs,
    bounding-box prefilter)."""
    n = len(poly) - 1
    if n < 3:
        return []
    a = poly[:-1]
    b = poly[1:]
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    out = []
    for i in range(n - 2):
        for j in range(i + 2, n):
            if (lo[i, 0] > hi[j, 0] or lo[j, 0] > hi[i, 0]
                    or lo[i, 1] > hi[j, 1] or lo[j, 1] > hi[i, 1]):
                continue
            p, r = a[i], b[i] - a[i]
            q, s = a[j], b[j] - a[j]
            denom = r[0] * s[1] - r[1] * s[0]
            if denom == 0.0:
                continue
            qp = q - p
            t = (qp[0] * s[1] - qp[1] * s[0]) / denom
            u = (qp[0] * r[1] - qp[1] * r[0]) / denom
            if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
                out.append(tuple(p + t * r))
    return out


def extract_caustics(fan: Fan, profile: Optional[ProfileModel] = None,
                     mu: float = 1.0, refine_cusps: bool = True
                     ) -> CausticSet:
    """Fold points, branches, cusps, and branch self-intersections.

    Folds are jacobian zeros per ray, chained across the fan by
    nearest-s continuation.  A cusp is declared where the branch tangent
    reverses by more than pi/2 within three consecutive fold points, and
    (when the profile is supplied) refined by a golden-section search on
    the branch speed.
    """
    events = [_fold_events(r) for r in fan.rays]
    chains, members = _chain_folds(fan, events)

    pts = [e[1:] for evs in events for e in evs]
    points = np.array(pts) if pts else np.zeros((0, 2))
    kinds = ["fold"] * len(points)

    cusps: List[CuspPoint] = []
    params = fan.params
    for poly, mem in zip(chains, members):
        if len(poly) < 3:
            continue
        tang = np.diff(poly, axis=0)
        norm = np.linalg.norm(tang, axis=1)
        ok = norm > 0
        for i in range(len(tang) - 1):
            if not (ok[i] and ok[i + 1]):
                continue
            cosang = np.dot(tang[i], tang[i + 1]) / (norm[i] * norm[i + 1])
            if cosang < 0.0:  # reversal sharper than pi/2
                ir_lo = mem[max(i - 1, 0)][0]
                ir_hi = mem[min(i + 2, len(mem) - 1)][0]
                s_mid = mem[i + 1][1]
                s_win = max(abs(mem[min(i + 2, len(mem) - 1)][1]
                                - mem[max(i - 1, 0)][1]), 1e-3 * s_mid)
                if refine_cusps and profile is not None:
                    cp = _refine_cusp(profile, fan,
                                      min(params[ir_lo], params[ir_hi]),
                                      max(params[ir_lo], params[ir_hi]),
                                      s_mid, s_win, mu)
                    if cp is not None:
                        cusps.append(cp)
                        continue
                cusps.append(CuspPoint(x=poly[i + 1, 0], z=poly[i + 1, 1],
                                       param=params[mem[i + 1][0]],
                                       s=mem[i + 1][1]))

    inter = []
    for poly in chains:
        inter.extend(_segment_intersections(poly))
    self_pts = np.array(inter) if inter else np.zeros((0, 2))

    return CausticSet(points=points, kinds=kinds, chains=chains,
                      chain_members=members, cusps=cusps,
                      self_intersections=self_pts)


def count_arrivals(fan: Fan, point: Tuple[float, float], radius: float
                   ) -> int:
    """Number of distinct ray arrivals at a receiver: rays passing within
    radius, grouped into maximal consecutive runs of the launch grid
    (each run is one geometric branch)."""
    px, pz = point
    near = []
    for ray in fan.rays:
        d2 = (ray.x - px) ** 2 + (ray.z - pz) ** 2
        near.append(np.min(d2) <= radius * radius)
    runs = 0
    prev = False
    for flag in near:
        if flag and not prev:
            runs += 1
        prev = flag
    return runs
