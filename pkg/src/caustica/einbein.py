"""Exact path-length actions: stationary points, poles, ghost geometry.

The field at a receiver is represented as a contour integral over one
complex path-length-like variable Lambda,

    phi(x, z) = integral P(Lambda) exp(i k0 Sbar(Lambda; x, z)) dLambda,

with Sbar an exact Lambda-meromorphic action and P a slowly varying
prefactor.  This module owns the closed forms: evaluation of Sbar and its
Lambda-derivatives, prefactor logarithms, pole positions and residues,
grid-seeded Newton stationary-point search, ghost-source geometry, cusp
prediction, Laurent coefficients, and the first-order PDE system obeyed
by every residue as a function of the receiver point.

Supported action models
-----------------------
LinearProfile     n2 = n0^2 - a z (a = 0 reproduces the uniform medium):
                  Sbar = R^2/(4 L) + L (n0^2 - a (z + z_s)/2) - a^2 L^3 / 12,
                  R^2 = (x - x_s)^2 + (z - z_s)^2.
SimpleCusp        line source on z = 0 with a focusing phase of focal
                  length parameter mu:
                  Sbar = x^2/(4 (L - mu)) + z^2/(4 L) + L n0^2.
QuadraticChannel  n2 = n0^2 - alpha z^2:
                  Sbar = (x - x_s)^2/(4 L) + L n0^2
                       + (sqrt(alpha)/2) [(z^2 + z_s^2) cos w - 2 z z_s]/sin w,
                  w = 2 sqrt(alpha) L.  Poles at L_m = pi m / (2 sqrt(alpha)).
EffectiveCusp     cusp model in ghost coordinates (r1 along the propagation
                  axis from the ghost source, r2 transverse):
                  Sbar = r1^2/(4 L) + r2^2/(4 (L - mu)) + L (n_eff - B r2)^2.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "ACTION_MODELS",
    "CriticalPoint",
    "CuspPrediction",
    "EffectiveCuspAction",
    "EinbeinAction",
    "GhostSource",
    "PoleResidue",
    "action_derivative",
    "action_for_profile",
    "caustic_curve_from_effective",
    "channel_action",
    "cusp_action",
    "effective_cusp_for_ghost",
    "exact_action",
    "find_critical_points",
    "ghost_sources",
    "laurent_gamma1",
    "linear_action",
    "poles_and_residues",
    "predict_cusps",
    "residue_pde_residuals",
]

ACTION_MODELS = ("LinearProfile", "SimpleCusp", "QuadraticChannel", "EffectiveCusp")

_LOG_PREFACTOR_MODES = ("exact", "ignored")


@dataclass(frozen=True)
class CriticalPoint:
    """One stationary point of Lambda -> Sbar(Lambda; x, z).

    classification is "real" for stationary points on the real axis and
    "complex-pair member" for one member of a complex-conjugate pair.
    """

    lam: complex
    action_value: complex
    second_derivative: complex
    classification: str


@dataclass(frozen=True)
class PoleResidue:
    """A pole of the action with its receiver-dependent residue.

    codim is the codimension of the residue-vanishing locus: 2 when the
    residue vanishes only at an isolated point (a true source image), 1
    when it vanishes on a curve (a ghost source line).  m labels channel
    poles; 0 is the origin pole.
    """

    lam: float
    residue: float
    codim: int
    m: int


@dataclass(frozen=True)
class GhostSource:
    """A ghost source: the point where a pole's residue vanishes, together
    with the pole position and the local effective index."""

    m: int
    lam_pole: float
    point: Tuple[float, float]
    n_eff: float


@dataclass(frozen=True)
class CuspPrediction:
    """Predicted cusp location for one ghost source.

    distance is the propagation distance 2 n_eff * lam_pole from the true
    source to the cusp; x_offsets are the two horizontal offsets
    +- sqrt(distance^2 - (z - z_s)^2) about the source range (empty when
    the square root has no real value); points are the resulting (x, z)
    pairs.
    """

    m: int
    lam_pole: float
    z: float
    distance: float
    x_offsets: Tuple[float, ...]
    points: Tuple[Tuple[float, float], ...]


@dataclass(frozen=True)
class EffectiveCuspAction:
    """Point-bound cusp action in ghost coordinates.

    r1: signed distance along the propagation axis from the ghost source.
    r2: signed transverse offset from the ghost line.
    mu: pole position (the collapsed path-length parameter).
    n_eff: effective index at the ghost source.
    B: asymmetry slope; the local index is n_eff - B r2.
    """

    r1: float
    r2: float
    mu: float
    n_eff: float
    B: float = 0.0

    @property
    def n_local(self) -> float:
        return self.n_eff - self.B * self.r2

    def action(self, lam):
        lam = np.asarray(lam, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.r1 ** 2 / (4.0 * lam)
                   + self.r2 ** 2 / (4.0 * (lam - self.mu))
                   + lam * self.n_local ** 2)
        return out if out.ndim else complex(out)

    def derivative(self, lam, order: int = 1):
        lam = np.asarray(lam, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            if order == 1:
                out = (-self.r1 ** 2 / (4.0 * lam ** 2)
                       - self.r2 ** 2 / (4.0 * (lam - self.mu) ** 2)
                       + self.n_local ** 2)
            elif order == 2:
                out = (self.r1 ** 2 / (2.0 * lam ** 3)
                       + self.r2 ** 2 / (2.0 * (lam - self.mu) ** 3))
            else:
                raise ValueError("order must be 1 or 2")
        return out if out.ndim else complex(out)

    def log_prefactor(self, lam, k0: float):
        lam = np.asarray(lam, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 0.5 * (np.log(1j * self.mu / (4.0 * np.pi * k0))
                         - np.log(lam) - np.log(lam - self.mu))
        return out if out.ndim else complex(out)

    def dlog_prefactor(self, lam):
        lam = np.asarray(lam, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -0.5 * (1.0 / lam + 1.0 / (lam - self.mu))
        return out if out.ndim else complex(out)


@dataclass(frozen=True)
class EinbeinAction:
    """Closed-form action for one of the soluble models.

    Evaluation methods take the receiver point (x, z) and complex lam; the
    source sits at (x_s, z_s).  For EffectiveCusp the receiver is mapped to
    ghost coordinates through ghost_point / axis_unit / trans_unit, and
    (x_s, z_s) is unused.

    log_prefactor_mode is "exact" (default: the prefactor that makes the
    integrand solve the path-length Schrodinger equation exactly) or
    "ignored" (prefactor suppressed; some stationary-phase bookkeeping
    wants the bare exponential).
    """

    model: str
    n0: float = 1.0
    a: float = 0.0
    alpha: float = 0.0
    m_max: int = 8
    x_s: float = 0.0
    z_s: float = 0.0
    mu: float = 0.0
    n_eff: float = 1.0
    B: float = 0.0
    ghost_point: Tuple[float, float] = (0.0, 0.0)
    axis_unit: Tuple[float, float] = (1.0, 0.0)
    trans_unit: Tuple[float, float] = (0.0, 1.0)
    log_prefactor_mode: str = "exact"

    def __post_init__(self) -> None:
        if self.model not in ACTION_MODELS:
            raise ValueError(f"unknown action model: {self.model!r}")
        if self.log_prefactor_mode not in _LOG_PREFACTOR_MODES:
            raise ValueError("log_prefactor_mode must be 'exact' or 'ignored'")
        if self.model == "QuadraticChannel" and self.alpha <= 0:
            raise ValueError("QuadraticChannel needs alpha > 0")
        if self.model in ("SimpleCusp", "EffectiveCusp") and self.mu <= 0:
            raise ValueError("cusp models need mu > 0")
        if self.model == "QuadraticChannel" and self.m_max < 1:
            raise ValueError("m_max must be at least 1")

    # -- geometry helpers -------------------------------------------------

    def effective_at(self, x: float, z: float) -> EffectiveCuspAction:
        """Ghost-coordinate view of a receiver point (EffectiveCusp only)."""
        if self.model != "EffectiveCusp":
            raise ValueError("effective_at is defined for EffectiveCusp")
        dx = x - self.ghost_point[0]
        dz = z - self.ghost_point[1]
        r1 = dx * self.axis_unit[0] + dz * self.axis_unit[1]
        r2 = dx * self.trans_unit[0] + dz * self.trans_unit[1]
        return EffectiveCuspAction(r1=r1, r2=r2, mu=self.mu,
                                   n_eff=self.n_eff, B=self.B)

    def scale(self, x: float, z: float) -> float:
        """Characteristic Lambda scale at a receiver: sets grid extents,
        dedupe tolerances, and default search regions."""
        if self.model == "LinearProfile":
            R = np.hypot(x - self.x_s, z - self.z_s)
            s = R / (2.0 * max(self.n0, 1e-12))
            c1 = self.n0 ** 2 - self.a * (z + self.z_s) / 2.0
            if self.a != 0.0 and c1 > 0.0:
                s += 2.0 * np.sqrt(c1) / abs(self.a)
            return max(s, 1e-12)
        if self.model == "SimpleCusp":
            return self.mu + (abs(x) + abs(z)) / (2.0 * max(self.n0, 1e-12))
        if self.model == "QuadraticChannel":
            return (self.m_max + 1) * np.pi / (2.0 * np.sqrt(self.alpha))
        eff = self.effective_at(x, z)
        return self.mu + abs(eff.r1) / (2.0 * max(self.n_eff, 1e-12))

    def pole_gap(self) -> float:
        """Minimal spacing between poles (grid pitch unit)."""
        if self.model == "QuadraticChannel":
            return np.pi / (2.0 * np.sqrt(self.alpha))
        if self.model in ("SimpleCusp", "EffectiveCusp"):
            return self.mu
        return np.inf

    # -- action evaluation ------------------------------------------------

    def action(self, lam, x: float, z: float):
        """Sbar(lam; x, z), complex and vectorized over lam."""
        lam = np.asarray(lam, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.model == "LinearProfile":
                R2 = (x - self.x_s) ** 2 + (z - self.z_s) ** 2
                c1 = self.n0 ** 2 - self.a * (z + self.z_s) / 2.0
                out = R2 / (4.0 * lam) + lam * c1 - self.a ** 2 * lam ** 3 / 12.0
            elif self.model == "SimpleCusp":
                out = (x ** 2 / (4.0 * (lam - self.mu))
                       + z ** 2 / (4.0 * lam) + lam * self.n0 ** 2)
            elif self.model == "QuadraticChannel":
                ra = np.sqrt(self.alpha)
                w = 2.0 * ra * lam
                out = ((x - self.x_s) ** 2 / (4.0 * lam) + lam * self.n0 ** 2
                       + (ra / 2.0) * ((z ** 2 + self.z_s ** 2) * np.cos(w)
                                       - 2.0 * z * self.z_s) / np.sin(w))
            else:
                return self.effective_at(x, z).action(lam)
        return out if out.ndim else complex(out)

    def derivative(self, lam, x: float, z: float, order: int = 1):
        """d^order Sbar / d lam^order, order 1 or 2."""
        if order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        lam = np.asarray(lam, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.model == "LinearProfile":
                R2 = (x - self.x_s) ** 2 + (z - self.z_s) ** 2
                c1 = self.n0 ** 2 - self.a * (z + self.z_s) / 2.0
                if order == 1:
                    out = -R2 / (4.0 * lam ** 2) + c1 - self.a ** 2 * lam ** 2 / 4.0
                else:
                    out = R2 / (2.0 * lam ** 3) - self.a ** 2 * lam / 2.0
            elif self.model == "SimpleCusp":
                if order == 1:
                    out = (-x ** 2 / (4.0 * (lam - self.mu) ** 2)
                           - z ** 2 / (4.0 * lam ** 2) + self.n0 ** 2)
                else:
                    out = (x ** 2 / (2.0 * (lam - self.mu) ** 3)
                           + z ** 2 / (2.0 * lam ** 3))
            elif self.model == "QuadraticChannel":
                ra = np.sqrt(self.alpha)
                w = 2.0 * ra * lam
                A = (x - self.x_s) ** 2
                s, c = np.sin(w), np.cos(w)
                zz = z * z + self.z_s * self.z_s
                cross = 2.0 * z * self.z_s
                if order == 1:
                    out = (-A / (4.0 * lam ** 2) + self.n0 ** 2
                           + self.alpha * (cross * c - zz) / s ** 2)
                else:
                    out = (A / (2.0 * lam ** 3)
                           + 2.0 * self.alpha * ra
                           * (2.0 * zz * c - cross * (1.0 + c * c)) / s ** 3)
            else:
                return self.effective_at(x, z).derivative(lam, order)
        return out if out.ndim else complex(out)

    # -- prefactor --------------------------------------------------------

    def log_prefactor(self, lam, k0: float, x: float = 0.0, z: float = 0.0):
        """Principal-branch log P(lam).

        P is the prefactor that makes P exp(i k0 Sbar) solve the
        path-length Schrodinger equation; it is independent of the
        receiver for every supported model.  Branch cuts of the principal
        logs must be handled by continuous continuation along contours
        (the tracing code does this); pointwise values may sit on the
        wrong sheet far from the positive real axis.
        """
        if self.log_prefactor_mode == "ignored":
            lam = np.asarray(lam, dtype=complex)
            out = np.zeros_like(lam)
            return out if out.ndim else complex(out)
        lam = np.asarray(lam, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.model == "LinearProfile":
                out = -np.log(4.0 * np.pi) - np.log(lam)
            elif self.model == "SimpleCusp":
                out = 0.5 * (np.log(1j * self.mu / (4.0 * np.pi * k0))
                             - np.log(lam) - np.log(lam - self.mu))
            elif self.model == "QuadraticChannel":
                ra = np.sqrt(self.alpha)
                w = 2.0 * ra * lam
                # branch fixed so P -> +1/(4 pi lam) as lam -> 0+
                out = (np.log(1.0 / (2.0 * np.sqrt(2.0) * np.pi))
                       + 0.5 * (np.log(ra) - np.log(lam) - np.log(np.sin(w))))
            else:
                return self.effective_at(x, z).log_prefactor(lam, k0)
        return out if out.ndim else complex(out)

    def dlog_prefactor(self, lam, x: float = 0.0, z: float = 0.0):
        """d log P / d lam (independent of k0)."""
        if self.log_prefactor_mode == "ignored":
            lam = np.asarray(lam, dtype=complex)
            out = np.zeros_like(lam)
            return out if out.ndim else complex(out)
        lam = np.asarray(lam, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.model == "LinearProfile":
                out = -1.0 / lam
            elif self.model == "SimpleCusp":
                out = -0.5 * (1.0 / lam + 1.0 / (lam - self.mu))
            elif self.model == "QuadraticChannel":
                ra = np.sqrt(self.alpha)
                w = 2.0 * ra * lam
                out = -0.5 * (1.0 / lam + 2.0 * ra / np.tan(w))
            else:
                return self.effective_at(x, z).dlog_prefactor(lam)
        return out if out.ndim else complex(out)

    # -- poles ------------------------------------------------------------

    def pole_positions(self) -> np.ndarray:
        """Real pole positions, ascending.  Channel poles are restricted
        to |m| <= m_max."""
        if self.model == "LinearProfile":
            return np.array([0.0])
        if self.model in ("SimpleCusp", "EffectiveCusp"):
            return np.array([0.0, self.mu])
        gap = np.pi / (2.0 * np.sqrt(self.alpha))
        ms = np.arange(-self.m_max, self.m_max + 1)
        return ms * gap

    def poles_and_residues(self, x: float, z: float) -> List[PoleResidue]:
        """Poles with receiver-dependent residues of Sbar."""
        if self.model == "LinearProfile":
            R2 = (x - self.x_s) ** 2 + (z - self.z_s) ** 2
            return [PoleResidue(0.0, R2 / 4.0, 2, 0)]
        if self.model == "SimpleCusp":
            return [PoleResidue(0.0, z * z / 4.0, 1, 0),
                    PoleResidue(self.mu, x * x / 4.0, 1, 1)]
        if self.model == "EffectiveCusp":
            eff = self.effective_at(x, z)
            return [PoleResidue(0.0, eff.r1 ** 2 / 4.0, 1, 0),
                    PoleResidue(self.mu, eff.r2 ** 2 / 4.0, 1, 1)]
        gap = np.pi / (2.0 * np.sqrt(self.alpha))
        out = []
        for m in range(-self.m_max, self.m_max + 1):
            if m == 0:
                R = ((x - self.x_s) ** 2 + (z - self.z_s) ** 2) / 4.0
                out.append(PoleResidue(0.0, R, 2, 0))
            else:
                R = (z - (-1.0) ** m * self.z_s) ** 2 / 4.0
                out.append(PoleResidue(m * gap, R, 1, m))
        out.sort(key=lambda p: p.lam)
        return out


# -- factories -------------------------------------------------------------

def linear_action(n0: float, a: float, x_s: float = 0.0,
                  z_s: float = 0.0) -> EinbeinAction:
    return EinbeinAction(model="LinearProfile", n0=n0, a=a, x_s=x_s, z_s=z_s)


def cusp_action(n0: float, mu: float) -> EinbeinAction:
    return EinbeinAction(model="SimpleCusp", n0=n0, mu=mu)


def channel_action(n0: float, alpha: float, x_s: float = 0.0,
                   z_s: float = 0.0, m_max: int = 8) -> EinbeinAction:
    return EinbeinAction(model="QuadraticChannel", n0=n0, alpha=alpha,
                         x_s=x_s, z_s=z_s, m_max=m_max)


def effective_cusp_for_ghost(ghost: GhostSource, B: float = 0.0,
                             axis_unit: Tuple[float, float] = (1.0, 0.0),
                             trans_unit: Tuple[float, float] = (0.0, 1.0),
                             ) -> EinbeinAction:
    """Effective cusp model seated on a ghost source (channel geometry by
    default: propagation along +x, transverse along +z)."""
    return EinbeinAction(model="EffectiveCusp", mu=ghost.lam_pole,
                         n_eff=ghost.n_eff, B=B, ghost_point=ghost.point,
                         axis_unit=axis_unit, trans_unit=trans_unit)


def action_for_profile(profile, x_s: float = 0.0, z_s: float = 0.0,
                       m_max: int = 8) -> EinbeinAction:
    """Exact action for a profile that has one (Constant, LinearSquared,
    QuadraticChannel).  Munk and PerturbedChannel have no closed form and
    raise."""
    if profile.omega is not None and profile.omega_strength != 0.0:
        raise ValueError("no exact action for a perturbed profile")
    if profile.kind == "Constant":
        return linear_action(profile.n0, 0.0, x_s, z_s)
    if profile.kind == "LinearSquared":
        return linear_action(profile.n0, profile.a, x_s, z_s)
    if profile.kind == "QuadraticChannel":
        return channel_action(profile.n0, profile.alpha, x_s, z_s, m_max)
    raise ValueError(f"no exact action for profile kind {profile.kind!r}")


# -- module-level ops -------------------------------------------------------

def exact_action(action: EinbeinAction, lam, x: float, z: float):
    """Sbar(lam; x, z) for the given action model."""
    return action.action(lam, x, z)


def action_derivative(action: EinbeinAction, lam, x: float, z: float,
                      order: int = 1):
    """First or second Lambda-derivative of the action."""
    return action.derivative(lam, x, z, order)


def poles_and_residues(action: EinbeinAction, x: float, z: float
                       ) -> List[PoleResidue]:
    """All action poles with their residues at the receiver (x, z)."""
    return action.poles_and_residues(x, z)


def ghost_sources(action: EinbeinAction) -> List[GhostSource]:
    """Ghost sources: points where a pole residue vanishes.

    For the channel these sit at the source range, at depths
    (-1)^m z_s, one per pole index m >= 1; the effective index is the
    channel index at that depth.
    """
    if action.model == "QuadraticChannel":
        gap = np.pi / (2.0 * np.sqrt(action.alpha))
        n2_eff = action.n0 ** 2 - action.alpha * action.z_s ** 2
        if n2_eff <= 0.0:
            raise ValueError("source sits outside the propagating channel")
        n_eff = float(np.sqrt(n2_eff))
        return [GhostSource(m, m * gap, (action.x_s, (-1.0) ** m * action.z_s),
                            n_eff)
                for m in range(1, action.m_max + 1)]
    if action.model == "SimpleCusp":
        return [GhostSource(1, action.mu, (0.0, 0.0), action.n0)]
    if action.model == "EffectiveCusp":
        return [GhostSource(1, action.mu, tuple(action.ghost_point),
                            action.n_eff)]
    return []


def predict_cusps(action: EinbeinAction,
                  m_values: Optional[Sequence[int]] = None
                  ) -> List[CuspPrediction]:
    """Cusp locations predicted from ghost-source geometry.

    Each ghost source at depth z_g with pole lam_pole throws a cusp a
    propagation distance 2 n_eff lam_pole from the true source, at depth
    z_g; the horizontal offsets follow by Pythagoras about the source
    range.  For SimpleCusp the two cusps of the astroid are returned.
    """
    if action.model == "SimpleCusp":
        d = 2.0 * action.n0 * action.mu
        return [CuspPrediction(1, action.mu, d, d, (0.0,), (((0.0), d),)),
                CuspPrediction(-1, action.mu, -d, d, (0.0,), (((0.0), -d),))]
    if action.model == "EffectiveCusp":
        d = 2.0 * action.n_eff * action.mu
        gx, gz = action.ghost_point
        px = gx + d * action.axis_unit[0]
        pz = gz + d * action.axis_unit[1]
        return [CuspPrediction(1, action.mu, pz, d, (d,), (((px), pz),))]
    if action.model != "QuadraticChannel":
        return []
    ghosts = ghost_sources(action)
    if m_values is not None:
        ghosts = [g for g in ghosts if g.m in set(m_values)]
    out = []
    for g in ghosts:
        z_g = g.point[1]
        d = 2.0 * g.n_eff * g.lam_pole
        disc = d * d - (z_g - action.z_s) ** 2
        if disc >= 0.0:
            dx = float(np.sqrt(disc))
            offs = (dx, -dx)
            pts = ((action.x_s + dx, z_g), (action.x_s - dx, z_g))
        else:
            offs, pts = (), ()
        out.append(CuspPrediction(g.m, g.lam_pole, z_g, d, offs, pts))
    return out


def caustic_curve_from_effective(mu: float, n_eff: float,
                                 r2_values: np.ndarray, B: float = 0.0
                                 ) -> Tuple[np.ndarray, np.ndarray, List[Tuple[float, float]]]:
    """Fold curve of the effective cusp model in ghost coordinates.

    Returns (r2, r1, gaps): r1(r2) = [(2 (n_eff - B r2) mu)^(2/3)
    - |r2|^(2/3)]^(3/2) where the bracket is nonnegative (the B = 0 case
    is the astroid r1^(2/3) + r2^(2/3) = (2 n_eff mu)^(2/3)); r1 is NaN
    inside gaps, and gaps lists the (r2_start, r2_end) intervals where the
    curve does not exist.
    """
    r2 = np.asarray(r2_values, dtype=float)
    base = 2.0 * (n_eff - B * r2) * mu
    # a negative local index means no caustic branch at all at that offset
    with np.errstate(invalid="ignore"):
        bracket = np.where(base >= 0.0, np.abs(base) ** (2.0 / 3.0), -np.inf) \
            - np.abs(r2) ** (2.0 / 3.0)
    ok = bracket >= 0.0
    r1 = np.full_like(r2, np.nan)
    r1[ok] = bracket[ok] ** 1.5
    gaps: List[Tuple[float, float]] = []
    in_gap = False
    start = 0.0
    for i, good in enumerate(ok):
        if not good and not in_gap:
            in_gap, start = True, r2[i]
        elif good and in_gap:
            in_gap = False
            gaps.append((start, r2[i - 1]))
    if in_gap:
        gaps.append((start, r2[-1]))
    return r2, r1, gaps


def laurent_gamma1(action: EinbeinAction, x: float, z: float, pole: float,
                   radius: Optional[float] = None, n_nodes: int = 128
                   ) -> complex:
    """Linear Laurent coefficient gamma_1 of Sbar about a pole.

    Sbar = R/(L - p) + gamma_0 + gamma_1 (L - p) + ...; gamma_1 is read
    off by a trapezoid contour integral on a circle around p (exact up to
    exponentially small terms for meromorphic Sbar).  At a ghost source
    the coefficient equals the squared local index minus the range
    curvature term, and exactly n_eff^2 at the locus foot.
    """
    poles = action.pole_positions()
    others = poles[np.abs(poles - pole) > 1e-12]
    if radius is None:
        gap = np.min(np.abs(others - pole)) if others.size else max(abs(pole), 1.0)
        radius = 0.25 * gap
    theta = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
    lam = pole + radius * np.exp(1j * theta)
    vals = action.action(lam, x, z)
    # a_1 = (1/2 pi) int Sbar(p + r e^{i t}) e^{-i t} / r dt
    return complex(np.mean(vals * np.exp(-1j * theta)) / radius)


def residue_pde_residuals(action: EinbeinAction, points: np.ndarray,
                          h: float = 1e-3
                          ) -> Tuple[np.ndarray, np.ndarray]:
    """Check the PDE system obeyed by every residue field R(x, z).

    Each residue satisfies the eikonal-type equation |grad R|^2 = R and
    the linear equation  Lap R = codim / 2, with derivatives taken in the
    receiver point.  Both are evaluated by central differences with step
    h at each supplied point.

    Returns (poles, residuals) where residuals has shape
    (n_poles, n_points, 2): [..., 0] is |grad R|^2 - R and [..., 1] is
    Lap R - codim/2.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    recs = action.poles_and_residues(pts[0, 0], pts[0, 1])
    poles = np.array([r.lam for r in recs])
    codims = np.array([r.codim for r in recs])
    res = np.empty((len(recs), len(pts), 2))

    def residue(j, x, z):
        return action.poles_and_residues(x, z)[j].residue

    for j in range(len(recs)):
        for i, (x, z) in enumerate(pts):
            Rx = (residue(j, x + h, z) - residue(j, x - h, z)) / (2 * h)
            Rz = (residue(j, x, z + h) - residue(j, x, z - h)) / (2 * h)
            R0 = residue(j, x, z)
            Rxx = (residue(j, x + h, z) - 2 * R0 + residue(j, x - h, z)) / h ** 2
            Rzz = (residue(j, x, z + h) - 2 * R0 + residue(j, x, z - h)) / h ** 2
            res[j, i, 0] = Rx ** 2 + Rz ** 2 - R0
            res[j, i, 1] = Rxx + Rzz - codims[j] / 2.0
    return poles, res


# -- stationary points ------------------------------------------------------

def find_critical_points(action: EinbeinAction, x: float, z: float,
                         region: Optional[Tuple[float, float, float, float]] = None,
                         expected: Optional[int] = None,
                         ) -> List[CriticalPoint]:
    """All stationary points of Sbar(.; x, z) inside a complex rectangle.

    region is (re_lo, re_hi, im_lo, im_hi); a model-dependent default
    covers the physically contributing strip.  Seeding is a rectangular
    grid with pitch one eighth of the minimal pole spacing plus dedicated
    seeds around every pole (stationary points approach poles as their
    residues vanish); Newton iterations on dSbar then polish each seed.
    Duplicates are merged at 1e-9 of the local scale.  If expected is
    given and the count differs a warning is emitted (diagnostic only).
    """
    scale = action.scale(x, z)
    gap = action.pole_gap()
    pitch_unit = gap if np.isfinite(gap) else scale
    if region is None:
        if action.model == "QuadraticChannel":
            region = (1e-3 * pitch_unit, (action.m_max + 0.5) * pitch_unit,
                      -1.5 * pitch_unit, 1.5 * pitch_unit)
        else:
            region = (1e-6 * scale, 2.5 * scale, -1.2 * scale, 1.2 * scale)
    re_lo, re_hi, im_lo, im_hi = region
    pitch = pitch_unit / 8.0

    nre = max(int(np.ceil((re_hi - re_lo) / pitch)) + 1, 8)
    nim = max(int(np.ceil((im_hi - im_lo) / pitch)) + 1, 8)
    nre, nim = min(nre, 160), min(nim, 160)
    re = np.linspace(re_lo, re_hi, nre)
    im = np.linspace(im_lo, im_hi, nim)
    seeds = (re[None, :] + 1j * im[:, None]).ravel()

    # pole-local seeds: near a pole p with residue R the stationary points
    # sit at roughly p +- sqrt(R)/n, vanishing with the residue
    nsc = max(action.n_eff if action.model == "EffectiveCusp" else action.n0,
              1e-12)
    extra = []
    for pr in action.poles_and_residues(x, z):
        u = np.sqrt(max(pr.residue, 0.0)) / (2.0 * nsc)
        if u <= 0.0:
            continue
        for f in (0.6, 1.0, 1.6):
            for d in (1.0, -1.0, 1j, -1j):
                extra.append(pr.lam + f * u * d)
    if extra:
        seeds = np.concatenate([seeds, np.array(extra, dtype=complex)])

    lam = seeds.astype(complex)
    with np.errstate(all="ignore"):
        for _ in range(60):
            d1 = action.derivative(lam, x, z, 1)
            d2 = action.derivative(lam, x, z, 2)
            step = d1 / d2
            bad = ~np.isfinite(step)
            step = np.where(bad, 0.0, step)
            # damp huge steps so iterates cannot tunnel across poles
            mag = np.abs(step)
            step = np.where(mag > pitch_unit, step * (pitch_unit / np.maximum(mag, 1e-300)), step)
            lam = lam - step
        d1 = action.derivative(lam, x, z, 1)

    tol = 1e-9 * max(1.0, abs(action.n0) ** 2, abs(action.n_eff) ** 2)
    ok = np.isfinite(lam) & np.isfinite(d1) & (np.abs(d1) < tol)
    margin = 1e-9 * scale
    ok &= (lam.real >= re_lo - margin) & (lam.real <= re_hi + margin)
    ok &= (lam.imag >= im_lo - margin) & (lam.imag <= im_hi + margin)
    poles = action.pole_positions()
    for p in poles:
        ok &= np.abs(lam - p) > 1e-9 * scale
    cands = lam[ok]

    # dedupe at 1e-9 scale, then final scalar polish to full precision
    dedup: List[complex] = []
    for c in sorted(cands, key=lambda v: (round(v.real, 12), round(v.imag, 12))):
        if all(abs(c - d) > 1e-9 * scale for d in dedup):
            dedup.append(c)

    out: List[CriticalPoint] = []
    for c in dedup:
        lamc = c
        for _ in range(8):
            d1 = complex(action.derivative(lamc, x, z, 1))
            d2 = complex(action.derivative(lamc, x, z, 2))
            if not np.isfinite(d1) or not np.isfinite(d2) or d2 == 0:
                break
            if abs(d1) < 1e-13 * max(1.0, abs(d2) * abs(lamc)):
                break
            lamc = lamc - d1 / d2
        if abs(lamc.imag) <= 1e-9 * scale:
            lamc = complex(lamc.real, 0.0)
            cls = "real"
        else:
            cls = "complex-pair member"
        out.append(CriticalPoint(
            lam=lamc,
            action_value=complex(action.action(lamc, x, z)),
            second_derivative=complex(action.derivative(lamc, x, z, 2)),
            classification=cls,
        ))
    out.sort(key=lambda cp: (cp.lam.real, cp.lam.imag))

    if expected is not None and len(out) != expected:
        warnings.warn(
            f"found {len(out)} stationary points, expected {expected} "
            f"(model {action.model} at x={x:g}, z={z:g})", stacklevel=2)
    return out
